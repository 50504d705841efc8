//! Exit criteria. Each test prints one `[PASS]`/`[FAIL]` line per criterion
//! (run with `--nocapture` to see them) and then asserts it.

use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tunnelcoef::market_data::{parse_ohlc, parse_vols, write_ohlc, write_vols, Date, OhlcBar, VolPoint};
use tunnelcoef::range_detect::RangeConfig;
use tunnelcoef::scenario::reference_scenario;
use tunnelcoef::strategy::{backtest, BacktestInput, Outcome, Side, StrategyConfig, DEFAULT_TICK};
use tunnelcoef::table1::{check_row, row, D_TOLERANCE, REFERENCE_ROWS, T_TOLERANCE};
use tunnelcoef::tunneling::barrier_ratio;
use tunnelcoef::*;

fn report(name: &str, pass: bool, detail: String) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

fn random_tunneling(rng: &mut ChaCha8Rng) -> (MarketParams, f64) {
    let r = rng.gen_range(0.005..0.10);
    let sigma = rng.gen_range(0.05..1.0);
    let params = MarketParams::new(r, sigma).unwrap();
    let k = turning_point(&params) * rng.gen_range(0.05..0.99);
    (params, k)
}

#[test]
fn criterion_1_reference_table_reproduction() {
    let start = Instant::now();
    let mut worst_t: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    for r in &REFERENCE_ROWS {
        let check = check_row(r).unwrap();
        println!(
            "    {:<5} T={:.6} (printed {}) d={:.6} (printed {})",
            r.symbol, check.eval.transmission, r.t, check.eval.penetration, r.d
        );
        worst_t = worst_t.max(check.t_delta());
        worst_d = worst_d.max(check.d_delta());
    }
    let elapsed = start.elapsed();
    let pass = worst_t <= T_TOLERANCE && worst_d <= D_TOLERANCE && elapsed.as_secs_f64() < 1.0;
    report(
        "reference table reproduction",
        pass,
        format!("max |dT| = {worst_t:.3e} (tol 1e-3), max |dd| = {worst_d:.3e} (tol 1e-4), {elapsed:?}"),
    );
}

#[test]
fn criterion_2_oracle_equivalence() {
    let start = Instant::now();
    let mut cases: Vec<(MarketParams, f64)> = REFERENCE_ROWS
        .iter()
        .map(|r| (MarketParams::new(r.r, r.sigma).unwrap(), r.k))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(20130207);
    cases.extend((0..50).map(|_| random_tunneling(&mut rng)));

    let mut worst: f64 = 0.0;
    for (params, k) in &cases {
        let closed = transmission_coefficient(params, *k).unwrap().exponent;
        let spec = BarrierSpec::new(*params, *k).unwrap();
        let numeric = wkb_exponent_numeric(&spec, 1e-12).unwrap();
        worst = worst.max(((numeric - closed) / closed).abs());
    }
    let elapsed = start.elapsed();
    report(
        "oracle equivalence",
        worst <= 1e-9 && elapsed.as_secs_f64() < 5.0,
        format!("{} specs, max relative deviation {worst:.3e} (tol 1e-9), {elapsed:?}", cases.len()),
    );
}

#[test]
fn criterion_3_consistency_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (params, k) = random_tunneling(&mut rng);
        let d = penetration_distance(&params, k).unwrap();
        let gap = turning_point(&params) - k;
        worst = worst.max((gap - d).abs() / turning_point(&params));
    }
    report(
        "turning point consistency",
        worst <= 4.0 * f64::EPSILON,
        format!("1000 inputs, max |(s* - K) - d| / s* = {worst:.3e}"),
    );
}

#[test]
fn criterion_4_monotonicity() {
    let mut ok = true;
    let mut detail = Vec::new();
    for r in &REFERENCE_ROWS {
        let params = MarketParams::new(r.r, r.sigma).unwrap();
        let s_star = turning_point(&params);
        let ts: Vec<f64> = (1..=100)
            .map(|i| transmission_coefficient(&params, s_star * i as f64 / 101.0).unwrap().transmission)
            .collect();
        let increasing = ts.windows(2).all(|w| w[1] > w[0]);
        let near = transmission_coefficient(&params, s_star * (1.0 - 1e-8)).unwrap().transmission;
        let limit = near > 1.0 - 1e-6;
        ok &= increasing && limit;
        detail.push(format!("{} increasing={increasing} T(s*(1-1e-8))={near:.9}", r.symbol));
    }
    report("monotonicity in K and turning-point limit", ok, detail.join("; "));
}

#[test]
fn criterion_5_regime_totality() {
    let tol = f64::turning_tolerance();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut inputs: Vec<(MarketParams, f64)> = Vec::new();
    for _ in 0..2000 {
        let params = MarketParams::new(rng.gen_range(0.001..0.2), rng.gen_range(0.01..2.0)).unwrap();
        let k = turning_point(&params) * rng.gen_range(0.01..2.0);
        inputs.push((params, k));
    }
    // Boundary cases straddling the turning tolerance band.
    for _ in 0..200 {
        let params = MarketParams::new(rng.gen_range(0.001..0.2), rng.gen_range(0.01..2.0)).unwrap();
        let s_star = turning_point(&params);
        for f in [1.0, 1.0 - 1e-14, 1.0 + 1e-14, 1.0 - 1e-13, 1.0 + 1e-13, 1.0 - 1e-11, 1.0 + 1e-11, 1.0 - 1e-9, 1.0 + 1e-9] {
            inputs.push((params, s_star * f));
        }
    }

    let mut violations = 0;
    let mut counts = [0usize; 3];
    for (params, k) in &inputs {
        let ratio = barrier_ratio(params, *k);
        let result = transmission_coefficient(params, *k);
        let good = match &result {
            Ok(ev) => {
                let finite = [ev.lambda, ev.u, ev.exponent, ev.transmission, ev.penetration]
                    .iter()
                    .all(|x| x.is_finite());
                let consistent = match ev.regime {
                    Regime::Tunneling => {
                        counts[0] += 1;
                        ev.penetration > 0.0 && ratio < 1.0 - tol && ratio < 1.0
                    }
                    Regime::AtTurningPoint => {
                        counts[1] += 1;
                        ev.penetration == 0.0 && ev.transmission == 1.0 && (ratio - 1.0).abs() <= tol
                    }
                    Regime::NoBarrier => false,
                };
                finite && consistent
            }
            Err(TunnelError::NoBarrier { ratio: reported }) => {
                counts[2] += 1;
                ratio > 1.0 + tol && *reported == ratio && penetration_distance(params, *k).is_err()
            }
            Err(_) => false,
        };
        if !good {
            violations += 1;
        }
    }
    report(
        "regime totality",
        violations == 0 && counts.iter().all(|&c| c > 0),
        format!(
            "{} inputs (tunneling {}, turning {}, no-barrier {}), {violations} violations",
            inputs.len(),
            counts[0],
            counts[1],
            counts[2]
        ),
    );
}

/// `ψ(K) − 1` at `n`, `2n`, `4n` steps; the ratio of successive
/// differences is `2^p` for a method of order `p`.
fn observed_order(spec: &BarrierSpec, n: usize) -> f64 {
    let g = |m| integrate_wavefunction(spec, m).unwrap().growth[0];
    let (a, b, c) = (g(n), g(2 * n), g(4 * n));
    ((a - b) / (b - c)).log2()
}

#[test]
fn criterion_6a_ode_convergence_order() {
    let spec: BarrierSpec = BarrierSpec::new(MarketParams::new(0.03, 0.47).unwrap(), 3.9).unwrap();
    let order = observed_order(&spec, 100);
    report(
        "RK4 step-halving order on LNKD barrier",
        (3.5..=4.5).contains(&order),
        format!("observed order {order:.3} (expected 4 +/- 0.5)"),
    );
}

#[test]
fn criterion_6b_ode_wkb_agreement() {
    let spec: BarrierSpec = BarrierSpec::new(MarketParams::new(0.03, 0.47).unwrap(), 3.9).unwrap();
    let integral = wkb_exponent_numeric(&spec, 1e-12).unwrap() / 2.0;
    let log_ratio = integrate_wavefunction(&spec, 20_000).unwrap().log_growth();
    let rel = (log_ratio - integral).abs() / integral;
    // Context only: the same comparison on a thick barrier (integral ~ 125).
    let thick: BarrierSpec = BarrierSpec::new(MarketParams::new(0.03, 0.01).unwrap(), 0.3).unwrap();
    let thick_integral = wkb_exponent_numeric(&thick, 1e-12).unwrap() / 2.0;
    let thick_rel =
        (integrate_wavefunction(&thick, 20_000).unwrap().log_growth() - thick_integral).abs() / thick_integral;
    report(
        "ln psi(K)/psi(s*) vs integral of kappa on LNKD barrier",
        rel <= 0.15,
        format!(
            "ln ratio {log_ratio:.6e}, integral {integral:.6e}, relative gap {rel:.3} (tol 0.15); \
             thick-barrier gap {thick_rel:.3}"
        ),
    );
}

fn lnkd_backtest(bars: &[OhlcBar], vols: &[VolPoint]) -> tunnelcoef::strategy::BacktestReport {
    // The LNKD walk 0.63 -> 0.47 is a 25.4% fall.
    let strat = StrategyConfig::new(0.95, 0.25, 5, Side::Call).unwrap();
    backtest(&BacktestInput {
        symbol: "LNKD",
        bars,
        vols,
        r: 0.03,
        range_cfg: RangeConfig::default(),
        strat_cfg: strat,
        tick: DEFAULT_TICK,
        range_override: None,
    })
    .unwrap()
}

#[test]
fn criterion_7_strategy_determinism_and_no_lookahead() {
    let sc = reference_scenario(row("LNKD").unwrap());
    let first = lnkd_backtest(&sc.bars, &sc.vols);
    let second = lnkd_backtest(&sc.bars, &sc.vols);
    let bytes = |r: &tunnelcoef::strategy::BacktestReport| {
        let mut out = Vec::new();
        r.write_jsonl(&mut out).unwrap();
        out
    };
    let identical = bytes(&first) == bytes(&second);

    let mut lookahead_ok = true;
    for i in 0..sc.bars.len() {
        let cut = sc.bars[i].date();
        let vols: Vec<VolPoint> = sc.vols.iter().copied().filter(|v| v.date() <= cut).collect();
        if vols.is_empty() {
            continue;
        }
        let truncated = lnkd_backtest(&sc.bars[..=i], &vols);
        let early = |rep: &tunnelcoef::strategy::BacktestReport| {
            rep.signals
                .iter()
                .filter(|s| s.signal.date <= cut)
                .map(|s| s.signal.clone())
                .collect::<Vec<_>>()
        };
        lookahead_ok &= early(&truncated) == early(&first);
    }

    let range = RangeBound::new(123.3, 127.2).unwrap();
    let signal_ok = match first.signals.as_slice() {
        [only] => {
            only.signal.side == Side::Call
                && only.signal.date == Date::from_ymd_opt(2013, 2, 7).unwrap()
                && only.signal.exit_target == range.resistance() + only.signal.eval.penetration
                && only.outcome == Outcome::Hit
                && only.resolved_on == Some(Date::from_ymd_opt(2013, 2, 8).unwrap())
        }
        _ => false,
    };
    report(
        "strategy determinism, no look-ahead, LNKD signal",
        identical && lookahead_ok && signal_ok,
        format!(
            "byte-identical={identical} no-lookahead={lookahead_ok} signals={} single Call hit at resistance+d={signal_ok}",
            first.signals.len()
        ),
    );
}

fn arb_bar_series() -> impl Strategy<Value = Vec<OhlcBar>> {
    prop::collection::vec((0.01f64..1e5, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..0.5), 0..40).prop_map(
        |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (low, fo, fc, up))| {
                    let high = low * (1.0 + up) + 1e-6;
                    let open = low + fo * (high - low);
                    let close = low + fc * (high - low);
                    let date = Date::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Duration::days(i as i64 * 3);
                    OhlcBar::new(date, open, high, low, close).unwrap()
                })
                .collect()
        },
    )
}

#[test]
fn criterion_8_parser_robustness() {
    // Fuzz: arbitrary bytes, and printable noise after a valid header.
    let mut runner = TestRunner::new(Config {
        cases: 2000,
        ..Config::default()
    });
    let mut fuzz_ok = true;
    let mut rejected = 0usize;
    let result = runner.run(
        &(prop::collection::vec(any::<u8>(), 0..300), "[0-9a-z,.\\-\n\r \"]{0,200}"),
        |(bytes, text)| {
            let ohlc_text = format!("date,open,high,low,close\n{text}");
            let vols_text = format!("date,iv\n{text}");
            for r in [
                parse_ohlc(bytes.as_slice()).map(|_| ()),
                parse_vols(bytes.as_slice()).map(|_| ()),
                parse_ohlc(ohlc_text.as_bytes()).map(|_| ()),
                parse_vols(vols_text.as_bytes()).map(|_| ()),
            ] {
                if let Err(e) = r {
                    prop_assert!(e.line().is_some_and(|l| l >= 1), "no line diagnostic: {}", e);
                }
            }
            Ok(())
        },
    );
    if let Err(e) = result {
        println!("    fuzz failure: {e}");
        fuzz_ok = false;
    }
    // Count a deterministic sample of rejections for the report line.
    for text in ["", "garbage", "date,iv\n2013-13-01,0.3", "date,iv\n2013-01-01,-1", "date,iv\n2013-01-01"] {
        rejected += usize::from(parse_vols(text.as_bytes()).is_err());
    }

    let mut runner = TestRunner::new(Config {
        cases: 1000,
        ..Config::default()
    });
    let round_trip = runner.run(&arb_bar_series(), |bars| {
        let mut buf = Vec::new();
        write_ohlc(&mut buf, &bars).unwrap();
        prop_assert_eq!(parse_ohlc(buf.as_slice()).unwrap(), bars.clone());
        let vols: Vec<VolPoint> = bars.iter().map(|b| VolPoint::new(b.date(), b.close() / 1e3).unwrap()).collect();
        let mut buf = Vec::new();
        write_vols(&mut buf, &vols).unwrap();
        prop_assert_eq!(parse_vols(buf.as_slice()).unwrap(), vols);
        Ok(())
    });
    let round_trip_ok = round_trip.is_ok();
    if let Err(e) = round_trip {
        println!("    round-trip failure: {e}");
    }
    report(
        "parser robustness and round-trip",
        fuzz_ok && round_trip_ok && rejected == 5,
        format!("2000 fuzz cases ok={fuzz_ok}, 1000 round-trip series ok={round_trip_ok}"),
    );
}
