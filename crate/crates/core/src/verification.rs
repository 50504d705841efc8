//! Numerical re-derivation of the transmission exponent from the barrier.
//!
//! Rearranged, the time-independent pricing equation reads
//! `ψ'' = C·(1/s² − r/σ)·ψ` with `C = r(σ²+r)/σ⁴`. Between the range
//! width `K` and the turning point `s* = sqrt(σ/r)` the coefficient is
//! positive, so `κ(s) = sqrt(C·(1/s² − r/σ))` is a real decay rate and the
//! semiclassical exponent is `2∫κ ds` over `[K, s*]`.
//!
//! Nothing here calls into the closed form; the two routes are compared
//! by callers and tests.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::tunneling::MarketParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("no barrier: K = {k} is not below the turning point {s_star}")]
    NoBarrier { k: f64, s_star: f64 },
    #[error("range width must be finite and > 0, got {0}")]
    InvalidWidth(f64),
    #[error("s = {s} lies outside the barrier [{k}, {s_star}]")]
    OutOfBarrier { s: f64, k: f64, s_star: f64 },
    #[error("relative tolerance {0} outside the accepted range (1e-14, 1e-3)")]
    InvalidTolerance(f64),
    #[error("quadrature did not converge: estimate {estimate} with error bound {error}")]
    NonConvergence { estimate: f64, error: f64 },
    #[error("{0} steps cannot resolve the barrier; at least 100 are required")]
    TooFewSteps(usize),
}

fn as_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// The barrier region `[K, s*]` for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec<T = f64> {
    params: MarketParams<T>,
    k: T,
    s_star: T,
    c: T,
}

impl<T: Scalar> BarrierSpec<T> {
    pub fn new(params: MarketParams<T>, k: T) -> Result<Self, LabError> {
        if !(k.is_finite() && k > T::zero()) {
            return Err(LabError::InvalidWidth(as_f64(k)));
        }
        let s_star = turning_point(&params);
        if !(s_star > k) {
            return Err(LabError::NoBarrier {
                k: as_f64(k),
                s_star: as_f64(s_star),
            });
        }
        let (r, sigma) = (params.r(), params.sigma());
        let sigma2 = sigma * sigma;
        let c = r * (sigma2 + r) / (sigma2 * sigma2);
        Ok(Self {
            params,
            k,
            s_star,
            c,
        })
    }

    pub fn params(&self) -> &MarketParams<T> {
        &self.params
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn s_star(&self) -> T {
        self.s_star
    }

    /// Inverse of the second-derivative coefficient, `r(σ²+r)/σ⁴`.
    pub fn c(&self) -> T {
        self.c
    }

    /// `κ²` written with the gap `s* − s` factored out so that it stays
    /// accurate next to the turning point.
    fn kappa_sq_from_gap(&self, gap: T) -> T {
        let s = self.s_star - gap;
        let ss = s * self.s_star;
        (self.c * gap * (self.s_star + s) / (ss * ss)).max(T::zero())
    }
}

/// `s* = sqrt(σ/r)`, where `1/s²` meets `r/σ`.
pub fn turning_point<T: Scalar>(params: &MarketParams<T>) -> T {
    (params.sigma() / params.r()).sqrt()
}

/// Local decay rate inside the barrier.
pub fn kappa<T: Scalar>(spec: &BarrierSpec<T>, s: T) -> Result<T, LabError> {
    if !(s >= spec.k && s <= spec.s_star) {
        return Err(LabError::OutOfBarrier {
            s: as_f64(s),
            k: as_f64(spec.k),
            s_star: as_f64(spec.s_star),
        });
    }
    Ok(spec.kappa_sq_from_gap(spec.s_star - s).sqrt())
}

// 15-point Kronrod extension of the 7-point Gauss rule.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_PANELS: usize = 4096;

#[derive(Clone, Copy)]
struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn gauss_kronrod<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Panel<T> {
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    let fc = f(mid);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * T::lit(x);
        let pair = f(mid - dx) + f(mid + dx);
        kronrod = kronrod + pair * T::lit(w);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Globally adaptive G7/K15 quadrature: bisect the worst panel until the
/// summed error bound is within `rel_tol` of the estimate.
fn adaptive_integral<T: Scalar, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    rel_tol: T,
) -> Result<T, LabError> {
    let mut panels = vec![gauss_kronrod(&f, a, b)];
    let floor = T::lit(50.0) * T::epsilon();
    loop {
        let value = panels.iter().fold(T::zero(), |acc, p| acc + p.value);
        let error = panels.iter().fold(T::zero(), |acc, p| acc + p.error);
        if error <= rel_tol.max(floor) * value.abs() || error == T::zero() {
            return Ok(value);
        }
        if panels.len() >= MAX_PANELS {
            return Err(LabError::NonConvergence {
                estimate: as_f64(value),
                error: as_f64(error),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = (p.a + p.b) / T::lit(2.0);
        panels.push(gauss_kronrod(&f, p.a, mid));
        panels.push(gauss_kronrod(&f, mid, p.b));
    }
}

/// `2∫κ ds` over `[K, s*]` by adaptive quadrature.
///
/// The square-root zero of `κ` at `s*` is removed with `s = s* − t²`, which
/// turns the integrand into `2t·κ(s* − t²)`, smooth on `[0, sqrt(s* − K)]`.
pub fn wkb_exponent_numeric<T: Scalar>(spec: &BarrierSpec<T>, rel_tol: T) -> Result<T, LabError> {
    if !(rel_tol > T::lit(1e-14) && rel_tol < T::lit(1e-3)) {
        return Err(LabError::InvalidTolerance(as_f64(rel_tol)));
    }
    let t_max = (spec.s_star - spec.k).sqrt();
    if t_max == T::zero() {
        return Ok(T::zero());
    }
    let integrand = |t: T| T::lit(2.0) * t * spec.kappa_sq_from_gap(t * t).sqrt();
    let integral = adaptive_integral(integrand, T::zero(), t_max, rel_tol)?;
    Ok(T::lit(2.0) * integral)
}

/// Sampled solution of the barrier equation.
///
/// `growth` holds `ψ − 1` as integrated; `psi` is `1 + growth`. Near the
/// turning point the growth can sit below the resolution of `psi`, so
/// comparisons that need every digit should read `growth`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionProfile<T = f64> {
    pub s_grid: Vec<T>,
    pub psi: Vec<T>,
    pub growth: Vec<T>,
    pub kappa: Vec<T>,
}

impl<T: Scalar> WavefunctionProfile<T> {
    /// `ψ` at the inner end `s = K`.
    pub fn psi_at_width(&self) -> T {
        self.psi[0]
    }

    /// `ln ψ(K)`, computed from the growth to keep small values exact.
    pub fn log_growth(&self) -> T {
        self.growth[0].ln_1p()
    }
}

/// Classical RK4 on `ψ'' = κ²(s)·ψ` from `s*` down to `K`, starting at
/// `ψ(s*) = 1`, `ψ'(s*) = 0`.
pub fn integrate_wavefunction<T: Scalar>(
    spec: &BarrierSpec<T>,
    n_steps: usize,
) -> Result<WavefunctionProfile<T>, LabError> {
    if n_steps < 100 {
        return Err(LabError::TooFewSteps(n_steps));
    }
    let n = T::from_usize(n_steps).ok_or(LabError::TooFewSteps(n_steps))?;
    let width = spec.s_star - spec.k;
    // March in the gap g = s* − s so the coefficient never subtracts nearby values.
    let h = width / n;
    let accel = |gap: T, phi: T| spec.kappa_sq_from_gap(gap) * (T::one() + phi);

    let mut gaps = Vec::with_capacity(n_steps + 1);
    let mut growth = Vec::with_capacity(n_steps + 1);
    // (φ, dφ/dg) with φ = ψ − 1; dψ/ds = −dφ/dg.
    let (mut phi, mut dphi) = (T::zero(), T::zero());
    gaps.push(T::zero());
    growth.push(phi);
    let half = h / T::lit(2.0);
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    for i in 0..n_steps {
        let g = width * T::from_usize(i).unwrap_or_else(T::zero) / n;
        let k1 = (dphi, accel(g, phi));
        let k2 = (dphi + half * k1.1, accel(g + half, phi + half * k1.0));
        let k3 = (dphi + half * k2.1, accel(g + half, phi + half * k2.0));
        let k4 = (dphi + h * k3.1, accel(g + h, phi + h * k3.0));
        phi = phi + h / six * (k1.0 + two * k2.0 + two * k3.0 + k4.0);
        dphi = dphi + h / six * (k1.1 + two * k2.1 + two * k3.1 + k4.1);
        let next = if i + 1 == n_steps {
            width
        } else {
            width * T::from_usize(i + 1).unwrap_or_else(T::zero) / n
        };
        gaps.push(next);
        growth.push(phi);
    }

    // Ascending in s: reverse the march.
    gaps.reverse();
    growth.reverse();
    let s_grid: Vec<T> = gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| if i == 0 { spec.k } else { spec.s_star - g })
        .collect();
    let kappa = gaps.iter().map(|&g| spec.kappa_sq_from_gap(g).sqrt()).collect();
    let psi = growth.iter().map(|&g| T::one() + g).collect();
    Ok(WavefunctionProfile {
        s_grid,
        psi,
        growth,
        kappa,
    })
}
