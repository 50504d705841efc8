//! Sweep data and plain CSV / SVG emission for charts.

use std::io::Write;

use serde::Serialize;

use crate::scalar::Scalar;
use crate::tunneling::{transmission_coefficient, MarketParams, TunnelError};
use crate::verification::{turning_point, WavefunctionProfile};

/// A named table of numeric columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// `T` and `d` for `points` widths spaced evenly strictly inside `(0, s*)`.
pub fn sweep_width(params: &MarketParams, points: usize) -> Result<Series, TunnelError> {
    let s_star = turning_point(params);
    let mut rows = Vec::with_capacity(points);
    for i in 1..=points {
        let k = s_star * i as f64 / (points + 1) as f64;
        let ev = transmission_coefficient(params, k)?;
        rows.push(vec![k, ev.transmission, ev.penetration]);
    }
    Ok(Series {
        columns: vec!["k", "t", "d"],
        rows,
    })
}

/// `T` against implied vol for a fixed width, log-spaced from just above
/// the barrier-closing vol `rK²` up to `sigma_max`.
pub fn sweep_sigma(r: f64, k: f64, sigma_max: f64, points: usize) -> Result<Series, TunnelError> {
    let sigma_min = r * k * k * (1.0 + 1e-6);
    if !(sigma_max > sigma_min) {
        return Err(TunnelError::InvalidVolatility(sigma_max));
    }
    let span = (sigma_max / sigma_min).ln();
    let denom = points.saturating_sub(1).max(1) as f64;
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let sigma = sigma_min * (span * i as f64 / denom).exp();
        let ev = transmission_coefficient(&MarketParams::new(r, sigma)?, k)?;
        rows.push(vec![sigma, ev.transmission]);
    }
    Ok(Series {
        columns: vec!["sigma", "t"],
        rows,
    })
}

pub fn profile_series<T: Scalar>(profile: &WavefunctionProfile<T>) -> Series {
    let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
    let rows = profile
        .s_grid
        .iter()
        .zip(&profile.psi)
        .zip(&profile.kappa)
        .map(|((&s, &p), &k)| vec![f(s), f(p), f(k)])
        .collect();
    Series {
        columns: vec!["s", "psi", "kappa"],
        rows,
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// A single polyline with labelled axes and min/max ticks.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let bounds = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    };
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let escape = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    svg.push_str(&format!(
        "<path d=\"M{left},{top} L{left},{bottom} L{right},{bottom}\" stroke=\"black\" fill=\"none\"/>\n"
    ));
    let label = |x: f64, y: f64, anchor: &str, text: String| {
        format!("<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{text}</text>\n")
    };
    svg.push_str(&label(left, bottom + 15.0, "start", format!("{x0:.6}")));
    svg.push_str(&label(right, bottom + 15.0, "end", format!("{x1:.6}")));
    svg.push_str(&label(left - 5.0, bottom, "end", format!("{y0:.6}")));
    svg.push_str(&label(left - 5.0, top + 4.0, "end", format!("{y1:.6}")));
    svg.push_str(&label(WIDTH / 2.0, HEIGHT - 10.0, "middle", escape(x_label)));
    svg.push_str(&label(15.0, HEIGHT / 2.0, "middle", escape(y_label)));
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        points.join(" ")
    ));
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_sweep_is_monotone_and_inside() {
        let params = MarketParams::new(0.03, 0.47).unwrap();
        let s = sweep_width(&params, 200).unwrap();
        let t = s.column("t").unwrap();
        let k = s.column("k").unwrap();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(k[0] > 0.0 && *k.last().unwrap() < turning_point(&params));
    }

    #[test]
    fn sigma_sweep_tends_to_one_at_both_ends() {
        let s = sweep_sigma(0.03, 2.1, 1000.0, 400).unwrap();
        let t = s.column("t").unwrap();
        let min = t.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(t[0] > 0.999, "{}", t[0]);
        assert!(*t.last().unwrap() > 0.998, "{}", t.last().unwrap());
        assert!(min < 0.95);
    }

    #[test]
    fn csv_layout() {
        let s = Series {
            columns: vec!["a", "b"],
            rows: vec![vec![1.0, 0.5], vec![2.0, 0.25]],
        };
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,b\n1,0.5\n2,0.25\n");
    }

    #[test]
    fn svg_is_deterministic_and_escaped() {
        let a = render_svg("T <vs> K", "K", "T", &[0.0, 1.0, 2.0], &[0.1, 0.5, 0.9]);
        let b = render_svg("T <vs> K", "K", "T", &[0.0, 1.0, 2.0], &[0.1, 0.5, 0.9]);
        assert_eq!(a, b);
        assert!(a.contains("T &lt;vs&gt; K"));
        assert!(a.contains("<polyline"));
    }
}
