//! Least-squares line fits used for rate estimates.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "line fit needs two or more paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LineFit { slope, intercept, r2 })
}

/// Fit of `log y` against `log x`; every value must be positive.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InsufficientData("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly)
}

/// Coefficients `(c0, c1, c2)` of the least-squares parabola.
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InsufficientData("quadratic fit needs three points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    // centered powers for conditioning
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for (&a, &b) in x.iter().zip(y) {
        let d = a - mx;
        let mut p = 1.0;
        for k in 0..5 {
            s[k] += p;
            if k < 3 {
                t[k] += p * b;
            }
            p *= d;
        }
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(m);
    if d.abs() < 1e-300 {
        return Err(Error::InsufficientData("degenerate abscissae".into()));
    }
    let mut coef = [0.0; 3];
    for k in 0..3 {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = t[r];
        }
        coef[k] = det3(mk) / d;
    }
    // expand a + b d + c d^2 with d = x - mx
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    Ok((a - b * mx + c * mx * mx, b - 2.0 * c * mx, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_and_power_law() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = line_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        let y: Vec<f64> = x.iter().map(|v| 7.0 * v * v).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-13);
        assert!(loglog_fit(&[1.0, 2.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn parabola_recovered() {
        let x: Vec<f64> = (0..9).map(|k| 10.0 + k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 0.25 * v * v).collect();
        let (a, b, c) = quadratic_fit(&x, &y).unwrap();
        assert!((a - 1.0).abs() < 1e-8 && (b + 2.0).abs() < 1e-9 && (c - 0.25).abs() < 1e-11);
    }
}
