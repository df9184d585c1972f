//! Taylor-series function-complexity measures.
//!
//! For φ(z) = Σ_i c_i z^i and C* = 10⁴:
//!
//! ```text
//! C_ε(φ, R) = Σ_i ( (C*R)^i + (√(log(1/ε))/√i · C*R)^i ) |c_i|
//! C_s(φ, R) = C* Σ_i (i+1)^{1.75} R^i |c_i|
//! ```
//!
//! The i = 0 term of C_ε's second summand is taken as |c_0| · 1, the i → 0
//! limit of (a/√i·b)^i for any positive a, b (the exponent wins: x^x → 1).
//!
//! For transcendental presets the reported values are exact sums of the
//! preset's truncation (chosen so the dropped C_s tail is < 1e−12 relative
//! for R ≤ 4); C_ε of such presets grows like e^{C*·R} and may saturate to
//! `+inf` in f64 — that is the honest value of the truncated sum at this
//! magnitude, not an error.

use crate::{Error, Result};

/// The paper-fixed complexity constant C* = 10⁴.
pub const C_STAR: f64 = 1e4;

/// Which analytic family a truncated series came from; drives the reported
/// truncation tail bound (zero for genuinely finite series).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailFamily {
    /// The coefficient list is the whole function.
    Finite,
    /// |c_i| ≤ 1/i! (exp, sin, cos).
    ExpLike,
    /// |c_i| ≤ π^i/i! (cos of πz).
    ExpPiLike,
}

/// A truncated Taylor series Σ_{i=0..K} c_i z^i.
#[derive(Clone, Debug)]
pub struct TaylorSeries {
    coeffs: Vec<f64>,
    name: String,
    tail: TailFamily,
}

impl TaylorSeries {
    /// Finite series from raw coefficients (c_0 first). Coefficients must be
    /// finite; an empty list is the zero series.
    pub fn new(name: impl Into<String>, coeffs: Vec<f64>) -> Result<TaylorSeries> {
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::non_finite(format!("Taylor coefficient {bad} is not finite")));
        }
        Ok(TaylorSeries { coeffs, name: name.into(), tail: TailFamily::Finite })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Truncation order K (degree of the last stored coefficient).
    pub fn truncation_order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Evaluate by Horner's rule.
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }
}

/// Named preset series.
#[derive(Clone, Debug, PartialEq)]
pub enum TaylorPreset {
    /// z^n.
    Monomial(usize),
    Sin,
    Cos,
    Exp,
    /// 2z − z².
    Quadratic2zMinusZ2,
    /// cos(πz).
    CosPi,
}

/// Truncation order for exp/sin/cos presets: the dropped C_s tail at R = 4 is
/// below 1e−12 relative (at R = 1 the classical check
/// (K+2)^{1.75}/(K+1)! < 1e−16 holds with huge slack).
const K_EXP: usize = 40;
/// Truncation order for cos(πz): effective radius πR reaches ~12.6 at R = 4.
const K_COS_PI: usize = 90;

/// Build a preset series.
pub fn taylor_preset(preset: &TaylorPreset) -> TaylorSeries {
    match preset {
        TaylorPreset::Monomial(n) => {
            let mut c = vec![0.0; n + 1];
            c[*n] = 1.0;
            TaylorSeries { coeffs: c, name: format!("monomial({n})"), tail: TailFamily::Finite }
        }
        TaylorPreset::Quadratic2zMinusZ2 => TaylorSeries {
            coeffs: vec![0.0, 2.0, -1.0],
            name: "quadratic_2z_minus_z2".to_string(),
            tail: TailFamily::Finite,
        },
        TaylorPreset::Exp => {
            let mut c = vec![0.0; K_EXP + 1];
            let mut fact = 1.0;
            for (i, ci) in c.iter_mut().enumerate() {
                if i > 0 {
                    fact *= i as f64;
                }
                *ci = 1.0 / fact;
            }
            TaylorSeries { coeffs: c, name: "exp".to_string(), tail: TailFamily::ExpLike }
        }
        TaylorPreset::Sin => {
            let mut c = vec![0.0; K_EXP + 1];
            let mut fact = 1.0;
            for i in 0..=K_EXP {
                if i > 0 {
                    fact *= i as f64;
                }
                if i % 2 == 1 {
                    c[i] = if i % 4 == 1 { 1.0 } else { -1.0 } / fact;
                }
            }
            TaylorSeries { coeffs: c, name: "sin".to_string(), tail: TailFamily::ExpLike }
        }
        TaylorPreset::Cos => {
            let mut c = vec![0.0; K_EXP + 1];
            let mut fact = 1.0;
            for i in 0..=K_EXP {
                if i > 0 {
                    fact *= i as f64;
                }
                if i % 2 == 0 {
                    c[i] = if i % 4 == 0 { 1.0 } else { -1.0 } / fact;
                }
            }
            TaylorSeries { coeffs: c, name: "cos".to_string(), tail: TailFamily::ExpLike }
        }
        TaylorPreset::CosPi => {
            let mut c = vec![0.0; K_COS_PI + 1];
            // π^i / i! computed incrementally to stay in range.
            let mut term = 1.0f64;
            for i in 0..=K_COS_PI {
                if i > 0 {
                    term *= std::f64::consts::PI / i as f64;
                }
                if i % 2 == 0 {
                    c[i] = if i % 4 == 0 { term } else { -term };
                }
            }
            TaylorSeries { coeffs: c, name: "cos_pi".to_string(), tail: TailFamily::ExpPiLike }
        }
    }
}

/// Parse a preset name as used by config files and the CLI:
/// `monomial(n)` / `monomial:n`, `sin`, `cos`, `exp`,
/// `quadratic_2z_minus_z2`, `cos_pi`.
pub fn parse_preset(name: &str) -> Result<TaylorPreset> {
    let t = name.trim();
    if let Some(rest) = t.strip_prefix("monomial") {
        let inner = rest
            .trim_start_matches([':', '('])
            .trim_end_matches(')')
            .trim();
        let n: usize = inner.parse().map_err(|_| {
            Error::invalid(format!("cannot parse monomial degree from {name:?}"))
        })?;
        return Ok(TaylorPreset::Monomial(n));
    }
    match t {
        "sin" => Ok(TaylorPreset::Sin),
        "cos" => Ok(TaylorPreset::Cos),
        "exp" => Ok(TaylorPreset::Exp),
        "quadratic_2z_minus_z2" => Ok(TaylorPreset::Quadratic2zMinusZ2),
        "cos_pi" => Ok(TaylorPreset::CosPi),
        _ => Err(Error::invalid(format!("unknown Taylor preset {name:?}"))),
    }
}

/// Both complexity measures of a series at a given radius and accuracy.
#[derive(Clone, Debug)]
pub struct ComplexityReport {
    pub name: String,
    pub r: f64,
    pub eps: f64,
    pub c_s: f64,
    pub c_eps: f64,
    /// Upper bound on the C_s mass dropped by the series' truncation at this
    /// R (0 for finite series; +inf if the bound's geometric-ratio condition
    /// fails, i.e. the truncation is too short for this radius).
    pub truncation_tail_bound: f64,
}

impl ComplexityReport {
    /// CSV row matching the schema `name,R,eps,c_s,c_eps,tail_bound`.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.name, self.r, self.eps, self.c_s, self.c_eps, self.truncation_tail_bound
        )
    }
}

/// Smoothness complexity C_s(φ, R) = C* Σ (i+1)^{1.75} R^i |c_i|.
pub fn c_s(series: &TaylorSeries, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("radius R must be positive, got {r}")));
    }
    let mut sum = 0.0;
    let mut r_pow = 1.0;
    for (i, &c) in series.coeffs.iter().enumerate() {
        sum += ((i + 1) as f64).powf(1.75) * r_pow * c.abs();
        r_pow *= r;
    }
    Ok(C_STAR * sum)
}

/// Accuracy complexity
/// C_ε(φ, R) = Σ ((C*R)^i + (√(log(1/ε))/√i · C*R)^i)|c_i|, with the i = 0
/// term of the second summand read as |c_0| (its i → 0 limit).
pub fn c_eps(series: &TaylorSeries, r: f64, eps: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("radius R must be positive, got {r}")));
    }
    if !(eps.is_finite() && eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("accuracy eps must lie in (0, 1), got {eps}")));
    }
    let log_inv_eps = (1.0 / eps).ln();
    let cr = C_STAR * r;
    let mut sum = 0.0;
    for (i, &c) in series.coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let (first, second) = if i == 0 {
            (1.0, 1.0)
        } else {
            let i_f = i as f64;
            (cr.powi(i as i32), ((log_inv_eps / i_f).sqrt() * cr).powi(i as i32))
        };
        sum += (first + second) * c.abs();
    }
    Ok(sum)
}

/// Build the full report (see [`c_s`], [`c_eps`]). May report `c_eps = +inf`
/// for transcendental presets at large C*·R; see the module docs.
pub fn complexity_report(series: &TaylorSeries, r: f64, eps: f64) -> Result<ComplexityReport> {
    let cs = c_s(series, r)?;
    let ce = c_eps(series, r, eps)?;
    let tail = match series.tail {
        TailFamily::Finite => 0.0,
        TailFamily::ExpLike => cs_tail_bound(series.truncation_order(), r),
        TailFamily::ExpPiLike => cs_tail_bound(series.truncation_order(), std::f64::consts::PI * r),
    };
    Ok(ComplexityReport {
        name: series.name.clone(),
        r,
        eps,
        c_s: cs,
        c_eps: ce,
        truncation_tail_bound: tail,
    })
}

/// Upper bound on C* Σ_{i>K} (i+1)^{1.75} ρ^i / i! : the first dropped term
/// times a geometric envelope (valid when the term ratio q stays below 1).
fn cs_tail_bound(k: usize, rho: f64) -> f64 {
    let kp = k as f64;
    let q = 2f64.powf(1.75) * rho / (kp + 2.0);
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let ln_term =
        C_STAR.ln() + 1.75 * (kp + 2.0).ln() + (kp + 1.0) * rho.ln() - libm::lgamma(kp + 2.0);
    ln_term.exp() / (1.0 - q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_coefficients_are_the_expected_ones() {
        let m2 = taylor_preset(&TaylorPreset::Monomial(2));
        assert_eq!(m2.coeffs(), &[0.0, 0.0, 1.0]);
        let q = taylor_preset(&TaylorPreset::Quadratic2zMinusZ2);
        assert_eq!(q.coeffs(), &[0.0, 2.0, -1.0]);
    }

    #[test]
    fn exp_truncation_satisfies_the_classical_r1_check() {
        let k = taylor_preset(&TaylorPreset::Exp).truncation_order() as f64;
        let check = (k + 2.0).powf(1.75) * (-libm::lgamma(k + 2.0)).exp();
        assert!(check < 1e-16, "tail check at R=1 is {check}");
    }

    #[test]
    fn zero_series_has_zero_complexity() {
        let z = TaylorSeries::new("zero", vec![0.0, 0.0]).unwrap();
        let rep = complexity_report(&z, 1.0, 0.1).unwrap();
        assert_eq!(rep.c_s, 0.0);
        assert_eq!(rep.c_eps, 0.0);
    }
}
