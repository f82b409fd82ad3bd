//! Maximum likelihood estimation of `(P_T, P_C)` restricted to a fixed
//! difference `P_T - P_C = d`, and the score standard error built from it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{admissible_p_t, ObservedTable, TrialDesign};

/// Restricted estimates `(p_t, p_c)` with `p_t - p_c = d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedEstimate {
    pub p_t: f64,
    pub p_c: f64,
    pub d: f64,
}

impl RestrictedEstimate {
    pub(crate) fn at(p_t: f64, d: f64) -> Self {
        let (lo, hi) = admissible_p_t(d);
        let p_t = p_t.clamp(lo, hi);
        RestrictedEstimate { p_t, p_c: (p_t - d).clamp(0.0, 1.0), d }
    }
}

/// Maximizer of the joint likelihood over `{(p, p - d)}`.
///
/// Uses the trigonometric solution of the stationarity cubic, polished by
/// Newton steps. `d = 0` returns the pooled proportion and `|d| = 1` the
/// single admissible point.
pub fn restricted_mle(table: ObservedTable, design: TrialDesign, d: f64) -> Result<RestrictedEstimate> {
    design.check(table)?;
    if !(-1.0..=1.0).contains(&d) {
        return domain(format!("constraint d = {d} outside [-1, 1]"));
    }
    let est = closed_form(table, design, d);
    #[cfg(feature = "rmle-crosscheck")]
    {
        let oracle = crate::oracle::oracle_rmle(table, design, d)?;
        if (oracle.p_t - est.p_t).abs() > 1e-6 {
            panic!("restricted MLE disagrees with oracle: {est:?} vs {oracle:?} for {table:?} in {design:?}");
        }
    }
    Ok(est)
}

pub(crate) fn closed_form(table: ObservedTable, design: TrialDesign, d: f64) -> RestrictedEstimate {
    if d >= 1.0 {
        return RestrictedEstimate { p_t: 1.0, p_c: 0.0, d: 1.0 };
    }
    if d <= -1.0 {
        return RestrictedEstimate { p_t: 0.0, p_c: 1.0, d: -1.0 };
    }
    let n_t = design.n_t as f64;
    let n_c = design.n_c as f64;
    if d == 0.0 {
        let pooled = (table.x_t + table.x_c) as f64 / (n_t + n_c);
        return RestrictedEstimate { p_t: pooled, p_c: pooled, d };
    }
    let (hat_t, hat_c) = table.proportions(design);
    let theta = n_c / n_t;
    let a = 1.0 + theta;
    let b = -(1.0 + theta + hat_t + theta * hat_c + d * (theta + 2.0));
    let c = d * d + d * (2.0 * hat_t + theta + 1.0) + hat_t + theta * hat_c;
    let e = -hat_t * d * (1.0 + d);

    let a3 = 3.0 * a;
    let v = b * b * b / (a3 * a3 * a3) - b * c / (6.0 * a * a) + e / (2.0 * a);
    let disc = b * b / (a3 * a3) - c / a3;
    let u = if v >= 0.0 { 1.0 } else { -1.0 } * disc.max(0.0).sqrt();
    if u == 0.0 {
        // triple root: fall back to a direct search of the likelihood
        return crate::oracle::oracle_rmle_unchecked(table, design, d);
    }
    let ratio = (v / (u * u * u)).clamp(-1.0, 1.0);
    let w = (PI + ratio.acos()) / 3.0;
    let root = |j: f64| polish(2.0 * u * (w + 2.0 * PI * j / 3.0).cos() - b / a3, a, b, c, e);

    // near a double root rounding can select a neighbouring branch, so the
    // other roots and the segment ends are compared by likelihood
    let (lo, hi) = admissible_p_t(d);
    let mut best = root(0.0).clamp(lo, hi);
    let mut best_ll = restricted_loglik(table, design, d, best);
    for p in [root(1.0), root(2.0), lo, hi] {
        let p = p.clamp(lo, hi);
        let ll = restricted_loglik(table, design, d, p);
        if ll > best_ll {
            best = p;
            best_ll = ll;
        }
    }
    RestrictedEstimate::at(best, d)
}

/// Newton steps on `a p^3 + b p^2 + c p + e`, kept only while they shrink the residual.
fn polish(mut p: f64, a: f64, b: f64, c: f64, e: f64) -> f64 {
    let poly = |p: f64| ((a * p + b) * p + c) * p + e;
    let mut r = poly(p).abs();
    for _ in 0..3 {
        let deriv = (3.0 * a * p + 2.0 * b) * p + c;
        if deriv == 0.0 || !deriv.is_finite() {
            break;
        }
        let next = p - poly(p) / deriv;
        let rn = poly(next).abs();
        if !(rn < r) {
            break;
        }
        p = next;
        r = rn;
    }
    p
}

/// `sqrt(p_t (1 - p_t) / n_t + p_c (1 - p_c) / n_c)`.
pub fn sigma_hat(est: &RestrictedEstimate, design: TrialDesign) -> f64 {
    (est.p_t * (1.0 - est.p_t) / design.n_t as f64 + est.p_c * (1.0 - est.p_c) / design.n_c as f64).sqrt()
}

/// Restricted log-likelihood of `p_t` on the segment `p_c = p_t - d`.
pub(crate) fn restricted_loglik(table: ObservedTable, design: TrialDesign, d: f64, p_t: f64) -> f64 {
    fn term(k: f64, p: f64) -> f64 {
        if k == 0.0 {
            0.0
        } else if p <= 0.0 {
            f64::NEG_INFINITY
        } else {
            k * p.ln()
        }
    }
    let p_c = (p_t - d).clamp(0.0, 1.0);
    let x_t = table.x_t as f64;
    let x_c = table.x_c as f64;
    term(x_t, p_t)
        + term(design.n_t as f64 - x_t, 1.0 - p_t)
        + term(x_c, p_c)
        + term(design.n_c as f64 - x_c, 1.0 - p_c)
}
