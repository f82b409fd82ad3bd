//! Brute-force reference implementations.
//!
//! Nothing here shares a code path with the production routines it checks:
//! the restricted MLE is found by scanning the likelihood, sizes by dense
//! grids without refinement, tail sums by direct enumeration. They are slow
//! by design and are exposed so that the command-line `verify` mode can
//! audit a build.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{admissible_p_t, enumerate_space, joint_pmf, Margin, NullPoint, ObservedTable, TrialDesign};
use crate::opchar::DecisionSet;
use crate::rmle::{restricted_loglik, RestrictedEstimate};
use crate::search::golden_max;

/// Summary of an oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub target: String,
    pub max_abs_deviation: f64,
    pub cases: usize,
}

impl OracleReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_abs_deviation <= tol
    }
}

/// Restricted MLE by a step-1e-5 scan of the likelihood followed by
/// golden-section refinement to 1e-9.
pub fn oracle_rmle(table: ObservedTable, design: TrialDesign, d: f64) -> Result<RestrictedEstimate> {
    design.check(table)?;
    if !(-1.0..=1.0).contains(&d) {
        return domain(format!("constraint d = {d} outside [-1, 1]"));
    }
    Ok(oracle_rmle_unchecked(table, design, d))
}

pub(crate) fn oracle_rmle_unchecked(table: ObservedTable, design: TrialDesign, d: f64) -> RestrictedEstimate {
    let (lo, hi) = admissible_p_t(d);
    if hi - lo <= 0.0 {
        return RestrictedEstimate::at(lo, d);
    }
    let steps = ((hi - lo) / 1e-5).ceil().max(1.0) as usize;
    let h = (hi - lo) / steps as f64;
    let ll = |p: f64| restricted_loglik(table, design, d, p);
    let mut best = (lo, ll(lo));
    for i in 1..=steps {
        let p = if i == steps { hi } else { lo + h * i as f64 };
        let v = ll(p);
        if v > best.1 {
            best = (p, v);
        }
    }
    let (a, b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let (p, v) = golden_max(ll, a, b, 1e-9);
    let p = if v >= best.1 { p } else { best.0 };
    RestrictedEstimate::at(p, d)
}

/// Exhaustive tail sum `P[S >= s_obs]` (or `<=`) at one parameter point,
/// with the statistic given as a plain closure over tables.
pub fn oracle_tail<S: Fn(ObservedTable) -> f64>(
    design: TrialDesign,
    point: NullPoint,
    statistic: S,
    s_obs: f64,
    upper: bool,
) -> Result<f64> {
    let mut total = 0.0;
    for t in enumerate_space(design)? {
        let s = statistic(t);
        let inside = if upper { s >= s_obs - 1e-12 } else { s <= s_obs + 1e-12 };
        if inside {
            total += joint_pmf(t, design, point)?;
        }
    }
    Ok(total)
}

/// Conditional size of `region` maximized over a plain grid of the null
/// region, four times finer in each coordinate than the production default
/// (delta step 5e-4, 2001 points in `P_T`).
pub fn oracle_size(region: &DecisionSet, margin: Margin) -> Result<f64> {
    oracle_size_with(region, margin, 5e-4, 2001)
}

pub fn oracle_size_with(region: &DecisionSet, margin: Margin, delta_step: f64, pt_points: usize) -> Result<f64> {
    if !region.rejected.iter().any(|&r| r) {
        return Ok(0.0);
    }
    let design = region.design;
    let rows: Vec<(usize, usize)> = region
        .rejected
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(i, _)| {
            let t = design.table_at(i);
            (t.x_t as usize, t.x_c as usize)
        })
        .collect();
    let top = margin.boundary();
    let n_delta = ((top + 1.0) / delta_step).round() as usize;
    let mut best: f64 = 0.0;
    for i in 0..=n_delta {
        let delta = (top - delta_step * i as f64).max(-1.0);
        let (lo, hi) = admissible_p_t(delta);
        for j in 0..pt_points {
            let p_t = if pt_points == 1 { lo } else { lo + (hi - lo) * j as f64 / (pt_points - 1) as f64 };
            let p_t = p_t.min(hi);
            let bt = recurrence_pmf(design.n_t, p_t);
            let bc = recurrence_pmf(design.n_c, (p_t - delta).clamp(0.0, 1.0));
            let s: f64 = rows.iter().map(|&(a, b)| bt[a] * bc[b]).sum();
            best = best.max(s);
        }
    }
    Ok(best.min(1.0))
}

/// Binomial pmf by the multiplicative recurrence, independent of the
/// log-space evaluation used in production. Adequate for moderate `n`.
fn recurrence_pmf(n: u32, p: f64) -> Vec<f64> {
    let n = n as usize;
    let mut out = vec![0.0; n + 1];
    if p <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        out[n] = 1.0;
        return out;
    }
    if p > 0.5 {
        out = recurrence_pmf(n as u32, 1.0 - p);
        out.reverse();
        return out;
    }
    let q = 1.0 - p;
    out[0] = q.powi(n as i32);
    for k in 0..n {
        out[k + 1] = out[k] * (n - k) as f64 / (k + 1) as f64 * p / q;
    }
    out
}
