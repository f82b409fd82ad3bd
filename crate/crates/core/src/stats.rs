//! Test statistics ordering the sample space, their asymptotic p-values and
//! structural checks on them.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::intervals::EcScore;
use crate::model::{Margin, ObservedTable, TrialDesign};
use crate::normal::std_normal_sf;
use crate::rmle::{closed_form, sigma_hat};

/// Statistics compared within this tolerance are tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    DeltaProjected,
    Wald,
}

/// A statistic together with its projection parameter: `Z_shift` for the
/// delta-projected score, or the Wald score with margin `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub kind: StatisticKind,
    pub shift: f64,
}

impl Statistic {
    pub fn delta_projected(delta: f64) -> Self {
        Statistic { kind: StatisticKind::DeltaProjected, shift: delta }
    }

    pub fn wald(delta0: f64) -> Self {
        Statistic { kind: StatisticKind::Wald, shift: delta0 }
    }

    pub fn eval(&self, table: ObservedTable, design: TrialDesign) -> f64 {
        match self.kind {
            StatisticKind::DeltaProjected => z_delta_unchecked(table, design, self.shift),
            StatisticKind::Wald => wald_unchecked(table, design, self.shift),
        }
    }

    /// Values over the whole sample space in enumeration order.
    pub fn values(&self, design: TrialDesign) -> Vec<f64> {
        let mut out = Vec::with_capacity(design.size());
        for x_t in 0..=design.n_t {
            for x_c in 0..=design.n_c {
                out.push(self.eval(ObservedTable { x_t, x_c }, design));
            }
        }
        out
    }
}

/// `num / den` for a nonnegative `den`, with `0/0 = 0` and `x/0 = sign(x) inf`.
pub(crate) fn extended_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        num.signum() * f64::INFINITY
    }
}

/// Delta-projected score `(p_t - p_c + delta) / sigma_delta`, where the
/// standard error uses the MLE restricted to `P_T - P_C = -delta`.
pub fn z_delta(table: ObservedTable, design: TrialDesign, delta: f64) -> Result<f64> {
    design.check(table)?;
    if !(-1.0..=1.0).contains(&delta) {
        return domain(format!("delta = {delta} outside [-1, 1]"));
    }
    Ok(z_delta_unchecked(table, design, delta))
}

pub(crate) fn z_delta_parts(table: ObservedTable, design: TrialDesign, delta: f64) -> (f64, f64) {
    let (hat_t, hat_c) = table.proportions(design);
    let est = closed_form(table, design, -delta);
    (hat_t - hat_c + delta, sigma_hat(&est, design))
}

pub(crate) fn z_delta_unchecked(table: ObservedTable, design: TrialDesign, delta: f64) -> f64 {
    let (num, sd) = z_delta_parts(table, design, delta);
    extended_ratio(num, sd)
}

/// Wald score with the unrestricted standard error.
pub fn wald_z(table: ObservedTable, design: TrialDesign, margin: Margin) -> Result<f64> {
    design.check(table)?;
    Ok(wald_unchecked(table, design, margin.value()))
}

pub(crate) fn wald_se(table: ObservedTable, design: TrialDesign) -> f64 {
    let (hat_t, hat_c) = table.proportions(design);
    (hat_t * (1.0 - hat_t) / design.n_t as f64 + hat_c * (1.0 - hat_c) / design.n_c as f64).sqrt()
}

fn wald_unchecked(table: ObservedTable, design: TrialDesign, delta0: f64) -> f64 {
    let (hat_t, hat_c) = table.proportions(design);
    extended_ratio(hat_t - hat_c + delta0, wald_se(table, design))
}

/// Asymptotic (Miettinen-Nurminen) p-value `1 - Phi(Z_delta0)`.
pub fn p_asy(table: ObservedTable, design: TrialDesign, margin: Margin) -> Result<f64> {
    Ok(std_normal_sf(z_delta(table, design, margin.value())?))
}

/// Wald p-value `1 - Phi(Z_Wald)`.
pub fn p_wald(table: ObservedTable, design: TrialDesign, margin: Margin) -> Result<f64> {
    Ok(std_normal_sf(wald_z(table, design, margin)?))
}

/// A pair of neighbouring tables for which a Barnard inequality fails:
/// `statistic(first) < statistic(second)` although `first` should dominate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarnardViolation {
    pub first: ObservedTable,
    pub second: ObservedTable,
}

/// Exhaustive check of `S(x_t, x_c) >= S(x_t, x_c + 1)` and
/// `S(x_t, x_c) >= S(x_t - 1, x_c)` for the statistic of `kind` at `margin`.
pub fn barnard_check(kind: StatisticKind, design: TrialDesign, margin: Margin) -> Result<Vec<BarnardViolation>> {
    TrialDesign::new(design.n_t, design.n_c)?;
    let stat = Statistic { kind, shift: margin.value() };
    Ok(barnard_violations(design, &stat.values(design)))
}

/// Barnard check on arbitrary statistic values given in enumeration order.
pub fn barnard_violations(design: TrialDesign, values: &[f64]) -> Vec<BarnardViolation> {
    assert_eq!(values.len(), design.size());
    let at = |x_t: u32, x_c: u32| values[design.index(ObservedTable { x_t, x_c })];
    let mut out = Vec::new();
    for x_t in 0..=design.n_t {
        for x_c in 0..=design.n_c {
            let here = at(x_t, x_c);
            if x_c < design.n_c && here < at(x_t, x_c + 1) - TIE_TOLERANCE {
                out.push(BarnardViolation {
                    first: ObservedTable { x_t, x_c },
                    second: ObservedTable { x_t, x_c: x_c + 1 },
                });
            }
            if x_t > 0 && here < at(x_t - 1, x_c) - TIE_TOLERANCE {
                out.push(BarnardViolation {
                    first: ObservedTable { x_t, x_c },
                    second: ObservedTable { x_t: x_t - 1, x_c },
                });
            }
        }
    }
    out
}

/// Whether `Z_delta` (or the exact-corrected score) is nondecreasing over a
/// delta grid of the given step on `[-1, 1]`, ties within 1e-10.
pub fn monotonicity_check(
    table: ObservedTable,
    design: TrialDesign,
    grid_step: f64,
    use_ec: bool,
    margin: Margin,
) -> Result<bool> {
    design.check(table)?;
    if !(grid_step > 0.0) {
        return domain(format!("grid step must be positive, got {grid_step}"));
    }
    let grid = delta_grid(grid_step);
    if use_ec {
        let score = EcScore::new(table, design, margin)?;
        Ok(is_nondecreasing(grid.iter().map(|&d| score.z(d))))
    } else {
        Ok(is_nondecreasing(grid.iter().map(|&d| z_delta_unchecked(table, design, d))))
    }
}

pub(crate) fn delta_grid(step: f64) -> Vec<f64> {
    let k = (2.0 / step).round().max(1.0) as usize;
    (0..=k).map(|i| -1.0 + 2.0 * i as f64 / k as f64).collect()
}

pub(crate) fn is_nondecreasing<I: Iterator<Item = f64>>(values: I) -> bool {
    let mut prev = f64::NEG_INFINITY;
    for v in values {
        if v < prev - 1e-10 {
            return false;
        }
        prev = prev.max(v);
    }
    true
}
