//! Confidence intervals for the risk difference: Wald, Miettinen-Nurminen,
//! Chan & Zhang and exact-corrected, plus the exact-corrected score.
//!
//! The score-based bounds are found in p-value space. The lower bound is the
//! largest `delta` whose one-sided p-value `1 - Phi(Z_{-delta})` is at most
//! `alpha / 2`, the upper bound the smallest `delta` with
//! `Phi(Z_{-delta}) <= alpha / 2`. When a margin is supplied the lower-bound
//! bisection is anchored at `-delta0`, so the interval decision agrees with
//! the test decision exactly rather than up to the bisection tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exact::{cz_grid, first_crossing, p_exact_with, Arms, Orientation, SearchConfig, TableProfile};
use crate::model::{Margin, ObservedTable, TrialDesign};
use crate::normal::{std_normal_cdf, std_normal_quantile, std_normal_sf, upper_probit};
use crate::search::bisect;
use crate::stats::{delta_grid, extended_ratio, is_nondecreasing, wald_se, z_delta_parts, z_delta_unchecked};

/// Bisection tolerance for the score-based bounds.
pub const ROOT_TOL: f64 = 1e-7;

/// p-values are clamped to `[PROBIT_CLAMP, 1 - PROBIT_CLAMP]` before taking probits.
pub const PROBIT_CLAMP: f64 = 1e-12;

const MONOTONE_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wald,
    Mn,
    Cz,
    Ec,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ec, Method::Cz, Method::Mn, Method::Wald];

    pub fn name(self) -> &'static str {
        match self {
            Method::Wald => "wald",
            Method::Mn => "mn",
            Method::Cz => "cz",
            Method::Ec => "ec",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wald" => Ok(Method::Wald),
            "mn" => Ok(Method::Mn),
            "cz" => Ok(Method::Cz),
            "ec" => Ok(Method::Ec),
            _ => domain(format!("unknown method '{s}' (expected wald, mn, cz or ec)")),
        }
    }
}

/// A two-sided `1 - alpha` confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: Method,
    /// The score was nondecreasing in delta on a 0.01 grid. When it is not,
    /// each bound is the outermost crossing.
    pub monotone_ok: bool,
    /// The restricted standard error vanished at the margin.
    pub degenerate: bool,
    /// With a margin: whether `lower > -delta0` agrees with the test
    /// rejecting at `alpha / 2`.
    pub consistent: Option<bool>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// exact-corrected score

/// The exact-corrected score of one table. Chan's exact p-value is computed
/// once and reused for every delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcScore {
    pub table: ObservedTable,
    pub design: TrialDesign,
    pub margin: Margin,
    pub p_exact: f64,
    /// `Phi^{-1}(1 - p_exact)` after clamping.
    pub target: f64,
    /// `Phi^{-1}(1 - p_asy)` after the same clamping, taken as `Z_delta0`
    /// limited to the clamped probit range.
    pub asymptotic: f64,
    sd0: f64,
    shift: f64,
}

impl EcScore {
    pub fn new(table: ObservedTable, design: TrialDesign, margin: Margin) -> Result<Self> {
        Self::with_config(table, design, margin, &SearchConfig::default())
    }

    pub fn with_config(table: ObservedTable, design: TrialDesign, margin: Margin, cfg: &SearchConfig) -> Result<Self> {
        let p = p_exact_with(table, design, margin, cfg)?.value;
        Self::from_p_exact(table, design, margin, p)
    }

    /// Build from an already computed exact p-value.
    pub fn from_p_exact(table: ObservedTable, design: TrialDesign, margin: Margin, p_exact: f64) -> Result<Self> {
        design.check(table)?;
        if !(0.0..=1.0).contains(&p_exact) {
            return domain(format!("p-value must lie in [0, 1], got {p_exact}"));
        }
        let target = upper_probit(p_exact.clamp(PROBIT_CLAMP, 1.0 - PROBIT_CLAMP));
        let (num0, sd0) = z_delta_parts(table, design, margin.value());
        let bound = upper_probit(PROBIT_CLAMP);
        let asymptotic = extended_ratio(num0, sd0).clamp(-bound, bound);
        let shift = if sd0 > 0.0 { sd0 * (asymptotic - target) } else { 0.0 };
        Ok(EcScore { table, design, margin, p_exact, target, asymptotic, sd0, shift })
    }

    /// `Z^EC_delta`.
    pub fn z(&self, delta: f64) -> f64 {
        if delta == self.margin.value() && self.sd0 > 0.0 && self.unclamped() {
            return self.target;
        }
        let (num, sd) = z_delta_parts(self.table, self.design, delta);
        extended_ratio(num - self.shift, sd)
    }

    /// The correction `Z_delta - Z^EC_delta`.
    pub fn correction(&self, delta: f64) -> Result<f64> {
        let (_, sd) = z_delta_parts(self.table, self.design, delta);
        if sd == 0.0 {
            return Err(Error::DegenerateVariance { x_t: self.table.x_t, x_c: self.table.x_c, delta });
        }
        if delta == self.margin.value() && self.unclamped() {
            return Ok(z_delta_unchecked(self.table, self.design, delta) - self.target);
        }
        Ok(self.shift / sd)
    }

    /// `Z_delta0` lies inside the clamped probit range, so the score meets
    /// `Phi^{-1}(1 - p_exact)` exactly at the margin.
    fn unclamped(&self) -> bool {
        self.asymptotic == z_delta_unchecked(self.table, self.design, self.margin.value())
    }

    pub fn is_degenerate(&self) -> bool {
        self.sd0 == 0.0
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&delta) {
        return domain(format!("delta = {delta} outside [-1, 1]"));
    }
    Ok(())
}

/// Exact correction term at `delta`.
pub fn ec_correction(table: ObservedTable, design: TrialDesign, margin: Margin, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    EcScore::new(table, design, margin)?.correction(delta)
}

/// Exact-corrected score `Z^EC_delta`.
pub fn z_ec(table: ObservedTable, design: TrialDesign, margin: Margin, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let score = EcScore::new(table, design, margin)?;
    score.correction(delta)?;
    Ok(score.z(delta))
}

// ---------------------------------------------------------------------------
// inversion helpers

/// Largest delta with `yes(delta)`, where `yes` holds on a left segment.
fn invert_lower<F: FnMut(f64) -> bool>(mut yes: F, anchor: Option<f64>) -> f64 {
    let (y, n) = match anchor {
        Some(a) if yes(a) => {
            if yes(1.0) {
                return 1.0;
            }
            (a, 1.0)
        }
        Some(a) => {
            if !yes(-1.0) {
                return -1.0;
            }
            (-1.0, a)
        }
        None => {
            if !yes(-1.0) {
                return -1.0;
            }
            if yes(1.0) {
                return 1.0;
            }
            (-1.0, 1.0)
        }
    };
    let (y, n) = bisect(yes, y, n, ROOT_TOL);
    0.5 * (y + n)
}

/// Smallest delta with `yes(delta)`, where `yes` holds on a right segment.
fn invert_upper<F: FnMut(f64) -> bool>(mut yes: F) -> f64 {
    if yes(-1.0) {
        return -1.0;
    }
    if !yes(1.0) {
        return 1.0;
    }
    let (y, n) = bisect(yes, 1.0, -1.0, ROOT_TOL);
    0.5 * (y + n)
}

/// Outermost crossings when the score is not monotone: the lower bound is
/// the first point from the left where `lower_yes` fails, the upper bound the
/// first point from the right where `upper_yes` fails.
fn outermost<L, U>(mut lower_yes: L, mut upper_yes: U) -> (f64, f64)
where
    L: FnMut(f64) -> bool,
    U: FnMut(f64) -> bool,
{
    let grid = delta_grid(MONOTONE_STEP);
    let lower = match grid.iter().position(|&d| !lower_yes(d)) {
        None => 1.0,
        Some(0) => -1.0,
        Some(i) => {
            let (y, n) = bisect(&mut lower_yes, grid[i - 1], grid[i], ROOT_TOL);
            0.5 * (y + n)
        }
    };
    let upper = match grid.iter().rev().position(|&d| !upper_yes(d)) {
        None => -1.0,
        Some(0) => 1.0,
        Some(j) => {
            let i = grid.len() - 1 - j;
            let (y, n) = bisect(&mut upper_yes, grid[i + 1], grid[i], ROOT_TOL);
            0.5 * (y + n)
        }
    };
    (lower, upper)
}

/// Invert a score `z(shift)` nondecreasing in `shift`. `anchor_p` fixes the
/// lower-tail p-value used at `-delta0`.
fn invert_score<Z: Fn(f64) -> f64>(z: Z, alpha: f64, anchor: Option<(f64, f64)>) -> (f64, f64, bool) {
    let half = alpha / 2.0;
    let monotone = is_nondecreasing(delta_grid(MONOTONE_STEP).into_iter().map(&z));
    let lower_yes = |d: f64| match anchor {
        Some((a, p)) if d == a => p <= half,
        _ => std_normal_sf(z(-d)) <= half,
    };
    let upper_yes = |d: f64| std_normal_cdf(z(-d)) <= half;
    if monotone {
        let lower = invert_lower(lower_yes, anchor.map(|(a, _)| a));
        (lower, invert_upper(upper_yes), true)
    } else {
        let (lower, upper) = outermost(lower_yes, upper_yes);
        (lower, upper, false)
    }
}

// ---------------------------------------------------------------------------
// the four intervals

/// Wald interval `p_t - p_c -+ z_{1-alpha/2} se`, clamped to `[-1, 1]`.
pub fn ci_wald(table: ObservedTable, design: TrialDesign, alpha: f64) -> Result<Interval> {
    design.check(table)?;
    check_alpha(alpha)?;
    let (hat_t, hat_c) = table.proportions(design);
    let z = std_normal_quantile(1.0 - alpha / 2.0)?.value();
    let half = z * wald_se(table, design);
    Ok(Interval {
        lower: (hat_t - hat_c - half).clamp(-1.0, 1.0),
        upper: (hat_t - hat_c + half).clamp(-1.0, 1.0),
        level: 1.0 - alpha,
        method: Method::Wald,
        monotone_ok: true,
        degenerate: false,
        consistent: None,
    })
}

/// Miettinen-Nurminen score interval.
pub fn ci_mn(table: ObservedTable, design: TrialDesign, alpha: f64) -> Result<Interval> {
    ci_mn_with(table, design, alpha, None)
}

/// Miettinen-Nurminen interval, anchored at `-delta0` when a margin is given.
pub fn ci_mn_with(table: ObservedTable, design: TrialDesign, alpha: f64, margin: Option<Margin>) -> Result<Interval> {
    design.check(table)?;
    check_alpha(alpha)?;
    let z = |d: f64| z_delta_unchecked(table, design, d);
    let anchor = margin.map(|m| (m.boundary(), std_normal_sf(z(m.value()))));
    let (lower, upper, monotone_ok) = invert_score(z, alpha, anchor);
    let consistent = anchor.map(|(a, p)| (lower > a) == (p <= alpha / 2.0));
    Ok(Interval { lower, upper, level: 1.0 - alpha, method: Method::Mn, monotone_ok, degenerate: false, consistent })
}

/// Exact-corrected interval.
pub fn ci_ec(table: ObservedTable, design: TrialDesign, margin: Margin, alpha: f64) -> Result<Interval> {
    ci_ec_with(table, design, margin, alpha, &SearchConfig::default())
}

pub fn ci_ec_with(
    table: ObservedTable,
    design: TrialDesign,
    margin: Margin,
    alpha: f64,
    cfg: &SearchConfig,
) -> Result<Interval> {
    check_alpha(alpha)?;
    ci_ec_from_score(&EcScore::with_config(table, design, margin, cfg)?, alpha)
}

/// Exact-corrected interval from a prepared score.
pub fn ci_ec_from_score(score: &EcScore, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    let anchor = (score.margin.boundary(), score.p_exact);
    let (lower, upper, monotone_ok) = invert_score(|d| score.z(d), alpha, Some(anchor));
    Ok(Interval {
        lower,
        upper,
        level: 1.0 - alpha,
        method: Method::Ec,
        monotone_ok,
        degenerate: score.is_degenerate(),
        consistent: Some((lower > anchor.0) == (score.p_exact <= alpha / 2.0)),
    })
}

/// Chan & Zhang interval on the plain delta grid.
pub fn ci_cz(table: ObservedTable, design: TrialDesign, alpha: f64) -> Result<Interval> {
    ci_cz_with(table, design, alpha, None, &SearchConfig::default())
}

/// Chan & Zhang interval. With a margin, `-delta0` is added to the scan grid
/// and the consistency bit is computed against the Chan & Zhang p-value.
pub fn ci_cz_with(
    table: ObservedTable,
    design: TrialDesign,
    alpha: f64,
    margin: Option<Margin>,
    cfg: &SearchConfig,
) -> Result<Interval> {
    design.check(table)?;
    check_alpha(alpha)?;
    let arms = Arms::new(design);
    let grid = cz_grid(cfg.delta_step, margin.map(|m| m.boundary()));
    let half = alpha / 2.0;

    let low = TableProfile { table, arms: &arms, cfg, orientation: Orientation::Upper };
    let mut memo: Vec<Option<f64>> = vec![None; grid.len()];
    let lower = first_crossing(&grid, |k| *memo[k].get_or_insert_with(|| low.at(grid[k])), &low, half).unwrap_or(1.0);

    let consistent = margin.map(|m| {
        let stop = grid.iter().position(|&g| g == m.boundary()).expect("anchor on grid");
        let p = crate::exact::cz_from_scan(
            &grid,
            stop,
            |k| *memo[k].get_or_insert_with(|| low.at(grid[k])),
            |a, b| low.refine(a, b),
            cfg.delta_slack(),
        );
        (lower > m.boundary()) == (p.value <= half)
    });

    let high = TableProfile { table, arms: &arms, cfg, orientation: Orientation::Lower };
    let rev: Vec<f64> = grid.iter().rev().copied().collect();
    let mut memo: Vec<Option<f64>> = vec![None; rev.len()];
    let upper = first_crossing(&rev, |k| *memo[k].get_or_insert_with(|| high.at(rev[k])), &high, half).unwrap_or(-1.0);

    Ok(Interval { lower, upper, level: 1.0 - alpha, method: Method::Cz, monotone_ok: true, degenerate: false, consistent })
}

/// Chan & Zhang intervals for every table of a design, sharing the profile
/// evaluations across tables. Identical to [`ci_cz_with`] table by table.
pub fn ci_cz_all(design: TrialDesign, alpha: f64, margin: Option<Margin>, cfg: &SearchConfig) -> Result<Vec<Interval>> {
    TrialDesign::new(design.n_t, design.n_c)?;
    check_alpha(alpha)?;
    let arms = Arms::new(design);
    let grid = cz_grid(cfg.delta_step, margin.map(|m| m.boundary()));
    let profiles = crate::exact::profile_matrix(&arms, &grid, cfg, true);
    let half = alpha / 2.0;
    let n = grid.len();
    use rayon::prelude::*;
    Ok((0..design.size())
        .into_par_iter()
        .map(|i| {
            let table = design.table_at(i);
            let low = TableProfile { table, arms: &arms, cfg, orientation: Orientation::Upper };
            let high = TableProfile { table, arms: &arms, cfg, orientation: Orientation::Lower };
            let lower = first_crossing(&grid, |k| profiles.upper_tail[k][i], &low, half).unwrap_or(1.0);
            let rev: Vec<f64> = grid.iter().rev().copied().collect();
            let upper = first_crossing(&rev, |k| profiles.lower_tail[n - 1 - k][i], &high, half).unwrap_or(-1.0);
            let consistent = margin.map(|m| {
                let stop = grid.iter().position(|&g| g == m.boundary()).expect("anchor on grid");
                let p = crate::exact::cz_from_scan(
                    &grid,
                    stop,
                    |k| profiles.upper_tail[k][i],
                    |a, b| low.refine(a, b),
                    cfg.delta_slack(),
                );
                (lower > m.boundary()) == (p.value <= half)
            });
            Interval { lower, upper, level: 1.0 - alpha, method: Method::Cz, monotone_ok: true, degenerate: false, consistent }
        })
        .collect())
}
