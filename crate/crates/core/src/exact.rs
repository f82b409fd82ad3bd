//! Exact unconditional tail probabilities with the nuisance parameter
//! eliminated by maximization.
//!
//! For a statistic `S` and a null point `(P_T, delta)` the tail probability
//! is `P[S(X) >= S(x)]` (or `<=`). Chan's exact p-value maximizes the upper
//! tail of `Z_delta0` over `P_T` on the null boundary `delta = -delta0`;
//! the Chan & Zhang quantities `P_L` and `P_U` do the same at an arbitrary
//! difference `delta` with the statistic `Z_{-delta}`, and the Chan & Zhang
//! p-value further maximizes `P_L` over `delta <= -delta0`.
//!
//! The tail set does not depend on `P_T`, so it is computed once per
//! `(statistic, s_obs)` and reused over the whole `P_T` grid. When every row
//! of the statistic is nonincreasing in `x_c` (the first Barnard inequality)
//! the tail is a staircase and a tail probability costs `O(n_t)` given the
//! control-arm cumulative sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{admissible_p_t, ln_choose, ArmPmf, Margin, NullPoint, ObservedTable, TrialDesign};
use crate::search::{bisect, golden_max, linspace, refinable_peaks};
use crate::stats::{Statistic, TIE_TOLERANCE};

/// Grid and tolerance settings for the nuisance-parameter and delta searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Coarse grid size over the admissible `P_T` range.
    pub pt_points: usize,
    /// Coarse local maxima within this distance of the coarse optimum are refined.
    pub peak_slack: f64,
    /// Golden-section tolerance in `P_T`.
    pub pt_tol: f64,
    /// Coarse delta step for the Chan & Zhang scans.
    pub delta_step: f64,
    /// Golden-section tolerance in delta.
    pub delta_tol: f64,
    /// Refine the Chan & Zhang delta scans between grid points. Off by
    /// default: the p-value is then the maximum over the delta grid.
    pub refine_delta: bool,
    /// Bisection tolerance for Chan & Zhang interval bounds.
    pub crossing_tol: f64,
}

impl SearchConfig {
    pub(crate) fn delta_slack(&self) -> Option<f64> {
        self.refine_delta.then_some(self.peak_slack)
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            pt_points: 1001,
            peak_slack: 1e-6,
            pt_tol: 1e-8,
            delta_step: 1e-3,
            delta_tol: 1e-8,
            refine_delta: false,
            crossing_tol: 1e-5,
        }
    }
}

/// Which tail of the statistic is summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `S >= s_obs`
    Upper,
    /// `S <= s_obs`
    Lower,
}

/// Outcome of a maximization over the nuisance parameter `P_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximizationResult {
    pub value: f64,
    pub argmax_p_t: f64,
    pub grid_points: usize,
    pub refined: bool,
}

/// Chan & Zhang p-value together with the maximizing difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CzPValue {
    pub value: f64,
    pub argmax_delta: f64,
}

// ---------------------------------------------------------------------------
// arm probability vectors

#[derive(Debug, Clone)]
pub(crate) struct Arms {
    design: TrialDesign,
    t: ArmPmf,
    c: ArmPmf,
}

impl Arms {
    pub(crate) fn new(design: TrialDesign) -> Self {
        Arms { design, t: ArmPmf::new(design.n_t), c: ArmPmf::new(design.n_c) }
    }

    fn stride(&self) -> usize {
        let nt = self.design.n_t as usize + 1;
        let nc = self.design.n_c as usize + 1;
        nt + nc + 2 * (nc + 1)
    }

    /// Fill `[b_t | b_c | cdf_c | sf_c]` for the point `(p_t, delta)`.
    pub(crate) fn fill(&self, p_t: f64, delta: f64, out: &mut [f64]) {
        let nt = self.design.n_t as usize + 1;
        let nc = self.design.n_c as usize + 1;
        let (bt, rest) = out.split_at_mut(nt);
        let (bc, rest) = rest.split_at_mut(nc);
        let (cdf, sf) = rest.split_at_mut(nc + 1);
        let p_c = (p_t - delta).clamp(0.0, 1.0);
        self.t.fill(p_t.clamp(0.0, 1.0), bt);
        self.c.fill(p_c, bc);
        cdf[0] = 0.0;
        for k in 0..nc {
            cdf[k + 1] = cdf[k] + bc[k];
        }
        sf[nc] = 0.0;
        for k in (0..nc).rev() {
            sf[k] = sf[k + 1] + bc[k];
        }
    }
}

// ---------------------------------------------------------------------------
// tail sets

/// Statistic values over the sample space.
#[derive(Debug, Clone)]
pub(crate) struct ScoreSpace {
    design: TrialDesign,
    values: Vec<f64>,
    rows_monotone: bool,
}

impl ScoreSpace {
    pub(crate) fn new(design: TrialDesign, stat: Statistic) -> Self {
        Self::from_values(design, stat.values(design))
    }

    pub(crate) fn from_values(design: TrialDesign, values: Vec<f64>) -> Self {
        let cols = design.n_c as usize + 1;
        let rows_monotone = values.chunks(cols).all(|row| row.windows(2).all(|w| w[0] >= w[1]));
        ScoreSpace { design, values, rows_monotone }
    }

    pub(crate) fn value(&self, table: ObservedTable) -> f64 {
        self.values[self.design.index(table)]
    }

    pub(crate) fn tail(&self, s_obs: f64, orientation: Orientation) -> TailSet {
        let cols = self.design.n_c as usize + 1;
        let inside = |v: f64| match orientation {
            Orientation::Upper => v >= s_obs - TIE_TOLERANCE,
            Orientation::Lower => v <= s_obs + TIE_TOLERANCE,
        };
        let set = if self.rows_monotone {
            let counts: Vec<u32> = self
                .values
                .chunks(cols)
                .map(|row| match orientation {
                    Orientation::Upper => row.partition_point(|&v| inside(v)) as u32,
                    Orientation::Lower => (cols - row.partition_point(|&v| !inside(v))) as u32,
                })
                .collect();
            TailSet::Staircase { orientation, counts }
        } else {
            let members: Vec<(u32, u32)> = self
                .values
                .iter()
                .enumerate()
                .filter(|(_, &v)| inside(v))
                .map(|(i, _)| {
                    let t = self.design.table_at(i);
                    (t.x_t, t.x_c)
                })
                .collect();
            TailSet::General(members)
        };
        set.simplify(self.design)
    }
}

/// Tables forming a tail. Staircase rows hold the number of members, which
/// are a prefix of the row for the upper tail and a suffix for the lower.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TailSet {
    Empty,
    Full,
    Staircase { orientation: Orientation, counts: Vec<u32> },
    General(Vec<(u32, u32)>),
}

impl TailSet {
    pub(crate) fn from_members(design: TrialDesign, members: Vec<(u32, u32)>) -> Self {
        TailSet::General(members).simplify(design)
    }

    fn simplify(self, design: TrialDesign) -> Self {
        let total = design.size();
        let n = match &self {
            TailSet::Staircase { counts, .. } => counts.iter().map(|&c| c as usize).sum(),
            TailSet::General(m) => m.len(),
            _ => return self,
        };
        if n == 0 {
            TailSet::Empty
        } else if n == total {
            TailSet::Full
        } else {
            self
        }
    }

    /// Tail probability given a filled `[b_t | b_c | cdf_c | sf_c]` buffer.
    pub(crate) fn prob(&self, design: TrialDesign, buf: &[f64]) -> f64 {
        let nt = design.n_t as usize + 1;
        let nc = design.n_c as usize + 1;
        let bt = &buf[..nt];
        let bc = &buf[nt..nt + nc];
        let cdf = &buf[nt + nc..nt + 2 * nc + 1];
        let sf = &buf[nt + 2 * nc + 1..];
        let s = match self {
            TailSet::Empty => return 0.0,
            TailSet::Full => return 1.0,
            TailSet::Staircase { orientation: Orientation::Upper, counts } => {
                bt.iter().zip(counts).map(|(&b, &c)| b * cdf[c as usize]).sum::<f64>()
            }
            TailSet::Staircase { orientation: Orientation::Lower, counts } => {
                bt.iter().zip(counts).map(|(&b, &c)| b * sf[nc - c as usize]).sum::<f64>()
            }
            TailSet::General(members) => {
                members.iter().map(|&(a, b)| bt[a as usize] * bc[b as usize]).sum::<f64>()
            }
        };
        s.clamp(0.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// one difference: maximization over P_T

/// Everything needed to maximize tail probabilities over `P_T` at a fixed
/// data-generating difference `delta`.
#[derive(Debug, Clone)]
pub(crate) struct Slice {
    arms: Arms,
    delta: f64,
    grid: Vec<f64>,
    space: Option<ScoreSpace>,
    cache: Option<Vec<f64>>,
    cfg: SearchConfig,
}

impl Slice {
    pub(crate) fn new(arms: &Arms, delta: f64, stat: Statistic, cfg: &SearchConfig) -> Self {
        let mut slice = Self::bare(arms, delta, cfg);
        slice.space = Some(ScoreSpace::new(arms.design, stat));
        slice
    }

    /// A slice without a statistic, for maximizing fixed tail sets.
    pub(crate) fn bare(arms: &Arms, delta: f64, cfg: &SearchConfig) -> Self {
        let (lo, hi) = admissible_p_t(delta);
        let grid = linspace(lo, hi, cfg.pt_points.max(1));
        Slice { arms: arms.clone(), delta, grid, space: None, cache: None, cfg: *cfg }
    }

    /// `P_L` / `P_U` slice: data at `delta`, statistic `Z_{-delta}`.
    pub(crate) fn chan_zhang(arms: &Arms, delta: f64, cfg: &SearchConfig) -> Self {
        Self::new(arms, delta, Statistic::delta_projected(-delta), cfg)
    }

    /// Precompute the arm vectors on the whole `P_T` grid; worthwhile when
    /// many tables are maximized against the same slice.
    pub(crate) fn with_cache(mut self) -> Self {
        let stride = self.arms.stride();
        let mut data = vec![0.0; stride * self.grid.len()];
        for (row, &p) in data.chunks_mut(stride).zip(&self.grid) {
            self.arms.fill(p, self.delta, row);
        }
        self.cache = Some(data);
        self
    }

    pub(crate) fn maximize_table(&self, table: ObservedTable, orientation: Orientation) -> MaximizationResult {
        let space = self.space.as_ref().expect("slice has a statistic");
        let tail = space.tail(space.value(table), orientation);
        self.maximize(&tail)
    }

    pub(crate) fn maximize(&self, tail: &TailSet) -> MaximizationResult {
        let design = self.arms.design;
        let n = self.grid.len();
        match tail {
            TailSet::Empty => {
                return MaximizationResult { value: 0.0, argmax_p_t: self.grid[0], grid_points: n, refined: false }
            }
            TailSet::Full => {
                return MaximizationResult { value: 1.0, argmax_p_t: self.grid[0], grid_points: n, refined: false }
            }
            _ => {}
        }
        let stride = self.arms.stride();
        let mut scratch = vec![0.0; stride];
        let values: Vec<f64> = match &self.cache {
            Some(data) => data.chunks(stride).map(|row| tail.prob(design, row)).collect(),
            None => self
                .grid
                .iter()
                .map(|&p| {
                    self.arms.fill(p, self.delta, &mut scratch);
                    tail.prob(design, &scratch)
                })
                .collect(),
        };
        let mut best = (self.grid[0], values[0]);
        for (&p, &v) in self.grid.iter().zip(&values) {
            if v > best.1 {
                best = (p, v);
            }
        }
        let mut refined = false;
        // a probability within 1e-12 of one cannot be improved by refinement
        let peaks = if best.1 >= 1.0 - 1e-12 { Vec::new() } else { refinable_peaks(&values, self.cfg.peak_slack) };
        for j in peaks {
            let a = self.grid[j.saturating_sub(1)];
            let b = self.grid[(j + 1).min(n - 1)];
            let (p, v) = golden_max(
                |p| {
                    self.arms.fill(p, self.delta, &mut scratch);
                    tail.prob(design, &scratch)
                },
                a,
                b,
                self.cfg.pt_tol,
            );
            refined = true;
            if v > best.1 || (v == best.1 && p < best.0) {
                best = (p, v);
            }
        }
        MaximizationResult { value: best.1, argmax_p_t: best.0, grid_points: n, refined }
    }
}

// ---------------------------------------------------------------------------
// public single-point and single-table operations

/// `P[S >= s_obs]` (upper) or `P[S <= s_obs]` (lower) at `(p_t, delta_eval)`.
pub fn tail_prob(
    design: TrialDesign,
    delta_eval: f64,
    p_t: f64,
    s_obs: f64,
    stat: Statistic,
    orientation: Orientation,
) -> Result<f64> {
    TrialDesign::new(design.n_t, design.n_c)?;
    NullPoint::new(p_t, delta_eval)?;
    if s_obs.is_nan() {
        return domain("observed statistic is NaN");
    }
    let arms = Arms::new(design);
    let tail = ScoreSpace::new(design, stat).tail(s_obs, orientation);
    let mut buf = vec![0.0; arms.stride()];
    arms.fill(p_t, delta_eval, &mut buf);
    Ok(tail.prob(design, &buf))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&delta) {
        return domain(format!("delta = {delta} outside [-1, 1]"));
    }
    Ok(())
}

/// `P_{L,delta}`: the upper tail of `Z_{-delta}` maximized over admissible `P_T` at difference `delta`.
pub fn p_l(table: ObservedTable, design: TrialDesign, delta: f64) -> Result<MaximizationResult> {
    p_l_with(table, design, delta, &SearchConfig::default())
}

pub fn p_l_with(table: ObservedTable, design: TrialDesign, delta: f64, cfg: &SearchConfig) -> Result<MaximizationResult> {
    design.check(table)?;
    check_delta(delta)?;
    Ok(Slice::chan_zhang(&Arms::new(design), delta, cfg).maximize_table(table, Orientation::Upper))
}

/// `P_{U,delta}`: the lower tail of `Z_{-delta}` maximized over admissible `P_T`.
pub fn p_u(table: ObservedTable, design: TrialDesign, delta: f64) -> Result<MaximizationResult> {
    p_u_with(table, design, delta, &SearchConfig::default())
}

pub fn p_u_with(table: ObservedTable, design: TrialDesign, delta: f64, cfg: &SearchConfig) -> Result<MaximizationResult> {
    design.check(table)?;
    check_delta(delta)?;
    Ok(Slice::chan_zhang(&Arms::new(design), delta, cfg).maximize_table(table, Orientation::Lower))
}

/// Chan's exact unconditional p-value with the delta-projected score:
/// `P_{L,-delta0}`.
pub fn p_exact(table: ObservedTable, design: TrialDesign, margin: Margin) -> Result<MaximizationResult> {
    p_l(table, design, margin.boundary())
}

pub fn p_exact_with(table: ObservedTable, design: TrialDesign, margin: Margin, cfg: &SearchConfig) -> Result<MaximizationResult> {
    p_l_with(table, design, margin.boundary(), cfg)
}

/// Chan's exact p-value for every table of the design, in enumeration order.
pub fn p_exact_all(design: TrialDesign, margin: Margin, cfg: &SearchConfig) -> Result<Vec<MaximizationResult>> {
    TrialDesign::new(design.n_t, design.n_c)?;
    let slice = Slice::chan_zhang(&Arms::new(design), margin.boundary(), cfg).with_cache();
    Ok((0..design.size())
        .into_par_iter()
        .map(|i| slice.maximize_table(design.table_at(i), Orientation::Upper))
        .collect())
}

/// Hypergeometric probabilities of `X_T = lo..=hi` given the success total.
fn hypergeometric(table: ObservedTable, design: TrialDesign) -> (u32, Vec<f64>) {
    let m = table.x_t + table.x_c;
    let lo = m.saturating_sub(design.n_c);
    let hi = m.min(design.n_t);
    let denom = ln_choose(design.n_t + design.n_c, m);
    let probs = (lo..=hi)
        .map(|k| (ln_choose(design.n_t, k) + ln_choose(design.n_c, m - k) - denom).exp())
        .collect();
    (lo, probs)
}

/// Two-sided Fisher exact p-value: total conditional probability of the
/// tables no more likely than the observed one.
pub fn fisher_exact(table: ObservedTable, design: TrialDesign) -> Result<f64> {
    design.check(table)?;
    let (lo, probs) = hypergeometric(table, design);
    let obs = probs[(table.x_t - lo) as usize] * (1.0 + 1e-7);
    let total: f64 = probs.iter().sum();
    let tail: f64 = probs.iter().filter(|&&p| p <= obs).sum();
    Ok((tail / total).min(1.0))
}

/// One-sided Fisher exact p-value `P[X_T >= x_t | X_T + X_C = x_t + x_c]`.
pub fn fisher_exact_greater(table: ObservedTable, design: TrialDesign) -> Result<f64> {
    design.check(table)?;
    let (lo, probs) = hypergeometric(table, design);
    let total: f64 = probs.iter().sum();
    let tail: f64 = probs[(table.x_t - lo) as usize..].iter().sum();
    Ok((tail / total).min(1.0))
}

// ---------------------------------------------------------------------------
// delta scans shared by the Chan & Zhang p-value and interval

/// Ascending delta grid `-1 + k * step` over `[-1, 1]`, with `anchor`
/// inserted when it is not already a grid point.
pub(crate) fn cz_grid(step: f64, anchor: Option<f64>) -> Vec<f64> {
    let per_unit = (1.0 / step).round().max(1.0);
    let k = (2.0 * per_unit) as usize;
    let mut grid: Vec<f64> = (0..=k).map(|i| (i as f64 - per_unit) / per_unit).collect();
    if let Some(a) = anchor {
        if !grid.iter().any(|&g| g == a) {
            let pos = grid.partition_point(|&g| g < a);
            grid.insert(pos, a);
        }
    }
    grid
}

/// Position of a scan event relative to grid point `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ScanAt {
    Before(usize),
    At(usize),
    After(usize),
}

/// Walk a profile along `grid` (in processing order), emitting grid values
/// and refined bumps inside the cells next to qualifying local maxima.
/// `sink` returns `false` to stop.
pub(crate) fn scan_profile<V, R, S>(grid: &[f64], mut value: V, mut refine: R, slack: Option<f64>, mut sink: S)
where
    V: FnMut(usize) -> f64,
    R: FnMut(f64, f64) -> (f64, f64),
    S: FnMut(ScanAt, f64, f64) -> bool,
{
    let n = grid.len();
    let mut running = f64::NEG_INFINITY;
    let mut prev = None;
    let mut here = value(0);
    for k in 0..n {
        let next = if k + 1 < n { Some(value(k + 1)) } else { None };
        let ge = prev.map_or(true, |p| here >= p) && next.map_or(true, |q| here >= q);
        let gt = prev.map_or(false, |p| here > p) || next.map_or(false, |q| here > q);
        let qualifies = slack.map_or(false, |s| ge && gt && here >= running - s);
        if qualifies && k > 0 {
            let (d, w) = refine(grid[k - 1], grid[k]);
            if !sink(ScanAt::Before(k), d, w) {
                return;
            }
            running = running.max(w);
        }
        if !sink(ScanAt::At(k), grid[k], here) {
            return;
        }
        running = running.max(here);
        if qualifies && k + 1 < n {
            let (d, w) = refine(grid[k], grid[k + 1]);
            if !sink(ScanAt::After(k), d, w) {
                return;
            }
            running = running.max(w);
        }
        prev = Some(here);
        match next {
            Some(v) => here = v,
            None => break,
        }
    }
}

/// One table's `P_L` (or `P_U`) profile evaluator along a delta grid.
pub(crate) struct TableProfile<'a> {
    pub(crate) table: ObservedTable,
    pub(crate) arms: &'a Arms,
    pub(crate) cfg: &'a SearchConfig,
    pub(crate) orientation: Orientation,
}

impl TableProfile<'_> {
    pub(crate) fn at(&self, delta: f64) -> f64 {
        Slice::chan_zhang(self.arms, delta, self.cfg).maximize_table(self.table, self.orientation).value
    }

    /// Golden-section maximum of the profile inside one cell.
    pub(crate) fn refine(&self, a: f64, b: f64) -> (f64, f64) {
        golden_max(|d| self.at(d), a, b, self.cfg.delta_tol)
    }
}

/// `max` of the `P_L` scan up to and including grid point `stop` (the
/// margin), with the maximizing delta.
pub(crate) fn cz_from_scan<V, R>(grid: &[f64], stop: usize, value: V, refine: R, slack: Option<f64>) -> CzPValue
where
    V: FnMut(usize) -> f64,
    R: FnMut(f64, f64) -> (f64, f64),
{
    let grid = &grid[..(stop + 2).min(grid.len())];
    let mut best = CzPValue { value: f64::NEG_INFINITY, argmax_delta: grid[0] };
    scan_profile(grid, value, refine, slack, |at, d, v| {
        let beyond = match at {
            ScanAt::Before(k) | ScanAt::At(k) => k > stop,
            ScanAt::After(k) => k >= stop,
        };
        if beyond {
            return false;
        }
        if v > best.value {
            best = CzPValue { value: v, argmax_delta: d };
        }
        true
    });
    best
}

/// Chan & Zhang p-value `max_{delta in [-1, -delta0]} P_{L,delta}`.
pub fn p_cz(table: ObservedTable, design: TrialDesign, margin: Margin) -> Result<CzPValue> {
    p_cz_with(table, design, margin, &SearchConfig::default())
}

pub fn p_cz_with(table: ObservedTable, design: TrialDesign, margin: Margin, cfg: &SearchConfig) -> Result<CzPValue> {
    design.check(table)?;
    let arms = Arms::new(design);
    let grid = cz_grid(cfg.delta_step, Some(margin.boundary()));
    let stop = grid.iter().position(|&g| g == margin.boundary()).expect("anchor on grid");
    let profile = TableProfile { table, arms: &arms, cfg, orientation: Orientation::Upper };
    let mut memo: Vec<Option<f64>> = vec![None; grid.len()];
    let value = |k: usize| *memo[k].get_or_insert_with(|| profile.at(grid[k]));
    Ok(cz_from_scan(&grid, stop, value, |a, b| profile.refine(a, b), cfg.delta_slack()))
}

/// Chan & Zhang p-values for every table of the design, in enumeration order.
/// Identical, value for value, to calling [`p_cz_with`] per table.
pub fn p_cz_all(design: TrialDesign, margin: Margin, cfg: &SearchConfig) -> Result<Vec<CzPValue>> {
    TrialDesign::new(design.n_t, design.n_c)?;
    let arms = Arms::new(design);
    let grid = cz_grid(cfg.delta_step, Some(margin.boundary()));
    let stop = grid.iter().position(|&g| g == margin.boundary()).expect("anchor on grid");
    let needed = (stop + 2).min(grid.len());
    let columns = profile_matrix(&arms, &grid[..needed], cfg, false).upper_tail;
    Ok((0..design.size())
        .into_par_iter()
        .map(|i| {
            let profile = TableProfile { table: design.table_at(i), arms: &arms, cfg, orientation: Orientation::Upper };
            cz_from_scan(&grid, stop, |k| columns[k][i], |a, b| profile.refine(a, b), cfg.delta_slack())
        })
        .collect())
}

/// `P_L` (upper tail) and optionally `P_U` (lower tail) for every table at
/// every grid difference, indexed `[grid][table]`.
pub(crate) struct Profiles {
    pub(crate) upper_tail: Vec<Vec<f64>>,
    pub(crate) lower_tail: Vec<Vec<f64>>,
}

pub(crate) fn profile_matrix(arms: &Arms, grid: &[f64], cfg: &SearchConfig, with_lower: bool) -> Profiles {
    let design = arms.design;
    let size = design.size();
    let cols: Vec<(Vec<f64>, Vec<f64>)> = grid
        .par_iter()
        .map(|&d| {
            let slice = Slice::chan_zhang(arms, d, cfg).with_cache();
            let up = (0..size).map(|i| slice.maximize_table(design.table_at(i), Orientation::Upper).value).collect();
            let low = if with_lower {
                (0..size).map(|i| slice.maximize_table(design.table_at(i), Orientation::Lower).value).collect()
            } else {
                Vec::new()
            };
            (up, low)
        })
        .collect();
    let (upper_tail, lower_tail) = cols.into_iter().unzip();
    Profiles { upper_tail, lower_tail }
}

/// First crossing of `threshold` by the profile in processing order: the
/// returned value is a delta where the profile exceeds the threshold, within
/// `crossing_tol` of the last delta where it did not. `None` when the profile
/// never exceeds the threshold.
pub(crate) fn first_crossing<V>(
    grid: &[f64],
    value: V,
    profile: &TableProfile<'_>,
    threshold: f64,
) -> Option<f64>
where
    V: FnMut(usize) -> f64,
{
    let mut last = None;
    let mut hit = None;
    scan_profile(grid, value, |a, b| profile.refine(a, b), profile.cfg.delta_slack(), |_, d, v| {
        if v > threshold {
            hit = Some((last, d));
            false
        } else {
            last = Some(d);
            true
        }
    });
    let (no, yes) = hit?;
    Some(match no {
        None => yes,
        Some(no) => bisect(|d| profile.at(d) > threshold, yes, no, profile.cfg.crossing_tol).0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_space, joint_pmf};
    use crate::oracle::oracle_tail;
    use crate::stats::z_delta;

    fn des(n_t: u32, n_c: u32) -> TrialDesign {
        TrialDesign::new(n_t, n_c).unwrap()
    }

    #[test]
    fn tail_extremes() {
        let d = des(4, 5);
        let s = Statistic::delta_projected(0.1);
        assert_eq!(tail_prob(d, -0.1, 0.4, f64::NEG_INFINITY, s, Orientation::Upper).unwrap(), 1.0);
        assert_eq!(tail_prob(d, -0.1, 0.4, 1e9, s, Orientation::Upper).unwrap(), 0.0);
        assert!(tail_prob(d, -0.1, 0.95, 0.0, s, Orientation::Upper).is_err());
    }

    #[test]
    fn tail_matches_enumeration() {
        // all 9 tables of a 2x2 design, Z_0 >= Z_0(2, 0)
        let d = des(2, 2);
        let s = Statistic::delta_projected(0.0);
        let s_obs = z_delta(ObservedTable::new(2, 0), d, 0.0).unwrap();
        let point = NullPoint::new(0.5, 0.0).unwrap();
        let mut want = 0.0;
        for t in enumerate_space(d).unwrap() {
            if z_delta(t, d, 0.0).unwrap() >= s_obs - 1e-12 {
                want += joint_pmf(t, d, point).unwrap();
            }
        }
        // only (2, 0) itself reaches the maximum
        assert!((want - 1.0 / 16.0).abs() < 1e-15);
        let got = tail_prob(d, 0.0, 0.5, s_obs, s, Orientation::Upper).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn staircase_and_general_agree() {
        let d = des(5, 7);
        let stat = Statistic::delta_projected(0.2);
        let space = ScoreSpace::new(d, stat);
        assert!(space.rows_monotone);
        let general = ScoreSpace { rows_monotone: false, ..space.clone() };
        let arms = Arms::new(d);
        let mut buf = vec![0.0; arms.stride()];
        arms.fill(0.3, -0.2, &mut buf);
        for t in enumerate_space(d).unwrap() {
            for o in [Orientation::Upper, Orientation::Lower] {
                let a = space.tail(space.value(t), o).prob(d, &buf);
                let b = general.tail(space.value(t), o).prob(d, &buf);
                assert!((a - b).abs() < 1e-14);
                let point = NullPoint::new(0.3, -0.2).unwrap();
                let c = oracle_tail(d, point, |x| stat.eval(x, d), space.value(t), o == Orientation::Upper).unwrap();
                assert!((a - c).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fries_example() {
        let d = des(15, 15);
        let t = ObservedTable::new(8, 3);
        let m = Margin::new(0.0).unwrap();
        let p = p_exact(t, d, m).unwrap().value;
        // brute-force value over a fine nuisance grid
        assert!((p - 0.034109).abs() < 1e-5, "p_exact = {p}");
        let f = fisher_exact(t, d).unwrap();
        assert!((f - 0.128).abs() < 5e-4, "fisher = {f}");
        let g = fisher_exact_greater(t, d).unwrap();
        assert!((g - 0.064).abs() < 5e-4, "fisher one-sided = {g}");
    }

    #[test]
    fn fisher_degenerate() {
        let d = des(5, 5);
        assert!((fisher_exact_greater(ObservedTable::new(0, 5), d).unwrap() - 1.0).abs() < 1e-12);
        assert!((fisher_exact(ObservedTable::new(0, 5), d).unwrap() - 2.0 / 252.0).abs() < 1e-12);
        assert_eq!(fisher_exact(ObservedTable::new(0, 0), d).unwrap(), 1.0);
    }

    #[test]
    fn minimum_table_has_unit_pvalue() {
        let d = des(6, 9);
        let m = Margin::new(0.1).unwrap();
        let p = p_exact(ObservedTable::new(0, 9), d, m).unwrap();
        assert!((p.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_identity_and_extremes() {
        let d = des(8, 19);
        let t = ObservedTable::new(5, 10);
        let m = Margin::new(0.1).unwrap();
        assert_eq!(p_l(t, d, -0.1).unwrap(), p_exact(t, d, m).unwrap());
        // at delta = -1 the only admissible table is (0, n_c)
        let v = p_l(t, d, -1.0).unwrap().value;
        assert!(v == 0.0 || v == 1.0);
        let v = p_l(ObservedTable::new(0, 19), d, -1.0).unwrap().value;
        assert_eq!(v, 1.0);
        let v = p_u(ObservedTable::new(2, 0), des(2, 2), 0.0).unwrap().value;
        assert_eq!(v, 1.0);
    }

    #[test]
    fn cached_and_direct_slices_agree() {
        let d = des(6, 5);
        let arms = Arms::new(d);
        let cfg = SearchConfig::default();
        let direct = Slice::chan_zhang(&arms, -0.15, &cfg);
        let cached = direct.clone().with_cache();
        for t in enumerate_space(d).unwrap() {
            assert_eq!(direct.maximize_table(t, Orientation::Upper), cached.maximize_table(t, Orientation::Upper));
        }
    }

    #[test]
    fn grid_contains_anchor() {
        let g = cz_grid(1e-3, Some(-0.12));
        assert_eq!(g.len(), 2001);
        assert!(g.contains(&-0.12));
        let g = cz_grid(1e-3, Some(-0.0335));
        assert_eq!(g.len(), 2002);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cz_all_matches_single() {
        let d = des(3, 4);
        let m = Margin::new(0.1).unwrap();
        let cfg = SearchConfig { pt_points: 101, delta_step: 0.01, ..SearchConfig::default() };
        let all = p_cz_all(d, m, &cfg).unwrap();
        for (i, t) in enumerate_space(d).unwrap().into_iter().enumerate() {
            assert_eq!(all[i], p_cz_with(t, d, m, &cfg).unwrap());
            let exact = p_exact_with(t, d, m, &cfg).unwrap().value;
            assert!(all[i].value >= exact);
        }
    }
}
