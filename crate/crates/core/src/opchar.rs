//! Operating characteristics: critical regions, conditional and maximal
//! size, power curves and the Monte Carlo expectation of the exact
//! correction term.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exact::{p_cz_all, p_exact_all, Arms, SearchConfig, Slice, TailSet};
use crate::intervals::{EcScore, Method};
use crate::model::{admissible_p_t, ArmPmf, Margin, NullPoint, ObservedTable, TrialDesign};
use crate::normal::std_normal_sf;
use crate::search::{golden_max, refinable_peaks};
use crate::stats::{Statistic, StatisticKind};

/// Tables on which a test rejects at `alpha / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet {
    pub design: TrialDesign,
    pub method: Method,
    pub margin: Margin,
    pub alpha: f64,
    /// One flag per table in enumeration order.
    pub rejected: Vec<bool>,
}

impl DecisionSet {
    pub fn rejected_tables(&self) -> Vec<ObservedTable> {
        self.rejected
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| self.design.table_at(i))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }

    pub(crate) fn tail(&self) -> TailSet {
        let members: Vec<(u32, u32)> = self.rejected_tables().into_iter().map(|t| (t.x_t, t.x_c)).collect();
        TailSet::from_members(self.design, members)
    }
}

/// p-values of `method` for every table, in enumeration order.
pub fn p_values(design: TrialDesign, margin: Margin, method: Method, cfg: &SearchConfig) -> Result<Vec<f64>> {
    TrialDesign::new(design.n_t, design.n_c)?;
    let asymptotic = |kind: StatisticKind| {
        Statistic { kind, shift: margin.value() }.values(design).into_iter().map(std_normal_sf).collect()
    };
    Ok(match method {
        Method::Mn => asymptotic(StatisticKind::DeltaProjected),
        Method::Wald => asymptotic(StatisticKind::Wald),
        Method::Ec => p_exact_all(design, margin, cfg)?.into_iter().map(|r| r.value).collect(),
        Method::Cz => p_cz_all(design, margin, cfg)?.into_iter().map(|r| r.value).collect(),
    })
}

/// Critical region `{p <= alpha / 2}` of `method`.
pub fn critical_region(design: TrialDesign, margin: Margin, alpha: f64, method: Method) -> Result<DecisionSet> {
    critical_region_with(design, margin, alpha, method, &SearchConfig::default())
}

pub fn critical_region_with(
    design: TrialDesign,
    margin: Margin,
    alpha: f64,
    method: Method,
    cfg: &SearchConfig,
) -> Result<DecisionSet> {
    let p = p_values(design, margin, method, cfg)?;
    region_from_p_values(design, margin, alpha, method, &p)
}

/// Critical region from precomputed p-values.
pub fn region_from_p_values(
    design: TrialDesign,
    margin: Margin,
    alpha: f64,
    method: Method,
    p_values: &[f64],
) -> Result<DecisionSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    if p_values.len() != design.size() {
        return domain(format!("expected {} p-values, got {}", design.size(), p_values.len()));
    }
    let rejected = p_values.iter().map(|&p| p <= alpha / 2.0).collect();
    Ok(DecisionSet { design, method, margin, alpha, rejected })
}

/// Probability of the rejected tables at one parameter point.
pub fn conditional_size(region: &DecisionSet, point: NullPoint) -> Result<f64> {
    NullPoint::new(point.p_t, point.delta)?;
    let d = region.design;
    let mut bt = vec![0.0; d.n_t as usize + 1];
    let mut bc = vec![0.0; d.n_c as usize + 1];
    ArmPmf::new(d.n_t).fill(point.p_t, &mut bt);
    ArmPmf::new(d.n_c).fill(point.p_c().clamp(0.0, 1.0), &mut bc);
    let s: f64 = region.rejected_tables().iter().map(|t| bt[t.x_t as usize] * bc[t.x_c as usize]).sum();
    Ok(s.clamp(0.0, 1.0))
}

/// Settings for the maximal-size search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeConfig {
    pub delta_step: f64,
    pub pt_points: usize,
    pub peak_slack: f64,
    pub pt_tol: f64,
    pub delta_tol: f64,
}

impl Default for SizeConfig {
    fn default() -> Self {
        SizeConfig { delta_step: 2e-3, pt_points: 501, peak_slack: 1e-6, pt_tol: 1e-8, delta_tol: 1e-8 }
    }
}

impl SizeConfig {
    fn search(&self) -> SearchConfig {
        SearchConfig {
            pt_points: self.pt_points,
            peak_slack: self.peak_slack,
            pt_tol: self.pt_tol,
            delta_step: self.delta_step,
            delta_tol: self.delta_tol,
            refine_delta: true,
            ..SearchConfig::default()
        }
    }
}

/// Supremum of the conditional size over the null region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalSize {
    pub value: f64,
    pub argmax_p_t: f64,
    pub argmax_delta: f64,
    /// Supremum along the boundary `delta = -delta0` only.
    pub boundary_value: f64,
}

/// Maximal size of `method`'s critical region.
pub fn maximal_size(design: TrialDesign, margin: Margin, alpha: f64, method: Method) -> Result<MaximalSize> {
    let region = critical_region(design, margin, alpha, method)?;
    maximal_size_of(&region, &SizeConfig::default())
}

/// Supremum over `P_T` of the conditional size at one difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeAt {
    pub delta: f64,
    pub value: f64,
    pub argmax_p_t: f64,
}

fn delta_grid(top: f64, step: f64) -> Vec<f64> {
    let steps = ((top + 1.0) / step).round().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| (top - step * i as f64).max(-1.0)).collect();
    grid.reverse();
    grid.dedup();
    grid
}

/// `sup_{P_T}` of the conditional size on every difference of the
/// maximal-size grid, ascending in delta and ending at `-delta0`.
pub fn size_profile(region: &DecisionSet, cfg: &SizeConfig) -> Result<Vec<SizeAt>> {
    let tail = region.tail();
    let arms = Arms::new(region.design);
    let search = cfg.search();
    Ok(delta_grid(region.margin.boundary(), cfg.delta_step)
        .into_par_iter()
        .map(|delta| {
            let r = Slice::bare(&arms, delta, &search).maximize(&tail);
            SizeAt { delta, value: r.value, argmax_p_t: r.argmax_p_t }
        })
        .collect())
}

/// Maximal size of a given region: a `(delta, P_T)` grid over
/// `delta in [-1, -delta0]`, refined in `P_T` on every delta and then in
/// delta around the near-best grid differences.
pub fn maximal_size_of(region: &DecisionSet, cfg: &SizeConfig) -> Result<MaximalSize> {
    let top = region.margin.boundary();
    let tail = region.tail();
    let arms = Arms::new(region.design);
    let search = cfg.search();
    let at = |delta: f64| Slice::bare(&arms, delta, &search).maximize(&tail);
    let profile = size_profile(region, cfg)?;
    let boundary_value = profile.last().expect("nonempty grid").value;

    let mut best = MaximalSize { value: f64::NEG_INFINITY, argmax_p_t: 0.0, argmax_delta: top, boundary_value };
    let mut consider = |value: f64, p_t: f64, delta: f64| {
        if value > best.value {
            best.value = value;
            best.argmax_p_t = p_t;
            best.argmax_delta = delta;
        }
    };
    for r in &profile {
        consider(r.value, r.argmax_p_t, r.delta);
    }
    let flat: Vec<f64> = profile.iter().map(|r| r.value).collect();
    let n = profile.len();
    for j in refinable_peaks(&flat, cfg.peak_slack) {
        let a = profile[j.saturating_sub(1)].delta;
        let b = profile[(j + 1).min(n - 1)].delta;
        let (d, v) = golden_max(|d| at(d).value, a, b, cfg.delta_tol);
        consider(v, at(d).argmax_p_t, d);
    }
    best.value = best.value.clamp(0.0, 1.0);
    Ok(best)
}

/// Rejection probabilities along a delta grid at fixed `P_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub p_t: f64,
    pub delta_grid: Vec<f64>,
    /// Per grid point: `(p_t, delta)` is admissible.
    pub admissible: Vec<bool>,
    pub curves: Vec<MethodCurve>,
    /// Tables accepted by both CZ and EC.
    pub n_aa: usize,
    /// Tables accepted by CZ and rejected by EC.
    pub n_ar: usize,
    /// Tables rejected by both.
    pub n_rr: usize,
    /// Tables rejected by CZ and accepted by EC.
    pub n_ra: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCurve {
    pub method: Method,
    /// `None` at inadmissible grid points.
    pub reject_prob: Vec<Option<f64>>,
}

impl PowerCurve {
    pub fn curve(&self, method: Method) -> Option<&MethodCurve> {
        self.curves.iter().find(|c| c.method == method)
    }
}

/// Power curves of all four methods.
pub fn power_curve(
    design: TrialDesign,
    margin: Margin,
    alpha: f64,
    p_t: f64,
    delta_grid: &[f64],
) -> Result<PowerCurve> {
    let regions = Method::ALL
        .iter()
        .map(|&m| critical_region(design, margin, alpha, m))
        .collect::<Result<Vec<_>>>()?;
    power_curve_of(&regions, p_t, delta_grid)
}

/// Power curves of precomputed regions. Agreement counts need both an EC
/// and a CZ region and are zero otherwise.
pub fn power_curve_of(regions: &[DecisionSet], p_t: f64, delta_grid: &[f64]) -> Result<PowerCurve> {
    if !(0.0..=1.0).contains(&p_t) {
        return domain(format!("p_t must lie in [0, 1], got {p_t}"));
    }
    let admissible: Vec<bool> = delta_grid
        .iter()
        .map(|&d| {
            let (lo, hi) = admissible_p_t(d);
            (-1.0..=1.0).contains(&d) && p_t >= lo && p_t <= hi
        })
        .collect();
    if !admissible.iter().any(|&a| a) {
        return Err(Error::EmptyGrid(p_t));
    }
    let mut curves = Vec::with_capacity(regions.len());
    for region in regions {
        let reject_prob = delta_grid
            .iter()
            .zip(&admissible)
            .map(|(&d, &ok)| if ok { Some(conditional_size(region, NullPoint::new(p_t, d)?)).transpose() } else { Ok(None) })
            .collect::<Result<Vec<_>>>()?;
        curves.push(MethodCurve { method: region.method, reject_prob });
    }
    let find = |m: Method| regions.iter().find(|r| r.method == m);
    let (mut n_aa, mut n_ar, mut n_rr, mut n_ra) = (0, 0, 0, 0);
    if let (Some(ec), Some(cz)) = (find(Method::Ec), find(Method::Cz)) {
        for (&e, &c) in ec.rejected.iter().zip(&cz.rejected) {
            match (c, e) {
                (false, false) => n_aa += 1,
                (false, true) => n_ar += 1,
                (true, true) => n_rr += 1,
                (true, false) => n_ra += 1,
            }
        }
    }
    Ok(PowerCurve { p_t, delta_grid: delta_grid.to_vec(), admissible, curves, n_aa, n_ar, n_rr, n_ra })
}

/// Monte Carlo estimate of the expected correction term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcExpectation {
    pub mean: f64,
    pub std_error: f64,
    /// The difference at which the correction is evaluated, `p_t - p_c`.
    pub delta: f64,
    /// Replicates entering the mean.
    pub n_used: usize,
    /// Replicates whose restricted standard error vanished at `delta`.
    pub n_degenerate: usize,
}

/// Mean of the exact correction term over `n_sims` simulated tables drawn
/// at `(p_t, p_c)`, evaluated at `delta = p_t - p_c`.
///
/// Replicate `r` of arm `a` reads its uniform from a ChaCha8 stream keyed by
/// `(seed, a)` at word position `2 r`, so the draws do not depend on thread
/// count or evaluation order.
pub fn ec_expectation(
    design: TrialDesign,
    p_t: f64,
    p_c: f64,
    margin: Margin,
    n_sims: usize,
    seed: u64,
) -> Result<EcExpectation> {
    ec_expectation_with(design, p_t, p_c, margin, n_sims, seed, &SearchConfig::default())
}

pub fn ec_expectation_with(
    design: TrialDesign,
    p_t: f64,
    p_c: f64,
    margin: Margin,
    n_sims: usize,
    seed: u64,
    cfg: &SearchConfig,
) -> Result<EcExpectation> {
    TrialDesign::new(design.n_t, design.n_c)?;
    for p in [p_t, p_c] {
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("probabilities must lie in [0, 1], got {p}"));
        }
    }
    if n_sims == 0 {
        return domain("n_sims must be at least 1");
    }
    let delta = p_t - p_c;
    let draws: Vec<ObservedTable> = (0..n_sims)
        .into_par_iter()
        .map(|r| {
            ObservedTable::new(
                draw_binomial(design.n_t, p_t, seed, 0, r as u64),
                draw_binomial(design.n_c, p_c, seed, 1, r as u64),
            )
        })
        .collect();

    let mut distinct = draws.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let slice = Slice::chan_zhang(&Arms::new(design), margin.boundary(), cfg);
    let slice = if distinct.len() > 8 { slice.with_cache() } else { slice };
    let corrections: Vec<Option<f64>> = distinct
        .par_iter()
        .map(|&t| {
            let p = slice.maximize_table(t, crate::exact::Orientation::Upper).value;
            let score = EcScore::from_p_exact(t, design, margin, p)?;
            match score.correction(delta) {
                Ok(c) => Ok(Some(c)),
                Err(Error::DegenerateVariance { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::with_capacity(n_sims);
    let mut n_degenerate = 0;
    for t in &draws {
        let i = distinct.binary_search(t).expect("drawn table is present");
        match corrections[i] {
            Some(c) => values.push(c),
            None => n_degenerate += 1,
        }
    }
    let n_used = values.len();
    let (mean, std_error) = if n_used == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let mean = pairwise_sum(&values) / n_used as f64;
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n_used > 1 { pairwise_sum(&sq) / (n_used - 1) as f64 } else { 0.0 };
        (mean, (var / n_used as f64).sqrt())
    };
    Ok(EcExpectation { mean, std_error, delta, n_used, n_degenerate })
}

/// Binomial draw by inversion of the distribution function.
fn draw_binomial(n: u32, p: f64, seed: u64, arm: u64, replicate: u64) -> u32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(arm);
    rng.set_word_pos(2 * replicate as u128);
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let mut pmf = vec![0.0; n as usize + 1];
    ArmPmf::new(n).fill(p, &mut pmf);
    let mut acc = 0.0;
    for (k, &q) in pmf.iter().enumerate() {
        acc += q;
        if u < acc {
            return k as u32;
        }
    }
    pmf.iter().rposition(|&q| q > 0.0).unwrap_or(0) as u32
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}
