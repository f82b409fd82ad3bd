//! Two-arm binomial model: designs, observed tables, null points and the
//! joint likelihood parameterised by the treatment rate and the risk
//! difference.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Arm sizes of a two-arm trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialDesign {
    pub n_t: u32,
    pub n_c: u32,
}

impl TrialDesign {
    pub fn new(n_t: u32, n_c: u32) -> Result<Self> {
        if n_t == 0 || n_c == 0 {
            return domain(format!("arm sizes must be positive, got n_t = {n_t}, n_c = {n_c}"));
        }
        Ok(TrialDesign { n_t, n_c })
    }

    /// Number of tables in the sample space, `(n_t + 1)(n_c + 1)`.
    pub fn size(&self) -> usize {
        (self.n_t as usize + 1) * (self.n_c as usize + 1)
    }

    /// Position of `table` in the row-major enumeration.
    pub fn index(&self, table: ObservedTable) -> usize {
        table.x_t as usize * (self.n_c as usize + 1) + table.x_c as usize
    }

    /// Inverse of [`TrialDesign::index`].
    pub fn table_at(&self, index: usize) -> ObservedTable {
        let cols = self.n_c as usize + 1;
        ObservedTable { x_t: (index / cols) as u32, x_c: (index % cols) as u32 }
    }

    pub fn contains(&self, table: ObservedTable) -> bool {
        table.x_t <= self.n_t && table.x_c <= self.n_c
    }

    /// Error unless both arms are nonempty and `table` lies in the design.
    pub fn check(&self, table: ObservedTable) -> Result<()> {
        if self.n_t == 0 || self.n_c == 0 {
            return domain("arm sizes must be positive");
        }
        if !self.contains(table) {
            return domain(format!(
                "table ({}, {}) is outside the design ({}, {})",
                table.x_t, table.x_c, self.n_t, self.n_c
            ));
        }
        Ok(())
    }
}

/// Observed success counts in the treatment and control arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservedTable {
    pub x_t: u32,
    pub x_c: u32,
}

impl ObservedTable {
    pub fn new(x_t: u32, x_c: u32) -> Self {
        ObservedTable { x_t, x_c }
    }

    /// Observed proportions `(x_t / n_t, x_c / n_c)`.
    pub fn proportions(&self, design: TrialDesign) -> (f64, f64) {
        (self.x_t as f64 / design.n_t as f64, self.x_c as f64 / design.n_c as f64)
    }
}

/// A point `(P_T, delta)` of the parameter space, with `P_C = P_T - delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullPoint {
    pub p_t: f64,
    pub delta: f64,
}

impl NullPoint {
    pub fn new(p_t: f64, delta: f64) -> Result<Self> {
        let point = NullPoint { p_t, delta };
        point.check()?;
        Ok(point)
    }

    pub fn p_c(&self) -> f64 {
        self.p_t - self.delta
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.delta) {
            return domain(format!("delta = {} outside [-1, 1]", self.delta));
        }
        let (lo, hi) = admissible_p_t(self.delta);
        // one ulp of slack so that grids built from `admissible_p_t` stay admissible
        let slack = 4.0 * f64::EPSILON;
        if !(self.p_t >= lo - slack && self.p_t <= hi + slack) {
            return domain(format!(
                "p_t = {} outside the admissible range [{lo}, {hi}] for delta = {}",
                self.p_t, self.delta
            ));
        }
        Ok(())
    }
}

/// Noninferiority margin `delta0 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin(f64);

impl Margin {
    pub fn new(delta0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta0) {
            return domain(format!("margin must lie in [0, 1), got {delta0}"));
        }
        Ok(Margin(delta0))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// The null boundary `delta = -delta0`.
    pub fn boundary(&self) -> f64 {
        -self.0
    }
}

/// Admissible treatment rates for a given difference: `[max(0, delta), min(1, 1 + delta)]`.
pub fn admissible_p_t(delta: f64) -> (f64, f64) {
    (delta.max(0.0), (1.0 + delta).min(1.0))
}

/// All tables of a design, `x_t` outer and `x_c` inner.
pub fn enumerate_space(design: TrialDesign) -> Result<Vec<ObservedTable>> {
    TrialDesign::new(design.n_t, design.n_c)?;
    let mut out = Vec::with_capacity(design.size());
    for x_t in 0..=design.n_t {
        for x_c in 0..=design.n_c {
            out.push(ObservedTable { x_t, x_c });
        }
    }
    Ok(out)
}

/// Joint probability of `table` under `point`.
pub fn joint_pmf(table: ObservedTable, design: TrialDesign, point: NullPoint) -> Result<f64> {
    design.check(table)?;
    point.check()?;
    let p_t = point.p_t.clamp(0.0, 1.0);
    let p_c = point.p_c().clamp(0.0, 1.0);
    let lt = ln_binomial_pmf(design.n_t, table.x_t, p_t, ln_choose(design.n_t, table.x_t));
    let lc = ln_binomial_pmf(design.n_c, table.x_c, p_c, ln_choose(design.n_c, table.x_c));
    Ok((lt + lc).exp())
}

pub(crate) fn ln_choose(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut acc = 0.0;
    for i in 0..k {
        acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    acc
}

/// Log binomial pmf with the convention `0 * ln 0 = 0`.
fn ln_binomial_pmf(n: u32, k: u32, p: f64, ln_c: f64) -> f64 {
    let mut acc = ln_c;
    if k > 0 {
        acc += k as f64 * p.ln();
    }
    if k < n {
        acc += (n - k) as f64 * (-p).ln_1p();
    }
    acc
}

/// Cached log binomial coefficients for one arm, used to fill pmf vectors
/// quickly inside the nuisance-parameter searches.
#[derive(Debug, Clone)]
pub(crate) struct ArmPmf {
    n: u32,
    ln_c: Vec<f64>,
}

impl ArmPmf {
    pub(crate) fn new(n: u32) -> Self {
        let mut ln_c = Vec::with_capacity(n as usize + 1);
        let mut acc = 0.0;
        ln_c.push(0.0);
        for k in 1..=n {
            acc += ((n - k + 1) as f64).ln() - (k as f64).ln();
            ln_c.push(acc);
        }
        // symmetric correction keeps ln C(n, k) == ln C(n, n - k) exactly
        for k in 0..=(n as usize / 2) {
            ln_c[n as usize - k] = ln_c[k];
        }
        ArmPmf { n, ln_c }
    }

    pub(crate) fn fill(&self, p: f64, out: &mut [f64]) {
        let n = self.n as usize;
        debug_assert_eq!(out.len(), n + 1);
        if p <= 0.0 {
            out.fill(0.0);
            out[0] = 1.0;
            return;
        }
        if p >= 1.0 {
            out.fill(0.0);
            out[n] = 1.0;
            return;
        }
        let lp = p.ln();
        let lq = (-p).ln_1p();
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = (self.ln_c[k] + k as f64 * lp + (n - k) as f64 * lq).exp();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_table_has_unit_mass() {
        let d = TrialDesign::new(4, 7).unwrap();
        let p = joint_pmf(ObservedTable::new(4, 0), d, NullPoint::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn two_by_two_half() {
        // C(2,1) 0.5^2 = 0.5 per arm
        let d = TrialDesign::new(2, 2).unwrap();
        let p = joint_pmf(ObservedTable::new(1, 1), d, NullPoint::new(0.5, 0.0).unwrap()).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
    }

    #[test]
    fn enumeration_order() {
        let d = TrialDesign::new(1, 1).unwrap();
        let tabs: Vec<_> = enumerate_space(d).unwrap().into_iter().map(|t| (t.x_t, t.x_c)).collect();
        assert_eq!(tabs, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(enumerate_space(TrialDesign { n_t: 8, n_c: 19 }).unwrap().len(), 180);
        assert!(enumerate_space(TrialDesign { n_t: 0, n_c: 3 }).is_err());
        assert!(TrialDesign::new(0, 3).is_err());
    }

    #[test]
    fn invalid_inputs() {
        let d = TrialDesign::new(3, 3).unwrap();
        assert!(joint_pmf(ObservedTable::new(4, 0), d, NullPoint { p_t: 0.5, delta: 0.0 }).is_err());
        assert!(NullPoint::new(0.1, 0.3).is_err());
        assert!(NullPoint::new(0.95, -0.1).is_err());
        assert!(Margin::new(-0.1).is_err());
        assert!(Margin::new(1.0).is_err());
    }

    #[test]
    fn arm_pmf_matches_joint() {
        let arm = ArmPmf::new(9);
        let mut v = vec![0.0; 10];
        arm.fill(0.37, &mut v);
        for k in 0..=9u32 {
            let direct = (ln_choose(9, k) + k as f64 * 0.37f64.ln() + (9 - k) as f64 * 0.63f64.ln()).exp();
            assert!((v[k as usize] - direct).abs() < 1e-14);
        }
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn normalization_on_small_designs() {
        for n_t in 1..=6 {
            for n_c in 1..=6 {
                let d = TrialDesign::new(n_t, n_c).unwrap();
                let space = enumerate_space(d).unwrap();
                for i in 0..=20 {
                    let delta = -1.0 + 0.1 * i as f64;
                    let (lo, hi) = admissible_p_t(delta);
                    for j in 0..=20 {
                        let p_t = lo + (hi - lo) * j as f64 / 20.0;
                        let point = NullPoint::new(p_t, delta).unwrap();
                        let mut total = 0.0;
                        for &t in &space {
                            let p = joint_pmf(t, d, point).unwrap();
                            assert!(p >= 0.0);
                            total += p;
                        }
                        assert!((total - 1.0).abs() < 1e-12, "{n_t} {n_c} {p_t} {delta} {total}");
                    }
                }
            }
        }
    }
}
