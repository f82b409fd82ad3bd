use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use riskdiff::oracle::{oracle_rmle, oracle_size, oracle_tail};
use riskdiff::{
    admissible_p_t, critical_region_with, maximal_size_of, restricted_mle, tail_prob, NullPoint, ObservedTable,
    Orientation, Statistic, TrialDesign,
};
use serde_json::{json, Value};

use crate::commands::{key, margin, with};
use crate::output::{emit, Cell, Format, Report};
use crate::{parse_methods, Failure, Grids, Outcome, VerifyArgs};

struct Uniform(ChaCha8Rng);

impl Uniform {
    fn next(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, n: u32) -> u32 {
        ((self.next() * n as f64) as u32).min(n - 1)
    }
}

struct Check {
    name: String,
    cases: usize,
    deviation: f64,
    tolerance: f64,
}

fn rmle_check(rng: &mut Uniform, cases: usize) -> Result<Check, Failure> {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let d = TrialDesign::new(1 + rng.below(60), 1 + rng.below(60)).expect("positive arms");
        let t = ObservedTable::new(rng.below(d.n_t + 1), rng.below(d.n_c + 1));
        let c = 2.0 * rng.next() - 1.0;
        let a = restricted_mle(t, d, c)?;
        let b = oracle_rmle(t, d, c)?;
        worst = worst.max((a.p_t - b.p_t).abs());
    }
    Ok(Check { name: "restricted_mle".into(), cases, deviation: worst, tolerance: 1e-6 })
}

fn tail_check(rng: &mut Uniform, cases: usize) -> Result<Check, Failure> {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let d = TrialDesign::new(1 + rng.below(8), 1 + rng.below(8)).expect("positive arms");
        let t = ObservedTable::new(rng.below(d.n_t + 1), rng.below(d.n_c + 1));
        let stat = Statistic::delta_projected(0.4 * rng.next() - 0.2);
        let delta = 2.0 * rng.next() - 1.0;
        let (lo, hi) = admissible_p_t(delta);
        let p_t = lo + (hi - lo) * rng.next();
        let s_obs = stat.eval(t, d);
        for (orientation, upper) in [(Orientation::Upper, true), (Orientation::Lower, false)] {
            let a = tail_prob(d, delta, p_t, s_obs, stat, orientation)?;
            let b = oracle_tail(d, NullPoint::new(p_t, delta)?, |x| stat.eval(x, d), s_obs, upper)?;
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Check { name: "tail_prob".into(), cases, deviation: worst, tolerance: 1e-12 })
}

pub fn run(args: &VerifyArgs, grids: &Grids, base: Value, format: Format, out: Option<&Path>) -> Outcome {
    if args.nsims == 0 {
        return Err(Failure::Usage("--nsims must be at least 1".into()));
    }
    let methods = parse_methods(&args.method)?;
    let config = with(base, json!({"subcommand": "verify", "nsims": args.nsims, "seed": args.seed, "methods": methods}));
    let mut rng = Uniform(ChaCha8Rng::seed_from_u64(args.seed));

    let mut checks = vec![rmle_check(&mut rng, args.nsims)?, tail_check(&mut rng, args.nsims.min(200))?];
    for (n_t, n_c, delta0, alpha) in [(8, 19, 0.10, 0.5), (6, 6, 0.12, 0.05), (18, 25, 0.10, 0.05)] {
        let d = TrialDesign::new(n_t, n_c).expect("positive arms");
        let m = margin(delta0)?;
        for &method in &methods {
            let region = critical_region_with(d, m, alpha, method, &grids.search)?;
            let s = maximal_size_of(&region, &grids.size)?.value;
            let o = oracle_size(&region, m)?;
            checks.push(Check {
                name: format!("maximal_size {} n=({n_t}, {n_c})", key(method)),
                cases: 1,
                deviation: (s - o).abs(),
                tolerance: 1e-3,
            });
        }
    }

    let mut report = Report::new(config, &["check", "cases", "max_abs_deviation", "tolerance", "pass"]);
    let mut all = true;
    for c in &checks {
        let pass = c.deviation <= c.tolerance;
        all &= pass;
        report.push(vec![Cell::from(c.name.as_str()), c.cases.into(), c.deviation.into(), c.tolerance.into(), pass.into()]);
    }
    report.summary = Some(json!({"pass": all}));
    emit(out, &report.render(format))?;
    if all {
        Ok(())
    } else {
        Err(Failure::Compute("oracle cross-check failed".into()))
    }
}
