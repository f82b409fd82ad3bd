//! Exact and asymptotic inference on the risk difference `P_T - P_C` of two
//! independent binomial arms, aimed at noninferiority trials.
//!
//! The crate provides Chan's exact unconditional test and the Chan & Zhang
//! test built on the delta-projected score, the exact-corrected (EC) score
//! and interval that agree with Chan's exact test by construction, the
//! Miettinen-Nurminen and Wald baselines, and operating characteristics of
//! all four procedures.
//!
//! ```
//! use riskdiff::{p_exact, Margin, ObservedTable, TrialDesign};
//!
//! let design = TrialDesign::new(8, 19)?;
//! let p = p_exact(ObservedTable::new(5, 10), design, Margin::new(0.1)?)?;
//! assert!((p.value - 0.200).abs() < 5e-4);
//! # Ok::<(), riskdiff::Error>(())
//! ```

pub mod error;
pub mod exact;
pub mod intervals;
pub mod model;
pub mod normal;
pub mod opchar;
pub mod oracle;
pub mod rmle;
mod search;
pub mod stats;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/intervals.md")]
    mod intervals {}
    #[doc = include_str!("../../../book/src/opchar.md")]
    mod opchar {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

pub use error::{Error, Result};
pub use exact::{
    fisher_exact, fisher_exact_greater, p_cz, p_cz_all, p_cz_with, p_exact, p_exact_all, p_exact_with, p_l, p_l_with, p_u, p_u_with,
    tail_prob, CzPValue, MaximizationResult, Orientation, SearchConfig,
};
pub use intervals::{
    ci_cz, ci_cz_all, ci_cz_with, ci_ec, ci_ec_from_score, ci_ec_with, ci_mn, ci_mn_with, ci_wald, ec_correction,
    z_ec, EcScore, Interval, Method,
};
pub use model::{admissible_p_t, enumerate_space, joint_pmf, Margin, NullPoint, ObservedTable, TrialDesign};
pub use normal::{std_normal_cdf, std_normal_quantile, std_normal_sf, Probit};
pub use opchar::{
    conditional_size, critical_region, critical_region_with, ec_expectation, ec_expectation_with, maximal_size,
    maximal_size_of, p_values, power_curve, power_curve_of, region_from_p_values, size_profile, DecisionSet, EcExpectation,
    MaximalSize, MethodCurve, PowerCurve, SizeAt, SizeConfig,
};
pub use rmle::{restricted_mle, sigma_hat, RestrictedEstimate};
pub use stats::{
    barnard_check, barnard_violations, monotonicity_check, p_asy, p_wald, wald_z, z_delta, BarnardViolation,
    Statistic, StatisticKind, TIE_TOLERANCE,
};
