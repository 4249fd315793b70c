//! Numerical checks of the inequalities behind the oracle bounds: the
//! penalty threshold identity, the weight and restricted-eigenvalue
//! constants, the empirical-norm sandwich, the localization constants and
//! the assembled oracle inequalities.
//!
//! Every quantity defined as an infimum over a cone is estimated by
//! sampling and is reported as such.

mod cone;
mod concentration;
mod constants;
mod lemma1;
mod oracle;
mod re;
mod sandwich;
mod weights;

pub use cone::Cone;
pub use concentration::{log_log_slope, mean_and_std_error, risk_mean_curve, sup_deviation};
pub use constants::{solve_v_constants, VConstant, VConstants};
pub use lemma1::{check_lemma1, Lemma1Report};
pub use oracle::{
    beta_star_least_squares, beta_star_restricted_fit, oracle_bound_report, BoundInputs,
    OracleBoundReport, OracleSpec,
};
pub use re::{estimate_re_constant, estimate_re_from_matrix, REEstimate};
pub use sandwich::{check_sandwich, SandwichEntry, SandwichReport};
pub use weights::{min_weight_prop1, sample_omega_lower, subject_weight, OmegaLowerEstimate, Prop1Report};
