//! Executable checks of the lower bounds and supporting lemmas.

mod bounds;
mod goldilocks;
mod lemmas;
mod protocols;
mod safe_set;

pub use bounds::{
    thm1_rhs, verify_thm1, verify_thm2, Precondition, ReportContext, VerificationReport, MARGIN_TOLERANCE,
};
pub use goldilocks::{
    default_eta_grid, derivative_check, goldilocks_search, uninformed_policies_disagree, value_curve, CurvePoint,
    DerivativeCheck, GoldilocksResult, GoldilocksWitness, NoiseFamily, DERIVATIVE_STEP,
};
pub use lemmas::{
    check_dominating_performance, check_frontloading, check_kl_decomposition, check_positive_part_bounds,
    reward_entropy, KlDecomposition, PositivePartCheck, SideBySide, TuplePmf,
};
pub use protocols::{
    check_fixed_length_protocol, check_variable_length_protocol, fixed_length_code, one_to_one_code, FixedLengthCheck,
    VariableLengthCheck,
};
pub use safe_set::{safe_set_information_demo, SafeSetDemo, MAX_SAFE_SET_OUTCOMES};
