//! Ensemble-based model assessment: descriptor tables over many
//! realizations, two-sample tests between tables and minimum-contrast
//! parameter fitting.

mod compare;
mod contrast;
mod descriptors;
mod ensemble;

pub use compare::{
    energy_distance_test, holm_adjust, kolmogorov_tail, ks_battery, ks_exact_p, ks_p_value, ks_statistic,
    page_statistic, page_trend_test,
    ColumnDiagnostic, KsBattery, KsDecision, TestResult, DEFAULT_PERMUTATIONS,
};
pub use contrast::{
    fit_and_check, l2_contrast, min_contrast_fit, CheckSettings, CheckedFit, ContrastFit, ParamGrid, FLAT_TOLERANCE,
};
pub use descriptors::{Curve, CurveDescriptor, Descriptor, Panel};
pub use ensemble::{describe_configurations, run_ensemble, FailedRealization, ModelEnsemble, MAX_FAILURE_FRACTION};
