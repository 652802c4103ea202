mod metrics;
mod paths;
mod record;
mod verify;

pub use metrics::{
    conv_ratio, dispersion, lazy_walk_convergence, singular_values, von_neumann_entropy, ConvRatio, Entropy,
    CONV_RATIO_CAP, DEGENERATE_NORM, SVD_MAX_SWEEPS, SVD_TOLERANCE,
};
pub use paths::{
    analytic_grad, cross_entropy_upstream, enumerate_paths_forward, path_weight_distribution, LinearStack,
    PathDescriptor, PathWeights, ENUMERATION_MAX_DEPTH, EXHAUSTIVE_MAX_DEPTH,
};
pub use record::{
    record_training_diagnostics, snapshot_diagnostics, write_diagnostics_csv, DiagnosticsRecord, LayerDiagnostics,
    DIAGNOSTICS_HEADER,
};
pub use verify::{
    backward_deviation, forward_deviation, verify_theorem, Theorem, VerifyInstance, VerifyOptions, VerifyReport,
    THEOREM1_TOLERANCE, THEOREM2_TOLERANCE, VERIFY_CONVS, VERIFY_MAX_DEPTH, VERIFY_SKIPS,
};
