//! Repeated leave-one-subject-out evaluation, metrics and significance tests.

mod analysis;
mod experiment;
mod metrics;
mod report;
mod stats;

pub use analysis::{
    ablation_from_results, ablation_pretraining, accuracy_by_score_bin, default_score_bins, feature_group_comparison,
    AblationPooled, AblationReport, AblationRow, BinAccuracy, GroupComparison,
};
pub use experiment::{
    eligible_users, fold_seed, loso_folds, run_experiment, Condition, ExperimentConfig, Fold, FoldObserver, FoldPlan,
    FoldRecord, RunResult,
};
pub use metrics::{auc, average_precision, confusion, metrics, midranks, Confusion, Metrics};
pub use report::{
    compare_conditions, mean_probabilities, ComparisonRow, ConditionResult, EvalReport, MeanSd, METRIC_NAMES,
    REPORT_VERSION,
};
pub use stats::{
    incomplete_beta, ln_gamma, paired_t_test, stars, t_two_sided_p, welch_t_test, wilcoxon_signed_rank, TTestResult,
    WilcoxonResult, WILCOXON_EXACT_MAX_N,
};
