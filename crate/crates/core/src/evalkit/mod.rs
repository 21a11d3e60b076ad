//! Metrics, the cross-validation runner and report formatting.

mod metrics;
mod protocol;
mod report;

pub use metrics::{accuracy, decide, roc_auc, Roc, DECISION_THRESHOLD};
pub use protocol::{run_protocol, FitAudit, ProtocolConfig, SelectionConfig};
pub use report::{population_std, FoldResult, ProtocolReport, ReportRow};
