mod certificate;
mod cycle;
pub mod lp;
mod report;

pub use certificate::{
    certify_consensus, CertificateOptions, CertificateOutcome, ConsensusCertificate, CycleWitness, InconclusiveReason,
};
pub use cycle::{analyze_cycle, check_matching, CycleClass, CycleError, CycleVerdict, EPSILON_INT};
pub use report::{
    analyze_network, classify_network, AnalysisError, Connectivity, Epistemic, StaticReport, Verdict,
    REPORT_SCHEMA_VERSION,
};
