//! Congruence-class search for the 3n+1 problem.
//!
//! Classes `b·k − c` are iterated symbolically as affine forms
//! ([`affine`]), certified when their trajectories provably reach smaller
//! numbers ([`search`]), and accumulated into an exact coverage density
//! ([`coverage`]). [`oracle`] holds the concrete-integer counterparts used for
//! cross-checking and stopping-time statistics.

pub mod affine;
pub mod analysis;
pub mod checkpoint;
pub mod coverage;
pub mod error;
pub mod oracle;
pub mod report;
pub mod search;

pub use affine::{build_trajectory, AffineForm, Parity};
pub use analysis::{analyze_moduli, ModuliReport};
pub use checkpoint::Checkpoint;
pub use coverage::{
    brute_force_density, delta_report, CoverageLedger, DeltaReport, DensityCheckpoint, ResidueClass,
};
pub use error::{Error, Result};
pub use oracle::{
    longest_modified_stop, modified_stopping_time, stopping_time, verify_success_record,
    StopRecord, VerificationReport,
};
pub use search::{
    check_class, enumerate_classes, Certificate, CertificateKind, CheckOptions, PatternClass,
    Search, SearchConfig, SearchSummary, SuccessRecord, TrajectoryPattern, TrajectoryRegistry,
};
