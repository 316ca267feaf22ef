//! Simulation studies: synthetic populations, informative sampling,
//! repeated-sampling scoring, and kernel self-checks.

pub mod metrics;
pub mod population;
pub mod validation;

pub use metrics::{
    interval_score, run_study, write_domain_records_csv, write_summary_csv,
    write_timings_json, DomainRecord, EstimatorKind, ReplicateReport, StudyConfig,
    StudyResult, SummaryRow,
};
pub use population::{
    box_cox, box_cox_scalar, build_population, inclusion_probabilities, informative_sample,
    inv_box_cox, GeneratorSpec, PopUnit, SyntheticPopulation,
};
pub use validation::{kernel_report, KernelCheck};
