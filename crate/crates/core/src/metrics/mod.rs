//! F1 scores, Fleiss' kappa, paired significance testing and run reports.

mod f1;
mod kappa;
mod report;
mod significance;

pub use f1::{macro_f1, per_class_f1, weighted_f1, ConfusionTally};
pub use kappa::fleiss_kappa;
pub use report::{mean_std, render_table, AggregateReport, LabelScore, RunReport};
pub use significance::{significance_test, Significance, TEST_NAME};
