//! Benchmark harness: datasets, subset selection, trace archives, report
//! emission, and the pipelines behind the CLI.

mod archive;
mod dataset;
pub mod report;
mod run;

pub use archive::{read_trace, write_trace, TraceArchive, MAGIC, VERSION};
pub use dataset::{load_dataset, select_subset};
pub use run::{run, Command, RunConfig, RunSummary};
