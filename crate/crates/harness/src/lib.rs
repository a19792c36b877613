//! Configuration loading, experiment runs, degree census, theory
//! comparison and the acceptance checks behind the `lor` command.

pub mod acceptance;
pub mod compare;
pub mod config;
pub mod graph;
pub mod report;

pub use compare::{compare_to_theory, Deviation, Prediction};
pub use config::{load_config, parse_config, LoadError};
pub use graph::{degree_census, sample_frame, snapshot_of, DegreeCensus, Frame, GraphSnapshot, NodeDegree};
pub use report::{run_experiment, run_trials, write_outputs, Experiment, HarnessError, MetricsReport, Moments, Pooled};
