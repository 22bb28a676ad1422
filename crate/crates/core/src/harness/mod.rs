//! Desk-scale evaluation: endpoint sampling, a mock upstream and a pass-rate report.

pub mod evaluate;
pub mod mock;
pub mod sample;

pub use evaluate::{evaluate, evaluate_document, ApiReport, CallOutcome, EvalOptions, EvalReport, EvalRun, Scenario};
pub use mock::{run_mock_upstream, LoggedRequest, MockConfig, MockError, MockHandle};
pub use sample::{greedy_cover, resource_group, sample, Axes, DiversityScore, SampleReport, Selected, DEFAULT_THRESHOLD};
