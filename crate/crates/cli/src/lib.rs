//! Model ingestion, bundled case studies, run orchestration and reports
//! for the `minobs` command line tool.

pub mod model_text;
pub mod models;
pub mod report;
