//! Moderation workflow service: decision log, model registry, HTTP API.

pub mod error;
pub mod http;
pub mod records;
pub mod registry;
pub mod service;
pub mod store;

pub use error::ServiceError;
pub use records::{ActionSubmission, Decision, DecisionRecord, FeedbackFlag, FeedbackRequest, Verdict};
pub use service::{RecordFilter, RecordPage, Service, ServiceConfig, ServiceMetrics};
