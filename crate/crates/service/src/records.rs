use chrono::{DateTime, Utc};
use fnvd_core::data::FeatureVector;
use fnvd_core::explain::ExplanationReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSubmission {
    pub action_id: String,
    pub actor_id: String,
    pub features: FeatureVector,
    /// Shown to reviewers only; never used for classification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_context: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    RejectedViolation,
    Accepted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FlagAsViolation,
    FlagAsNonViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackFlag {
    pub member_id: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub at: DateTime<Utc>,
}

/// Body of a feedback request; the server stamps the time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub member_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub record_id: u64,
    pub action: ActionSubmission,
    pub probability: f64,
    pub threshold: f64,
    pub decision: Decision,
    /// Present exactly when the action was rejected.
    pub report: Option<ExplanationReport>,
    pub model_version: u64,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub feedback: Vec<FeedbackFlag>,
}

impl DecisionRecord {
    pub fn is_flagged(&self) -> bool {
        !self.feedback.is_empty()
    }

    /// The label implied by the decision, overridden when a strict majority
    /// of feedback flags disagrees.
    pub fn consensus_is_violation(&self) -> bool {
        let original = self.decision == Decision::RejectedViolation;
        let votes_violation = self
            .feedback
            .iter()
            .filter(|f| f.verdict == Verdict::FlagAsViolation)
            .count();
        let votes_regular = self.feedback.len() - votes_violation;
        match votes_violation.cmp(&votes_regular) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => original,
        }
    }
}
