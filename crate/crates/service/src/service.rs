//! The moderation workflow: score submitted actions, log a decision for each,
//! collect feedback and turn the log into new training data.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use chrono::{DateTime, Utc};
use fnvd_core::cluster::ClusterConfig;
use fnvd_core::data::{Dataset, LabeledInstance, REGULAR, VIOLATION};
use fnvd_core::explain::{build_report, ExplainConfig};
use fnvd_core::lmt::{predict_proba, train, ConfusionMatrix, LmtModel, Metrics, TrainParams};
use fnvd_core::lmt::serialize_model;
use fnvd_core::taxonomy::{Taxonomy, TaxonomyIssue};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::records::{ActionSubmission, Decision, DecisionRecord, FeedbackFlag, FeedbackRequest};
use crate::registry::{dataset_digest, ModelRegistry};
use crate::store::DecisionLog;

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub threshold: f64,
    pub cluster: ClusterConfig,
    /// Ground-truth labels by action id, used only for live metrics.
    pub shadow_labels: HashMap<String, u8>,
    /// Labeled data prepended to the exported log when retraining.
    pub retrain_base: Option<Dataset>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            cluster: ClusterConfig::default(),
            shadow_labels: HashMap::new(),
            retrain_base: None,
        }
    }
}

#[derive(Debug)]
pub struct ActiveModel {
    pub version: u64,
    pub model: LmtModel,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordFilter {
    pub decision: Option<Decision>,
    pub flagged: Option<bool>,
    pub since: Option<DateTime<Utc>>,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
}

impl RecordFilter {
    /// Parse query parameters. Unknown keys and malformed values are errors.
    pub fn from_query(query: &HashMap<String, String>) -> Result<Self, ServiceError> {
        let bad = |m: String| ServiceError::BadFilter(m);
        let mut f = RecordFilter {
            page: 1,
            page_size: DEFAULT_PAGE_SIZE,
            ..Default::default()
        };
        for (key, value) in query {
            match key.as_str() {
                "decision" => {
                    f.decision = Some(match value.as_str() {
                        "rejected" | "rejected_violation" => Decision::RejectedViolation,
                        "accepted" => Decision::Accepted,
                        other => return Err(bad(format!("decision must be rejected or accepted, got {other:?}"))),
                    })
                }
                "flagged" => {
                    f.flagged = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("flagged must be true or false, got {value:?}")))?,
                    )
                }
                "since" => {
                    f.since = Some(
                        DateTime::parse_from_rfc3339(value)
                            .map_err(|e| bad(format!("since {value:?}: {e}")))?
                            .with_timezone(&Utc),
                    )
                }
                "page" => f.page = value.parse().map_err(|_| bad(format!("page {value:?}")))?,
                "page_size" => f.page_size = value.parse().map_err(|_| bad(format!("page_size {value:?}")))?,
                other => return Err(bad(format!("unknown parameter {other:?}"))),
            }
        }
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<(), ServiceError> {
        if self.page == 0 {
            return Err(ServiceError::BadFilter("page starts at 1".into()));
        }
        if self.page_size == 0 || self.page_size > MAX_PAGE_SIZE {
            return Err(ServiceError::BadFilter(format!("page_size must be in 1..={MAX_PAGE_SIZE}")));
        }
        Ok(())
    }

    fn matches(&self, r: &DecisionRecord) -> bool {
        self.decision.is_none_or(|d| r.decision == d)
            && self.flagged.is_none_or(|f| r.is_flagged() == f)
            && self.since.is_none_or(|s| r.created_at >= s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordPage {
    pub records: Vec<DecisionRecord>,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowMetrics {
    pub labeled: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceMetrics {
    pub evaluated: usize,
    pub rejected: usize,
    pub accepted: usize,
    pub flagged: usize,
    pub feedback_flags: usize,
    pub model_version: Option<u64>,
    pub threshold: f64,
    pub shadow: Option<ShadowMetrics>,
}

pub struct Service {
    config: ServiceConfig,
    explain: ExplainConfig,
    taxonomy: Taxonomy,
    registry: Mutex<ModelRegistry>,
    active: RwLock<Option<Arc<ActiveModel>>>,
    log: Mutex<DecisionLog>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Service {
    /// Open the log and registry under `dir`, restoring the active model.
    pub fn open(dir: &Path, taxonomy: Taxonomy, config: ServiceConfig) -> Result<Self, ServiceError> {
        if !(config.threshold > 0.0 && config.threshold < 1.0) {
            return Err(ServiceError::Config(format!("threshold {} not in (0, 1)", config.threshold)));
        }
        let registry = ModelRegistry::open(&dir.join("models"))?;
        let log = DecisionLog::open(dir)?;
        let active = match registry.active() {
            Some(version) => {
                let model = registry.load(version)?;
                check_taxonomy(&taxonomy, &model)?;
                Some(Arc::new(ActiveModel { version, model }))
            }
            None => None,
        };
        Ok(Self {
            explain: ExplainConfig {
                cluster: config.cluster,
                threshold: config.threshold,
            },
            config,
            taxonomy,
            registry: Mutex::new(registry),
            active: RwLock::new(active),
            log: Mutex::new(log),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.config.threshold
    }

    pub fn set_shadow_labels(&mut self, labels: HashMap<String, u8>) {
        self.config.shadow_labels = labels;
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn active(&self) -> Option<Arc<ActiveModel>> {
        self.active.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn require_active(&self) -> Result<Arc<ActiveModel>, ServiceError> {
        self.active().ok_or(ServiceError::NoActiveModel)
    }

    /// Register `model` and make it active, unless it is byte-identical to
    /// the model already active.
    pub fn install_model(&self, model: LmtModel, source: &str) -> Result<u64, ServiceError> {
        check_taxonomy(&self.taxonomy, &model)?;
        if let Some(active) = self.active() {
            if serialize_model(&active.model) == serialize_model(&model) {
                return Ok(active.version);
            }
        }
        let version = lock(&self.registry).register(&model, None, source)?;
        self.activate(version)?;
        Ok(version)
    }

    /// Load a registered model for inspection.
    pub fn load_version(&self, version: u64) -> Result<LmtModel, ServiceError> {
        lock(&self.registry).load(version)
    }

    pub fn versions(&self) -> Vec<crate::registry::ModelVersion> {
        lock(&self.registry).versions().to_vec()
    }

    /// Swap the active model. Requests already holding the old one finish
    /// with it.
    pub fn activate(&self, version: u64) -> Result<u64, ServiceError> {
        let mut registry = lock(&self.registry);
        let model = registry.load(version)?;
        check_taxonomy(&self.taxonomy, &model)?;
        registry.activate(version)?;
        *self.active.write().unwrap_or_else(|p| p.into_inner()) = Some(Arc::new(ActiveModel { version, model }));
        log::info!("activated model version {version}");
        Ok(version)
    }

    pub fn evaluate_action(&self, sub: ActionSubmission) -> Result<DecisionRecord, ServiceError> {
        if sub.action_id.is_empty() {
            return Err(ServiceError::InvalidRequest("action_id is empty".into()));
        }
        let active = self.require_active()?;
        if lock(&self.log).contains_action(&sub.action_id) {
            return Err(ServiceError::DuplicateActionId(sub.action_id));
        }
        let probability = predict_proba(&active.model, &sub.features)?.probability;
        let (decision, report) = if probability >= self.config.threshold {
            let report = build_report(&active.model, &sub.features, &self.taxonomy, &self.explain)?;
            (Decision::RejectedViolation, Some(report))
        } else {
            (Decision::Accepted, None)
        };
        let mut log = lock(&self.log);
        let record = DecisionRecord {
            record_id: log.next_id(),
            action: sub,
            probability,
            threshold: self.config.threshold,
            decision,
            report,
            model_version: active.version,
            created_at: Utc::now(),
            feedback: Vec::new(),
        };
        Ok(log.append(record)?.clone())
    }

    pub fn flag_feedback(&self, record_id: u64, req: FeedbackRequest) -> Result<DecisionRecord, ServiceError> {
        if req.member_id.is_empty() {
            return Err(ServiceError::InvalidRequest("member_id is empty".into()));
        }
        let flag = FeedbackFlag {
            member_id: req.member_id,
            verdict: req.verdict,
            comment: req.comment,
            at: Utc::now(),
        };
        Ok(lock(&self.log).add_feedback(record_id, flag)?.clone())
    }

    pub fn get_record(&self, record_id: u64) -> Result<DecisionRecord, ServiceError> {
        Ok(lock(&self.log).get(record_id)?.clone())
    }

    pub fn n_records(&self) -> usize {
        lock(&self.log).len()
    }

    /// Newest first: `created_at` descending, then `record_id` descending.
    pub fn list_records(&self, filter: &RecordFilter) -> Result<RecordPage, ServiceError> {
        filter.check()?;
        let log = lock(&self.log);
        let mut hits: Vec<&DecisionRecord> = log.records().iter().filter(|r| filter.matches(r)).collect();
        hits.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(b.record_id.cmp(&a.record_id)));
        let total = hits.len();
        let start = (filter.page - 1).saturating_mul(filter.page_size);
        let records = hits.into_iter().skip(start).take(filter.page_size).cloned().collect();
        Ok(RecordPage {
            records,
            total,
            page: filter.page,
            page_size: filter.page_size,
        })
    }

    pub fn metrics(&self) -> ServiceMetrics {
        let log = lock(&self.log);
        let records = log.records();
        let rejected = records.iter().filter(|r| r.decision == Decision::RejectedViolation).count();
        let mut confusion = ConfusionMatrix::default();
        for r in records {
            if let Some(&y) = self.config.shadow_labels.get(&r.action.action_id) {
                let predicted = if r.decision == Decision::RejectedViolation { VIOLATION } else { REGULAR };
                confusion.record(y, predicted);
            }
        }
        let shadow = (!self.config.shadow_labels.is_empty()).then(|| ShadowMetrics {
            labeled: confusion.total(),
            metrics: Metrics::from_confusion(confusion),
        });
        ServiceMetrics {
            evaluated: records.len(),
            rejected,
            accepted: records.len() - rejected,
            flagged: records.iter().filter(|r| r.is_flagged()).count(),
            feedback_flags: records.iter().map(|r| r.feedback.len()).sum(),
            model_version: self.active().map(|a| a.version),
            threshold: self.config.threshold,
            shadow,
        }
    }

    /// Every logged action whose features fit the active schema, labeled by
    /// its decision unless a strict majority of feedback says otherwise.
    pub fn export_retrain_dataset(&self) -> Result<Dataset, ServiceError> {
        let active = self.require_active()?;
        let schema = &active.model.schema;
        let log = lock(&self.log);
        let mut skipped = 0;
        let instances: Vec<LabeledInstance> = log
            .records()
            .iter()
            .filter(|r| {
                let ok = schema.check(&r.action.features).is_ok();
                skipped += usize::from(!ok);
                ok
            })
            .map(|r| LabeledInstance::new(r.action.features.clone(), u8::from(r.consensus_is_violation())))
            .collect();
        if skipped > 0 {
            log::warn!("export skipped {skipped} records that do not fit the active schema");
        }
        Ok(Dataset::new(schema.clone(), instances)?)
    }

    /// Train on the base data plus the export and register the result as a
    /// new, inactive version.
    pub fn retrain(&self, params: &TrainParams) -> Result<u64, ServiceError> {
        let exported = self.export_retrain_dataset()?;
        let ds = match &self.config.retrain_base {
            Some(base) => {
                if base.schema() != exported.schema() {
                    return Err(ServiceError::SchemaMismatch(
                        "retraining base data does not match the active schema".into(),
                    ));
                }
                let mut all = base.instances().to_vec();
                all.extend(exported.into_instances());
                Dataset::new(base.schema().clone(), all)?
            }
            None => exported,
        };
        if !ds.has_both_classes() {
            let s = ds.class_stats();
            return Err(ServiceError::DegenerateExport(format!(
                "{} violation and {} regular instances",
                s.n_violation, s.n_regular
            )));
        }
        let model = train(&ds, params)?;
        let version = lock(&self.registry).register(&model, Some(dataset_digest(&ds)), "retrain")?;
        log::info!("registered model version {version} from {} instances", ds.len());
        Ok(version)
    }
}

fn check_taxonomy(taxonomy: &Taxonomy, model: &LmtModel) -> Result<(), ServiceError> {
    let issues = taxonomy.validate_against(&model.schema);
    let missing: Vec<&str> = issues
        .iter()
        .filter_map(|i| match i {
            TaxonomyIssue::MissingFeature(f) => Some(f.as_str()),
            TaxonomyIssue::UnknownFeature(_) => None,
        })
        .collect();
    if !missing.is_empty() {
        return Err(ServiceError::Config(format!(
            "taxonomy does not place model features: {}",
            missing.join(", ")
        )));
    }
    if !issues.is_empty() {
        log::warn!("taxonomy has {} leaves outside the model schema", issues.len());
    }
    Ok(())
}
