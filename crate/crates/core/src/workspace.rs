//! The persisted unit: graph, feedback, character descriptions, settings and
//! an append-only event log from which metrics are folded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{ArtifactContent, ArtifactKind};
use crate::feedback::FeedbackStore;
use crate::graph::{seeded_uuid, DesignGraph, NodeId};
use crate::propagation::DescriptionStore;
use crate::style::StyleId;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ProviderMode {
    Real,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Settings {
    pub default_variations: usize,
    pub style: StyleId,
    pub provider_mode: ProviderMode,
    /// Seed for the mock provider and the logical clock, when seeded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            default_variations: crate::generation::DEFAULT_VARIATIONS,
            style: StyleId::default(),
            provider_mode: ProviderMode::Mock,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    NodeCreated,
    NodeEdited,
    NodeDeleted,
    NodeMoved,
    AiRevised,
    FeedbackGenerated,
    FeedbackIncorporated,
    Connected,
    Disconnected,
    ForwardPropagated,
    BackPropagated,
    SingleUpdated,
    NodeRegenerated,
    Brainstormed,
    GeneratedMore,
    GeneratedNext,
    StoryboardBuilt,
    ImagesRegenerated,
    ImageGenerated,
    CharacterDescribed,
}

/// Ids and counts attached to an event. Unused fields are omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EventPayload {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub node_ids: Vec<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ArtifactKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes_updated: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    pub seq: u64,
    /// Milliseconds; wall-clock or logical depending on the session clock.
    pub timestamp: u64,
    pub actor: String,
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub payload: EventPayload,
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Counts up by one per reading, for reproducible logs.
pub struct LogicalClock(AtomicU64);

impl LogicalClock {
    pub fn starting_at(t: u64) -> Self {
        LogicalClock(AtomicU64::new(t))
    }

    /// Continues after the last event of `workspace`.
    pub fn after(workspace: &Workspace) -> Self {
        LogicalClock::starting_at(workspace.events.last().map_or(0, |e| e.timestamp + 1))
    }
}

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Workspace {
    pub format_version: u32,
    pub id: String,
    pub name: String,
    pub settings: Settings,
    pub graph: DesignGraph,
    #[serde(default)]
    pub feedback: FeedbackStore,
    #[serde(default)]
    pub descriptions: DescriptionStore,
    #[serde(default)]
    pub events: Vec<Event>,
}

impl Workspace {
    /// A seeded workspace has a reproducible id and node ids.
    pub fn new(name: impl Into<String>, seed: Option<u64>) -> Self {
        let id_seed = seed.unwrap_or_else(rand::random);
        Workspace {
            format_version: FORMAT_VERSION,
            id: seeded_uuid(id_seed, u64::MAX),
            name: name.into(),
            settings: Settings {
                seed,
                ..Settings::default()
            },
            graph: DesignGraph::with_seed(id_seed),
            feedback: FeedbackStore::new(),
            descriptions: DescriptionStore::new(),
            events: Vec::new(),
        }
    }

    pub fn record(&mut self, clock: &dyn Clock, actor: &str, kind: EventKind, payload: EventPayload) -> &Event {
        let seq = self.events.last().map_or(0, |e| e.seq + 1);
        self.events.push(Event {
            seq,
            timestamp: clock.now_ms(),
            actor: actor.to_string(),
            kind,
            payload,
        });
        self.events.last().expect("just pushed")
    }

    /// Checks cross-references between the graph and the side stores.
    pub fn check_invariants(&self) -> Result<(), PersistError> {
        self.graph
            .check_invariants()
            .map_err(|e| PersistError::Invalid(e.to_string()))?;
        for (key, questions) in &self.feedback {
            for q in questions {
                if q.targets.first() != Some(key) {
                    return Err(PersistError::Invalid(format!("question {} is filed under {key}", q.id)));
                }
                if let Some(missing) = q.targets.iter().find(|t| !self.graph.contains(t)) {
                    return Err(PersistError::Invalid(format!("question {} targets unknown node {missing}", q.id)));
                }
            }
        }
        if let Some(missing) = self.descriptions.keys().find(|k| !self.graph.contains(k)) {
            return Err(PersistError::Invalid(format!("description for unknown node {missing}")));
        }
        for pair in self.events.windows(2) {
            if pair[1].seq <= pair[0].seq {
                return Err(PersistError::Invalid(format!("event sequence {} is out of order", pair[1].seq)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PersistError {
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("workspace format version {found} is not supported (expected {supported}); migrate the file first")]
    UnsupportedVersion { found: String, supported: u32 },
    #[error("workspace does not match the schema at line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error("workspace is inconsistent: {0}")]
    Invalid(String),
}

/// Pretty-printed JSON with a trailing newline. Key order is fixed by the
/// type definitions, so equal workspaces serialize to equal bytes.
pub fn save_workspace(workspace: &Workspace) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(workspace).expect("workspace serializes");
    bytes.push(b'\n');
    bytes
}

pub fn load_workspace(bytes: &[u8]) -> Result<Workspace, PersistError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| PersistError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    match value.get("formatVersion") {
        Some(v) if v.as_u64() == Some(FORMAT_VERSION as u64) => {}
        other => {
            return Err(PersistError::UnsupportedVersion {
                found: other.map_or_else(|| "missing".to_string(), |v| v.to_string()),
                supported: FORMAT_VERSION,
            })
        }
    }
    let workspace: Workspace = serde_json::from_slice(bytes).map_err(|e| PersistError::Schema {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    workspace.check_invariants()?;
    Ok(workspace)
}

/// Feature names reported in `featureUsage`.
pub const FEATURES: [(&str, EventKind); 13] = [
    ("Add Node", EventKind::NodeCreated),
    ("Backward Propagation", EventKind::BackPropagated),
    ("Edit Manually", EventKind::NodeEdited),
    ("Forward Propagation", EventKind::ForwardPropagated),
    ("Generate More", EventKind::GeneratedMore),
    ("Generate Next Node", EventKind::GeneratedNext),
    ("Illustrative Image", EventKind::ImageGenerated),
    ("Incorporate Feedback", EventKind::FeedbackIncorporated),
    ("Regenerate Images", EventKind::ImagesRegenerated),
    ("Revise with AI", EventKind::AiRevised),
    ("Single Update", EventKind::SingleUpdated),
    ("Start Brainstorming", EventKind::Brainstormed),
    ("View Feedback", EventKind::FeedbackGenerated),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub node_counts: BTreeMap<ArtifactKind, usize>,
    pub individual_node_edits: usize,
    pub forward_prop_edits: usize,
    pub nodes_updated_forward: usize,
    pub back_prop_edits: usize,
    pub nodes_updated_backward: usize,
    pub feature_usage: BTreeMap<String, usize>,
}

/// A pure fold over the event log.
///
/// Node counts add `NodeCreated` and subtract `NodeDeleted` per kind.
/// Individual edits count manual edits, AI revisions, incorporated feedback
/// and single-node updates. `Add Node` counts only manually added nodes.
pub fn compute_metrics(events: &[Event]) -> MetricsReport {
    let mut report = MetricsReport {
        node_counts: ArtifactKind::DESIGN_KINDS
            .iter()
            .chain([&ArtifactKind::Context])
            .map(|k| (*k, 0))
            .collect(),
        individual_node_edits: 0,
        forward_prop_edits: 0,
        nodes_updated_forward: 0,
        back_prop_edits: 0,
        nodes_updated_backward: 0,
        feature_usage: FEATURES.iter().map(|(name, _)| (name.to_string(), 0)).collect(),
    };
    for event in events {
        let p = &event.payload;
        match event.kind {
            EventKind::NodeCreated => {
                if let Some(kind) = p.kind {
                    *report.node_counts.entry(kind).or_default() += 1;
                }
            }
            EventKind::NodeDeleted => {
                if let Some(kind) = p.kind {
                    let c = report.node_counts.entry(kind).or_default();
                    *c = c.saturating_sub(1);
                }
            }
            EventKind::NodeEdited | EventKind::AiRevised | EventKind::FeedbackIncorporated | EventKind::SingleUpdated => {
                report.individual_node_edits += 1;
            }
            EventKind::ForwardPropagated => {
                report.forward_prop_edits += 1;
                report.nodes_updated_forward += p.nodes_updated.unwrap_or(0);
            }
            EventKind::BackPropagated => {
                report.back_prop_edits += 1;
                report.nodes_updated_backward += p.nodes_updated.unwrap_or(0);
            }
            _ => {}
        }
        let manual_only = event.kind == EventKind::NodeCreated && p.detail.as_deref() != Some("manual");
        if manual_only {
            continue;
        }
        if let Some((name, _)) = FEATURES.iter().find(|(_, k)| *k == event.kind) {
            *report.feature_usage.entry(name.to_string()).or_default() += 1;
        }
    }
    report
}

fn field_line(out: &mut String, label: &str, value: &str) {
    if !value.trim().is_empty() {
        let _ = writeln!(out, "- **{label}:** {value}");
    }
}

/// Markdown rendering: one section per design kind with a subsection per
/// node; storyboards list captions with their image references.
pub fn export_markdown(workspace: &Workspace) -> String {
    let mut out = format!("# {}\n", workspace.name);
    let nodes: Vec<&ArtifactContent> = workspace.graph.nodes().map(|n| &n.content).collect();
    let contexts: Vec<&str> = nodes
        .iter()
        .filter_map(|c| match c {
            ArtifactContent::Context(c) => Some(c.label.as_str()),
            _ => None,
        })
        .collect();
    if !contexts.is_empty() {
        let _ = write!(out, "\n## Contexts\n\n");
        for label in contexts {
            let _ = writeln!(out, "- {label}");
        }
    }
    for kind in ArtifactKind::DESIGN_KINDS {
        let group: Vec<&&ArtifactContent> = nodes.iter().filter(|c| c.kind() == kind).collect();
        if group.is_empty() {
            continue;
        }
        let heading = kind.plural();
        let _ = write!(out, "\n## {}{}\n", heading[..1].to_uppercase(), &heading[1..]);
        for content in group {
            let title = if content.headline().trim().is_empty() {
                "(untitled)"
            } else {
                content.headline()
            };
            let _ = write!(out, "\n### {title}\n\n");
            match content {
                ArtifactContent::Persona(p) => {
                    field_line(&mut out, "Location", &p.location);
                    field_line(&mut out, "Bio", &p.bio);
                    field_line(&mut out, "Needs", &p.needs);
                    field_line(&mut out, "Challenges", &p.challenges);
                    field_line(&mut out, "Description", &p.description);
                }
                ArtifactContent::Problem(p) => {
                    field_line(&mut out, "Context", &p.context);
                    field_line(&mut out, "Stakeholders", &p.stakeholders);
                    field_line(&mut out, "Objectives", &p.objectives);
                }
                ArtifactContent::Solution(s) => {
                    field_line(&mut out, "Problems addressed", &s.problems_addressed);
                    field_line(&mut out, "Key features", &s.key_features);
                    field_line(&mut out, "Benefits", &s.benefits);
                }
                ArtifactContent::Storyboard(s) => {
                    let _ = writeln!(out, "Style: {}\n", s.style);
                    for (i, f) in s.frames.iter().enumerate() {
                        let caption = if f.caption.trim().is_empty() { "(no caption)" } else { &f.caption };
                        match &f.image {
                            Some(img) => {
                                let _ = writeln!(out, "{}. {caption}  \n   ![frame {}]({img})", i + 1, i + 1);
                            }
                            None => {
                                let _ = writeln!(out, "{}. {caption}  \n   (no image)", i + 1);
                            }
                        }
                    }
                }
                ArtifactContent::Context(_) => {}
            }
            if let Some(img) = content.image() {
                let _ = writeln!(out, "\n![{title}]({img})");
            }
        }
    }
    out
}
