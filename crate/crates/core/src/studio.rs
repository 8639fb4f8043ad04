//! A working session over one workspace. Every mutation goes through here so
//! that it is recorded in the event log.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{ArtifactContent, ArtifactKind, ContextContent, ImageRef, VisualCharacterDescription};
use crate::feedback::{self, FeedbackError, FeedbackQuestion, RevisionInstruction};
use crate::generation::{self, GenerationError, GuidanceMode, Pipeline, StoryboardBuild, StoryboardInputs};
use crate::graph::{ConnectResult, CreatedBy, DesignGraph, Edge, GestureDirection, GraphError, NodeId, Position};
use crate::propagation::{
    self, ChangeSet, Direction, PropagationError, PropagationPlan, PropagationResult,
};
use crate::style::StyleId;
use crate::workspace::{compute_metrics, Clock, EventKind, EventPayload, MetricsReport, Settings, Workspace};

const COLUMN: f64 = 320.0;
const ROW: f64 = 260.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudioError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error("{0}")]
    Precondition(String),
    #[error("no node matches {0:?}")]
    UnknownNode(String),
    #[error("{0:?} matches more than one node")]
    AmbiguousNode(String),
}

impl StudioError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            StudioError::Graph(g) | StudioError::Propagation(PropagationError::Graph(g)) => graph_code(g),
            StudioError::Feedback(FeedbackError::Graph(g)) => graph_code(g),
            StudioError::Generation(g) | StudioError::Feedback(FeedbackError::Generation(g)) => generation_code(g),
            StudioError::Propagation(PropagationError::NoDirtyMark(_)) => "NoDirtyMark",
            StudioError::Propagation(PropagationError::StepFailed { .. }) => "PropagationInterrupted",
            StudioError::Feedback(FeedbackError::QuestionNotFound(_)) => "QuestionNotFound",
            StudioError::Feedback(FeedbackError::AlreadyIncorporated(_)) => "AlreadyIncorporated",
            StudioError::Feedback(FeedbackError::GroupQuestion(_)) => "GroupQuestion",
            StudioError::Feedback(FeedbackError::Empty(_)) | StudioError::Precondition(_) => "Precondition",
            StudioError::UnknownNode(_) => "NotFound",
            StudioError::AmbiguousNode(_) => "AmbiguousNode",
        }
    }

    /// The node the error concerns, when there is one.
    pub fn node_id(&self) -> Option<&NodeId> {
        match self {
            StudioError::Graph(GraphError::NotFound(id))
            | StudioError::Propagation(PropagationError::Graph(GraphError::NotFound(id)))
            | StudioError::Feedback(FeedbackError::Graph(GraphError::NotFound(id)))
            | StudioError::Propagation(PropagationError::NoDirtyMark(id))
            | StudioError::Propagation(PropagationError::StepFailed { node: id, .. }) => Some(id),
            _ => None,
        }
    }
}

fn graph_code(e: &GraphError) -> &'static str {
    match e {
        GraphError::NotFound(_) => "NotFound",
        GraphError::EdgeIllegal { .. } => "EdgeIllegal",
        GraphError::EdgeExists { .. } => "EdgeExists",
        GraphError::EdgeMissing { .. } => "EdgeMissing",
        GraphError::SelfEdge => "SelfEdge",
        GraphError::BadPosition => "BadPosition",
        GraphError::Artifact(_) => "KindMismatch",
        GraphError::Corrupt(_) => "Corrupt",
    }
}

fn generation_code(e: &GenerationError) -> &'static str {
    match e {
        GenerationError::Template(_) => "TemplateError",
        GenerationError::Provider { .. } => "ProviderError",
        GenerationError::Schema(_) => "SchemaViolation",
        GenerationError::Precondition(_) => "Precondition",
        GenerationError::UnknownStyle(_) => "UnknownStyle",
    }
}

fn precondition(message: impl Into<String>) -> StudioError {
    StudioError::Precondition(message.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BrainstormSpec {
    pub target_stage: ArtifactKind,
    pub design_context: String,
    #[serde(default)]
    pub stage_guidance: BTreeMap<ArtifactKind, String>,
    #[serde(default = "default_variations")]
    pub number_of_variations: usize,
}

fn default_variations() -> usize {
    generation::DEFAULT_VARIATIONS
}

impl BrainstormSpec {
    pub fn new(design_context: impl Into<String>, target_stage: ArtifactKind) -> Self {
        BrainstormSpec {
            target_stage,
            design_context: design_context.into(),
            stage_guidance: BTreeMap::new(),
            number_of_variations: generation::DEFAULT_VARIATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Generated {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PropagateOutcome {
    pub plan: PropagationPlan,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<PropagationResult>,
}

/// Resolves a node reference: a full id, a unique id prefix, or `@` followed
/// by an exact name, title or label.
pub fn resolve_node(graph: &DesignGraph, reference: &str) -> Result<NodeId, StudioError> {
    let reference = reference.trim();
    let matches: Vec<&NodeId> = if let Some(title) = reference.strip_prefix('@') {
        graph
            .nodes()
            .filter(|n| n.content.headline() == title)
            .map(|n| &n.id)
            .collect()
    } else {
        let exact = NodeId::new(reference);
        if graph.contains(&exact) {
            return Ok(exact);
        }
        if reference.is_empty() {
            Vec::new()
        } else {
            graph
                .nodes()
                .filter(|n| n.id.as_str().starts_with(reference))
                .map(|n| &n.id)
                .collect()
        }
    };
    match matches.as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(StudioError::UnknownNode(reference.to_string())),
        _ => Err(StudioError::AmbiguousNode(reference.to_string())),
    }
}

pub struct Studio {
    workspace: Workspace,
    pipeline: Pipeline,
    clock: Box<dyn Clock>,
    actor: String,
}

impl Studio {
    pub fn new(workspace: Workspace, pipeline: Pipeline, clock: Box<dyn Clock>) -> Self {
        Studio {
            workspace,
            pipeline,
            clock,
            actor: "local".into(),
        }
    }

    pub fn with_actor(mut self, actor: impl Into<String>) -> Self {
        self.actor = actor.into();
        self
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn into_workspace(self) -> Workspace {
        self.workspace
    }

    pub fn settings_mut(&mut self) -> &mut Settings {
        &mut self.workspace.settings
    }

    pub fn rename(&mut self, name: impl Into<String>) {
        self.workspace.name = name.into();
    }

    pub fn graph(&self) -> &DesignGraph {
        &self.workspace.graph
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn resolve(&self, reference: &str) -> Result<NodeId, StudioError> {
        resolve_node(&self.workspace.graph, reference)
    }

    pub fn metrics(&self) -> MetricsReport {
        compute_metrics(&self.workspace.events)
    }

    fn log(&mut self, kind: EventKind, payload: EventPayload) {
        let clock = &*self.clock;
        self.workspace.record(clock, &self.actor, kind, payload);
    }

    fn create(&mut self, content: ArtifactContent, position: Position, created_by: CreatedBy) -> Result<NodeId, StudioError> {
        let kind = content.kind();
        let id = self.workspace.graph.add_node(content, position, created_by)?;
        let detail = match created_by {
            CreatedBy::Manual => "manual",
            CreatedBy::Generated => "generated",
        };
        self.log(
            EventKind::NodeCreated,
            EventPayload {
                node_ids: vec![id.clone()],
                kind: Some(kind),
                detail: Some(detail.into()),
                ..Default::default()
            },
        );
        Ok(id)
    }

    fn link(&mut self, upstream: &NodeId, downstream: &NodeId) -> Result<Edge, StudioError> {
        let result = self.workspace.graph.connect(upstream, downstream)?;
        Ok(result.edge)
    }

    fn contents(&self, ids: &[NodeId]) -> Result<Vec<ArtifactContent>, StudioError> {
        ids.iter()
            .map(|id| Ok(self.workspace.graph.node(id)?.content.clone()))
            .collect()
    }

    fn position_of(&self, id: &NodeId) -> Position {
        self.workspace.graph.node(id).map_or(Position::ORIGIN, |n| n.position)
    }

    /// First free x position to the right of every node of `kind`.
    fn next_free_x(&self, kind: ArtifactKind, fallback: f64) -> f64 {
        self.workspace
            .graph
            .nodes()
            .filter(|n| n.kind() == kind)
            .map(|n| n.position.x + COLUMN)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
            .unwrap_or(fallback)
    }

    fn row_y(kind: ArtifactKind) -> f64 {
        kind.stage().map_or(-ROW, |s| s as f64 * ROW)
    }

    pub fn add_node(&mut self, content: ArtifactContent, position: Position) -> Result<NodeId, StudioError> {
        self.create(content, position, CreatedBy::Manual)
    }

    /// A manual edit. Unchanged content records nothing.
    pub fn edit_node(&mut self, id: &NodeId, content: ArtifactContent) -> Result<ChangeSet, StudioError> {
        let change = propagation::apply_update(&mut self.workspace.graph, id, content, propagation::Trigger::ManualEdit)?;
        if !change.diff.is_empty() {
            self.log(
                EventKind::NodeEdited,
                EventPayload {
                    node_ids: vec![id.clone()],
                    count: Some(change.diff.len()),
                    ..Default::default()
                },
            );
        }
        Ok(change)
    }

    /// Removes a node together with its feedback and description.
    pub fn delete_node(&mut self, id: &NodeId) -> Result<(), StudioError> {
        let node = self.workspace.graph.remove_node(id)?;
        self.workspace.descriptions.remove(id);
        self.workspace.feedback.remove(id);
        for questions in self.workspace.feedback.values_mut() {
            questions.retain(|q| !q.targets.contains(id));
        }
        self.workspace.feedback.retain(|_, qs| !qs.is_empty());
        self.log(
            EventKind::NodeDeleted,
            EventPayload {
                node_ids: vec![id.clone()],
                kind: Some(node.kind()),
                ..Default::default()
            },
        );
        Ok(())
    }

    pub fn move_node(&mut self, id: &NodeId, position: Position) -> Result<(), StudioError> {
        self.workspace.graph.move_node(id, position)?;
        self.log(
            EventKind::NodeMoved,
            EventPayload {
                node_ids: vec![id.clone()],
                ..Default::default()
            },
        );
        Ok(())
    }

    /// Connects two nodes and places the suggested mark on the gesture target.
    pub fn connect(&mut self, from: &NodeId, to: &NodeId) -> Result<ConnectResult, StudioError> {
        let result = self.workspace.graph.connect(from, to)?;
        if let Some((target, mark)) = &result.suggested_mark {
            self.workspace.graph.set_mark(target, mark.clone())?;
        }
        let detail = match result.gesture_direction {
            GestureDirection::Forward => "forward",
            GestureDirection::Backward => "backward",
        };
        self.log(
            EventKind::Connected,
            EventPayload {
                node_ids: vec![result.edge.upstream.clone(), result.edge.downstream.clone()],
                detail: Some(detail.into()),
                ..Default::default()
            },
        );
        Ok(result)
    }

    pub fn disconnect(&mut self, a: &NodeId, b: &NodeId) -> Result<Edge, StudioError> {
        let edge = self.workspace.graph.disconnect(a, b)?;
        self.log(
            EventKind::Disconnected,
            EventPayload {
                node_ids: vec![edge.upstream.clone(), edge.downstream.clone()],
                ..Default::default()
            },
        );
        Ok(edge)
    }

    /// A context node plus parallel one-to-one chains up to the target stage.
    /// Nodes created before a failure stay in the graph.
    pub fn brainstorm(&mut self, spec: &BrainstormSpec) -> Result<Generated, StudioError> {
        if spec.target_stage.stage().is_none() {
            return Err(precondition("brainstorm target must be a design stage"));
        }
        if spec.number_of_variations == 0 {
            return Err(precondition("number of variations must be at least 1"));
        }
        let mut out = Generated {
            nodes: Vec::new(),
            edges: Vec::new(),
        };
        let result = self.brainstorm_into(spec, &mut out);
        self.log(
            EventKind::Brainstormed,
            EventPayload {
                node_ids: out.nodes.clone(),
                kind: Some(spec.target_stage),
                count: Some(out.nodes.len()),
                detail: result.as_ref().err().map(|_| "interrupted".to_string()),
                ..Default::default()
            },
        );
        result.map(|_| out)
    }

    fn brainstorm_into(&mut self, spec: &BrainstormSpec, out: &mut Generated) -> Result<(), StudioError> {
        let n = spec.number_of_variations;
        let x0 = self.next_free_x(ArtifactKind::Persona, 0.0);
        let guidance = |kind: ArtifactKind| spec.stage_guidance.get(&kind).map(String::as_str);
        let context_id = self.create(
            ArtifactContent::Context(ContextContent {
                label: spec.design_context.clone(),
            }),
            Position::new(x0, Self::row_y(ArtifactKind::Context)),
            CreatedBy::Generated,
        )?;
        out.nodes.push(context_id);

        let design = format!("Design context: {}", spec.design_context);
        let personas = self
            .pipeline
            .generate_personas(&generation::with_guidance(design.clone(), guidance(ArtifactKind::Persona)), n)?;
        let mut previous = Vec::new();
        for (i, content) in personas.into_iter().enumerate() {
            let id = self.create(
                content,
                Position::new(x0 + i as f64 * COLUMN, Self::row_y(ArtifactKind::Persona)),
                CreatedBy::Generated,
            )?;
            out.nodes.push(id.clone());
            previous.push(id);
        }

        let last_idea_stage = spec.target_stage.min(ArtifactKind::Solution);
        let mut kind = ArtifactKind::Problem;
        while kind <= last_idea_stage {
            let prev_contents = self.contents(&previous)?;
            let refs: Vec<&ArtifactContent> = prev_contents.iter().collect();
            let prev_kind = prev_contents[0].kind();
            let context = format!(
                "{design}\n\n{}\n\nCreate exactly one {} for each of the {} above, in the same order.",
                generation::sections(&refs),
                kind.as_str(),
                prev_kind.plural()
            );
            let generated = self
                .pipeline
                .generate_ideas(kind, &generation::with_guidance(context, guidance(kind)), n)?;
            let mut current = Vec::new();
            for (i, content) in generated.into_iter().enumerate() {
                let id = self.create(
                    content,
                    Position::new(x0 + i as f64 * COLUMN, Self::row_y(kind)),
                    CreatedBy::Generated,
                )?;
                out.nodes.push(id.clone());
                out.edges.push(self.link(&previous[i], &id)?);
                current.push(id);
            }
            previous = current;
            kind = match kind.next() {
                Some(k) => k,
                None => break,
            };
        }

        if spec.target_stage == ArtifactKind::Storyboard {
            let first_solution = previous[0].clone();
            let mut chain = vec![first_solution.clone()];
            chain.extend(self.workspace.graph.upstream_closure(&first_solution)?);
            let contents = self.contents(&chain)?;
            let mut inputs = StoryboardInputs::from_contents(&contents);
            inputs.guidance = guidance(ArtifactKind::Storyboard).map(str::to_string);
            let descriptions = self.lineage(&first_solution)?;
            let style = self.workspace.settings.style.clone();
            let build = self.pipeline.build_storyboard(&inputs, &descriptions, &style)?;
            let id = self.create(
                ArtifactContent::Storyboard(build.content),
                Position::new(x0, Self::row_y(ArtifactKind::Storyboard)),
                CreatedBy::Generated,
            )?;
            out.nodes.push(id.clone());
            out.edges.push(self.link(&first_solution, &id)?);
        }
        Ok(())
    }

    fn lineage(&self, id: &NodeId) -> Result<Vec<VisualCharacterDescription>, StudioError> {
        Ok(propagation::lineage_descriptions(
            &self.workspace.graph,
            &self.workspace.descriptions,
            id,
        )?)
    }

    fn lineage_of_all(&self, ids: &[NodeId]) -> Result<Vec<VisualCharacterDescription>, StudioError> {
        let mut out: Vec<VisualCharacterDescription> = Vec::new();
        for id in ids {
            for d in self.lineage(id)? {
                if !out.iter().any(|o| o.character_name == d.character_name) {
                    out.push(d);
                }
            }
        }
        Ok(out)
    }

    /// Selected nodes followed by their upstream closures, without repeats.
    fn with_ancestors(&self, ids: &[NodeId]) -> Result<Vec<NodeId>, StudioError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for id in ids {
            let mut all = vec![id.clone()];
            all.extend(self.workspace.graph.upstream_closure(id)?);
            for n in all {
                if seen.insert(n.clone()) {
                    out.push(n);
                }
            }
        }
        Ok(out)
    }

    /// Variations of the selection. New nodes inherit the union of the
    /// selection's upstream edges.
    pub fn generate_more(&mut self, ids: &[NodeId], guidance: Option<&str>, n: usize) -> Result<Generated, StudioError> {
        let contents = self.contents(ids)?;
        let refs: Vec<&ArtifactContent> = contents.iter().collect();
        let generated = self.pipeline.generate_more(&refs, guidance, n)?;
        let kind = contents[0].kind();
        let mut parents = BTreeSet::new();
        for id in ids {
            parents.extend(self.workspace.graph.upstream_neighbors(id)?);
        }
        let y = ids.iter().map(|id| self.position_of(id).y).fold(f64::MIN, f64::max);
        let x0 = self.next_free_x(kind, 0.0);
        let mut out = Generated {
            nodes: Vec::new(),
            edges: Vec::new(),
        };
        for (i, content) in generated.into_iter().enumerate() {
            let id = self.create(content, Position::new(x0 + i as f64 * COLUMN, y), CreatedBy::Generated)?;
            for parent in &parents {
                out.edges.push(self.link(parent, &id)?);
            }
            out.nodes.push(id);
        }
        self.log(
            EventKind::GeneratedMore,
            EventPayload {
                node_ids: out.nodes.clone(),
                kind: Some(kind),
                count: Some(out.nodes.len()),
                detail: guidance.map(str::to_string),
                ..Default::default()
            },
        );
        Ok(out)
    }

    /// `n` nodes of the next stage, each connected from every selected node.
    pub fn generate_next(&mut self, ids: &[NodeId], guidance: Option<&str>, n: usize) -> Result<Generated, StudioError> {
        let selected = self.contents(ids)?;
        let refs: Vec<&ArtifactContent> = selected.iter().collect();
        let target = generation::next_kind(&refs)?;
        let style = self.workspace.settings.style.clone();
        let generated = if target == ArtifactKind::Storyboard {
            let all = self.contents(&self.with_ancestors(ids)?)?;
            let all_refs: Vec<&ArtifactContent> = all.iter().collect();
            let descriptions = self.lineage_of_all(ids)?;
            self.pipeline.next_contents(&all_refs, guidance, n, &descriptions, &style)?
        } else {
            self.pipeline.next_contents(&refs, guidance, n, &[], &style)?
        };
        let x_start = ids.iter().map(|id| self.position_of(id).x).fold(f64::MAX, f64::min);
        let x0 = self.next_free_x(target, x_start).max(x_start);
        let mut out = Generated {
            nodes: Vec::new(),
            edges: Vec::new(),
        };
        for (i, content) in generated.into_iter().enumerate() {
            let id = self.create(
                content,
                Position::new(x0 + i as f64 * COLUMN, Self::row_y(target)),
                CreatedBy::Generated,
            )?;
            for parent in ids {
                out.edges.push(self.link(parent, &id)?);
            }
            out.nodes.push(id);
        }
        self.log(
            EventKind::GeneratedNext,
            EventPayload {
                node_ids: out.nodes.clone(),
                kind: Some(target),
                count: Some(out.nodes.len()),
                detail: guidance.map(str::to_string),
                ..Default::default()
            },
        );
        Ok(out)
    }

    /// Builds one storyboard from the selection (which must include a
    /// solution) and its ancestors, linked from each selected node.
    pub fn build_storyboard(&mut self, ids: &[NodeId], guidance: Option<&str>) -> Result<(NodeId, StoryboardBuild), StudioError> {
        let selected = self.contents(ids)?;
        if !selected.iter().any(|c| c.kind() == ArtifactKind::Solution) {
            return Err(precondition("a storyboard needs at least one solution"));
        }
        if let Some(bad) = selected.iter().find(|c| c.kind().stage().is_none() || c.kind() == ArtifactKind::Storyboard) {
            return Err(precondition(format!("{} nodes cannot feed a storyboard", bad.kind())));
        }
        let all = self.contents(&self.with_ancestors(ids)?)?;
        let mut inputs = StoryboardInputs::from_contents(&all);
        inputs.guidance = guidance.map(str::to_string);
        let descriptions = self.lineage_of_all(ids)?;
        let style = self.workspace.settings.style.clone();
        let build = self.pipeline.build_storyboard(&inputs, &descriptions, &style)?;
        let x_start = ids.iter().map(|id| self.position_of(id).x).fold(f64::MAX, f64::min);
        let x = self.next_free_x(ArtifactKind::Storyboard, x_start).max(x_start);
        let id = self.create(
            ArtifactContent::Storyboard(build.content.clone()),
            Position::new(x, Self::row_y(ArtifactKind::Storyboard)),
            CreatedBy::Generated,
        )?;
        for parent in ids {
            self.link(parent, &id)?;
        }
        self.log(
            EventKind::StoryboardBuilt,
            EventPayload {
                node_ids: vec![id.clone()],
                count: Some(build.content.frames.len()),
                detail: (!build.failed_frames.is_empty()).then(|| format!("failed frames {:?}", build.failed_frames)),
                ..Default::default()
            },
        );
        Ok((id, build))
    }

    fn storyboard(&self, id: &NodeId) -> Result<crate::artifact::StoryboardContent, StudioError> {
        match &self.workspace.graph.node(id)?.content {
            ArtifactContent::Storyboard(s) => Ok(s.clone()),
            other => Err(precondition(format!("{} is a {} node, not a storyboard", id, other.kind()))),
        }
    }

    pub fn regenerate_images(&mut self, id: &NodeId, style: &StyleId) -> Result<StoryboardBuild, StudioError> {
        let board = self.storyboard(id)?;
        let build = self.pipeline.regenerate_images(&board, style)?;
        self.workspace
            .graph
            .replace_content(id, ArtifactContent::Storyboard(build.content.clone()))?;
        self.log(
            EventKind::ImagesRegenerated,
            EventPayload {
                node_ids: vec![id.clone()],
                count: Some(build.content.frames.len() - build.failed_frames.len()),
                detail: Some(style.to_string()),
                ..Default::default()
            },
        );
        Ok(build)
    }

    pub fn regenerate_frame_image(&mut self, id: &NodeId, frame: usize) -> Result<ImageRef, StudioError> {
        let board = self.storyboard(id)?;
        let updated = self.pipeline.regenerate_frame_image(&board, frame)?;
        let image = updated.frames[frame].image.clone().expect("image was just generated");
        self.workspace.graph.replace_content(id, ArtifactContent::Storyboard(updated))?;
        self.log(
            EventKind::ImagesRegenerated,
            EventPayload {
                node_ids: vec![id.clone()],
                count: Some(1),
                detail: Some(format!("frame {frame}")),
                ..Default::default()
            },
        );
        Ok(image)
    }

    /// An illustrative image for a persona, problem or solution. Reuses
    /// character descriptions already stored on the lineage.
    pub fn illustrate(&mut self, id: &NodeId) -> Result<ImageRef, StudioError> {
        let mut content = self.workspace.graph.node(id)?.content.clone();
        let descriptions = self.lineage(id)?;
        let style = self.workspace.settings.style.clone();
        let image = self.pipeline.illustrative_image(&content, &descriptions, &style)?;
        content.set_image(Some(image.clone()));
        self.workspace.graph.replace_content(id, content)?;
        self.log(
            EventKind::ImageGenerated,
            EventPayload {
                node_ids: vec![id.clone()],
                ..Default::default()
            },
        );
        Ok(image)
    }

    /// Creates missing character descriptions for the personas in a node's
    /// lineage (or for the node itself when the lineage has no persona).
    pub fn describe_characters(&mut self, id: &NodeId) -> Result<Vec<VisualCharacterDescription>, StudioError> {
        let mut lineage = vec![id.clone()];
        lineage.extend(self.workspace.graph.upstream_closure(id)?);
        let mut subjects: Vec<NodeId> = lineage
            .iter()
            .filter(|n| self.workspace.graph.node(n).is_ok_and(|n| n.kind() == ArtifactKind::Persona))
            .cloned()
            .collect();
        if subjects.is_empty() {
            let kind = self.workspace.graph.node(id)?.kind();
            if matches!(kind, ArtifactKind::Problem | ArtifactKind::Solution) {
                subjects.push(id.clone());
            }
        }
        for subject in subjects {
            if self.workspace.descriptions.contains_key(&subject) {
                continue;
            }
            let content = self.workspace.graph.node(&subject)?.content.clone();
            let description = self.pipeline.visual_character_description(&content)?;
            self.workspace.descriptions.insert(subject.clone(), description);
            self.log(
                EventKind::CharacterDescribed,
                EventPayload {
                    node_ids: vec![subject],
                    ..Default::default()
                },
            );
        }
        self.lineage(id)
    }

    pub fn generate_feedback(&mut self, ids: &[NodeId]) -> Result<Vec<FeedbackQuestion>, StudioError> {
        let questions = feedback::generate_feedback(
            &self.workspace.graph,
            &self.pipeline,
            &mut self.workspace.feedback,
            ids,
        )?;
        self.log(
            EventKind::FeedbackGenerated,
            EventPayload {
                node_ids: ids.to_vec(),
                count: Some(questions.len()),
                ..Default::default()
            },
        );
        Ok(questions)
    }

    /// Stored questions that involve `id`.
    pub fn feedback_for(&self, id: &NodeId) -> Vec<FeedbackQuestion> {
        self.workspace
            .feedback
            .values()
            .flatten()
            .filter(|q| q.targets.contains(id))
            .cloned()
            .collect()
    }

    pub fn incorporate_feedback(&mut self, question_id: &str, response: &str) -> Result<ChangeSet, StudioError> {
        let change = feedback::incorporate_feedback(
            &mut self.workspace.graph,
            &self.pipeline,
            &mut self.workspace.feedback,
            &self.workspace.descriptions,
            question_id,
            response,
        )?;
        self.log(
            EventKind::FeedbackIncorporated,
            EventPayload {
                node_ids: vec![change.changed_node.clone()],
                count: Some(change.diff.len()),
                detail: Some(question_id.to_string()),
                ..Default::default()
            },
        );
        Ok(change)
    }

    pub fn suggest_revisions(&self, id: &NodeId) -> Result<Vec<RevisionInstruction>, StudioError> {
        Ok(feedback::suggest_revisions(&self.workspace.graph, &self.pipeline, id)?)
    }

    pub fn revise(&mut self, id: &NodeId, instruction: &RevisionInstruction) -> Result<ChangeSet, StudioError> {
        let change = feedback::revise_with_ai(
            &mut self.workspace.graph,
            &self.pipeline,
            &self.workspace.descriptions,
            id,
            instruction,
        )?;
        self.log(
            EventKind::AiRevised,
            EventPayload {
                node_ids: vec![id.clone()],
                count: Some(change.diff.len()),
                detail: Some(instruction.text.clone()),
                ..Default::default()
            },
        );
        Ok(change)
    }

    pub fn guidance_suggestions(&self, ids: &[NodeId], mode: GuidanceMode) -> Result<Vec<String>, StudioError> {
        let contents = self.contents(ids)?;
        let refs: Vec<&ArtifactContent> = contents.iter().collect();
        Ok(self.pipeline.guidance_suggestions(&refs, mode)?)
    }

    pub fn plan(&self, origin: &NodeId, direction: Direction) -> Result<PropagationPlan, StudioError> {
        Ok(propagation::build_plan(&self.workspace.graph, origin, direction)?)
    }

    /// Forward, backward or single-step propagation from `origin`. A dry run
    /// only returns the plan.
    pub fn propagate(&mut self, origin: &NodeId, direction: Direction, dry_run: bool) -> Result<PropagateOutcome, StudioError> {
        if direction == Direction::SingleStep && self.workspace.graph.node(origin)?.dirty.is_none() {
            return Err(PropagationError::NoDirtyMark(origin.clone()).into());
        }
        let plan = self.plan(origin, direction)?;
        if dry_run {
            return Ok(PropagateOutcome { plan, result: None });
        }
        let result = self.run_plan(&plan)?;
        Ok(PropagateOutcome {
            plan,
            result: Some(result),
        })
    }

    /// Executes whatever part of an interrupted propagation is still pending.
    pub fn resume(&mut self, origin: &NodeId, direction: Direction) -> Result<PropagateOutcome, StudioError> {
        let plan = propagation::pending_plan(&self.workspace.graph, origin, direction)?;
        let result = self.run_plan(&plan)?;
        Ok(PropagateOutcome {
            plan,
            result: Some(result),
        })
    }

    pub fn update_single(&mut self, id: &NodeId) -> Result<PropagationResult, StudioError> {
        let outcome = self.propagate(id, Direction::SingleStep, false)?;
        Ok(outcome.result.unwrap_or_default())
    }

    fn run_plan(&mut self, plan: &PropagationPlan) -> Result<PropagationResult, StudioError> {
        let outcome = propagation::execute_plan(
            &mut self.workspace.graph,
            &self.pipeline,
            &self.workspace.descriptions,
            plan,
        );
        let (updated, detail) = match &outcome {
            Ok(r) => (r.updated_nodes.clone(), None),
            Err(PropagationError::StepFailed { partial, step, .. }) => {
                (partial.updated_nodes.clone(), Some(format!("interrupted at step {step}")))
            }
            Err(_) => (Vec::new(), Some("not started".to_string())),
        };
        if plan.direction != Direction::SingleStep {
            for u in &updated {
                self.log(
                    EventKind::NodeRegenerated,
                    EventPayload {
                        node_ids: vec![u.node_id.clone()],
                        origin: Some(plan.origin.clone()),
                        count: Some(u.diff.len()),
                        ..Default::default()
                    },
                );
            }
        }
        let kind = match plan.direction {
            Direction::Forward => EventKind::ForwardPropagated,
            Direction::Backward => EventKind::BackPropagated,
            Direction::SingleStep => EventKind::SingleUpdated,
        };
        self.log(
            kind,
            EventPayload {
                node_ids: updated.iter().map(|u| u.node_id.clone()).collect(),
                origin: Some(plan.origin.clone()),
                nodes_updated: Some(updated.len()),
                detail,
                ..Default::default()
            },
        );
        Ok(outcome?)
    }
}
