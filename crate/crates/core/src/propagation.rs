//! Change tracking and cascading regeneration.
//!
//! A plan lists the nodes to regenerate in dependency order. Executing it
//! first marks every target as pending (a mark caused by the origin), then
//! regenerates targets stage by stage and clears each mark as its new content
//! is applied. A failure leaves the remaining targets marked, which is what
//! [`resume`] rebuilds from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{diff_content, ArtifactContent, ArtifactKind, FieldDiff, VisualCharacterDescription};
use crate::generation::{GenerationError, Pipeline};
use crate::graph::{DesignGraph, DirtyMark, GraphError, MarkKind, NodeId};

pub type DescriptionStore = BTreeMap<NodeId, VisualCharacterDescription>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    Forward,
    Backward,
    SingleStep,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Direction> {
        match s.trim().to_ascii_lowercase().as_str() {
            "forward" | "fwd" => Some(Direction::Forward),
            "backward" | "back" => Some(Direction::Backward),
            "single" | "singlestep" | "single-step" => Some(Direction::SingleStep),
            _ => None,
        }
    }

    fn mark_kind(self) -> MarkKind {
        match self {
            Direction::Forward => MarkKind::ForwardProp,
            Direction::Backward => MarkKind::BackProp,
            Direction::SingleStep => MarkKind::Update,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Trigger {
    ManualEdit,
    AiRevise,
    FeedbackIncorporated,
    NewConnection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangeSet {
    pub changed_node: NodeId,
    pub diff: FieldDiff,
    pub trigger: Trigger,
    pub marks: Vec<(NodeId, DirtyMark)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanStep {
    pub target: NodeId,
    pub context_nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PropagationPlan {
    pub direction: Direction,
    pub origin: NodeId,
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepUpdate {
    pub node_id: NodeId,
    pub diff: FieldDiff,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PropagationResult {
    pub updated_nodes: Vec<StepUpdate>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node {0} has no dirty mark")]
    NoDirtyMark(NodeId),
    #[error("propagation stopped at step {step} ({node}): {source}")]
    StepFailed {
        step: usize,
        node: NodeId,
        #[source]
        source: Box<GenerationError>,
        /// Steps applied before the failure.
        partial: Box<PropagationResult>,
        /// Steps not applied, starting with the failed one.
        remaining: Box<PropagationPlan>,
    },
}

/// Replaces a node's content and marks its closures. Identical content is a
/// no-op with an empty diff and no marks.
pub fn apply_update(
    graph: &mut DesignGraph,
    id: &NodeId,
    content: ArtifactContent,
    trigger: Trigger,
) -> Result<ChangeSet, GraphError> {
    let old = graph.node(id)?.content.clone();
    let diff = diff_content(&old, &content)?;
    if diff.is_empty() {
        return Ok(ChangeSet {
            changed_node: id.clone(),
            diff,
            trigger,
            marks: Vec::new(),
        });
    }
    graph.replace_content(id, content)?;
    graph.clear_mark(id)?;
    let marks = graph.mark_dirty(id)?;
    Ok(ChangeSet {
        changed_node: id.clone(),
        diff,
        trigger,
        marks,
    })
}

fn regenerable(graph: &DesignGraph, id: &NodeId) -> bool {
    graph.node(id).is_ok_and(|n| n.kind() != ArtifactKind::Context)
}

/// Context nodes for a single-step update, chosen by the node's mark.
fn single_step_context(graph: &DesignGraph, id: &NodeId) -> Result<Vec<NodeId>, GraphError> {
    let node = graph.node(id)?;
    match node.dirty.as_ref().map(|m| m.kind) {
        Some(MarkKind::ForwardProp) => graph.upstream_neighbors(id),
        Some(MarkKind::BackProp) => graph.downstream_neighbors(id),
        _ => {
            let mut all = graph.upstream_neighbors(id)?;
            all.extend(graph.downstream_neighbors(id)?);
            Ok(all)
        }
    }
}

pub fn build_plan(graph: &DesignGraph, origin: &NodeId, direction: Direction) -> Result<PropagationPlan, GraphError> {
    let steps = match direction {
        Direction::Forward => graph
            .downstream_closure(origin)?
            .into_iter()
            .filter(|id| regenerable(graph, id))
            .map(|target| {
                let context_nodes = graph.upstream_neighbors(&target)?;
                Ok(PlanStep { target, context_nodes })
            })
            .collect::<Result<Vec<_>, GraphError>>()?,
        Direction::Backward => graph
            .upstream_closure(origin)?
            .into_iter()
            .filter(|id| regenerable(graph, id))
            .map(|target| {
                let context_nodes = graph.downstream_neighbors(&target)?;
                Ok(PlanStep { target, context_nodes })
            })
            .collect::<Result<Vec<_>, GraphError>>()?,
        Direction::SingleStep => {
            if regenerable(graph, origin) {
                vec![PlanStep {
                    target: origin.clone(),
                    context_nodes: single_step_context(graph, origin)?,
                }]
            } else {
                graph.node(origin)?;
                Vec::new()
            }
        }
    };
    Ok(PropagationPlan {
        direction,
        origin: origin.clone(),
        steps,
    })
}

/// Descriptions stored for `id` and its upstream closure, nearest first.
pub fn lineage_descriptions(
    graph: &DesignGraph,
    store: &DescriptionStore,
    id: &NodeId,
) -> Result<Vec<VisualCharacterDescription>, GraphError> {
    let mut ids = vec![id.clone()];
    ids.extend(graph.upstream_closure(id)?);
    let mut out: Vec<VisualCharacterDescription> = Vec::new();
    for id in ids {
        if let Some(d) = store.get(&id) {
            if !out.iter().any(|o| o.character_name == d.character_name) {
                out.push(d.clone());
            }
        }
    }
    Ok(out)
}

fn regenerate_step(
    graph: &DesignGraph,
    pipeline: &Pipeline,
    descriptions: &DescriptionStore,
    step: &PlanStep,
) -> Result<ArtifactContent, GenerationError> {
    let target = graph
        .node(&step.target)
        .map_err(|e| GenerationError::Precondition(e.to_string()))?;
    let sources = step
        .context_nodes
        .iter()
        .map(|id| graph.node(id).map(|n| &n.content))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| GenerationError::Precondition(e.to_string()))?;
    let lineage = lineage_descriptions(graph, descriptions, &step.target)
        .map_err(|e| GenerationError::Precondition(e.to_string()))?;
    pipeline.regenerate_content(&target.content, &sources, None, &lineage)
}

fn stage_of(graph: &DesignGraph, id: &NodeId) -> Option<u8> {
    graph.node(id).ok().and_then(|n| n.kind().stage())
}

/// Runs a plan. Steps of one stage are generated together (concurrently when
/// the pipeline allows) and applied in plan order.
pub fn execute_plan(
    graph: &mut DesignGraph,
    pipeline: &Pipeline,
    descriptions: &DescriptionStore,
    plan: &PropagationPlan,
) -> Result<PropagationResult, PropagationError> {
    for step in &plan.steps {
        graph.node(&step.target)?;
        for c in &step.context_nodes {
            graph.node(c)?;
        }
    }
    if plan.direction != Direction::SingleStep {
        let kind = plan.direction.mark_kind();
        for step in &plan.steps {
            graph.set_mark(
                &step.target,
                DirtyMark {
                    kind,
                    cause: plan.origin.clone(),
                },
            )?;
        }
    }

    let mut result = PropagationResult::default();
    let mut start = 0;
    while start < plan.steps.len() {
        let stage = stage_of(graph, &plan.steps[start].target);
        let end = plan.steps[start..]
            .iter()
            .position(|s| stage_of(graph, &s.target) != stage)
            .map_or(plan.steps.len(), |p| start + p);
        let group = &plan.steps[start..end];

        let outcomes: Vec<Result<ArtifactContent, GenerationError>> = if pipeline.is_parallel() && group.len() > 1 {
            let shared: &DesignGraph = graph;
            std::thread::scope(|scope| {
                let handles: Vec<_> = group
                    .iter()
                    .map(|step| scope.spawn(move || regenerate_step(shared, pipeline, descriptions, step)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| {
                        h.join()
                            .unwrap_or_else(|_| Err(GenerationError::Precondition("regeneration worker panicked".into())))
                    })
                    .collect()
            })
        } else {
            let mut out = Vec::with_capacity(group.len());
            for step in group {
                let r = regenerate_step(graph, pipeline, descriptions, step);
                let failed = r.is_err();
                out.push(r);
                if failed {
                    break;
                }
            }
            out
        };

        for (offset, outcome) in outcomes.into_iter().enumerate() {
            let index = start + offset;
            let step = &plan.steps[index];
            match outcome {
                Ok(content) => {
                    let old = graph.node(&step.target)?.content.clone();
                    let diff = diff_content(&old, &content).map_err(GraphError::from)?;
                    graph.replace_content(&step.target, content)?;
                    graph.clear_mark(&step.target)?;
                    result.updated_nodes.push(StepUpdate {
                        node_id: step.target.clone(),
                        diff,
                    });
                }
                Err(source) => {
                    return Err(PropagationError::StepFailed {
                        step: index,
                        node: step.target.clone(),
                        source: Box::new(source),
                        partial: Box::new(result),
                        remaining: Box::new(PropagationPlan {
                            direction: plan.direction,
                            origin: plan.origin.clone(),
                            steps: plan.steps[index..].to_vec(),
                        }),
                    });
                }
            }
        }
        start = end;
    }
    Ok(result)
}

/// Regenerates one marked node from the neighbours its mark points at.
/// Other marks are left alone.
pub fn update_single(
    graph: &mut DesignGraph,
    pipeline: &Pipeline,
    descriptions: &DescriptionStore,
    target: &NodeId,
) -> Result<PropagationResult, PropagationError> {
    if graph.node(target)?.dirty.is_none() {
        return Err(PropagationError::NoDirtyMark(target.clone()));
    }
    let plan = build_plan(graph, target, Direction::SingleStep)?;
    execute_plan(graph, pipeline, descriptions, &plan)
}

/// The part of a `direction` plan from `origin` whose targets are still
/// pending, i.e. marked with `origin` as cause.
pub fn pending_plan(graph: &DesignGraph, origin: &NodeId, direction: Direction) -> Result<PropagationPlan, GraphError> {
    let mut plan = build_plan(graph, origin, direction)?;
    plan.steps.retain(|s| {
        graph
            .node(&s.target)
            .is_ok_and(|n| n.dirty.as_ref().is_some_and(|m| &m.cause == origin))
    });
    Ok(plan)
}

/// Finishes an interrupted propagation.
pub fn resume(
    graph: &mut DesignGraph,
    pipeline: &Pipeline,
    descriptions: &DescriptionStore,
    origin: &NodeId,
    direction: Direction,
) -> Result<PropagationResult, PropagationError> {
    let plan = pending_plan(graph, origin, direction)?;
    execute_plan(graph, pipeline, descriptions, &plan)
}
