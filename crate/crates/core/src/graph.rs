//! The design graph: nodes, canonical upstream→downstream edges and dirty
//! marks.
//!
//! Edges only ever point from an earlier design stage to a later one, so the
//! graph is acyclic by construction and sorting by stage is a valid
//! topological order. Ties are broken by node creation sequence.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{ArtifactContent, ArtifactError, ArtifactKind};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// UUID-shaped id derived from a seed and a sequence number, so that seeded
/// sessions produce identical ids.
pub(crate) fn seeded_uuid(seed: u64, seq: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(seq);
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    uuid::Builder::from_random_bytes(bytes).into_uuid().hyphenated().to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CreatedBy {
    Manual,
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MarkKind {
    Update,
    ForwardProp,
    BackProp,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DirtyMark {
    pub kind: MarkKind,
    pub cause: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Node {
    pub id: NodeId,
    pub content: ArtifactContent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirty: Option<DirtyMark>,
    pub position: Position,
    pub created_by: CreatedBy,
    /// Creation sequence number, used for deterministic ordering.
    pub seq: u64,
}

impl Node {
    pub fn kind(&self) -> ArtifactKind {
        self.content.kind()
    }

    fn order_key(&self) -> (u8, u64) {
        (self.kind().stage().unwrap_or(u8::MAX), self.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub upstream: NodeId,
    pub downstream: NodeId,
}

/// Whether `upstream → downstream` is a legal canonical edge.
pub fn edge_allowed(upstream: ArtifactKind, downstream: ArtifactKind) -> bool {
    use ArtifactKind::*;
    matches!(
        (upstream, downstream),
        (Persona, Problem) | (Problem, Solution) | (Solution, Storyboard) | (Persona, Storyboard) | (Problem, Storyboard)
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GestureDirection {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConnectResult {
    pub edge: Edge,
    pub gesture_direction: GestureDirection,
    /// Mark to place on the gesture's target node.
    pub suggested_mark: Option<(NodeId, DirtyMark)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node {0} not found")]
    NotFound(NodeId),
    #[error("cannot connect {from} to {to}")]
    EdgeIllegal { from: ArtifactKind, to: ArtifactKind },
    #[error("edge {upstream} -> {downstream} already exists")]
    EdgeExists { upstream: NodeId, downstream: NodeId },
    #[error("edge {upstream} -> {downstream} does not exist")]
    EdgeMissing { upstream: NodeId, downstream: NodeId },
    #[error("a node cannot connect to itself")]
    SelfEdge,
    #[error("position must be finite")]
    BadPosition,
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("graph is inconsistent: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DesignGraph {
    id_seed: u64,
    next_seq: u64,
    nodes: IndexMap<NodeId, Node>,
    edges: BTreeSet<Edge>,
}

impl Default for DesignGraph {
    fn default() -> Self {
        DesignGraph::with_seed(0)
    }
}

impl DesignGraph {
    pub fn with_seed(id_seed: u64) -> Self {
        DesignGraph {
            id_seed,
            next_seq: 0,
            nodes: IndexMap::new(),
            edges: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in creation order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn has_edge(&self, upstream: &NodeId, downstream: &NodeId) -> bool {
        self.edges.contains(&Edge {
            upstream: upstream.clone(),
            downstream: downstream.clone(),
        })
    }

    pub fn node(&self, id: &NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(id).ok_or_else(|| GraphError::NotFound(id.clone()))
    }

    fn node_mut(&mut self, id: &NodeId) -> Result<&mut Node, GraphError> {
        self.nodes.get_mut(id).ok_or_else(|| GraphError::NotFound(id.clone()))
    }

    pub fn add_node(
        &mut self,
        content: ArtifactContent,
        position: Position,
        created_by: CreatedBy,
    ) -> Result<NodeId, GraphError> {
        if let ArtifactContent::Storyboard(s) = &content {
            if s.frames.is_empty() {
                return Err(ArtifactError::NoFrames.into());
            }
        }
        if !position.x.is_finite() || !position.y.is_finite() {
            return Err(GraphError::BadPosition);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let id = NodeId(seeded_uuid(self.id_seed, seq));
        self.nodes.insert(
            id.clone(),
            Node {
                id: id.clone(),
                content,
                dirty: None,
                position,
                created_by,
                seq,
            },
        );
        Ok(id)
    }

    /// Removes a node with its edges and any marks it caused.
    pub fn remove_node(&mut self, id: &NodeId) -> Result<Node, GraphError> {
        let node = self.nodes.shift_remove(id).ok_or_else(|| GraphError::NotFound(id.clone()))?;
        self.edges.retain(|e| &e.upstream != id && &e.downstream != id);
        for other in self.nodes.values_mut() {
            if other.dirty.as_ref().is_some_and(|m| &m.cause == id) {
                other.dirty = None;
            }
        }
        Ok(node)
    }

    /// Replaces a node's content, returning the previous content.
    pub fn replace_content(&mut self, id: &NodeId, content: ArtifactContent) -> Result<ArtifactContent, GraphError> {
        let node = self.node_mut(id)?;
        if node.kind() != content.kind() {
            return Err(ArtifactError::KindMismatch {
                expected: node.kind(),
                actual: content.kind(),
            }
            .into());
        }
        if let ArtifactContent::Storyboard(s) = &content {
            if s.frames.is_empty() {
                return Err(ArtifactError::NoFrames.into());
            }
        }
        Ok(std::mem::replace(&mut node.content, content))
    }

    pub fn move_node(&mut self, id: &NodeId, position: Position) -> Result<(), GraphError> {
        if !position.x.is_finite() || !position.y.is_finite() {
            return Err(GraphError::BadPosition);
        }
        self.node_mut(id)?.position = position;
        Ok(())
    }

    /// Stores the canonical edge for a drag from `from` to `to` in either
    /// direction. The suggested mark is not applied here.
    pub fn connect(&mut self, from: &NodeId, to: &NodeId) -> Result<ConnectResult, GraphError> {
        if from == to {
            return Err(GraphError::SelfEdge);
        }
        let from_kind = self.node(from)?.kind();
        let to_kind = self.node(to)?.kind();
        let (edge, direction) = if edge_allowed(from_kind, to_kind) {
            (
                Edge {
                    upstream: from.clone(),
                    downstream: to.clone(),
                },
                GestureDirection::Forward,
            )
        } else if edge_allowed(to_kind, from_kind) {
            (
                Edge {
                    upstream: to.clone(),
                    downstream: from.clone(),
                },
                GestureDirection::Backward,
            )
        } else {
            return Err(GraphError::EdgeIllegal {
                from: from_kind,
                to: to_kind,
            });
        };
        if self.edges.contains(&edge) {
            return Err(GraphError::EdgeExists {
                upstream: edge.upstream,
                downstream: edge.downstream,
            });
        }
        self.edges.insert(edge.clone());
        let mark_kind = match direction {
            GestureDirection::Forward => MarkKind::ForwardProp,
            GestureDirection::Backward => MarkKind::BackProp,
        };
        Ok(ConnectResult {
            edge,
            gesture_direction: direction,
            suggested_mark: Some((
                to.clone(),
                DirtyMark {
                    kind: mark_kind,
                    cause: from.clone(),
                },
            )),
        })
    }

    /// Removes the edge between two nodes regardless of argument order.
    pub fn disconnect(&mut self, a: &NodeId, b: &NodeId) -> Result<Edge, GraphError> {
        for edge in [
            Edge {
                upstream: a.clone(),
                downstream: b.clone(),
            },
            Edge {
                upstream: b.clone(),
                downstream: a.clone(),
            },
        ] {
            if self.edges.remove(&edge) {
                return Ok(edge);
            }
        }
        Err(GraphError::EdgeMissing {
            upstream: a.clone(),
            downstream: b.clone(),
        })
    }

    fn sorted(&self, ids: impl IntoIterator<Item = NodeId>, descending_stage: bool) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = ids.into_iter().collect();
        ids.sort_by_key(|id| {
            let (stage, seq) = self.nodes[id].order_key();
            let stage = if descending_stage { u8::MAX - stage } else { stage };
            (stage, seq)
        });
        ids
    }

    /// Direct upstream neighbours, stage ascending then creation order.
    pub fn upstream_neighbors(&self, id: &NodeId) -> Result<Vec<NodeId>, GraphError> {
        self.node(id)?;
        let ids = self.edges.iter().filter(|e| &e.downstream == id).map(|e| e.upstream.clone());
        Ok(self.sorted(ids, false))
    }

    /// Direct downstream neighbours, stage ascending then creation order.
    pub fn downstream_neighbors(&self, id: &NodeId) -> Result<Vec<NodeId>, GraphError> {
        self.node(id)?;
        let ids = self.edges.iter().filter(|e| &e.upstream == id).map(|e| e.downstream.clone());
        Ok(self.sorted(ids, false))
    }

    fn reach(&self, start: &NodeId, forward: bool) -> HashSet<NodeId> {
        let mut adjacency: HashMap<&NodeId, Vec<&NodeId>> = HashMap::new();
        for edge in &self.edges {
            let (from, to) = if forward {
                (&edge.upstream, &edge.downstream)
            } else {
                (&edge.downstream, &edge.upstream)
            };
            adjacency.entry(from).or_default().push(to);
        }
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(current) = queue.pop_front() {
            for &next in adjacency.get(current).into_iter().flatten() {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        seen.remove(start);
        seen
    }

    /// Every node reachable downstream of `id`, stage ascending, excluding `id`.
    pub fn downstream_closure(&self, id: &NodeId) -> Result<Vec<NodeId>, GraphError> {
        self.node(id)?;
        Ok(self.sorted(self.reach(id, true), false))
    }

    /// Every node reachable upstream of `id`, stage descending, excluding `id`.
    pub fn upstream_closure(&self, id: &NodeId) -> Result<Vec<NodeId>, GraphError> {
        self.node(id)?;
        Ok(self.sorted(self.reach(id, false), true))
    }

    /// Marks the downstream closure `ForwardProp` and the upstream closure
    /// `BackProp`, replacing older marks. Returns the marks applied.
    pub fn mark_dirty(&mut self, cause: &NodeId) -> Result<Vec<(NodeId, DirtyMark)>, GraphError> {
        let downstream = self.downstream_closure(cause)?;
        let upstream = self.upstream_closure(cause)?;
        let mut applied = Vec::with_capacity(downstream.len() + upstream.len());
        for (ids, kind) in [(downstream, MarkKind::ForwardProp), (upstream, MarkKind::BackProp)] {
            for id in ids {
                let mark = DirtyMark {
                    kind,
                    cause: cause.clone(),
                };
                self.nodes[&id].dirty = Some(mark.clone());
                applied.push((id, mark));
            }
        }
        Ok(applied)
    }

    pub fn set_mark(&mut self, id: &NodeId, mark: DirtyMark) -> Result<(), GraphError> {
        self.node(&mark.cause)?;
        self.node_mut(id)?.dirty = Some(mark);
        Ok(())
    }

    pub fn clear_mark(&mut self, id: &NodeId) -> Result<Option<DirtyMark>, GraphError> {
        Ok(self.node_mut(id)?.dirty.take())
    }

    /// Nodes currently carrying a mark, in creation order.
    pub fn marked(&self) -> Vec<(NodeId, DirtyMark)> {
        self.nodes
            .values()
            .filter_map(|n| n.dirty.clone().map(|m| (n.id.clone(), m)))
            .collect()
    }

    /// Verifies the structural invariants, used after deserialization.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        let mut seqs = HashSet::new();
        for (id, node) in &self.nodes {
            if id != &node.id {
                return Err(GraphError::Corrupt(format!("node key {id} holds node {}", node.id)));
            }
            if node.seq >= self.next_seq || !seqs.insert(node.seq) {
                return Err(GraphError::Corrupt(format!("node {id} has invalid sequence {}", node.seq)));
            }
            if !node.position.x.is_finite() || !node.position.y.is_finite() {
                return Err(GraphError::BadPosition);
            }
            if let ArtifactContent::Storyboard(s) = &node.content {
                if s.frames.is_empty() {
                    return Err(ArtifactError::NoFrames.into());
                }
            }
            if let Some(mark) = &node.dirty {
                if !self.nodes.contains_key(&mark.cause) {
                    return Err(GraphError::Corrupt(format!("mark on {id} names unknown cause {}", mark.cause)));
                }
            }
        }
        for edge in &self.edges {
            let up = self.node(&edge.upstream)?.kind();
            let down = self.node(&edge.downstream)?.kind();
            if !edge_allowed(up, down) {
                return Err(GraphError::EdgeIllegal { from: up, to: down });
            }
        }
        Ok(())
    }
}
