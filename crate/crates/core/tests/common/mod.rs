//! Random fixtures and brute-force oracles shared by integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod fidelity;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use storyloom_core::artifact::{
    ArtifactContent, ArtifactKind, ContextContent, ImageRef, PersonaContent, ProblemContent, SolutionContent,
    StoryboardContent, VisualCharacterDescription,
};
use storyloom_core::feedback::FeedbackQuestion;
use storyloom_core::graph::{CreatedBy, DesignGraph, DirtyMark, MarkKind, NodeId, Position};
use storyloom_core::propagation::{self, DescriptionStore, Direction, PropagationError, Trigger};
use storyloom_core::workspace::{Event, EventKind, EventPayload, ProviderMode, Workspace};
use storyloom_core::{MockProvider, Pipeline};

pub const KINDS: [ArtifactKind; 5] = [
    ArtifactKind::Context,
    ArtifactKind::Persona,
    ArtifactKind::Problem,
    ArtifactKind::Solution,
    ArtifactKind::Storyboard,
];

fn rank(kind: ArtifactKind) -> Option<usize> {
    match kind {
        ArtifactKind::Persona => Some(1),
        ArtifactKind::Problem => Some(2),
        ArtifactKind::Solution => Some(3),
        ArtifactKind::Storyboard => Some(4),
        ArtifactKind::Context => None,
    }
}

/// Legal canonical edges: adjacent design stages, or any earlier stage into a
/// storyboard.
pub fn legal(up: ArtifactKind, down: ArtifactKind) -> bool {
    match (rank(up), rank(down)) {
        (Some(a), Some(b)) => a < b && (b == a + 1 || down == ArtifactKind::Storyboard),
        _ => false,
    }
}

pub fn content(kind: ArtifactKind, label: &str) -> ArtifactContent {
    match kind {
        ArtifactKind::Context => ArtifactContent::Context(ContextContent { label: label.into() }),
        ArtifactKind::Persona => ArtifactContent::Persona(PersonaContent {
            name: label.into(),
            location: "Portland".into(),
            bio: format!("{label} cares about sustainable packaging."),
            needs: "Affordable options".into(),
            challenges: "Limited time".into(),
            description: "Shops weekly".into(),
            image: None,
        }),
        ArtifactKind::Problem => ArtifactContent::Problem(ProblemContent {
            title: label.into(),
            context: "Grocery shopping".into(),
            stakeholders: "Shoppers, grocers".into(),
            objectives: "Reduce waste".into(),
            image: None,
        }),
        ArtifactKind::Solution => ArtifactContent::Solution(SolutionContent {
            title: label.into(),
            problems_addressed: "Packaging waste".into(),
            key_features: "Refill stations".into(),
            benefits: "Less plastic".into(),
            image: None,
        }),
        ArtifactKind::Storyboard => ArtifactContent::Storyboard(StoryboardContent {
            title: label.into(),
            ..StoryboardContent::default()
        }),
    }
}

pub struct RandomGraph {
    pub graph: DesignGraph,
    pub ids: Vec<NodeId>,
    pub kinds: Vec<ArtifactKind>,
    /// Canonical edges as index pairs, tracked independently of the graph.
    pub edges: BTreeSet<(usize, usize)>,
}

/// Random nodes and random drag gestures in both directions, checking each
/// gesture's outcome against [`legal`].
pub fn random_graph(rng: &mut impl Rng, max_nodes: usize) -> Result<RandomGraph, String> {
    let n = rng.gen_range(1..=max_nodes);
    let mut graph = DesignGraph::with_seed(rng.gen());
    let mut ids = Vec::with_capacity(n);
    let mut kinds = Vec::with_capacity(n);
    for i in 0..n {
        let kind = *KINDS.choose(rng).unwrap();
        let id = graph
            .add_node(content(kind, &format!("node {i}")), Position::new(i as f64, 0.0), CreatedBy::Manual)
            .map_err(|e| e.to_string())?;
        ids.push(id);
        kinds.push(kind);
    }
    let mut edges = BTreeSet::new();
    let attempts = rng.gen_range(0..=n * 4);
    for _ in 0..attempts {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let result = graph.connect(&ids[a], &ids[b]);
        let expected = if a == b {
            None
        } else if legal(kinds[a], kinds[b]) {
            Some((a, b))
        } else if legal(kinds[b], kinds[a]) {
            Some((b, a))
        } else {
            None
        };
        match (expected, result) {
            (Some(pair), Ok(r)) => {
                if !edges.insert(pair) {
                    return Err(format!("duplicate edge {pair:?} accepted"));
                }
                if r.edge.upstream != ids[pair.0] || r.edge.downstream != ids[pair.1] {
                    return Err(format!("edge {pair:?} stored in the wrong direction"));
                }
            }
            (Some(pair), Err(_)) if edges.contains(&pair) => {}
            (None, Err(_)) => {}
            (expected, result) => {
                return Err(format!("gesture {a}->{b}: expected {expected:?}, got {result:?}"));
            }
        }
    }
    Ok(RandomGraph {
        graph,
        ids,
        kinds,
        edges,
    })
}

/// Transitive closure by Floyd–Warshall over a boolean matrix.
pub fn reachability(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Acyclicity, canonical edge direction, closure duality and closure
/// equality against the brute-force oracle.
pub fn check_graph_laws(g: &RandomGraph) -> Result<(), String> {
    let n = g.ids.len();
    let index: BTreeMap<&NodeId, usize> = g.ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let stored: BTreeSet<(usize, usize)> = g
        .graph
        .edges()
        .map(|e| (index[&e.upstream], index[&e.downstream]))
        .collect();
    if stored != g.edges {
        return Err(format!("stored edges {stored:?} differ from gestures {:?}", g.edges));
    }
    for &(a, b) in &stored {
        if !legal(g.kinds[a], g.kinds[b]) {
            return Err(format!("non-canonical edge {a}->{b}"));
        }
        if stored.contains(&(b, a)) {
            return Err(format!("both directions stored for {a},{b}"));
        }
    }
    let reach = reachability(n, &stored);
    for i in 0..n {
        if reach[i][i] {
            return Err(format!("cycle through node {i}"));
        }
    }
    for i in 0..n {
        let down: BTreeSet<usize> = g
            .graph
            .downstream_closure(&g.ids[i])
            .map_err(|e| e.to_string())?
            .iter()
            .map(|id| index[id])
            .collect();
        let up: BTreeSet<usize> = g
            .graph
            .upstream_closure(&g.ids[i])
            .map_err(|e| e.to_string())?
            .iter()
            .map(|id| index[id])
            .collect();
        let want_down: BTreeSet<usize> = (0..n).filter(|&j| reach[i][j]).collect();
        let want_up: BTreeSet<usize> = (0..n).filter(|&j| reach[j][i]).collect();
        if down != want_down {
            return Err(format!("downstream closure of {i}: {down:?} != {want_down:?}"));
        }
        if up != want_up {
            return Err(format!("upstream closure of {i}: {up:?} != {want_up:?}"));
        }
        for &j in &down {
            let back = g.graph.upstream_closure(&g.ids[j]).map_err(|e| e.to_string())?;
            if !back.contains(&g.ids[i]) {
                return Err(format!("duality fails for {i} -> {j}"));
            }
        }
        let neighbours: BTreeSet<usize> = g
            .graph
            .downstream_neighbors(&g.ids[i])
            .map_err(|e| e.to_string())?
            .iter()
            .map(|id| index[id])
            .collect();
        let want: BTreeSet<usize> = stored.iter().filter(|e| e.0 == i).map(|e| e.1).collect();
        if neighbours != want {
            return Err(format!("downstream neighbours of {i}: {neighbours:?} != {want:?}"));
        }
    }
    g.graph.check_invariants().map_err(|e| e.to_string())
}

/// A layered design graph: 1–3 personas, 1–3 problems, 1–3 solutions and
/// optionally a storyboard. Every non-persona node has at least one parent,
/// so the result mixes chains and diamonds.
pub fn random_design(rng: &mut impl Rng) -> (DesignGraph, Vec<NodeId>) {
    let mut graph = DesignGraph::with_seed(rng.gen());
    let mut layers: Vec<Vec<NodeId>> = Vec::new();
    let mut kinds = vec![ArtifactKind::Persona, ArtifactKind::Problem, ArtifactKind::Solution];
    if rng.gen_bool(0.5) {
        kinds.push(ArtifactKind::Storyboard);
    }
    let mut all = Vec::new();
    for (stage, kind) in kinds.iter().enumerate() {
        let count = if *kind == ArtifactKind::Storyboard { 1 } else { rng.gen_range(1..=3) };
        let mut layer = Vec::new();
        for i in 0..count {
            let label = format!("{} #{stage}.{i}#", kind.as_str());
            let id = graph
                .add_node(content(*kind, &label), Position::new(i as f64, stage as f64), CreatedBy::Manual)
                .unwrap();
            if let Some(prev) = layers.last() {
                let first: &NodeId = prev.choose(rng).unwrap();
                graph.connect(first, &id).unwrap();
                for p in prev {
                    if p != first && rng.gen_bool(0.4) {
                        graph.connect(p, &id).unwrap();
                    }
                }
            }
            layer.push(id.clone());
            all.push(id);
        }
        layers.push(layer);
    }
    (graph, all)
}

fn snapshot(graph: &DesignGraph) -> Vec<(NodeId, ArtifactContent, Option<DirtyMark>)> {
    graph
        .nodes()
        .map(|n| (n.id.clone(), n.content.clone(), n.dirty.clone()))
        .collect()
}

/// Edits a random persona or problem, propagates forward, and checks plan
/// order, mark clearing, and failure-then-resume equivalence.
pub fn check_propagation(seed: u64) -> Result<(), String> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let (mut graph, ids) = random_design(&mut rng);
    let candidates: Vec<&NodeId> = ids
        .iter()
        .filter(|id| {
            matches!(
                graph.node(id).unwrap().kind(),
                ArtifactKind::Persona | ArtifactKind::Problem
            )
        })
        .collect();
    let origin = (*candidates.choose(&mut rng).unwrap()).clone();
    let mut edited = graph.node(&origin).unwrap().content.clone();
    match &mut edited {
        ArtifactContent::Persona(p) => p.bio.push_str(" Involved in a community recycling program."),
        ArtifactContent::Problem(p) => p.objectives.push_str(" Cut single-use plastics."),
        _ => unreachable!(),
    }
    propagation::apply_update(&mut graph, &origin, edited, Trigger::ManualEdit).map_err(|e| e.to_string())?;
    let plan = propagation::build_plan(&graph, &origin, Direction::Forward).map_err(|e| e.to_string())?;

    let position: BTreeMap<&NodeId, usize> = plan.steps.iter().enumerate().map(|(i, s)| (&s.target, i)).collect();
    for edge in graph.edges() {
        if let (Some(a), Some(b)) = (position.get(&edge.upstream), position.get(&edge.downstream)) {
            if a >= b {
                return Err(format!("seed {seed}: plan visits {} before {}", edge.downstream, edge.upstream));
            }
        }
    }
    let closure: BTreeSet<NodeId> = graph.downstream_closure(&origin).unwrap().into_iter().collect();
    let planned: BTreeSet<NodeId> = position.keys().map(|id| (*id).clone()).collect();
    if planned != closure {
        return Err(format!("seed {seed}: plan targets differ from the downstream closure"));
    }

    let descriptions = DescriptionStore::new();
    let mock = Arc::new(MockProvider::new(seed));
    let pipeline = Pipeline::new(mock.clone());
    let mut reference = graph.clone();
    propagation::execute_plan(&mut reference, &pipeline, &descriptions, &plan).map_err(|e| e.to_string())?;
    for id in &closure {
        if let Some(mark) = &reference.node(id).unwrap().dirty {
            if mark.cause == origin {
                return Err(format!("seed {seed}: {id} still marked by the origin"));
            }
        }
    }

    if plan.steps.is_empty() {
        return Ok(());
    }
    let k = rng.gen_range(0..plan.steps.len());
    let needle = graph.node(&plan.steps[k].target).unwrap().content.headline().to_string();
    mock.fail_text_when(needle, 1);
    let mut interrupted = graph.clone();
    match propagation::execute_plan(&mut interrupted, &pipeline, &descriptions, &plan) {
        Err(PropagationError::StepFailed { .. }) => {}
        other => return Err(format!("seed {seed}: expected an interrupted run, got {other:?}")),
    }
    let pending = propagation::pending_plan(&interrupted, &origin, Direction::Forward).map_err(|e| e.to_string())?;
    if pending.steps.is_empty() {
        return Err(format!("seed {seed}: nothing pending after a failure"));
    }
    propagation::resume(&mut interrupted, &pipeline, &descriptions, &origin, Direction::Forward)
        .map_err(|e| e.to_string())?;
    if snapshot(&interrupted) != snapshot(&reference) {
        return Err(format!("seed {seed}: resumed run differs from the unfailed run"));
    }
    if interrupted.marked().iter().any(|(_, m)| m.kind == MarkKind::ForwardProp && m.cause == origin) {
        return Err(format!("seed {seed}: marks left after resume"));
    }
    Ok(())
}

const ALPHABET: &[char] = &[
    'a', 'b', 'z', 'Q', ' ', '0', '9', '"', '\\', '\n', '\t', '{', '}', 'é', 'ß', '中', '🌱', '\u{7f}', '/',
];

pub fn random_text(rng: &mut impl Rng, max: usize) -> String {
    let len = rng.gen_range(0..=max);
    (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

fn random_content(rng: &mut impl Rng, kind: ArtifactKind) -> ArtifactContent {
    let mut c = content(kind, &random_text(rng, 12));
    match &mut c {
        ArtifactContent::Persona(p) => p.bio = random_text(rng, 40),
        ArtifactContent::Problem(p) => p.context = random_text(rng, 40),
        ArtifactContent::Solution(s) => s.benefits = random_text(rng, 40),
        ArtifactContent::Storyboard(b) => {
            let frames = rng.gen_range(4..=8);
            b.frames = (0..frames)
                .map(|i| {
                    let mut f = storyloom_core::artifact::Frame::empty(
                        storyloom_core::artifact::FrameType::NARRATIVE[i.min(3)],
                    );
                    f.caption = random_text(rng, 20);
                    if rng.gen_bool(0.5) {
                        f.image = Some(ImageRef::new(format!("images/frame-{i}.png")).unwrap());
                    }
                    f
                })
                .collect();
        }
        ArtifactContent::Context(_) => {}
    }
    if kind != ArtifactKind::Storyboard && kind != ArtifactKind::Context && rng.gen_bool(0.3) {
        c.set_image(Some(ImageRef::new("https://example.com/a.png").unwrap()));
    }
    c
}

/// A random but internally consistent workspace: graph with marks, feedback
/// questions, character descriptions and a synthetic event log.
pub fn random_workspace(rng: &mut impl Rng) -> Workspace {
    let mut ws = Workspace::new(random_text(rng, 10), if rng.gen_bool(0.5) { Some(rng.gen()) } else { None });
    ws.settings.default_variations = rng.gen_range(1..=6);
    ws.settings.provider_mode = if rng.gen_bool(0.5) { ProviderMode::Mock } else { ProviderMode::Real };
    let n = rng.gen_range(0..=20);
    let mut ids = Vec::new();
    for _ in 0..n {
        let kind = *KINDS.choose(rng).unwrap();
        let pos = Position::new(rng.gen_range(-5000.0..5000.0), rng.gen::<f64>() * 1e3);
        let by = if rng.gen_bool(0.5) { CreatedBy::Manual } else { CreatedBy::Generated };
        let content = random_content(rng, kind);
        ids.push(ws.graph.add_node(content, pos, by).unwrap());
    }
    for _ in 0..n * 2 {
        if n < 2 {
            break;
        }
        let a = ids.choose(rng).unwrap().clone();
        let b = ids.choose(rng).unwrap().clone();
        let _ = ws.graph.connect(&a, &b);
    }
    if n > 0 && rng.gen_bool(0.3) {
        let victim = ids.remove(rng.gen_range(0..ids.len()));
        ws.graph.remove_node(&victim).unwrap();
    }
    for id in &ids {
        if rng.gen_bool(0.2) {
            let _ = ws.graph.mark_dirty(id);
        }
    }
    for id in &ids {
        if rng.gen_bool(0.3) {
            let mut targets = vec![id.clone()];
            if rng.gen_bool(0.3) {
                targets.push(ids.choose(rng).unwrap().clone());
            }
            let count = rng.gen_range(1..=3);
            let questions = (0..count)
                .map(|i| {
                    let incorporated = targets.len() == 1 && rng.gen_bool(0.5);
                    FeedbackQuestion {
                        id: format!("{id}-q{}", i + 1),
                        targets: targets.clone(),
                        text: random_text(rng, 30),
                        incorporated,
                        response: incorporated.then(|| random_text(rng, 20)),
                    }
                })
                .collect();
            ws.feedback.insert(id.clone(), questions);
        }
        if rng.gen_bool(0.2) {
            ws.descriptions.insert(
                id.clone(),
                VisualCharacterDescription {
                    character_name: random_text(rng, 8),
                    description: random_text(rng, 30),
                },
            );
        }
    }
    let events = rng.gen_range(0..=30);
    let mut seq = 0u64;
    let mut ts = rng.gen_range(0..1_000_000u64);
    for _ in 0..events {
        seq += rng.gen_range(1..3);
        ts += rng.gen_range(0..5000);
        let kind = EVENT_KINDS[rng.gen_range(0..EVENT_KINDS.len())];
        let payload = EventPayload {
            node_ids: ids.iter().filter(|_| rng.gen_bool(0.2)).cloned().collect(),
            kind: rng.gen_bool(0.5).then(|| *KINDS.choose(rng).unwrap()),
            origin: if rng.gen_bool(0.3) { ids.choose(rng).cloned() } else { None },
            count: rng.gen_bool(0.5).then(|| rng.gen_range(0..10)),
            nodes_updated: rng.gen_bool(0.5).then(|| rng.gen_range(0..10)),
            detail: rng.gen_bool(0.3).then(|| if rng.gen_bool(0.5) { "manual".into() } else { random_text(rng, 10) }),
        };
        ws.events.push(Event {
            seq,
            timestamp: ts,
            actor: random_text(rng, 6),
            kind,
            payload,
        });
    }
    ws
}

pub const EVENT_KINDS: [EventKind; 20] = [
    EventKind::NodeCreated,
    EventKind::NodeEdited,
    EventKind::NodeDeleted,
    EventKind::NodeMoved,
    EventKind::AiRevised,
    EventKind::FeedbackGenerated,
    EventKind::FeedbackIncorporated,
    EventKind::Connected,
    EventKind::Disconnected,
    EventKind::ForwardPropagated,
    EventKind::BackPropagated,
    EventKind::SingleUpdated,
    EventKind::NodeRegenerated,
    EventKind::Brainstormed,
    EventKind::GeneratedMore,
    EventKind::GeneratedNext,
    EventKind::StoryboardBuilt,
    EventKind::ImagesRegenerated,
    EventKind::ImageGenerated,
    EventKind::CharacterDescribed,
];
