//! Evaluative questions, revision suggestions and AI revision of nodes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{merge_partial, ArtifactContent};
use crate::generation::{GenerationError, Pipeline};
use crate::graph::{DesignGraph, GraphError, NodeId};
use crate::propagation::{apply_update, lineage_descriptions, ChangeSet, DescriptionStore, Trigger};

/// Maximum length, in characters, of an AI-suggested instruction.
pub const SUGGESTION_LIMIT: usize = 100;

pub const FILL_MISSING: &str = "Fill in missing values";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackQuestion {
    pub id: String,
    /// One node, or several for a group question.
    pub targets: Vec<NodeId>,
    pub text: String,
    pub incorporated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
}

impl FeedbackQuestion {
    pub fn is_group(&self) -> bool {
        self.targets.len() > 1
    }
}

/// Questions keyed by their first target.
pub type FeedbackStore = BTreeMap<NodeId, Vec<FeedbackQuestion>>;

pub fn find_question<'a>(store: &'a FeedbackStore, id: &str) -> Option<&'a FeedbackQuestion> {
    store.values().flatten().find(|q| q.id == id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InstructionSource {
    UserTyped,
    AiSuggested,
    FillMissing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RevisionInstruction {
    pub text: String,
    pub source: InstructionSource,
}

impl RevisionInstruction {
    pub fn user(text: impl Into<String>) -> Self {
        RevisionInstruction {
            text: text.into(),
            source: InstructionSource::UserTyped,
        }
    }

    pub fn fill_missing() -> Self {
        RevisionInstruction {
            text: FILL_MISSING.into(),
            source: InstructionSource::FillMissing,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeedbackError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error("feedback question {0} not found")]
    QuestionNotFound(String),
    #[error("feedback question {0} was already incorporated")]
    AlreadyIncorporated(String),
    #[error("group feedback question {0} cannot be incorporated")]
    GroupQuestion(String),
    #[error("{0} must not be empty")]
    Empty(&'static str),
}

/// Asks for questions about one node (kind template) or several (group
/// template) and stores them.
pub fn generate_feedback(
    graph: &DesignGraph,
    pipeline: &Pipeline,
    store: &mut FeedbackStore,
    targets: &[NodeId],
) -> Result<Vec<FeedbackQuestion>, FeedbackError> {
    let first = targets.first().ok_or(FeedbackError::Empty("feedback target list"))?;
    let contents = targets
        .iter()
        .map(|id| graph.node(id).map(|n| &n.content))
        .collect::<Result<Vec<_>, _>>()?;
    let texts = pipeline.feedback_questions(&contents)?;
    let existing = store.get(first).map_or(0, Vec::len);
    let questions: Vec<FeedbackQuestion> = texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| FeedbackQuestion {
            id: format!("{}-q{}", first, existing + i + 1),
            targets: targets.to_vec(),
            text,
            incorporated: false,
            response: None,
        })
        .collect();
    store.entry(first.clone()).or_default().extend(questions.iter().cloned());
    Ok(questions)
}

/// Regenerates the question's node with the question and answer as context.
pub fn incorporate_feedback(
    graph: &mut DesignGraph,
    pipeline: &Pipeline,
    store: &mut FeedbackStore,
    descriptions: &DescriptionStore,
    question_id: &str,
    response: &str,
) -> Result<ChangeSet, FeedbackError> {
    let question = find_question(store, question_id)
        .ok_or_else(|| FeedbackError::QuestionNotFound(question_id.to_string()))?
        .clone();
    if question.incorporated {
        return Err(FeedbackError::AlreadyIncorporated(question.id));
    }
    if question.is_group() {
        return Err(FeedbackError::GroupQuestion(question.id));
    }
    if response.trim().is_empty() {
        return Err(FeedbackError::Empty("feedback response"));
    }
    let target = &question.targets[0];
    let current = graph.node(target)?.content.clone();
    let note = format!("Feedback question: {}\nResponse: {}", question.text, response);
    let lineage = lineage_descriptions(graph, descriptions, target)?;
    let revised = pipeline.regenerate_content(&current, &[], Some(&note), &lineage)?;
    let change = apply_update(graph, target, revised, Trigger::FeedbackIncorporated)?;
    if let Some(q) = store.values_mut().flatten().find(|q| q.id == question.id) {
        q.incorporated = true;
        q.response = Some(response.to_string());
    }
    Ok(change)
}

/// Instruction suggestions for a node. Nodes with blank fields get
/// "Fill in missing values" first, even when the model call fails.
pub fn suggest_revisions(
    graph: &DesignGraph,
    pipeline: &Pipeline,
    target: &NodeId,
) -> Result<Vec<RevisionInstruction>, FeedbackError> {
    let content = &graph.node(target)?.content;
    let mut out = Vec::new();
    if content.has_empty_fields() {
        out.push(RevisionInstruction::fill_missing());
    }
    let suggestions = match pipeline.revision_suggestions(&[content]) {
        Ok(s) => s,
        Err(e) if !out.is_empty() => {
            log::warn!("suggestions unavailable: {e}");
            return Ok(out);
        }
        Err(e) => return Err(e.into()),
    };
    for text in suggestions {
        let text = text.trim().to_string();
        if text.is_empty() {
            continue;
        }
        if text.chars().count() > SUGGESTION_LIMIT {
            log::warn!("dropping suggestion longer than {SUGGESTION_LIMIT} characters");
            continue;
        }
        out.push(RevisionInstruction {
            text,
            source: InstructionSource::AiSuggested,
        });
    }
    Ok(out)
}

/// Rewrites a node under an instruction. Fill-missing revisions only ever
/// populate blank fields.
pub fn revise_with_ai(
    graph: &mut DesignGraph,
    pipeline: &Pipeline,
    descriptions: &DescriptionStore,
    target: &NodeId,
    instruction: &RevisionInstruction,
) -> Result<ChangeSet, FeedbackError> {
    if instruction.text.trim().is_empty() {
        return Err(FeedbackError::Empty("instruction"));
    }
    let current = graph.node(target)?.content.clone();
    let lineage = lineage_descriptions(graph, descriptions, target)?;
    let note = format!("Instruction: {}", instruction.text);
    let generated = pipeline.regenerate_content(&current, &[], Some(&note), &lineage)?;
    let revised: ArtifactContent = if instruction.source == InstructionSource::FillMissing {
        merge_partial(&current, &generated).map_err(GraphError::from)?
    } else {
        generated
    };
    Ok(apply_update(graph, target, revised, Trigger::AiRevise)?)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use serde_json::json;

    use super::*;
    use crate::artifact::{ArtifactKind, PersonaContent, ProblemContent};
    use crate::graph::{CreatedBy, Position};
    use crate::mock::MockProvider;

    fn setup() -> (Arc<MockProvider>, Pipeline, DesignGraph) {
        let mock = Arc::new(MockProvider::new(2));
        let pipeline = Pipeline::new(mock.clone());
        (mock, pipeline, DesignGraph::default())
    }

    #[test]
    fn incorporation_is_linear() {
        let (_, pipeline, mut g) = setup();
        let id = g
            .add_node(
                ArtifactContent::Problem(ProblemContent {
                    title: "Low Financial Literacy in Young Adults".into(),
                    ..Default::default()
                }),
                Position::ORIGIN,
                CreatedBy::Manual,
            )
            .unwrap();
        let mut store = FeedbackStore::new();
        let qs = generate_feedback(&g, &pipeline, &mut store, std::slice::from_ref(&id)).unwrap();
        let q = qs
            .iter()
            .find(|q| q.text == "Are there specific financial topics that young adults struggle with?")
            .unwrap();
        let descriptions = DescriptionStore::new();
        let cs = incorporate_feedback(&mut g, &pipeline, &mut store, &descriptions, &q.id, "Credit management and debt accumulation").unwrap();
        assert_eq!(cs.trigger, Trigger::FeedbackIncorporated);
        assert_eq!(
            g.node(&id).unwrap().content.headline(),
            "Financial Literacy on Credit Management in Young Adults"
        );
        assert!(matches!(
            incorporate_feedback(&mut g, &pipeline, &mut store, &descriptions, &q.id, "again"),
            Err(FeedbackError::AlreadyIncorporated(_))
        ));
    }

    #[test]
    fn fill_missing_comes_first_and_keeps_fields() {
        let (mock, pipeline, mut g) = setup();
        let id = g
            .add_node(
                ArtifactContent::Persona(PersonaContent {
                    name: "Eco Emily".into(),
                    ..Default::default()
                }),
                Position::ORIGIN,
                CreatedBy::Manual,
            )
            .unwrap();
        let s = suggest_revisions(&g, &pipeline, &id).unwrap();
        assert_eq!(s[0], RevisionInstruction::fill_missing());
        assert!(s.iter().all(|i| i.text.chars().count() <= SUGGESTION_LIMIT));

        mock.fail_text_when("Eco Emily", 1);
        let s = suggest_revisions(&g, &pipeline, &id).unwrap();
        assert_eq!(s, vec![RevisionInstruction::fill_missing()]);

        let cs = revise_with_ai(&mut g, &pipeline, &DescriptionStore::new(), &id, &RevisionInstruction::fill_missing()).unwrap();
        assert_eq!(cs.trigger, Trigger::AiRevise);
        let content = &g.node(&id).unwrap().content;
        assert_eq!(content.headline(), "Eco Emily");
        assert!(!content.has_empty_fields());
    }

    #[test]
    fn long_suggestions_are_dropped() {
        let (mock, pipeline, mut g) = setup();
        let long = "x".repeat(120);
        mock.respond_when("revise_node_recommendations", "", json!({ "suggestions": [long, "Keep it short"] }));
        let id = g
            .add_node(ArtifactContent::empty(ArtifactKind::Context), Position::ORIGIN, CreatedBy::Manual)
            .unwrap();
        g.replace_content(
            &id,
            ArtifactContent::Context(crate::artifact::ContextContent { label: "Theme".into() }),
        )
        .unwrap();
        let s = suggest_revisions(&g, &pipeline, &id).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].text, "Keep it short");
    }

    #[test]
    fn group_questions_are_read_only() {
        let (_, pipeline, mut g) = setup();
        let a = g.add_node(ArtifactContent::empty(ArtifactKind::Persona), Position::ORIGIN, CreatedBy::Manual).unwrap();
        let b = g.add_node(ArtifactContent::empty(ArtifactKind::Problem), Position::ORIGIN, CreatedBy::Manual).unwrap();
        let mut store = FeedbackStore::new();
        let qs = generate_feedback(&g, &pipeline, &mut store, &[a, b]).unwrap();
        assert!(qs[0].is_group());
        let err = incorporate_feedback(&mut g, &pipeline, &mut store, &DescriptionStore::new(), &qs[0].id, "yes").unwrap_err();
        assert!(matches!(err, FeedbackError::GroupQuestion(_)));
    }
}
