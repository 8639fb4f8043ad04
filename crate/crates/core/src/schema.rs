//! Response schemas for structured model output and the decoders that turn a
//! raw JSON value into typed content.
//!
//! Every text template names one schema. The schema document is sent to the
//! model through the system prompt; the decoder is the enforcement side.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::artifact::{
    ArtifactContent, ArtifactKind, FrameType, PersonaContent, ProblemContent, SolutionContent,
    VisualCharacterDescription,
};

/// Minimum outline length accepted from the model.
pub const MIN_OUTLINE_FRAMES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SchemaName {
    PersonaList,
    ProblemList,
    SolutionList,
    StoryboardOutline,
    ImagePromptList,
    ImagePrompt,
    CharacterDescription,
    FeedbackList,
    SuggestionList,
}

impl SchemaName {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaName::PersonaList => "personaList",
            SchemaName::ProblemList => "problemList",
            SchemaName::SolutionList => "solutionList",
            SchemaName::StoryboardOutline => "storyboardOutline",
            SchemaName::ImagePromptList => "imagePromptList",
            SchemaName::ImagePrompt => "imagePrompt",
            SchemaName::CharacterDescription => "characterDescription",
            SchemaName::FeedbackList => "feedbackList",
            SchemaName::SuggestionList => "suggestionList",
        }
    }

    /// The list schema for generated ideas of a kind.
    pub fn for_ideas(kind: ArtifactKind) -> Option<SchemaName> {
        match kind {
            ArtifactKind::Persona => Some(SchemaName::PersonaList),
            ArtifactKind::Problem => Some(SchemaName::ProblemList),
            ArtifactKind::Solution => Some(SchemaName::SolutionList),
            _ => None,
        }
    }

    /// JSON Schema document handed to the model.
    pub fn json_schema(self) -> Value {
        fn strings(props: &[&str]) -> Value {
            let mut obj = serde_json::Map::new();
            for p in props {
                obj.insert((*p).to_string(), json!({ "type": "string" }));
            }
            json!({ "type": "object", "properties": obj, "required": props })
        }
        fn list_of(key: &str, item: Value, min: usize) -> Value {
            json!({
                "type": "object",
                "properties": { key: { "type": "array", "items": item, "minItems": min } },
                "required": [key]
            })
        }
        match self {
            SchemaName::PersonaList => list_of(
                "personas",
                strings(&["name", "location", "bio", "needs", "challenges", "description"]),
                1,
            ),
            SchemaName::ProblemList => {
                list_of("problems", strings(&["title", "context", "stakeholders", "objectives"]), 1)
            }
            SchemaName::SolutionList => list_of(
                "solutions",
                strings(&["title", "problemsAddressed", "keyFeatures", "benefits"]),
                1,
            ),
            SchemaName::StoryboardOutline => json!({
                "type": "object",
                "properties": {
                    "title": { "type": "string" },
                    "frames": {
                        "type": "array",
                        "minItems": MIN_OUTLINE_FRAMES,
                        "items": {
                            "type": "object",
                            "properties": {
                                "frameType": { "enum": ["context", "problem", "solution", "resolution"] },
                                "description": { "type": "string" },
                                "caption": { "type": "string" }
                            },
                            "required": ["frameType", "description", "caption"]
                        }
                    }
                },
                "required": ["title", "frames"]
            }),
            SchemaName::ImagePromptList => {
                list_of("frames", strings(&["imagePrompt", "imageNegativePrompt"]), 1)
            }
            SchemaName::ImagePrompt => strings(&["imagePrompt", "imageNegativePrompt"]),
            SchemaName::CharacterDescription => strings(&["characterName", "description"]),
            SchemaName::FeedbackList => list_of("questions", json!({ "type": "string" }), 1),
            SchemaName::SuggestionList => list_of("suggestions", json!({ "type": "string" }), 0),
        }
    }
}

impl fmt::Display for SchemaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model output that does not fit the requested schema. Carries the raw
/// payload for debugging.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("response does not fit schema {schema}: {message}")]
pub struct SchemaViolation {
    pub schema: SchemaName,
    pub message: String,
    pub raw: Value,
}

fn violation(schema: SchemaName, message: impl Into<String>, raw: &Value) -> SchemaViolation {
    SchemaViolation {
        schema,
        message: message.into(),
        raw: raw.clone(),
    }
}

fn parse<T: DeserializeOwned>(schema: SchemaName, raw: &Value) -> Result<T, SchemaViolation> {
    T::deserialize(raw).map_err(|e| violation(schema, e.to_string(), raw))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PersonaDraft {
    name: String,
    location: String,
    bio: String,
    needs: String,
    challenges: String,
    description: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ProblemDraft {
    title: String,
    context: String,
    stakeholders: String,
    objectives: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SolutionDraft {
    title: String,
    problems_addressed: String,
    key_features: String,
    benefits: String,
}

#[derive(Deserialize)]
struct Personas {
    personas: Vec<PersonaDraft>,
}

#[derive(Deserialize)]
struct Problems {
    problems: Vec<ProblemDraft>,
}

#[derive(Deserialize)]
struct Solutions {
    solutions: Vec<SolutionDraft>,
}

/// Decodes a persona/problem/solution list.
pub fn decode_ideas(kind: ArtifactKind, raw: &Value) -> Result<Vec<ArtifactContent>, SchemaViolation> {
    let schema = SchemaName::for_ideas(kind).unwrap_or(SchemaName::PersonaList);
    let items: Vec<ArtifactContent> = match kind {
        ArtifactKind::Persona => parse::<Personas>(schema, raw)?
            .personas
            .into_iter()
            .map(|d| {
                ArtifactContent::Persona(PersonaContent {
                    name: d.name,
                    location: d.location,
                    bio: d.bio,
                    needs: d.needs,
                    challenges: d.challenges,
                    description: d.description,
                    image: None,
                })
            })
            .collect(),
        ArtifactKind::Problem => parse::<Problems>(schema, raw)?
            .problems
            .into_iter()
            .map(|d| {
                ArtifactContent::Problem(ProblemContent {
                    title: d.title,
                    context: d.context,
                    stakeholders: d.stakeholders,
                    objectives: d.objectives,
                    image: None,
                })
            })
            .collect(),
        ArtifactKind::Solution => parse::<Solutions>(schema, raw)?
            .solutions
            .into_iter()
            .map(|d| {
                ArtifactContent::Solution(SolutionContent {
                    title: d.title,
                    problems_addressed: d.problems_addressed,
                    key_features: d.key_features,
                    benefits: d.benefits,
                    image: None,
                })
            })
            .collect(),
        other => return Err(violation(schema, format!("{other} is not an idea kind"), raw)),
    };
    Ok(items)
}

/// Wraps idea contents in their list schema shape (used by mocks and tests).
pub fn encode_ideas(kind: ArtifactKind, items: &[ArtifactContent]) -> Value {
    let key = kind.plural();
    let list: Vec<Value> = items.iter().map(|c| c.for_prompt()).collect();
    json!({ key: list })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutlineFrame {
    pub frame_type: FrameType,
    pub description: String,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outline {
    pub title: String,
    pub frames: Vec<OutlineFrame>,
}

pub fn decode_outline(raw: &Value) -> Result<Outline, SchemaViolation> {
    let schema = SchemaName::StoryboardOutline;
    let outline: Outline = parse(schema, raw)?;
    if outline.frames.len() < MIN_OUTLINE_FRAMES {
        return Err(violation(
            schema,
            format!(
                "outline has {} frames, at least {MIN_OUTLINE_FRAMES} required",
                outline.frames.len()
            ),
            raw,
        ));
    }
    Ok(outline)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImagePrompt {
    pub image_prompt: String,
    pub image_negative_prompt: String,
}

#[derive(Deserialize)]
struct ImagePromptList {
    frames: Vec<ImagePrompt>,
}

/// Decodes one prompt pair per frame; the count must equal `expected`.
pub fn decode_image_prompts(raw: &Value, expected: usize) -> Result<Vec<ImagePrompt>, SchemaViolation> {
    let schema = SchemaName::ImagePromptList;
    let list: ImagePromptList = parse(schema, raw)?;
    if list.frames.len() != expected {
        return Err(violation(
            schema,
            format!("expected {expected} image prompts, got {}", list.frames.len()),
            raw,
        ));
    }
    Ok(list.frames)
}

pub fn decode_image_prompt(raw: &Value) -> Result<ImagePrompt, SchemaViolation> {
    parse(SchemaName::ImagePrompt, raw)
}

pub fn decode_character(raw: &Value) -> Result<VisualCharacterDescription, SchemaViolation> {
    let schema = SchemaName::CharacterDescription;
    let d: VisualCharacterDescription = parse(schema, raw)?;
    if d.character_name.trim().is_empty() {
        return Err(violation(schema, "characterName is empty", raw));
    }
    Ok(d)
}

#[derive(Deserialize)]
struct Questions {
    questions: Vec<String>,
}

#[derive(Deserialize)]
struct Suggestions {
    suggestions: Vec<String>,
}

pub fn decode_questions(raw: &Value) -> Result<Vec<String>, SchemaViolation> {
    let schema = SchemaName::FeedbackList;
    let q: Questions = parse(schema, raw)?;
    let questions: Vec<String> = q.questions.into_iter().filter(|s| !s.trim().is_empty()).collect();
    if questions.is_empty() {
        return Err(violation(schema, "no questions", raw));
    }
    Ok(questions)
}

pub fn decode_suggestions(raw: &Value) -> Result<Vec<String>, SchemaViolation> {
    let s: Suggestions = parse(SchemaName::SuggestionList, raw)?;
    Ok(s.suggestions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: usize) -> Value {
        let list: Vec<Value> = (0..n)
            .map(|i| json!({ "frameType": "context", "description": format!("d{i}"), "caption": "c" }))
            .collect();
        json!({ "title": "t", "frames": list })
    }

    #[test]
    fn outline_requires_four_frames() {
        assert!(decode_outline(&frames(4)).is_ok());
        let err = decode_outline(&frames(3)).unwrap_err();
        assert_eq!(err.schema, SchemaName::StoryboardOutline);
        assert_eq!(err.raw, frames(3));
    }

    #[test]
    fn outline_rejects_unknown_frame_type() {
        let raw = json!({ "title": "t", "frames": [{ "frameType": "epilogue", "description": "", "caption": "" }] });
        assert!(decode_outline(&raw).is_err());
    }

    #[test]
    fn persona_list_needs_every_field() {
        let ok = json!({ "personas": [{ "name": "Eco Emily", "location": "", "bio": "", "needs": "", "challenges": "", "description": "" }] });
        assert_eq!(decode_ideas(ArtifactKind::Persona, &ok).unwrap().len(), 1);
        let missing = json!({ "personas": [{ "name": "Eco Emily" }] });
        assert!(decode_ideas(ArtifactKind::Persona, &missing).is_err());
    }

    #[test]
    fn encode_then_decode_ideas() {
        let items = vec![ArtifactContent::Solution(SolutionContent {
            title: "Plant-based Packaging".into(),
            problems_addressed: "a".into(),
            key_features: "b".into(),
            benefits: "c".into(),
            image: None,
        })];
        let raw = encode_ideas(ArtifactKind::Solution, &items);
        assert_eq!(decode_ideas(ArtifactKind::Solution, &raw).unwrap(), items);
    }

    #[test]
    fn image_prompt_count_must_match() {
        let raw = json!({ "frames": [{ "imagePrompt": "a", "imageNegativePrompt": "b" }] });
        assert!(decode_image_prompts(&raw, 1).is_ok());
        assert!(decode_image_prompts(&raw, 2).is_err());
    }

    #[test]
    fn blank_questions_are_dropped() {
        let raw = json!({ "questions": ["  ", "Why?"] });
        assert_eq!(decode_questions(&raw).unwrap(), vec!["Why?".to_string()]);
        assert!(decode_questions(&json!({ "questions": [""] })).is_err());
    }

    #[test]
    fn schema_documents_are_objects() {
        for s in [
            SchemaName::PersonaList,
            SchemaName::ProblemList,
            SchemaName::SolutionList,
            SchemaName::StoryboardOutline,
            SchemaName::ImagePromptList,
            SchemaName::ImagePrompt,
            SchemaName::CharacterDescription,
            SchemaName::FeedbackList,
            SchemaName::SuggestionList,
        ] {
            assert_eq!(s.json_schema()["type"], "object", "{s}");
        }
    }
}
