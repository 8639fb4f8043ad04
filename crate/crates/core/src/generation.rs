//! Prompt rendering and the model-backed generation flows.
//!
//! Every text call renders a user prompt from the template corpus and a
//! system prompt from `system_json_schema`, sends both through the provider
//! and decodes the reply against the template's response schema.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::artifact::{
    ArtifactContent, ArtifactKind, Frame, ImageRef, StoryboardContent, VisualCharacterDescription,
};
use crate::provider::{ImageRequest, ModelProvider, ProviderError, TextRequest};
use crate::schema::{self, ImagePrompt, SchemaName, SchemaViolation};
use crate::style::{StyleId, StyleRegistry};
use crate::template::{bindings, Bindings, TemplateCorpus, TemplateError};

pub const DEFAULT_VARIATIONS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{template}: {source}")]
    Provider {
        template: String,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    Schema(#[from] SchemaViolation),
    #[error("{0}")]
    Precondition(String),
    #[error("unknown style {0}")]
    UnknownStyle(StyleId),
}

fn precondition(message: impl Into<String>) -> GenerationError {
    GenerationError::Precondition(message.into())
}

/// Upstream material for a storyboard.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoryboardInputs {
    pub personas: Vec<ArtifactContent>,
    pub problems: Vec<ArtifactContent>,
    pub solutions: Vec<ArtifactContent>,
    pub guidance: Option<String>,
}

impl StoryboardInputs {
    /// Sorts design contents into their input lists; other kinds are ignored.
    pub fn from_contents<'a>(contents: impl IntoIterator<Item = &'a ArtifactContent>) -> Self {
        let mut inputs = StoryboardInputs::default();
        for c in contents {
            match c.kind() {
                ArtifactKind::Persona => inputs.personas.push(c.clone()),
                ArtifactKind::Problem => inputs.problems.push(c.clone()),
                ArtifactKind::Solution => inputs.solutions.push(c.clone()),
                _ => {}
            }
        }
        inputs
    }

    fn all(&self) -> Vec<&ArtifactContent> {
        self.personas.iter().chain(&self.problems).chain(&self.solutions).collect()
    }
}

/// A storyboard plus the indices of frames whose image call failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoryboardBuild {
    pub content: StoryboardContent,
    pub failed_frames: Vec<usize>,
}

/// Which recommendation template family to use for guidance suggestions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GuidanceMode {
    More,
    Next,
}

/// `"a"`, `"a and b"`, `"a, b, and c"`.
pub fn join_words(words: &[&str]) -> String {
    match words {
        [] => String::new(),
        [one] => one.to_string(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

fn capitalized(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn json_list(items: &[&ArtifactContent]) -> String {
    let values: Vec<Value> = items.iter().map(|c| c.for_prompt()).collect();
    serde_json::to_string_pretty(&values).unwrap_or_default()
}

/// Contents grouped under `Personas:`, `Problems:` ... headings in stage order.
pub fn sections(items: &[&ArtifactContent]) -> String {
    let mut kinds: Vec<ArtifactKind> = items.iter().map(|c| c.kind()).collect();
    kinds.sort();
    kinds.dedup();
    kinds
        .iter()
        .map(|kind| {
            let group: Vec<&ArtifactContent> = items.iter().copied().filter(|c| c.kind() == *kind).collect();
            format!("{}:\n{}", capitalized(kind.plural()), json_list(&group))
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Context text for regenerating a node from changed neighbours. The first
/// line uses the phrasing the regenerate templates key on.
pub fn regeneration_context(target: ArtifactKind, sources: &[&ArtifactContent], note: Option<&str>) -> String {
    let mut parts = Vec::new();
    if !sources.is_empty() {
        let mut kinds: Vec<ArtifactKind> = sources.iter().map(|c| c.kind()).collect();
        kinds.sort();
        kinds.dedup();
        let names: Vec<&str> = kinds.iter().map(|k| k.plural()).collect();
        parts.push(format!(
            "Regenerating {} based on updated {}.",
            target.plural(),
            join_words(&names)
        ));
        parts.push(sections(sources));
    }
    if let Some(note) = note.filter(|n| !n.trim().is_empty()) {
        parts.push(note.to_string());
    }
    parts.join("\n\n")
}

/// Appends a `Guidance:` line when guidance is present.
pub fn with_guidance(mut text: String, guidance: Option<&str>) -> String {
    if let Some(g) = guidance.filter(|g| !g.trim().is_empty()) {
        if !text.is_empty() {
            text.push_str("\n\n");
        }
        text.push_str("Guidance: ");
        text.push_str(g);
    }
    text
}

#[derive(Clone)]
pub struct Pipeline {
    provider: Arc<dyn ModelProvider>,
    corpus: Arc<TemplateCorpus>,
    styles: StyleRegistry,
    parallel: bool,
}

impl Pipeline {
    pub fn new(provider: Arc<dyn ModelProvider>) -> Self {
        Pipeline {
            provider,
            corpus: Arc::new(TemplateCorpus::builtin()),
            styles: StyleRegistry::default(),
            parallel: true,
        }
    }

    pub fn with_corpus(mut self, corpus: Arc<TemplateCorpus>) -> Self {
        self.corpus = corpus;
        self
    }

    pub fn with_styles(mut self, styles: StyleRegistry) -> Self {
        self.styles = styles;
        self
    }

    /// Issue image calls one at a time instead of concurrently.
    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    pub fn is_parallel(&self) -> bool {
        self.parallel
    }

    pub fn provider(&self) -> &Arc<dyn ModelProvider> {
        &self.provider
    }

    pub fn corpus(&self) -> &TemplateCorpus {
        &self.corpus
    }

    pub fn styles(&self) -> &StyleRegistry {
        &self.styles
    }

    /// Renders `template`, sends it with the schema system prompt and
    /// returns the raw JSON reply.
    pub fn complete(&self, template: &str, bindings: &Bindings, schema: SchemaName) -> Result<Value, GenerationError> {
        let user = self.corpus.render(template, bindings)?;
        let schema_text = serde_json::to_string_pretty(&schema.json_schema()).unwrap_or_default();
        let system = self
            .corpus
            .render("system_json_schema", &crate::template::bindings([("jsonSchema", schema_text)]))?;
        let request = TextRequest {
            template: template.to_string(),
            system_prompt: system.text,
            user_prompt: user.text,
            schema,
            bindings: user.bindings,
        };
        log::debug!("text call {template}");
        self.provider
            .complete_json(&request)
            .map_err(|source| GenerationError::Provider {
                template: template.to_string(),
                source,
            })
    }

    fn image(&self, prompt: &ImagePrompt, style: &StyleId) -> Result<ImageRef, GenerationError> {
        let request = ImageRequest {
            prompt: prompt.image_prompt.clone(),
            negative_prompt: prompt.image_negative_prompt.clone(),
            style: style.clone(),
        };
        self.provider.generate_image(&request).map_err(|source| GenerationError::Provider {
            template: "image".into(),
            source,
        })
    }

    fn check_style(&self, style: &StyleId) -> Result<(), GenerationError> {
        if self.styles.contains(style) {
            Ok(())
        } else {
            Err(GenerationError::UnknownStyle(style.clone()))
        }
    }

    /// Exactly `n` new ideas of `kind` from free-text context.
    pub fn generate_ideas(&self, kind: ArtifactKind, context: &str, n: usize) -> Result<Vec<ArtifactContent>, GenerationError> {
        let schema = SchemaName::for_ideas(kind).ok_or_else(|| precondition(format!("cannot generate {kind} ideas")))?;
        if n == 0 {
            return Err(precondition("number of variations must be at least 1"));
        }
        let template = format!("generate_{}", kind.plural());
        let raw = self.complete(
            &template,
            &bindings([("numberOfVariations", n.to_string()), ("context", context.to_string())]),
            schema,
        )?;
        let items = schema::decode_ideas(kind, &raw)?;
        if items.len() != n {
            return Err(SchemaViolation {
                schema,
                message: format!("expected {n} {}, got {}", kind.plural(), items.len()),
                raw,
            }
            .into());
        }
        Ok(items)
    }

    /// Rewrites ideas of one kind under new context. Output order and count
    /// follow the input; existing images are kept.
    pub fn regenerate_ideas(&self, items: &[ArtifactContent], context: &str) -> Result<Vec<ArtifactContent>, GenerationError> {
        let Some(kind) = items.first().map(ArtifactContent::kind) else {
            return Ok(Vec::new());
        };
        if items.iter().any(|c| c.kind() != kind) {
            return Err(precondition("regenerated items must share one kind"));
        }
        let schema = SchemaName::for_ideas(kind).ok_or_else(|| precondition(format!("cannot regenerate {kind} as ideas")))?;
        let refs: Vec<&ArtifactContent> = items.iter().collect();
        let raw = self.complete(
            &format!("regenerate_{}", kind.plural()),
            &bindings([(kind.plural(), json_list(&refs)), ("context", context.to_string())]),
            schema,
        )?;
        let mut out = schema::decode_ideas(kind, &raw)?;
        if out.len() != items.len() {
            return Err(SchemaViolation {
                schema,
                message: format!("expected {} {}, got {}", items.len(), kind.plural(), out.len()),
                raw,
            }
            .into());
        }
        for (new, old) in out.iter_mut().zip(items) {
            new.set_image(old.image().cloned());
        }
        Ok(out)
    }

    pub fn generate_personas(&self, context: &str, n: usize) -> Result<Vec<ArtifactContent>, GenerationError> {
        self.generate_ideas(ArtifactKind::Persona, context, n)
    }

    pub fn generate_problems(&self, context: &str, n: usize) -> Result<Vec<ArtifactContent>, GenerationError> {
        self.generate_ideas(ArtifactKind::Problem, context, n)
    }

    pub fn generate_solutions(&self, context: &str, n: usize) -> Result<Vec<ArtifactContent>, GenerationError> {
        self.generate_ideas(ArtifactKind::Solution, context, n)
    }

    pub fn regenerate_personas(&self, personas: &[ArtifactContent], context: &str) -> Result<Vec<ArtifactContent>, GenerationError> {
        self.expect_kind(personas, ArtifactKind::Persona)?;
        self.regenerate_ideas(personas, context)
    }

    pub fn regenerate_problems(&self, problems: &[ArtifactContent], context: &str) -> Result<Vec<ArtifactContent>, GenerationError> {
        self.expect_kind(problems, ArtifactKind::Problem)?;
        self.regenerate_ideas(problems, context)
    }

    pub fn regenerate_solutions(&self, solutions: &[ArtifactContent], context: &str) -> Result<Vec<ArtifactContent>, GenerationError> {
        self.expect_kind(solutions, ArtifactKind::Solution)?;
        self.regenerate_ideas(solutions, context)
    }

    fn expect_kind(&self, items: &[ArtifactContent], kind: ArtifactKind) -> Result<(), GenerationError> {
        match items.iter().find(|c| c.kind() != kind) {
            Some(c) => Err(precondition(format!("expected {} but got {}", kind.plural(), c.kind().plural()))),
            None => Ok(()),
        }
    }

    /// Variations that differ from the selected ideas, all of one kind.
    pub fn generate_more(
        &self,
        selected: &[&ArtifactContent],
        guidance: Option<&str>,
        n: usize,
    ) -> Result<Vec<ArtifactContent>, GenerationError> {
        let kind = selected
            .first()
            .map(|c| c.kind())
            .ok_or_else(|| precondition("select at least one node"))?;
        if selected.iter().any(|c| c.kind() != kind) {
            return Err(precondition("generate more needs nodes of a single kind"));
        }
        if SchemaName::for_ideas(kind).is_none() {
            return Err(precondition(format!("generate more is not available for {} nodes", kind)));
        }
        let context = format!(
            "Existing {}:\n{}\n\nCreate new {} that differ from the existing ones.",
            kind.plural(),
            json_list(selected),
            kind.plural()
        );
        self.generate_ideas(kind, &with_guidance(context, guidance), n)
    }

    /// Contents for `n` nodes one stage after the selection. Storyboards are
    /// built through the full storyboard pipeline.
    pub fn next_contents(
        &self,
        selected: &[&ArtifactContent],
        guidance: Option<&str>,
        n: usize,
        descriptions: &[VisualCharacterDescription],
        style: &StyleId,
    ) -> Result<Vec<ArtifactContent>, GenerationError> {
        let target = next_kind(selected)?;
        if n == 0 {
            return Err(precondition("number of variations must be at least 1"));
        }
        if target == ArtifactKind::Storyboard {
            let mut inputs = StoryboardInputs::from_contents(selected.iter().copied());
            inputs.guidance = guidance.map(str::to_string);
            return (0..n)
                .map(|i| {
                    let mut inputs = inputs.clone();
                    if n > 1 {
                        let variant = format!("Variation {} of {n}.", i + 1);
                        inputs.guidance = Some(match &inputs.guidance {
                            Some(g) => format!("{g}\n{variant}"),
                            None => variant,
                        });
                    }
                    self.storyboard_pipeline(&inputs, None, descriptions, style)
                        .map(|b| ArtifactContent::Storyboard(b.content))
                })
                .collect();
        }
        let context = with_guidance(sections(selected), guidance);
        self.generate_ideas(target, &context, n)
    }

    pub fn visual_character_description(&self, idea: &ArtifactContent) -> Result<VisualCharacterDescription, GenerationError> {
        if SchemaName::for_ideas(idea.kind()).is_none() {
            return Err(precondition(format!("cannot describe a {} node", idea.kind())));
        }
        let raw = self.complete(
            "generate_visual_character_description",
            &bindings([("idea", serde_json::to_string_pretty(&idea.for_prompt()).unwrap_or_default())]),
            SchemaName::CharacterDescription,
        )?;
        Ok(schema::decode_character(&raw)?)
    }

    /// Outline, one image-prompt call for all frames, then one image call per
    /// frame. Image failures leave the frame without an image and are listed
    /// in `failed_frames`.
    pub fn build_storyboard(
        &self,
        inputs: &StoryboardInputs,
        descriptions: &[VisualCharacterDescription],
        style: &StyleId,
    ) -> Result<StoryboardBuild, GenerationError> {
        if inputs.solutions.is_empty() {
            return Err(precondition("a storyboard needs at least one solution"));
        }
        self.storyboard_pipeline(inputs, None, descriptions, style)
    }

    fn storyboard_pipeline(
        &self,
        inputs: &StoryboardInputs,
        note: Option<&str>,
        descriptions: &[VisualCharacterDescription],
        style: &StyleId,
    ) -> Result<StoryboardBuild, GenerationError> {
        self.check_style(style)?;
        let mut context = sections(&inputs.all());
        if let Some(note) = note {
            context = if context.is_empty() {
                note.to_string()
            } else {
                format!("{note}\n\n{context}")
            };
        }
        let context = with_guidance(context, inputs.guidance.as_deref());
        self.storyboard_from_context(&context, descriptions, style)
    }

    fn storyboard_from_context(
        &self,
        context: &str,
        descriptions: &[VisualCharacterDescription],
        style: &StyleId,
    ) -> Result<StoryboardBuild, GenerationError> {
        let raw = self.complete(
            "generate_storyboard_outline",
            &bindings([("context", context.to_string())]),
            SchemaName::StoryboardOutline,
        )?;
        let outline = schema::decode_outline(&raw)?;

        let frames_json = serde_json::to_string_pretty(&outline.frames).unwrap_or_default();
        let characters_json = serde_json::to_string_pretty(descriptions).unwrap_or_default();
        let raw = self.complete(
            "generate_storyboard_image_prompts",
            &bindings([
                ("numFrames", outline.frames.len().to_string()),
                ("frames", frames_json),
                ("visualCharacterDescriptions", characters_json),
            ]),
            SchemaName::ImagePromptList,
        )?;
        let prompts = schema::decode_image_prompts(&raw, outline.frames.len())?;

        let images = self.render_images(&prompts, style);
        let mut failed_frames = Vec::new();
        let frames = outline
            .frames
            .into_iter()
            .zip(prompts)
            .zip(images)
            .enumerate()
            .map(|(i, ((f, p), image))| {
                let image = match image {
                    Ok(img) => Some(img),
                    Err(e) => {
                        log::warn!("frame {i} image failed: {e}");
                        failed_frames.push(i);
                        None
                    }
                };
                Frame {
                    frame_type: f.frame_type,
                    description: f.description,
                    caption: f.caption,
                    image_prompt: p.image_prompt,
                    image_negative_prompt: p.image_negative_prompt,
                    image,
                }
            })
            .collect();
        Ok(StoryboardBuild {
            content: StoryboardContent {
                title: outline.title,
                frames,
                style: style.clone(),
            },
            failed_frames,
        })
    }

    fn render_images(&self, prompts: &[ImagePrompt], style: &StyleId) -> Vec<Result<ImageRef, GenerationError>> {
        if !self.parallel || prompts.len() < 2 {
            return prompts.iter().map(|p| self.image(p, style)).collect();
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = prompts.iter().map(|p| scope.spawn(move || self.image(p, style))).collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join().unwrap_or_else(|_| {
                        Err(GenerationError::Provider {
                            template: "image".into(),
                            source: ProviderError::Transport("image worker panicked".into()),
                        })
                    })
                })
                .collect()
        })
    }

    /// One prompt call and one image call. Problems use the empathy template.
    pub fn illustrative_image(
        &self,
        idea: &ArtifactContent,
        descriptions: &[VisualCharacterDescription],
        style: &StyleId,
    ) -> Result<ImageRef, GenerationError> {
        self.check_style(style)?;
        let mut text = serde_json::to_string_pretty(&idea.for_prompt()).unwrap_or_default();
        if !descriptions.is_empty() {
            text.push_str("\n\nVisual Character Descriptions:\n");
            text.push_str(&serde_json::to_string_pretty(descriptions).unwrap_or_default());
        }
        let (template, slot) = match idea.kind() {
            ArtifactKind::Problem => ("generate_problem_illustrative_image_prompt", "problem"),
            ArtifactKind::Persona | ArtifactKind::Solution => ("generate_illustrative_image_prompt", "idea"),
            other => return Err(precondition(format!("{other} nodes do not take illustrative images"))),
        };
        let raw = self.complete(template, &bindings([(slot, text)]), SchemaName::ImagePrompt)?;
        let prompt = schema::decode_image_prompt(&raw)?;
        self.image(&prompt, style)
    }

    /// Re-renders every frame with its stored prompts in `style`. Text is
    /// untouched; failed frames keep their previous image.
    pub fn regenerate_images(&self, board: &StoryboardContent, style: &StyleId) -> Result<StoryboardBuild, GenerationError> {
        self.check_style(style)?;
        let prompts: Vec<ImagePrompt> = board
            .frames
            .iter()
            .map(|f| ImagePrompt {
                image_prompt: f.image_prompt.clone(),
                image_negative_prompt: f.image_negative_prompt.clone(),
            })
            .collect();
        let mut content = board.clone();
        content.style = style.clone();
        let mut failed_frames = Vec::new();
        for (i, result) in self.render_images(&prompts, style).into_iter().enumerate() {
            match result {
                Ok(img) => content.frames[i].image = Some(img),
                Err(e) => {
                    log::warn!("frame {i} image failed: {e}");
                    failed_frames.push(i);
                }
            }
        }
        Ok(StoryboardBuild { content, failed_frames })
    }

    /// Regenerates one frame's image from its current prompts.
    pub fn regenerate_frame_image(&self, board: &StoryboardContent, index: usize) -> Result<StoryboardContent, GenerationError> {
        let frame = board
            .frames
            .get(index)
            .ok_or_else(|| precondition(format!("frame {index} does not exist")))?;
        self.check_style(&board.style)?;
        let image = self.image(
            &ImagePrompt {
                image_prompt: frame.image_prompt.clone(),
                image_negative_prompt: frame.image_negative_prompt.clone(),
            },
            &board.style,
        )?;
        let mut out = board.clone();
        out.frames[index].image = Some(image);
        Ok(out)
    }

    /// One kind-specific call for a single node, one group call otherwise.
    pub fn feedback_questions(&self, targets: &[&ArtifactContent]) -> Result<Vec<String>, GenerationError> {
        let raw = match targets {
            [] => return Err(precondition("select at least one node for feedback")),
            [one] => {
                let kind = one.kind();
                if kind == ArtifactKind::Context {
                    return Err(precondition("context nodes have no feedback"));
                }
                let text = serde_json::to_string_pretty(&one.for_prompt()).unwrap_or_default();
                self.complete(
                    &format!("{}_feedback", kind.as_str()),
                    &bindings([(kind.as_str(), text)]),
                    SchemaName::FeedbackList,
                )?
            }
            many => self.complete("group_feedback", &bindings([("nodes", json_list(many))]), SchemaName::FeedbackList)?,
        };
        Ok(schema::decode_questions(&raw)?)
    }

    pub fn revision_suggestions(&self, targets: &[&ArtifactContent]) -> Result<Vec<String>, GenerationError> {
        if targets.is_empty() {
            return Err(precondition("select at least one node"));
        }
        let raw = self.complete(
            "revise_node_recommendations",
            &bindings([("nodes", json_list(targets))]),
            SchemaName::SuggestionList,
        )?;
        Ok(schema::decode_suggestions(&raw)?)
    }

    /// Short guidance phrases for Generate More or Generate Next.
    pub fn guidance_suggestions(&self, nodes: &[&ArtifactContent], mode: GuidanceMode) -> Result<Vec<String>, GenerationError> {
        let template = match mode {
            GuidanceMode::More => {
                let kind = nodes
                    .first()
                    .map(|c| c.kind())
                    .ok_or_else(|| precondition("select at least one node"))?;
                if kind == ArtifactKind::Context {
                    return Err(precondition("context nodes have no suggestions"));
                }
                format!("recommend_more_{}", kind.plural())
            }
            GuidanceMode::Next => match next_kind(nodes)? {
                ArtifactKind::Problem => "recommend_problems".into(),
                ArtifactKind::Solution => "recommend_solutions".into(),
                _ => "recommend_dependent_storyboards".into(),
            },
        };
        let raw = self.complete(&template, &bindings([("nodes", json_list(nodes))]), SchemaName::SuggestionList)?;
        Ok(schema::decode_suggestions(&raw)?)
    }

    /// Regenerates one node from neighbouring contents and an optional note
    /// (an instruction or a feedback answer). Storyboards are rebuilt through
    /// the full pipeline in their current style.
    pub fn regenerate_content(
        &self,
        target: &ArtifactContent,
        sources: &[&ArtifactContent],
        note: Option<&str>,
        descriptions: &[VisualCharacterDescription],
    ) -> Result<ArtifactContent, GenerationError> {
        match target {
            ArtifactContent::Context(_) => Err(precondition("context nodes are not regenerated")),
            ArtifactContent::Storyboard(board) => {
                let mut context = regeneration_context(ArtifactKind::Storyboard, sources, None);
                let current = serde_json::to_string_pretty(&target.for_prompt()).unwrap_or_default();
                if !context.is_empty() {
                    context.push_str("\n\n");
                }
                context.push_str("Current storyboard:\n");
                context.push_str(&current);
                if let Some(note) = note.filter(|n| !n.trim().is_empty()) {
                    context.push_str("\n\n");
                    context.push_str(note);
                }
                let build = self.storyboard_from_context(&context, descriptions, &board.style)?;
                Ok(ArtifactContent::Storyboard(build.content))
            }
            idea => {
                let context = regeneration_context(idea.kind(), sources, note);
                let mut out = self.regenerate_ideas(std::slice::from_ref(idea), &context)?;
                Ok(out.remove(0))
            }
        }
    }
}

/// Target kind for Generate Next. Mixed stages are only allowed when the
/// target is a storyboard.
pub fn next_kind(selected: &[&ArtifactContent]) -> Result<ArtifactKind, GenerationError> {
    if selected.is_empty() {
        return Err(precondition("select at least one node"));
    }
    let mut kinds: Vec<ArtifactKind> = selected.iter().map(|c| c.kind()).collect();
    kinds.sort();
    kinds.dedup();
    if kinds.contains(&ArtifactKind::Context) {
        return Err(precondition("context nodes cannot generate next nodes"));
    }
    if kinds.contains(&ArtifactKind::Storyboard) {
        return Err(precondition("storyboards are the last stage"));
    }
    match kinds.as_slice() {
        [one] => one.next().ok_or_else(|| precondition("no next stage")),
        _ if kinds.contains(&ArtifactKind::Solution) => Ok(ArtifactKind::Storyboard),
        _ => Err(precondition("selected nodes must share one stage")),
    }
}
