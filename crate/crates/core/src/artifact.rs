//! Typed content for every design artifact kind, plus validation, field-level
//! diffing and partial merging.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::style::StyleId;

/// Node kinds. The four design kinds are stage ordered; `Context` is a
/// stage-less grouping label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ArtifactKind {
    Context,
    Persona,
    Problem,
    Solution,
    Storyboard,
}

impl ArtifactKind {
    pub const DESIGN_KINDS: [ArtifactKind; 4] = [
        ArtifactKind::Persona,
        ArtifactKind::Problem,
        ArtifactKind::Solution,
        ArtifactKind::Storyboard,
    ];

    /// Position in the design sequence, `None` for context nodes.
    pub fn stage(self) -> Option<u8> {
        match self {
            ArtifactKind::Context => None,
            ArtifactKind::Persona => Some(0),
            ArtifactKind::Problem => Some(1),
            ArtifactKind::Solution => Some(2),
            ArtifactKind::Storyboard => Some(3),
        }
    }

    /// The kind produced by "generate next" from this kind.
    pub fn next(self) -> Option<ArtifactKind> {
        match self {
            ArtifactKind::Persona => Some(ArtifactKind::Problem),
            ArtifactKind::Problem => Some(ArtifactKind::Solution),
            ArtifactKind::Solution => Some(ArtifactKind::Storyboard),
            ArtifactKind::Context | ArtifactKind::Storyboard => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Context => "context",
            ArtifactKind::Persona => "persona",
            ArtifactKind::Problem => "problem",
            ArtifactKind::Solution => "solution",
            ArtifactKind::Storyboard => "storyboard",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            ArtifactKind::Context => "contexts",
            ArtifactKind::Persona => "personas",
            ArtifactKind::Problem => "problems",
            ArtifactKind::Solution => "solutions",
            ArtifactKind::Storyboard => "storyboards",
        }
    }

    pub fn parse(s: &str) -> Option<ArtifactKind> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "context" | "contexts" => ArtifactKind::Context,
            "persona" | "personas" => ArtifactKind::Persona,
            "problem" | "problems" => ArtifactKind::Problem,
            "solution" | "solutions" => ArtifactKind::Solution,
            "storyboard" | "storyboards" => ArtifactKind::Storyboard,
            _ => return None,
        };
        Some(kind)
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Opaque reference to an image: a relative path beside the workspace file or
/// a remote URI. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ImageRef(String);

impl ImageRef {
    pub fn new(value: impl Into<String>) -> Result<Self, ArtifactError> {
        let value = value.into();
        if value.trim().is_empty() {
            return Err(ArtifactError::EmptyImageRef);
        }
        Ok(ImageRef(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ImageRef {
    type Error = ArtifactError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        ImageRef::new(value)
    }
}

impl From<ImageRef> for String {
    fn from(value: ImageRef) -> Self {
        value.0
    }
}

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PersonaContent {
    pub name: String,
    pub location: String,
    pub bio: String,
    pub needs: String,
    pub challenges: String,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ProblemContent {
    pub title: String,
    pub context: String,
    pub stakeholders: String,
    pub objectives: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SolutionContent {
    pub title: String,
    pub problems_addressed: String,
    pub key_features: String,
    pub benefits: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FrameType {
    Context,
    Problem,
    Solution,
    Resolution,
}

impl FrameType {
    /// Narrative order used for new storyboards.
    pub const NARRATIVE: [FrameType; 4] = [
        FrameType::Context,
        FrameType::Problem,
        FrameType::Solution,
        FrameType::Resolution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FrameType::Context => "context",
            FrameType::Problem => "problem",
            FrameType::Solution => "solution",
            FrameType::Resolution => "resolution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Frame {
    pub frame_type: FrameType,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub caption: String,
    #[serde(default)]
    pub image_prompt: String,
    #[serde(default)]
    pub image_negative_prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
}

impl Frame {
    pub fn empty(frame_type: FrameType) -> Self {
        Frame {
            frame_type,
            description: String::new(),
            caption: String::new(),
            image_prompt: String::new(),
            image_negative_prompt: String::new(),
            image: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoryboardContent {
    #[serde(default)]
    pub title: String,
    pub frames: Vec<Frame>,
    #[serde(default)]
    pub style: StyleId,
}

impl Default for StoryboardContent {
    /// An untitled board with the four narrative frames.
    fn default() -> Self {
        StoryboardContent {
            title: String::new(),
            frames: FrameType::NARRATIVE.iter().map(|t| Frame::empty(*t)).collect(),
            style: StyleId::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ContextContent {
    pub label: String,
}

/// The unit of design content stored on a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ArtifactContent {
    Context(ContextContent),
    Persona(PersonaContent),
    Problem(ProblemContent),
    Solution(SolutionContent),
    Storyboard(StoryboardContent),
}

impl ArtifactContent {
    /// All-empty content of the given kind (storyboards get four empty frames).
    pub fn empty(kind: ArtifactKind) -> Self {
        match kind {
            ArtifactKind::Context => ArtifactContent::Context(ContextContent::default()),
            ArtifactKind::Persona => ArtifactContent::Persona(PersonaContent::default()),
            ArtifactKind::Problem => ArtifactContent::Problem(ProblemContent::default()),
            ArtifactKind::Solution => ArtifactContent::Solution(SolutionContent::default()),
            ArtifactKind::Storyboard => ArtifactContent::Storyboard(StoryboardContent::default()),
        }
    }

    pub fn kind(&self) -> ArtifactKind {
        match self {
            ArtifactContent::Context(_) => ArtifactKind::Context,
            ArtifactContent::Persona(_) => ArtifactKind::Persona,
            ArtifactContent::Problem(_) => ArtifactKind::Problem,
            ArtifactContent::Solution(_) => ArtifactKind::Solution,
            ArtifactContent::Storyboard(_) => ArtifactKind::Storyboard,
        }
    }

    /// The name, title or label shown on a zoomed-out card.
    pub fn headline(&self) -> &str {
        match self {
            ArtifactContent::Context(c) => &c.label,
            ArtifactContent::Persona(p) => &p.name,
            ArtifactContent::Problem(p) => &p.title,
            ArtifactContent::Solution(s) => &s.title,
            ArtifactContent::Storyboard(s) => &s.title,
        }
    }

    pub fn image(&self) -> Option<&ImageRef> {
        match self {
            ArtifactContent::Context(_) | ArtifactContent::Storyboard(_) => None,
            ArtifactContent::Persona(p) => p.image.as_ref(),
            ArtifactContent::Problem(p) => p.image.as_ref(),
            ArtifactContent::Solution(s) => s.image.as_ref(),
        }
    }

    pub fn set_image(&mut self, image: Option<ImageRef>) {
        match self {
            ArtifactContent::Context(_) | ArtifactContent::Storyboard(_) => {}
            ArtifactContent::Persona(p) => p.image = image,
            ArtifactContent::Problem(p) => p.image = image,
            ArtifactContent::Solution(s) => s.image = image,
        }
    }

    /// Flattened `(fieldPath, value)` pairs in declaration order. Missing
    /// images flatten to the empty string; frame lists contribute a
    /// `frames` entry holding their length.
    pub fn fields(&self) -> Vec<(String, String)> {
        fn img(image: &Option<ImageRef>) -> String {
            image.as_ref().map(|i| i.0.clone()).unwrap_or_default()
        }
        let mut out = Vec::new();
        let mut push = |path: &str, value: &str| out.push((path.to_string(), value.to_string()));
        match self {
            ArtifactContent::Context(c) => push("label", &c.label),
            ArtifactContent::Persona(p) => {
                push("name", &p.name);
                push("location", &p.location);
                push("bio", &p.bio);
                push("needs", &p.needs);
                push("challenges", &p.challenges);
                push("description", &p.description);
                push("image", &img(&p.image));
            }
            ArtifactContent::Problem(p) => {
                push("title", &p.title);
                push("context", &p.context);
                push("stakeholders", &p.stakeholders);
                push("objectives", &p.objectives);
                push("image", &img(&p.image));
            }
            ArtifactContent::Solution(s) => {
                push("title", &s.title);
                push("problemsAddressed", &s.problems_addressed);
                push("keyFeatures", &s.key_features);
                push("benefits", &s.benefits);
                push("image", &img(&s.image));
            }
            ArtifactContent::Storyboard(s) => {
                push("title", &s.title);
                push("style", s.style.as_str());
                push("frames", &s.frames.len().to_string());
                for (i, f) in s.frames.iter().enumerate() {
                    push(&format!("frames[{i}].frameType"), f.frame_type.as_str());
                    push(&format!("frames[{i}].description"), &f.description);
                    push(&format!("frames[{i}].caption"), &f.caption);
                    push(&format!("frames[{i}].imagePrompt"), &f.image_prompt);
                    push(&format!("frames[{i}].imageNegativePrompt"), &f.image_negative_prompt);
                    push(&format!("frames[{i}].image"), &img(&f.image));
                }
            }
        }
        out
    }

    /// True when any user-editable text field is blank. Images and image
    /// prompts are not counted.
    pub fn has_empty_fields(&self) -> bool {
        let blank = |s: &str| s.trim().is_empty();
        match self {
            ArtifactContent::Context(c) => blank(&c.label),
            ArtifactContent::Persona(p) => [&p.name, &p.location, &p.bio, &p.needs, &p.challenges, &p.description]
                .iter()
                .any(|s| blank(s)),
            ArtifactContent::Problem(p) => {
                [&p.title, &p.context, &p.stakeholders, &p.objectives].iter().any(|s| blank(s))
            }
            ArtifactContent::Solution(s) => [&s.title, &s.problems_addressed, &s.key_features, &s.benefits]
                .iter()
                .any(|s| blank(s)),
            ArtifactContent::Storyboard(s) => {
                blank(&s.title) || s.frames.iter().any(|f| blank(&f.description) || blank(&f.caption))
            }
        }
    }

    /// Content with images and image prompts stripped, used when content is
    /// handed to a text model as context.
    pub fn for_prompt(&self) -> serde_json::Value {
        let mut copy = self.clone();
        copy.set_image(None);
        if let ArtifactContent::Storyboard(s) = &mut copy {
            for f in &mut s.frames {
                f.image = None;
            }
        }
        let mut value = serde_json::to_value(&copy).unwrap_or(serde_json::Value::Null);
        if let Some(obj) = value.as_object_mut() {
            obj.remove("kind");
        }
        value
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VisualCharacterDescription {
    pub character_name: String,
    pub description: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArtifactError {
    #[error("content of kind {actual} does not match expected kind {expected}")]
    KindMismatch { expected: ArtifactKind, actual: ArtifactKind },
    #[error("image reference must not be empty")]
    EmptyImageRef,
    #[error("storyboard must have at least one frame")]
    NoFrames,
}

fn ensure_kind(expected: ArtifactKind, actual: ArtifactKind) -> Result<(), ArtifactError> {
    if expected == actual {
        Ok(())
    } else {
        Err(ArtifactError::KindMismatch { expected, actual })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_complete(&self) -> bool {
        self.violations.is_empty()
    }

    fn require(&mut self, field: &str, value: &str) {
        if value.trim().is_empty() {
            self.violations.push(Violation {
                field: field.to_string(),
                message: format!("{field} is missing"),
            });
        }
    }
}

/// Checks field presence rules. An empty report means the content is complete.
pub fn validate_content(kind: ArtifactKind, content: &ArtifactContent) -> Result<ValidationReport, ArtifactError> {
    ensure_kind(kind, content.kind())?;
    let mut report = ValidationReport::default();
    match content {
        ArtifactContent::Context(c) => report.require("label", &c.label),
        ArtifactContent::Persona(p) => report.require("name", &p.name),
        ArtifactContent::Problem(p) => {
            report.require("title", &p.title);
            if p.title.trim_end().ends_with('?') {
                report.violations.push(Violation {
                    field: "title".into(),
                    message: "problem statement must be a statement, not a question".into(),
                });
            }
        }
        ArtifactContent::Solution(s) => report.require("title", &s.title),
        ArtifactContent::Storyboard(s) => {
            report.require("title", &s.title);
            if s.frames.is_empty() {
                report.violations.push(Violation {
                    field: "frames".into(),
                    message: "storyboard needs at least one frame".into(),
                });
            }
            for (i, f) in s.frames.iter().enumerate() {
                report.require(&format!("frames[{i}].caption"), &f.caption);
            }
        }
    }
    Ok(report)
}

/// Half-open character range `[start, end)` in the new value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FieldChange {
    pub field_path: String,
    pub old_value: String,
    pub new_value: String,
    pub changed_spans: Vec<Span>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldDiff(pub Vec<FieldChange>);

impl FieldDiff {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, field_path: &str) -> Option<&FieldChange> {
        self.0.iter().find(|c| c.field_path == field_path)
    }
}

/// Lists the fields whose values differ, with the word runs of the new value
/// that are not part of the longest common word subsequence.
pub fn diff_content(old: &ArtifactContent, new: &ArtifactContent) -> Result<FieldDiff, ArtifactError> {
    ensure_kind(old.kind(), new.kind())?;
    let old_fields = old.fields();
    let new_fields = new.fields();
    let lookup = |fields: &[(String, String)], path: &str| -> String {
        fields.iter().find(|(p, _)| p == path).map(|(_, v)| v.clone()).unwrap_or_default()
    };

    // Union of paths, new order first so frame paths stay ascending.
    let mut paths: Vec<&str> = new_fields.iter().map(|(p, _)| p.as_str()).collect();
    for (p, _) in &old_fields {
        if !paths.contains(&p.as_str()) {
            paths.push(p);
        }
    }

    let mut changes = Vec::new();
    for path in paths {
        let before = lookup(&old_fields, path);
        let after = lookup(&new_fields, path);
        if before != after {
            changes.push(FieldChange {
                field_path: path.to_string(),
                changed_spans: changed_word_spans(&before, &after),
                old_value: before,
                new_value: after,
            });
        }
    }
    Ok(FieldDiff(changes))
}

/// Words with their character ranges.
fn words(text: &str) -> Vec<(&str, Span)> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None; // (byte, char)
    let mut char_idx = 0;
    for (byte, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                out.push((&text[b..byte], Span { start: c, end: char_idx }));
            }
        } else if start.is_none() {
            start = Some((byte, char_idx));
        }
        char_idx += 1;
    }
    if let Some((b, c)) = start {
        out.push((&text[b..], Span { start: c, end: char_idx }));
    }
    out
}

/// Character spans in `new` covering maximal runs of words that are not in
/// the word-level LCS of `old` and `new`.
pub fn changed_word_spans(old: &str, new: &str) -> Vec<Span> {
    let a = words(old);
    let b = words(new);
    let (n, m) = (a.len(), b.len());
    // lcs[i][j] = LCS length of a[i..] and b[j..]
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if a[i].0 == b[j].0 {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut kept = vec![false; m];
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i].0 == b[j].0 {
            kept[j] = true;
            i += 1;
            j += 1;
        } else if lcs[i + 1][j] >= lcs[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut spans: Vec<Span> = Vec::new();
    let mut prev_changed = false;
    for (idx, (_, span)) in b.iter().enumerate() {
        if kept[idx] {
            prev_changed = false;
            continue;
        }
        match spans.last_mut() {
            Some(last) if prev_changed => last.end = span.end,
            _ => spans.push(*span),
        }
        prev_changed = true;
    }
    spans
}

fn fill(existing: &mut String, generated: &str) {
    if existing.trim().is_empty() {
        *existing = generated.to_string();
    }
}

fn fill_image(existing: &mut Option<ImageRef>, generated: &Option<ImageRef>) {
    if existing.is_none() {
        existing.clone_from(generated);
    }
}

/// Keeps every non-empty field of `existing` and takes `generated` values for
/// the empty ones. Storyboard frames merge pairwise; surplus generated frames
/// are appended.
pub fn merge_partial(existing: &ArtifactContent, generated: &ArtifactContent) -> Result<ArtifactContent, ArtifactError> {
    ensure_kind(existing.kind(), generated.kind())?;
    let mut out = existing.clone();
    match (&mut out, generated) {
        (ArtifactContent::Context(e), ArtifactContent::Context(g)) => fill(&mut e.label, &g.label),
        (ArtifactContent::Persona(e), ArtifactContent::Persona(g)) => {
            fill(&mut e.name, &g.name);
            fill(&mut e.location, &g.location);
            fill(&mut e.bio, &g.bio);
            fill(&mut e.needs, &g.needs);
            fill(&mut e.challenges, &g.challenges);
            fill(&mut e.description, &g.description);
            fill_image(&mut e.image, &g.image);
        }
        (ArtifactContent::Problem(e), ArtifactContent::Problem(g)) => {
            fill(&mut e.title, &g.title);
            fill(&mut e.context, &g.context);
            fill(&mut e.stakeholders, &g.stakeholders);
            fill(&mut e.objectives, &g.objectives);
            fill_image(&mut e.image, &g.image);
        }
        (ArtifactContent::Solution(e), ArtifactContent::Solution(g)) => {
            fill(&mut e.title, &g.title);
            fill(&mut e.problems_addressed, &g.problems_addressed);
            fill(&mut e.key_features, &g.key_features);
            fill(&mut e.benefits, &g.benefits);
            fill_image(&mut e.image, &g.image);
        }
        (ArtifactContent::Storyboard(e), ArtifactContent::Storyboard(g)) => {
            fill(&mut e.title, &g.title);
            for (ef, gf) in e.frames.iter_mut().zip(&g.frames) {
                fill(&mut ef.description, &gf.description);
                fill(&mut ef.caption, &gf.caption);
                fill(&mut ef.image_prompt, &gf.image_prompt);
                fill(&mut ef.image_negative_prompt, &gf.image_negative_prompt);
                fill_image(&mut ef.image, &gf.image);
            }
            if g.frames.len() > e.frames.len() {
                let extra = g.frames[e.frames.len()..].to_vec();
                e.frames.extend(extra);
            }
        }
        _ => unreachable!("kinds checked above"),
    }
    Ok(out)
}
