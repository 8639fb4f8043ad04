//! Prompt templates with `{placeholder}` slots.
//!
//! The built-in corpus lives in `templates/*.txt` and is embedded at compile
//! time; a directory with the same file names can replace it at startup.
//! Rendering is a single left-to-right substitution pass, so binding values
//! are never re-expanded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub type Bindings = BTreeMap<String, String>;

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../templates/", $name, ".txt")))),*]
    };
}

/// `(name, body)` for every built-in template, sorted by name.
pub const BUILTIN: &[(&str, &str)] = corpus![
    "generate_illustrative_image_prompt",
    "generate_personas",
    "generate_problem_illustrative_image_prompt",
    "generate_problems",
    "generate_solutions",
    "generate_storyboard_image_prompts",
    "generate_storyboard_outline",
    "generate_visual_character_description",
    "group_feedback",
    "persona_feedback",
    "problem_feedback",
    "recommend_dependent_storyboards",
    "recommend_more_personas",
    "recommend_more_problems",
    "recommend_more_solutions",
    "recommend_more_storyboards",
    "recommend_problems",
    "recommend_solutions",
    "regenerate_personas",
    "regenerate_problems",
    "regenerate_solutions",
    "revise_node_recommendations",
    "solution_feedback",
    "storyboard_feedback",
    "system_json_schema",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Placeholder(String),
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits a body into literal text and `{identifier}` slots. Braces that do
/// not enclose an identifier are literal text.
pub fn parse_segments(body: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let ident_len = after
            .char_indices()
            .find(|(_, c)| !is_ident(*c))
            .map(|(i, _)| i)
            .unwrap_or(after.len());
        let is_slot = ident_len > 0
            && after.starts_with(is_ident_start)
            && after[ident_len..].starts_with('}');
        if is_slot {
            literal.push_str(&rest[..open]);
            if !literal.is_empty() {
                segments.push(Segment::Literal(std::mem::take(&mut literal)));
            }
            segments.push(Segment::Placeholder(after[..ident_len].to_string()));
            rest = &after[ident_len + 1..];
        } else {
            literal.push_str(&rest[..=open]);
            rest = after;
        }
    }
    literal.push_str(rest);
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    segments
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("template {template:?} is missing binding {name:?}")]
    MissingBinding { template: String, name: String },
    #[error("cannot read template corpus: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    body: String,
    segments: Vec<Segment>,
    required: Vec<String>,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let segments = parse_segments(&body);
        let mut seen = BTreeSet::new();
        let required = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(p) if seen.insert(p.clone()) => Some(p.clone()),
                _ => None,
            })
            .collect();
        PromptTemplate {
            name: name.into(),
            body,
            segments,
            required,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Placeholder names in order of first appearance.
    pub fn required_bindings(&self) -> &[String] {
        &self.required
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn render(&self, bindings: &Bindings) -> Result<RenderedPrompt, TemplateError> {
        let mut text = String::with_capacity(self.body.len());
        for segment in &self.segments {
            match segment {
                Segment::Literal(l) => text.push_str(l),
                Segment::Placeholder(p) => {
                    let value = bindings.get(p).ok_or_else(|| TemplateError::MissingBinding {
                        template: self.name.clone(),
                        name: p.clone(),
                    })?;
                    text.push_str(value);
                }
            }
        }
        let used = self
            .required
            .iter()
            .filter_map(|k| bindings.get(k).map(|v| (k.clone(), v.clone())))
            .collect();
        Ok(RenderedPrompt {
            template: self.name.clone(),
            text,
            bindings: used,
        })
    }

    /// Recovers binding values from rendered text: each slot's value runs up
    /// to the first occurrence of the literal that follows it. Returns `None`
    /// when the text does not fit the template.
    pub fn extract_bindings(&self, rendered: &str) -> Option<Bindings> {
        let mut out = Bindings::new();
        let mut rest = rendered;
        let mut iter = self.segments.iter().peekable();
        while let Some(segment) = iter.next() {
            match segment {
                Segment::Literal(l) => rest = rest.strip_prefix(l.as_str())?,
                Segment::Placeholder(p) => {
                    let value = match iter.peek() {
                        Some(Segment::Literal(next)) => &rest[..rest.find(next.as_str())?],
                        Some(Segment::Placeholder(_)) => "",
                        None => rest,
                    };
                    if let Some(previous) = out.get(p) {
                        if previous != value {
                            return None;
                        }
                    }
                    out.insert(p.clone(), value.to_string());
                    rest = &rest[value.len()..];
                }
            }
        }
        rest.is_empty().then_some(out)
    }

    /// Rendered text with every binding value replaced by its `{slot}`.
    pub fn strip_bindings(&self, rendered: &str) -> Option<String> {
        self.extract_bindings(rendered)?;
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal(l) => out.push_str(l),
                Segment::Placeholder(p) => {
                    let _ = write!(out, "{{{p}}}");
                }
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template: String,
    pub text: String,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateCorpus {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for TemplateCorpus {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateCorpus {
    pub fn builtin() -> Self {
        TemplateCorpus {
            templates: BUILTIN
                .iter()
                .map(|(name, body)| (name.to_string(), PromptTemplate::new(*name, *body)))
                .collect(),
        }
    }

    /// Loads `<name>.txt` for every built-in name from `dir`. Files are used
    /// verbatim; a trailing newline is part of the template.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut templates = BTreeMap::new();
        for (name, _) in BUILTIN {
            let path = dir.join(format!("{name}.txt"));
            let body = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io(format!("{}: {e}", path.display())))?;
            templates.insert(name.to_string(), PromptTemplate::new(*name, body));
        }
        Ok(TemplateCorpus { templates })
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(name)
            .ok_or_else(|| TemplateError::UnknownTemplate(name.to_string()))
    }

    pub fn templates(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }

    pub fn render(&self, name: &str, bindings: &Bindings) -> Result<RenderedPrompt, TemplateError> {
        self.get(name)?.render(bindings)
    }

    /// SHA-256 over `name NUL body NUL` for every template in name order.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for t in self.templates.values() {
            hasher.update(t.name.as_bytes());
            hasher.update([0]);
            hasher.update(t.body.as_bytes());
            hasher.update([0]);
        }
        hasher
            .finalize()
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

/// Convenience for building bindings from string pairs.
pub fn bindings<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Bindings {
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}
