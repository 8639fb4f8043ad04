//! Template corpus oracles: an independent renderer, the pinned checksum and
//! a driver that renders every template through the pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde_json::Value;
use sha2::{Digest, Sha256};
use storyloom_core::artifact::{ArtifactContent, ImageRef};
use storyloom_core::generation::{GuidanceMode, Pipeline, StoryboardInputs};
use storyloom_core::provider::{ImageRequest, ModelProvider, ProviderError, TextRequest};
use storyloom_core::style::StyleId;
use storyloom_core::template::{TemplateCorpus, BUILTIN};
use storyloom_core::MockProvider;

/// SHA-256 of the template corpus, `name NUL body NUL` in name order.
pub const CORPUS_SHA256: &str = "7ec02744c2140208b7caa7d950c8d4c35534c70adf30216a877459d23d93f5da";

pub struct Recorder {
    pub inner: MockProvider,
    pub requests: Mutex<Vec<TextRequest>>,
}

impl ModelProvider for Recorder {
    fn complete_json(&self, request: &TextRequest) -> Result<Value, ProviderError> {
        self.requests.lock().unwrap().push(request.clone());
        self.inner.complete_json(request)
    }

    fn generate_image(&self, request: &ImageRequest) -> Result<ImageRef, ProviderError> {
        self.inner.generate_image(request)
    }
}

pub fn template_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/templates")
}

pub fn on_disk() -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(template_dir()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_stem().unwrap().to_str().unwrap().to_string();
        out.insert(name, std::fs::read_to_string(&path).unwrap());
    }
    out
}

/// Independent renderer: replaces `{name}` for every bound name.
pub fn naive_render(body: &str, bindings: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    let mut rest = body;
    'outer: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (k, v) in bindings {
            let slot = format!("{{{k}}}");
            if tail.starts_with(&slot) {
                out.push_str(v);
                rest = &tail[slot.len()..];
                continue 'outer;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

pub fn exercise(pipeline: &Pipeline) {
    let style = StyleId::default();
    let personas = pipeline.generate_personas("Design context: Sustainable packaging", 3).unwrap();
    let problems = pipeline.generate_problems("Personas: Sustainability-Seeking Sara", 3).unwrap();
    let solutions = pipeline.generate_solutions("Problems: packaging waste", 3).unwrap();
    pipeline.regenerate_personas(&personas, "Regenerating personas based on updated problems.").unwrap();
    pipeline.regenerate_problems(&problems, "Regenerating problems based on updated personas.").unwrap();
    pipeline.regenerate_solutions(&solutions, "Regenerating solutions based on updated problems.").unwrap();

    let description = pipeline.visual_character_description(&personas[0]).unwrap();
    let mut all: Vec<ArtifactContent> = vec![personas[0].clone(), problems[0].clone(), solutions[0].clone()];
    let inputs = StoryboardInputs::from_contents(&all);
    let board = pipeline
        .build_storyboard(&inputs, std::slice::from_ref(&description), &style)
        .unwrap()
        .content;
    pipeline.illustrative_image(&problems[0], &[], &style).unwrap();
    pipeline.illustrative_image(&solutions[0], &[], &style).unwrap();
    all.push(ArtifactContent::Storyboard(board));

    for item in &all {
        pipeline.feedback_questions(&[item]).unwrap();
        pipeline.guidance_suggestions(&[item], GuidanceMode::More).unwrap();
    }
    pipeline.feedback_questions(&[&all[0], &all[1]]).unwrap();
    pipeline.revision_suggestions(&[&all[0]]).unwrap();
    for item in &all[..3] {
        pipeline.guidance_suggestions(&[item], GuidanceMode::Next).unwrap();
    }
}

/// `name NUL body NUL` over the on-disk corpus in name order.
pub fn disk_digest() -> String {
    let mut hasher = Sha256::new();
    for (name, body) in on_disk() {
        hasher.update(name.as_bytes());
        hasher.update([0]);
        hasher.update(body.as_bytes());
        hasher.update([0]);
    }
    hex::encode(hasher.finalize())
}

pub fn check_corpus() -> Result<(), String> {
    let disk = on_disk();
    if disk.len() != 25 || BUILTIN.len() != 25 {
        return Err(format!("expected 25 templates, disk has {} and builtin {}", disk.len(), BUILTIN.len()));
    }
    for (name, body) in BUILTIN {
        if disk.get(*name).map(String::as_str) != Some(*body) {
            return Err(format!("{name} differs from its file"));
        }
    }
    let loaded = TemplateCorpus::load_dir(&template_dir()).map_err(|e| e.to_string())?;
    if loaded != TemplateCorpus::builtin() {
        return Err("loaded corpus differs from the builtin corpus".into());
    }
    let digest = disk_digest();
    if digest != TemplateCorpus::builtin().checksum() || digest != CORPUS_SHA256 {
        return Err(format!("checksum {digest} is not the pinned {CORPUS_SHA256}"));
    }
    Ok(())
}

/// Renders every template through the pipeline and checks that each prompt
/// equals the independent rendering and strips back to its template body.
pub fn check_prompts() -> Result<(), String> {
    let recorder = Arc::new(Recorder {
        inner: MockProvider::new(11),
        requests: Mutex::new(Vec::new()),
    });
    let pipeline = Pipeline::new(recorder.clone()).sequential();
    exercise(&pipeline);

    let disk = on_disk();
    let corpus = TemplateCorpus::builtin();
    let system_body = &disk["system_json_schema"];
    let system = corpus.get("system_json_schema").map_err(|e| e.to_string())?;
    let requests = recorder.requests.lock().unwrap().clone();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for request in &requests {
        let name = &request.template;
        let body = disk.get(name).ok_or_else(|| format!("unknown template {name}"))?;
        if naive_render(body, &request.bindings) != request.user_prompt {
            return Err(format!("{name}: rendered prompt differs from the independent rendering"));
        }
        let template = corpus.get(name).map_err(|e| e.to_string())?;
        if template.strip_bindings(&request.user_prompt).as_deref() != Some(body.as_str()) {
            return Err(format!("{name}: prompt does not strip back to the template"));
        }
        if system.strip_bindings(&request.system_prompt).as_deref() != Some(system_body.as_str()) {
            return Err(format!("{name}: system prompt does not strip back to system_json_schema"));
        }
        *seen.entry(name.clone()).or_default() += 1;
        *seen.entry("system_json_schema".into()).or_default() += 1;
    }
    let missing: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).filter(|n| !seen.contains_key(*n)).collect();
    if !missing.is_empty() {
        return Err(format!("templates never rendered: {missing:?}"));
    }
    Ok(())
}
