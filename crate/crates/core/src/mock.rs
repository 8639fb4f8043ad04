//! Deterministic, seedable stand-in for the text and image models.
//!
//! Outputs depend only on the seed and the request, so identical requests
//! always produce identical responses. Every call is appended to a trace that
//! tests use as a call-count oracle. A small library of canned responses
//! reproduces the named examples from the reference scenarios (urban
//! sustainability, sustainable packaging, financial literacy); anything else
//! gets generic but well-formed content.

use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::artifact::{ArtifactKind, ImageRef};
use crate::provider::{ImageRequest, ModelProvider, ProviderError, TextRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CallKind {
    Text,
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CallRecord {
    pub kind: CallKind,
    /// Template name for text calls, `"image"` for image calls.
    pub template: String,
    /// SHA-256 of the bindings (text) or prompt triple (image), hex encoded.
    pub bindings_hash: String,
    /// The user prompt or image prompt as sent.
    pub prompt: String,
}

struct Failure {
    kind: CallKind,
    needle: String,
    remaining: usize,
}

struct Override {
    template: String,
    needle: String,
    response: Value,
}

pub struct MockProvider {
    seed: u64,
    outline_frames: AtomicUsize,
    overrides: Mutex<Vec<Override>>,
    failures: Mutex<Vec<Failure>>,
    trace: Mutex<Vec<CallRecord>>,
}

impl Default for MockProvider {
    fn default() -> Self {
        MockProvider::new(0)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(parts: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0xff]);
    }
    h.finalize().into()
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        MockProvider {
            seed,
            outline_frames: AtomicUsize::new(4),
            overrides: Mutex::new(Vec::new()),
            failures: Mutex::new(Vec::new()),
            trace: Mutex::new(Vec::new()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of frames the mock puts in storyboard outlines.
    pub fn set_outline_frames(&self, frames: usize) {
        self.outline_frames.store(frames, Ordering::SeqCst);
    }

    /// Answers text calls to `template` whose user prompt contains `needle`
    /// with `response`. Later registrations win.
    pub fn respond_when(&self, template: impl Into<String>, needle: impl Into<String>, response: Value) {
        self.overrides.lock().push(Override {
            template: template.into(),
            needle: needle.into(),
            response,
        });
    }

    /// Fails the next `times` text calls whose user prompt contains `needle`.
    pub fn fail_text_when(&self, needle: impl Into<String>, times: usize) {
        self.failures.lock().push(Failure {
            kind: CallKind::Text,
            needle: needle.into(),
            remaining: times,
        });
    }

    /// Fails the next `times` image calls whose prompt contains `needle`.
    pub fn fail_image_when(&self, needle: impl Into<String>, times: usize) {
        self.failures.lock().push(Failure {
            kind: CallKind::Image,
            needle: needle.into(),
            remaining: times,
        });
    }

    pub fn clear_failures(&self) {
        self.failures.lock().clear();
    }

    pub fn trace(&self) -> Vec<CallRecord> {
        self.trace.lock().clone()
    }

    pub fn clear_trace(&self) {
        self.trace.lock().clear();
    }

    pub fn text_calls(&self) -> usize {
        self.trace.lock().iter().filter(|c| c.kind == CallKind::Text).count()
    }

    pub fn image_calls(&self) -> usize {
        self.trace.lock().iter().filter(|c| c.kind == CallKind::Image).count()
    }

    /// Number of text calls made with the given template.
    pub fn calls_to(&self, template: &str) -> usize {
        self.trace.lock().iter().filter(|c| c.template == template).count()
    }

    fn check_failure(&self, kind: CallKind, haystack: &str) -> Result<(), ProviderError> {
        let mut failures = self.failures.lock();
        if let Some(f) = failures
            .iter_mut()
            .find(|f| f.kind == kind && f.remaining > 0 && haystack.contains(&f.needle))
        {
            f.remaining -= 1;
            return Err(ProviderError::Injected(format!("mock failure on {:?}", f.needle)));
        }
        Ok(())
    }

    fn rng_for(&self, parts: &[&str]) -> ChaCha8Rng {
        let seed = self.seed.to_string();
        let mut all: Vec<&str> = vec![&seed];
        all.extend_from_slice(parts);
        ChaCha8Rng::from_seed(digest(&all))
    }
}

impl ModelProvider for MockProvider {
    fn complete_json(&self, request: &TextRequest) -> Result<Value, ProviderError> {
        let bindings_json = serde_json::to_string(&request.bindings).unwrap_or_default();
        self.trace.lock().push(CallRecord {
            kind: CallKind::Text,
            template: request.template.clone(),
            bindings_hash: hex(&digest(&[&request.template, &bindings_json])),
            prompt: request.user_prompt.clone(),
        });
        self.check_failure(CallKind::Text, &request.user_prompt)?;

        if let Some(o) = self
            .overrides
            .lock()
            .iter()
            .rev()
            .find(|o| o.template == request.template && request.user_prompt.contains(&o.needle))
        {
            return Ok(o.response.clone());
        }

        let mut rng = self.rng_for(&[&request.template, &bindings_json]);
        let b = |k: &str| request.bindings.get(k).map(String::as_str).unwrap_or("");
        let value = match request.template.as_str() {
            "generate_personas" => generate_ideas(ArtifactKind::Persona, b("context"), count(b("numberOfVariations")), &mut rng),
            "generate_problems" => generate_ideas(ArtifactKind::Problem, b("context"), count(b("numberOfVariations")), &mut rng),
            "generate_solutions" => generate_ideas(ArtifactKind::Solution, b("context"), count(b("numberOfVariations")), &mut rng),
            "regenerate_personas" => regenerate(ArtifactKind::Persona, b("personas"), b("context")),
            "regenerate_problems" => regenerate(ArtifactKind::Problem, b("problems"), b("context")),
            "regenerate_solutions" => regenerate(ArtifactKind::Solution, b("solutions"), b("context")),
            "generate_storyboard_outline" => outline(b("context"), self.outline_frames.load(Ordering::SeqCst)),
            "generate_storyboard_image_prompts" => image_prompts(b("frames"), b("visualCharacterDescriptions"), count(b("numFrames"))),
            "generate_illustrative_image_prompt" => illustrative_prompt(b("idea"), false),
            "generate_problem_illustrative_image_prompt" => illustrative_prompt(b("problem"), true),
            "generate_visual_character_description" => character(b("idea"), &mut rng),
            "persona_feedback" => questions(b("persona")),
            "problem_feedback" => questions(b("problem")),
            "solution_feedback" => questions(b("solution")),
            "storyboard_feedback" => questions(b("storyboard")),
            "group_feedback" => group_questions(b("nodes")),
            "revise_node_recommendations" => revise_suggestions(b("nodes"), &mut rng),
            t if t.starts_with("recommend_") => guidance_suggestions(t, &mut rng),
            other => {
                return Err(ProviderError::Malformed(format!("mock has no responder for {other}")));
            }
        };
        Ok(value)
    }

    fn generate_image(&self, request: &ImageRequest) -> Result<ImageRef, ProviderError> {
        let hash = digest(&[
            &self.seed.to_string(),
            &request.prompt,
            &request.negative_prompt,
            request.style.as_str(),
        ]);
        self.trace.lock().push(CallRecord {
            kind: CallKind::Image,
            template: "image".into(),
            bindings_hash: hex(&hash),
            prompt: request.prompt.clone(),
        });
        self.check_failure(CallKind::Image, &request.prompt)?;
        ImageRef::new(format!("mock://images/{}/{}.png", request.style, hex(&hash[..8])))
            .map_err(|e| ProviderError::Malformed(e.to_string()))
    }
}

fn count(s: &str) -> usize {
    s.trim().parse().unwrap_or(1)
}

fn persona(name: &str, location: &str, bio: &str, needs: &str, challenges: &str, description: &str) -> Value {
    json!({
        "name": name, "location": location, "bio": bio,
        "needs": needs, "challenges": challenges, "description": description
    })
}

fn problem(title: &str, context: &str, stakeholders: &str, objectives: &str) -> Value {
    json!({ "title": title, "context": context, "stakeholders": stakeholders, "objectives": objectives })
}

fn solution(title: &str, problems_addressed: &str, key_features: &str, benefits: &str) -> Value {
    json!({
        "title": title, "problemsAddressed": problems_addressed,
        "keyFeatures": key_features, "benefits": benefits
    })
}

/// Canned idea lists keyed by a lower-case context needle. Checked in order,
/// so more specific needles come first.
fn canned_ideas(kind: ArtifactKind, context: &str) -> Option<Vec<Value>> {
    let ctx = context.to_lowercase();
    let has = |needle: &str| ctx.contains(needle);
    match kind {
        ArtifactKind::Persona if has("packaging") => Some(vec![
            persona("Sustainability-Seeking Sara", "Seattle, WA 🌧️", "Young professional who cares about the environment 🌱",
                "Groceries without single-use plastic", "Struggles to find eco-friendly packaging at her local grocery store",
                "Brings her own bags and checks every label"),
            persona("Budget-Balancing Ben", "Columbus, OH", "Father of three who shops in bulk 🛒",
                "Affordable sustainable options", "Green products cost more", "Compares unit prices on every trip"),
            persona("Zero-Waste Zoe", "Austin, TX 🌵", "College student running a campus zero-waste club ♻️",
                "Refill stations near campus", "Limited time and transport", "Plans meals around bulk bins"),
        ]),
        ArtifactKind::Persona if has("sustainab") => Some(vec![
            persona("Eco Emily", "Portland, OR 🚲", "Graphic designer who bikes to the farmers' market 🥕",
                "Easy ways to cut household waste ♻️", "Finding eco-friendly stores", "Shops weekly with reusable bags"),
            persona("Green Gary", "Denver, CO", "Retired engineer tending a balcony garden 🌿",
                "Reliable composting options", "Few drop-off points in the city", "Tracks his energy use in a notebook"),
            persona("Solar Sofia", "Phoenix, AZ ☀️", "Small business owner exploring rooftop solar",
                "Clear cost and payback numbers", "Confusing incentive programs", "Reads reviews before any purchase"),
        ]),
        ArtifactKind::Persona if has("phd students") => Some(vec![
            persona("Prolific Peter", "Toronto, ON", "PhD student who publishes at CHI and UIST 📄",
                "Faster literature reviews", "Keeping up with hundreds of new papers", "Lives in his reference manager"),
        ]),
        ArtifactKind::Problem if has("packaging") => Some(vec![
            problem("Limited availability of sustainable packaging options in grocery stores",
                "Most groceries come wrapped in single-use plastic 🛍️", "Shoppers, grocery chains, suppliers",
                "Make low-waste packaging the easy default"),
            problem("Higher prices for eco-friendly packaged goods", "Green options often cost 20% more 💸",
                "Budget-conscious families", "Close the price gap for sustainable products"),
            problem("Confusing recycling labels on food packaging", "Shoppers cannot tell what is recyclable",
                "Households, municipal recycling programs", "Reduce contamination in recycling streams"),
        ]),
        ArtifactKind::Problem if has("financ") => Some(vec![
            problem("Low Financial Literacy in Young Adults", "Many young adults leave school without money skills 💳",
                "Young adults, educators, banks", "Build everyday money confidence"),
        ]),
        ArtifactKind::Solution if has("biodegradable packaging") => Some(vec![
            solution("Reusable Packaging Programs", "Single-use plastic waste", "Deposit-based containers returned at checkout 🔁",
                "Less waste, loyal customers"),
            solution("Plant-based Packaging", "Limited sustainable packaging options", "Compostable trays and wraps made from plant fibers 🌿",
                "Breaks down in weeks instead of centuries"),
            solution("Compostable Produce Bags", "Plastic produce bags", "Bags that go straight into home compost",
                "Easy swap with no behavior change"),
            solution("Seaweed-based Wraps", "Plastic film on fresh food", "Edible, biodegradable seaweed film 🌊",
                "Zero residue packaging"),
        ]),
        ArtifactKind::Solution if has("urban gardening workshops") => Some(vec![
            solution("Community Clean-Up Drives", "Neighborhood litter", "Monthly volunteer clean-ups with local groups", "Cleaner streets and stronger ties"),
            solution("Sustainable Living Clinics", "Lack of practical know-how", "Drop-in clinics on composting and repair", "Hands-on skills for residents"),
            solution("Recycling Awareness Programs", "Recycling contamination", "Door-to-door education and clear sorting guides ♻️", "Higher recycling rates"),
            solution("Eco-Friendly Product Demos", "Unfamiliarity with green products", "In-store demos of refillable and low-waste products", "Lower barrier to switching"),
        ]),
        ArtifactKind::Solution if has("packaging") => Some(vec![
            solution("Bulk Refill Stations", "Over-packaged staples", "Self-serve bins with weigh-and-pay scales", "Buy only what you need"),
            solution("Packaging Take-Back Bins", "Packaging that ends up in landfill", "In-store drop-off for clean packaging 📦",
                "Closes the loop with suppliers"),
            solution("Sustainable Packaging Labels", "Hard-to-spot eco options", "Shelf tags that flag low-waste packaging 🏷️",
                "Faster, more confident choices"),
        ]),
        ArtifactKind::Solution if has("sustainab") => Some(vec![
            solution("Urban Gardening Workshops", "Limited access to fresh local food", "Weekend workshops on balcony and rooftop gardens 🌱",
                "Fresh food and community connections"),
            solution("Neighborhood Compost Hubs", "Food waste sent to landfill", "Shared compost bins on every block", "Less landfill waste"),
            solution("Green Commute Challenges", "Car-dependent commuting", "Team challenges logging bike and transit trips 🚲", "Healthier, cleaner commutes"),
        ]),
        _ => None,
    }
}

const NAME_POOL: &[&str] = &[
    "Busy Ben", "Curious Carla", "Diligent Dana", "Frugal Frank", "Gentle George", "Hopeful Hana", "Careful Cathy",
    "Mindful Maya", "Practical Priya", "Thoughtful Theo", "Resourceful Rosa", "Adventurous Alex", "Lively Leo",
    "Patient Paula", "Witty Wes", "Organized Olivia",
];
const LOCATION_POOL: &[&str] = &[
    "Austin, TX", "San Francisco, CA", "Chicago, IL", "Toronto, ON", "Boston, MA", "Atlanta, GA", "Denver, CO",
    "Seattle, WA",
];

/// First meaningful line of a context binding, trimmed to a short phrase.
fn topic(context: &str) -> String {
    let line = context
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('[') && !l.starts_with('{'))
        .unwrap_or("everyday life");
    let line = match line.split_once(": ") {
        Some((_, rest)) if !rest.trim().is_empty() => rest.trim(),
        _ => line,
    };
    let short: String = line.chars().take(48).collect();
    short.trim_end_matches(['.', ':', '!', '?', ' ']).to_string()
}

fn generic_idea(kind: ArtifactKind, topic: &str, index: usize, rng: &mut ChaCha8Rng) -> Value {
    let lower = topic.to_lowercase();
    match kind {
        ArtifactKind::Persona => {
            let name = NAME_POOL[index % NAME_POOL.len()];
            let name = if index >= NAME_POOL.len() {
                format!("{name} {}", index / NAME_POOL.len() + 1)
            } else {
                name.to_string()
            };
            let location = LOCATION_POOL[rng.gen_range(0..LOCATION_POOL.len())];
            persona(
                &name,
                location,
                &format!("Someone whose day-to-day touches {lower}"),
                &format!("Simple, trustworthy help with {lower}"),
                &format!("Too little time to keep up with {lower}"),
                &format!("Represents people affected by {lower}"),
            )
        }
        ArtifactKind::Problem => {
            let templates = [
                "Limited access to reliable resources for {}",
                "Difficulty fitting {} into a busy schedule",
                "Lack of trusted guidance about {}",
                "High cost of getting started with {}",
                "Fragmented tools for managing {}",
            ];
            let title = templates[index % templates.len()].replace("{}", &lower);
            problem(&title, &format!("Observed around {lower}"), "End users and their communities", &format!("Make {lower} easier to act on"))
        }
        _ => {
            let templates = [
                "{} Companion App",
                "Community {} Workshops",
                "{} Starter Kits",
                "Peer Mentoring Circles for {}",
                "{} Progress Dashboard",
            ];
            let title = templates[index % templates.len()].replace("{}", topic);
            solution(&title, &format!("Barriers around {lower}"), "Guided steps, reminders and shared tips", "Faster progress with less effort")
        }
    }
}

fn generate_ideas(kind: ArtifactKind, context: &str, n: usize, rng: &mut ChaCha8Rng) -> Value {
    let canned = canned_ideas(kind, context).unwrap_or_default();
    let topic = topic(context);
    let mut offsets: Vec<usize> = (0..16).collect();
    offsets.shuffle(rng);
    let mut items: Vec<Value> = canned.into_iter().take(n).collect();
    let mut i = 0;
    while items.len() < n {
        items.push(generic_idea(kind, &topic, offsets[i % offsets.len()] + i / offsets.len() * 16, rng));
        i += 1;
    }
    json!({ kind.plural(): items })
}

fn headline_key(kind: ArtifactKind) -> &'static str {
    if kind == ArtifactKind::Persona {
        "name"
    } else {
        "title"
    }
}

/// `"X"` → `"X (v2)"`, `"X (v2)"` → `"X (v3)"`.
pub fn bump_version(text: &str) -> String {
    if let Some(open) = text.rfind(" (v") {
        let inner = &text[open + 3..];
        if let Some(num) = inner.strip_suffix(')') {
            if let Ok(v) = num.parse::<u32>() {
                return format!("{} (v{})", &text[..open], v + 1);
            }
        }
    }
    format!("{text} (v2)")
}

fn canned_revision(kind: ArtifactKind, item: &Map<String, Value>, context: &str) -> Option<Map<String, Value>> {
    let headline = item.get(headline_key(kind)).and_then(Value::as_str).unwrap_or("");
    if kind == ArtifactKind::Problem
        && headline == "Low Financial Literacy in Young Adults"
        && context.contains("Credit management and debt accumulation")
    {
        let mut out = item.clone();
        out.insert("title".into(), json!("Financial Literacy on Credit Management in Young Adults"));
        out.insert("context".into(), json!("Young adults take on credit cards and loans without understanding interest 💳"));
        out.insert("objectives".into(), json!("Teach credit management and how to avoid debt accumulation"));
        return Some(out);
    }
    None
}

fn regenerate(kind: ArtifactKind, items: &str, context: &str) -> Value {
    let parsed: Vec<Value> = serde_json::from_str(items).unwrap_or_default();
    let key = headline_key(kind);
    let out: Vec<Value> = parsed
        .into_iter()
        .map(|item| {
            let Value::Object(obj) = item else { return item };
            if let Some(revised) = canned_revision(kind, &obj, context) {
                return Value::Object(revised);
            }
            let mut obj = obj;
            let headline = obj.get(key).and_then(Value::as_str).unwrap_or("").to_string();
            let base = if headline.trim().is_empty() {
                format!("Untitled {}", kind.as_str())
            } else {
                headline.clone()
            };
            for (field, value) in obj.iter_mut() {
                if field != key && value.as_str().is_some_and(|s| s.trim().is_empty()) {
                    *value = json!(format!("{} for {}", field_label(field), base));
                }
            }
            obj.insert(key.into(), json!(bump_version(&base)));
            Value::Object(obj)
        })
        .collect();
    json!({ kind.plural(): out })
}

fn field_label(field: &str) -> String {
    let mut out = String::new();
    for (i, c) in field.chars().enumerate() {
        if c.is_uppercase() {
            out.push(' ');
            out.extend(c.to_lowercase());
        } else if i == 0 {
            out.extend(c.to_uppercase());
        } else {
            out.push(c);
        }
    }
    out
}

/// Value of the first `"key": "..."` pair found in text containing JSON.
fn scan_field(text: &str, key: &str) -> Option<String> {
    let pattern = format!("\"{key}\":");
    let start = text.find(&pattern)? + pattern.len();
    let rest = text[start..].trim_start();
    let rest = rest.strip_prefix('"')?;
    let mut out = String::new();
    let mut escaped = false;
    for c in rest.chars() {
        match (escaped, c) {
            (true, c) => {
                out.push(c);
                escaped = false;
            }
            (false, '\\') => escaped = true,
            (false, '"') => return Some(out),
            (false, c) => out.push(c),
        }
    }
    None
}

fn outline(context: &str, frames: usize) -> Value {
    let frames = frames.max(1);
    let person = scan_field(context, "name").unwrap_or_else(|| "Sam".into());
    let first_name = person.split_whitespace().last().unwrap_or("Sam").to_string();
    let solution = context
        .find("Solutions:")
        .and_then(|at| scan_field(&context[at..], "title"))
        .or_else(|| scan_field(context, "title"))
        .unwrap_or_else(|| "the new idea".into());
    let title = if context.contains("Plant-based Packaging") {
        "A grocery shopper discovers plant-based packaging and finally shops without plastic guilt.".to_string()
    } else {
        format!("A story about how {solution} helps {first_name} get unstuck.")
    };
    let list: Vec<Value> = (0..frames)
        .map(|i| {
            let frame_type = if i == 0 {
                "context"
            } else if i + 1 == frames {
                "resolution"
            } else if i <= (frames - 1) / 2 {
                "problem"
            } else {
                "solution"
            };
            let (description, caption) = match frame_type {
                "context" => (
                    format!("{person} goes about a normal day, showing their routine and surroundings."),
                    format!("Meet {first_name}."),
                ),
                "problem" => (
                    format!("{person} runs into the problem and looks frustrated (beat {i})."),
                    format!("{first_name} hits a wall."),
                ),
                "solution" => (
                    format!("{person} discovers {solution} and tries it for the first time (beat {i})."),
                    format!("{first_name} tries {solution}."),
                ),
                _ => (
                    format!("{person} smiles, the problem resolved thanks to {solution}."),
                    format!("{first_name} is relieved."),
                ),
            };
            json!({ "frameType": frame_type, "description": description, "caption": caption })
        })
        .collect();
    json!({ "title": title, "frames": list })
}

fn image_prompts(frames: &str, characters: &str, expected: usize) -> Value {
    let frames: Vec<Value> = serde_json::from_str(frames).unwrap_or_default();
    let characters: Vec<Value> = serde_json::from_str(characters).unwrap_or_default();
    let names: Vec<String> = characters
        .iter()
        .filter_map(|c| c.get("characterName").and_then(Value::as_str).map(str::to_string))
        .collect();
    let cast = if names.is_empty() {
        String::new()
    } else {
        format!("({}:0.9), ", names.join(", "))
    };
    let shots = ["wide shot", "medium shot", "close-up", "medium shot"];
    let list: Vec<Value> = (0..expected)
        .map(|i| {
            let description = frames
                .get(i)
                .and_then(|f| f.get("description"))
                .and_then(Value::as_str)
                .unwrap_or("a quiet scene");
            json!({
                "imagePrompt": format!("{}, {cast}{description}, soft daylight", shots[i % shots.len()]),
                "imageNegativePrompt": "blurry, extra fingers, distorted faces, text, watermark"
            })
        })
        .collect();
    json!({ "frames": list })
}

fn illustrative_prompt(idea: &str, is_problem: bool) -> Value {
    let subject = scan_field(idea, "name")
        .or_else(|| scan_field(idea, "title"))
        .unwrap_or_else(|| "an idea".into());
    let prompt = if is_problem {
        format!("A person visibly struggling with {subject}, muted colors, empathetic framing")
    } else {
        format!("A visual metaphor for {subject}, bright flat illustration")
    };
    json!({ "imagePrompt": prompt, "imageNegativePrompt": "text, watermark, logos" })
}

fn character(idea: &str, rng: &mut ChaCha8Rng) -> Value {
    let name = scan_field(idea, "name")
        .or_else(|| scan_field(idea, "title").map(|t| format!("User of {t}")))
        .unwrap_or_else(|| "Main Character".into());
    let hair = ["short black hair", "curly red hair", "long brown hair", "silver buzz cut"];
    let outfit = ["green rain jacket", "denim overalls", "navy hoodie", "yellow cardigan"];
    let description = format!(
        "{name}: {}, {}, warm expression, carries a canvas tote",
        hair[rng.gen_range(0..hair.len())],
        outfit[rng.gen_range(0..outfit.len())]
    );
    json!({ "characterName": name, "description": description })
}

fn questions(node: &str) -> Value {
    if node.contains("Low Financial Literacy in Young Adults") {
        return json!({ "questions": [
            "What current financial literacy initiatives are in place?",
            "Are there specific financial topics that young adults struggle with?",
            "How do young adults currently learn about money management?"
        ]});
    }
    if node.contains("Limited availability of sustainable packaging options in grocery stores") {
        return json!({ "questions": [
            "What economic challenges do grocery stores face when transitioning to sustainable packaging?",
            "Which product categories have the fewest sustainable packaging options?",
            "How do shoppers currently react when no sustainable option is available?"
        ]});
    }
    let subject = scan_field(node, "name")
        .or_else(|| scan_field(node, "title"))
        .unwrap_or_else(|| "this idea".into());
    json!({ "questions": [
        format!("What information is missing from \"{subject}\" that could be useful?"),
        format!("Is \"{subject}\" consistent with the evidence you have gathered?"),
        format!("What alternatives to \"{subject}\" might be worth considering?")
    ]})
}

fn group_questions(nodes: &str) -> Value {
    let parsed: Vec<Value> = serde_json::from_str(nodes).unwrap_or_default();
    let mut out: Vec<String> = parsed
        .iter()
        .filter_map(|n| {
            n.get("name")
                .or_else(|| n.get("title"))
                .and_then(Value::as_str)
                .map(|s| format!("How does \"{s}\" relate to the other selected nodes?"))
        })
        .collect();
    out.push("Which of these nodes best reflects real user needs?".into());
    json!({ "questions": out })
}

fn revise_suggestions(nodes: &str, rng: &mut ChaCha8Rng) -> Value {
    let mut pool = [
        "Partner with local schools for youth engagement",
        "Add virtual workshops to increase participation",
        "Narrow the focus to first-time users",
        "Add a concrete metric for success",
        "Mention a budget constraint",
    ];
    if !nodes.contains("Partner with local schools") {
        pool[1..].shuffle(rng);
    }
    json!({ "suggestions": pool[..3] })
}

fn guidance_suggestions(template: &str, rng: &mut ChaCha8Rng) -> Value {
    let mut pool: Vec<&str> = match template {
        "recommend_more_personas" => vec!["People in the same state", "Retirees", "Remote workers", "Students"],
        "recommend_problems" | "recommend_more_problems" => vec!["Cost barriers", "Time pressure", "Lack of information", "Accessibility"],
        "recommend_solutions" | "recommend_more_solutions" => vec!["Mobile app", "Community program", "Physical kit", "Policy change"],
        _ => vec!["A day in the life", "Before and after", "First-time experience", "Team adoption"],
    };
    pool.shuffle(rng);
    json!({ "suggestions": pool[..3] })
}
