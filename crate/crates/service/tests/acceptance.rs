//! Acceptance suite: one PASS/FAIL line per criterion, each with a pinned
//! time budget. Runs as a plain binary (`harness = false`).

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use storyloom_core::artifact::{ArtifactContent, ArtifactKind, ProblemContent, SolutionContent};
use storyloom_core::generation::{GenerationError, StoryboardInputs};
use storyloom_core::graph::Position;
use storyloom_core::workspace::{compute_metrics, load_workspace, save_workspace, LogicalClock};
use storyloom_core::{BrainstormSpec, MockProvider, NodeId, Pipeline, Studio, Workspace};

const GRAPH_CASES: u64 = 10_000;
const GRAPH_MAX_NODES: usize = 50;
const PROPAGATION_CASES: u64 = 1_000;
const PERSISTENCE_CASES: u64 = 1_000;
const FRAME_COUNTS: std::ops::RangeInclusive<usize> = 4..=8;
const SCRIPT_SEED: &str = "42";
const SCRIPT_CONTEXT: &str = "Sustainable packaging solutions for reducing plastic waste";

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn studio(seed: u64) -> (Arc<MockProvider>, Studio) {
    let mock = Arc::new(MockProvider::new(seed));
    let ws = Workspace::new("acceptance", Some(seed));
    let s = Studio::new(ws, Pipeline::new(mock.clone()), Box::new(LogicalClock::starting_at(0)));
    (mock, s)
}

fn template_fidelity() -> Check {
    common::fidelity::check_corpus()?;
    common::fidelity::check_prompts()?;
    Ok(format!("25 templates, sha256 {}", &common::fidelity::CORPUS_SHA256[..12]))
}

fn graph_laws() -> Check {
    for seed in 0..GRAPH_CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_graph(&mut rng, GRAPH_MAX_NODES).map_err(|e| format!("seed {seed}: {e}"))?;
        common::check_graph_laws(&g).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(format!("{GRAPH_CASES} graphs of at most {GRAPH_MAX_NODES} nodes"))
}

fn propagation_soundness() -> Check {
    for seed in 0..PROPAGATION_CASES {
        common::check_propagation(seed).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(format!("{PROPAGATION_CASES} chain/diamond designs"))
}

fn storyboard_pipeline() -> Check {
    for frames in FRAME_COUNTS {
        let (mock, mut s) = studio(frames as u64);
        s.brainstorm(&BrainstormSpec::new("Sustainable packaging", ArtifactKind::Solution))
            .map_err(|e| e.to_string())?;
        let solution = s.resolve("@Bulk Refill Stations").map_err(|e| e.to_string())?;
        mock.set_outline_frames(frames);
        mock.clear_trace();
        let (_, build) = s.build_storyboard(&[solution], None).map_err(|e| e.to_string())?;
        let shape = (
            build.content.frames.len(),
            mock.calls_to("generate_storyboard_outline"),
            mock.calls_to("generate_storyboard_image_prompts"),
            mock.text_calls(),
            mock.image_calls(),
        );
        ensure(shape == (frames, 1, 1, 2, frames), || {
            format!("F={frames}: (frames, outline, image-prompt, text, image) calls = {shape:?}")
        })?;
    }
    let mock = Arc::new(MockProvider::new(1));
    let pipeline = Pipeline::new(mock.clone());
    mock.set_outline_frames(3);
    let solution = ArtifactContent::Solution(SolutionContent {
        title: "Refill stations".into(),
        ..Default::default()
    });
    let err = pipeline.build_storyboard(&StoryboardInputs::from_contents([&solution]), &[], &Default::default());
    ensure(matches!(err, Err(GenerationError::Schema(_))), || format!("3-frame outline gave {err:?}"))?;
    ensure(mock.image_calls() == 0, || "rejected outline still requested images".into())?;
    Ok("F in 4..=8 gives 1 + 1 + F calls; 3 frames rejected".into())
}

fn feedback_title_rewrite() -> Check {
    const BEFORE: &str = "Low Financial Literacy in Young Adults";
    const AFTER: &str = "Financial Literacy on Credit Management in Young Adults";
    let (_, mut s) = studio(2);
    let problem = s
        .add_node(
            ArtifactContent::Problem(ProblemContent {
                title: BEFORE.into(),
                context: "Young adults entering the workforce".into(),
                stakeholders: "Young adults, educators".into(),
                objectives: "Improve money management".into(),
                image: None,
            }),
            Position::ORIGIN,
        )
        .map_err(|e| e.to_string())?;
    let questions = s.generate_feedback(&[problem]).map_err(|e| e.to_string())?;
    let q = questions
        .iter()
        .find(|q| q.text == "Are there specific financial topics that young adults struggle with?")
        .ok_or("the credit-management question was not generated")?;
    let change = s
        .incorporate_feedback(&q.id, "Credit management and debt accumulation")
        .map_err(|e| e.to_string())?;
    let title = change.diff.get("title").ok_or("title did not change")?;
    ensure(title.old_value == BEFORE && title.new_value == AFTER, || {
        format!("{:?} -> {:?}", title.old_value, title.new_value)
    })?;
    ensure(!title.changed_spans.is_empty(), || "empty word diff".into())?;
    Ok(format!("{} changed word span(s)", title.changed_spans.len()))
}

fn generation_shapes() -> Check {
    let (_, mut s) = studio(3);
    let persona = s
        .add_node(ArtifactContent::empty(ArtifactKind::Persona), Position::ORIGIN)
        .map_err(|e| e.to_string())?;
    let first = s.generate_next(&[persona], None, 3).map_err(|e| e.to_string())?;
    ensure((first.nodes.len(), first.edges.len()) == (3, 3), || {
        format!("1 node, n=3 gave {} nodes / {} edges", first.nodes.len(), first.edges.len())
    })?;
    for (k, n) in [(2, 3), (3, 2), (1, 5), (3, 4)] {
        let selected: Vec<NodeId> = first.nodes[..k].to_vec();
        let next = s.generate_next(&selected, None, n).map_err(|e| e.to_string())?;
        ensure(next.nodes.len() == n && next.edges.len() == k * n, || {
            format!("k={k} n={n} gave {} nodes / {} edges", next.nodes.len(), next.edges.len())
        })?;
    }
    let (_, mut s) = studio(7);
    s.brainstorm(&BrainstormSpec::new("Urban sustainability", ArtifactKind::Storyboard))
        .map_err(|e| e.to_string())?;
    let shape: Vec<usize> = [
        ArtifactKind::Context,
        ArtifactKind::Persona,
        ArtifactKind::Problem,
        ArtifactKind::Solution,
        ArtifactKind::Storyboard,
    ]
    .iter()
    .map(|k| s.graph().nodes().filter(|n| n.kind() == *k).count())
    .collect();
    ensure(shape == [1, 3, 3, 3, 1], || format!("brainstorm shape {shape:?}"))?;
    Ok("3/3, n/k*n, brainstorm 1-3-3-3-1".into())
}

fn cli(dir: &Path, args: &[&str]) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_storyloom"))
        .current_dir(dir)
        .env_remove("PROVIDER_MODE")
        .args(args)
        .args(["--workspace", "ws.json", "--mock", "--seed", SCRIPT_SEED])
        .output()
        .map_err(|e| format!("spawn: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "`{}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| format!("`{}` printed non-JSON output: {e}", args.join(" ")))
}

/// Brainstorm, feedback on Sara, incorporate, generate more from her
/// solution, storyboard from a new solution, forward propagation from Sara.
/// Returns the metrics printed by the CLI.
fn cli_script(dir: &Path) -> Result<Value, String> {
    cli(dir, &["brainstorm", "--context", SCRIPT_CONTEXT, "--to", "solution", "-n", "3"])?;
    let questions = cli(dir, &["feedback", "--node", "@Sustainability-Seeking Sara"])?;
    let question = questions[0]["id"].as_str().ok_or("no feedback question")?.to_string();
    let sara = questions[0]["targets"][0].as_str().ok_or("question has no target")?.to_string();
    cli(
        dir,
        &["incorporate", "--question", &question, "--response", "She is involved in a community recycling program"],
    )?;
    cli(
        dir,
        &["generate-more", "--node", "@Bulk Refill Stations", "--guidance", "biodegradable packaging", "-n", "2"],
    )?;
    cli(dir, &["storyboard", "--node", "@Plant-based Packaging"])?;
    cli(dir, &["propagate", "--node", &sara, "--direction", "fwd"])?;
    cli(dir, &["metrics"])
}

fn scripted_cli_session() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let metrics = cli_script(dir.path())?;
    // Hand count of the script: 1 context + 3 personas + 3 problems + 3
    // solutions from the brainstorm, 2 more solutions, 1 storyboard. The
    // incorporated feedback is the only individual edit. Forward propagation
    // from Sara reaches her problem, the three solutions linked to it and the
    // storyboard: 5 nodes.
    let oracle = json!({
        "nodeCounts": {"context": 1, "persona": 3, "problem": 3, "solution": 5, "storyboard": 1},
        "individualNodeEdits": 1,
        "forwardPropEdits": 1,
        "nodesUpdatedForward": 5,
        "backPropEdits": 0,
        "nodesUpdatedBackward": 0,
        "featureUsage": {
            "Add Node": 0,
            "Backward Propagation": 0,
            "Edit Manually": 0,
            "Forward Propagation": 1,
            "Generate More": 1,
            "Generate Next Node": 0,
            "Illustrative Image": 0,
            "Incorporate Feedback": 1,
            "Regenerate Images": 0,
            "Revise with AI": 0,
            "Single Update": 0,
            "Start Brainstorming": 1,
            "View Feedback": 1
        }
    });
    ensure(metrics == oracle, || format!("metrics {metrics} differ from the hand count {oracle}"))?;
    let bytes = std::fs::read(dir.path().join("ws.json")).map_err(|e| e.to_string())?;
    let ws = load_workspace(&bytes).map_err(|e| e.to_string())?;
    ensure(serde_json::to_value(compute_metrics(&ws.events)).ok() == Some(oracle), || {
        "metrics recomputed from the saved file differ".into()
    })?;
    Ok("forwardPropEdits 1, nodesUpdatedForward 5, Generate More 1".into())
}

fn persistence() -> Check {
    for seed in 0..PERSISTENCE_CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws = common::random_workspace(&mut rng);
        let bytes = save_workspace(&ws);
        let back = load_workspace(&bytes).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(back == ws, || format!("seed {seed}: loaded workspace differs"))?;
        ensure(save_workspace(&back) == bytes, || format!("seed {seed}: re-save is not byte-identical"))?;
        ensure(compute_metrics(&back.events) == compute_metrics(&ws.events), || {
            format!("seed {seed}: metrics changed after reload")
        })?;
    }
    Ok(format!("{PERSISTENCE_CASES} workspaces with feedback, descriptions and events"))
}

fn determinism() -> Check {
    let runs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let snapshot = |dir: &Path| std::fs::read(dir.join("ws.json")).map_err(|e| e.to_string());
    for run in &runs {
        cli(run.path(), &["brainstorm", "--context", "Urban sustainability", "--to", "storyboard"])?;
    }
    ensure(snapshot(runs[0].path())? == snapshot(runs[1].path())?, || "brainstorm outputs differ".into())?;
    let fresh = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for run in &fresh {
        cli_script(run.path())?;
    }
    let (a, b) = (snapshot(fresh[0].path())?, snapshot(fresh[1].path())?);
    ensure(a == b, || "scenario outputs differ".into())?;
    Ok(format!("2 scripts, {} identical bytes", a.len()))
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { name: "template-fidelity", budget: Some(Duration::from_secs(1)), run: template_fidelity },
        Criterion { name: "graph-laws", budget: Some(Duration::from_secs(30)), run: graph_laws },
        Criterion { name: "propagation-soundness", budget: Some(Duration::from_secs(60)), run: propagation_soundness },
        Criterion { name: "storyboard-pipeline", budget: Some(Duration::from_secs(5)), run: storyboard_pipeline },
        Criterion { name: "feedback-title-rewrite", budget: None, run: feedback_title_rewrite },
        Criterion { name: "generation-shapes", budget: None, run: generation_shapes },
        Criterion { name: "scripted-cli-session", budget: Some(Duration::from_secs(10)), run: scripted_cli_session },
        Criterion { name: "persistence", budget: Some(Duration::from_secs(30)), run: persistence },
        Criterion { name: "cli-determinism", budget: None, run: determinism },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let budget = c.budget.map(|b| format!(" / {}s", b.as_secs())).unwrap_or_default();
        let over = c.budget.is_some_and(|b| elapsed > b);
        match outcome {
            Ok(detail) if !over => println!("PASS {:<22} {:>8.3}s{budget}  {detail}", c.name, elapsed.as_secs_f64()),
            Ok(detail) => {
                failed += 1;
                println!("FAIL {:<22} {:>8.3}s{budget}  over budget ({detail})", c.name, elapsed.as_secs_f64());
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {:<22} {:>8.3}s{budget}  {e}", c.name, elapsed.as_secs_f64());
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
