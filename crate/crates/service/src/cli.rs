//! The `storyloom` command-line client. Every command loads a workspace file,
//! applies one operation, saves the file and prints a JSON result.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use storyloom_core::artifact::{ArtifactContent, ArtifactKind};
use storyloom_core::feedback::RevisionInstruction;
use storyloom_core::graph::Position;
use storyloom_core::propagation::Direction;
use storyloom_core::style::StyleId;
use storyloom_core::template::TemplateCorpus;
use storyloom_core::workspace::{export_markdown, load_workspace, save_workspace, ProviderMode};
use storyloom_core::{BrainstormSpec, NodeId, Studio, Workspace};

use crate::api::{self, AppState};
use crate::config::ProviderConfig;
use crate::error::{ErrorBody, ServiceError};
use crate::session::SessionFactory;
use crate::store::{write_atomic, FileStore};

const ACTOR: &str = "cli";

#[derive(Debug, Parser)]
#[command(name = "storyloom", version, about = "Design-graph workspaces with forward and backward propagation")]
pub struct Cli {
    /// Workspace file; created on first use.
    #[arg(long, global = true, default_value = "workspace.json")]
    pub workspace: PathBuf,
    /// Use the offline mock provider.
    #[arg(long, global = true)]
    pub mock: bool,
    /// Seed for ids, the logical clock and the mock provider.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory of prompt templates replacing the built-in set.
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    #[value(alias = "forward")]
    Fwd,
    #[value(alias = "backward")]
    Back,
    Single,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Fwd => Direction::Forward,
            DirectionArg::Back => Direction::Backward,
            DirectionArg::Single => Direction::SingleStep,
        }
    }
}

#[derive(Debug, Args)]
pub struct Selection {
    /// Node id, unique id prefix, or `@` followed by a name or title.
    #[arg(long = "node", required = true)]
    pub nodes: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a chain of stages from a design context.
    Brainstorm {
        #[arg(long)]
        context: String,
        /// Last stage to generate: persona, problem, solution or storyboard.
        #[arg(long, value_parser = parse_kind)]
        to: ArtifactKind,
        #[arg(short, long)]
        n: Option<usize>,
        /// Per-stage guidance as `stage=text`; repeatable.
        #[arg(long, value_parser = parse_guidance)]
        guidance: Vec<(ArtifactKind, String)>,
    },
    /// Add a node. Content comes from `--json` or from `--set` fields.
    Add {
        #[arg(long, value_parser = parse_kind)]
        kind: ArtifactKind,
        #[arg(long, value_parser = parse_assignment)]
        set: Vec<(String, String)>,
        #[arg(long)]
        json: Option<String>,
        #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
        at: Option<Vec<f64>>,
    },
    /// Edit fields of a node; marks its closures dirty.
    Edit {
        #[arg(long)]
        node: String,
        /// `field=value`; storyboard frames use `frames.N.field=value`.
        #[arg(long, required = true, value_parser = parse_assignment)]
        set: Vec<(String, String)>,
    },
    Delete {
        #[arg(long)]
        node: String,
    },
    Connect {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    Disconnect {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// More siblings of the selected nodes.
    GenerateMore {
        #[command(flatten)]
        selection: Selection,
        #[arg(long)]
        guidance: Option<String>,
        #[arg(short, long)]
        n: Option<usize>,
    },
    /// Nodes of the next stage from the selected nodes.
    GenerateNext {
        #[command(flatten)]
        selection: Selection,
        #[arg(long)]
        guidance: Option<String>,
        #[arg(short, long)]
        n: Option<usize>,
    },
    /// Build a storyboard from the selected nodes.
    Storyboard {
        #[command(flatten)]
        selection: Selection,
        #[arg(long)]
        guidance: Option<String>,
    },
    /// Regenerate every frame image of a storyboard.
    RegenerateImages {
        #[arg(long)]
        node: String,
        #[arg(long)]
        style: Option<String>,
    },
    /// Generate feedback questions for the selected nodes.
    Feedback {
        #[command(flatten)]
        selection: Selection,
    },
    /// Answer a feedback question and revise its node.
    Incorporate {
        #[arg(long)]
        question: String,
        #[arg(long)]
        response: String,
    },
    /// List suggested revision instructions for a node.
    Suggestions {
        #[arg(long)]
        node: String,
    },
    /// Revise a node with an instruction.
    Revise {
        #[arg(long)]
        node: String,
        #[arg(long, required_unless_present = "fill_missing")]
        instruction: Option<String>,
        #[arg(long, conflicts_with = "instruction")]
        fill_missing: bool,
    },
    /// Regenerate nodes along a propagation direction.
    Propagate {
        #[arg(long)]
        node: String,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Print the plan without changing anything.
        #[arg(long, conflicts_with = "resume")]
        dry_run: bool,
        /// Continue an interrupted propagation.
        #[arg(long)]
        resume: bool,
    },
    /// Render the workspace as markdown.
    Export {
        #[arg(long, default_value = "md")]
        format: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print usage metrics computed from the event log.
    Metrics,
    /// Print the workspace graph.
    Show,
    /// Serve the HTTP API over a directory of workspaces.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "workspaces")]
        storage_dir: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<ArtifactKind, String> {
    ArtifactKind::parse(s).ok_or_else(|| format!("unknown stage {s:?}"))
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected field=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.to_string()))
}

fn parse_guidance(s: &str) -> Result<(ArtifactKind, String), String> {
    let (k, v) = parse_assignment(s)?;
    Ok((parse_kind(&k)?, v))
}

/// Sets `path` (dot-separated, numeric segments index arrays) on the JSON
/// form of `content` and parses it back.
pub fn assign_fields(content: &ArtifactContent, fields: &[(String, String)]) -> Result<ArtifactContent, ServiceError> {
    let mut value = serde_json::to_value(content).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    for (path, text) in fields {
        if path == "kind" {
            return Err(ServiceError::BadRequest("the kind of a node cannot be changed".into()));
        }
        let mut slot = &mut value;
        for part in path.split('.') {
            slot = match slot {
                Value::Object(map) => map
                    .get_mut(part)
                    .ok_or_else(|| ServiceError::BadRequest(format!("unknown field {path:?}")))?,
                Value::Array(items) => part
                    .parse::<usize>()
                    .ok()
                    .and_then(|i| items.get_mut(i))
                    .ok_or_else(|| ServiceError::BadRequest(format!("no element {part:?} in {path:?}")))?,
                _ => return Err(ServiceError::BadRequest(format!("{path:?} is not a text field"))),
            };
        }
        *slot = Value::String(text.clone());
    }
    serde_json::from_value(value).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

fn new_content(kind: ArtifactKind, json: Option<&str>, fields: &[(String, String)]) -> Result<ArtifactContent, ServiceError> {
    let base = match json {
        Some(text) => {
            let mut value: Value = serde_json::from_str(text).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            if let Value::Object(map) = &mut value {
                map.entry("kind").or_insert_with(|| json!(kind.as_str()));
            }
            let content: ArtifactContent =
                serde_json::from_value(value).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            if content.kind() != kind {
                return Err(ServiceError::BadRequest(format!("--json describes a {}, not a {}", content.kind().as_str(), kind.as_str())));
            }
            content
        }
        None => ArtifactContent::empty(kind),
    };
    assign_fields(&base, fields)
}

fn io_error(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Storage(format!("{}: {e}", path.display()))
}

fn config_for(cli: &Cli) -> Result<ProviderConfig, ServiceError> {
    let mut config = ProviderConfig::from_env().map_err(ServiceError::BadRequest)?;
    if cli.mock {
        config.mode = ProviderMode::Mock;
    }
    Ok(config)
}

fn sessions_for(cli: &Cli) -> Result<SessionFactory, ServiceError> {
    let mut sessions = SessionFactory::new(config_for(cli)?);
    sessions.mock_seed = cli.seed;
    if let Some(dir) = &cli.templates {
        let corpus = TemplateCorpus::load_dir(dir).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        sessions.corpus = Some(Arc::new(corpus));
    }
    Ok(sessions)
}

fn open_workspace(cli: &Cli, sessions: &SessionFactory) -> Result<Workspace, ServiceError> {
    match fs::read(&cli.workspace) {
        Ok(bytes) => Ok(load_workspace(&bytes)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let name = cli
                .workspace
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("workspace")
                .to_string();
            let mut ws = Workspace::new(name, cli.seed);
            ws.settings.provider_mode = sessions.config.mode;
            Ok(ws)
        }
        Err(e) => Err(io_error(&cli.workspace, e)),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, ServiceError> {
    serde_json::to_string_pretty(value).map_err(|e| ServiceError::Storage(e.to_string()))
}

fn resolve_all(studio: &Studio, refs: &[String]) -> Result<Vec<NodeId>, ServiceError> {
    refs.iter().map(|r| Ok(studio.resolve(r)?)).collect()
}

/// What a command produced: text for stdout and whether the workspace file
/// must be written.
struct Outcome {
    stdout: String,
    write: bool,
}

impl Outcome {
    fn write(stdout: String) -> Self {
        Outcome { stdout, write: true }
    }

    fn read(stdout: String) -> Self {
        Outcome { stdout, write: false }
    }
}

fn apply(studio: &mut Studio, command: &Command) -> Result<Outcome, ServiceError> {
    let variations = studio.workspace().settings.default_variations;
    Ok(match command {
        Command::Brainstorm {
            context,
            to,
            n,
            guidance,
        } => {
            let mut spec = BrainstormSpec::new(context.clone(), *to);
            spec.number_of_variations = n.unwrap_or(variations);
            spec.stage_guidance = guidance.iter().cloned().collect();
            Outcome::write(to_json(&studio.brainstorm(&spec)?)?)
        }
        Command::Add { kind, set, json, at } => {
            let content = new_content(*kind, json.as_deref(), set)?;
            let position = at.as_ref().map_or(Position::ORIGIN, |p| Position::new(p[0], p[1]));
            let id = studio.add_node(content, position)?;
            Outcome::write(to_json(&json!({ "nodeId": id }))?)
        }
        Command::Edit { node, set } => {
            let id = studio.resolve(node)?;
            let content = assign_fields(&studio.graph().node(&id).map_err(storyloom_core::StudioError::from)?.content, set)?;
            Outcome::write(to_json(&studio.edit_node(&id, content)?)?)
        }
        Command::Delete { node } => {
            let id = studio.resolve(node)?;
            studio.delete_node(&id)?;
            Outcome::write(to_json(&json!({ "deleted": id }))?)
        }
        Command::Connect { from, to } => {
            let (from, to) = (studio.resolve(from)?, studio.resolve(to)?);
            Outcome::write(to_json(&studio.connect(&from, &to)?)?)
        }
        Command::Disconnect { from, to } => {
            let (from, to) = (studio.resolve(from)?, studio.resolve(to)?);
            Outcome::write(to_json(&studio.disconnect(&from, &to)?)?)
        }
        Command::GenerateMore { selection, guidance, n } => {
            let ids = resolve_all(studio, &selection.nodes)?;
            Outcome::write(to_json(&studio.generate_more(&ids, guidance.as_deref(), n.unwrap_or(variations))?)?)
        }
        Command::GenerateNext { selection, guidance, n } => {
            let ids = resolve_all(studio, &selection.nodes)?;
            Outcome::write(to_json(&studio.generate_next(&ids, guidance.as_deref(), n.unwrap_or(variations))?)?)
        }
        Command::Storyboard { selection, guidance } => {
            let ids = resolve_all(studio, &selection.nodes)?;
            let (node_id, build) = studio.build_storyboard(&ids, guidance.as_deref())?;
            let mut out = serde_json::to_value(&build).map_err(|e| ServiceError::Storage(e.to_string()))?;
            out["nodeId"] = json!(node_id);
            Outcome::write(to_json(&out)?)
        }
        Command::RegenerateImages { node, style } => {
            let id = studio.resolve(node)?;
            let style = style.as_ref().map_or_else(|| studio.workspace().settings.style.clone(), StyleId::new);
            Outcome::write(to_json(&studio.regenerate_images(&id, &style)?)?)
        }
        Command::Feedback { selection } => {
            let ids = resolve_all(studio, &selection.nodes)?;
            Outcome::write(to_json(&studio.generate_feedback(&ids)?)?)
        }
        Command::Incorporate { question, response } => {
            Outcome::write(to_json(&studio.incorporate_feedback(question, response)?)?)
        }
        Command::Suggestions { node } => {
            let id = studio.resolve(node)?;
            Outcome::read(to_json(&studio.suggest_revisions(&id)?)?)
        }
        Command::Revise {
            node,
            instruction,
            fill_missing,
        } => {
            let id = studio.resolve(node)?;
            let instruction = match (instruction, fill_missing) {
                (_, true) => RevisionInstruction::fill_missing(),
                (Some(text), false) => RevisionInstruction::user(text.clone()),
                (None, false) => return Err(ServiceError::BadRequest("--instruction or --fill-missing is required".into())),
            };
            Outcome::write(to_json(&studio.revise(&id, &instruction)?)?)
        }
        Command::Propagate {
            node,
            direction,
            dry_run,
            resume,
        } => {
            let id = studio.resolve(node)?;
            let direction = Direction::from(*direction);
            if *resume {
                Outcome::write(to_json(&studio.resume(&id, direction)?)?)
            } else if *dry_run {
                Outcome::read(to_json(&studio.propagate(&id, direction, true)?)?)
            } else {
                Outcome::write(to_json(&studio.propagate(&id, direction, false)?)?)
            }
        }
        Command::Export { format, output } => {
            if !matches!(format.as_str(), "md" | "markdown") {
                return Err(ServiceError::BadRequest(format!("unsupported export format {format:?}")));
            }
            let md = export_markdown(studio.workspace());
            match output {
                Some(path) => {
                    fs::write(path, md).map_err(|e| io_error(path, e))?;
                    Outcome::read(to_json(&json!({ "output": path }))?)
                }
                None => Outcome::read(md),
            }
        }
        Command::Metrics => Outcome::read(to_json(&studio.metrics())?),
        Command::Show => Outcome::read(to_json(&studio.workspace().graph)?),
        Command::Serve { .. } => unreachable!("serve is handled before a workspace is opened"),
    })
}

fn serve(cli: &Cli, port: u16, host: &str, storage_dir: &Path) -> Result<(), ServiceError> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| ServiceError::BadRequest(format!("bad listen address: {e}")))?;
    let state = AppState::new(FileStore::open(storage_dir)?, sessions_for(cli)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Storage(e.to_string()))?;
    runtime
        .block_on(api::serve(addr, state))
        .map_err(|e| ServiceError::Storage(e.to_string()))
}

/// Runs one command and returns its standard output.
pub fn execute(cli: &Cli) -> Result<String, ServiceError> {
    if let Command::Serve { port, host, storage_dir } = &cli.command {
        serve(cli, *port, host, storage_dir)?;
        return Ok(String::new());
    }
    let sessions = sessions_for(cli)?;
    let workspace = open_workspace(cli, &sessions)?;
    let mut studio = sessions.open(workspace, ACTOR);
    let result = apply(&mut studio, &cli.command);
    let write = match &result {
        Ok(outcome) => outcome.write,
        Err(_) => !matches!(cli.command, Command::Export { .. } | Command::Metrics | Command::Show | Command::Suggestions { .. }),
    };
    if write {
        let path = &cli.workspace;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
        write_atomic(path, &save_workspace(studio.workspace()))?;
    }
    result.map(|o| o.stdout)
}

/// Entry point for the binary: prints the result, or the error body as JSON
/// on stderr, and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(out) => {
            if !out.is_empty() {
                let _ = writeln!(std::io::stdout().lock(), "{}", out.trim_end_matches('\n'));
            }
            0
        }
        Err(e) => {
            let body: ErrorBody = e.body();
            eprintln!("{}", serde_json::to_string(&body).unwrap_or_else(|_| e.to_string()));
            1
        }
    }
}
