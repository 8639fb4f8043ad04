//! Design-graph engine for iterative, AI-assisted design work.
//!
//! A workspace holds typed design artifacts (context, persona, problem,
//! solution, storyboard) connected in a DAG. Edits mark dependent nodes as
//! stale; propagation regenerates them in stage order through a
//! [`ModelProvider`].

pub mod artifact;
pub mod feedback;
pub mod generation;
pub mod graph;
pub mod mock;
pub mod propagation;
pub mod provider;
pub mod schema;
pub mod studio;
pub mod style;
pub mod template;
pub mod workspace;

pub use artifact::{ArtifactContent, ArtifactKind};
pub use generation::Pipeline;
pub use graph::{DesignGraph, Edge, NodeId, Position};
pub use mock::MockProvider;
pub use propagation::Direction;
pub use provider::ModelProvider;
pub use studio::{BrainstormSpec, Studio, StudioError};
pub use workspace::{load_workspace, save_workspace, Workspace};
