use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use storyloom_core::workspace::PersistError;
use storyloom_core::StudioError;
use thiserror::Error;

/// The JSON body of every failed request and every failed CLI command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<String>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Studio(#[from] StudioError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("workspace {0} not found")]
    WorkspaceNotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("storage error: {0}")]
    Storage(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Studio(e) => e.code(),
            ServiceError::Persist(PersistError::Syntax { .. }) => "CorruptWorkspace",
            ServiceError::Persist(PersistError::UnsupportedVersion { .. }) => "UnsupportedVersion",
            ServiceError::Persist(PersistError::Schema { .. } | PersistError::Invalid(_)) => "InvalidWorkspace",
            ServiceError::WorkspaceNotFound(_) => "WorkspaceNotFound",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Storage(_) => "StorageError",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self.code() {
            "NotFound" | "WorkspaceNotFound" | "QuestionNotFound" | "EdgeMissing" => StatusCode::NOT_FOUND,
            "EdgeIllegal" | "SelfEdge" | "BadPosition" | "KindMismatch" | "UnknownStyle" | "Precondition" => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            "EdgeExists" | "NoDirtyMark" | "AlreadyIncorporated" | "GroupQuestion" | "AmbiguousNode" => {
                StatusCode::CONFLICT
            }
            "ProviderError" | "SchemaViolation" | "PropagationInterrupted" => StatusCode::BAD_GATEWAY,
            "BadRequest" | "CorruptWorkspace" | "UnsupportedVersion" | "InvalidWorkspace" => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let node_id = match self {
            ServiceError::Studio(e) => e.node_id().map(|id| id.to_string()),
            _ => None,
        };
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
            node_id,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            log::error!("{self}");
        }
        (self.status(), Json(self.body())).into_response()
    }
}

#[cfg(test)]
mod tests {
    use storyloom_core::artifact::ArtifactKind;
    use storyloom_core::graph::GraphError;

    use super::*;

    #[test]
    fn illegal_edge_is_422() {
        let e = ServiceError::Studio(StudioError::Graph(GraphError::EdgeIllegal {
            from: ArtifactKind::Persona,
            to: ArtifactKind::Solution,
        }));
        assert_eq!(e.status(), StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(e.body().code, "EdgeIllegal");
    }
}
