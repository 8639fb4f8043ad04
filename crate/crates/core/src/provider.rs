//! The two-method interface to text and image models.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::artifact::ImageRef;
use crate::schema::SchemaName;
use crate::style::StyleId;
use crate::template::Bindings;

/// A structured-output text call. `template` and `bindings` identify the
/// prompt for tracing; providers only need the two prompt strings and the
/// schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TextRequest {
    pub template: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub schema: SchemaName,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageRequest {
    pub prompt: String,
    pub negative_prompt: String,
    pub style: StyleId,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider is not configured: {0}")]
    NotConfigured(String),
    #[error("provider request failed: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("provider returned an unreadable payload: {0}")]
    Malformed(String),
    #[error("injected failure: {0}")]
    Injected(String),
}

/// Implementations must tolerate concurrent calls.
pub trait ModelProvider: Send + Sync {
    /// Returns a JSON value intended to fit `request.schema`. Callers validate.
    fn complete_json(&self, request: &TextRequest) -> Result<Value, ProviderError>;

    fn generate_image(&self, request: &ImageRequest) -> Result<ImageRef, ProviderError>;
}

impl<P: ModelProvider + ?Sized> ModelProvider for std::sync::Arc<P> {
    fn complete_json(&self, request: &TextRequest) -> Result<Value, ProviderError> {
        (**self).complete_json(request)
    }

    fn generate_image(&self, request: &ImageRequest) -> Result<ImageRef, ProviderError> {
        (**self).generate_image(request)
    }
}
