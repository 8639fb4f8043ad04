//! Provider configuration from the environment.

use std::env;

use storyloom_core::workspace::ProviderMode;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub text_url: Option<String>,
    pub text_key: Option<String>,
    pub text_model: Option<String>,
    pub image_url: Option<String>,
    pub image_key: Option<String>,
    pub image_model: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            mode: ProviderMode::Real,
            text_url: None,
            text_key: None,
            text_model: None,
            image_url: None,
            image_key: None,
            image_model: None,
        }
    }
}

impl ProviderConfig {
    /// Reads `PROVIDER_MODE`, `TEXT_MODEL_URL`, `TEXT_MODEL_KEY`,
    /// `IMAGE_MODEL_URL`, `IMAGE_MODEL_KEY` and the optional
    /// `TEXT_MODEL_NAME` / `IMAGE_MODEL_NAME`.
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        let mode = match get("PROVIDER_MODE").as_deref().map(str::to_ascii_lowercase).as_deref() {
            None | Some("real") => ProviderMode::Real,
            Some("mock") => ProviderMode::Mock,
            Some(other) => return Err(format!("PROVIDER_MODE must be \"real\" or \"mock\", got {other:?}")),
        };
        Ok(ProviderConfig {
            mode,
            text_url: get("TEXT_MODEL_URL"),
            text_key: get("TEXT_MODEL_KEY"),
            text_model: get("TEXT_MODEL_NAME"),
            image_url: get("IMAGE_MODEL_URL"),
            image_key: get("IMAGE_MODEL_KEY"),
            image_model: get("IMAGE_MODEL_NAME"),
        })
    }

    pub fn mock() -> Self {
        ProviderConfig {
            mode: ProviderMode::Mock,
            ..ProviderConfig::default()
        }
    }
}
