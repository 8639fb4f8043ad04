//! Model provider backed by HTTP endpoints.
//!
//! Text calls use the chat-completions request shape with a JSON-schema
//! response format. Image calls post the prompt triple and expect a URL back.

use std::sync::OnceLock;
use std::time::Duration;

use reqwest::blocking::Client;
use serde_json::{json, Value};
use storyloom_core::artifact::ImageRef;
use storyloom_core::provider::{ImageRequest, ModelProvider, ProviderError, TextRequest};

use crate::config::ProviderConfig;

const TIMEOUT: Duration = Duration::from_secs(120);

pub struct HttpProvider {
    config: ProviderConfig,
    client: OnceLock<Client>,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Self {
        HttpProvider {
            config,
            client: OnceLock::new(),
        }
    }

    fn client(&self) -> Result<&Client, ProviderError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let client = Client::builder()
            .timeout(TIMEOUT)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(self.client.get_or_init(|| client))
    }

    fn post(&self, url: &str, key: Option<&str>, body: &Value) -> Result<Vec<u8>, ProviderError> {
        let mut request = self.client()?.post(url).json(body);
        if let Some(key) = key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        let bytes = response
            .bytes()
            .map_err(|e| ProviderError::Transport(e.to_string()))?
            .to_vec();
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&bytes).chars().take(500).collect(),
            });
        }
        Ok(bytes)
    }
}

impl ModelProvider for HttpProvider {
    fn complete_json(&self, request: &TextRequest) -> Result<Value, ProviderError> {
        let url = self
            .config
            .text_url
            .as_deref()
            .ok_or_else(|| ProviderError::NotConfigured("TEXT_MODEL_URL is not set".into()))?;
        let mut body = json!({
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "response_format": {
                "type": "json_schema",
                "json_schema": {"name": request.schema.as_str(), "schema": request.schema.json_schema()},
            },
        });
        if let Some(model) = &self.config.text_model {
            body["model"] = model.clone().into();
        }
        let bytes = self.post(url, self.config.text_key.as_deref(), &body)?;
        decode_text_response(&bytes)
    }

    fn generate_image(&self, request: &ImageRequest) -> Result<ImageRef, ProviderError> {
        let url = self
            .config
            .image_url
            .as_deref()
            .ok_or_else(|| ProviderError::NotConfigured("IMAGE_MODEL_URL is not set".into()))?;
        let mut body = json!({
            "prompt": request.prompt,
            "negative_prompt": request.negative_prompt,
            "style": request.style.as_str(),
            "n": 1,
        });
        if let Some(model) = &self.config.image_model {
            body["model"] = model.clone().into();
        }
        let bytes = self.post(url, self.config.image_key.as_deref(), &body)?;
        decode_image_response(&bytes)
    }
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

/// Extracts the structured output from a text-model response body.
///
/// Accepts a chat-completions body (the first choice's message content is
/// parsed as JSON, optionally inside a code fence), an `{"output": ...}`
/// wrapper, or a bare JSON object.
pub fn decode_text_response(bytes: &[u8]) -> Result<Value, ProviderError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    if let Some(choices) = value.get("choices") {
        let content = choices
            .get(0)
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .ok_or_else(|| ProviderError::Malformed("choices[0].message.content is missing".into()))?;
        return match content {
            Value::String(s) => {
                serde_json::from_str(strip_fences(s)).map_err(|e| ProviderError::Malformed(format!("message content: {e}")))
            }
            Value::Object(_) => Ok(content.clone()),
            _ => Err(ProviderError::Malformed("message content is not text".into())),
        };
    }
    match value {
        Value::Object(mut map) => match map.remove("output") {
            Some(inner @ Value::Object(_)) => Ok(inner),
            Some(Value::String(s)) => {
                serde_json::from_str(strip_fences(&s)).map_err(|e| ProviderError::Malformed(format!("output: {e}")))
            }
            Some(_) => Err(ProviderError::Malformed("output is not an object".into())),
            None => Ok(Value::Object(map)),
        },
        _ => Err(ProviderError::Malformed("response is not a JSON object".into())),
    }
}

/// Extracts the image reference from an image-model response body:
/// `{"data": [{"url": ...}]}`, `{"url": ...}` or `{"image": ...}`.
pub fn decode_image_response(bytes: &[u8]) -> Result<ImageRef, ProviderError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    let url = value
        .pointer("/data/0/url")
        .or_else(|| value.get("url"))
        .or_else(|| value.get("image"))
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::Malformed("no image url in response".into()))?;
    ImageRef::new(url).map_err(|e| ProviderError::Malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use storyloom_core::schema::SchemaName;

    #[test]
    fn decodes_chat_completion_with_fence() {
        let body = json!({"choices": [{"message": {"content": "```json\n{\"personas\": []}\n```"}}]});
        let v = decode_text_response(body.to_string().as_bytes()).unwrap();
        assert_eq!(v, json!({"personas": []}));
    }

    #[test]
    fn decodes_wrapped_and_bare_objects() {
        assert_eq!(decode_text_response(br#"{"output": {"a": 1}}"#).unwrap(), json!({"a": 1}));
        assert_eq!(decode_text_response(br#"{"a": 1}"#).unwrap(), json!({"a": 1}));
        assert!(decode_text_response(b"[1]").is_err());
        assert!(decode_text_response(br#"{"choices": []}"#).is_err());
    }

    #[test]
    fn decodes_image_urls() {
        let a = decode_image_response(br#"{"data": [{"url": "https://x/y.png"}]}"#).unwrap();
        assert_eq!(a.as_str(), "https://x/y.png");
        assert!(decode_image_response(br#"{"data": []}"#).is_err());
    }

    #[test]
    fn unconfigured_provider_reports_missing_url() {
        let p = HttpProvider::new(ProviderConfig::default());
        let req = TextRequest {
            template: "generate_personas".into(),
            system_prompt: String::new(),
            user_prompt: String::new(),
            schema: SchemaName::PersonaList,
            bindings: Default::default(),
        };
        assert!(matches!(p.complete_json(&req), Err(ProviderError::NotConfigured(_))));
    }
}
