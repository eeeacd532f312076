//! Shared wire plumbing for hosted model services.
//!
//! Both the extractor and the generator speak the chat-completions contract
//! (`POST {base}/chat/completions`); the remote encoder speaks the
//! embeddings contract (`POST {base}/embeddings`). The bearer token comes
//! from `LLM_API_KEY`; `LLM_API_BASE` overrides the configured base URL.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

pub const API_KEY_ENV: &str = "LLM_API_KEY";
pub const API_BASE_ENV: &str = "LLM_API_BASE";

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("request failed or timed out: {0}")]
    Timeout(String),
    #[error("service returned HTTP status {0}")]
    HttpStatus(u16),
    #[error("unparseable response: {0}")]
    Unparseable(String),
}

/// Effective base URL: the `LLM_API_BASE` environment variable wins over
/// the configured endpoint.
pub fn resolve_base(endpoint: &str) -> String {
    std::env::var(API_BASE_ENV)
        .unwrap_or_else(|_| endpoint.to_owned())
        .trim_end_matches('/')
        .to_owned()
}

fn post_json(
    url: &str,
    body: &serde_json::Value,
    timeout: Duration,
    max_retries: u32,
) -> Result<serde_json::Value, RemoteError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| RemoteError::Timeout(e.to_string()))?;
    let mut last_err = RemoteError::Timeout("no attempt made".into());
    for _ in 0..=max_retries {
        let mut request = client.post(url).json(body);
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            request = request.bearer_auth(key);
        }
        match request.send() {
            Ok(response) => {
                let status = response.status();
                if !status.is_success() {
                    last_err = RemoteError::HttpStatus(status.as_u16());
                    continue;
                }
                match response.json::<serde_json::Value>() {
                    Ok(value) => return Ok(value),
                    Err(e) => {
                        last_err = RemoteError::Unparseable(e.to_string());
                        continue;
                    }
                }
            }
            Err(e) => {
                last_err = RemoteError::Timeout(e.to_string());
                continue;
            }
        }
    }
    Err(last_err)
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

/// One chat-completion round trip; returns the first choice's content.
pub fn chat_completion(
    endpoint: &str,
    model: &str,
    system: &str,
    user: &str,
    temperature: f64,
    timeout: Duration,
    max_retries: u32,
) -> Result<String, RemoteError> {
    let url = format!("{}/chat/completions", resolve_base(endpoint));
    let body = json!({
        "model": model,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
        "temperature": temperature,
    });
    let value = post_json(&url, &body, timeout, max_retries)?;
    let parsed: ChatResponse = serde_json::from_value(value)
        .map_err(|e| RemoteError::Unparseable(format!("chat completion: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .map(|c| c.message.content)
        .ok_or_else(|| RemoteError::Unparseable("empty choices array".into()))
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// One embeddings round trip; returns the first embedding vector.
pub fn embedding(
    endpoint: &str,
    model: &str,
    input: &str,
    timeout: Duration,
    max_retries: u32,
) -> Result<Vec<f64>, RemoteError> {
    let url = format!("{}/embeddings", resolve_base(endpoint));
    let body = json!({ "model": model, "input": input });
    let value = post_json(&url, &body, timeout, max_retries)?;
    let parsed: EmbeddingResponse = serde_json::from_value(value)
        .map_err(|e| RemoteError::Unparseable(format!("embedding: {e}")))?;
    parsed
        .data
        .into_iter()
        .next()
        .map(|d| d.embedding)
        .ok_or_else(|| RemoteError::Unparseable("empty data array".into()))
}
