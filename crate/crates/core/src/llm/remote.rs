use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CompletionRequest, Provider, ProviderError};

/// OpenAI-compatible chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

fn default_timeout() -> u64 {
    120
}

pub struct RemoteProvider {
    name: String,
    config: RemoteConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Self {
        let token = std::env::var(&config.api_key_env).ok().filter(|t| !t.is_empty());
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        Self {
            name: format!("remote:{}", config.model),
            config,
            token,
            agent,
        }
    }

    fn body(&self, req: &CompletionRequest) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    refusal: Option<String>,
}

fn classify_status(code: u16, body: &str) -> ProviderError {
    let lower = body.to_lowercase();
    if lower.contains("content_policy") || lower.contains("content_filter") {
        return ProviderError::Policy(format!("HTTP {code}: {body}"));
    }
    match code {
        408 | 409 | 425 | 429 | 500..=599 => ProviderError::Transient(format!("HTTP {code}")),
        _ => ProviderError::Fatal(format!("HTTP {code}: {body}")),
    }
}

impl Provider for RemoteProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        let mut call = self
            .agent
            .post(&self.config.endpoint)
            .set("Content-Type", "application/json");
        if let Some(token) = &self.token {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = match call.send_json(self.body(req)) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let body = r.into_string().unwrap_or_default();
                return Err(classify_status(code, &body));
            }
            Err(ureq::Error::Transport(t)) => return Err(ProviderError::Transient(t.to_string())),
        };
        let parsed: ChatResponse = resp
            .into_json()
            .map_err(|e| ProviderError::Transient(format!("malformed response: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::Transient("response without choices".into()))?;
        if choice.finish_reason.as_deref() == Some("content_filter") {
            return Err(ProviderError::Policy("finish_reason=content_filter".into()));
        }
        if let Some(refusal) = choice.message.refusal {
            return Err(ProviderError::Policy(refusal));
        }
        choice
            .message
            .content
            .filter(|c| !c.trim().is_empty())
            .ok_or_else(|| ProviderError::Transient("empty content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Task;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves each canned (status, body) once, returning the request bodies seen.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    let lower = line.to_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0u8; len];
                reader.read_exact(&mut buf).unwrap();
                seen.push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            seen
        });
        (url, handle)
    }

    fn provider(url: String) -> RemoteProvider {
        RemoteProvider::new(RemoteConfig {
            endpoint: url,
            model: "test-model".into(),
            api_key_env: "STORY_BELIEFS_TEST_NO_SUCH_VAR".into(),
            timeout_secs: 5,
        })
    }

    #[test]
    fn sends_chat_payload_and_reads_content() {
        let ok = r#"{"choices":[{"message":{"content":"0.87"},"finish_reason":"stop"}]}"#;
        let (url, h) = serve(vec![(200, ok.into())]);
        let p = provider(url);
        let req = CompletionRequest::new(Task::Classify, "sys", "user").temperature(0.0).max_output_tokens(8);
        assert_eq!(p.generate(&req).unwrap(), "0.87");
        let seen = h.join().unwrap();
        let v: serde_json::Value = serde_json::from_str(&seen[0]).unwrap();
        assert_eq!(v["model"], "test-model");
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][0]["content"], "sys");
        assert_eq!(v["messages"][1]["content"], "user");
        assert_eq!(v["temperature"], 0.0);
        assert_eq!(v["max_tokens"], 8);
        assert_eq!(p.name(), "remote:test-model");
    }

    #[test]
    fn maps_status_codes() {
        let (url, h) = serve(vec![
            (429, "{}".into()),
            (400, r#"{"error":{"code":"content_policy_violation"}}"#.into()),
            (401, "{}".into()),
            (200, r#"{"choices":[{"message":{"content":null},"finish_reason":"content_filter"}]}"#.into()),
        ]);
        let p = provider(url);
        let req = CompletionRequest::new(Task::Imagine, "s", "u");
        assert!(matches!(p.generate(&req), Err(ProviderError::Transient(_))));
        assert!(matches!(p.generate(&req), Err(ProviderError::Policy(_))));
        assert!(matches!(p.generate(&req), Err(ProviderError::Fatal(_))));
        assert!(matches!(p.generate(&req), Err(ProviderError::Policy(_))));
        h.join().unwrap();
    }
}
