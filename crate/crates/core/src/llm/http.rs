use std::time::Duration;

use serde_json::{json, Value};

use crate::error::{Error, Result};

use super::prompt::Prompt;
use super::{LlmProvider, ProviderConfig};

/// OpenAI-compatible chat-completion client with bounded retries.
pub struct HttpProvider {
    config: ProviderConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    id: String,
}

enum Attempt {
    Retry(Error),
    Fatal(Error),
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(true)
            .build()
            .into();
        let id = format!("http:{}", config.model_id);
        Ok(HttpProvider {
            config,
            api_key,
            agent,
            id,
        })
    }

    fn attempt(&self, body: &Value) -> std::result::Result<String, Attempt> {
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(code)) if code == 429 || code >= 500 => {
                return Err(Attempt::Retry(Error::Provider(format!("HTTP {code}"))))
            }
            Err(ureq::Error::StatusCode(code)) => {
                return Err(Attempt::Fatal(Error::Provider(format!("HTTP {code}"))))
            }
            Err(ureq::Error::Timeout(_)) => {
                return Err(Attempt::Retry(Error::Timeout(self.config.timeout())))
            }
            Err(e) => return Err(Attempt::Retry(Error::Provider(e.to_string()))),
        };
        let reply: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Retry(Error::Provider(format!("unreadable reply: {e}"))))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                Attempt::Fatal(Error::Provider(
                    "reply lacks choices[0].message.content".into(),
                ))
            })
    }
}

impl LlmProvider for HttpProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let body = json!({
            "model": self.config.model_id,
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
            "messages": [{ "role": "user", "content": prompt.text }],
        });
        let attempts = self.config.retries + 1;
        let mut last = None;
        for n in 0..attempts {
            if n > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (n - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    log::warn!("provider attempt {}/{attempts} failed: {e}", n + 1);
                    last = Some(e);
                }
            }
        }
        match last {
            Some(Error::Timeout(d)) => Err(Error::Timeout(d)),
            Some(e) => Err(Error::Provider(format!("{e} (after {attempts} attempts)"))),
            None => Err(Error::Provider("no attempt made".into())),
        }
    }
}
