//! Blocking HTTP adapters for an OpenAI-compatible chat endpoint and an
//! embeddings endpoint.

use std::time::Duration;

use causal_cdr::discovery::LlmPort;
use causal_cdr::numerics::DenseMatrix;
use causal_cdr::pipeline::{EncoderSettings, LlmSettings};
use causal_cdr::representation::{TextEncoder, TEXT_DIM};
use causal_cdr::{Error, Result};
use serde_json::{json, Value};

fn credential(var: &str) -> anyhow::Result<String> {
    std::env::var(var).map_err(|_| anyhow::anyhow!("environment variable {var} is not set"))
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

pub struct HttpLlm {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    key: String,
}

impl HttpLlm {
    pub fn new(settings: &LlmSettings) -> anyhow::Result<Self> {
        let base = settings
            .base_url
            .as_deref()
            .ok_or_else(|| anyhow::anyhow!("llm.base_url is not set; pass --mock-llm or configure an endpoint"))?;
        Ok(Self {
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(settings.timeout_secs))
                .build()?,
            url: endpoint(base, "chat/completions"),
            model: settings.model.clone(),
            key: credential(&settings.api_key_env)?,
        })
    }
}

impl LlmPort for HttpLlm {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str, temperature: f64) -> Result<String> {
        let body = json!({
            "model": self.model,
            "temperature": temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let reply: Value = self
            .client
            .post(&self.url)
            .bearer_auth(&self.key)
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| Error::Llm(e.to_string()))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Llm(format!("reply without choices[0].message.content: {reply}")))
    }
}

pub struct HttpEncoder {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    key: Option<String>,
}

impl HttpEncoder {
    pub fn new(settings: &EncoderSettings, base: &str) -> anyhow::Result<Self> {
        Ok(Self {
            client: reqwest::blocking::Client::builder().timeout(Duration::from_secs(300)).build()?,
            url: endpoint(base, "embeddings"),
            model: settings.model.clone(),
            key: std::env::var(&settings.api_key_env).ok(),
        })
    }
}

impl TextEncoder for HttpEncoder {
    fn name(&self) -> &str {
        &self.model
    }

    fn encode(&self, texts: &[String]) -> Result<DenseMatrix> {
        let fail = |reason: String| Error::Encoder {
            doc: "<batch>".into(),
            reason,
        };
        let mut out = Vec::with_capacity(texts.len() * TEXT_DIM);
        for chunk in texts.chunks(256) {
            let mut req = self.client.post(&self.url).json(&json!({"model": self.model, "input": chunk}));
            if let Some(key) = &self.key {
                req = req.bearer_auth(key);
            }
            let reply: Value = req
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json())
                .map_err(|e| fail(e.to_string()))?;
            let data = reply["data"].as_array().ok_or_else(|| fail("reply has no data array".into()))?;
            if data.len() != chunk.len() {
                return Err(fail(format!("{} embeddings for {} texts", data.len(), chunk.len())));
            }
            for d in data {
                let v = d["embedding"].as_array().ok_or_else(|| fail("entry without embedding".into()))?;
                if v.len() != TEXT_DIM {
                    return Err(fail(format!("embedding width {} (expected {TEXT_DIM})", v.len())));
                }
                for x in v {
                    out.push(x.as_f64().ok_or_else(|| fail("non-numeric embedding".into()))?);
                }
            }
        }
        DenseMatrix::from_vec(texts.len(), TEXT_DIM, out)
    }
}
