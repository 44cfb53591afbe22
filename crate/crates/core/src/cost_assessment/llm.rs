//! LLM-backed assessor: prompt, query, parse, and re-query with the
//! validation error appended until a valid response arrives or the attempt
//! budget runs out.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::json;
use thiserror::Error;

use super::{
    build_prompt_for, parse_assessment, AssessRequest, Assessment, Assessor, AssessorError,
    Exchange, ParseError,
};
use crate::scene_graph::SceneGraph;
use crate::trajectory_context::Trajectory;

pub const ENV_URL: &str = "SOCIOPLAN_LLM_URL";
pub const ENV_KEY: &str = "SOCIOPLAN_LLM_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct TransportError(pub String);

/// Sends one prompt, returns the raw completion text.
pub trait CompletionTransport: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, TransportError>;
}

impl<T: CompletionTransport + ?Sized> CompletionTransport for Arc<T> {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        (**self).complete(prompt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total number of queries, including the first.
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3 }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("LLM configuration: {0}")]
    Config(String),
    #[error("transport failure on attempt {attempt}: {source}")]
    Transport {
        attempt: u32,
        #[source]
        source: TransportError,
    },
    #[error("no valid response after {attempts} attempts; last error ({}): {last}", .last.code())]
    Exhausted {
        attempts: u32,
        last: ParseError,
        transcript: Vec<Exchange>,
    },
}

fn retry_prompt(base: &str, response: &str, error: &ParseError) -> String {
    format!(
        "{base}\nYOUR PREVIOUS RESPONSE WAS REJECTED\nerror ({}): {error}\nprevious response:\n{response}\n\
         Reply again with corrected JSON only.\n",
        error.code()
    )
}

/// Queries `transport` until a response parses and covers `relevant` exactly.
pub fn llm_assess(
    transport: &dyn CompletionTransport,
    partial: &SceneGraph,
    trajectory: &Trajectory,
    relevant: &[String],
    preferences: &[String],
    policy: RetryPolicy,
) -> Result<Assessment, LlmError> {
    if policy.max_attempts == 0 {
        return Err(LlmError::Config("max_attempts must be at least 1".into()));
    }
    let base = build_prompt_for(partial, trajectory, preferences, relevant);
    let mut prompt = base.clone();
    let mut transcript = Vec::new();
    let mut last_error = None;

    for attempt in 1..=policy.max_attempts {
        let response = transport
            .complete(&prompt)
            .map_err(|source| LlmError::Transport { attempt, source })?;
        transcript.push(Exchange {
            prompt: prompt.clone(),
            response: response.clone(),
        });
        match parse_assessment(&response, relevant) {
            Ok(mut assessment) => {
                assessment.provenance.assessor = "llm".into();
                assessment.provenance.attempts = attempt;
                assessment.provenance.transcript = transcript;
                return Ok(assessment);
            }
            Err(e) => {
                prompt = retry_prompt(&base, &response, &e);
                last_error = Some(e);
            }
        }
    }
    Err(LlmError::Exhausted {
        attempts: policy.max_attempts,
        last: last_error.expect("at least one attempt ran"),
        transcript,
    })
}

/// OpenAI-compatible chat-completion client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    key: Option<String>,
    model: String,
    temperature: f64,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, key: Option<String>, model: impl Into<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            client,
            url: url.into(),
            key,
            model: model.into(),
            temperature: 0.0,
        })
    }

    /// Endpoint from `SOCIOPLAN_LLM_URL`, credential from `SOCIOPLAN_LLM_KEY`.
    pub fn from_env(model: impl Into<String>) -> Result<Self, LlmError> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| LlmError::Config(format!("{ENV_URL} is not set")))?;
        let key = std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty());
        Self::new(url, key, model)
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }
}

impl CompletionTransport for HttpTransport {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status();
        let value: serde_json::Value = resp
            .json()
            .map_err(|e| TransportError(format!("HTTP {status}: unreadable body: {e}")))?;
        if !status.is_success() {
            return Err(TransportError(format!("HTTP {status}: {value}")));
        }
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TransportError("response has no choices[0].message.content".into()))
    }
}

/// Transport that replays canned responses in order. Used for offline runs and tests.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    responses: Mutex<VecDeque<Result<String, TransportError>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedTransport {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            responses: Mutex::new(responses.into_iter().map(|s| Ok(s.into())).collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn push_failure(&self, message: impl Into<String>) {
        self.responses
            .lock()
            .unwrap()
            .push_back(Err(TransportError(message.into())));
    }

    /// Prompts received so far.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl CompletionTransport for ScriptedTransport {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(TransportError("script exhausted".into())))
    }
}

/// [`Assessor`] adapter over any transport.
pub struct LlmAssessor {
    transport: Box<dyn CompletionTransport>,
    policy: RetryPolicy,
    model: String,
}

impl LlmAssessor {
    pub fn new(transport: Box<dyn CompletionTransport>, model: impl Into<String>, policy: RetryPolicy) -> Self {
        Self {
            transport,
            policy,
            model: model.into(),
        }
    }
}

impl Assessor for LlmAssessor {
    fn name(&self) -> &str {
        "llm"
    }

    fn assess(&self, request: &AssessRequest<'_>) -> Result<Assessment, AssessorError> {
        let mut a = llm_assess(
            self.transport.as_ref(),
            request.partial,
            request.trajectory,
            request.relevant,
            request.preferences,
            self.policy,
        )?;
        a.provenance
            .parameters
            .insert("model".into(), self.model.clone());
        a.provenance
            .parameters
            .insert("max_attempts".into(), self.policy.max_attempts.to_string());
        Ok(a)
    }
}
