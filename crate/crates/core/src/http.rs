//! Blocking JSON-over-HTTP POST with bounded retries.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::retry::{with_retry, Attempt, RetryPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpFailure {
    pub attempts: u32,
    pub message: String,
}

pub struct JsonEndpoint {
    url: String,
    client: Client,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl JsonEndpoint {
    pub fn new(
        url: impl Into<String>,
        timeout_secs: u64,
        api_key: Option<String>,
        retry: RetryPolicy,
    ) -> Result<Self, String> {
        let client = Client::builder()
            .timeout(Duration::from_secs(timeout_secs.max(1)))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self {
            url: url.into(),
            client,
            api_key,
            retry,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// POSTs `body` and decodes the JSON reply. Connection errors, timeouts,
    /// 429 and 5xx are retried; other statuses and undecodable bodies fail
    /// immediately. Returns the value and the attempts used.
    pub fn post<Req, Resp>(&self, body: &Req) -> Result<(Resp, u32), HttpFailure>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        with_retry(&self.retry, |_| {
            let mut request = self.client.post(&self.url).json(body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            let response = match request.send() {
                Ok(r) => r,
                Err(e) => return Attempt::Transient(e.to_string()),
            };
            let status = response.status();
            if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
                return Attempt::Transient(format!("HTTP {status}"));
            }
            if !status.is_success() {
                let text = response.text().unwrap_or_default();
                return Attempt::Permanent(format!("HTTP {status}: {}", truncate(&text, 200)));
            }
            match response.json::<Resp>() {
                Ok(v) => Attempt::Done(v),
                Err(e) => Attempt::Permanent(format!("undecodable response: {e}")),
            }
        })
        .map_err(|e| HttpFailure {
            attempts: e.attempts,
            message: e.error,
        })
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
