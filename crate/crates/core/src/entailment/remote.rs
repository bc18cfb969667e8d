use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use super::wire::{EntailRequest, EntailResponse, ENTAIL_PATH};
use super::{BackendError, EntailmentBackend, EntailmentJudgment, PremiseHypothesisPair};

/// Client for a scorer speaking the `/v1/entail` protocol.
pub struct RemoteBackend {
    url: String,
    agent: ureq::Agent,
    next_id: AtomicU64,
}

impl RemoteBackend {
    /// `endpoint` is the server base url; the entail path is appended unless
    /// already present.
    pub fn new(endpoint: impl Into<String>) -> Self {
        let endpoint = endpoint.into();
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with(ENTAIL_PATH) {
            base.to_string()
        } else {
            format!("{base}{ENTAIL_PATH}")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteBackend {
            url,
            agent,
            next_id: AtomicU64::new(0),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl EntailmentBackend for RemoteBackend {
    fn score(
        &self,
        pairs: &[PremiseHypothesisPair],
    ) -> Result<Vec<EntailmentJudgment>, BackendError> {
        let id = format!("req-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let request = EntailRequest {
            id: id.clone(),
            pairs: pairs.to_vec(),
        };
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(&request)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200 => {}
            503 => return Err(BackendError::Unavailable(body)),
            other => return Err(BackendError::Transport(format!("HTTP {other}: {body}"))),
        }
        let parsed: EntailResponse =
            serde_json::from_str(&body).map_err(|e| BackendError::Malformed(e.to_string()))?;
        if parsed.id != id {
            return Err(BackendError::Malformed(format!(
                "response id `{}` does not echo request id `{id}`",
                parsed.id
            )));
        }
        Ok(parsed.judgments)
    }
}
