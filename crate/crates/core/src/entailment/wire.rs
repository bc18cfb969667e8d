//! JSON bodies of `POST /v1/entail`.

use serde::{Deserialize, Serialize};

use super::{EntailmentJudgment, PremiseHypothesisPair};

pub const ENTAIL_PATH: &str = "/v1/entail";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntailRequest {
    pub id: String,
    pub pairs: Vec<PremiseHypothesisPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntailResponse {
    pub id: String,
    pub judgments: Vec<EntailmentJudgment>,
}

impl EntailResponse {
    pub fn to_body(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("response serializes")
    }
}
