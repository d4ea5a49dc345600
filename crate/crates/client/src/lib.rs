//! Request/response types for the spatial service HTTP API, plus a thin
//! async client. The service depends on this crate for the wire types, so
//! the two sides can never drift apart.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Error codes carried in API error bodies. The CLI maps these to exit codes.
pub mod codes {
    /// A packet failed its MAC check.
    pub const MAC_FAILURE: &str = "mac_failure";
    /// Malformed envelopes, broken framing, or an inconsistent packet set.
    pub const STRUCTURAL: &str = "structural";
    /// A stream does not fit its template's variable positions.
    pub const CAPACITY: &str = "capacity";
    /// Bad session file, carriers, channels config, or parameter mismatch.
    pub const CONFIG: &str = "config";
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq_bits: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub error: ApiError,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeygenRequest {
    pub n_packets: usize,
    pub total_message_bits: usize,
    /// Recorded verbatim in the generated session file.
    pub carriers_path: String,
    pub carriers_fasta: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeygenResponse {
    pub session_file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub session_file: String,
    pub carriers_fasta: String,
    pub plaintext_b64: String,
    pub seed: u64,
    /// Tear plan like `(23,(8,(9,32)))`; omitted means a seeded random plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeOut {
    pub seq_bits: String,
    pub wire: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarrierCapacity {
    pub name: String,
    pub length: usize,
    pub variable_positions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PacketCapacity {
    pub seq_bits: String,
    pub template_index: usize,
    pub template_name: String,
    pub stream_len: usize,
    pub capacity: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityReport {
    pub carriers: Vec<CarrierCapacity>,
    pub packets: Vec<PacketCapacity>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub envelopes: Vec<EnvelopeOut>,
    pub report: CapacityReport,
    pub plan: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeRequest {
    pub session_file: String,
    pub carriers_fasta: String,
    pub envelopes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeResponse {
    pub plaintext_b64: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub session_file: String,
    pub carriers_fasta: String,
    pub plaintext_b64: String,
    pub channels_config: String,
    pub seed: u64,
    /// Also push the surviving arrivals through real localhost sockets.
    #[serde(default)]
    pub loopback: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plaintext_b64: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Delivery log lines: `<virtual_time_ms> <event> <seq_bits> <channel_id>`.
    pub events: Vec<String>,
    /// seq_bits of arrivals rejected at the receiver (bad MAC).
    pub rejected: Vec<String>,
    pub arrivals: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InspectRequest {
    pub session_file: String,
    pub carriers_fasta: String,
    pub envelope: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InspectResponse {
    pub seq_bits: String,
    pub mac_ok: bool,
    pub template_index: usize,
    pub template_name: String,
    pub header: String,
    pub size: usize,
    pub payload: String,
    pub trailer: String,
    pub filler: String,
    pub path: Vec<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateReceiverRequest {
    pub session_file: String,
    pub carriers_fasta: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateReceiverResponse {
    pub receiver_id: String,
    pub expected: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitEnvelopeRequest {
    pub envelope: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitEnvelopeResponse {
    /// accepted | duplicate | rejected | complete
    pub status: String,
    pub received: usize,
    pub expected: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReceiverStatusResponse {
    /// collecting | complete | failed
    pub state: String,
    pub received: usize,
    pub expected: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plaintext_b64: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{} ({})", .0.message, .0.code)]
    Api(ApiError),
    #[error(transparent)]
    Http(#[from] reqwest::Error),
}

impl ClientError {
    /// The API error code, if the service produced one.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api(e) => Some(&e.code),
            ClientError::Http(_) => None,
        }
    }
}

/// Thin async client over the service API.
#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Self {
        let mut base = base_url.into();
        while base.ends_with('/') {
            base.pop();
        }
        Client {
            base,
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        req: &Req,
    ) -> Result<Resp, ClientError> {
        let response = self
            .http
            .post(format!("{}{}", self.base, path))
            .json(req)
            .send()
            .await?;
        Self::unwrap_response(response).await
    }

    async fn unwrap_response<Resp: for<'de> Deserialize<'de>>(
        response: reqwest::Response,
    ) -> Result<Resp, ClientError> {
        if response.status().is_success() {
            Ok(response.json().await?)
        } else {
            Err(Self::error_from(response).await)
        }
    }

    async fn error_from(response: reqwest::Response) -> ClientError {
        let status = response.status();
        let body: ApiErrorBody = match response.json().await {
            Ok(body) => body,
            Err(_) => ApiErrorBody {
                error: ApiError {
                    code: codes::STRUCTURAL.into(),
                    message: format!("service returned {}", status),
                    seq_bits: None,
                },
            },
        };
        ClientError::Api(body.error)
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        self.http
            .get(format!("{}/v1/health", self.base))
            .send()
            .await?
            .error_for_status()?;
        Ok(())
    }

    pub async fn keygen(&self, req: &KeygenRequest) -> Result<KeygenResponse, ClientError> {
        self.post("/v1/keygen", req).await
    }

    pub async fn encode(&self, req: &EncodeRequest) -> Result<EncodeResponse, ClientError> {
        self.post("/v1/encode", req).await
    }

    pub async fn decode(&self, req: &DecodeRequest) -> Result<DecodeResponse, ClientError> {
        self.post("/v1/decode", req).await
    }

    pub async fn simulate(&self, req: &SimulateRequest) -> Result<SimulateResponse, ClientError> {
        self.post("/v1/simulate", req).await
    }

    pub async fn inspect(&self, req: &InspectRequest) -> Result<InspectResponse, ClientError> {
        self.post("/v1/inspect", req).await
    }

    pub async fn create_receiver(
        &self,
        req: &CreateReceiverRequest,
    ) -> Result<CreateReceiverResponse, ClientError> {
        self.post("/v1/receivers", req).await
    }

    pub async fn submit_envelope(
        &self,
        receiver_id: &str,
        envelope: &str,
    ) -> Result<SubmitEnvelopeResponse, ClientError> {
        self.post(
            &format!("/v1/receivers/{}/envelopes", receiver_id),
            &SubmitEnvelopeRequest {
                envelope: envelope.to_string(),
            },
        )
        .await
    }

    pub async fn receiver_status(
        &self,
        receiver_id: &str,
    ) -> Result<ReceiverStatusResponse, ClientError> {
        let response = self
            .http
            .get(format!("{}/v1/receivers/{}", self.base, receiver_id))
            .send()
            .await?;
        Self::unwrap_response(response).await
    }

    pub async fn delete_receiver(&self, receiver_id: &str) -> Result<(), ClientError> {
        let response = self
            .http
            .delete(format!("{}/v1/receivers/{}", self.base, receiver_id))
            .send()
            .await?;
        if response.status().is_success() {
            Ok(())
        } else {
            Err(Self::error_from(response).await)
        }
    }
}
