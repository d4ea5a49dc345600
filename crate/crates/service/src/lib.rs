//! HTTP service over the stego-packet pipeline. Stateless transforms
//! (keygen/encode/decode/simulate/inspect) take the session material in the
//! request body; receivers are the stateful part, collecting envelopes as
//! they trickle in over separate connections until a session completes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::{SeedableRng, TryRngCore};
use rand_chacha::ChaCha8Rng;
use uuid::Uuid;

use spatial_client::{
    codes, ApiError, ApiErrorBody, CapacityReport, CarrierCapacity, CreateReceiverRequest,
    CreateReceiverResponse, DecodeRequest, DecodeResponse, EncodeRequest, EncodeResponse,
    EnvelopeOut, InspectRequest, InspectResponse, KeygenRequest, KeygenResponse, PacketCapacity,
    ReceiverStatusResponse, SimulateRequest, SimulateResponse, SubmitEnvelopeRequest,
    SubmitEnvelopeResponse,
};
use spatial_core::alignment::ScoringScheme;
use spatial_core::auth::verify_mac;
use spatial_core::codec::NucleotideSeq;
use spatial_core::fasta::{parse_fasta, FastaError};
use spatial_core::fragmentation::{header_width_nt, FragmentError, TearPlan};
use spatial_core::netsim::{parse_channels_config, simulate_send, SimConfigError};
use spatial_core::pipeline::{
    decode_arrivals, inspect_envelope, receiver_decode, sender_encode, ArrivalFate,
    CarrierContext, PipelineError, Session, StegoEnvelope,
};
use spatial_core::session::{keygen, parse_session_text, render_session_text, SessionError};
use spatial_core::stego::StegoError;
use spatial_core::wire::{parse_envelope, WireError};
use spatial_core::{loopback, SessionConfig};

/// An API failure with its HTTP status and machine-readable code.
#[derive(Debug)]
pub struct ServiceError {
    status: StatusCode,
    error: ApiError,
}

impl ServiceError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ServiceError {
            status,
            error: ApiError {
                code: code.to_string(),
                message: message.into(),
                seq_bits: None,
            },
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, codes::CONFIG, message)
    }

    fn structural(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, codes::STRUCTURAL, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, codes::STRUCTURAL, message)
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status, Json(ApiErrorBody { error: self.error })).into_response()
    }
}

impl From<SessionError> for ServiceError {
    fn from(e: SessionError) -> Self {
        ServiceError::config(e.to_string())
    }
}

impl From<FastaError> for ServiceError {
    fn from(e: FastaError) -> Self {
        ServiceError::config(e.to_string())
    }
}

impl From<SimConfigError> for ServiceError {
    fn from(e: SimConfigError) -> Self {
        ServiceError::config(e.to_string())
    }
}

impl From<WireError> for ServiceError {
    fn from(e: WireError) -> Self {
        ServiceError::structural(e.to_string())
    }
}

impl From<PipelineError> for ServiceError {
    fn from(e: PipelineError) -> Self {
        let message = e.to_string();
        match e {
            PipelineError::MacFailure { seq_bits } => {
                let mut err =
                    Self::new(StatusCode::UNPROCESSABLE_ENTITY, codes::MAC_FAILURE, message);
                err.error.seq_bits = Some(seq_bits);
                err
            }
            PipelineError::Stego(StegoError::CapacityExceeded { .. })
            | PipelineError::Fragment(FragmentError::SizeOverflow { .. }) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, codes::CAPACITY, message)
            }
            PipelineError::PlaintextLengthMismatch { .. }
            | PipelineError::PlanLeafCount { .. }
            | PipelineError::MaxPacketBitsExceeded { .. }
            | PipelineError::Session(_)
            | PipelineError::Align(_) => ServiceError::config(message),
            _ => ServiceError::structural(message),
        }
    }
}

/// One collecting receiver.
struct ReceiverEntry {
    session: Session,
    received: HashMap<String, StegoEnvelope>,
    state: ReceiverState,
}

enum ReceiverState {
    Collecting,
    Complete(Vec<u8>),
    Failed(String),
}

type ContextKey = (Vec<NucleotideSeq>, ScoringScheme);

#[derive(Clone, Default)]
pub struct AppState {
    receivers: Arc<Mutex<HashMap<Uuid, ReceiverEntry>>>,
    // The star alignment of a carrier set is the expensive part of session
    // setup and depends only on (carriers, scoring); cache it across requests.
    contexts: Arc<Mutex<HashMap<ContextKey, Arc<CarrierContext>>>>,
}

impl AppState {
    fn context_for(&self, config: &SessionConfig) -> Result<Arc<CarrierContext>, ServiceError> {
        let key = (config.carriers.clone(), config.scoring);
        if let Some(ctx) = self.contexts.lock().unwrap().get(&key) {
            return Ok(ctx.clone());
        }
        let ctx = Arc::new(
            CarrierContext::compute(&config.carriers, &config.scoring)
                .map_err(|e| ServiceError::config(e.to_string()))?,
        );
        let mut cache = self.contexts.lock().unwrap();
        if cache.len() >= 32 {
            cache.clear();
        }
        cache.insert(key, ctx.clone());
        Ok(ctx)
    }

    fn load_session(
        &self,
        session_file: &str,
        carriers_fasta: &str,
    ) -> Result<Session, ServiceError> {
        let file = parse_session_text(session_file)?;
        let records = parse_fasta(carriers_fasta)?;
        let config = file.into_config(records)?;
        let context = self.context_for(&config)?;
        Ok(Session::from_parts(config, (*context).clone())?)
    }
}

pub fn create_app() -> Router {
    create_app_with_state(AppState::default())
}

pub fn create_app_with_state(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/keygen", post(keygen_handler))
        .route("/v1/encode", post(encode_handler))
        .route("/v1/decode", post(decode_handler))
        .route("/v1/simulate", post(simulate_handler))
        .route("/v1/inspect", post(inspect_handler))
        .route("/v1/receivers", post(create_receiver))
        .route(
            "/v1/receivers/{id}",
            get(receiver_status).delete(delete_receiver),
        )
        .route("/v1/receivers/{id}/envelopes", post(submit_envelope))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "protocol": spatial_core::wire::WIRE_VERSION }))
}

async fn keygen_handler(
    Json(req): Json<KeygenRequest>,
) -> Result<Json<KeygenResponse>, ServiceError> {
    let out = tokio::task::spawn_blocking(move || -> Result<KeygenResponse, ServiceError> {
        let records = parse_fasta(&req.carriers_fasta)?;
        let mut seed = [0u8; 32];
        rand::rngs::OsRng
            .try_fill_bytes(&mut seed)
            .map_err(|e| ServiceError::config(format!("entropy source failed: {}", e)))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        let file = keygen(
            req.n_packets,
            req.total_message_bits,
            &req.carriers_path,
            &records,
            &mut rng,
        )?;
        Ok(KeygenResponse {
            session_file: render_session_text(&file),
        })
    })
    .await
    .expect("keygen task");
    out.map(Json)
}

async fn encode_handler(
    State(state): State<AppState>,
    Json(req): Json<EncodeRequest>,
) -> Result<Json<EncodeResponse>, ServiceError> {
    let out = tokio::task::spawn_blocking(move || -> Result<EncodeResponse, ServiceError> {
        let session = state.load_session(&req.session_file, &req.carriers_fasta)?;
        let cfg = session.config();
        let plaintext = BASE64
            .decode(&req.plaintext_b64)
            .map_err(|e| ServiceError::config(format!("plaintext_b64: {}", e)))?;

        let plan = match &req.plan {
            Some(text) => text
                .parse::<TearPlan>()
                .map_err(|e| ServiceError::config(e.to_string()))?,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
                TearPlan::random(cfg.total_message_bits / 2, cfg.n_packets, &mut rng)
                    .map_err(|e| ServiceError::config(e.to_string()))?
            }
        };

        let envelopes = sender_encode(&session, &plaintext, &plan, req.seed)?;

        let carriers: Vec<CarrierCapacity> = cfg
            .carriers
            .iter()
            .zip(&cfg.carrier_names)
            .enumerate()
            .map(|(k, (seq, name))| CarrierCapacity {
                name: name.clone(),
                length: seq.len(),
                variable_positions: session.capacity(k),
            })
            .collect();
        let header_nt = header_width_nt(cfg.total_message_bits);
        let packets: Vec<PacketCapacity> = envelopes
            .iter()
            .zip(plan.leaf_lengths())
            .enumerate()
            .map(|(k, (envelope, leaf_len))| {
                let template = cfg.template_policy.template_for(k, cfg.carriers.len());
                PacketCapacity {
                    seq_bits: envelope.seq_bits.to_string(),
                    template_index: template,
                    template_name: cfg.carrier_names[template].clone(),
                    stream_len: header_nt + leaf_len + (cfg.n_packets - 1),
                    capacity: session.capacity(template),
                }
            })
            .collect();

        Ok(EncodeResponse {
            envelopes: envelopes
                .iter()
                .map(|e| EnvelopeOut {
                    seq_bits: e.seq_bits.to_string(),
                    wire: spatial_core::wire::serialize_envelope(e),
                })
                .collect(),
            report: CapacityReport { carriers, packets },
            plan: plan.to_string(),
        })
    })
    .await
    .expect("encode task");
    out.map(Json)
}

async fn decode_handler(
    State(state): State<AppState>,
    Json(req): Json<DecodeRequest>,
) -> Result<Json<DecodeResponse>, ServiceError> {
    let out = tokio::task::spawn_blocking(move || -> Result<DecodeResponse, ServiceError> {
        let session = state.load_session(&req.session_file, &req.carriers_fasta)?;
        let envelopes = req
            .envelopes
            .iter()
            .map(|text| parse_envelope(text))
            .collect::<Result<Vec<_>, _>>()?;
        let plaintext = receiver_decode(&session, &envelopes)?;
        Ok(DecodeResponse {
            plaintext_b64: BASE64.encode(plaintext),
        })
    })
    .await
    .expect("decode task");
    out.map(Json)
}

async fn simulate_handler(
    State(state): State<AppState>,
    Json(req): Json<SimulateRequest>,
) -> Result<Json<SimulateResponse>, ServiceError> {
    let out = tokio::task::spawn_blocking(move || -> Result<SimulateResponse, ServiceError> {
        let session = state.load_session(&req.session_file, &req.carriers_fasta)?;
        let cfg = session.config();
        let plaintext = BASE64
            .decode(&req.plaintext_b64)
            .map_err(|e| ServiceError::config(format!("plaintext_b64: {}", e)))?;
        let (channels, timeout_ms) = parse_channels_config(&req.channels_config)?;

        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let plan = TearPlan::random(cfg.total_message_bits / 2, cfg.n_packets, &mut rng)
            .map_err(|e| ServiceError::config(e.to_string()))?;
        let envelopes = sender_encode(&session, &plaintext, &plan, req.seed)?;
        let outcome = simulate_send(&envelopes, &channels, timeout_ms)?;

        let arrivals = if req.loopback {
            loopback::transfer(&outcome.arrivals)
                .map_err(|e| ServiceError::structural(e.to_string()))?
        } else {
            outcome.arrivals
        };

        let (report, result) = decode_arrivals(&session, &arrivals);
        let rejected: Vec<String> = report
            .rejected
            .iter()
            .filter(|(_, fate)| *fate == ArrivalFate::BadMac)
            .map(|(seq, _)| seq.clone())
            .collect();
        let events = outcome.events.iter().map(|e| e.to_string()).collect();
        Ok(match result {
            Ok(plaintext) => SimulateResponse {
                success: true,
                plaintext_b64: Some(BASE64.encode(plaintext)),
                failure: None,
                events,
                rejected,
                arrivals: arrivals.len(),
                kept: report.kept.len(),
            },
            Err(e) => SimulateResponse {
                success: false,
                plaintext_b64: None,
                failure: Some(e.to_string()),
                events,
                rejected,
                arrivals: arrivals.len(),
                kept: report.kept.len(),
            },
        })
    })
    .await
    .expect("simulate task");
    out.map(Json)
}

async fn inspect_handler(
    State(state): State<AppState>,
    Json(req): Json<InspectRequest>,
) -> Result<Json<InspectResponse>, ServiceError> {
    let out = tokio::task::spawn_blocking(move || -> Result<InspectResponse, ServiceError> {
        let session = state.load_session(&req.session_file, &req.carriers_fasta)?;
        let envelope = parse_envelope(&req.envelope)?;
        let report = inspect_envelope(&session, &envelope)?;
        Ok(InspectResponse {
            seq_bits: report.seq_bits,
            mac_ok: report.mac_ok,
            template_index: report.template_index,
            template_name: session.config().carrier_names[report.template_index].clone(),
            header: report.header.to_string(),
            size: report.size,
            payload: report.payload.to_string(),
            trailer: report.trailer.to_string(),
            filler: report.filler.to_string(),
            path: report.path.digits().to_vec(),
        })
    })
    .await
    .expect("inspect task");
    out.map(Json)
}

async fn create_receiver(
    State(state): State<AppState>,
    Json(req): Json<CreateReceiverRequest>,
) -> Result<Json<CreateReceiverResponse>, ServiceError> {
    let out = tokio::task::spawn_blocking(move || -> Result<CreateReceiverResponse, ServiceError> {
        let session = state.load_session(&req.session_file, &req.carriers_fasta)?;
        let expected = session.config().n_packets;
        let id = Uuid::new_v4();
        state.receivers.lock().unwrap().insert(
            id,
            ReceiverEntry {
                session,
                received: HashMap::new(),
                state: ReceiverState::Collecting,
            },
        );
        Ok(CreateReceiverResponse {
            receiver_id: id.to_string(),
            expected,
        })
    })
    .await
    .expect("create receiver task");
    out.map(Json)
}

async fn submit_envelope(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SubmitEnvelopeRequest>,
) -> Result<Json<SubmitEnvelopeResponse>, ServiceError> {
    let id = Uuid::parse_str(&id).map_err(|_| ServiceError::not_found("unknown receiver"))?;
    let envelope = parse_envelope(&req.envelope)?;

    let mut receivers = state.receivers.lock().unwrap();
    let entry = receivers
        .get_mut(&id)
        .ok_or_else(|| ServiceError::not_found("unknown receiver"))?;
    let cfg = entry.session.config();
    let expected = cfg.n_packets;

    let key = envelope.seq_bits.to_string();
    if !verify_mac(&cfg.mac_key, &envelope.seq_bits, &envelope.sequence, &envelope.mac) {
        return Ok(Json(SubmitEnvelopeResponse {
            status: "rejected".into(),
            received: entry.received.len(),
            expected,
            reason: Some(format!("MAC check failed for packet {}", key)),
        }));
    }
    if entry.received.contains_key(&key) {
        return Ok(Json(SubmitEnvelopeResponse {
            status: "duplicate".into(),
            received: entry.received.len(),
            expected,
            reason: None,
        }));
    }
    entry.received.insert(key, envelope);

    let received = entry.received.len();
    let mut status = "accepted";
    if received == expected && matches!(entry.state, ReceiverState::Collecting) {
        let envelopes: Vec<StegoEnvelope> = entry.received.values().cloned().collect();
        entry.state = match receiver_decode(&entry.session, &envelopes) {
            Ok(plaintext) => ReceiverState::Complete(plaintext),
            Err(e) => ReceiverState::Failed(e.to_string()),
        };
        status = "complete";
    }
    Ok(Json(SubmitEnvelopeResponse {
        status: status.into(),
        received,
        expected,
        reason: None,
    }))
}

async fn receiver_status(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ReceiverStatusResponse>, ServiceError> {
    let id = Uuid::parse_str(&id).map_err(|_| ServiceError::not_found("unknown receiver"))?;
    let receivers = state.receivers.lock().unwrap();
    let entry = receivers
        .get(&id)
        .ok_or_else(|| ServiceError::not_found("unknown receiver"))?;
    let (status, plaintext_b64, error) = match &entry.state {
        ReceiverState::Collecting => ("collecting", None, None),
        ReceiverState::Complete(plaintext) => ("complete", Some(BASE64.encode(plaintext)), None),
        ReceiverState::Failed(reason) => ("failed", None, Some(reason.clone())),
    };
    Ok(Json(ReceiverStatusResponse {
        state: status.into(),
        received: entry.received.len(),
        expected: entry.session.config().n_packets,
        plaintext_b64,
        error,
    }))
}

async fn delete_receiver(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ServiceError> {
    let id = Uuid::parse_str(&id).map_err(|_| ServiceError::not_found("unknown receiver"))?;
    state
        .receivers
        .lock()
        .unwrap()
        .remove(&id)
        .ok_or_else(|| ServiceError::not_found("unknown receiver"))?;
    Ok(StatusCode::NO_CONTENT)
}
