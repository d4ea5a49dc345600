//! The full sender transform S(P) and receiver transform R(DE) over a shared
//! session, plus the receiver-side arrival handling (dedup, then decode).
//!
//! The receiver verifies every MAC before any alignment or extraction work;
//! a tampered packet is rejected by name without ever being opened.

use thiserror::Error;

use crate::alignment::{star_msa, variable_columns, AlignError, MsaResult, ScoringScheme, VariablePositions};
use crate::auth::{compute_mac, verify_mac, AuthError, AuthTag};
use crate::codec::{bits_to_text, text_to_bits, BitString, CodecError, NucleotideSeq};
use crate::fragmentation::{
    deframe, encode_path, frame, header_width_nt, join, tear, FragmentError, TearPath, TearPlan,
};
use crate::session::{SessionConfig, SessionError};
use crate::stego::{detect_template, embed, extract, StegoError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("plaintext is {got} bits but the session fixes {expected}")]
    PlaintextLengthMismatch { expected: usize, got: usize },
    #[error("message of {total} bits exceeds the configured packet size limit of {max} bits")]
    MaxPacketBitsExceeded { total: usize, max: usize },
    #[error("tear plan has {got} leaves but the session fixes N={expected}")]
    PlanLeafCount { expected: usize, got: usize },
    #[error("expected {expected} packets, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("packet number field of packet {seq_bits:?} is {got} bits, expected {expected}")]
    BadSeqWidth {
        seq_bits: String,
        expected: usize,
        got: usize,
    },
    #[error("MAC check failed for packet {seq_bits}")]
    MacFailure { seq_bits: String },
    #[error("packet {envelope} carries an embedded number {embedded}")]
    SeqMismatch { envelope: String, embedded: String },
    #[error("joined message is {got} nucleotides, expected {expected}")]
    TotalSizeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Fragment(#[from] FragmentError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Stego(#[from] StegoError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// One transmitted packet: cleartext packet-number bits, the full stego
/// sequence, and the MAC over both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StegoEnvelope {
    pub seq_bits: BitString,
    pub sequence: NucleotideSeq,
    pub mac: AuthTag,
}

/// The alignment work both ends derive from the shared carriers. Computing it
/// is the expensive part of a session, so it is built once and reused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarrierContext {
    pub msa: MsaResult,
    pub variable: Vec<VariablePositions>,
}

impl CarrierContext {
    pub fn compute(carriers: &[NucleotideSeq], scoring: &ScoringScheme) -> Result<Self, AlignError> {
        let msa = star_msa(carriers, scoring)?;
        let variable = (0..carriers.len())
            .map(|k| variable_columns(&msa, k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CarrierContext { msa, variable })
    }
}

/// A validated config together with its carrier context.
#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    context: CarrierContext,
}

impl Session {
    pub fn prepare(config: SessionConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let context = CarrierContext::compute(&config.carriers, &config.scoring)?;
        Ok(Session { config, context })
    }

    /// Reuse a context previously computed for the same carriers and scoring.
    /// Only shape consistency is checked here.
    pub fn from_parts(config: SessionConfig, context: CarrierContext) -> Result<Self, PipelineError> {
        config.validate()?;
        if context.variable.len() != config.carriers.len() {
            return Err(AlignError::BadTemplateIndex {
                index: context.variable.len(),
                count: config.carriers.len(),
            }
            .into());
        }
        for (k, vp) in context.variable.iter().enumerate() {
            if vp.template_len != config.carriers[k].len() {
                return Err(StegoError::LengthMismatch {
                    expected: config.carriers[k].len(),
                    got: vp.template_len,
                }
                .into());
            }
        }
        Ok(Session { config, context })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn context(&self) -> &CarrierContext {
        &self.context
    }

    /// Usable variable positions of carrier `k`.
    pub fn capacity(&self, k: usize) -> usize {
        self.context.variable[k].capacity()
    }
}

/// Per-packet filler seed, derived so packets never share a filler stream.
fn packet_seed(master: u64, packet_index: usize) -> u64 {
    master ^ (packet_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Run the whole sender side: cipher, nucleotide-encode, tear, frame, embed,
/// authenticate. Returns one envelope per fragment, in leaf order.
pub fn sender_encode(
    session: &Session,
    plaintext: &[u8],
    plan: &TearPlan,
    filler_seed: u64,
) -> Result<Vec<StegoEnvelope>, PipelineError> {
    let cfg = &session.config;
    let bits = text_to_bits(plaintext);
    if bits.len() != cfg.total_message_bits {
        return Err(PipelineError::PlaintextLengthMismatch {
            expected: cfg.total_message_bits,
            got: bits.len(),
        });
    }
    if let Some(max) = cfg.max_packet_bits {
        if cfg.total_message_bits > max {
            return Err(PipelineError::MaxPacketBitsExceeded {
                total: cfg.total_message_bits,
                max,
            });
        }
    }
    if plan.leaf_count() != cfg.n_packets {
        return Err(PipelineError::PlanLeafCount {
            expected: cfg.n_packets,
            got: plan.leaf_count(),
        });
    }

    let cipher = cfg.crypto.apply(&bits)?;
    let encoded = cfg.sigma.encode(&cipher)?;
    let fragments = tear(&encoded, plan)?;

    let mut envelopes = Vec::with_capacity(fragments.len());
    for (k, fragment) in fragments.iter().enumerate() {
        let template = cfg
            .template_policy
            .template_for(k, cfg.carriers.len());
        let framed = frame(fragment, cfg)?;
        let stego = embed(
            &cfg.carriers[template],
            &session.context.variable[template],
            &framed,
            packet_seed(filler_seed, k),
        )?;
        let seq_bits = encode_path(&fragment.path, cfg.n_packets)?;
        let mac = compute_mac(&cfg.mac_key, &seq_bits, &stego.residues);
        envelopes.push(StegoEnvelope {
            seq_bits,
            sequence: stego.residues,
            mac,
        });
    }
    Ok(envelopes)
}

/// Run the whole receiver side on exactly N envelopes in any order.
pub fn receiver_decode(
    session: &Session,
    envelopes: &[StegoEnvelope],
) -> Result<Vec<u8>, PipelineError> {
    let cfg = &session.config;
    if envelopes.len() != cfg.n_packets {
        return Err(PipelineError::WrongCount {
            expected: cfg.n_packets,
            got: envelopes.len(),
        });
    }

    let seq_width = 2 * (cfg.n_packets - 1);
    for e in envelopes {
        if e.seq_bits.len() != seq_width {
            return Err(PipelineError::BadSeqWidth {
                seq_bits: e.seq_bits.to_string(),
                expected: seq_width,
                got: e.seq_bits.len(),
            });
        }
    }

    // Authentication comes first: nothing is extracted from a packet that
    // fails its MAC.
    for e in envelopes {
        if !verify_mac(&cfg.mac_key, &e.seq_bits, &e.sequence, &e.mac) {
            return Err(PipelineError::MacFailure {
                seq_bits: e.seq_bits.to_string(),
            });
        }
    }

    let mut fragments = Vec::with_capacity(envelopes.len());
    for e in envelopes {
        let template = detect_template(&e.sequence, &cfg.carriers, &session.context.variable)?;
        let extracted = extract(&e.sequence, &session.context.variable[template])?;
        let fragment = deframe(&extracted, cfg)?;
        let embedded = encode_path(&fragment.path, cfg.n_packets)?;
        if embedded != e.seq_bits {
            return Err(PipelineError::SeqMismatch {
                envelope: e.seq_bits.to_string(),
                embedded: embedded.to_string(),
            });
        }
        fragments.push(fragment);
    }

    let joined = join(&fragments)?;
    let expected_nt = cfg.total_message_bits / 2;
    if joined.len() != expected_nt {
        return Err(PipelineError::TotalSizeMismatch {
            expected: expected_nt,
            got: joined.len(),
        });
    }

    let cipher = cfg.sigma.decode(&joined);
    let bits = cfg.crypto.apply(&cipher)?;
    Ok(bits_to_text(&bits)?)
}

/// What one envelope looks like from the inside; diagnostic only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvelopeReport {
    pub seq_bits: String,
    pub mac_ok: bool,
    pub template_index: usize,
    pub header: NucleotideSeq,
    pub size: usize,
    pub payload: NucleotideSeq,
    pub trailer: NucleotideSeq,
    pub filler: NucleotideSeq,
    pub path: TearPath,
}

/// Open an envelope for inspection, regardless of its MAC status.
pub fn inspect_envelope(
    session: &Session,
    envelope: &StegoEnvelope,
) -> Result<EnvelopeReport, PipelineError> {
    let cfg = &session.config;
    let mac_ok = verify_mac(&cfg.mac_key, &envelope.seq_bits, &envelope.sequence, &envelope.mac);
    let template = detect_template(&envelope.sequence, &cfg.carriers, &session.context.variable)?;
    let extracted = extract(&envelope.sequence, &session.context.variable[template])?;
    let header_nt = header_width_nt(cfg.total_message_bits);
    let fragment = deframe(&extracted, cfg)?;
    let header = extracted.slice(0..header_nt);
    let size = cfg.crypto.apply(&cfg.sigma.decode(&header))?.to_uint();
    let trailer_nt = cfg.n_packets - 1;
    let trailer = extracted.slice(header_nt + size - trailer_nt..header_nt + size);
    let filler = extracted.slice(header_nt + size..extracted.len());
    Ok(EnvelopeReport {
        seq_bits: envelope.seq_bits.to_string(),
        mac_ok,
        template_index: template,
        header,
        size,
        payload: fragment.payload,
        trailer,
        filler,
        path: fragment.path,
    })
}

/// Why an arrival was not kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrivalFate {
    BadMac,
    Duplicate,
}

/// The receiver's collection step over raw arrivals: per packet number, the
/// first MAC-valid copy wins; extra copies are dropped. A number with no
/// valid copy keeps its first arrival so the failure is reported by name.
#[derive(Debug, Clone, Default)]
pub struct DedupReport {
    pub kept: Vec<StegoEnvelope>,
    pub rejected: Vec<(String, ArrivalFate)>,
}

pub fn dedup_arrivals(session: &Session, arrivals: &[StegoEnvelope]) -> DedupReport {
    let cfg = &session.config;
    let mut order: Vec<String> = Vec::new();
    let mut slots: std::collections::HashMap<String, (StegoEnvelope, bool)> =
        std::collections::HashMap::new();
    let mut rejected = Vec::new();

    for e in arrivals {
        let key = e.seq_bits.to_string();
        let valid = verify_mac(&cfg.mac_key, &e.seq_bits, &e.sequence, &e.mac);
        if !valid {
            rejected.push((key.clone(), ArrivalFate::BadMac));
        }
        match slots.get_mut(&key) {
            None => {
                order.push(key.clone());
                slots.insert(key, (e.clone(), valid));
            }
            Some((slot, slot_valid)) => {
                if valid && !*slot_valid {
                    *slot = e.clone();
                    *slot_valid = true;
                } else {
                    rejected.push((key, ArrivalFate::Duplicate));
                }
            }
        }
    }

    let kept = order
        .into_iter()
        .map(|key| slots.remove(&key).expect("slot recorded for every key").0)
        .collect();
    DedupReport { kept, rejected }
}

/// Dedup then decode: the receiver path for a batch of raw arrivals.
pub fn decode_arrivals(
    session: &Session,
    arrivals: &[StegoEnvelope],
) -> (DedupReport, Result<Vec<u8>, PipelineError>) {
    let report = dedup_arrivals(session, arrivals);
    let result = receiver_decode(session, &report.kept);
    (report, result)
}
