//! A steganographic packet protocol over nucleotide sequences.
//!
//! A message is ciphered bit-wise, mapped onto the {A,C,G,T} alphabet, torn
//! into a tree of fragments, and each fragment is framed (size header, path
//! trailer) and written into the variable columns of a publicly known carrier
//! sequence. Packets travel as independent look-alike gene sequences over
//! different channels; the receiver authenticates each one, re-derives the
//! same alignment, extracts, reassembles and deciphers.
//!
//! Modules follow the pipeline:
//!
//! - [`codec`]: bits, the keyed crypto involution, the dibit/nucleotide map
//! - [`fragmentation`]: tear tree, packet-number codec, size/path framing
//! - [`alignment`]: pairwise DP and center-star MSA, variable columns
//! - [`stego`]: embed/extract against a template's variable positions
//! - [`auth`]: per-packet HMAC-SHA-256
//! - [`pipeline`]: the composed sender and receiver transforms
//! - [`wire`], [`netsim`], [`loopback`]: envelope format and transports
//! - [`session`], [`fasta`]: the shared secret and carrier ingestion

pub mod alignment;
pub mod auth;
pub mod codec;
pub mod fasta;
pub mod fragmentation;
pub mod loopback;
pub mod netsim;
pub mod pipeline;
pub mod session;
pub mod stego;
pub mod wire;

pub use alignment::{MsaResult, PairwiseAlignment, ScoringScheme, VariablePositions};
pub use auth::{AuthTag, MacKey};
pub use codec::{BitString, CryptoMap, Nucleotide, NucleotideSeq, SigmaMap};
pub use fragmentation::{FramedStream, Fragment, TearPath, TearPlan};
pub use pipeline::{CarrierContext, PipelineError, Session, StegoEnvelope};
pub use session::{SessionConfig, TemplatePolicy};
