//! Shared fixtures for the integration suites: the shipped carriers, their
//! (expensive) alignment context computed once per process, and the golden
//! values of the worked protocol example.

use std::str::FromStr;
use std::sync::OnceLock;

use spatial_core::alignment::ScoringScheme;
use spatial_core::auth::MacKey;
use spatial_core::codec::{CryptoMap, NucleotideSeq, SigmaMap};
use spatial_core::fasta::parse_fasta;
use spatial_core::pipeline::{CarrierContext, Session};
use spatial_core::session::{SessionConfig, TemplatePolicy};

pub const CARRIERS_FASTA: &str = include_str!("../../../../fixtures/carriers.fa");

pub const DEMO_PLAINTEXT: &[u8] = b"I AM SUGATA SANYAL";
pub const DEMO_PLAN: &str = "(23,(8,(9,32)))";

/// 144-bit big-endian ASCII expansion of the demo plaintext.
pub const DEMO_BITS: &str = "010010010010000001000001010011010010000001010011\
                             010101010100011101000001010101000100000100100000\
                             010100110100000101001110010110010100000101001100";

pub const DEMO_FRAGMENTS: [&str; 4] = [
    "GTCGTCTTGTTGGTAGTCTTGGT",
    "AGGGGGTG",
    "AGTTGGGGT",
    "GTTGTCTTGGTAGTTGGTACGGCGGTTGGTAT",
];
pub const DEMO_HEADERS: [&str; 4] = ["TGCC", "TTCA", "TTAT", "TCTA"];
pub const DEMO_TRAILERS: [&str; 4] = ["AAC", "AGC", "GGC", "GGG"];
pub const DEMO_SEQ_BITS: [&str; 4] = ["000001", "001001", "101001", "101010"];

pub fn demo_bits() -> String {
    DEMO_BITS.replace(char::is_whitespace, "")
}

pub fn fixture_carriers() -> &'static Vec<NucleotideSeq> {
    static CARRIERS: OnceLock<Vec<NucleotideSeq>> = OnceLock::new();
    CARRIERS.get_or_init(|| {
        parse_fasta(CARRIERS_FASTA)
            .expect("shipped fixture parses")
            .into_iter()
            .map(|r| r.seq)
            .collect()
    })
}

/// The star alignment of the fixture carriers under default scoring,
/// computed once and shared by every test in the process.
pub fn fixture_context() -> &'static CarrierContext {
    static CONTEXT: OnceLock<CarrierContext> = OnceLock::new();
    CONTEXT.get_or_init(|| {
        CarrierContext::compute(fixture_carriers(), &ScoringScheme::default())
            .expect("fixture carriers align")
    })
}

pub fn fixture_config(n_packets: usize, total_message_bits: usize) -> SessionConfig {
    SessionConfig {
        mac_key: MacKey::new(b"an integration test mac key 1234".to_vec()).unwrap(),
        sigma: SigmaMap::standard(),
        crypto: CryptoMap::Complement,
        carriers: fixture_carriers().clone(),
        carrier_names: vec!["carrier1".into(), "carrier2".into(), "carrier3".into()],
        scoring: ScoringScheme::default(),
        n_packets,
        total_message_bits,
        template_policy: TemplatePolicy::RoundRobin,
        max_packet_bits: None,
    }
}

/// A session over the fixture carriers, reusing the shared context.
pub fn fixture_session(config: SessionConfig) -> Session {
    Session::from_parts(config, fixture_context().clone()).expect("fixture session is valid")
}

pub fn demo_session() -> Session {
    fixture_session(fixture_config(4, 144))
}

pub fn demo_plan() -> spatial_core::fragmentation::TearPlan {
    spatial_core::fragmentation::TearPlan::from_str(DEMO_PLAN).unwrap()
}
