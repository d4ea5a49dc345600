//! The bit-exact envelope wire format: four newline-terminated text lines,
//! version / packet-number bits / stego sequence / MAC hex. Malformed input
//! is rejected before any cryptographic work.

use std::str::FromStr;

use thiserror::Error;

use crate::auth::AuthTag;
use crate::codec::{BitString, NucleotideSeq};
use crate::pipeline::StegoEnvelope;

pub const WIRE_VERSION: &str = "SPATIAL/1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("envelope line {0} is missing")]
    MissingLine(usize),
    #[error("unsupported version {0:?}")]
    BadVersion(String),
    #[error("line {line}: invalid character {symbol:?}")]
    BadAlphabet { line: usize, symbol: char },
    #[error("MAC line must be 64 lowercase hex characters")]
    BadTagLength,
    #[error("trailing data after the envelope")]
    TrailingData,
}

/// Exactly four text lines, each newline-terminated.
pub fn serialize_envelope(e: &StegoEnvelope) -> String {
    format!(
        "{}\n{}\n{}\n{}\n",
        WIRE_VERSION,
        e.seq_bits,
        e.sequence,
        e.mac.to_hex()
    )
}

/// Strict inverse of [`serialize_envelope`].
pub fn parse_envelope(text: &str) -> Result<StegoEnvelope, WireError> {
    let mut rest = text;
    let mut lines = Vec::with_capacity(4);
    for i in 0..4 {
        match rest.split_once('\n') {
            Some((line, tail)) => {
                lines.push(line);
                rest = tail;
            }
            None => return Err(WireError::MissingLine(i + 1)),
        }
    }
    if !rest.is_empty() {
        return Err(WireError::TrailingData);
    }

    if lines[0] != WIRE_VERSION {
        return Err(WireError::BadVersion(lines[0].to_string()));
    }
    let seq_bits = BitString::from_str(lines[1]).map_err(|_| WireError::BadAlphabet {
        line: 2,
        symbol: first_offender(lines[1], "01"),
    })?;
    let sequence = NucleotideSeq::from_str(lines[2]).map_err(|_| WireError::BadAlphabet {
        line: 3,
        symbol: first_offender(lines[2], "ACGT"),
    })?;
    let mac = AuthTag::from_hex(lines[3]).map_err(|_| WireError::BadTagLength)?;
    Ok(StegoEnvelope {
        seq_bits,
        sequence,
        mac,
    })
}

fn first_offender(line: &str, alphabet: &str) -> char {
    line.chars()
        .find(|c| !alphabet.contains(*c))
        .unwrap_or('?')
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> StegoEnvelope {
        StegoEnvelope {
            seq_bits: "000001".parse().unwrap(),
            sequence: "ACGTACGT".parse().unwrap(),
            mac: AuthTag::from_bytes([0xab; 32]),
        }
    }

    #[test]
    fn serializes_four_lines() {
        let text = serialize_envelope(&sample());
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines.len(), 5); // four lines, each terminated
        assert_eq!(lines[0], "SPATIAL/1");
        assert_eq!(lines[1], "000001");
        assert_eq!(lines[2], "ACGTACGT");
        assert_eq!(lines[3].len(), 64);
        assert_eq!(lines[4], "");
    }

    #[test]
    fn parse_inverts_serialize() {
        let e = sample();
        assert_eq!(parse_envelope(&serialize_envelope(&e)).unwrap(), e);
    }

    #[test]
    fn rejects_unknown_version() {
        let text = serialize_envelope(&sample()).replace("SPATIAL/1", "SPATIAL/2");
        assert_eq!(
            parse_envelope(&text),
            Err(WireError::BadVersion("SPATIAL/2".into()))
        );
    }

    #[test]
    fn rejects_bad_alphabet() {
        let text = serialize_envelope(&sample()).replace("ACGTACGT", "ACGTNCGT");
        assert_eq!(
            parse_envelope(&text),
            Err(WireError::BadAlphabet {
                line: 3,
                symbol: 'N'
            })
        );
        let text = serialize_envelope(&sample()).replace("000001", "00000x");
        assert_eq!(
            parse_envelope(&text),
            Err(WireError::BadAlphabet {
                line: 2,
                symbol: 'x'
            })
        );
    }

    #[test]
    fn rejects_bad_tag_and_shape() {
        let good = serialize_envelope(&sample());
        let text = good.replace(&"ab".repeat(32), &"AB".repeat(32));
        assert_eq!(parse_envelope(&text), Err(WireError::BadTagLength));

        assert_eq!(parse_envelope("SPATIAL/1\n01\n"), Err(WireError::MissingLine(3)));
        let text = format!("{}extra\n", good);
        assert_eq!(parse_envelope(&text), Err(WireError::TrailingData));
    }

    proptest! {
        #[test]
        fn round_trip_and_injectivity(
            bits_a in proptest::collection::vec(0u8..=1, 1..12),
            bits_b in proptest::collection::vec(0u8..=1, 1..12),
            seq_a in proptest::collection::vec(0usize..4, 1..64),
            seq_b in proptest::collection::vec(0usize..4, 1..64),
            tag_a in any::<[u8; 32]>(),
            tag_b in any::<[u8; 32]>(),
        ) {
            let make = |bits: &[u8], seq: &[usize], tag: [u8; 32]| StegoEnvelope {
                seq_bits: BitString::from_bits(bits.to_vec()),
                sequence: seq.iter().map(|&i| crate::codec::Nucleotide::ALL[i]).collect(),
                mac: AuthTag::from_bytes(tag),
            };
            let a = make(&bits_a, &seq_a, tag_a);
            let b = make(&bits_b, &seq_b, tag_b);
            prop_assert_eq!(parse_envelope(&serialize_envelope(&a)).unwrap(), a.clone());
            if a != b {
                prop_assert_ne!(serialize_envelope(&a), serialize_envelope(&b));
            }
        }
    }
}
