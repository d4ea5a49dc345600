//! FASTA parsing for carrier sequences. The protocol alphabet is strict:
//! anything outside A/C/G/T (after case folding) rejects the record, because
//! a carrier with ambiguity codes cannot be embedded into or compared against.

use thiserror::Error;

use crate::codec::{Nucleotide, NucleotideSeq};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FastaError {
    #[error("line {0}: sequence data before the first header")]
    DataBeforeHeader(usize),
    #[error("record {name:?}: invalid symbol {symbol:?}")]
    BadSymbol { name: String, symbol: char },
    #[error("record {0:?} has an empty sequence")]
    EmptyRecord(String),
    #[error("no records found")]
    NoRecords,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastaRecord {
    pub name: String,
    pub seq: NucleotideSeq,
}

/// Parse FASTA text: `>` header lines followed by sequence lines.
/// Lowercase is folded to uppercase; whitespace inside sequence lines is
/// ignored.
pub fn parse_fasta(text: &str) -> Result<Vec<FastaRecord>, FastaError> {
    let mut records: Vec<FastaRecord> = Vec::new();
    let mut current: Option<(String, NucleotideSeq)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            if let Some((name, seq)) = current.take() {
                if seq.is_empty() {
                    return Err(FastaError::EmptyRecord(name));
                }
                records.push(FastaRecord { name, seq });
            }
            let name = header.split_whitespace().next().unwrap_or("").to_string();
            current = Some((name, NucleotideSeq::new()));
        } else {
            let (name, seq) = current
                .as_mut()
                .ok_or(FastaError::DataBeforeHeader(idx + 1))?;
            for ch in line.chars() {
                if ch.is_whitespace() {
                    continue;
                }
                let upper = ch.to_ascii_uppercase();
                let n = Nucleotide::from_ascii(upper as u8).ok_or(FastaError::BadSymbol {
                    name: name.clone(),
                    symbol: ch,
                })?;
                seq.push(n);
            }
        }
    }
    if let Some((name, seq)) = current.take() {
        if seq.is_empty() {
            return Err(FastaError::EmptyRecord(name));
        }
        records.push(FastaRecord { name, seq });
    }
    if records.is_empty() {
        return Err(FastaError::NoRecords);
    }
    Ok(records)
}
