//! Writing a framed stream into a template's variable positions and reading
//! it back out. Leftover variable positions are filled with seeded random
//! nucleotides so a short stream never betrays its own length.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::alignment::VariablePositions;
use crate::codec::{Nucleotide, NucleotideSeq};
use crate::fragmentation::FramedStream;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StegoError {
    #[error("stream needs {needed} variable positions but the template offers {capacity}")]
    CapacityExceeded { needed: usize, capacity: usize },
    #[error("sequence length {got} does not match the template length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no carrier matches the received sequence")]
    UnknownCarrier,
    #[error("carriers {0} and {1} both match the received sequence")]
    AmbiguousTemplate(usize, usize),
}

/// A carrier copy with a framed stream written into its variable positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StegoSequence {
    pub residues: NucleotideSeq,
    pub template_index: usize,
}

/// Write `stream` into the template: header, payload, trailer, then seeded
/// random filler, consuming variable positions in increasing order.
pub fn embed(
    template: &NucleotideSeq,
    vp: &VariablePositions,
    stream: &FramedStream,
    filler_seed: u64,
) -> Result<StegoSequence, StegoError> {
    if template.len() != vp.template_len {
        return Err(StegoError::LengthMismatch {
            expected: vp.template_len,
            got: template.len(),
        });
    }
    if stream.len() > vp.positions.len() {
        return Err(StegoError::CapacityExceeded {
            needed: stream.len(),
            capacity: vp.positions.len(),
        });
    }
    let mut residues: Vec<Nucleotide> = template.residues().to_vec();
    let data = stream.concat();
    let mut rng = ChaCha8Rng::seed_from_u64(filler_seed);
    for (slot, &pos) in vp.positions.iter().enumerate() {
        residues[pos] = if slot < data.len() {
            data[slot]
        } else {
            Nucleotide::ALL[rng.random_range(0..4)]
        };
    }
    Ok(StegoSequence {
        residues: NucleotideSeq::from_residues(residues),
        template_index: vp.template_index,
    })
}

/// Read the residues at the variable positions, in increasing order. The
/// result starts with header ‖ payload ‖ trailer and ends with filler.
pub fn extract(stego: &NucleotideSeq, vp: &VariablePositions) -> Result<NucleotideSeq, StegoError> {
    if stego.len() != vp.template_len {
        return Err(StegoError::LengthMismatch {
            expected: vp.template_len,
            got: stego.len(),
        });
    }
    Ok(vp.positions.iter().map(|&p| stego[p]).collect())
}

/// Find the unique carrier the sequence was built from: same length, and
/// agreeing everywhere outside that carrier's variable positions.
pub fn detect_template(
    stego: &NucleotideSeq,
    carriers: &[NucleotideSeq],
    vps: &[VariablePositions],
) -> Result<usize, StegoError> {
    debug_assert_eq!(carriers.len(), vps.len());
    let mut found = None;
    for (k, (carrier, vp)) in carriers.iter().zip(vps).enumerate() {
        if carrier.len() != stego.len() {
            continue;
        }
        let mut variable = vec![false; carrier.len()];
        for &p in &vp.positions {
            variable[p] = true;
        }
        let agrees = (0..carrier.len()).all(|i| variable[i] || carrier[i] == stego[i]);
        if agrees {
            if let Some(prev) = found {
                return Err(StegoError::AmbiguousTemplate(prev, k));
            }
            found = Some(k);
        }
    }
    found.ok_or(StegoError::UnknownCarrier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{star_msa, variable_columns, ScoringScheme};
    use proptest::prelude::*;

    fn seq(s: &str) -> NucleotideSeq {
        s.parse().unwrap()
    }

    fn stream(header: &str, payload: &str, trailer: &str) -> FramedStream {
        FramedStream {
            header: seq(header),
            payload: seq(payload),
            trailer: seq(trailer),
        }
    }

    fn vp(template_index: usize, template_len: usize, positions: &[usize]) -> VariablePositions {
        VariablePositions {
            template_index,
            template_len,
            positions: positions.to_vec(),
        }
    }

    #[test]
    fn embed_hand_placement() {
        let out = embed(&seq("AAAAAA"), &vp(0, 6, &[1, 3, 5]), &stream("G", "T", "C"), 0).unwrap();
        assert_eq!(out.residues.to_string(), "AGATAC");
        assert_eq!(out.template_index, 0);
    }

    #[test]
    fn embed_degenerate_full_cover() {
        let template = seq("AAAA");
        let out = embed(
            &template,
            &vp(0, 4, &[0, 1, 2, 3]),
            &stream("G", "TC", "A"),
            9,
        )
        .unwrap();
        assert_eq!(out.residues.to_string(), "GTCA");
    }

    #[test]
    fn embed_filler_is_seeded() {
        let template = seq("AAAAAA");
        let empty = stream("", "", "");
        let a = embed(&template, &vp(0, 6, &[0, 2, 4]), &empty, 42).unwrap();
        let b = embed(&template, &vp(0, 6, &[0, 2, 4]), &empty, 42).unwrap();
        assert_eq!(a, b);
        // Untouched positions keep the template residue.
        assert_eq!(a.residues[1], Nucleotide::A);
        assert_eq!(a.residues[3], Nucleotide::A);
        assert_eq!(a.residues[5], Nucleotide::A);
    }

    #[test]
    fn embed_rejects_overflow() {
        let err = embed(&seq("AAAA"), &vp(0, 4, &[1]), &stream("G", "T", "C"), 0).unwrap_err();
        assert_eq!(
            err,
            StegoError::CapacityExceeded {
                needed: 3,
                capacity: 1
            }
        );
    }

    #[test]
    fn extract_inverts_embed_prefix() {
        let out = extract(&seq("AGATAC"), &vp(0, 6, &[1, 3, 5])).unwrap();
        assert_eq!(out.to_string(), "GTC");
        assert!(extract(&seq("ACGT"), &vp(0, 4, &[])).unwrap().is_empty());
    }

    #[test]
    fn extract_rejects_length_mismatch() {
        assert!(matches!(
            extract(&seq("AAA"), &vp(0, 6, &[1])),
            Err(StegoError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn detect_template_round_trip() {
        // Pairwise distinct lengths keep detection unambiguous.
        let carriers = vec![
            seq("ACGTACGTACGTACGTACGT"),
            seq("ACTTACGAACGATCGTAAGTC"),
            seq("GCGTACCTACGTTCGAACGATTT"),
        ];
        let msa = star_msa(&carriers, &ScoringScheme::default()).unwrap();
        let vps: Vec<_> = (0..3)
            .map(|k| variable_columns(&msa, k).unwrap())
            .collect();
        let data = stream("GT", "CA", "T");
        for k in 0..3 {
            assert!(vps[k].capacity() >= data.len());
            let stego = embed(&carriers[k], &vps[k], &data, 5).unwrap();
            assert_eq!(detect_template(&stego.residues, &carriers, &vps).unwrap(), k);
        }
    }

    #[test]
    fn detect_template_accepts_unmodified_carrier() {
        let carriers = vec![seq("ACGTAC"), seq("ACTTACGA")];
        let vps = vec![vp(0, 6, &[0]), vp(1, 8, &[0])];
        assert_eq!(detect_template(&carriers[0], &carriers, &vps).unwrap(), 0);
    }

    #[test]
    fn detect_template_rejects_unknown_length() {
        let carriers = vec![seq("ACGTAC"), seq("ACTTACGA")];
        let vps = vec![vp(0, 6, &[0]), vp(1, 8, &[0])];
        assert_eq!(
            detect_template(&seq("ACG"), &carriers, &vps),
            Err(StegoError::UnknownCarrier)
        );
    }

    #[test]
    fn detect_template_reports_ambiguity() {
        // Two carriers that differ only inside each other's variable sets.
        let carriers = vec![seq("AAAA"), seq("AAAT")];
        let vps = vec![vp(0, 4, &[3]), vp(1, 4, &[3])];
        assert_eq!(
            detect_template(&seq("AAAG"), &carriers, &vps),
            Err(StegoError::AmbiguousTemplate(0, 1))
        );
    }

    proptest! {
        #[test]
        fn embed_touches_only_variable_positions(
            seed in any::<u64>(),
            len in 8usize..64,
            stream_len in 0usize..8,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let template: NucleotideSeq = (0..len)
                .map(|_| Nucleotide::ALL[rng.random_range(0..4)])
                .collect();
            let mut positions: Vec<usize> = (0..len).filter(|_| rng.random_bool(0.4)).collect();
            positions.truncate(len);
            prop_assume!(positions.len() >= stream_len);
            let payload: NucleotideSeq = (0..stream_len)
                .map(|_| Nucleotide::ALL[rng.random_range(0..4)])
                .collect();
            let data = FramedStream {
                header: NucleotideSeq::new(),
                payload,
                trailer: NucleotideSeq::new(),
            };
            let vp = VariablePositions { template_index: 0, template_len: len, positions: positions.clone() };
            let stego = embed(&template, &vp, &data, seed).unwrap();
            prop_assert_eq!(stego.residues.len(), template.len());
            for i in 0..len {
                if !positions.contains(&i) {
                    prop_assert_eq!(stego.residues[i], template[i]);
                }
            }
            let extracted = extract(&stego.residues, &vp).unwrap();
            prop_assert_eq!(
                extracted.slice(0..stream_len),
                data.concat()
            );
        }
    }
}
