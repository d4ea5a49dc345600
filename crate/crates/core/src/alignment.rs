//! Deterministic stand-in for ClustalW: pairwise global alignment by dynamic
//! programming and a center-star progressive alignment for two or three
//! carriers, plus the variable-column scan that yields the embedding channel.
//!
//! Both ends of a session run this code on the same carriers, so everything
//! here must be bit-for-bit deterministic: fixed traceback tie-breaking
//! (diagonal, then gap in the second row, then gap in the first) and fixed
//! merge order ("once a gap, always a gap", master columns first).

use thiserror::Error;

use crate::codec::NucleotideSeq;

pub const GAP: u8 = b'-';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("need at least 2 carriers, got {0}")]
    TooFewCarriers(usize),
    #[error("at most 3 carriers are supported, got {0}")]
    TooManyCarriers(usize),
    #[error("carrier {0} is empty")]
    EmptyCarrier(usize),
    #[error("template index {index} out of range for {count} carriers")]
    BadTemplateIndex { index: usize, count: usize },
}

/// Match reward, mismatch penalty and linear gap penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScoringScheme {
    pub match_score: i32,
    pub mismatch: i32,
    pub gap: i32,
}

impl Default for ScoringScheme {
    fn default() -> Self {
        ScoringScheme {
            match_score: 1,
            mismatch: -1,
            gap: -2,
        }
    }
}

impl ScoringScheme {
    fn pair(&self, a: u8, b: u8) -> i32 {
        if a == b {
            self.match_score
        } else {
            self.mismatch
        }
    }
}

/// A global pairwise alignment: two gapped rows of equal length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseAlignment {
    pub rows: [Vec<u8>; 2],
    pub score: i32,
}

/// A multiple alignment; `rows[k]` de-gaps to carrier `k` exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsaResult {
    pub rows: Vec<Vec<u8>>,
    pub column_count: usize,
}

/// The coordinates (into the ungapped template) where data may be written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariablePositions {
    pub template_index: usize,
    pub template_len: usize,
    pub positions: Vec<usize>,
}

impl VariablePositions {
    pub fn capacity(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Step {
    Diag,
    Up,   // consumes a residue of `a`, gap in `b`'s row
    Left, // consumes a residue of `b`, gap in `a`'s row
}

/// Optimal global alignment under `s` with deterministic traceback
/// (tie priority: diagonal, then gap-in-b, then gap-in-a).
pub fn needleman_wunsch(a: &NucleotideSeq, b: &NucleotideSeq, s: &ScoringScheme) -> PairwiseAlignment {
    align_bytes(&a.to_bytes(), &b.to_bytes(), s)
}

fn align_bytes(a: &[u8], b: &[u8], s: &ScoringScheme) -> PairwiseAlignment {
    let (m, n) = (a.len(), b.len());
    let mut trace = vec![Step::Diag; (m + 1) * (n + 1)];
    let mut prev = vec![0i32; n + 1];
    let mut curr = vec![0i32; n + 1];

    for j in 1..=n {
        prev[j] = j as i32 * s.gap;
        trace[j] = Step::Left;
    }
    for i in 1..=m {
        curr[0] = i as i32 * s.gap;
        trace[i * (n + 1)] = Step::Up;
        for j in 1..=n {
            let diag = prev[j - 1] + s.pair(a[i - 1], b[j - 1]);
            let up = prev[j] + s.gap;
            let left = curr[j - 1] + s.gap;
            let best = diag.max(up).max(left);
            trace[i * (n + 1) + j] = if best == diag {
                Step::Diag
            } else if best == up {
                Step::Up
            } else {
                Step::Left
            };
            curr[j] = best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    let score = prev[n];

    let mut row_a = Vec::with_capacity(m.max(n));
    let mut row_b = Vec::with_capacity(m.max(n));
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        match trace[i * (n + 1) + j] {
            Step::Diag if i > 0 && j > 0 => {
                row_a.push(a[i - 1]);
                row_b.push(b[j - 1]);
                i -= 1;
                j -= 1;
            }
            Step::Up if i > 0 => {
                row_a.push(a[i - 1]);
                row_b.push(GAP);
                i -= 1;
            }
            _ => {
                row_a.push(GAP);
                row_b.push(b[j - 1]);
                j -= 1;
            }
        }
    }
    row_a.reverse();
    row_b.reverse();
    PairwiseAlignment {
        rows: [row_a, row_b],
        score,
    }
}

/// Score-only variant, two rolling rows.
fn align_score(a: &[u8], b: &[u8], s: &ScoringScheme) -> i32 {
    let (m, n) = (a.len(), b.len());
    let mut prev: Vec<i32> = (0..=n as i32).map(|j| j * s.gap).collect();
    let mut curr = vec![0i32; n + 1];
    for i in 1..=m {
        curr[0] = i as i32 * s.gap;
        for j in 1..=n {
            let diag = prev[j - 1] + s.pair(a[i - 1], b[j - 1]);
            let up = prev[j] + s.gap;
            let left = curr[j - 1] + s.gap;
            curr[j] = diag.max(up).max(left);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[n]
}

/// Center-star multiple alignment for 2 or 3 carriers. The center is the
/// carrier with the highest sum of pairwise scores (ties to the lowest
/// index); the others are merged against it one at a time.
pub fn star_msa(carriers: &[NucleotideSeq], s: &ScoringScheme) -> Result<MsaResult, AlignError> {
    match carriers.len() {
        0 | 1 => return Err(AlignError::TooFewCarriers(carriers.len())),
        2 | 3 => {}
        k => return Err(AlignError::TooManyCarriers(k)),
    }
    for (i, c) in carriers.iter().enumerate() {
        if c.is_empty() {
            return Err(AlignError::EmptyCarrier(i));
        }
    }
    let bytes: Vec<Vec<u8>> = carriers.iter().map(|c| c.to_bytes()).collect();

    if bytes.len() == 2 {
        let pair = align_bytes(&bytes[0], &bytes[1], s);
        let column_count = pair.rows[0].len();
        return Ok(MsaResult {
            rows: pair.rows.to_vec(),
            column_count,
        });
    }

    let s01 = align_score(&bytes[0], &bytes[1], s);
    let s02 = align_score(&bytes[0], &bytes[2], s);
    let s12 = align_score(&bytes[1], &bytes[2], s);
    let sums = [s01 + s02, s01 + s12, s02 + s12];
    let center = (0..3).max_by_key(|&k| (sums[k], std::cmp::Reverse(k))).unwrap();
    let others: Vec<usize> = (0..3).filter(|&k| k != center).collect();

    // Master alignment: center row plus already-merged rows, all equal length.
    let mut master: Vec<Vec<u8>> = vec![bytes[center].clone()];
    for &other in &others {
        let pair = align_bytes(&bytes[center], &bytes[other], s);
        master = merge_into_master(master, &pair.rows[0], &pair.rows[1]);
    }

    // Master holds [center, others...]; restore carrier index order.
    let mut rows = vec![Vec::new(); 3];
    rows[center] = master[0].clone();
    for (slot, &other) in others.iter().enumerate() {
        rows[other] = master[slot + 1].clone();
    }
    let column_count = rows[0].len();
    Ok(MsaResult { rows, column_count })
}

/// Merge a new pairwise alignment of the center (`pair_center`/`pair_other`)
/// into the master rows, whose first row de-gaps to the same center. Gaps
/// already in the master are kept ("once a gap, always a gap"); where the new
/// pair introduces a gap into the center, all master rows gain one.
fn merge_into_master(master: Vec<Vec<u8>>, pair_center: &[u8], pair_other: &[u8]) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = vec![Vec::new(); master.len() + 1];
    let (mut i, mut j) = (0, 0);
    let master_cols = master[0].len();
    let pair_cols = pair_center.len();
    while i < master_cols || j < pair_cols {
        if i < master_cols && master[0][i] == GAP {
            // Master-only column.
            for (row, m) in out.iter_mut().zip(&master) {
                row.push(m[i]);
            }
            out[master.len()].push(GAP);
            i += 1;
        } else if j < pair_cols && pair_center[j] == GAP {
            // New-pair-only column: open a gap in every master row.
            for row in out.iter_mut().take(master.len()) {
                row.push(GAP);
            }
            out[master.len()].push(pair_other[j]);
            j += 1;
        } else {
            // Both sides hold the same center residue.
            debug_assert_eq!(master[0][i], pair_center[j]);
            for (row, m) in out.iter_mut().zip(&master) {
                row.push(m[i]);
            }
            out[master.len()].push(pair_other[j]);
            i += 1;
            j += 1;
        }
    }
    out
}

/// Columns where the carriers disagree, mapped to ungapped coordinates of the
/// chosen template. Columns where the template itself holds a gap are skipped:
/// substitution-only embedding cannot write into a residue that is not there.
pub fn variable_columns(m: &MsaResult, template_index: usize) -> Result<VariablePositions, AlignError> {
    if template_index >= m.rows.len() {
        return Err(AlignError::BadTemplateIndex {
            index: template_index,
            count: m.rows.len(),
        });
    }
    let template = &m.rows[template_index];
    let mut positions = Vec::new();
    let mut coord = 0usize;
    for col in 0..m.column_count {
        let residue = template[col];
        let conserved = m.rows.iter().all(|row| row[col] == m.rows[0][col]);
        if residue != GAP {
            if !conserved {
                positions.push(coord);
            }
            coord += 1;
        }
    }
    Ok(VariablePositions {
        template_index,
        template_len: coord,
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> NucleotideSeq {
        s.parse().unwrap()
    }

    fn default_scoring() -> ScoringScheme {
        ScoringScheme::default()
    }

    /// Exhaustive maximum over all global alignments, for small inputs only.
    fn brute_force_score(a: &[u8], b: &[u8], s: &ScoringScheme) -> i32 {
        fn go(a: &[u8], b: &[u8], s: &ScoringScheme) -> i32 {
            match (a.is_empty(), b.is_empty()) {
                (true, true) => 0,
                (true, false) => b.len() as i32 * s.gap,
                (false, true) => a.len() as i32 * s.gap,
                (false, false) => {
                    let diag = go(&a[1..], &b[1..], s) + s.pair(a[0], b[0]);
                    let up = go(&a[1..], b, s) + s.gap;
                    let left = go(a, &b[1..], s) + s.gap;
                    diag.max(up).max(left)
                }
            }
        }
        go(a, b, s)
    }

    #[test]
    fn identical_single_residue() {
        let aln = needleman_wunsch(&seq("A"), &seq("A"), &default_scoring());
        assert_eq!(aln.rows[0], b"A");
        assert_eq!(aln.rows[1], b"A");
        assert_eq!(aln.score, 1);
    }

    #[test]
    fn align_against_empty() {
        let aln = needleman_wunsch(&seq("A"), &NucleotideSeq::new(), &default_scoring());
        assert_eq!(aln.rows[0], b"A");
        assert_eq!(aln.rows[1], b"-");
        assert_eq!(aln.score, -2);
    }

    #[test]
    fn matches_brute_force_on_fixed_pair() {
        let s = default_scoring();
        let aln = needleman_wunsch(&seq("GATT"), &seq("GCAT"), &s);
        assert_eq!(aln.score, brute_force_score(b"GATT", b"GCAT", &s));
    }

    #[test]
    fn rows_degap_to_inputs() {
        let a = seq("ACGTACGT");
        let b = seq("AGTACG");
        let aln = needleman_wunsch(&a, &b, &default_scoring());
        let degap = |row: &[u8]| -> Vec<u8> { row.iter().copied().filter(|&c| c != GAP).collect() };
        assert_eq!(degap(&aln.rows[0]), a.to_bytes());
        assert_eq!(degap(&aln.rows[1]), b.to_bytes());
    }

    #[test]
    fn star_msa_identical_triple() {
        let x = seq("ACGTACGT");
        let msa = star_msa(&[x.clone(), x.clone(), x.clone()], &default_scoring()).unwrap();
        assert_eq!(msa.column_count, 8);
        for row in &msa.rows {
            assert_eq!(row, &x.to_bytes());
        }
    }

    #[test]
    fn star_msa_two_carriers_is_pairwise() {
        let a = seq("ACGT");
        let b = seq("AGT");
        let msa = star_msa(&[a.clone(), b.clone()], &default_scoring()).unwrap();
        let pair = needleman_wunsch(&a, &b, &default_scoring());
        assert_eq!(msa.rows, pair.rows.to_vec());
    }

    #[test]
    fn star_msa_three_carriers_hand_merged() {
        // Center selection: pairwise scores s01(ACGT,AGT)=1, s02(ACGT,ACT)=1,
        // s12(AGT,ACT)=1; all sums equal 2, tie goes to carrier 0. Aligning
        // AGT and ACT against ACGT gives A-GT and AC-T, so the merged rows are
        // ACGT / A-GT / AC-T over 4 columns.
        let msa = star_msa(&[seq("ACGT"), seq("AGT"), seq("ACT")], &default_scoring()).unwrap();
        assert_eq!(msa.column_count, 4);
        assert_eq!(msa.rows[0], b"ACGT");
        assert_eq!(msa.rows[1], b"A-GT");
        assert_eq!(msa.rows[2], b"AC-T");
    }

    #[test]
    fn star_msa_rejects_bad_cardinality() {
        assert!(matches!(
            star_msa(&[seq("A")], &default_scoring()),
            Err(AlignError::TooFewCarriers(1))
        ));
        let four = vec![seq("A"), seq("C"), seq("G"), seq("T")];
        assert!(matches!(
            star_msa(&four, &default_scoring()),
            Err(AlignError::TooManyCarriers(4))
        ));
        assert!(matches!(
            star_msa(&[seq("A"), NucleotideSeq::new()], &default_scoring()),
            Err(AlignError::EmptyCarrier(1))
        ));
    }

    #[test]
    fn variable_columns_identical_carriers() {
        let x = seq("ACGT");
        let msa = star_msa(&[x.clone(), x.clone()], &default_scoring()).unwrap();
        let vp = variable_columns(&msa, 0).unwrap();
        assert!(vp.positions.is_empty());
        assert_eq!(vp.template_len, 4);
    }

    #[test]
    fn variable_columns_skips_template_gaps() {
        let msa = MsaResult {
            rows: vec![b"AC-G".to_vec(), b"ACTG".to_vec()],
            column_count: 4,
        };
        // Column 2 is variable; row 0 has a gap there, row 1 a residue.
        let vp0 = variable_columns(&msa, 0).unwrap();
        assert!(vp0.positions.is_empty());
        let vp1 = variable_columns(&msa, 1).unwrap();
        assert_eq!(vp1.positions, vec![2]);
        assert_eq!(vp1.template_len, 4);
    }

    #[test]
    fn variable_columns_three_rows() {
        let msa = MsaResult {
            rows: vec![b"AAAA".to_vec(), b"AAAT".to_vec(), b"AAAC".to_vec()],
            column_count: 4,
        };
        let vp = variable_columns(&msa, 0).unwrap();
        assert_eq!(vp.positions, vec![3]);
    }

    #[test]
    fn variable_columns_rejects_bad_template() {
        let msa = MsaResult {
            rows: vec![b"A".to_vec(), b"A".to_vec()],
            column_count: 1,
        };
        assert!(matches!(
            variable_columns(&msa, 2),
            Err(AlignError::BadTemplateIndex { .. })
        ));
    }

    #[test]
    fn msa_is_deterministic() {
        let carriers = [seq("ACGTACGTAC"), seq("ACTTACGAAC"), seq("AGGTACGTTC")];
        let a = star_msa(&carriers, &default_scoring()).unwrap();
        let b = star_msa(&carriers, &default_scoring()).unwrap();
        assert_eq!(a, b);
        let va = variable_columns(&a, 0).unwrap();
        let vb = variable_columns(&b, 0).unwrap();
        assert_eq!(va, vb);
    }

    fn arb_seq(max_len: usize) -> impl Strategy<Value = NucleotideSeq> {
        proptest::collection::vec(0u8..4, 0..=max_len).prop_map(|v| {
            NucleotideSeq::from_residues(
                v.into_iter()
                    .map(|i| crate::codec::Nucleotide::ALL[i as usize])
                    .collect(),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn dp_score_matches_brute_force(a in arb_seq(6), b in arb_seq(6)) {
            let s = default_scoring();
            let aln = needleman_wunsch(&a, &b, &s);
            prop_assert_eq!(aln.score, brute_force_score(&a.to_bytes(), &b.to_bytes(), &s));
        }
    }

    proptest! {
        #[test]
        fn msa_rows_degap_to_carriers(
            a in arb_seq(24), b in arb_seq(24), c in arb_seq(24)
        ) {
            prop_assume!(!a.is_empty() && !b.is_empty() && !c.is_empty());
            let carriers = [a, b, c];
            let msa = star_msa(&carriers, &default_scoring()).unwrap();
            for (row, carrier) in msa.rows.iter().zip(&carriers) {
                prop_assert_eq!(row.len(), msa.column_count);
                let degapped: Vec<u8> = row.iter().copied().filter(|&ch| ch != GAP).collect();
                prop_assert_eq!(degapped, carrier.to_bytes());
            }
            for k in 0..3 {
                let vp = variable_columns(&msa, k).unwrap();
                prop_assert!(vp.positions.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(vp.positions.iter().all(|&p| p < vp.template_len));
                prop_assert_eq!(vp.template_len, carriers[k].len());
            }
        }
    }
}
