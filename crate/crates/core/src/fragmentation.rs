//! Tearing the encoded message into a tree of fragments, the fixed-width
//! packet-number path codec, and the size-header / path-trailer framing.
//!
//! A tear plan is an ordered tree: internal nodes split into 2 or 3 children
//! (so a child index always fits one dibit, with 00 reserved for padding) and
//! leaves carry fragment lengths in nucleotides. A fragment's packet number is
//! its root-to-leaf path, encoded into exactly 2*(N-1) bits.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::codec::{BitString, CodecError, NucleotideSeq};
use crate::session::SessionConfig;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FragmentError {
    #[error("plan covers {plan_total} nucleotides but the data has {data_len}")]
    PlanLengthMismatch { plan_total: usize, data_len: usize },
    #[error("tear tree is incomplete: no fragment for path {0}")]
    IncompleteTree(String),
    #[error("duplicate fragment path {0}")]
    DuplicatePath(String),
    #[error("path {0} conflicts with a longer path through the same node")]
    PrefixConflict(String),
    #[error("path depth {depth} exceeds the {max} digits available for {n_packets} packets")]
    PathTooDeep {
        depth: usize,
        max: usize,
        n_packets: usize,
    },
    #[error("packet number has a zero digit after the padding ended")]
    ZeroDigitAfterPadding,
    #[error("packet number is all padding")]
    EmptyPath,
    #[error("packet number field is {got} bits, expected {expected}")]
    BadWidth { expected: usize, got: usize },
    #[error("tear path digits must be 1, 2 or 3, got {0}")]
    BadDigit(u8),
    #[error("tear path must be non-empty")]
    EmptyDigits,
    #[error("plan node must have 2 or 3 children, got {0}")]
    BadArity(usize),
    #[error("plan leaves must cover at least one nucleotide")]
    EmptyLeaf,
    #[error("size {size} does not fit in a {width}-bit header")]
    SizeOverflow { size: usize, width: usize },
    #[error("stream ends after {available} nucleotides but the header claims {needed}")]
    TruncatedStream { needed: usize, available: usize },
    #[error("size field {size} is too small to hold a path trailer and a non-empty payload (minimum {min})")]
    SizeTooSmall { size: usize, min: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("cannot parse tear plan: {0}")]
    BadPlanSyntax(String),
}

/// Root-to-leaf path through the tear tree; the packet number.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TearPath(Vec<u8>);

impl TearPath {
    pub fn new(digits: Vec<u8>) -> Result<Self, FragmentError> {
        if digits.is_empty() {
            return Err(FragmentError::EmptyDigits);
        }
        for &d in &digits {
            if !(1..=3).contains(&d) {
                return Err(FragmentError::BadDigit(d));
            }
        }
        Ok(TearPath(digits))
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for TearPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{}", d)?;
        }
        Ok(())
    }
}

/// One torn piece of the encoded message together with its packet number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub payload: NucleotideSeq,
    pub path: TearPath,
}

/// Node of a tear plan: either a leaf length or a split into 2-3 children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanNode {
    Leaf(usize),
    Split(Vec<PlanNode>),
}

impl PlanNode {
    fn leaf_count(&self) -> usize {
        match self {
            PlanNode::Leaf(_) => 1,
            PlanNode::Split(children) => children.iter().map(PlanNode::leaf_count).sum(),
        }
    }

    fn total_len(&self) -> usize {
        match self {
            PlanNode::Leaf(len) => *len,
            PlanNode::Split(children) => children.iter().map(PlanNode::total_len).sum(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            PlanNode::Leaf(_) => 1,
            PlanNode::Split(children) => {
                1 + children.iter().map(PlanNode::depth).max().unwrap_or(0)
            }
        }
    }

    fn validate(&self) -> Result<(), FragmentError> {
        match self {
            PlanNode::Leaf(0) => Err(FragmentError::EmptyLeaf),
            PlanNode::Leaf(_) => Ok(()),
            PlanNode::Split(children) => {
                if !(2..=3).contains(&children.len()) {
                    return Err(FragmentError::BadArity(children.len()));
                }
                children.iter().try_for_each(PlanNode::validate)
            }
        }
    }
}

/// How to tear the encoded message into N fragments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TearPlan {
    root: PlanNode,
}

impl TearPlan {
    pub fn new(root: PlanNode) -> Result<Self, FragmentError> {
        root.validate()?;
        let plan = TearPlan { root };
        let n = plan.leaf_count();
        // A root leaf gets the fixed path [1], depth 1; splits add one digit
        // per level. N-1 digits is the most the packet-number field can hold.
        let depth = match &plan.root {
            PlanNode::Leaf(_) => 1,
            PlanNode::Split(_) => plan.root.depth() - 1,
        };
        let max = if n >= 2 { n - 1 } else { 1 };
        if depth > max {
            return Err(FragmentError::PathTooDeep {
                depth,
                max,
                n_packets: n,
            });
        }
        Ok(plan)
    }

    pub fn root(&self) -> &PlanNode {
        &self.root
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn total_len(&self) -> usize {
        self.root.total_len()
    }

    pub fn leaf_lengths(&self) -> Vec<usize> {
        fn walk(node: &PlanNode, out: &mut Vec<usize>) {
            match node {
                PlanNode::Leaf(len) => out.push(*len),
                PlanNode::Split(children) => children.iter().for_each(|c| walk(c, out)),
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Grow a plan by repeated binary splits at uniform random cut points
    /// until it has `n_leaves` leaves. Requires `total_len >= n_leaves`.
    pub fn random<R: Rng>(total_len: usize, n_leaves: usize, rng: &mut R) -> Result<Self, FragmentError> {
        if total_len == 0 {
            return Err(FragmentError::EmptyLeaf);
        }
        if total_len < n_leaves {
            return Err(FragmentError::PlanLengthMismatch {
                plan_total: n_leaves,
                data_len: total_len,
            });
        }
        let mut root = PlanNode::Leaf(total_len);
        for _ in 1..n_leaves {
            split_random_leaf(&mut root, rng);
        }
        TearPlan::new(root)
    }
}

fn split_random_leaf<R: Rng>(root: &mut PlanNode, rng: &mut R) {
    fn splittable(node: &PlanNode) -> usize {
        match node {
            PlanNode::Leaf(len) => usize::from(*len >= 2),
            PlanNode::Split(children) => children.iter().map(splittable).sum(),
        }
    }
    fn split_nth<R: Rng>(node: &mut PlanNode, mut n: usize, rng: &mut R) -> Option<usize> {
        match node {
            PlanNode::Leaf(len) if *len >= 2 => {
                if n == 0 {
                    let cut = rng.random_range(1..*len);
                    *node = PlanNode::Split(vec![PlanNode::Leaf(cut), PlanNode::Leaf(*len - cut)]);
                    None
                } else {
                    Some(n - 1)
                }
            }
            PlanNode::Leaf(_) => Some(n),
            PlanNode::Split(children) => {
                for child in children {
                    match split_nth(child, n, rng) {
                        None => return None,
                        Some(rest) => n = rest,
                    }
                }
                Some(n)
            }
        }
    }
    let candidates = splittable(root);
    debug_assert!(candidates > 0, "total length >= leaf count guarantees a splittable leaf");
    let pick = rng.random_range(0..candidates);
    split_nth(root, pick, rng);
}

impl FromStr for TearPlan {
    type Err = FragmentError;

    /// Nested parentheses with leaf lengths, e.g. `(23,(8,(9,32)))`.
    fn from_str(s: &str) -> Result<Self, FragmentError> {
        fn parse_node(chars: &mut std::iter::Peekable<std::str::Chars>) -> Result<PlanNode, FragmentError> {
            match chars.peek() {
                Some('(') => {
                    chars.next();
                    let mut children = vec![parse_node(chars)?];
                    while chars.peek() == Some(&',') {
                        chars.next();
                        children.push(parse_node(chars)?);
                    }
                    if chars.next() != Some(')') {
                        return Err(FragmentError::BadPlanSyntax("expected ')'".into()));
                    }
                    Ok(PlanNode::Split(children))
                }
                Some(c) if c.is_ascii_digit() => {
                    let mut value = String::new();
                    while let Some(c) = chars.peek() {
                        if c.is_ascii_digit() {
                            value.push(*c);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    value
                        .parse::<usize>()
                        .map(PlanNode::Leaf)
                        .map_err(|e| FragmentError::BadPlanSyntax(e.to_string()))
                }
                other => Err(FragmentError::BadPlanSyntax(format!(
                    "unexpected {:?}",
                    other
                ))),
            }
        }
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut chars = cleaned.chars().peekable();
        let root = parse_node(&mut chars)?;
        if chars.next().is_some() {
            return Err(FragmentError::BadPlanSyntax("trailing input".into()));
        }
        TearPlan::new(root)
    }
}

impl fmt::Display for TearPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write_node(node: &PlanNode, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match node {
                PlanNode::Leaf(len) => write!(f, "{}", len),
                PlanNode::Split(children) => {
                    write!(f, "(")?;
                    for (i, c) in children.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write_node(c, f)?;
                    }
                    write!(f, ")")
                }
            }
        }
        write_node(&self.root, f)
    }
}

/// Tear `e` into fragments according to `plan`, in left-to-right leaf order.
pub fn tear(e: &NucleotideSeq, plan: &TearPlan) -> Result<Vec<Fragment>, FragmentError> {
    if plan.total_len() != e.len() {
        return Err(FragmentError::PlanLengthMismatch {
            plan_total: plan.total_len(),
            data_len: e.len(),
        });
    }
    fn walk(
        node: &PlanNode,
        e: &NucleotideSeq,
        offset: &mut usize,
        prefix: &mut Vec<u8>,
        out: &mut Vec<Fragment>,
    ) {
        match node {
            PlanNode::Leaf(len) => {
                let payload = e.slice(*offset..*offset + len);
                *offset += len;
                let digits = if prefix.is_empty() { vec![1] } else { prefix.clone() };
                out.push(Fragment {
                    payload,
                    path: TearPath::new(digits).expect("plan digits are always 1..=3"),
                });
            }
            PlanNode::Split(children) => {
                for (i, child) in children.iter().enumerate() {
                    prefix.push(i as u8 + 1);
                    walk(child, e, offset, prefix, out);
                    prefix.pop();
                }
            }
        }
    }
    let mut out = Vec::with_capacity(plan.leaf_count());
    walk(&plan.root, e, &mut 0, &mut Vec::new(), &mut out);
    Ok(out)
}

/// Reassemble fragments by tear-tree order. The input order is irrelevant;
/// the paths must form a complete tree.
pub fn join(fragments: &[Fragment]) -> Result<NucleotideSeq, FragmentError> {
    let mut sorted: Vec<&Fragment> = fragments.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));

    for pair in sorted.windows(2) {
        if pair[0].path == pair[1].path {
            return Err(FragmentError::DuplicatePath(pair[0].path.to_string()));
        }
        if pair[1].path.digits().starts_with(pair[0].path.digits()) {
            return Err(FragmentError::PrefixConflict(pair[0].path.to_string()));
        }
    }

    // Every internal node must have children numbered contiguously from 1,
    // and at least two of them (except a root-leaf set, which is just [1]).
    check_completeness(&sorted)?;

    let mut joined = NucleotideSeq::new();
    for f in sorted {
        joined.extend_from(&f.payload);
    }
    Ok(joined)
}

fn check_completeness(sorted: &[&Fragment]) -> Result<(), FragmentError> {
    if sorted.is_empty() {
        return Err(FragmentError::IncompleteTree("1".into()));
    }
    if sorted.len() == 1 {
        return if sorted[0].path.digits() == [1] {
            Ok(())
        } else {
            Err(missing_sibling(&sorted[0].path))
        };
    }
    // Group the paths level by level: at each internal prefix, the first
    // digits below it must be exactly 1..=k for some k in 2..=3.
    fn check_group(paths: &[&[u8]], depth: usize) -> Result<(), FragmentError> {
        if paths.len() == 1 && paths[0].len() == depth {
            return Ok(()); // a leaf
        }
        let mut expected = 1u8;
        let mut i = 0;
        while i < paths.len() {
            let digit = paths[i][depth];
            if digit != expected {
                let mut prefix = paths[i][..depth].to_vec();
                prefix.push(expected);
                return Err(FragmentError::IncompleteTree(
                    TearPath::new(prefix).expect("digits validated").to_string(),
                ));
            }
            let start = i;
            while i < paths.len() && paths[i][depth] == digit {
                i += 1;
            }
            check_group(&paths[start..i], depth + 1)?;
            expected += 1;
        }
        if expected - 1 < 2 {
            // A lone child means its sibling never arrived.
            let mut prefix = paths[0][..depth].to_vec();
            prefix.push(2);
            return Err(FragmentError::IncompleteTree(
                TearPath::new(prefix).expect("digits validated").to_string(),
            ));
        }
        Ok(())
    }
    let paths: Vec<&[u8]> = sorted.iter().map(|f| f.path.digits()).collect();
    check_group(&paths, 0)
}

fn missing_sibling(path: &TearPath) -> FragmentError {
    let mut digits = path.digits().to_vec();
    let last = digits.len() - 1;
    digits[last] = if digits[last] == 1 { 2 } else { 1 };
    FragmentError::IncompleteTree(TearPath::new(digits).expect("digits validated").to_string())
}

/// Encode a path into exactly `2*(n_packets-1)` bits: one big-endian dibit
/// per digit, left-padded with 00 pairs.
pub fn encode_path(p: &TearPath, n_packets: usize) -> Result<BitString, FragmentError> {
    let max = n_packets.saturating_sub(1);
    if p.depth() > max {
        return Err(FragmentError::PathTooDeep {
            depth: p.depth(),
            max,
            n_packets,
        });
    }
    let mut bits = BitString::new();
    for _ in 0..(max - p.depth()) {
        bits.push(0);
        bits.push(0);
    }
    for &d in p.digits() {
        bits.push(d >> 1);
        bits.push(d & 1);
    }
    Ok(bits)
}

/// Inverse of [`encode_path`]: strip the 00 padding, then read one digit per
/// dibit. A 00 pair after a non-zero pair is malformed.
pub fn decode_path(b: &BitString, n_packets: usize) -> Result<TearPath, FragmentError> {
    let expected = 2 * n_packets.saturating_sub(1);
    if b.len() != expected {
        return Err(FragmentError::BadWidth {
            expected,
            got: b.len(),
        });
    }
    let mut digits = Vec::new();
    let mut in_padding = true;
    for pair in b.bits().chunks(2) {
        let value = pair[0] << 1 | pair[1];
        if value == 0 {
            if !in_padding {
                return Err(FragmentError::ZeroDigitAfterPadding);
            }
        } else {
            in_padding = false;
            digits.push(value);
        }
    }
    if digits.is_empty() {
        return Err(FragmentError::EmptyPath);
    }
    TearPath::new(digits)
}

/// Nucleotide width of the size header for a message of `total_message_bits`:
/// the bit length of the total, rounded up to an even number of bits.
pub fn header_width_nt(total_message_bits: usize) -> usize {
    let bit_len = usize::BITS as usize - total_message_bits.leading_zeros() as usize;
    let bit_len = bit_len.max(1);
    (bit_len + 1) / 2
}

/// A framed fragment: size header, payload, packet-number trailer. These are
/// the nucleotides written into a template's variable positions, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramedStream {
    pub header: NucleotideSeq,
    pub payload: NucleotideSeq,
    pub trailer: NucleotideSeq,
}

impl FramedStream {
    pub fn len(&self) -> usize {
        self.header.len() + self.payload.len() + self.trailer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn concat(&self) -> NucleotideSeq {
        let mut out = self.header.clone();
        out.extend_from(&self.payload);
        out.extend_from(&self.trailer);
        out
    }
}

/// Frame a fragment: the size field (payload plus trailer nucleotides) goes
/// through the crypto map and sigma; the path trailer goes through sigma only.
pub fn frame(f: &Fragment, cfg: &SessionConfig) -> Result<FramedStream, FragmentError> {
    let header_nt = header_width_nt(cfg.total_message_bits);
    let width = header_nt * 2;
    let size = f.payload.len() + (cfg.n_packets - 1);
    let size_bits = BitString::from_uint(size, width)
        .map_err(|_| FragmentError::SizeOverflow { size, width })?;
    let header = cfg.sigma.encode(&cfg.crypto.apply(&size_bits)?)?;
    let trailer = cfg.sigma.encode(&encode_path(&f.path, cfg.n_packets)?)?;
    Ok(FramedStream {
        header,
        payload: f.payload.clone(),
        trailer,
    })
}

/// Invert [`frame`] on an extracted stream, discarding trailing filler.
pub fn deframe(extracted: &NucleotideSeq, cfg: &SessionConfig) -> Result<Fragment, FragmentError> {
    let header_nt = header_width_nt(cfg.total_message_bits);
    if extracted.len() < header_nt {
        return Err(FragmentError::TruncatedStream {
            needed: header_nt,
            available: extracted.len(),
        });
    }
    let header = extracted.slice(0..header_nt);
    let size = cfg.crypto.apply(&cfg.sigma.decode(&header))?.to_uint();
    if extracted.len() < header_nt + size {
        return Err(FragmentError::TruncatedStream {
            needed: header_nt + size,
            available: extracted.len(),
        });
    }
    let trailer_nt = cfg.n_packets - 1;
    if size < trailer_nt + 1 {
        return Err(FragmentError::SizeTooSmall {
            size,
            min: trailer_nt + 1,
        });
    }
    let body = extracted.slice(header_nt..header_nt + size);
    let payload = body.slice(0..size - trailer_nt);
    let trailer = body.slice(size - trailer_nt..size);
    let path = decode_path(&cfg.sigma.decode(&trailer), cfg.n_packets)?;
    Ok(Fragment { payload, path })
}
