//! Bit-level and nucleotide-level primitives: text/bit conversion, the keyed
//! crypto map, and the dibit-to-nucleotide bijection used everywhere else.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("bit string length {0} is not a whole number of bytes")]
    LengthNotByteAligned(usize),
    #[error("xor keystream requires non-empty key material")]
    EmptyKey,
    #[error("bit string length {0} is odd, cannot group into dibits")]
    OddBitLength(usize),
    #[error("invalid bit character {0:?}")]
    BadBitChar(char),
    #[error("invalid nucleotide {0:?}")]
    BadNucleotide(char),
    #[error("sigma images must be a permutation of A, C, G, T")]
    BadSigmaImages,
    #[error("value {value} does not fit in {width} bits")]
    ValueTooWide { value: usize, width: usize },
}

/// One of the four DNA symbols. Ordering is alphabetical (A < C < G < T).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Nucleotide {
    A,
    C,
    G,
    T,
}

impl Nucleotide {
    pub const ALL: [Nucleotide; 4] = [Nucleotide::A, Nucleotide::C, Nucleotide::G, Nucleotide::T];

    pub fn from_ascii(byte: u8) -> Option<Self> {
        match byte {
            b'A' => Some(Nucleotide::A),
            b'C' => Some(Nucleotide::C),
            b'G' => Some(Nucleotide::G),
            b'T' => Some(Nucleotide::T),
            _ => None,
        }
    }

    pub fn to_ascii(self) -> u8 {
        match self {
            Nucleotide::A => b'A',
            Nucleotide::C => b'C',
            Nucleotide::G => b'G',
            Nucleotide::T => b'T',
        }
    }

    /// Alphabetical index: A=0, C=1, G=2, T=3.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Nucleotide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_ascii() as char)
    }
}

/// A validated sequence over {A, C, G, T}.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct NucleotideSeq(Vec<Nucleotide>);

impl NucleotideSeq {
    pub fn new() -> Self {
        NucleotideSeq(Vec::new())
    }

    pub fn from_residues(residues: Vec<Nucleotide>) -> Self {
        NucleotideSeq(residues)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn residues(&self) -> &[Nucleotide] {
        &self.0
    }

    pub fn push(&mut self, n: Nucleotide) {
        self.0.push(n);
    }

    pub fn extend_from(&mut self, other: &NucleotideSeq) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> NucleotideSeq {
        NucleotideSeq(self.0[range].to_vec())
    }

    /// Raw ASCII bytes (`b"ACGT..."`), the form alignment code works in.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().map(|n| n.to_ascii()).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        bytes
            .iter()
            .map(|&b| Nucleotide::from_ascii(b).ok_or(CodecError::BadNucleotide(b as char)))
            .collect::<Result<Vec<_>, _>>()
            .map(NucleotideSeq)
    }
}

impl std::ops::Index<usize> for NucleotideSeq {
    type Output = Nucleotide;

    fn index(&self, i: usize) -> &Nucleotide {
        &self.0[i]
    }
}

impl FromIterator<Nucleotide> for NucleotideSeq {
    fn from_iter<I: IntoIterator<Item = Nucleotide>>(iter: I) -> Self {
        NucleotideSeq(iter.into_iter().collect())
    }
}

impl FromStr for NucleotideSeq {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, CodecError> {
        NucleotideSeq::from_bytes(s.as_bytes())
    }
}

impl fmt::Display for NucleotideSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.0 {
            write!(f, "{}", n)?;
        }
        Ok(())
    }
}

/// An ordered sequence of 0/1 symbols.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    /// Every element must be 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        BitString(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.0.push(bit);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.0.clone();
        bits.extend_from_slice(&other.0);
        BitString(bits)
    }

    /// Big-endian value of `width` bits, most significant first.
    pub fn from_uint(value: usize, width: usize) -> Result<Self, CodecError> {
        if width < usize::BITS as usize && value >> width != 0 {
            return Err(CodecError::ValueTooWide { value, width });
        }
        let bits = (0..width)
            .rev()
            .map(|i| ((value >> i) & 1) as u8)
            .collect();
        Ok(BitString(bits))
    }

    /// Interpret the whole string as a big-endian unsigned value.
    pub fn to_uint(&self) -> usize {
        self.0.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
    }
}

impl FromStr for BitString {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, CodecError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(CodecError::BadBitChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{}", b)?;
        }
        Ok(())
    }
}

/// Plaintext bytes to bits, 8-bit big-endian per byte.
pub fn text_to_bits(plaintext: &[u8]) -> BitString {
    let mut bits = Vec::with_capacity(plaintext.len() * 8);
    for &byte in plaintext {
        for i in (0..8).rev() {
            bits.push((byte >> i) & 1);
        }
    }
    BitString(bits)
}

/// Inverse of [`text_to_bits`]; the length must be a whole number of bytes.
pub fn bits_to_text(b: &BitString) -> Result<Vec<u8>, CodecError> {
    if b.len() % 8 != 0 {
        return Err(CodecError::LengthNotByteAligned(b.len()));
    }
    Ok(b.0
        .chunks(8)
        .map(|chunk| chunk.iter().fold(0u8, |acc, &bit| (acc << 1) | bit))
        .collect())
}

/// A keyed involution on bit strings. Applying the same map twice restores
/// the input for both kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CryptoMap {
    /// Bitwise complement, no key material.
    Complement,
    /// XOR against the key's bits, cycled over the whole string.
    XorKeystream(Vec<u8>),
}

impl CryptoMap {
    pub fn apply(&self, b: &BitString) -> Result<BitString, CodecError> {
        match self {
            CryptoMap::Complement => Ok(BitString(b.0.iter().map(|&bit| bit ^ 1).collect())),
            CryptoMap::XorKeystream(key) => {
                if key.is_empty() {
                    return Err(CodecError::EmptyKey);
                }
                let out = b
                    .0
                    .iter()
                    .enumerate()
                    .map(|(i, &bit)| {
                        let byte = key[(i / 8) % key.len()];
                        let keybit = (byte >> (7 - (i % 8))) & 1;
                        bit ^ keybit
                    })
                    .collect();
                Ok(BitString(out))
            }
        }
    }
}

/// Bijection between dibits and nucleotides: `images[d]` is the image of the
/// dibit with value `d` (00, 01, 10, 11 in order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SigmaMap {
    images: [Nucleotide; 4],
}

impl SigmaMap {
    pub fn new(images: [Nucleotide; 4]) -> Result<Self, CodecError> {
        let mut seen = [false; 4];
        for n in images {
            if seen[n.index()] {
                return Err(CodecError::BadSigmaImages);
            }
            seen[n.index()] = true;
        }
        Ok(SigmaMap { images })
    }

    /// The identity-order map: 00→A, 01→C, 10→G, 11→T.
    pub fn standard() -> Self {
        SigmaMap {
            images: Nucleotide::ALL,
        }
    }

    pub fn images(&self) -> [Nucleotide; 4] {
        self.images
    }

    /// All 24 bijections, in lexicographic image order.
    pub fn all() -> Vec<SigmaMap> {
        let mut maps = Vec::with_capacity(24);
        for a in Nucleotide::ALL {
            for b in Nucleotide::ALL {
                for c in Nucleotide::ALL {
                    for d in Nucleotide::ALL {
                        if let Ok(m) = SigmaMap::new([a, b, c, d]) {
                            maps.push(m);
                        }
                    }
                }
            }
        }
        maps
    }

    /// Encode an even-length bit string, one nucleotide per dibit.
    pub fn encode(&self, b: &BitString) -> Result<NucleotideSeq, CodecError> {
        if b.len() % 2 != 0 {
            return Err(CodecError::OddBitLength(b.len()));
        }
        Ok(b.bits()
            .chunks(2)
            .map(|pair| self.images[(pair[0] << 1 | pair[1]) as usize])
            .collect())
    }

    /// Inverse of [`SigmaMap::encode`].
    pub fn decode(&self, n: &NucleotideSeq) -> BitString {
        let mut inverse = [0u8; 4];
        for (dibit, img) in self.images.iter().enumerate() {
            inverse[img.index()] = dibit as u8;
        }
        let mut bits = Vec::with_capacity(n.len() * 2);
        for residue in n.residues() {
            let dibit = inverse[residue.index()];
            bits.push(dibit >> 1);
            bits.push(dibit & 1);
        }
        BitString(bits)
    }
}

impl FromStr for SigmaMap {
    type Err = CodecError;

    /// Four characters giving the images of 00, 01, 10, 11 in order.
    fn from_str(s: &str) -> Result<Self, CodecError> {
        let seq = NucleotideSeq::from_str(s)?;
        if seq.len() != 4 {
            return Err(CodecError::BadSigmaImages);
        }
        SigmaMap::new([seq[0], seq[1], seq[2], seq[3]])
    }
}

impl fmt::Display for SigmaMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in self.images {
            write!(f, "{}", n)?;
        }
        Ok(())
    }
}
