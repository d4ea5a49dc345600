//! The shared session secret: MAC key, sigma map, crypto map, carriers,
//! scoring, packet count and message size, plus the flat key=value file that
//! stands in for the out-of-band key channel.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::RngCore;
use thiserror::Error;

use crate::alignment::ScoringScheme;
use crate::auth::{AuthError, MacKey};
use crate::codec::{CryptoMap, NucleotideSeq, SigmaMap};
use crate::fasta::{FastaError, FastaRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("total_message_bits must be even and positive, got {0}")]
    BadTotalBits(usize),
    #[error("n_packets must be at least 2, got {0}")]
    TooFewPackets(usize),
    #[error("n_packets {n} exceeds the {max} fragments a {bits}-bit message can yield")]
    TooManyPackets { n: usize, max: usize, bits: usize },
    #[error("a session needs 2 or 3 carriers, got {0}")]
    BadCarrierCount(usize),
    #[error("carriers {0} and {1} are identical")]
    DuplicateCarriers(usize, usize),
    #[error("fixed template index {index} out of range for {count} carriers")]
    BadTemplateIndex { index: usize, count: usize },
    #[error("line {line}: expected key=value")]
    BadLine { line: usize },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("missing key {0:?}")]
    MissingKey(&'static str),
    #[error("bad value for {key}: {reason}")]
    BadValue { key: &'static str, reason: String },
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Fasta(#[from] FastaError),
}

/// Which carrier each successive packet is embedded into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplatePolicy {
    Fixed(usize),
    RoundRobin,
}

impl TemplatePolicy {
    pub fn template_for(&self, packet_index: usize, carrier_count: usize) -> usize {
        match self {
            TemplatePolicy::Fixed(k) => *k,
            TemplatePolicy::RoundRobin => packet_index % carrier_count,
        }
    }
}

impl FromStr for TemplatePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "round_robin" {
            Ok(TemplatePolicy::RoundRobin)
        } else if let Some(k) = s.strip_prefix("fixed:") {
            k.parse()
                .map(TemplatePolicy::Fixed)
                .map_err(|e| e.to_string())
        } else {
            Err(format!("unknown template policy {:?}", s))
        }
    }
}

impl std::fmt::Display for TemplatePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TemplatePolicy::Fixed(k) => write!(f, "fixed:{}", k),
            TemplatePolicy::RoundRobin => write!(f, "round_robin"),
        }
    }
}

/// Everything both ends must agree on before any packet is sent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub mac_key: MacKey,
    pub sigma: SigmaMap,
    pub crypto: CryptoMap,
    pub carriers: Vec<NucleotideSeq>,
    pub carrier_names: Vec<String>,
    pub scoring: ScoringScheme,
    pub n_packets: usize,
    pub total_message_bits: usize,
    pub template_policy: TemplatePolicy,
    pub max_packet_bits: Option<usize>,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.total_message_bits == 0 || self.total_message_bits % 2 != 0 {
            return Err(SessionError::BadTotalBits(self.total_message_bits));
        }
        if self.n_packets < 2 {
            return Err(SessionError::TooFewPackets(self.n_packets));
        }
        let max = self.total_message_bits / 2;
        if self.n_packets > max {
            return Err(SessionError::TooManyPackets {
                n: self.n_packets,
                max,
                bits: self.total_message_bits,
            });
        }
        if !(2..=3).contains(&self.carriers.len()) {
            return Err(SessionError::BadCarrierCount(self.carriers.len()));
        }
        for i in 0..self.carriers.len() {
            for j in (i + 1)..self.carriers.len() {
                if self.carriers[i] == self.carriers[j] {
                    return Err(SessionError::DuplicateCarriers(i, j));
                }
            }
        }
        if let TemplatePolicy::Fixed(k) = self.template_policy {
            if k >= self.carriers.len() {
                return Err(SessionError::BadTemplateIndex {
                    index: k,
                    count: self.carriers.len(),
                });
            }
        }
        Ok(())
    }
}

/// The parsed form of a session file, before carriers are loaded from the
/// FASTA file it points at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionFile {
    pub mac_key: Vec<u8>,
    pub sigma: SigmaMap,
    pub crypto: CryptoMap,
    pub scoring: ScoringScheme,
    pub n_packets: usize,
    pub total_message_bits: usize,
    pub template_policy_raw: String,
    pub max_packet_bits: Option<usize>,
    pub carriers_path: String,
}

impl SessionFile {
    /// Combine with the carrier records the path resolved to.
    pub fn into_config(self, carriers: Vec<FastaRecord>) -> Result<SessionConfig, SessionError> {
        let policy =
            TemplatePolicy::from_str(&self.template_policy_raw).map_err(|reason| {
                SessionError::BadValue {
                    key: "template_policy",
                    reason,
                }
            })?;
        let cfg = SessionConfig {
            mac_key: MacKey::new(self.mac_key)?,
            sigma: self.sigma,
            crypto: self.crypto,
            carrier_names: carriers.iter().map(|r| r.name.clone()).collect(),
            carriers: carriers.into_iter().map(|r| r.seq).collect(),
            scoring: self.scoring,
            n_packets: self.n_packets,
            total_message_bits: self.total_message_bits,
            template_policy: policy,
            max_packet_bits: self.max_packet_bits,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse the flat key=value session format. Blank lines and `#` comments are
/// allowed; unknown or repeated keys are not.
pub fn parse_session_text(text: &str) -> Result<SessionFile, SessionError> {
    let mut mac_key = None;
    let mut sigma = None;
    let mut crypto = None;
    let mut scoring = None;
    let mut n_packets = None;
    let mut total_message_bits = None;
    let mut template_policy = None;
    let mut max_packet_bits = None;
    let mut carriers_path = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(SessionError::BadLine { line: idx + 1 })?;
        let (key, value) = (key.trim(), value.trim());

        fn set<T>(slot: &mut Option<T>, key: &str, value: T) -> Result<(), SessionError> {
            if slot.is_some() {
                return Err(SessionError::DuplicateKey(key.to_string()));
            }
            *slot = Some(value);
            Ok(())
        }

        match key {
            "mac_key" => {
                let bytes = hex::decode(value).map_err(|e| SessionError::BadValue {
                    key: "mac_key",
                    reason: e.to_string(),
                })?;
                set(&mut mac_key, key, bytes)?;
            }
            "sigma" => {
                let map = SigmaMap::from_str(value).map_err(|e| SessionError::BadValue {
                    key: "sigma",
                    reason: e.to_string(),
                })?;
                set(&mut sigma, key, map)?;
            }
            "crypto" => {
                let map = parse_crypto(value)?;
                set(&mut crypto, key, map)?;
            }
            "scoring" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(SessionError::BadValue {
                        key: "scoring",
                        reason: "expected match,mismatch,gap".into(),
                    });
                }
                let nums: Result<Vec<i32>, _> = parts.iter().map(|p| p.parse()).collect();
                let nums = nums.map_err(|e: std::num::ParseIntError| SessionError::BadValue {
                    key: "scoring",
                    reason: e.to_string(),
                })?;
                set(
                    &mut scoring,
                    key,
                    ScoringScheme {
                        match_score: nums[0],
                        mismatch: nums[1],
                        gap: nums[2],
                    },
                )?;
            }
            "n_packets" => {
                let n = value.parse().map_err(|e: std::num::ParseIntError| {
                    SessionError::BadValue {
                        key: "n_packets",
                        reason: e.to_string(),
                    }
                })?;
                set(&mut n_packets, key, n)?;
            }
            "total_message_bits" => {
                let n = value.parse().map_err(|e: std::num::ParseIntError| {
                    SessionError::BadValue {
                        key: "total_message_bits",
                        reason: e.to_string(),
                    }
                })?;
                set(&mut total_message_bits, key, n)?;
            }
            "template_policy" => set(&mut template_policy, key, value.to_string())?,
            "max_packet_bits" => {
                let n = value.parse().map_err(|e: std::num::ParseIntError| {
                    SessionError::BadValue {
                        key: "max_packet_bits",
                        reason: e.to_string(),
                    }
                })?;
                set(&mut max_packet_bits, key, n)?;
            }
            "carriers" => set(&mut carriers_path, key, value.to_string())?,
            other => return Err(SessionError::UnknownKey(other.to_string())),
        }
    }

    Ok(SessionFile {
        mac_key: mac_key.ok_or(SessionError::MissingKey("mac_key"))?,
        sigma: sigma.ok_or(SessionError::MissingKey("sigma"))?,
        crypto: crypto.ok_or(SessionError::MissingKey("crypto"))?,
        scoring: scoring.ok_or(SessionError::MissingKey("scoring"))?,
        n_packets: n_packets.ok_or(SessionError::MissingKey("n_packets"))?,
        total_message_bits: total_message_bits
            .ok_or(SessionError::MissingKey("total_message_bits"))?,
        template_policy_raw: template_policy.ok_or(SessionError::MissingKey("template_policy"))?,
        max_packet_bits,
        carriers_path: carriers_path.ok_or(SessionError::MissingKey("carriers"))?,
    })
}

fn parse_crypto(value: &str) -> Result<CryptoMap, SessionError> {
    if value == "complement" {
        Ok(CryptoMap::Complement)
    } else if let Some(hexkey) = value.strip_prefix("xor:") {
        let key = hex::decode(hexkey).map_err(|e| SessionError::BadValue {
            key: "crypto",
            reason: e.to_string(),
        })?;
        if key.is_empty() {
            return Err(SessionError::BadValue {
                key: "crypto",
                reason: "xor key must be non-empty".into(),
            });
        }
        Ok(CryptoMap::XorKeystream(key))
    } else {
        Err(SessionError::BadValue {
            key: "crypto",
            reason: format!("unknown crypto map {:?}", value),
        })
    }
}

pub fn render_session_text(file: &SessionFile) -> String {
    let mut out = String::new();
    writeln!(out, "mac_key={}", hex::encode(&file.mac_key)).unwrap();
    writeln!(out, "sigma={}", file.sigma).unwrap();
    match &file.crypto {
        CryptoMap::Complement => writeln!(out, "crypto=complement").unwrap(),
        CryptoMap::XorKeystream(key) => writeln!(out, "crypto=xor:{}", hex::encode(key)).unwrap(),
    }
    writeln!(
        out,
        "scoring={},{},{}",
        file.scoring.match_score, file.scoring.mismatch, file.scoring.gap
    )
    .unwrap();
    writeln!(out, "n_packets={}", file.n_packets).unwrap();
    writeln!(out, "total_message_bits={}", file.total_message_bits).unwrap();
    writeln!(out, "template_policy={}", file.template_policy_raw).unwrap();
    if let Some(ps) = file.max_packet_bits {
        writeln!(out, "max_packet_bits={}", ps).unwrap();
    }
    writeln!(out, "carriers={}", file.carriers_path).unwrap();
    out
}

/// Build a fresh session file: random 32-byte MAC key, the standard sigma
/// table, complement crypto and default scoring. The carriers must already
/// parse so a broken FASTA is rejected here rather than at encode time.
pub fn keygen<R: RngCore>(
    n_packets: usize,
    total_message_bits: usize,
    carriers_path: &str,
    carriers: &[FastaRecord],
    rng: &mut R,
) -> Result<SessionFile, SessionError> {
    let mut key = vec![0u8; 32];
    rng.fill_bytes(&mut key);
    let file = SessionFile {
        mac_key: key,
        sigma: SigmaMap::standard(),
        crypto: CryptoMap::Complement,
        scoring: ScoringScheme::default(),
        n_packets,
        total_message_bits,
        template_policy_raw: TemplatePolicy::RoundRobin.to_string(),
        max_packet_bits: None,
        carriers_path: carriers_path.to_string(),
    };
    // Validate the whole thing end to end before handing the file out.
    file.clone().into_config(carriers.to_vec())?;
    Ok(file)
}


#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# demo session
mac_key=000102030405060708090a0b0c0d0e0f
sigma=ACGT
crypto=complement
scoring=1,-1,-2
n_packets=4
total_message_bits=144
template_policy=round_robin
carriers=carriers.fa
";

    fn records() -> Vec<FastaRecord> {
        vec![
            FastaRecord {
                name: "a".into(),
                seq: "ACGTACGTACGTACGTACGT".parse().unwrap(),
            },
            FastaRecord {
                name: "b".into(),
                seq: "ACTTACGAACGTTCGTACGA".parse().unwrap(),
            },
        ]
    }

    #[test]
    fn parses_sample_session() {
        let file = parse_session_text(SAMPLE).unwrap();
        assert_eq!(file.n_packets, 4);
        assert_eq!(file.total_message_bits, 144);
        assert_eq!(file.sigma, SigmaMap::standard());
        assert_eq!(file.crypto, CryptoMap::Complement);
        assert_eq!(file.carriers_path, "carriers.fa");
        let cfg = file.into_config(records()).unwrap();
        assert_eq!(cfg.carrier_names, vec!["a", "b"]);
    }

    #[test]
    fn render_parse_round_trip() {
        let file = parse_session_text(SAMPLE).unwrap();
        let rendered = render_session_text(&file);
        assert_eq!(parse_session_text(&rendered).unwrap(), file);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let text = format!("{}mystery=1\n", SAMPLE);
        assert_eq!(
            parse_session_text(&text),
            Err(SessionError::UnknownKey("mystery".into()))
        );
        let text = format!("{}sigma=ACGT\n", SAMPLE);
        assert_eq!(
            parse_session_text(&text),
            Err(SessionError::DuplicateKey("sigma".into()))
        );
    }

    #[test]
    fn rejects_missing_key() {
        let text = SAMPLE.replace("n_packets=4\n", "");
        assert_eq!(
            parse_session_text(&text),
            Err(SessionError::MissingKey("n_packets"))
        );
    }

    #[test]
    fn xor_crypto_parses() {
        let text = SAMPLE.replace("crypto=complement", "crypto=xor:deadbeef");
        let file = parse_session_text(&text).unwrap();
        assert_eq!(file.crypto, CryptoMap::XorKeystream(vec![0xde, 0xad, 0xbe, 0xef]));
    }

    #[test]
    fn config_validation_catches_bad_counts() {
        let file = parse_session_text(SAMPLE).unwrap();

        let mut one_packet = file.clone();
        one_packet.n_packets = 1;
        assert_eq!(
            one_packet.into_config(records()),
            Err(SessionError::TooFewPackets(1))
        );

        let mut odd_bits = file.clone();
        odd_bits.total_message_bits = 7;
        assert_eq!(
            odd_bits.into_config(records()),
            Err(SessionError::BadTotalBits(7))
        );

        let mut too_many = file.clone();
        too_many.n_packets = 80;
        assert!(matches!(
            too_many.into_config(records()),
            Err(SessionError::TooManyPackets { .. })
        ));

        let mut recs = records();
        recs[1].seq = recs[0].seq.clone();
        assert_eq!(
            file.into_config(recs),
            Err(SessionError::DuplicateCarriers(0, 1))
        );
    }

    #[test]
    fn keygen_produces_reparseable_file() {
        let mut rng = rand::rng();
        let file = keygen(4, 144, "carriers.fa", &records(), &mut rng).unwrap();
        assert_eq!(file.sigma.to_string(), "ACGT");
        let rendered = render_session_text(&file);
        assert_eq!(parse_session_text(&rendered).unwrap(), file);
    }

    #[test]
    fn keygen_rejects_single_packet() {
        let mut rng = rand::rng();
        assert_eq!(
            keygen(1, 144, "c.fa", &records(), &mut rng),
            Err(SessionError::TooFewPackets(1))
        );
    }
}
