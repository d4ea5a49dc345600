//! Multi-channel transport simulation on a virtual clock: per-channel delay,
//! reordering, duplication, loss, and adversarial single-residue tampering.
//! Everything is driven by per-channel seeded RNGs, so a run is a pure
//! function of its inputs; no wall-clock time is involved.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::Nucleotide;
use crate::pipeline::StegoEnvelope;

pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimConfigError {
    #[error("delay range {min}..{max} is inverted")]
    BadDelayRange { min: u64, max: u64 },
    #[error("{name} probability {value} is outside [0, 1]")]
    BadProbability { name: &'static str, value: f64 },
    #[error("at least one channel is required")]
    NoChannels,
    #[error("line {line}: {reason}")]
    BadConfigLine { line: usize, reason: String },
}

/// Fault model of one simulated channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub delay_ms: (u64, u64),
    pub reorder: bool,
    pub duplicate_prob: f64,
    pub drop_prob: f64,
    pub tamper_prob: f64,
    pub rng_seed: u64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            delay_ms: (0, 0),
            reorder: false,
            duplicate_prob: 0.0,
            drop_prob: 0.0,
            tamper_prob: 0.0,
            rng_seed: 0,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<(), SimConfigError> {
        if self.delay_ms.0 > self.delay_ms.1 {
            return Err(SimConfigError::BadDelayRange {
                min: self.delay_ms.0,
                max: self.delay_ms.1,
            });
        }
        for (name, value) in [
            ("duplicate", self.duplicate_prob),
            ("drop", self.drop_prob),
            ("tamper", self.tamper_prob),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimConfigError::BadProbability { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimEventKind {
    Send,
    Deliver,
    Drop,
    Tamper,
}

impl fmt::Display for SimEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SimEventKind::Send => "send",
            SimEventKind::Deliver => "deliver",
            SimEventKind::Drop => "drop",
            SimEventKind::Tamper => "tamper",
        };
        write!(f, "{}", s)
    }
}

/// One line of the delivery log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub time_ms: u64,
    pub kind: SimEventKind,
    pub seq_bits: String,
    pub channel: usize,
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.time_ms, self.kind, self.seq_bits, self.channel)
    }
}

/// The delivery log plus what actually reached the receiver, in arrival order.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub events: Vec<SimEvent>,
    pub arrivals: Vec<StegoEnvelope>,
}

/// Push the envelopes through the channels (envelope k rides channel
/// k mod C). Copies arriving after `timeout_ms` are logged but not delivered.
pub fn simulate_send(
    envelopes: &[StegoEnvelope],
    channels: &[ChannelSpec],
    timeout_ms: u64,
) -> Result<SimOutcome, SimConfigError> {
    if channels.is_empty() {
        return Err(SimConfigError::NoChannels);
    }
    for spec in channels {
        spec.validate()?;
    }

    let mut rngs: Vec<ChaCha8Rng> = channels
        .iter()
        .map(|c| ChaCha8Rng::seed_from_u64(c.rng_seed))
        .collect();
    let mut last_delivery: Vec<u64> = vec![0; channels.len()];

    // (time, creation ordinal) keeps tie-breaking deterministic.
    let mut events: Vec<(u64, usize, SimEvent)> = Vec::new();
    let mut deliveries: Vec<(u64, usize, StegoEnvelope)> = Vec::new();
    let mut ordinal = 0usize;
    let mut push_event = |events: &mut Vec<(u64, usize, SimEvent)>, ev: SimEvent| {
        events.push((ev.time_ms, ordinal, ev));
        ordinal += 1;
    };

    for (k, envelope) in envelopes.iter().enumerate() {
        let channel = k % channels.len();
        let spec = &channels[channel];
        let rng = &mut rngs[channel];
        let seq = envelope.seq_bits.to_string();
        let send_time = k as u64;
        push_event(
            &mut events,
            SimEvent {
                time_ms: send_time,
                kind: SimEventKind::Send,
                seq_bits: seq.clone(),
                channel,
            },
        );

        // Fixed draw order per packet: delay, drop, tamper, duplicate, then
        // the duplicate's own delay. Changing this order changes every seeded
        // run, so it is part of the simulator's contract.
        let delay = rng.random_range(spec.delay_ms.0..=spec.delay_ms.1);
        let dropped = rng.random_bool(spec.drop_prob);
        let tampered = rng.random_bool(spec.tamper_prob);
        let duplicated = rng.random_bool(spec.duplicate_prob);

        let mut deliver_time = send_time + delay;
        if !spec.reorder {
            deliver_time = deliver_time.max(last_delivery[channel]);
        }
        last_delivery[channel] = deliver_time.max(last_delivery[channel]);

        if dropped {
            push_event(
                &mut events,
                SimEvent {
                    time_ms: deliver_time,
                    kind: SimEventKind::Drop,
                    seq_bits: seq.clone(),
                    channel,
                },
            );
            continue;
        }

        let delivered = if tampered {
            push_event(
                &mut events,
                SimEvent {
                    time_ms: deliver_time,
                    kind: SimEventKind::Tamper,
                    seq_bits: seq.clone(),
                    channel,
                },
            );
            tamper_one_residue(envelope, rng)
        } else {
            envelope.clone()
        };

        let mut copies = vec![deliver_time];
        if duplicated {
            let extra_delay = rng.random_range(spec.delay_ms.0..=spec.delay_ms.1);
            let mut t = send_time + extra_delay;
            if !spec.reorder {
                t = t.max(last_delivery[channel]);
            }
            last_delivery[channel] = t.max(last_delivery[channel]);
            copies.push(t);
        }
        for t in copies {
            push_event(
                &mut events,
                SimEvent {
                    time_ms: t,
                    kind: SimEventKind::Deliver,
                    seq_bits: seq.clone(),
                    channel,
                },
            );
            if t <= timeout_ms {
                deliveries.push((t, events.len(), delivered.clone()));
            }
        }
    }

    events.sort_by_key(|(t, ord, _)| (*t, *ord));
    deliveries.sort_by_key(|(t, ord, _)| (*t, *ord));
    Ok(SimOutcome {
        events: events.into_iter().map(|(_, _, e)| e).collect(),
        arrivals: deliveries.into_iter().map(|(_, _, e)| e).collect(),
    })
}

/// Substitute one random residue with a different random nucleotide. The MAC
/// is left alone: this models in-flight corruption, not a forgery.
fn tamper_one_residue<R: Rng>(envelope: &StegoEnvelope, rng: &mut R) -> StegoEnvelope {
    let mut residues = envelope.sequence.residues().to_vec();
    if !residues.is_empty() {
        let pos = rng.random_range(0..residues.len());
        let old = residues[pos];
        let replacement = loop {
            let candidate = Nucleotide::ALL[rng.random_range(0..4)];
            if candidate != old {
                break candidate;
            }
        };
        residues[pos] = replacement;
    }
    StegoEnvelope {
        seq_bits: envelope.seq_bits.clone(),
        sequence: crate::codec::NucleotideSeq::from_residues(residues),
        mac: envelope.mac,
    }
}

/// Parse a channels config: `[channel]` stanzas of key=value lines, plus an
/// optional `[sim]` stanza carrying `timeout_ms`.
pub fn parse_channels_config(text: &str) -> Result<(Vec<ChannelSpec>, u64), SimConfigError> {
    enum Section {
        None,
        Channel,
        Sim,
    }
    let mut channels: Vec<ChannelSpec> = Vec::new();
    let mut timeout_ms = DEFAULT_TIMEOUT_MS;
    let mut section = Section::None;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            "[channel]" => {
                channels.push(ChannelSpec::default());
                section = Section::Channel;
                continue;
            }
            "[sim]" => {
                section = Section::Sim;
                continue;
            }
            _ => {}
        }
        let (key, value) = line.split_once('=').ok_or(SimConfigError::BadConfigLine {
            line: lineno,
            reason: "expected key=value".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |reason: String| SimConfigError::BadConfigLine { line: lineno, reason };
        match section {
            Section::None => {
                return Err(bad("key before any [channel] or [sim] stanza".into()));
            }
            Section::Sim => match key {
                "timeout_ms" => {
                    timeout_ms = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                }
                other => return Err(bad(format!("unknown sim key {:?}", other))),
            },
            Section::Channel => {
                let spec = channels.last_mut().expect("stanza pushed on entry");
                match key {
                    "delay_ms" => {
                        let (lo, hi) = match value.split_once("..") {
                            Some((lo, hi)) => (
                                lo.trim().parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                                hi.trim().parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                            ),
                            None => {
                                let v = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                                (v, v)
                            }
                        };
                        spec.delay_ms = (lo, hi);
                    }
                    "reorder" => {
                        spec.reorder = value.parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?;
                    }
                    "duplicate_prob" => {
                        spec.duplicate_prob = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
                    }
                    "drop_prob" => {
                        spec.drop_prob = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
                    }
                    "tamper_prob" => {
                        spec.tamper_prob = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
                    }
                    "seed" => {
                        spec.rng_seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                    }
                    other => return Err(bad(format!("unknown channel key {:?}", other))),
                }
            }
        }
    }

    if channels.is_empty() {
        return Err(SimConfigError::NoChannels);
    }
    for spec in &channels {
        spec.validate()?;
    }
    Ok((channels, timeout_ms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::AuthTag;
    use std::collections::HashMap;

    fn envelope(seq: &str, body: &str) -> StegoEnvelope {
        StegoEnvelope {
            seq_bits: seq.parse().unwrap(),
            sequence: body.parse().unwrap(),
            mac: AuthTag::from_bytes([7; 32]),
        }
    }

    fn four_envelopes() -> Vec<StegoEnvelope> {
        vec![
            envelope("000001", "ACGTACGT"),
            envelope("001001", "CCGTACGT"),
            envelope("101001", "GCGTACGT"),
            envelope("101010", "TCGTACGT"),
        ]
    }

    #[test]
    fn faultless_channels_preserve_order() {
        let channels = vec![ChannelSpec::default(), ChannelSpec::default()];
        let out = simulate_send(&four_envelopes(), &channels, DEFAULT_TIMEOUT_MS).unwrap();
        assert_eq!(out.arrivals, four_envelopes());
        let delivers = out
            .events
            .iter()
            .filter(|e| e.kind == SimEventKind::Deliver)
            .count();
        assert_eq!(delivers, 4);
    }

    #[test]
    fn tamper_prob_one_corrupts_every_packet() {
        let channels = vec![ChannelSpec {
            tamper_prob: 1.0,
            rng_seed: 5,
            ..ChannelSpec::default()
        }];
        let envelopes = four_envelopes();
        let out = simulate_send(&envelopes, &channels, DEFAULT_TIMEOUT_MS).unwrap();
        assert_eq!(out.arrivals.len(), 4);
        for (sent, got) in envelopes.iter().zip(&out.arrivals) {
            assert_ne!(sent.sequence, got.sequence);
            assert_eq!(sent.sequence.len(), got.sequence.len());
            let diffs = sent
                .sequence
                .residues()
                .iter()
                .zip(got.sequence.residues())
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(diffs, 1);
        }
    }

    #[test]
    fn duplicate_prob_one_doubles_arrivals() {
        let channels = vec![ChannelSpec {
            duplicate_prob: 1.0,
            rng_seed: 9,
            ..ChannelSpec::default()
        }];
        let out = simulate_send(&four_envelopes(), &channels, DEFAULT_TIMEOUT_MS).unwrap();
        assert_eq!(out.arrivals.len(), 8);
    }

    #[test]
    fn drop_prob_one_loses_everything() {
        let channels = vec![ChannelSpec {
            drop_prob: 1.0,
            ..ChannelSpec::default()
        }];
        let out = simulate_send(&four_envelopes(), &channels, DEFAULT_TIMEOUT_MS).unwrap();
        assert!(out.arrivals.is_empty());
        let drops = out
            .events
            .iter()
            .filter(|e| e.kind == SimEventKind::Drop)
            .count();
        assert_eq!(drops, 4);
    }

    #[test]
    fn conservation_every_send_is_accounted_for() {
        let channels = vec![
            ChannelSpec {
                delay_ms: (0, 40),
                reorder: true,
                duplicate_prob: 0.3,
                drop_prob: 0.3,
                tamper_prob: 0.3,
                rng_seed: 11,
            },
            ChannelSpec {
                delay_ms: (5, 10),
                drop_prob: 0.5,
                rng_seed: 12,
                ..ChannelSpec::default()
            },
        ];
        let out = simulate_send(&four_envelopes(), &channels, DEFAULT_TIMEOUT_MS).unwrap();
        let mut outcomes: HashMap<&str, (usize, usize)> = HashMap::new();
        for ev in &out.events {
            let entry = outcomes.entry(ev.seq_bits.as_str()).or_default();
            match ev.kind {
                SimEventKind::Deliver => entry.0 += 1,
                SimEventKind::Drop => entry.1 += 1,
                _ => {}
            }
        }
        for e in four_envelopes() {
            let seq = e.seq_bits.to_string();
            let (delivered, dropped) = outcomes[seq.as_str()];
            // Exactly one fate per packet: dropped, or delivered (possibly twice).
            assert!(
                (dropped == 1 && delivered == 0) || (dropped == 0 && (1..=2).contains(&delivered)),
                "packet {} delivered {} dropped {}",
                seq,
                delivered,
                dropped
            );
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let channels = vec![ChannelSpec {
            delay_ms: (0, 100),
            reorder: true,
            duplicate_prob: 0.5,
            drop_prob: 0.2,
            tamper_prob: 0.4,
            rng_seed: 1234,
        }];
        let a = simulate_send(&four_envelopes(), &channels, DEFAULT_TIMEOUT_MS).unwrap();
        let b = simulate_send(&four_envelopes(), &channels, DEFAULT_TIMEOUT_MS).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.arrivals, b.arrivals);
    }

    #[test]
    fn timeout_discards_late_arrivals() {
        let channels = vec![ChannelSpec {
            delay_ms: (500, 500),
            ..ChannelSpec::default()
        }];
        let out = simulate_send(&four_envelopes(), &channels, 100).unwrap();
        assert!(out.arrivals.is_empty());
        // Still logged as delivered, just after the deadline.
        assert!(out.events.iter().any(|e| e.kind == SimEventKind::Deliver));
    }

    #[test]
    fn fifo_channels_never_reorder() {
        let channels = vec![ChannelSpec {
            delay_ms: (0, 200),
            reorder: false,
            rng_seed: 77,
            ..ChannelSpec::default()
        }];
        let out = simulate_send(&four_envelopes(), &channels, DEFAULT_TIMEOUT_MS).unwrap();
        let order: Vec<String> = out.arrivals.iter().map(|e| e.seq_bits.to_string()).collect();
        assert_eq!(order, vec!["000001", "001001", "101001", "101010"]);
    }

    #[test]
    fn config_parsing() {
        let text = "\
[sim]
timeout_ms=5000

[channel]
delay_ms=0..50
reorder=true
duplicate_prob=0.1
drop_prob=0.2
tamper_prob=0.3
seed=42

[channel]
delay_ms=7
";
        let (channels, timeout) = parse_channels_config(text).unwrap();
        assert_eq!(timeout, 5000);
        assert_eq!(channels.len(), 2);
        assert_eq!(channels[0].delay_ms, (0, 50));
        assert!(channels[0].reorder);
        assert_eq!(channels[0].rng_seed, 42);
        assert_eq!(channels[1].delay_ms, (7, 7));
        assert!(!channels[1].reorder);
    }

    #[test]
    fn config_rejects_bad_input() {
        assert!(matches!(
            parse_channels_config(""),
            Err(SimConfigError::NoChannels)
        ));
        assert!(matches!(
            parse_channels_config("[channel]\ndrop_prob=1.5\n"),
            Err(SimConfigError::BadProbability { .. })
        ));
        assert!(matches!(
            parse_channels_config("[channel]\nbogus=1\n"),
            Err(SimConfigError::BadConfigLine { .. })
        ));
        assert!(matches!(
            parse_channels_config("delay_ms=5\n"),
            Err(SimConfigError::BadConfigLine { .. })
        ));
    }
}
