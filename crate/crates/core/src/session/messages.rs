//! Public discussion over an authenticated, lossless classical channel.

use std::collections::{BTreeSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hardware::Detector;
use crate::optics::Polarization;

/// Version tag written into every exported transcript record.
pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PublicMessage {
    BasesAnnouncement {
        party: Party,
        indices: Vec<u64>,
        bases: Vec<Basis>,
    },
    /// Rounds in which the receiver registered a click.
    DetectionReport { indices: Vec<u64> },
    TimesAnnouncement {
        party: Party,
        indices: Vec<u64>,
        times: Vec<f64>,
    },
    SacrificeIndices { indices: Vec<u64> },
    SacrificeValues {
        party: Party,
        indices: Vec<u64>,
        values: Vec<bool>,
    },
    PolarizationDisclosure {
        index: u64,
        detector: Detector,
        detected: Option<Polarization>,
        initial: Polarization,
    },
}

impl PublicMessage {
    /// Rounds whose key-relevant value this message makes public.
    pub fn revealed_indices(&self) -> Vec<u64> {
        match self {
            PublicMessage::SacrificeValues { indices, .. } => indices.clone(),
            PublicMessage::PolarizationDisclosure { index, .. } => vec![*index],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    pub from: Party,
    pub message: PublicMessage,
}

#[derive(Serialize)]
struct Record<'a> {
    version: u32,
    #[serde(flatten)]
    envelope: &'a Envelope,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("message {seq} reveals the value of key position {index}")]
    KeyLeak { seq: u64, index: u64 },
    #[error("sacrificed values at round {index} were never announced as sacrificed")]
    UnannouncedSacrifice { index: u64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// FIFO message queue that also keeps the full transcript.
#[derive(Debug, Clone, Default)]
pub struct ClassicalChannel {
    queue: VecDeque<Envelope>,
    transcript: Vec<Envelope>,
    next_seq: u64,
}

impl ClassicalChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, from: Party, message: PublicMessage) {
        let env = Envelope {
            seq: self.next_seq,
            from,
            message,
        };
        self.next_seq += 1;
        self.transcript.push(env.clone());
        self.queue.push_back(env);
    }

    pub fn receive(&mut self) -> Option<Envelope> {
        self.queue.pop_front()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn transcript(&self) -> &[Envelope] {
        &self.transcript
    }

    /// Writes one JSON object per line.
    pub fn export_jsonl<W: Write>(&self, mut out: W) -> Result<(), TranscriptError> {
        export_jsonl(&self.transcript, &mut out)
    }
}

pub fn export_jsonl<W: Write>(transcript: &[Envelope], out: &mut W) -> Result<(), TranscriptError> {
    for env in transcript {
        let rec = Record {
            version: TRANSCRIPT_VERSION,
            envelope: env,
        };
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Checks that no message reveals the value of a round that ended up in the
/// key, and that every revealed sacrifice value was announced beforehand.
pub fn audit_transcript(transcript: &[Envelope], key_indices: &[u64]) -> Result<(), TranscriptError> {
    let key: BTreeSet<u64> = key_indices.iter().copied().collect();
    let mut announced = BTreeSet::new();
    for env in transcript {
        if let PublicMessage::SacrificeIndices { indices } = &env.message {
            announced.extend(indices.iter().copied());
        }
        if let PublicMessage::SacrificeValues { indices, .. } = &env.message {
            if let Some(&index) = indices.iter().find(|i| !announced.contains(i)) {
                return Err(TranscriptError::UnannouncedSacrifice { index });
            }
        }
        if let Some(index) = env.message.revealed_indices().into_iter().find(|i| key.contains(i)) {
            return Err(TranscriptError::KeyLeak {
                seq: env.seq,
                index,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_is_fifo() {
        let mut ch = ClassicalChannel::new();
        ch.send(Party::Alice, PublicMessage::DetectionReport { indices: vec![1] });
        ch.send(Party::Bob, PublicMessage::SacrificeIndices { indices: vec![2] });
        assert_eq!(ch.receive().unwrap().seq, 0);
        assert_eq!(ch.receive().unwrap().seq, 1);
        assert!(ch.receive().is_none());
        assert_eq!(ch.transcript().len(), 2);
    }

    #[test]
    fn audit_catches_leaks() {
        let mut ch = ClassicalChannel::new();
        ch.send(Party::Bob, PublicMessage::SacrificeIndices { indices: vec![4] });
        ch.send(
            Party::Alice,
            PublicMessage::SacrificeValues {
                party: Party::Alice,
                indices: vec![4],
                values: vec![true],
            },
        );
        assert!(audit_transcript(ch.transcript(), &[1, 2]).is_ok());
        assert!(matches!(
            audit_transcript(ch.transcript(), &[4]),
            Err(TranscriptError::KeyLeak { index: 4, .. })
        ));
        let mut bad = ClassicalChannel::new();
        bad.send(
            Party::Alice,
            PublicMessage::SacrificeValues {
                party: Party::Alice,
                indices: vec![7],
                values: vec![false],
            },
        );
        assert!(matches!(
            audit_transcript(bad.transcript(), &[]),
            Err(TranscriptError::UnannouncedSacrifice { index: 7 })
        ));
    }

    #[test]
    fn jsonl_has_version_and_one_line_per_message() {
        let mut ch = ClassicalChannel::new();
        ch.send(Party::Alice, PublicMessage::DetectionReport { indices: vec![1, 2] });
        ch.send(Party::Bob, PublicMessage::DetectionReport { indices: vec![] });
        let mut buf = Vec::new();
        ch.export_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["message"]["type"], "detection_report");
    }
}
