use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phash::{HashAlgorithm, PerceptualHash};

pub const PACK_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: u32 = 12;

#[derive(Debug, Error)]
pub enum PackError {
    #[error("pack parse error: {0}")]
    Parse(String),
    #[error("unsupported pack version {0} (expected {PACK_VERSION})")]
    UnsupportedVersion(u32),
    #[error("checkpoint {index} at {timestamp_ms} ms does not come after the previous checkpoint")]
    UnsortedTimestamps { index: usize, timestamp_ms: u64 },
    #[error("checkpoint {index} at {timestamp_ms} ms exceeds walkthrough length {length_ms} ms")]
    TimestampExceedsLength {
        index: usize,
        timestamp_ms: u64,
        length_ms: u64,
    },
    #[error("threshold {0} is outside 0..=64")]
    BadThreshold(u32),
    #[error("checkpoint indices must run 0, 1, 2, ...; found {found} at position {position}")]
    BadIndex { position: usize, found: usize },
    #[error("checkpoint {index} hash uses {found}, pack declares {expected}")]
    AlgorithmMismatch {
        index: usize,
        expected: HashAlgorithm,
        found: HashAlgorithm,
    },
    #[error("walkthrough length must be positive")]
    ZeroLength,
    #[error("cannot read image {path}: {reason}")]
    UnreadableImage { path: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Reserved crop rectangle; stored and round-tripped but not used for
/// matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub index: usize,
    pub hash: PerceptualHash,
    pub timestamp_ms: u64,
    /// Effective match threshold: a frame matches when its distance is
    /// strictly below this.
    pub threshold: u32,
    pub label: String,
    pub crop: Option<CropRect>,
}

/// Ordered walkthrough milestones for one game. Always valid once
/// constructed; use [`CheckpointPack::new`] or [`load_pack`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointPack {
    game_id: String,
    algorithm: HashAlgorithm,
    walkthrough_length_ms: u64,
    default_threshold: u32,
    checkpoints: Vec<Checkpoint>,
}

impl CheckpointPack {
    pub fn new(
        game_id: impl Into<String>,
        algorithm: HashAlgorithm,
        walkthrough_length_ms: u64,
        default_threshold: u32,
        checkpoints: Vec<Checkpoint>,
    ) -> Result<Self, PackError> {
        let pack = CheckpointPack {
            game_id: game_id.into(),
            algorithm,
            walkthrough_length_ms,
            default_threshold,
            checkpoints,
        };
        pack.validate()?;
        Ok(pack)
    }

    fn validate(&self) -> Result<(), PackError> {
        if self.walkthrough_length_ms == 0 {
            return Err(PackError::ZeroLength);
        }
        if self.default_threshold > 64 {
            return Err(PackError::BadThreshold(self.default_threshold));
        }
        let mut previous: Option<u64> = None;
        for (position, cp) in self.checkpoints.iter().enumerate() {
            if cp.index != position {
                return Err(PackError::BadIndex {
                    position,
                    found: cp.index,
                });
            }
            if cp.threshold > 64 {
                return Err(PackError::BadThreshold(cp.threshold));
            }
            if cp.hash.algorithm() != self.algorithm {
                return Err(PackError::AlgorithmMismatch {
                    index: cp.index,
                    expected: self.algorithm,
                    found: cp.hash.algorithm(),
                });
            }
            if previous.is_some_and(|p| cp.timestamp_ms <= p) {
                return Err(PackError::UnsortedTimestamps {
                    index: cp.index,
                    timestamp_ms: cp.timestamp_ms,
                });
            }
            if cp.timestamp_ms > self.walkthrough_length_ms {
                return Err(PackError::TimestampExceedsLength {
                    index: cp.index,
                    timestamp_ms: cp.timestamp_ms,
                    length_ms: self.walkthrough_length_ms,
                });
            }
            previous = Some(cp.timestamp_ms);
        }
        Ok(())
    }

    pub fn game_id(&self) -> &str {
        &self.game_id
    }

    pub fn algorithm(&self) -> HashAlgorithm {
        self.algorithm
    }

    pub fn walkthrough_length_ms(&self) -> u64 {
        self.walkthrough_length_ms
    }

    pub fn default_threshold(&self) -> u32 {
        self.default_threshold
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.checkpoints
    }

    pub fn final_index(&self) -> Option<usize> {
        self.checkpoints.len().checked_sub(1)
    }

    pub fn to_toml_string(&self) -> String {
        let doc = PackDoc {
            version: PACK_VERSION,
            game_id: self.game_id.clone(),
            algorithm: self.algorithm,
            walkthrough_length_ms: self.walkthrough_length_ms,
            default_threshold: Some(self.default_threshold),
            checkpoints: self
                .checkpoints
                .iter()
                .map(|cp| CheckpointDoc {
                    index: cp.index,
                    hash: cp.hash,
                    timestamp_ms: cp.timestamp_ms,
                    threshold: (cp.threshold != self.default_threshold).then_some(cp.threshold),
                    label: cp.label.clone(),
                    crop: cp.crop,
                })
                .collect(),
        };
        toml::to_string(&doc).expect("pack documents always serialize")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PackError> {
        let doc: PackDoc = toml::from_str(text).map_err(|e| PackError::Parse(e.to_string()))?;
        if doc.version != PACK_VERSION {
            return Err(PackError::UnsupportedVersion(doc.version));
        }
        let default_threshold = doc.default_threshold.unwrap_or(DEFAULT_THRESHOLD);
        if default_threshold > 64 {
            return Err(PackError::BadThreshold(default_threshold));
        }
        let checkpoints = doc
            .checkpoints
            .into_iter()
            .map(|c| Checkpoint {
                index: c.index,
                hash: c.hash,
                timestamp_ms: c.timestamp_ms,
                threshold: c.threshold.unwrap_or(default_threshold),
                label: c.label,
                crop: c.crop,
            })
            .collect();
        CheckpointPack::new(
            doc.game_id,
            doc.algorithm,
            doc.walkthrough_length_ms,
            default_threshold,
            checkpoints,
        )
    }
}

/// Reads and validates a pack document.
pub fn load_pack(mut source: impl Read) -> Result<CheckpointPack, PackError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| PackError::Parse(e.to_string()))?;
    CheckpointPack::from_toml_str(&text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PackDoc {
    version: u32,
    game_id: String,
    algorithm: HashAlgorithm,
    walkthrough_length_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default_threshold: Option<u32>,
    #[serde(default)]
    checkpoints: Vec<CheckpointDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    index: usize,
    hash: PerceptualHash,
    timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<u32>,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crop: Option<CropRect>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(checkpoints: &str) -> String {
        format!(
            "version = 1\ngame_id = \"kirby\"\nalgorithm = \"dhash\"\nwalkthrough_length_ms = 10000\n{checkpoints}"
        )
    }

    const CP: &str = "[[checkpoints]]\nindex = {i}\nhash = \"dhash:00000000000000ff\"\ntimestamp_ms = {t}\nlabel = \"cp\"\n";

    fn cp(i: usize, t: u64, extra: &str) -> String {
        CP.replace("{i}", &i.to_string())
            .replace("{t}", &t.to_string())
            + extra
    }

    #[test]
    fn minimal_pack_with_boundary_timestamp() {
        let pack = load_pack(doc(&cp(0, 10000, "")).as_bytes()).unwrap();
        assert_eq!(pack.default_threshold(), 12);
        assert_eq!(pack.checkpoints()[0].threshold, 12);
        assert_eq!(pack.final_index(), Some(0));
    }

    #[test]
    fn rejects_unsorted() {
        let text = doc(&(cp(0, 10000, "") + &cp(1, 5000, "")));
        assert!(matches!(
            load_pack(text.as_bytes()),
            Err(PackError::UnsortedTimestamps { index: 1, .. })
        ));
        let text = doc(&(cp(0, 5000, "") + &cp(1, 5000, "")));
        assert!(matches!(
            load_pack(text.as_bytes()),
            Err(PackError::UnsortedTimestamps { .. })
        ));
    }

    #[test]
    fn rejects_bad_thresholds_and_lengths() {
        let text = doc(&cp(0, 100, "threshold = 65\n"));
        assert!(matches!(
            load_pack(text.as_bytes()),
            Err(PackError::BadThreshold(65))
        ));
        let text = doc(&cp(0, 10001, ""));
        assert!(matches!(
            load_pack(text.as_bytes()),
            Err(PackError::TimestampExceedsLength { .. })
        ));
        assert!(matches!(
            load_pack(doc("default_threshold = 70\n").as_bytes()),
            Err(PackError::BadThreshold(70))
        ));
        let text = doc(&cp(1, 100, ""));
        assert!(matches!(
            load_pack(text.as_bytes()),
            Err(PackError::BadIndex { .. })
        ));
        let text = doc(&cp(0, 100, "")).replace("dhash:", "ahash:");
        assert!(matches!(
            load_pack(text.as_bytes()),
            Err(PackError::AlgorithmMismatch { .. })
        ));
        assert!(matches!(
            load_pack("version = 2".as_bytes()),
            Err(PackError::Parse(_))
        ));
        assert!(matches!(
            load_pack(doc("").replace("version = 1", "version = 2").as_bytes()),
            Err(PackError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn toml_round_trip_keeps_overrides_and_crop() {
        let text = doc(
            &(cp(0, 100, "threshold = 7\n")
                + &cp(1, 200, "[checkpoints.crop]\nx = 1\ny = 2\nwidth = 30\nheight = 40\n")),
        );
        let pack = load_pack(text.as_bytes()).unwrap();
        assert_eq!(pack.checkpoints()[0].threshold, 7);
        assert_eq!(pack.checkpoints()[1].threshold, 12);
        assert!(pack.checkpoints()[1].crop.is_some());
        let again = CheckpointPack::from_toml_str(&pack.to_toml_string()).unwrap();
        assert_eq!(pack, again);
    }
}
