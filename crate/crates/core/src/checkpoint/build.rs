use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Checkpoint, CheckpointPack, PackError, DEFAULT_THRESHOLD};
use crate::frame::Frame;
use crate::phash::{hash_frame, HashAlgorithm};

/// One walkthrough frame and where it sits in the walkthrough.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u32>,
    pub label: String,
}

/// Input to the pack builder, usually read from a TOML file whose image
/// paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackManifest {
    pub game_id: String,
    pub walkthrough_length_ms: u64,
    #[serde(default)]
    pub algorithm: HashAlgorithm,
    #[serde(default = "default_threshold")]
    pub default_threshold: u32,
    #[serde(default)]
    pub checkpoints: Vec<ManifestEntry>,
}

fn default_threshold() -> u32 {
    DEFAULT_THRESHOLD
}

impl PackManifest {
    pub fn from_toml_str(text: &str) -> Result<Self, PackError> {
        toml::from_str(text).map_err(|e| PackError::Parse(e.to_string()))
    }

    /// Hashes every image (paths resolved against `base_dir`) and produces
    /// a validated pack.
    pub fn build(&self, base_dir: &Path) -> Result<CheckpointPack, PackError> {
        let frames = self
            .checkpoints
            .iter()
            .map(|entry| {
                let path = base_dir.join(&entry.image);
                Frame::open(&path).map_err(|e| PackError::UnreadableImage {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        build_pack_from_frames(self, &frames)
    }
}

/// Builds a pack from a manifest whose images are already decoded;
/// `frames[i]` is the image for `manifest.checkpoints[i]`.
pub fn build_pack_from_frames(
    manifest: &PackManifest,
    frames: &[Frame],
) -> Result<CheckpointPack, PackError> {
    assert_eq!(frames.len(), manifest.checkpoints.len(), "one frame per manifest entry");
    // ordering is checked before any hashing so a bad manifest fails fast
    for (i, pair) in manifest.checkpoints.windows(2).enumerate() {
        if pair[1].timestamp_ms <= pair[0].timestamp_ms {
            return Err(PackError::UnsortedTimestamps {
                index: i + 1,
                timestamp_ms: pair[1].timestamp_ms,
            });
        }
    }
    let checkpoints = manifest
        .checkpoints
        .iter()
        .zip(frames)
        .enumerate()
        .map(|(index, (entry, frame))| {
            let hash = hash_frame(frame, manifest.algorithm).map_err(|e| {
                PackError::UnreadableImage {
                    path: entry.image.display().to_string(),
                    reason: e.to_string(),
                }
            })?;
            Ok(Checkpoint {
                index,
                hash,
                timestamp_ms: entry.timestamp_ms,
                threshold: entry.threshold.unwrap_or(manifest.default_threshold),
                label: entry.label.clone(),
                crop: None,
            })
        })
        .collect::<Result<Vec<_>, PackError>>()?;
    CheckpointPack::new(
        manifest.game_id.clone(),
        manifest.algorithm,
        manifest.walkthrough_length_ms,
        manifest.default_threshold,
        checkpoints,
    )
}

/// Convenience wrapper over [`PackManifest::build`] for callers that hold
/// the manifest entries directly.
pub fn build_pack(
    entries: Vec<ManifestEntry>,
    walkthrough_length_ms: u64,
    game_id: &str,
    algorithm: HashAlgorithm,
    base_dir: &Path,
) -> Result<CheckpointPack, PackError> {
    PackManifest {
        game_id: game_id.to_string(),
        walkthrough_length_ms,
        algorithm,
        default_threshold: DEFAULT_THRESHOLD,
        checkpoints: entries,
    }
    .build(base_dir)
}
