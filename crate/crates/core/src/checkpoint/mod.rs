//! Walkthrough checkpoint packs and furthest-progress scoring.
//!
//! A pack lists milestone frames (as perceptual hashes) with their position
//! in a reference walkthrough. Every frame a run produces is compared with
//! every checkpoint; a distance strictly below the checkpoint's threshold is
//! a match. A game's score is the walkthrough position of the furthest
//! checkpoint matched, as a fraction of the walkthrough length.

mod build;
mod pack;
mod progress;

pub use build::{build_pack, build_pack_from_frames, ManifestEntry, PackManifest};
pub use pack::{
    load_pack, Checkpoint, CheckpointPack, CropRect, PackError, DEFAULT_THRESHOLD, PACK_VERSION,
};
pub use progress::{
    match_frame, overall_score, progress_score, MatchEvent, ProgressState, ScoreError,
};
