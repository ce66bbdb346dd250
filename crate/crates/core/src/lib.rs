//! Harness for evaluating vision-driven agents on video games in real time.

pub mod action;
pub mod agent;
pub mod checkpoint;
pub mod env;
pub mod frame;
pub mod gateway;
pub mod phash;
pub mod practice;
pub mod run;
pub mod testkit;

pub use action::{parse_action_text, ActionCommand, ActionError};
pub use agent::{Agent, AgentConfig, ModelClient};
pub use checkpoint::{progress_score, CheckpointPack, ProgressState};
pub use env::{ClockMode, EnvError, EnvStatus, Environment};
pub use frame::{Frame, SurfaceBounds};
pub use phash::{hash_frame, HashAlgorithm, PerceptualHash};
pub use run::{run, RunConfig, RunRecord, TerminationReason};
