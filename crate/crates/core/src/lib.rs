//! Channel estimation for full-duplex multi-tag ambient backscatter links
//! impaired by transmit and receive I/Q imbalance.
//!
//! The crate covers the whole chain: channel and impairment models, the
//! three-phase pilot protocol, a pilot-only least-squares estimator, two
//! semi-blind estimators (decision-directed alternating maximisation and
//! expectation conditional maximisation), Cramér–Rao benchmarks and a
//! seeded Monte-Carlo harness.

pub mod amdd;
pub mod channel;
pub mod config;
pub mod crb;
pub mod detect;
pub mod ecm;
pub mod harness;
pub mod error;
pub mod linalg;
pub mod pilot_est;
pub mod pilots;
pub mod synth;

pub use channel::{
    derive_effective, pathloss, sample_channels, Block, BlockErrors, EffectiveChannels, EstimateSet,
    EstimatorKind, IqParams, Layout, PhysicalChannels,
};
pub use config::{Constellation, ExperimentConfig, IqSpec, PerTag, RunConfig, SweepGrid, SystemConfig};
pub use error::{Error, Result};
pub use pilot_est::pilot_estimate;
pub use pilots::{PilotPlan, PlanSummary};
pub use synth::{synth_data, synth_training, DataSignals, TrainingSignals};
pub use detect::{ml_detect, Alphabet, DetectedBlock};
pub use harness::{bound_curve, export_results, run_sweep, run_trial, SweepKind, SweepResult};
