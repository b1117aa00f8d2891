//! Secure integrated sensing and communication with delay alignment
//! modulation: channel synthesis, two-stage target estimation, secrecy
//! metrics and the SCA precoder optimizer.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod precoding;
pub mod sca_opt;
pub mod scalar;
pub mod secrecy;
pub mod stage1_angle;
pub mod stage2_delay;
pub mod validation;
pub mod waveform;

pub use channel::{
    array_response, generate_channels, large_scale_gain, ArrayConfig, ChannelSet, LinkRole,
    MultipathChannel, NoiseVariances, PathComponent, PathKind, ScenarioConfig,
};
pub use error::{DamError, Result};
pub use experiments::{ExperimentConfig, ResultRow, RunManifest, Scheme};
pub use precoding::{PowerSplit, ProjectorBank};
pub use sca_opt::{CrbConstraint, ScaOptions, ScaProblem, ScaState};
pub use scalar::Real;
pub use secrecy::{DelayGroupTable, QuadraticFormSet, SinrTerms};
pub use stage1_angle::{FrameConfig, PathEstimate, SpaceTimeManifold};
pub use stage2_delay::{DelayEstimate, EchoModel};
pub use validation::{OracleReport, ValidationCase};
pub use waveform::{PrecoderSet, SymbolKind, SymbolStream};

/// Double-precision aliases.
pub type Array = ArrayConfig<f64>;
pub type Channel = MultipathChannel<f64>;
pub type Channels = ChannelSet<f64>;
pub type Precoders = PrecoderSet<f64>;
pub type Symbols = SymbolStream<f64>;
pub type Echo = EchoModel<f64>;
pub type Forms = QuadraticFormSet<f64>;
pub type GroupTable = DelayGroupTable<f64>;
pub type Projectors = ProjectorBank<f64>;
pub type Problem = ScaProblem<f64>;
pub type Manifold = SpaceTimeManifold<f64>;
