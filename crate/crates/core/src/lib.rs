//! Mutual-coupling impact on RIS-assisted channel estimation.
//!
//! Thin-wire impedances ([`impedance`]) feed the impedance-domain channel
//! model ([`channel`]); [`bounds`] evaluates the misspecified lower bound, its
//! bias floor, the matched CRLB and Monte-Carlo RMSE of the ML estimator;
//! [`experiment`] runs the parameter sweeps and writes CSV.

pub mod bounds;
pub mod channel;
pub mod constants;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod impedance;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod scenario;

pub use bounds::{BoundReport, MismatchAnalysis, NoiseModel};
pub use channel::{ChannelVector, RealifiedModel, RisLoadSequence};
pub use constants::PhysicalConstants;
pub use error::{Error, ErrorClass, Result};
pub use experiment::{LinkModel, SweepKind, SweepRequest, SweepResult, SweepRow};
pub use geometry::{Point3, Radiator, RisGrid};
pub use impedance::ImpedanceSet;
pub use quadrature::QuadratureSpec;
pub use scenario::{load_scenario, Scenario, ScenarioConfig};
