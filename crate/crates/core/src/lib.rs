//! Weighted ℓ1 compressed sensing with a known support distribution.
//!
//! The crate covers the whole pipeline: designing weights from marginal
//! support probabilities ([`weights`]), exact projection onto the descent
//! cones of the weighted norm ([`cone`]), Monte Carlo estimates of the
//! resulting intrinsic volumes and statistical dimension ([`estimators`]),
//! stochastic steepest descent on the weights ([`gradient`]), and
//! end-to-end basis-pursuit recovery experiments ([`recovery`], [`lp`]).

pub mod cone;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod gradient;
pub mod lp;
pub mod recovery;
pub mod rng;
pub mod special;
pub mod weights;

pub use cone::{
    verify_witness, ConeCoordinates, ConeSpec, ProjectionWitness, WeightVector, WitnessReport,
};
pub use distributions::SupportDistribution;
pub use error::{Error, Result};
pub use estimators::{DeltaEstimate, DeltaMode, VolumeEstimate};
pub use gradient::{DescentConfig, DescentResult, GradientEstimate, GradientSample};
pub use recovery::{Magnitudes, MeasurementEnsemble, PhasePoint, RecoveryOutcome};
pub use rng::RngSeed;
pub use weights::BetaVector;
