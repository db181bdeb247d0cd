//! Polarization-domain physical-layer encipherment.
//!
//! Symbols live on the Poincaré sphere as Stokes vectors. A secret Mueller
//! matrix scrambles them before transmission; the legitimate receiver holds
//! the inverse, an eavesdropper does not. The crate provides the
//! Jones/Stokes/Mueller calculus, the three pattern families, strength
//! metrics, an AWGN link model and the Monte-Carlo experiment harness.

pub mod channel;
pub mod constellation;
pub mod encipherment;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod mueller;
pub mod polarization;
pub mod rng;
pub mod validate;

pub use channel::{ChannelConfig, Impairment, StokesMoments, TrialOutcome};
pub use constellation::{build_constellation, shared_constellation, SphereConstellation};
pub use encipherment::{
    golden_mueller, opposite_mueller, rotation_mueller, CipherContext, Scheme, SecretPattern, ThetaSampling,
};
pub use error::{Error, Result};
pub use experiments::{run_experiment, ExperimentConfig, ExperimentKind, ResultRecord, Role};
pub use mueller::{
    check_physical, check_physical_with_tol, coherency_from_mueller, determinant_line_residuals, gamma,
    jones_to_mueller, mueller_from_coherency, pauli, CoherencyMatrix, JonesMatrix, MuellerMatrix, PhysicalityReport,
};
pub use num_complex::Complex64;
pub use polarization::{
    degree_of_polarization, jones_to_stokes, spherical_to_jones, stokes_to_jones, JonesVector, SphericalCoords,
    StokesVector,
};
