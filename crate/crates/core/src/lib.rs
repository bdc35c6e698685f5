//! No-phase-locking twin-field QKD toolkit.
//!
//! The crate covers the full post-processing chain of a TF-QKD system
//! whose two lasers are free-running: synthesizing phase-noise-afflicted
//! photon click streams, recovering the beat-note carrier from sparse
//! R-frame clicks with a zero-padded FFT, sifting Q-frame events against
//! the recovered carrier, and the finite-size 3-intensity SNS key-rate
//! analysis with actively odd-parity pairing.
//!
//! Modules map onto the processing stages:
//!
//! - [`noise`]: PSD models and the analytical PSD → error-rate chain
//! - [`synth`]: stochastic phase trajectories and Poisson click streams
//! - [`recovery`]: FFT carrier estimation from binned ±1 click series
//! - [`sift`]: event classification, error tallies, SNS count tables
//! - [`keyrate`]: decoy bounds, AOPP, and the secret key rate
//! - [`forward`]: expected-value channel model for key-rate scenarios
//! - [`timetag`], [`config`], [`scenario`]: file formats and the runner

pub mod config;
pub mod forward;
pub mod keyrate;
pub mod noise;
pub mod quad;
pub mod recovery;
pub mod scenario;
pub mod sift;
pub mod synth;
pub mod timetag;
