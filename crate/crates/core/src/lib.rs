//! Collision-model simulation of single-photon scattering on two qubits
//! coupled to a waveguide with propagation delay, and closed-form targets for
//! the bound state in the continuum that the scattering can populate.
//!
//! The crate is organised bottom-up:
//!
//! * [`mps`]: matrix product states over four-level sites with SVD-truncated
//!   gate application, SWAPs, overlaps and reduced density matrices.
//! * [`collision`]: the three-site step gate with delayed coupling, the
//!   SWAP schedule that brings the delayed bin next to the qubits, and the
//!   time evolution with observable records.
//! * [`wavepacket`]: exponential single-photon inputs and relaxation starts.
//! * [`analytics`]: closed-form probabilities and the discretized bound state.
//! * [`oracle`]: exact evolution restricted to the single-excitation sector.
//! * [`cli`]: configuration, run orchestration, sweeps and file output.

pub mod analytics;
pub mod cli;
pub mod collision;
pub mod dense;
pub mod error;
pub mod linalg;
pub mod mps;
pub mod oracle;
pub mod wavepacket;

pub use collision::{CollisionEngine, Detuning, Mode, ModelParams, ObservableRecord};
pub use error::{Error, Result};
pub use mps::{MpsState, SiteRole, Truncation};
