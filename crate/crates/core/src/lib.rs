//! Desk-scale model of a trapped-ion / fiber-cavity spin-photon entanglement
//! node: cavity efficiency budget, Monte Carlo sequence simulation, state
//! tomography with likelihood-based reconstruction and Jones-calculus
//! calibration of the photon detection path.
//!
//! The state, cavity and Jones layers are generic over [`Real`] (`f32` or
//! `f64`); the aliases below pin them to `f64`, which is what the simulation,
//! fitting and tomography layers use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cavity;
pub mod jones;
pub mod linalg;
pub mod optimize;
pub mod quantum;
pub mod scalar;
pub mod sim;
pub mod tomography;

pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Complex = num_complex::Complex<f64>;
pub type Mat2 = linalg::Mat2<f64>;
pub type Mat4 = linalg::Mat4<f64>;
pub type Vec2 = linalg::Vec2<f64>;
pub type Vec4 = linalg::Vec4<f64>;
pub type State = quantum::TwoQubitState<f64>;
pub type MirrorSet = cavity::MirrorSet<f64>;
pub type CavityGeometry = cavity::CavityGeometry<f64>;
pub type AtomCavityParams = cavity::AtomCavityParams<f64>;
pub type EfficiencyChain = cavity::EfficiencyChain<f64>;
pub type JonesElement = jones::JonesElement<f64>;
pub type FiberModel = jones::FiberModel<f64>;

pub use quantum::{PauliLabel, QuantumError};
