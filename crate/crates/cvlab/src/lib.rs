//! # cvlab — a continuous-variable bosonic circuit laboratory
//!
//! `cvlab` simulates continuous-variable (CV) quantum circuits — harmonic
//! modes acted on by Gaussian operations, cubic phase gates, and
//! photon-number measurements — with three interoperating engines:
//!
//! * [`focksim`] — truncated Fock-space simulation with certified
//!   truncation errors (adaptive energy-cutoff doubling, leakage bounds,
//!   amplitude-damping channels).
//! * [`gausssim`] — exact pure Gaussian states in closed form
//!   (complex-quadratic wavepackets with global phase tracked exactly),
//!   plus finite superpositions of Gaussians.
//! * [`grank`] — Gaussian-rank decompositions of the cubic phase state
//!   with certified approximation budgets, and the path-sum estimator
//!   built on them ([`pathsum`]).
//!
//! Supporting modules: [`algebra`] (normal-ordered ladder polynomials),
//! [`gadget`] (measurement-based cubic gate teleportation),
//! [`energetics`] (energy growth and divergence certificates),
//! [`adiabatic`] (a frustration-free adiabatic path with numeric gap
//! tracking).
//!
//! ## Conventions
//!
//! Throughout, `ħ = 1`, `X = (a + a†)/√2`, `P = (a − a†)/(i√2)`, so
//! `[X, P] = i` and the vacuum covariance is `I/2`. Covariance matrices
//! order quadratures as `(X₁, …, X_m, P₁, …, P_m)`. The squeezing
//! operator is `S(r) = exp(r(a² − a†²)/2)`, which shrinks the position
//! variance to `e^{−2r}/2`; the width convention `ξ = e^r` labels the
//! squeezed vacuum `|S_ξ⟩ = S(−ln ξ)|0⟩` whose position wavefunction has
//! width `ξ`.
//!
//! ## Quick start
//!
//! ```
//! use cvlab::gausssim::Wavepacket;
//! use cvlab::focksim::FockState;
//!
//! // A coherent state in the exact Gaussian engine...
//! let alpha = cvlab::C64::new(0.7, -0.3);
//! let g = Wavepacket::<f64>::coherent(alpha);
//!
//! // ...and the same state in a truncated Fock space.
//! let f = FockState::<f64>::coherent(alpha, 40);
//!
//! // Their position moments agree.
//! let (mu, _gamma) = g.mean_and_covariance();
//! let x_fock = f.quadrature_means()[0].0;
//! assert!((mu[0] - x_fock).abs() < 1e-10);
//! ```
//!
//! Scalar-generic cores are exposed through the [`scalar::Real`] and
//! [`scalar::Coeff`] traits; the crate root re-exports `f64`-flavoured
//! aliases ([`PolyOp64`], [`FockState64`], [`Wavepacket64`], …) for
//! everyday use, and [`algebra::PolyOp`] additionally admits exact
//! rational coefficients ([`scalar::Exact`]) for symbolic identities.

pub mod scalar;
pub mod numerics;
pub mod linalg;
pub mod algebra;
pub mod focksim;
pub mod gausssim;
pub mod grank;
pub mod gadget;
pub mod pathsum;
pub mod energetics;
pub mod adiabatic;
pub mod error;

pub use error::{CvError, Result};

/// Double-precision complex scalar used by the `f64` front ends.
pub type C64 = num_complex::Complex64;

// f64-flavoured aliases for the scalar-generic engines; re-enabled as
// each module lands.
pub type PolyOp64 = algebra::PolyOp<C64>;
pub type FockState64 = focksim::FockState<f64>;
pub type Wavepacket64 = gausssim::Wavepacket<f64>;
pub type GaussianSum64 = gausssim::GaussianSum<f64>;
