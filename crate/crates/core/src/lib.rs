//! Vorticity dynamics around a body in the plane.
//!
//! The crate works in the exterior of a disc of radius `r0` (or, through a
//! conformal map, in the exterior of a simply connected body) and represents
//! every field by its angular Fourier modes `w_k(r)`, `k = -K..K`. It provides
//!
//! * integer-order Bessel functions and the Robin eigenfunction kernel ([`specfun`]),
//! * polar grids, angular analysis/synthesis and radial quadrature ([`grid`]),
//! * Biot-Savart velocity reconstruction and the no-slip moment constraints
//!   ([`biot_savart`]),
//! * the Weber-Orr transform pair and the exact Stokes propagator ([`weber_orr`]),
//! * Crank-Nicolson time stepping for Stokes, Oseen and Navier-Stokes vorticity
//!   dynamics with Robin-type boundary closures ([`evolution`]),
//! * Laurent-series conformal maps and the mapped-domain operators ([`conformal`]).
//!
//! The crate is `no_std` and only needs `alloc`. Enabling the `parallel`
//! feature evaluates independent angular modes on the rayon thread pool.

#![no_std]
#![cfg_attr(any(test, feature = "parallel"), allow(unused_imports))]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(any(test, feature = "parallel"))]
extern crate std;

pub mod biot_savart;
pub mod conformal;
pub mod diagnostics;
mod error;
pub mod evolution;
pub mod grid;
pub mod linalg;
mod par;
pub mod specfun;
pub mod weber_orr;

pub use error::{Error, Result};
pub use num_complex::Complex64;
