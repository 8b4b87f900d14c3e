//! Structure-preserving simulation of boundary-controlled conduction-diffusion
//! processes written as irreversible port-Hamiltonian systems (IPHS).
//!
//! The state is the vector of extensive variables `x = [c_1, ..., c_n, s]`
//! (molar concentrations and entropy density), stored cell-centered on a 1D or
//! 2D staggered grid. The dynamics
//!
//! ```text
//! dc_i/dt = div(r_ci T)
//! ds/dt   = sum_i r_ci . grad(mu_i) + r_s . grad(T) + div(r_s T)
//! ```
//!
//! are assembled from state-modulated, skew-symmetric operators acting on the
//! co-energy variables `e = [mu_1, ..., mu_n, T]`. Because the discrete
//! gradient and divergence satisfy an exact summation-by-parts identity, the
//! discrete energy changes only through boundary ports and the discrete
//! entropy production is a sum of non-negative quadratic forms.
//!
//! Modules, bottom-up:
//!
//! - [`constitutive`]: thermodynamic state, energy/entropy functionals and the
//!   Gibbs co-energy maps.
//! - [`mesh`]: staggered grid, discrete `grad`/`div`, traces and quadratures.
//! - [`operators`]: driving forces, modulators, `Psi`, `J_glob` and its
//!   factorized form, entropy production and fluxes.
//! - [`ports`]: 1D boundary port synthesis (`P_e`, `M`, `W_B`, `W_C`) and
//!   N-dimensional boundary port pairs.
//! - [`dynamics`]: boundary conditions, time integration and balance audits.

pub mod constitutive;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod ports;

pub use error::{Error, Result};
