//! Implicit Euler integration of ODE initial value problems and differential
//! inversion: computing `(E')⁻¹·v`, where `E : x₀ ↦ x_m` is the implicit Euler
//! map and `E'` its Jacobian with respect to the initial state.
//!
//! Three algorithms are provided, see [`inversion`]:
//!
//! | algorithm  | method                                           | cost         |
//! |------------|--------------------------------------------------|--------------|
//! | `blackbox` | tangent-mode AD through Newton and LU, then solve | `O(m·p·n⁴)` |
//! | `partial`  | `dxᵢ/dxᵢ₋₁ = (dF/dxᵢ)⁻¹` chained by LU solves       | `O(m·n³)`    |
//! | `full`     | taped `dF/dxᵢ` applied to `v` in reverse          | `O(m·n²)`    |
//!
//! ```
//! use diffinv::prelude::*;
//!
//! let cfg = IntegrationConfig::new(1.0, 1000).unwrap();
//! let x0 = StateVector::ones(2);
//! let xm = integrate(&LotkaVolterra2, &x0, &cfg).unwrap();
//! let w = diffinv_full(&LotkaVolterra2, &x0, &xm, &cfg).unwrap().w;
//! assert_eq!(w.dim(), 2);
//! ```

pub mod cli;
pub mod error;
pub mod euler;
pub mod exec;
pub mod inversion;
pub mod linalg;
pub mod ode;
pub mod tangent;
pub mod verify;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::euler::{integrate, integrate_recording, IntegrationConfig, Tape};
    pub use crate::exec::Execution;
    pub use crate::inversion::{
        diffinv, diffinv_blackbox, diffinv_full, diffinv_partial, fd_jacobian, jacobian_tangent,
        Algorithm, InversionResult,
    };
    pub use crate::linalg::{DenseMatrix, FlopCounter, StateVector};
    pub use crate::ode::{make_random_glv, GlvParams, LotkaVolterra2, OdeSystem, System};
    pub use crate::tangent::Tangent;
}
