//! Numerical laboratory for first-order Hamilton–Jacobi–Bellman equations
//! `-∂ₜu + H(x, ∂ₓu) = 0`, `u(T, ·) = G` under the canonical shift
//! `(x, p) ↦ (x, p − αx)`.

pub mod dsl;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod certificate;
pub mod characteristics;
pub mod value;
