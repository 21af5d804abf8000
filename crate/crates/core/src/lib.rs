//! Exact symbolic and numerical verification that `ζ(0)` of the conformally
//! perturbed Laplacian `k∆k` on the noncommutative two-torus equals `-1`.

pub mod coeffring;
pub mod ncalg;
pub mod symbolcalc;
pub mod integrate;
pub mod modular;
pub mod oracle;
pub mod pipeline;
