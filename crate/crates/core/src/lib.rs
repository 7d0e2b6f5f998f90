//! Asymptotic expansions of orbits and Dulac times for saddle-node unfoldings.
//!
//! The crate is layered bottom-up:
//!
//! * [`series`]: truncated power series, the finite difference `nabla` and `theta`.
//! * [`family`]: polynomial families `P(x; eps)`, Puiseux branches of the biggest
//!   real root, the recentred polynomial `Q(s, e)` and hypothesis checks.
//! * [`expansion`]: the coefficient recursion, two-sided gluing and mode sums.
//! * [`oracle`]: numeric ground truth (quadrature and ODE integration).
//! * [`loud`]: the Loud family of quadratic centres.
//! * [`cli`]: JSON problem specs and the `dulackit` command.

pub mod cli;
pub mod expansion;
pub mod family;
pub mod loud;
pub mod oracle;
pub mod scalar;
pub mod series;
