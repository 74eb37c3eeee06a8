//! Electric autonomous mobility-on-demand fleet control at desk scale: a
//! space-charge network model, exact LP machinery (revised simplex and
//! min-cost flow), a tri-level per-step controller, a discrete-time fleet
//! simulator, heuristic and MPC baselines, a graph-RL agent trained with
//! soft actor-critic, and a benchmark harness.

pub mod bench;
pub mod graph;
pub mod lp;
pub mod policies;
pub mod rl;
pub mod scalar;
pub mod sim;
pub mod trilevel;
pub mod scenario;

pub use scalar::Scalar;

/// Default scalar for money and LP arithmetic.
pub type Money = f64;
