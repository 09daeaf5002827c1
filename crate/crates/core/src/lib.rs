//! Residual networks trained as discrete-time optimal control problems,
//! with a-posteriori turnpike diagnostics and explicit depth certificates.
//!
//! A constant-width residual network `x_{k+1} = x_k + σ(A_k x_k + b_k)` is
//! treated as a control system whose controls are the layer weights. All `D`
//! samples are propagated together as one stacked (ensemble) state, and
//! training minimizes
//!
//! ```text
//! Σ_{k<N} ℓ(x_k, u_k) + γ·ℓ_f(x_N)
//! ```
//!
//! where `ℓ` penalizes deviation from the class anchors and weight size. The
//! [`turnpike`] module then fits an exponential envelope to the realized
//! stage costs and turns it into bounds on the required depth.
//!
//! Modules:
//!
//! - [`cost`]: norms, stage cost, terminal loss
//! - [`dynamics`]: single-sample and ensemble propagation
//! - [`training`]: adjoint gradients and the optimizer loop
//! - [`turnpike`]: occupation counts, dissipation checks, depth bounds
//! - [`taskdata`]: two-spiral data, classifier, risk, decision grids
//!
//! ```
//! use turnpike::{generate_two_spiral, train, SpiralConfig, TrainConfig};
//! use turnpike::turnpike::depth_bounds;
//!
//! let data = generate_two_spiral(&SpiralConfig::new(20, 0.0, 1))?;
//! let mut cfg = TrainConfig::two_spiral(10, data.len());
//! cfg.max_iters = 2000;
//! let res = train(&data, &cfg)?;
//! let (bounds, _) = depth_bounds(&res.trajectory, data.anchors(), &cfg.cost, 1.0)?;
//! assert!(bounds.n_inf < bounds.n2);
//! # Ok::<(), turnpike::Error>(())
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod network;
pub mod state;
pub mod taskdata;
pub mod training;
pub mod turnpike;

pub use cost::{stage_cost, terminal_loss, vector_norm, NormOrder, StageCostParams};
pub use dataset::{ClassAnchor, Dataset};
pub use dynamics::{ensemble_step, forward_layer, rollout, Trajectory};
pub use error::{Error, Result};
pub use network::{Activation, Layer, NetworkWeights};
pub use state::EnsembleState;
pub use taskdata::{
    classify, decision_grid, empirical_risk, generate_two_spiral, Decision, GridPoint, SpiralConfig,
};
pub use training::{gradient, objective, train, StepRule, TrainConfig, TrainResult};
pub use turnpike::{
    analyze, check_dissipation, depth_bound_formula, depth_bound_from_cost, depth_bounds,
    epsilon_occupation, estimate_beta_rho, DepthBounds, Envelope, TurnpikeReport,
};
