//! A-posteriori turnpike diagnostics and depth certificates.
//!
//! Three depth bounds are computed from a trained trajectory:
//!
//! * `N̂₂(β,ρ) = β / ((1−ρ)·q·ε^{s_x})`, with `(β, ρ)` fitted so that
//!   `ℓ_k ≤ β·ρ^k` along the trajectory;
//! * `N̂₂ = Σ_k ℓ(x_k, u_k; π) / (q·ε^{s_x})` with the training cost;
//! * `N̂∞`, the same sum re-costed under `π = (1, 2, ∞, 2, 1, r)`.
//!
//! The storage function of the dissipation inequality is identically zero
//! for this stage-cost family, so every check works directly on `ℓ`.

use serde::{Deserialize, Serialize};

use crate::cost::{stage_cost, vector_norm, NormOrder, StageCostParams};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::state::EnsembleState;

/// Lower end of the `ρ` search interval.
pub const RHO_MIN: f64 = 1e-6;
/// Gap kept between the `ρ` search interval and 1.
pub const RHO_GAP: f64 = 1e-6;
const GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupation {
    /// `#Q_ε`: layers within `ε` of the anchor.
    pub inside: usize,
    /// `#Q̂_ε`: the remaining layers of `0..N`.
    pub outside: usize,
}

/// Counts layers `k < N` with `‖x_k − x̄‖_p ≤ ε`. The terminal state is not counted.
pub fn epsilon_occupation(
    traj: &Trajectory,
    anchor: &EnsembleState,
    eps: f64,
    p: NormOrder,
) -> Result<Occupation> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {eps}")));
    }
    let distances = layer_distances(traj, anchor, p)?;
    Ok(occupation_from_distances(&distances, eps))
}

/// `‖x_k − x̄‖_p` for `k = 0 … N−1`.
pub fn layer_distances(traj: &Trajectory, anchor: &EnsembleState, p: NormOrder) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .take(traj.depth())
        .map(|x| vector_norm(&x.deviation(anchor)?, p))
        .collect()
}

pub fn occupation_from_distances(distances: &[f64], eps: f64) -> Occupation {
    let inside = distances.iter().filter(|&&dist| dist <= eps).count();
    Occupation {
        inside,
        outside: distances.len() - inside,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationCheck {
    /// `(1−ν)·ℓ_k ≥ 0` for every layer.
    pub dissipative: bool,
    /// `min_k (1−ν)·ℓ_k`; zero for an empty trajectory.
    pub min_slack: f64,
    pub occupation: Occupation,
    /// `#Q̂_ε · q·ε^{s_x}`.
    pub turnpike_lhs: f64,
    /// `Σ_k ℓ_k`.
    pub turnpike_rhs: f64,
    /// `turnpike_lhs ≤ turnpike_rhs`.
    pub turnpike_holds: bool,
}

/// Checks the strict dissipation inequality with zero storage and the
/// counting inequality `#Q̂_ε·q·ε^{s_x} ≤ Σ_k ℓ_k` along `traj`.
///
/// Stage costs are recomputed under `pi`; `Q_ε` uses the state norm of `pi`.
pub fn check_dissipation(
    traj: &Trajectory,
    anchor: &EnsembleState,
    pi: &StageCostParams,
    nu: f64,
    eps: f64,
) -> Result<DissipationCheck> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParameter(format!("nu must be in (0, 1], got {nu}")));
    }
    let costs = recost(traj, anchor, pi)?;
    let slacks: Vec<f64> = costs.iter().map(|l| -nu * l + l).collect();
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    let min_slack = if slacks.is_empty() { 0.0 } else { min_slack };
    let occupation = epsilon_occupation(traj, anchor, eps, pi.p_x)?;
    let turnpike_lhs = occupation.outside as f64 * pi.state_lower_bound(eps);
    let turnpike_rhs: f64 = costs.iter().sum();
    Ok(DissipationCheck {
        dissipative: slacks.iter().all(|s| *s >= 0.0),
        min_slack,
        occupation,
        turnpike_lhs,
        turnpike_rhs,
        turnpike_holds: turnpike_lhs <= turnpike_rhs,
    })
}

/// Stage costs of `traj` re-evaluated under `pi`.
pub fn recost(traj: &Trajectory, anchor: &EnsembleState, pi: &StageCostParams) -> Result<Vec<f64>> {
    pi.validate()?;
    traj.states
        .iter()
        .zip(&traj.controls)
        .map(|(x, u)| stage_cost(x, u, anchor, pi))
        .collect()
}

/// Exponential envelope `ℓ_k ≤ β·ρ^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub beta: f64,
    pub rho: f64,
}

impl Envelope {
    /// `V̂ = β / (1−ρ)`.
    pub fn value_bound(&self) -> f64 {
        self.beta / (1.0 - self.rho)
    }

    pub fn is_feasible(&self, costs: &[f64], tol: f64) -> bool {
        costs
            .iter()
            .enumerate()
            .all(|(k, l)| *l <= self.beta * self.rho.powi(k as i32) + tol)
    }
}

/// Smallest feasible `β` for a fixed `ρ`: `max_k ℓ_k / ρ^k`.
pub fn tight_beta(costs: &[f64], rho: f64) -> f64 {
    let mut beta = 0.0f64;
    for (k, &l) in costs.iter().enumerate() {
        if l > 0.0 {
            let scale = rho.powi(k as i32);
            if scale == 0.0 {
                return f64::INFINITY;
            }
            beta = beta.max(l / scale);
        }
    }
    beta
}

/// `log(β(ρ)/(1−ρ))`, evaluated in log space so that tiny `ρ` cannot overflow.
fn log_objective(costs: &[f64], rho: f64) -> f64 {
    let ln_rho = rho.ln();
    let ln_beta = costs
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > 0.0)
        .map(|(k, l)| l.ln() - k as f64 * ln_rho)
        .fold(f64::NEG_INFINITY, f64::max);
    ln_beta - (-rho).ln_1p()
}

/// Fits `(β, ρ)` minimizing `β/(1−ρ)` subject to `ℓ_k ≤ β·ρ^k`.
///
/// For fixed `ρ` the constraint set is a half-line in `β`, so the problem
/// reduces to the convex scalar function `β(ρ)/(1−ρ)`, which is scanned on a
/// uniform grid over `[RHO_MIN, 1−RHO_GAP]` and refined by golden-section
/// search on the best bracket. `ρ = 0` is also tried, being optimal when only
/// `ℓ_0` is nonzero. An all-zero sequence yields `(0, 0)`.
pub fn estimate_beta_rho(costs: &[f64]) -> Result<Envelope> {
    if costs.is_empty() {
        return Err(Error::InvalidParameter("need at least one stage cost".into()));
    }
    if costs.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidParameter("stage costs must be finite and ≥ 0".into()));
    }
    if costs.iter().all(|l| *l == 0.0) {
        return Ok(Envelope { beta: 0.0, rho: 0.0 });
    }
    if costs[1..].iter().all(|l| *l == 0.0) {
        return Ok(Envelope { beta: costs[0], rho: 0.0 });
    }

    let lo = RHO_MIN;
    let hi = 1.0 - RHO_GAP;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid = |i: usize| lo + step * i as f64;
    let (best_i, _) = (0..GRID_POINTS)
        .map(|i| (i, log_objective(costs, grid(i))))
        .fold((0, f64::INFINITY), |acc, (i, f)| if f < acc.1 { (i, f) } else { acc });
    let a = grid(best_i.saturating_sub(1));
    let b = grid((best_i + 1).min(GRID_POINTS - 1));
    let rho = golden_section(|r| log_objective(costs, r), a, b, 1e-12);
    let rho = if log_objective(costs, rho) <= log_objective(costs, grid(best_i)) {
        rho
    } else {
        grid(best_i)
    };

    let mut env = Envelope {
        beta: tight_beta(costs, rho),
        rho,
    };
    // Rounding in ρ^k may leave a constraint violated by an ulp.
    while !env.is_feasible(costs, 0.0) {
        env.beta *= 1.0 + 4.0 * f64::EPSILON;
    }
    Ok(env)
}

/// Minimizes a unimodal function on `[a, b]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// `β / ((1−ρ)·q·ε^{s_x})`.
pub fn depth_bound_formula(beta: f64, rho: f64, q: f64, eps: f64, s_x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    if !(beta >= 0.0) || !(q > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need beta ≥ 0, q > 0, epsilon > 0 (got {beta}, {q}, {eps})"
        )));
    }
    Ok(beta / ((1.0 - rho) * q * eps.powf(s_x)))
}

/// `Σ_k ℓ(x_k, u_k; π) / (q·ε^{s_x})` with the trajectory re-costed under `pi`.
pub fn depth_bound_from_cost(
    traj: &Trajectory,
    anchor: &EnsembleState,
    pi: &StageCostParams,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {eps}")));
    }
    let total: f64 = recost(traj, anchor, pi)?.iter().sum();
    Ok(total / pi.state_lower_bound(eps))
}

/// Diagnostics of one trajectory under one evaluation cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnpikeReport {
    pub epsilon: f64,
    pub q_eps_count: usize,
    pub q_eps_complement: usize,
    /// Fitted from the training stage costs.
    pub beta: f64,
    pub rho: f64,
    pub v_hat: f64,
    /// `N̂(ε)` from the fitted envelope and the training `q`, `s_x`.
    pub n_hat_formula: f64,
    /// `N̂(ε; π)` re-costed under `eval_pi`.
    pub n_hat_cost: f64,
    pub eval_pi: StageCostParams,
}

/// Builds one report per evaluation cost.
///
/// The envelope `(β, ρ)` is fitted once on the stage costs under `training_pi`;
/// the cost-based bound and the `Q_ε` counts use each `eval_pi`.
pub fn analyze(
    traj: &Trajectory,
    anchor: &EnsembleState,
    training_pi: &StageCostParams,
    eval_pis: &[StageCostParams],
    eps: f64,
) -> Result<Vec<TurnpikeReport>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {eps}")));
    }
    let training_costs = recost(traj, anchor, training_pi)?;
    let env = if training_costs.is_empty() {
        Envelope { beta: 0.0, rho: 0.0 }
    } else {
        estimate_beta_rho(&training_costs)?
    };
    let n_hat_formula = depth_bound_formula(env.beta, env.rho, training_pi.q, eps, training_pi.s_x)?;
    eval_pis
        .iter()
        .map(|pi| {
            let occ = epsilon_occupation(traj, anchor, eps, pi.p_x)?;
            Ok(TurnpikeReport {
                epsilon: eps,
                q_eps_count: occ.inside,
                q_eps_complement: occ.outside,
                beta: env.beta,
                rho: env.rho,
                v_hat: env.value_bound(),
                n_hat_formula,
                n_hat_cost: depth_bound_from_cost(traj, anchor, pi, eps)?,
                eval_pi: *pi,
            })
        })
        .collect()
}

/// The three bounds reported per trained network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthBounds {
    pub beta: f64,
    pub rho: f64,
    /// `N̂₂(β,ρ)`.
    pub n2_beta_rho: f64,
    /// `N̂₂`.
    pub n2: f64,
    /// `N̂∞`.
    pub n_inf: f64,
}

/// `N̂₂(β,ρ)`, `N̂₂` (training cost) and `N̂∞` (`(1, 2, ∞, 2, 1, r)`).
pub fn depth_bounds(
    traj: &Trajectory,
    anchor: &EnsembleState,
    training_pi: &StageCostParams,
    eps: f64,
) -> Result<(DepthBounds, Vec<TurnpikeReport>)> {
    let eval = [*training_pi, StageCostParams::infinity_state(training_pi.r)];
    let reports = analyze(traj, anchor, training_pi, &eval, eps)?;
    let bounds = DepthBounds {
        beta: reports[0].beta,
        rho: reports[0].rho,
        n2_beta_rho: reports[0].n_hat_formula,
        n2: reports[0].n_hat_cost,
        n_inf: reports[1].n_hat_cost,
    };
    Ok((bounds, reports))
}
