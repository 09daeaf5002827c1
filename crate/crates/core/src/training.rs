//! Training as a discrete-time optimal control problem.
//!
//! The weights `u_k = (vect(A_k), b_k)` are the controls and the objective is
//!
//! ```text
//! V = Σ_{k<N} ℓ(x_k, u_k) + γ·ℓ_f(x_N)
//! ```
//!
//! minimized by direct single shooting. Gradients come from a reverse sweep
//! over the stored forward trajectory (the costate recursion).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{add_powered_norm_grad, stage_cost_from_deviation, NormOrder, StageCostParams};
use crate::dataset::Dataset;
use crate::dynamics::{rollout, Trajectory};
use crate::error::{check_len, Error, Result};
use crate::network::{Activation, NetworkWeights};
use crate::state::EnsembleState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    GradientDescent,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub depth: usize,
    pub cost: StageCostParams,
    /// Weight `γ` on the terminal loss.
    pub gamma: f64,
    pub activation: Activation,
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Step size in the (rescaled) optimization variables.
    pub learning_rate: f64,
    /// The step size decays geometrically to `learning_rate · final_lr_fraction`
    /// at `max_iters`.
    pub final_lr_fraction: f64,
    /// Weights start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Stop once `‖∇_u V‖_∞` drops to this value.
    pub tol_grad: f64,
    /// The optimizer works on `θ = input_rescale · u`.
    pub input_rescale: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Two-spiral defaults: `q = 10⁻²`, `r = 10⁻³`, `γ = 10²·D`, tanh.
    pub fn two_spiral(depth: usize, samples: usize) -> Self {
        Self {
            depth,
            cost: StageCostParams::two_spiral_training(),
            gamma: 1e2 * samples as f64,
            activation: Activation::Tanh,
            max_iters: 50_000,
            step_rule: StepRule::Adam,
            learning_rate: 1.0,
            final_lr_fraction: 1e-2,
            init_scale: 0.1,
            tol_grad: 1e-6,
            input_rescale: 1e2,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.depth == 0 {
            return bad("depth must be ≥ 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be ≥ 0, got {}", self.gamma));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("final_lr_fraction", self.final_lr_fraction),
            ("tol_grad", self.tol_grad),
            ("input_rescale", self.input_rescale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be ≥ 0, got {}", self.init_scale));
        }
        self.cost.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub weights: NetworkWeights,
    pub trajectory: Trajectory,
    /// `V_N^γ` at the returned weights.
    pub objective: f64,
    /// Objective at every iterate visited.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `Σ_k ℓ_k + γ·ℓ_f` of a stored trajectory.
pub fn objective(traj: &Trajectory, gamma: f64) -> f64 {
    traj.total_stage_cost() + gamma * traj.terminal_loss
}

/// Objective value and its gradient with respect to every `u_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueAndGradient {
    pub objective: f64,
    /// One control-shaped gradient per layer.
    pub per_layer: Vec<Vec<f64>>,
}

impl ValueAndGradient {
    pub fn flat(&self) -> Vec<f64> {
        self.per_layer.concat()
    }

    pub fn max_abs(&self) -> f64 {
        self.per_layer
            .iter()
            .flatten()
            .fold(0.0, |m: f64, g| m.max(g.abs()))
    }
}

/// Gradient of the training objective with respect to all `(A_k, b_k)`.
pub fn gradient(
    x0: &EnsembleState,
    anchor: &EnsembleState,
    weights: &NetworkWeights,
    cfg: &TrainConfig,
) -> Result<ValueAndGradient> {
    value_and_gradient(x0, anchor, weights, &cfg.cost, cfg.gamma, cfg.activation)
}

/// Forward sweep storing states and activations, then the costate sweep
///
/// ```text
/// λ_N = γ ∂ℓ_f/∂x_N
/// λ_k = λ_{k+1} + (I^D ⊗ A_k)ᵀ (σ'(z_k) ⊙ λ_{k+1}) + ∂ℓ/∂x_k
/// ```
pub fn value_and_gradient(
    x0: &EnsembleState,
    anchor: &EnsembleState,
    weights: &NetworkWeights,
    pi: &StageCostParams,
    gamma: f64,
    act: Activation,
) -> Result<ValueAndGradient> {
    let (p_x, p_u) = match (pi.p_x, pi.p_u) {
        (NormOrder::Finite(px), NormOrder::Finite(pu)) if pi.is_smooth() => (px, pu),
        _ => return Err(Error::GradientUndefined),
    };
    let d = weights.dim();
    check_len("gradient width", d, x0.dim())?;
    check_len("gradient anchor", x0.len(), anchor.len())?;
    let samples = x0.num_samples();
    let n = weights.depth();
    let len = x0.len();

    // forward
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut value = 0.0;
    states.push(x0.as_slice().to_vec());
    let mut z = vec![0.0; d];
    for layer in weights.layers() {
        let x = states.last().expect("non-empty");
        let dev: Vec<f64> = x.iter().zip(anchor.as_slice()).map(|(a, b)| a - b).collect();
        value += stage_cost_from_deviation(&dev, &layer.to_control(), pi)?;
        let mut next = x.clone();
        let mut act_k = vec![0.0; len];
        for i in 0..samples {
            let block = i * d..(i + 1) * d;
            layer.affine_into(&x[block.clone()], &mut z);
            for ((s, a), zi) in next[block.clone()].iter_mut().zip(&mut act_k[block]).zip(&z) {
                *a = act.apply(*zi);
                *s += *a;
            }
        }
        states.push(next);
        activations.push(act_k);
    }
    let x_n = states.last().expect("non-empty");
    let mut terminal = 0.0;
    let mut costate: Vec<f64> = x_n
        .iter()
        .zip(anchor.as_slice())
        .map(|(a, b)| {
            let e = a - b;
            terminal += e * e;
            gamma * 2.0 * e / samples as f64
        })
        .collect();
    value += gamma * terminal / samples as f64;

    // backward
    let mut per_layer = vec![Vec::new(); n];
    let mut gz = vec![0.0; d];
    for k in (0..n).rev() {
        let layer = weights.layer(k);
        let x = &states[k];
        let mut g = vec![0.0; d * d + d];
        add_powered_norm_grad(&layer.to_control(), p_u, pi.s_u, pi.r, &mut g);
        let (g_a, g_b) = g.split_at_mut(d * d);
        let mut prev = costate.clone();
        for i in 0..samples {
            let block = i * d..(i + 1) * d;
            let xi = &x[block.clone()];
            let lam = &costate[block.clone()];
            for ((gzr, a), l) in gz.iter_mut().zip(&activations[k][block.clone()]).zip(lam) {
                *gzr = act.derivative_from_value(*a) * l;
            }
            for (col, &xc) in xi.iter().enumerate() {
                let column = &layer.a[col * d..(col + 1) * d];
                let mut back = 0.0;
                for row in 0..d {
                    g_a[col * d + row] += gz[row] * xc;
                    back += column[row] * gz[row];
                }
                prev[i * d + col] += back;
            }
            for (gb, v) in g_b.iter_mut().zip(&gz) {
                *gb += v;
            }
        }
        let dev: Vec<f64> = x.iter().zip(anchor.as_slice()).map(|(a, b)| a - b).collect();
        add_powered_norm_grad(&dev, p_x, pi.s_x, pi.q, &mut prev);
        per_layer[k] = g;
        costate = prev;
    }
    Ok(ValueAndGradient {
        objective: value,
        per_layer,
    })
}

/// Uniform weights in `[-scale, scale]` from a seeded stream.
pub fn initial_weights(dim: usize, depth: usize, scale: f64, seed: u64) -> NetworkWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = (0..depth * (dim * dim + dim))
        .map(|_| if scale > 0.0 { rng.gen_range(-scale..=scale) } else { 0.0 })
        .collect();
    NetworkWeights::from_flat(dim, depth, &flat).expect("shape is consistent")
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((th, g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *th -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Minimizes the training objective from a seeded random start.
///
/// Returns the best iterate visited, so the returned objective never
/// exceeds the objective at the initial weights.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    if !cfg.cost.is_smooth() {
        return Err(Error::GradientUndefined);
    }
    let start = initial_weights(data.dim(), cfg.depth, cfg.init_scale, cfg.seed);
    train_from(data, cfg, start)
}

/// Same as [`train`] but starting from the given weights.
pub fn train_from(data: &Dataset, cfg: &TrainConfig, start: NetworkWeights) -> Result<TrainResult> {
    cfg.validate()?;
    check_len("initial weights width", data.dim(), start.dim())?;
    let (dim, depth) = (start.dim(), start.depth());
    let scale = cfg.input_rescale;
    let x0 = data.inputs();
    let anchor = data.anchors();

    let mut theta: Vec<f64> = start.to_flat().iter().map(|u| u * scale).collect();
    let mut adam = AdamState::new(theta.len());
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut g_theta = vec![0.0; theta.len()];
    let decay = cfg.final_lr_fraction.powf(1.0 / cfg.max_iters.max(1) as f64);
    let mut lr = cfg.learning_rate;

    for it in 0..=cfg.max_iters {
        let u: Vec<f64> = theta.iter().map(|t| t / scale).collect();
        let w = NetworkWeights::from_flat(dim, depth, &u)
            .map_err(|_| Error::NumericalFailure { iteration: it })?;
        let vg = value_and_gradient(x0, anchor, &w, &cfg.cost, cfg.gamma, cfg.activation)?;
        if !vg.objective.is_finite() {
            return Err(Error::NumericalFailure { iteration: it });
        }
        history.push(vg.objective);
        iterations = it;
        if best.as_ref().is_none_or(|(b, _)| vg.objective < *b) {
            best = Some((vg.objective, theta.clone()));
        }
        if vg.max_abs() <= cfg.tol_grad {
            converged = true;
            best = Some((vg.objective, theta.clone()));
            break;
        }
        if it == cfg.max_iters {
            break;
        }
        for (gt, g) in g_theta.iter_mut().zip(vg.per_layer.iter().flatten()) {
            *gt = g / scale;
        }
        match cfg.step_rule {
            StepRule::GradientDescent => {
                for (th, g) in theta.iter_mut().zip(&g_theta) {
                    *th -= lr * g;
                }
            }
            StepRule::Adam => adam.step(&mut theta, &g_theta, lr),
        }
        lr *= decay;
    }

    let (_, theta) = best.expect("at least one iterate");
    let u: Vec<f64> = theta.iter().map(|t| t / scale).collect();
    let weights = NetworkWeights::from_flat(dim, depth, &u)?;
    let trajectory = rollout(x0, &weights, cfg.activation, anchor, &cfg.cost)?;
    Ok(TrainResult {
        objective: objective(&trajectory, cfg.gamma),
        weights,
        trajectory,
        history,
        iterations,
        converged,
    })
}
