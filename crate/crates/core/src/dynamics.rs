//! Forward propagation of samples and of the stacked ensemble.

use serde::{Deserialize, Serialize};

use crate::cost::{stage_cost, terminal_loss, StageCostParams};
use crate::error::{check_len, Result};
use crate::network::{Activation, Layer, NetworkWeights};
use crate::state::EnsembleState;

/// States, controls and costs of one ensemble rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `x_0 … x_N`.
    pub states: Vec<EnsembleState>,
    /// `u_0 … u_{N−1}`, each `(vect(A_k), b_k)`.
    pub controls: Vec<Vec<f64>>,
    /// `ℓ(x_k, u_k)` for `k = 0 … N−1`.
    pub stage_costs: Vec<f64>,
    pub terminal_loss: f64,
}

impl Trajectory {
    pub fn depth(&self) -> usize {
        self.controls.len()
    }

    pub fn final_state(&self) -> &EnsembleState {
        self.states.last().expect("trajectory holds at least x_0")
    }

    pub fn total_stage_cost(&self) -> f64 {
        self.stage_costs.iter().sum()
    }
}

/// `x + σ(A x + b)` for a single sample.
pub fn forward_layer(x: &[f64], a: &[f64], b: &[f64], act: Activation) -> Result<Vec<f64>> {
    let d = x.len();
    check_len("layer matrix", d * d, a.len())?;
    check_len("layer bias", d, b.len())?;
    let layer = Layer {
        a: a.to_vec(),
        b: b.to_vec(),
    };
    let mut out = vec![0.0; d];
    layer.affine_into(x, &mut out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi + act.apply(*o);
    }
    Ok(out)
}

/// Applies one layer with shared weights to every sample block.
pub fn ensemble_step(x: &EnsembleState, u: &[f64], act: Activation) -> Result<EnsembleState> {
    let layer = Layer::from_control(x.dim(), u)?;
    Ok(step_with_layer(x, &layer, act))
}

pub(crate) fn step_with_layer(x: &EnsembleState, layer: &Layer, act: Activation) -> EnsembleState {
    let d = x.dim();
    let mut next = x.clone();
    let mut z = vec![0.0; d];
    for i in 0..x.num_samples() {
        layer.affine_into(x.sample(i), &mut z);
        for (s, zi) in next.sample_mut(i).iter_mut().zip(&z) {
            *s += act.apply(*zi);
        }
    }
    next
}

/// Propagates `x0` through all layers, recording states and costs.
pub fn rollout(
    x0: &EnsembleState,
    weights: &NetworkWeights,
    act: Activation,
    anchor: &EnsembleState,
    pi: &StageCostParams,
) -> Result<Trajectory> {
    check_len("rollout width", weights.dim(), x0.dim())?;
    check_len("rollout anchor", x0.len(), anchor.len())?;
    let n = weights.depth();
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    let mut stage_costs = Vec::with_capacity(n);
    states.push(x0.clone());
    for layer in weights.layers() {
        let x = states.last().expect("non-empty");
        let u = layer.to_control();
        stage_costs.push(stage_cost(x, &u, anchor, pi)?);
        let next = step_with_layer(x, layer, act);
        controls.push(u);
        states.push(next);
    }
    let terminal_loss = terminal_loss(states.last().expect("non-empty"), anchor, x0.num_samples())?;
    Ok(Trajectory {
        states,
        controls,
        stage_costs,
        terminal_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ONE_PLUS_TANH_HALF: f64 = 1.462_117_157_260_009_8;

    #[test]
    fn forward_layer_examples() {
        let x = [0.4, -1.3];
        assert_eq!(forward_layer(&x, &[0.0; 4], &[0.0; 2], Activation::Tanh).unwrap(), x);
        let a = [0.7, -2.0, 1.5, 0.1];
        assert_eq!(
            forward_layer(&[0.0, 0.0], &a, &[0.0; 2], Activation::Tanh).unwrap(),
            vec![0.0, 0.0]
        );
        let y = forward_layer(&[1.0], &[0.0], &[0.5], Activation::Tanh).unwrap();
        assert!((y[0] - (1.0 + 0.5f64.tanh())).abs() < 1e-15);
        assert!((y[0] - ONE_PLUS_TANH_HALF).abs() < 1e-15);
        assert!(forward_layer(&[1.0, 2.0], &[0.0], &[0.5], Activation::Tanh).is_err());
    }

    #[test]
    fn ensemble_step_examples() {
        let x = EnsembleState::new(1, vec![1.0, 2.0]).unwrap();
        assert_eq!(ensemble_step(&x, &[0.0, 0.0], Activation::Tanh).unwrap(), x);
        let y = ensemble_step(&x, &[0.0, 0.5], Activation::Tanh).unwrap();
        assert!((y.sample(0)[0] - (1.0 + 0.5f64.tanh())).abs() < 1e-15);
        assert!((y.sample(1)[0] - (2.0 + 0.5f64.tanh())).abs() < 1e-15);

        let same = EnsembleState::new(2, vec![0.3, -0.7, 0.3, -0.7]).unwrap();
        let y = ensemble_step(&same, &[0.2, -0.1, 0.4, 0.9, -0.3, 0.05], Activation::Tanh).unwrap();
        assert_eq!(y.sample(0), y.sample(1));
        assert!(ensemble_step(&x, &[0.0, 0.0, 0.0], Activation::Tanh).is_err());
    }

    #[test]
    fn rollout_examples() {
        let pi = StageCostParams::quadratic(1.0, 1.0);
        let x0 = EnsembleState::new(1, vec![1.0]).unwrap();
        let bar = EnsembleState::new(1, vec![0.0]).unwrap();

        let empty = rollout(&x0, &NetworkWeights::zeros(1, 0), Activation::Tanh, &bar, &pi).unwrap();
        assert_eq!(empty.states, vec![x0.clone()]);
        assert!(empty.controls.is_empty());
        assert_eq!(empty.terminal_loss, 1.0);

        let zero = rollout(&x0, &NetworkWeights::zeros(1, 4), Activation::Tanh, &bar, &pi).unwrap();
        assert!(zero.states.iter().all(|s| *s == x0));
        assert_eq!(zero.stage_costs, vec![1.0; 4]);

        let w = NetworkWeights::from_controls(1, &[vec![0.0, 0.5], vec![0.0, 0.5]]).unwrap();
        let t = rollout(&x0, &w, Activation::Tanh, &bar, &pi).unwrap();
        let h = 0.5f64.tanh();
        assert_eq!(t.states[0].as_slice(), &[1.0]);
        assert!((t.states[1].as_slice()[0] - (1.0 + h)).abs() < 1e-15);
        assert!((t.states[2].as_slice()[0] - (1.0 + 2.0 * h)).abs() < 1e-15);
        assert!((t.states[2].as_slice()[0] - 1.924_234_314_520_019_6).abs() < 1e-12);
        assert_eq!(t.controls[1], vec![0.0, 0.5]);
    }

    fn arb_case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
        (1usize..4, 1usize..4, 1usize..5).prop_flat_map(|(d, samples, depth)| {
            (
                Just(d),
                proptest::collection::vec(-2f64..2.0, d * samples),
                proptest::collection::vec(-1.5f64..1.5, depth * (d * d + d)),
            )
        })
    }

    proptest! {
        #[test]
        fn zero_control_is_equilibrium(v in proptest::collection::vec(-1e3f64..1e3, 1..30)) {
            let x = EnsembleState::new(1, v).unwrap();
            prop_assert_eq!(ensemble_step(&x, &[0.0, 0.0], Activation::Tanh).unwrap(), x);
        }

        #[test]
        fn rollout_restep_reproduces_states((d, x, w) in arb_case()) {
            let depth = w.len() / (d * d + d);
            let x0 = EnsembleState::new(d, x).unwrap();
            let bar = EnsembleState::zeros(d, x0.num_samples());
            let weights = NetworkWeights::from_flat(d, depth, &w).unwrap();
            let t = rollout(&x0, &weights, Activation::Tanh, &bar, &StageCostParams::quadratic(1e-2, 1e-3)).unwrap();
            for k in 0..depth {
                let again = ensemble_step(&t.states[k], &t.controls[k], Activation::Tanh).unwrap();
                prop_assert_eq!(&again, &t.states[k + 1]);
                prop_assert!(t.stage_costs[k] >= 0.0);
            }
        }

        #[test]
        fn sample_permutation_commutes_with_rollout((d, x, w) in arb_case(), shift in 0usize..4) {
            let depth = w.len() / (d * d + d);
            let x0 = EnsembleState::new(d, x.clone()).unwrap();
            let samples = x0.num_samples();
            let k = shift % samples;
            let mut rotated = x;
            rotated.rotate_left(k * d);
            let x0r = EnsembleState::new(d, rotated).unwrap();
            let bar = EnsembleState::zeros(d, samples);
            let weights = NetworkWeights::from_flat(d, depth, &w).unwrap();
            let pi = StageCostParams::quadratic(1.0, 1.0);
            let t = rollout(&x0, &weights, Activation::Tanh, &bar, &pi).unwrap();
            let tr = rollout(&x0r, &weights, Activation::Tanh, &bar, &pi).unwrap();
            let mut expect = t.final_state().as_slice().to_vec();
            expect.rotate_left(k * d);
            prop_assert_eq!(expect.as_slice(), tr.final_state().as_slice());
        }
    }
}
