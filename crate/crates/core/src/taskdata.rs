//! Two-spiral task: data generation, the anchor classifier and risk.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassAnchor, Dataset};
use crate::error::{check_len, Error, Result};
use crate::network::{Activation, NetworkWeights};
use crate::state::EnsembleState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiralConfig {
    /// Total number of samples `D`, split evenly between the classes.
    pub total_samples: usize,
    /// Start radius `ν`.
    pub start_radius: f64,
    /// Half-width of the uniform noise box per coordinate.
    pub noise_amplitude: f64,
    pub seed: u64,
    pub class_anchors: [[f64; 2]; 2],
    pub start_angles: [f64; 2],
}

impl SpiralConfig {
    pub fn new(total_samples: usize, noise_amplitude: f64, seed: u64) -> Self {
        Self {
            total_samples,
            start_radius: 0.25,
            noise_amplitude,
            seed,
            class_anchors: [[1.0, 0.0], [-1.0, 0.0]],
            start_angles: [0.0, PI],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_samples == 0 || !self.total_samples.is_multiple_of(2) {
            return Err(Error::InvalidParameter("samples must be even".into()));
        }
        if !(self.start_radius > 0.0) {
            return Err(Error::InvalidParameter("start radius must be > 0".into()));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(Error::InvalidParameter("noise amplitude must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Two interleaved spirals with labels 1 and 2.
///
/// Class `c` sample `i ∈ 1..=D/2` sits at angle/radius parameter
/// `j = 2π·i/(D/2)`, position `j·ν·(cos(j+φ_c), sin(j+φ_c))`, plus uniform
/// noise in `[−a, a]²`. All class-1 samples come first.
pub fn generate_two_spiral(cfg: &SpiralConfig) -> Result<Dataset> {
    cfg.validate()?;
    let per_class = cfg.total_samples / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = cfg.noise_amplitude;
    let mut points = Vec::with_capacity(2 * cfg.total_samples);
    let mut labels = Vec::with_capacity(cfg.total_samples);
    for (c, phi) in cfg.start_angles.iter().enumerate() {
        for i in 1..=per_class {
            let j = 2.0 * PI / per_class as f64 * i as f64;
            let mut p = [
                j * cfg.start_radius * (j + phi).cos(),
                j * cfg.start_radius * (j + phi).sin(),
            ];
            if a > 0.0 {
                for v in &mut p {
                    *v += rng.gen_range(-a..=a);
                }
            }
            points.extend_from_slice(&p);
            labels.push(c as u32 + 1);
        }
    }
    let classes = cfg
        .class_anchors
        .iter()
        .enumerate()
        .map(|(c, anchor)| ClassAnchor {
            label: c as u32 + 1,
            anchor: anchor.to_vec(),
        })
        .collect();
    Dataset::new(EnsembleState::new(2, points)?, labels, classes)
}

/// Output of the anchor classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Class(u32),
    Reject,
}

impl Decision {
    pub fn label(self) -> Option<u32> {
        match self {
            Decision::Class(l) => Some(l),
            Decision::Reject => None,
        }
    }
}

/// Label of the anchor strictly within `δ` of `x`.
///
/// If several anchors qualify the nearest wins; an exact tie between
/// qualifying anchors, or no qualifying anchor, rejects.
pub fn classify(x: &[f64], classes: &[ClassAnchor], delta: f64) -> Decision {
    let mut best: Option<(f64, u32)> = None;
    let mut tied = false;
    for c in classes {
        let dist = x
            .iter()
            .zip(&c.anchor)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if !(dist < delta) {
            continue;
        }
        match best {
            Some((b, _)) if dist == b => tied = true,
            Some((b, _)) if dist > b => {}
            _ => {
                best = Some((dist, c.label));
                tied = false;
            }
        }
    }
    match best {
        Some((_, l)) if !tied => Decision::Class(l),
        _ => Decision::Reject,
    }
}

/// Fraction of samples whose propagated state is not classified as their label.
pub fn empirical_risk(
    data: &Dataset,
    weights: &NetworkWeights,
    act: Activation,
    delta: f64,
) -> Result<f64> {
    check_len("risk network width", data.dim(), weights.dim())?;
    let mut wrong = 0usize;
    for i in 0..data.len() {
        let (x, label) = data.sample(i);
        let out = weights.propagate(x, act)?;
        if classify(&out, data.classes(), delta) != Decision::Class(label) {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / data.len() as f64)
}

/// Risk computed from already-propagated terminal states.
pub fn risk_from_terminal(data: &Dataset, terminal: &EnsembleState, delta: f64) -> Result<f64> {
    check_len("terminal states", data.inputs().len(), terminal.len())?;
    let wrong = terminal
        .samples()
        .zip(data.labels())
        .filter(|(x, l)| classify(x, data.classes(), delta) != Decision::Class(**l))
        .count();
    Ok(wrong as f64 / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub decision: Decision,
}

/// Classifies a `resolution × resolution` grid over `[lo, hi]²`.
///
/// Points are ordered with `x` as the outer index.
pub fn decision_grid(
    weights: &NetworkWeights,
    act: Activation,
    classes: &[ClassAnchor],
    delta: f64,
    lo: f64,
    hi: f64,
    resolution: usize,
) -> Result<Vec<GridPoint>> {
    if resolution < 2 {
        return Err(Error::InvalidParameter("resolution must be ≥ 2".into()));
    }
    if !(lo < hi) {
        return Err(Error::InvalidParameter("min < max required".into()));
    }
    check_len("decision grid needs a planar network", 2, weights.dim())?;
    let coord = |i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let (x, y) = (coord(i), coord(j));
            let end = weights.propagate(&[x, y], act)?;
            out.push(GridPoint {
                x,
                y,
                decision: classify(&end, classes, delta),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchors() -> Vec<ClassAnchor> {
        vec![
            ClassAnchor { label: 1, anchor: vec![1.0, 0.0] },
            ClassAnchor { label: 2, anchor: vec![-1.0, 0.0] },
        ]
    }

    #[test]
    fn spiral_points_match_formula() {
        let d = generate_two_spiral(&SpiralConfig::new(4, 0.0, 3)).unwrap();
        assert_eq!(d.len(), 4);
        let (p1, l1) = d.sample(0);
        assert_eq!(l1, 1);
        assert!((p1[0] + std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!(p1[1].abs() < 1e-12);
        let (p2, _) = d.sample(1);
        assert!((p2[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(p2[1].abs() < 1e-12);
        assert_eq!(d.labels(), &[1, 1, 2, 2]);
        assert_eq!(d.anchors().sample(3), &[-1.0, 0.0]);
    }

    #[test]
    fn noise_free_classes_are_rotations() {
        let d = generate_two_spiral(&SpiralConfig::new(30, 0.0, 0)).unwrap();
        for i in 0..15 {
            let a = d.sample(i).0;
            let b = d.sample(i + 15).0;
            assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic_and_noise_bounded() {
        let cfg = SpiralConfig::new(50, 0.2, 11);
        let a = generate_two_spiral(&cfg).unwrap();
        assert_eq!(a, generate_two_spiral(&cfg).unwrap());
        let clean = generate_two_spiral(&SpiralConfig::new(50, 0.0, 11)).unwrap();
        for (n, c) in a.inputs().as_slice().iter().zip(clean.inputs().as_slice()) {
            assert!((n - c).abs() <= 0.2 + 1e-12);
        }
        assert_ne!(a, generate_two_spiral(&SpiralConfig::new(50, 0.2, 12)).unwrap());
    }

    #[test]
    fn odd_sample_count_rejected() {
        let err = generate_two_spiral(&SpiralConfig::new(3, 0.0, 0)).unwrap_err();
        assert!(err.to_string().contains("samples must be even"));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[0.9, 0.05], &anchors(), 1.0), Decision::Class(1));
        assert_eq!(classify(&[0.0, 0.0], &anchors(), 1.0), Decision::Reject);
        assert_eq!(classify(&[-1.0, 0.0], &anchors(), 0.5), Decision::Class(2));
        assert_eq!(classify(&[0.0, 0.0], &anchors(), 1.5), Decision::Reject);
        assert_eq!(classify(&[0.1, 0.0], &anchors(), 1.5), Decision::Class(1));
        assert_eq!(classify(&[3.0, 0.0], &anchors(), 1.0), Decision::Reject);
    }

    #[test]
    fn risk_counts_misclassified() {
        let x = EnsembleState::new(2, vec![1.0, 0.0, -1.0, 0.0, 0.9, 0.0, 1.0, 0.1]).unwrap();
        let d = Dataset::new(x, vec![1, 2, 1, 2], anchors()).unwrap();
        let id = NetworkWeights::zeros(2, 0);
        assert_eq!(empirical_risk(&d, &id, Activation::Tanh, 1.0).unwrap(), 0.25);
        assert_eq!(risk_from_terminal(&d, d.inputs(), 1.0).unwrap(), 0.25);
    }

    #[test]
    fn identity_network_does_not_separate_spirals() {
        let d = generate_two_spiral(&SpiralConfig::new(20, 0.0, 0)).unwrap();
        let risk = empirical_risk(&d, &NetworkWeights::zeros(2, 0), Activation::Tanh, 1.0).unwrap();
        assert!(risk > 0.0);
    }

    #[test]
    fn grid_shape_and_bounds() {
        let w = NetworkWeights::zeros(2, 3);
        let g = decision_grid(&w, Activation::Tanh, &anchors(), 1.0, -2.0, 2.0, 2).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!((g[0].x, g[0].y), (-2.0, -2.0));
        assert_eq!((g[3].x, g[3].y), (2.0, 2.0));
        let g = decision_grid(&w, Activation::Tanh, &anchors(), 1.0, -2.0, 2.0, 41).unwrap();
        for p in &g {
            assert_eq!(p.decision, classify(&[p.x, p.y], &anchors(), 1.0));
        }
        assert!(decision_grid(&w, Activation::Tanh, &anchors(), 1.0, -2.0, 2.0, 1).is_err());
        assert!(decision_grid(&w, Activation::Tanh, &anchors(), 1.0, 2.0, -2.0, 5).is_err());
    }
}
