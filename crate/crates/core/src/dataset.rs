use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::state::EnsembleState;

/// A class label together with its target state in the last layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAnchor {
    pub label: u32,
    pub anchor: Vec<f64>,
}

/// Labelled samples and the per-sample anchors `x̄^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: EnsembleState,
    labels: Vec<u32>,
    classes: Vec<ClassAnchor>,
    anchors: EnsembleState,
}

impl Dataset {
    /// Builds a dataset; every label must appear in `classes`.
    pub fn new(inputs: EnsembleState, labels: Vec<u32>, classes: Vec<ClassAnchor>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidParameter("dataset needs at least one sample".into()));
        }
        if inputs.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset inputs"));
        }
        check_len("dataset labels", inputs.num_samples(), labels.len())?;
        for c in &classes {
            check_len("class anchor", inputs.dim(), c.anchor.len())?;
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::InvalidParameter(format!("duplicate class label {}", c.label)));
            }
        }
        let mut anchor_data = Vec::with_capacity(inputs.len());
        for &l in &labels {
            let class = classes
                .iter()
                .find(|c| c.label == l)
                .ok_or_else(|| Error::InvalidParameter(format!("label {l} has no anchor")))?;
            anchor_data.extend_from_slice(&class.anchor);
        }
        let anchors = EnsembleState::new(inputs.dim(), anchor_data)?;
        Ok(Self {
            inputs,
            labels,
            classes,
            anchors,
        })
    }

    pub fn dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The ensemble initial condition `x_0`.
    pub fn inputs(&self) -> &EnsembleState {
        &self.inputs
    }

    /// The stacked anchors `x̄`.
    pub fn anchors(&self) -> &EnsembleState {
        &self.anchors
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn classes(&self) -> &[ClassAnchor] {
        &self.classes
    }

    pub fn sample(&self, i: usize) -> (&[f64], u32) {
        (self.inputs.sample(i), self.labels[i])
    }
}
