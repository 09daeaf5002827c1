//! Norms, the parametrized stage cost and the squared-distance terminal loss.
//!
//! The stage cost is
//!
//! ```text
//! l(x, u; π) = q·‖x − x̄‖_{p_x}^{s_x} + r·‖u‖_{p_u}^{s_u}
//! ```
//!
//! with `π = (s_x, s_u, p_x, p_u, q, r)`. The `(q, p_x, s_x)` triple always
//! belongs to the state deviation and `(r, p_u, s_u)` to the input.
//! Nothing here is normalized by the sample count.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_len, Error, Result};
use crate::state::EnsembleState;

/// Order of a vector norm; `p = ∞` is a first-class value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    pub const TWO: NormOrder = NormOrder::Finite(2.0);

    pub fn finite(p: f64) -> Result<Self> {
        if p.is_finite() && p > 1.0 {
            Ok(NormOrder::Finite(p))
        } else if p == f64::INFINITY {
            Ok(NormOrder::Infinity)
        } else {
            Err(Error::InvalidParameter(format!(
                "norm order must be > 1 or ∞, got {p}"
            )))
        }
    }

    pub fn is_valid(self) -> bool {
        match self {
            NormOrder::Finite(p) => p.is_finite() && p > 1.0,
            NormOrder::Infinity => true,
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Finite(p) => write!(f, "{p}"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormOrder::Finite(p) => s.serialize_f64(*p),
            NormOrder::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        let order = match Repr::deserialize(d)? {
            Repr::Num(p) => NormOrder::finite(p),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "∞") => {
                Ok(NormOrder::Infinity)
            }
            Repr::Text(t) => Err(Error::InvalidParameter(format!("unknown norm order {t:?}"))),
        };
        order.map_err(serde::de::Error::custom)
    }
}

/// `‖v‖_p`; the max absolute entry for `p = ∞`.
pub fn vector_norm(v: &[f64], p: NormOrder) -> Result<f64> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector_norm input"));
    }
    match p {
        NormOrder::Infinity => Ok(v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))),
        NormOrder::Finite(p) if !(p > 1.0) => Err(Error::InvalidParameter(format!(
            "norm order must be > 1 or ∞, got {p}"
        ))),
        NormOrder::Finite(2.0) => Ok(v.iter().map(|x| x * x).sum::<f64>().sqrt()),
        NormOrder::Finite(p) => Ok(v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)),
    }
}

/// `‖v‖_p^s`, computed without taking the root when `s == p`.
pub(crate) fn powered_norm(v: &[f64], p: NormOrder, s: f64) -> Result<f64> {
    match p {
        NormOrder::Finite(pv) if pv == s => {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("vector_norm input"));
            }
            if pv == 2.0 {
                Ok(v.iter().map(|x| x * x).sum())
            } else {
                Ok(v.iter().map(|x| x.abs().powf(pv)).sum())
            }
        }
        _ => Ok(vector_norm(v, p)?.powf(s)),
    }
}

/// Adds `scale · ∇_v ‖v‖_p^s` into `out`. Requires finite `p > 1` and `s > 1`.
pub(crate) fn add_powered_norm_grad(v: &[f64], p: f64, s: f64, scale: f64, out: &mut [f64]) {
    debug_assert_eq!(v.len(), out.len());
    if p == 2.0 && s == 2.0 {
        for (o, x) in out.iter_mut().zip(v) {
            *o += scale * 2.0 * x;
        }
        return;
    }
    let sum: f64 = v.iter().map(|x| x.abs().powf(p)).sum();
    if sum == 0.0 {
        return;
    }
    // d/dv_i (Σ|v|^p)^{s/p} = s · (Σ|v|^p)^{s/p − 1} · |v_i|^{p−1} · sign(v_i)
    let outer = s * sum.powf(s / p - 1.0);
    for (o, x) in out.iter_mut().zip(v) {
        if *x != 0.0 {
            *o += scale * outer * x.abs().powf(p - 1.0) * x.signum();
        }
    }
}

/// The tuple `π = (s_x, s_u, p_x, p_u, q, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCostParams {
    pub s_x: f64,
    pub s_u: f64,
    pub p_x: NormOrder,
    pub p_u: NormOrder,
    pub q: f64,
    pub r: f64,
}

impl StageCostParams {
    pub fn new(s_x: f64, s_u: f64, p_x: NormOrder, p_u: NormOrder, q: f64, r: f64) -> Result<Self> {
        let pi = Self {
            s_x,
            s_u,
            p_x,
            p_u,
            q,
            r,
        };
        pi.validate()?;
        Ok(pi)
    }

    /// Squared two-norms on both terms with the given weights.
    pub fn quadratic(q: f64, r: f64) -> Self {
        Self {
            s_x: 2.0,
            s_u: 2.0,
            p_x: NormOrder::TWO,
            p_u: NormOrder::TWO,
            q,
            r,
        }
    }

    /// `(2, 2, 2, 2, 10⁻², 10⁻³)`, the two-spiral training cost.
    pub fn two_spiral_training() -> Self {
        Self::quadratic(1e-2, 1e-3)
    }

    /// `(1, 2, ∞, 2, 1, r)`: unit-weight ∞-norm state penalty used for the
    /// sample-count-insensitive depth bound.
    pub fn infinity_state(r: f64) -> Self {
        Self {
            s_x: 1.0,
            s_u: 2.0,
            p_x: NormOrder::Infinity,
            p_u: NormOrder::TWO,
            q: 1.0,
            r,
        }
    }

    /// Checks the parameters are usable for cost evaluation.
    ///
    /// Exponents of exactly 1 are accepted so the ∞-norm evaluation cost
    /// `(1, 2, ∞, 2, 1, r)` can be expressed; see [`Self::is_smooth`] for the
    /// stricter condition needed by gradients.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("q", self.q)?;
        positive("r", self.r)?;
        for (name, s) in [("s_x", self.s_x), ("s_u", self.s_u)] {
            if !(s.is_finite() && s >= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must be ≥ 1, got {s}")));
            }
        }
        for (name, p) in [("p_x", self.p_x), ("p_u", self.p_u)] {
            if !p.is_valid() {
                return Err(Error::InvalidParameter(format!("{name} must be > 1 or ∞, got {p}")));
            }
        }
        Ok(())
    }

    /// Strict admissibility: `q, r > 0`, `s > 1` and `p > 1` (or ∞).
    pub fn is_admissible(&self) -> bool {
        self.validate().is_ok() && self.s_x > 1.0 && self.s_u > 1.0
    }

    /// Differentiable everywhere: admissible with finite norm orders.
    pub fn is_smooth(&self) -> bool {
        self.is_admissible()
            && matches!(self.p_x, NormOrder::Finite(_))
            && matches!(self.p_u, NormOrder::Finite(_))
    }

    /// `α_ℓ(ε) = q·ε^{s_x}`.
    pub fn state_lower_bound(&self, eps: f64) -> f64 {
        self.q * eps.powf(self.s_x)
    }
}

impl fmt::Display for StageCostParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {}, {}, {})",
            self.s_x, self.s_u, self.p_x, self.p_u, self.q, self.r
        )
    }
}

/// `q·‖x − x̄‖_{p_x}^{s_x} + r·‖u‖_{p_u}^{s_u}` over the whole ensemble.
pub fn stage_cost(
    x: &EnsembleState,
    u: &[f64],
    anchor: &EnsembleState,
    pi: &StageCostParams,
) -> Result<f64> {
    let dev = x.deviation(anchor)?;
    stage_cost_from_deviation(&dev, u, pi)
}

pub(crate) fn stage_cost_from_deviation(dev: &[f64], u: &[f64], pi: &StageCostParams) -> Result<f64> {
    let state = powered_norm(dev, pi.p_x, pi.s_x)?;
    let input = powered_norm(u, pi.p_u, pi.s_u)?;
    Ok(pi.q * state + pi.r * input)
}

/// Mean squared distance of each terminal sample state to its anchor.
pub fn terminal_loss(x_final: &EnsembleState, anchor: &EnsembleState, samples: usize) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidParameter("terminal loss needs D ≥ 1".into()));
    }
    check_len("terminal loss", x_final.len(), anchor.len())?;
    check_len("terminal loss sample count", x_final.num_samples(), samples)?;
    let total: f64 = x_final
        .as_slice()
        .iter()
        .zip(anchor.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(total / samples as f64)
}
