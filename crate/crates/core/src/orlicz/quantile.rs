use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bisection tolerance on `beta` when inverting the partial integral.
pub const INVERSE_TOL: f64 = 1e-12;

/// A nonincreasing nonnegative function `X*` on `[0, 1]` with finite integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuantileFunction {
    Constant { value: f64 },
    /// `levels[j]` on `[breaks[j], breaks[j + 1])`, with `breaks` running from 0 to 1.
    Step { breaks: Vec<f64>, levels: Vec<f64> },
    /// `1 - t`, the uniform law on `[0, 1]`.
    Uniform,
    /// `ln(1 / t)`, the standard exponential law.
    Exponential,
}

impl QuantileFunction {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::invalid(format!("constant quantile must be finite and >= 0, got {value}")));
        }
        Ok(QuantileFunction::Constant { value })
    }

    pub fn step(breaks: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || breaks.len() != levels.len() + 1 {
            return Err(Error::invalid("step quantile needs one more break than levels"));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::invalid("step quantile breaks must run from 0 to 1"));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("step quantile breaks must be strictly increasing"));
        }
        if levels.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid("step quantile levels must be finite and >= 0"));
        }
        if levels.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("step quantile levels must be nonincreasing"));
        }
        Ok(QuantileFunction::Step { breaks, levels })
    }

    /// Quantile of a finite law given as `(value, probability)` pairs.
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.iter().filter(|a| a.1 > 0.0).copied().collect();
        if atoms.iter().any(|a| !(a.0.is_finite() && a.1.is_finite())) {
            return Err(Error::invalid("atoms must be finite"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("atom probabilities sum to {total}, not 1")));
        }
        atoms.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
        let mut breaks = vec![0.0];
        let mut levels = Vec::new();
        let mut acc = 0.0;
        for (v, p) in atoms {
            acc += p;
            breaks.push(acc);
            levels.push(v.abs());
        }
        *breaks.last_mut().unwrap() = 1.0;
        QuantileFunction::step(breaks, levels)
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            QuantileFunction::Constant { value } => *value,
            QuantileFunction::Step { breaks, levels } => {
                let j = breaks.partition_point(|&b| b <= t).saturating_sub(1);
                levels[j.min(levels.len() - 1)]
            }
            QuantileFunction::Uniform => (1.0 - t).clamp(0.0, 1.0),
            QuantileFunction::Exponential => -t.ln(),
        }
    }

    /// `u(beta) = int_0^beta X*`, with `X* = 0` past 1.
    pub fn partial_integral(&self, beta: f64) -> f64 {
        let b = beta.clamp(0.0, 1.0);
        match self {
            QuantileFunction::Constant { value } => value * b,
            QuantileFunction::Step { breaks, levels } => breaks
                .windows(2)
                .zip(levels)
                .map(|(w, l)| l * (b.min(w[1]) - w[0]).max(0.0))
                .sum(),
            QuantileFunction::Uniform => b - 0.5 * b * b,
            QuantileFunction::Exponential if b == 0.0 => 0.0,
            QuantileFunction::Exponential => b * (1.0 - b.ln()),
        }
    }

    /// `E|X| = u(1)`.
    pub fn mean(&self) -> f64 {
        self.partial_integral(1.0)
    }

    /// Smallest `beta` with `u(beta) >= s`, by bisection; `None` past `u(1)`.
    pub fn inverse_partial_integral(&self, s: f64) -> Option<f64> {
        if s <= 0.0 {
            return Some(0.0);
        }
        let top = self.mean();
        if s > top {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > INVERSE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.partial_integral(mid) >= s {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Lebesgue measure of `{z : X*(z) >= tau}`.
    pub fn length_above(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 1.0;
        }
        match self {
            QuantileFunction::Constant { value } => {
                if *value >= tau {
                    1.0
                } else {
                    0.0
                }
            }
            QuantileFunction::Step { breaks, levels } => {
                let k = levels.partition_point(|&l| l >= tau);
                breaks[k]
            }
            QuantileFunction::Uniform => (1.0 - tau).max(0.0),
            QuantileFunction::Exponential => (-tau).exp(),
        }
    }

    /// `E[|X| 1{|X| >= tau}]`.
    pub fn tail_mean(&self, tau: f64) -> f64 {
        self.partial_integral(self.length_above(tau))
    }

    /// Essential supremum `X*(0)`, if finite.
    pub fn sup(&self) -> Option<f64> {
        match self {
            QuantileFunction::Exponential => None,
            other => Some(other.value(0.0)),
        }
    }

    /// Where `u` stops growing, i.e. the measure of `{X* > 0}`.
    pub fn support_length(&self) -> f64 {
        match self {
            QuantileFunction::Constant { value } if *value == 0.0 => 0.0,
            QuantileFunction::Step { breaks, levels } => breaks[levels.partition_point(|&l| l > 0.0)],
            _ => 1.0,
        }
    }

    /// Points where `X*` jumps; `u` is linear between them for step functions.
    pub fn breaks(&self) -> Vec<f64> {
        match self {
            QuantileFunction::Step { breaks, .. } => breaks.clone(),
            _ => vec![0.0, 1.0],
        }
    }

    pub fn is_step(&self) -> bool {
        matches!(self, QuantileFunction::Constant { .. } | QuantileFunction::Step { .. })
    }

    /// Positive values taken by `X*` on a set of positive measure, for step functions.
    pub fn atoms(&self) -> Vec<f64> {
        match self {
            QuantileFunction::Constant { value } if *value > 0.0 => vec![*value],
            QuantileFunction::Step { levels, .. } => {
                let mut v: Vec<f64> = levels.iter().copied().filter(|&l| l > 0.0).collect();
                v.dedup();
                v
            }
            _ => Vec::new(),
        }
    }
}
