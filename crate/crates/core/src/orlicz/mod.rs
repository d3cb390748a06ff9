//! Orlicz functions, Luxemburg norms and Legendre conjugates.
//!
//! Closed forms cover the power family `c t^p` and the hinge `(t - theta)_+`.
//! Everything else is a convex nondecreasing piecewise-linear [`GridFunction`],
//! which is closed under conjugation: the transform of a piecewise-linear
//! convex function swaps the roles of nodes and slopes and is computed
//! exactly.

mod duality;
mod from_rv;
mod quantile;

pub use duality::{boundary_point, duality_gap, sandwich_check, DualityReport, SandwichReport};
pub use from_rv::{m_from_rv, mstar_from_rv, MSTAR_TOL};
pub use quantile::QuantileFunction;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative bisection tolerance of [`luxemburg_norm`].
pub const LUXEMBURG_TOL: f64 = 1e-13;
/// Slack allowed on discrete second differences.
pub const CONVEXITY_TOL: f64 = 1e-12;

/// Behaviour to the right of the last grid node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tail {
    /// Continue linearly with this slope.
    Linear(f64),
    /// `+inf` beyond the last node, which is the domain cap.
    Infinite,
}

/// Convex nondecreasing piecewise-linear function through `(nodes, values)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
    tail: Tail,
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, tail: Tail) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::invalid("grid needs at least two nodes and one value per node"));
        }
        if nodes[0] != 0.0 || values[0].abs() > CONVEXITY_TOL {
            return Err(Error::invalid("grid must start at (0, 0)"));
        }
        if nodes.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid entries must be finite"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid nodes must be strictly increasing"));
        }
        let mut grid = GridFunction {
            nodes,
            values,
            tail,
        };
        grid.values[0] = 0.0;
        let slopes = grid.slopes();
        if slopes[0] < -CONVEXITY_TOL {
            return Err(Error::invalid("grid function must be nondecreasing"));
        }
        for w in slopes.windows(2) {
            if w[1] < w[0] - CONVEXITY_TOL * w[0].abs().max(1.0) {
                return Err(Error::invalid("grid function must be convex"));
            }
        }
        if let Tail::Linear(s) = tail {
            let last = *slopes.last().unwrap();
            if !s.is_finite() || s < last - CONVEXITY_TOL * last.abs().max(1.0) {
                return Err(Error::invalid("tail slope must be at least the last segment slope"));
            }
        }
        Ok(grid)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    fn slopes(&self) -> Vec<f64> {
        self.nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(s, v)| (v[1] - v[0]) / (s[1] - s[0]))
            .collect()
    }

    fn last(&self) -> (f64, f64) {
        (*self.nodes.last().unwrap(), *self.values.last().unwrap())
    }

    fn cap(&self) -> Option<f64> {
        match self.tail {
            Tail::Infinite => Some(self.last().0),
            Tail::Linear(_) => None,
        }
    }

    fn segment(&self, t: f64) -> usize {
        // Index k with nodes[k] <= t < nodes[k+1].
        self.nodes.partition_point(|&s| s <= t).saturating_sub(1).min(self.nodes.len() - 2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (s_last, v_last) = self.last();
        if t > s_last {
            return match self.tail {
                Tail::Linear(slope) => v_last + slope * (t - s_last),
                Tail::Infinite if t <= s_last * (1.0 + 1e-12) => v_last,
                Tail::Infinite => f64::INFINITY,
            };
        }
        let k = self.segment(t);
        let (s0, s1) = (self.nodes[k], self.nodes[k + 1]);
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        v0 + (v1 - v0) * (t - s0) / (s1 - s0)
    }

    fn right_derivative(&self, t: f64) -> f64 {
        let (s_last, _) = self.last();
        if t >= s_last {
            return match self.tail {
                Tail::Linear(slope) => slope,
                Tail::Infinite => f64::INFINITY,
            };
        }
        let k = self.segment(t);
        (self.values[k + 1] - self.values[k]) / (self.nodes[k + 1] - self.nodes[k])
    }

    /// Exact Legendre transform of the piecewise-linear function.
    ///
    /// Between consecutive slopes `m_{k-1} <= x <= m_k` the supremum of
    /// `x t - M(t)` sits at node `s_k`, so the conjugate has nodes at the
    /// slopes and slopes at the nodes.
    pub fn conjugate(&self) -> GridFunction {
        let slopes = self.slopes();
        let mut nodes = vec![0.0];
        let mut values = vec![0.0];
        let push = |x: f64, v: f64, nodes: &mut Vec<f64>, values: &mut Vec<f64>| {
            if x > *nodes.last().unwrap() {
                nodes.push(x);
                values.push(v.max(0.0));
            }
        };
        for (k, &m) in slopes.iter().enumerate() {
            push(m, m * self.nodes[k] - self.values[k], &mut nodes, &mut values);
        }
        let (s_last, v_last) = self.last();
        let tail = match self.tail {
            Tail::Infinite => Tail::Linear(s_last),
            Tail::Linear(mu) => {
                push(mu, mu * s_last - v_last, &mut nodes, &mut values);
                Tail::Infinite
            }
        };
        if nodes.len() < 2 {
            // M has slope 0 everywhere up to an infinite tail: M* is s_last * x.
            return GridFunction {
                nodes: vec![0.0, 1.0],
                values: vec![0.0, s_last],
                tail: Tail::Linear(s_last),
            };
        }
        GridFunction {
            nodes,
            values,
            tail,
        }
    }
}

/// A convex nondecreasing `M: [0, inf) -> [0, inf]` with `M(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum OrliczFunction {
    /// `coef * t^p`, `p >= 1`.
    Power { p: f64, coef: f64 },
    /// `(t - theta)_+`.
    Hinge { theta: f64 },
    Grid(GridFunction),
}

impl OrliczFunction {
    pub fn power(p: f64, coef: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite() && coef > 0.0 && coef.is_finite()) {
            return Err(Error::invalid(format!("power function needs p >= 1, coef > 0 (got {p}, {coef})")));
        }
        Ok(OrliczFunction::Power { p, coef })
    }

    pub fn hinge(theta: f64) -> Result<Self> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::invalid(format!("hinge threshold must be >= 0, got {theta}")));
        }
        Ok(OrliczFunction::Hinge { theta })
    }

    pub fn grid(nodes: Vec<f64>, values: Vec<f64>, tail: Tail) -> Result<Self> {
        GridFunction::new(nodes, values, tail).map(OrliczFunction::Grid)
    }

    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match *self {
            OrliczFunction::Power { p, coef } => coef * t.powf(p),
            OrliczFunction::Hinge { theta } => (t - theta).max(0.0),
            OrliczFunction::Grid(ref g) => g.eval(t),
        }
    }

    pub fn right_derivative(&self, t: f64) -> f64 {
        match *self {
            OrliczFunction::Power { p, coef } if p == 1.0 => coef,
            OrliczFunction::Power { p, coef } => coef * p * t.powf(p - 1.0),
            OrliczFunction::Hinge { theta } => {
                if t >= theta {
                    1.0
                } else {
                    0.0
                }
            }
            OrliczFunction::Grid(ref g) => g.right_derivative(t),
        }
    }

    /// Largest `t` beyond which `M = +inf`, if any.
    pub fn cap(&self) -> Option<f64> {
        match self {
            OrliczFunction::Grid(g) => g.cap(),
            _ => None,
        }
    }

    /// Exact piecewise-linear form, for functions that are piecewise linear.
    pub fn to_grid(&self) -> Option<GridFunction> {
        match *self {
            OrliczFunction::Grid(ref g) => Some(g.clone()),
            OrliczFunction::Power { p, coef } if p == 1.0 => Some(GridFunction {
                nodes: vec![0.0, 1.0],
                values: vec![0.0, coef],
                tail: Tail::Linear(coef),
            }),
            OrliczFunction::Hinge { theta } if theta == 0.0 => Some(GridFunction {
                nodes: vec![0.0, 1.0],
                values: vec![0.0, 1.0],
                tail: Tail::Linear(1.0),
            }),
            OrliczFunction::Hinge { theta } => Some(GridFunction {
                nodes: vec![0.0, theta, theta + 1.0],
                values: vec![0.0, 0.0, 1.0],
                tail: Tail::Linear(1.0),
            }),
            OrliczFunction::Power { .. } => None,
        }
    }

    /// `sup { t : M(t) <= y }` by bisection.
    pub fn inverse(&self, y: f64) -> f64 {
        let mut hi = 1.0;
        while self.eval(hi) <= y {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) <= y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= LUXEMBURG_TOL * hi {
                break;
            }
        }
        lo
    }

    /// Built-in functions known to be N-functions.
    pub fn is_n_function(&self) -> bool {
        matches!(*self, OrliczFunction::Power { p, .. } if p > 1.0)
    }
}

/// `inf { lambda > 0 : sum_i M(|x_i| / lambda) <= 1 }` by bisection.
pub fn luxemburg_norm(m: &OrliczFunction, x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let modular = |lambda: f64| -> f64 { x.iter().map(|v| m.eval(v.abs() / lambda)).sum() };
    let mut hi = scale;
    while modular(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    let mut guard = 0;
    while modular(lo) <= 1.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 2000 {
            // M vanishes on the whole orbit of x: the norm is zero.
            return 0.0;
        }
    }
    while hi - lo > LUXEMBURG_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if modular(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Tuning of [`conjugate`] for smooth closed forms.
#[derive(Clone, Copy, Debug)]
pub struct ConjugateOptions {
    /// Bound on the chord error of the tabulated conjugate.
    pub tol: f64,
    /// The grid extends until the conjugate reaches this value.
    pub value_ceiling: f64,
    pub max_nodes: usize,
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        ConjugateOptions {
            tol: 1e-9,
            value_ceiling: 16.0,
            max_nodes: 1 << 20,
        }
    }
}

/// The Legendre transform `M*(x) = sup_t (x t - M(t))`.
pub fn conjugate(m: &OrliczFunction) -> OrliczFunction {
    conjugate_with(m, &ConjugateOptions::default())
}

/// Piecewise-linear inputs are transformed exactly. Smooth inputs are
/// tabulated on an adaptive grid: at each abscissa `x` the maximiser solves
/// `M'(t) = x` by bisection, and intervals are split until the chord error
/// bound `(t1 - t0)(x1 - x0) / 4` drops below `opts.tol`.
pub fn conjugate_with(m: &OrliczFunction, opts: &ConjugateOptions) -> OrliczFunction {
    if let Some(grid) = m.to_grid() {
        return OrliczFunction::Grid(grid.conjugate());
    }
    OrliczFunction::Grid(tabulate_conjugate(m, opts))
}

/// Solves `M'(t) = x`: in closed form for powers, by bisection otherwise.
fn argmax_slope(m: &OrliczFunction, x: f64) -> f64 {
    if x <= m.right_derivative(0.0) {
        return 0.0;
    }
    if let OrliczFunction::Power { p, coef } = *m {
        if p > 1.0 {
            return (x / (coef * p)).powf(1.0 / (p - 1.0));
        }
    }
    let mut hi = 1.0;
    while m.right_derivative(hi) < x {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m.right_derivative(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn tabulate_conjugate(m: &OrliczFunction, opts: &ConjugateOptions) -> GridFunction {
    // (x, M*(x), maximiser t(x) = slope of M* at x)
    let point = |x: f64| {
        let t = argmax_slope(m, x);
        (x, (x * t - m.eval(t)).max(0.0), t)
    };
    let mut x_max = 1.0;
    while point(x_max).1 < opts.value_ceiling {
        x_max *= 2.0;
    }
    let min_width = 1e-13 * x_max;
    let mut done = vec![point(0.0)];
    let mut stack = vec![point(x_max)];
    while let Some(right) = stack.last().copied() {
        let left = *done.last().unwrap();
        let width = right.0 - left.0;
        let bound = (right.2 - left.2) * width / 4.0;
        if bound > opts.tol && width > min_width && done.len() + stack.len() < opts.max_nodes {
            stack.push(point(left.0 + 0.5 * width));
        } else {
            done.push(stack.pop().unwrap());
        }
    }
    let last_slope = done.last().unwrap().2;
    let (nodes, values): (Vec<f64>, Vec<f64>) = done.iter().map(|&(x, v, _)| (x, v)).unzip();
    // Enforce monotone slopes against rounding in the tabulated values.
    let mut grid = GridFunction {
        nodes,
        values,
        tail: Tail::Linear(last_slope),
    };
    let slopes = grid.slopes();
    let last_chord = *slopes.last().unwrap();
    grid.tail = Tail::Linear(last_slope.max(last_chord));
    grid
}

/// JSON form: `{"kind": "power"|"hinge"|"grid", "params": ..., "grid": [[s, v], ...], "cap": ...}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrliczJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Map<String, serde_json::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
}

impl OrliczFunction {
    pub fn to_json(&self) -> OrliczJson {
        let params = |pairs: &[(&str, f64)]| {
            Some(
                pairs
                    .iter()
                    .map(|&(k, v)| (k.to_string(), serde_json::json!(v)))
                    .collect(),
            )
        };
        match self {
            OrliczFunction::Power { p, coef } => OrliczJson {
                kind: "power".into(),
                params: params(&[("p", *p), ("coef", *coef)]),
                grid: None,
                cap: None,
            },
            OrliczFunction::Hinge { theta } => OrliczJson {
                kind: "hinge".into(),
                params: params(&[("theta", *theta)]),
                grid: None,
                cap: None,
            },
            OrliczFunction::Grid(g) => OrliczJson {
                kind: "grid".into(),
                params: match g.tail {
                    Tail::Linear(s) => params(&[("tail_slope", s)]),
                    Tail::Infinite => None,
                },
                grid: Some(g.nodes.iter().zip(&g.values).map(|(&s, &v)| [s, v]).collect()),
                cap: g.cap(),
            },
        }
    }

    pub fn from_json(json: &OrliczJson) -> Result<Self> {
        let param = |name: &str| -> Option<f64> {
            json.params.as_ref()?.get(name)?.as_f64()
        };
        let require = |name: &str| {
            param(name).ok_or_else(|| Error::invalid(format!("{} function needs params.{name}", json.kind)))
        };
        match json.kind.as_str() {
            "power" => OrliczFunction::power(require("p")?, param("coef").unwrap_or(1.0)),
            "hinge" => OrliczFunction::hinge(require("theta")?),
            "grid" => {
                let points = json
                    .grid
                    .as_ref()
                    .ok_or_else(|| Error::invalid("grid function needs a `grid` array"))?;
                let (mut nodes, mut values): (Vec<f64>, Vec<f64>) =
                    points.iter().map(|p| (p[0], p[1])).unzip();
                let tail = match json.cap {
                    Some(cap) => {
                        let last = *nodes.last().unwrap_or(&0.0);
                        if cap < last {
                            return Err(Error::invalid("cap lies before the last grid node"));
                        }
                        if cap > last && nodes.len() >= 2 {
                            let k = nodes.len() - 1;
                            let slope = (values[k] - values[k - 1]) / (nodes[k] - nodes[k - 1]);
                            values.push(values[k] + slope * (cap - last));
                            nodes.push(cap);
                        }
                        Tail::Infinite
                    }
                    None => match param("tail_slope") {
                        Some(s) => Tail::Linear(s),
                        None if nodes.len() >= 2 => {
                            let k = nodes.len() - 1;
                            Tail::Linear((values[k] - values[k - 1]) / (nodes[k] - nodes[k - 1]))
                        }
                        None => Tail::Linear(0.0),
                    },
                };
                OrliczFunction::grid(nodes, values, tail)
            }
            other => Err(Error::invalid(format!("unknown Orlicz kind `{other}`"))),
        }
    }
}
