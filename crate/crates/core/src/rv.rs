//! Expected sums of the largest `ell` values of `|x_i X_i|` for iid `X_i`,
//! and their ratio to the Luxemburg norm built from the law of `X`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::sphere_point;
use crate::error::{Error, Result};
use crate::orlicz::{conjugate, luxemburg_norm, mstar_from_rv, OrliczFunction, QuantileFunction};
use crate::rng::{self, Estimate};

/// Stream domain of [`simulate_expected_sums`].
const SIM_DOMAIN: u64 = 0x5157;
const X_DOMAIN: u64 = 0x7A11;

/// Built-in laws, by CLI name.
pub const PRESETS: [&str; 4] = ["constant", "two-point", "uniform", "exponential"];

/// A law of `|X|`, described by its decreasing quantile `X*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    name: String,
    quantile: QuantileFunction,
}

impl Distribution {
    pub fn new(name: impl Into<String>, quantile: QuantileFunction) -> Self {
        Distribution {
            name: name.into(),
            quantile,
        }
    }

    pub fn constant(value: f64) -> Result<Self> {
        Ok(Self::new("constant", QuantileFunction::constant(value)?))
    }

    /// `X` uniform on `{0, 2}`.
    pub fn two_point() -> Self {
        let q = QuantileFunction::discrete(&[(0.0, 0.5), (2.0, 0.5)]).expect("valid atoms");
        Self::new("two-point", q)
    }

    pub fn uniform() -> Self {
        Self::new("uniform", QuantileFunction::Uniform)
    }

    pub fn exponential() -> Self {
        Self::new("exponential", QuantileFunction::Exponential)
    }

    /// A finite law given as `(value, probability)` pairs.
    pub fn discrete(name: impl Into<String>, atoms: &[(f64, f64)]) -> Result<Self> {
        Ok(Self::new(name, QuantileFunction::discrete(atoms)?))
    }

    /// Looks up a preset; `exp` and `unif` are accepted as short names.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "constant" | "const" => Self::constant(1.0),
            "two-point" | "twopoint" | "two_point" => Ok(Self::two_point()),
            "uniform" | "unif" => Ok(Self::uniform()),
            "exponential" | "exp" => Ok(Self::exponential()),
            other => Err(Error::invalid(format!(
                "unknown distribution `{other}` (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn quantile(&self) -> &QuantileFunction {
        &self.quantile
    }

    /// `E|X|`.
    pub fn mean(&self) -> f64 {
        self.quantile.mean()
    }

    /// Inverse-transform draw `X*(V)` with `V` uniform on `(0, 1]`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.quantile.value(1.0 - rng.random::<f64>())
    }

    fn deterministic(&self) -> Option<f64> {
        match self.quantile {
            QuantileFunction::Constant { value } => Some(value),
            _ => None,
        }
    }
}

fn check_ells(n: usize, ells: &[usize]) -> Result<usize> {
    match ells.iter().copied().max() {
        Some(top) if top <= n && ells.iter().all(|&l| l >= 1) => Ok(top),
        _ => Err(Error::invalid(format!("need 1 <= ell <= n = {n} for every ell, got {ells:?}"))),
    }
}

/// Sum of the `ell` largest entries, for each `ell` in `ells`.
fn top_sums(values: &[f64], ells: &[usize], k: usize, top: &mut Vec<f64>, out: &mut [f64]) {
    top.clear();
    for &v in values {
        if top.len() < k {
            let pos = top.partition_point(|&t| t >= v);
            top.insert(pos, v);
        } else if v > top[k - 1] {
            top.pop();
            let pos = top.partition_point(|&t| t >= v);
            top.insert(pos, v);
        }
    }
    for (o, &ell) in out.iter_mut().zip(ells) {
        *o = top[..ell].iter().sum();
    }
}

/// `E sum_{k<=ell} kmax_i |x_i X_i|` for several `ell` from the same draws.
pub fn simulate_expected_sums(
    x: &[f64],
    dist: &Distribution,
    ells: &[usize],
    trials: u64,
    seed: u64,
) -> Result<Vec<Estimate>> {
    let top = check_ells(x.len(), ells)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    if let Some(c) = dist.deterministic() {
        let scaled: Vec<f64> = abs.iter().map(|v| v * c.abs()).collect();
        let mut out = vec![0.0; ells.len()];
        top_sums(&scaled, ells, top, &mut Vec::with_capacity(top), &mut out);
        return Ok(out.into_iter().map(Estimate::exact).collect());
    }
    Ok(rng::monte_carlo_multi(
        trials,
        seed,
        SIM_DOMAIN,
        ells.len(),
        || (vec![0.0; abs.len()], Vec::with_capacity(top)),
        |rng, (draw, buf), out| {
            for (d, a) in draw.iter_mut().zip(&abs) {
                *d = a * dist.sample(rng);
            }
            top_sums(draw, ells, top, buf, out);
        },
    ))
}

/// Single-`ell` form of [`simulate_expected_sums`].
pub fn simulate_expected_sum(
    x: &[f64],
    dist: &Distribution,
    ell: usize,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    Ok(simulate_expected_sums(x, dist, &[ell], trials, seed)?[0])
}

/// `M = (M*)*` where `M*(u(beta)) = beta / ell`.
pub fn orlicz_for(dist: &Distribution, ell: usize) -> Result<OrliczFunction> {
    Ok(conjugate(&mstar_from_rv(dist.quantile(), ell)?))
}

/// Ratio `E S / ||x||_M` with a normal-approximation 95% interval.
#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    pub ell: usize,
    pub expectation: Estimate,
    pub norm: f64,
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
}

fn ratio_report(ell: usize, expectation: Estimate, norm: f64) -> RatioReport {
    let half = 1.96 * expectation.stderr / norm;
    let ratio = expectation.value / norm;
    RatioReport {
        ell,
        expectation,
        norm,
        ratio,
        ratio_lo: ratio - half,
        ratio_hi: ratio + half,
    }
}

pub fn theorem_ratio(
    x: &[f64],
    dist: &Distribution,
    ell: usize,
    trials: u64,
    seed: u64,
) -> Result<RatioReport> {
    Ok(theorem_ratios(x, dist, &[ell], &[orlicz_for(dist, ell)?], trials, seed)?.remove(0))
}

/// Ratios for several `ell` with precomputed `M` (one per `ell`) and shared draws.
pub fn theorem_ratios(
    x: &[f64],
    dist: &Distribution,
    ells: &[usize],
    ms: &[OrliczFunction],
    trials: u64,
    seed: u64,
) -> Result<Vec<RatioReport>> {
    if ells.len() != ms.len() {
        return Err(Error::invalid("one Orlicz function per ell is required"));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("the ratio needs a nonzero x"));
    }
    let sums = simulate_expected_sums(x, dist, ells, trials, seed)?;
    Ok(ells
        .iter()
        .zip(ms)
        .zip(sums)
        .map(|((&ell, m), e)| ratio_report(ell, e, luxemburg_norm(m, x)))
        .collect())
}

/// One long-format row of [`ratio_sweep`].
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RatioRow {
    pub dist: String,
    pub n: usize,
    pub ell: usize,
    pub x_index: usize,
    pub expectation: f64,
    pub stderr: f64,
    pub norm: f64,
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub trials: u64,
}

/// Ratios over `dists x ns x ells` with `xs_per_cell` uniform unit vectors
/// per `(dist, n)`; all `ell <= n` share the draws of one `x`. Cells with
/// `ell > n` are skipped.
pub fn ratio_sweep(
    dists: &[Distribution],
    ns: &[usize],
    ells: &[usize],
    xs_per_cell: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<RatioRow>> {
    if ells.contains(&0) || ns.contains(&0) {
        return Err(Error::invalid("n and ell must be positive"));
    }
    let mut rows = Vec::new();
    for (d, dist) in dists.iter().enumerate() {
        let ms: Vec<OrliczFunction> = ells.iter().map(|&l| orlicz_for(dist, l)).collect::<Result<_>>()?;
        for &n in ns {
            let (cell_ells, cell_ms): (Vec<usize>, Vec<OrliczFunction>) = ells
                .iter()
                .zip(&ms)
                .filter(|(&l, _)| l <= n)
                .map(|(&l, m)| (l, m.clone()))
                .unzip();
            if cell_ells.is_empty() {
                continue;
            }
            for k in 0..xs_per_cell {
                let x = sphere_point(n, &mut rng::stream(seed, X_DOMAIN ^ n as u64, k as u64));
                let cell_seed = rng::derive(seed, ((d as u64) << 48) ^ ((n as u64) << 24) ^ k as u64);
                for r in theorem_ratios(&x, dist, &cell_ells, &cell_ms, trials, cell_seed)? {
                    rows.push(RatioRow {
                        dist: dist.name().to_string(),
                        n,
                        ell: r.ell,
                        x_index: k,
                        expectation: r.expectation.value,
                        stderr: r.expectation.stderr,
                        norm: r.norm,
                        ratio: r.ratio,
                        ratio_lo: r.ratio_lo,
                        ratio_hi: r.ratio_hi,
                        trials: r.expectation.trials,
                    });
                }
            }
        }
    }
    Ok(rows)
}
