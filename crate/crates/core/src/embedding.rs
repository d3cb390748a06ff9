//! The map `Psi: l_M^n -> l_1^{|G| N}`, `x -> (P(g)/N) (sum_i eps^j_i a_{g(i)} x_i)_{g, j}`,
//! with random sign vectors `eps^j` and a family `G` of maps `{0..n} -> {0..n}`.
//!
//! Its `l_1` norm is compared with the permutation average
//! `(1/n!) sum_pi (sum_i |x_i a_{pi(i)}|^2)^{1/2}`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{affine_family, symmetric_group, FamilyJson, MapFamily};
use crate::field::make_field;
use crate::rng;

/// Largest dimension for exhaustive sign enumeration.
pub const MAX_RADEMACHER_DIM: usize = 20;
/// Largest dimension for the exact permutation average.
pub const MAX_EXACT_PERMUTATION_DIM: usize = 8;
/// Sign vectors never exceed `SIGN_BUDGET * n`.
pub const SIGN_BUDGET: usize = 1024;
/// Default `delta` of the sign-vector sandwich.
pub const DEFAULT_DELTA: f64 = 0.25;

const SIGN_DOMAIN: u64 = 0x5167;
const SPHERE_DOMAIN: u64 = 0x5748;
const PERM_DOMAIN: u64 = 0x9E2A;
const RADEMACHER_SAMPLES: u64 = 1 << 20;

/// Exact `ave_{+-} |sum_i +- v_i|` over all `2^n` sign patterns.
pub fn rademacher_average(v: &[f64]) -> Result<f64> {
    let n = v.len();
    if n > MAX_RADEMACHER_DIM {
        return Err(Error::DomainTooLarge {
            what: "sign enumeration",
            size: n as u64,
            limit: MAX_RADEMACHER_DIM as u64,
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    // Patterns come in +- pairs, so fix the first sign and walk a Gray code
    // over the rest.
    let rest = n - 1;
    let mut sum: f64 = v.iter().sum();
    let mut total = sum.abs();
    let mut signs = vec![1.0f64; n];
    for step in 1u64..(1u64 << rest) {
        let bit = step.trailing_zeros() as usize + 1;
        signs[bit] = -signs[bit];
        sum += 2.0 * signs[bit] * v[bit];
        total += sum.abs();
    }
    Ok(total / (1u64 << rest) as f64)
}

/// `2^20`-sample estimate of the Rademacher average, for `n > 20`.
fn rademacher_estimate(v: &[f64], seed: u64) -> f64 {
    rng::monte_carlo(RADEMACHER_SAMPLES, seed, SIGN_DOMAIN ^ 1, || (), |r, _| {
        v.iter()
            .map(|&x| if r.random::<bool>() { x } else { -x })
            .sum::<f64>()
            .abs()
    })
    .value
}

/// Nested iid sign vectors: the first `N` rows never change as `N` grows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignSelection {
    pub n: usize,
    /// `N x n` matrix of `+-1`.
    pub signs: Vec<Vec<i8>>,
    pub delta: f64,
    /// Sizes tried, ending with the accepted one.
    pub rounds: Vec<usize>,
    /// Largest relative deviation from the Rademacher average over the probes.
    pub worst_deviation: f64,
}

fn sign_rows(n: usize, count: usize, seed: u64) -> Vec<Vec<i8>> {
    let mut r = rng::stream(seed, SIGN_DOMAIN, 0);
    (0..count)
        .map(|_| (0..n).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect())
        .collect()
}

fn sign_average(signs: &[Vec<i8>], v: &[f64]) -> f64 {
    let total: f64 = signs
        .iter()
        .map(|row| row.iter().zip(v).map(|(&e, &x)| e as f64 * x).sum::<f64>().abs())
        .sum();
    total / signs.len() as f64
}

/// Doubles `N` from `4n` until `(1 - delta) R(v) <= (1/N) sum_j |<eps^j, v>| <= (1 + delta) R(v)`
/// holds for every probe `v`, where `R` is the Rademacher average.
pub fn select_sign_vectors(n: usize, delta: f64, probes: &[Vec<f64>], seed: u64) -> Result<SignSelection> {
    if n == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if probes.is_empty() {
        return Err(Error::invalid("probe set is empty"));
    }
    if let Some(p) = probes.iter().find(|p| p.len() != n) {
        return Err(Error::invalid(format!("probe of length {} in dimension {n}", p.len())));
    }
    let targets: Vec<f64> = probes
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            if n <= MAX_RADEMACHER_DIM {
                rademacher_average(p)
            } else {
                Ok(rademacher_estimate(p, rng::derive(seed, k as u64)))
            }
        })
        .collect::<Result<_>>()?;
    let cap = SIGN_BUDGET * n;
    let mut rounds = Vec::new();
    let mut count = 4 * n;
    loop {
        if count > cap {
            return Err(Error::BudgetExceeded { cap });
        }
        rounds.push(count);
        let signs = sign_rows(n, count, seed);
        let worst = probes
            .par_iter()
            .zip(&targets)
            .map(|(p, &t)| {
                let avg = sign_average(&signs, p);
                if t == 0.0 {
                    if avg == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (avg / t - 1.0).abs()
                }
            })
            .reduce(|| 0.0, f64::max);
        if worst <= delta {
            return Ok(SignSelection {
                n,
                signs,
                delta,
                rounds,
                worst_deviation: worst,
            });
        }
        count *= 2;
    }
}

/// All `2^n` sign patterns, for exact comparisons in small dimension.
pub fn exhaustive_signs(n: usize) -> Result<Vec<Vec<i8>>> {
    if n > MAX_RADEMACHER_DIM {
        return Err(Error::DomainTooLarge {
            what: "sign enumeration",
            size: n as u64,
            limit: MAX_RADEMACHER_DIM as u64,
        });
    }
    Ok((0..1u64 << n)
        .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect())
        .collect())
}

/// Weights, sign vectors and map family defining `Psi`.
#[derive(Clone, Debug)]
pub struct EmbeddingSpec {
    n: usize,
    weights: Vec<f64>,
    signs: Vec<Vec<i8>>,
    family: MapFamily,
}

impl EmbeddingSpec {
    pub fn new(weights: Vec<f64>, signs: Vec<Vec<i8>>, family: MapFamily) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::invalid("weights must be nonempty"));
        }
        if weights.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if signs.is_empty() {
            return Err(Error::invalid("need at least one sign vector"));
        }
        if signs.iter().any(|row| row.len() != n || row.iter().any(|&e| e != 1 && e != -1)) {
            return Err(Error::invalid(format!("sign vectors must be +-1 rows of length {n}")));
        }
        if family.domain_size() != n || family.codomain().len() != n || !family.is_explicit() {
            return Err(Error::invalid(format!("family must be an explicit set of maps {{0..{n}}} -> {{0..{n}}}")));
        }
        Ok(EmbeddingSpec {
            n,
            weights,
            signs,
            family,
        })
    }

    /// `G = G_0` over `GF(n)`, with signs chosen against the probes
    /// `(a_{g(i)} x_i)_i` for every `g` and every `x` in `probe_points`.
    pub fn affine(weights: Vec<f64>, delta: f64, probe_points: &[Vec<f64>], seed: u64) -> Result<(Self, SignSelection)> {
        let n = weights.len();
        let family = affine_family(&make_field(n as u64)?);
        let probes: Vec<Vec<f64>> = probe_points
            .iter()
            .flat_map(|x| {
                let weights = &weights;
                family
                    .maps()
                    .expect("explicit family")
                    .map(move |(g, _)| g.iter().zip(x).map(|(&gi, &xi)| weights[gi as usize] * xi).collect())
            })
            .collect();
        let selection = select_sign_vectors(n, delta, &probes, seed)?;
        let spec = EmbeddingSpec::new(weights, selection.signs.clone(), family)?;
        Ok((spec, selection))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn signs(&self) -> &[Vec<i8>] {
        &self.signs
    }

    pub fn family(&self) -> &MapFamily {
        &self.family
    }

    /// `|G| N`.
    pub fn output_dim(&self) -> usize {
        self.family.weights().map_or(0, <[f64]>::len) * self.signs.len()
    }

    pub fn to_json(&self) -> Result<EmbeddingJson> {
        Ok(EmbeddingJson {
            n: self.n,
            weights: self.weights.clone(),
            signs: self.signs.clone(),
            family: self.family.to_json()?,
        })
    }

    pub fn from_json(json: EmbeddingJson) -> Result<Self> {
        let family = MapFamily::from_json(json.family)?;
        if json.n != json.weights.len() {
            return Err(Error::invalid("`n` disagrees with the weight vector"));
        }
        EmbeddingSpec::new(json.weights, json.signs, family)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddingJson {
    pub n: usize,
    pub weights: Vec<f64>,
    pub signs: Vec<Vec<i8>>,
    pub family: FamilyJson,
}

/// Coordinates ordered map-major, then sign vector.
pub fn psi(spec: &EmbeddingSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.n {
        return Err(Error::invalid(format!("x has length {}, expected {}", x.len(), spec.n)));
    }
    let count = spec.signs.len() as f64;
    let mut out = Vec::with_capacity(spec.output_dim());
    let mut v = vec![0.0; spec.n];
    for (g, w) in spec.family.maps()? {
        for ((vi, &gi), &xi) in v.iter_mut().zip(g).zip(x) {
            *vi = spec.weights[gi as usize] * xi;
        }
        let scale = w / count;
        out.extend(
            spec.signs
                .iter()
                .map(|row| scale * row.iter().zip(&v).map(|(&e, &vi)| e as f64 * vi).sum::<f64>()),
        );
    }
    Ok(out)
}

/// `||Psi x||_1` without materialising `Psi x`.
pub fn psi_norm(spec: &EmbeddingSpec, x: &[f64]) -> Result<f64> {
    Ok(psi(spec, x)?.iter().map(|v| v.abs()).sum())
}

/// How the permutation average is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReferenceMode {
    /// All `n!` permutations; `n <= 8`.
    Exact,
    /// Uniform random permutations.
    Sampled { trials: u64, seed: u64 },
}

impl ReferenceMode {
    /// Exact up to `n = 8`, otherwise `20000` sampled permutations.
    pub fn auto(n: usize, seed: u64) -> Self {
        if n <= MAX_EXACT_PERMUTATION_DIM {
            ReferenceMode::Exact
        } else {
            ReferenceMode::Sampled { trials: 20_000, seed }
        }
    }
}

fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    // Heap's algorithm.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Average of `f(pi)` over all permutations, or a sampled estimate.
fn permutation_average(n: usize, mode: ReferenceMode, f: impl Fn(&[usize]) -> f64 + Sync) -> Result<f64> {
    match mode {
        ReferenceMode::Exact => {
            if n > MAX_EXACT_PERMUTATION_DIM {
                return Err(Error::DomainTooLarge {
                    what: "permutation enumeration",
                    size: n as u64,
                    limit: MAX_EXACT_PERMUTATION_DIM as u64,
                });
            }
            let mut total = 0.0;
            let mut count = 0u64;
            for_each_permutation(n, |p| {
                total += f(p);
                count += 1;
            });
            Ok(total / count as f64)
        }
        ReferenceMode::Sampled { trials, seed } => {
            if trials == 0 {
                return Err(Error::invalid("sampled mode needs at least one trial"));
            }
            Ok(rng::monte_carlo(trials, seed, PERM_DOMAIN, || (0..n).collect::<Vec<usize>>(), |r, perm| {
                perm.shuffle(r);
                f(perm)
            })
            .value)
        }
    }
}

/// `(1/n!) sum_pi (sum_i |x_i a_{pi(i)}|^2)^{1/2}`.
pub fn reference_norm(a: &[f64], x: &[f64], mode: ReferenceMode) -> Result<f64> {
    let n = a.len();
    if x.len() != n {
        return Err(Error::invalid(format!("x has length {}, expected {n}", x.len())));
    }
    permutation_average(n, mode, |p| {
        p.iter()
            .zip(x)
            .map(|(&pi, &xi)| (xi * a[pi]).powi(2))
            .sum::<f64>()
            .sqrt()
    })
}

/// Averages of `(sum_i |a(i, g(i))|^2)^{1/2}` over `G_0` and over all
/// permutations, against `(1/n) sum_{k<=n} s(k) + ((1/n) sum_{k>n} s(k)^2)^{1/2}`
/// where `s` is the decreasing rearrangement of the `n^2` entries.
#[derive(Clone, Debug, Serialize)]
pub struct AveragesReport {
    pub n: usize,
    pub affine_average: f64,
    pub permutation_average: f64,
    pub bound: f64,
    pub affine_ratio: f64,
    pub permutation_ratio: f64,
    /// `affine_average / permutation_average`.
    pub family_ratio: f64,
    /// Both averages are at most `bound`; this side holds with constant 1
    /// for any family with uniform marginals.
    pub upper_ok: bool,
}

pub fn equivalence_averages_check(a: &[Vec<f64>], mode: ReferenceMode) -> Result<AveragesReport> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("need a square nonempty matrix"));
    }
    let family = affine_family(&make_field(n as u64)?);
    let column_norm = |g: &mut dyn Iterator<Item = usize>| -> f64 {
        g.enumerate().map(|(i, j)| a[i][j].powi(2)).sum::<f64>().sqrt()
    };
    let affine_average = family
        .maps()?
        .map(|(g, w)| w * column_norm(&mut g.iter().map(|&j| j as usize)))
        .sum::<f64>();
    let permutation_average = permutation_average(n, mode, |p| column_norm(&mut p.iter().copied()))?;

    let mut s: Vec<f64> = a.iter().flatten().map(|v| v.abs()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    let nf = n as f64;
    let head: f64 = s[..n].iter().sum::<f64>() / nf;
    let tail: f64 = (s[n..].iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
    let bound = head + tail;
    let ratio = |v: f64| if bound > 0.0 { v / bound } else { 1.0 };
    let tol = 1e-12 * bound.max(1.0);
    let upper_ok = affine_average <= bound + tol
        && match mode {
            ReferenceMode::Exact => permutation_average <= bound + tol,
            ReferenceMode::Sampled { .. } => true,
        };
    Ok(AveragesReport {
        n,
        affine_average,
        permutation_average,
        bound,
        affine_ratio: ratio(affine_average),
        permutation_ratio: ratio(permutation_average),
        family_ratio: if permutation_average > 0.0 { affine_average / permutation_average } else { 1.0 },
        upper_ok,
    })
}

/// Uniform point on the unit sphere of `R^n`.
pub fn sphere_point(n: usize, r: &mut impl Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// `count` sphere points, one stream per point.
pub fn sphere_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| sphere_point(n, &mut rng::stream(seed, SPHERE_DOMAIN, k as u64)))
        .collect()
}

/// Weight presets: `ones` (`a = 1`) or `power:p` (`a_i = i^{1/p - 1/2}`).
pub fn weights_preset(name: &str, n: usize) -> Result<Vec<f64>> {
    match name.split_once(':') {
        None if name == "ones" => Ok(vec![1.0; n]),
        Some(("power", p)) => {
            let p: f64 = p
                .parse()
                .map_err(|_| Error::invalid(format!("bad exponent in `{name}`")))?;
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::invalid(format!("exponent must be >= 1, got {p}")));
            }
            Ok((1..=n).map(|i| (i as f64).powf(1.0 / p - 0.5)).collect())
        }
        _ => Err(Error::invalid(format!("unknown weight preset `{name}` (ones, power:p)"))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DistortionReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub signs: usize,
    pub samples: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub distortion: f64,
    pub seed: u64,
}

/// Ratios `||Psi x||_1 / reference_norm(a, x)` over `samples` sphere points.
pub fn distortion_report(spec: &EmbeddingSpec, samples: usize, seed: u64) -> Result<DistortionReport> {
    if samples == 0 {
        return Err(Error::invalid("samples must be at least 1"));
    }
    let n = spec.n();
    let ratios: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let x = sphere_point(n, &mut rng::stream(seed, SPHERE_DOMAIN ^ 2, k as u64));
            let mode = ReferenceMode::auto(n, rng::derive(seed, k as u64));
            Ok(psi_norm(spec, &x)? / reference_norm(spec.weights(), &x, mode)?)
        })
        .collect::<Result<_>>()?;
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(DistortionReport {
        n,
        signs: spec.signs().len(),
        samples,
        min_ratio,
        max_ratio,
        distortion: max_ratio / min_ratio,
        seed,
    })
}

/// Distortion of `G_0`-based embeddings for each `n`, with signs selected
/// against `probes` sphere points and measured on `samples` fresh ones.
pub fn embed_sweep(
    ns: &[usize],
    weights: &str,
    delta: f64,
    probes: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<DistortionReport>> {
    ns.iter()
        .map(|&n| {
            let probe_points = sphere_points(n, probes.max(1), rng::derive(seed, n as u64));
            let (spec, _) = EmbeddingSpec::affine(weights_preset(weights, n)?, delta, &probe_points, seed)?;
            distortion_report(&spec, samples, seed)
        })
        .collect()
}

/// `G_0` replaced by the symmetric group and all sign patterns: the
/// configuration in which `||Psi x||_1` is an exact permutation average.
pub fn exhaustive_spec(weights: Vec<f64>) -> Result<EmbeddingSpec> {
    let n = weights.len();
    EmbeddingSpec::new(weights, exhaustive_signs(n)?, symmetric_group(n)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rademacher_examples() {
        assert_eq!(rademacher_average(&[1.0]).unwrap(), 1.0);
        assert_eq!(rademacher_average(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(rademacher_average(&[3.0, 4.0]).unwrap(), 4.0);
        assert_eq!(rademacher_average(&[]).unwrap(), 0.0);
        assert!(matches!(rademacher_average(&[1.0; 21]), Err(Error::DomainTooLarge { .. })));
    }

    #[test]
    fn rademacher_matches_direct_enumeration() {
        let v = [0.3, -1.2, 2.0, 0.7, -0.1];
        let direct: f64 = exhaustive_signs(5)
            .unwrap()
            .iter()
            .map(|row| row.iter().zip(&v).map(|(&e, &x)| e as f64 * x).sum::<f64>().abs())
            .sum::<f64>()
            / 32.0;
        assert!((rademacher_average(&v).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn sign_selection() {
        let units: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let s = select_sign_vectors(2, 0.25, &units, 1).unwrap();
        assert_eq!(s.signs.len(), 8);
        assert_eq!(s.worst_deviation, 0.0);
        assert!(select_sign_vectors(2, 0.0, &units, 1).is_err());
        assert!(select_sign_vectors(2, 1.0, &units, 1).is_err());

        let probes = sphere_points(8, 50, 3);
        let s = select_sign_vectors(8, 0.25, &probes, 4).unwrap();
        assert!(s.signs.len() <= SIGN_BUDGET * 8);
        for p in &probes {
            let r = rademacher_average(p).unwrap();
            let avg = sign_average(&s.signs, p);
            assert!(avg >= 0.75 * r && avg <= 1.25 * r);
        }
    }

    #[test]
    fn psi_two_dimensional_expansion() {
        let family = affine_family(&make_field(2).unwrap());
        let spec = EmbeddingSpec::new(vec![1.0, 1.0], vec![vec![1, 1]], family).unwrap();
        let x = [0.5, 2.0];
        let out = psi(&spec, &x).unwrap();
        assert_eq!(out.len(), 4);
        // Every map hits weights equal to 1, so each coordinate is (x1 + x2) / 4.
        for v in out {
            assert!((v - 2.5 / 4.0).abs() < 1e-15);
        }
        assert!(psi(&spec, &[0.0, 0.0]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reference_examples() {
        let x = [0.6, -0.8, 0.0];
        assert!((reference_norm(&[1.0; 3], &x, ReferenceMode::Exact).unwrap() - 1.0).abs() < 1e-15);
        assert!((reference_norm(&[2.0, 1.0], &[1.0, 0.0], ReferenceMode::Exact).unwrap() - 1.5).abs() < 1e-15);
        let a = [0.5, 1.0, 3.0, 2.0];
        let got = reference_norm(&a, &[1.0, 0.0, 0.0, 0.0], ReferenceMode::Exact).unwrap();
        assert!((got - 6.5 / 4.0).abs() < 1e-15);
        assert!(reference_norm(&[1.0; 9], &[1.0; 9], ReferenceMode::Exact).is_err());
        let sampled = reference_norm(&a, &[1.0, 0.0, 0.0, 0.0], ReferenceMode::Sampled { trials: 40_000, seed: 1 }).unwrap();
        assert!((sampled - 6.5 / 4.0).abs() < 0.02);
    }

    #[test]
    fn averages_examples() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = equivalence_averages_check(&id, ReferenceMode::Exact).unwrap();
        let root2 = std::f64::consts::SQRT_2;
        // Maps 0, 1 (constant) see one diagonal entry, i -> i sees both, i -> 1 - i none.
        assert!((r.affine_average - (2.0 + root2) / 4.0).abs() < 1e-15);
        assert!((r.permutation_average - root2 / 2.0).abs() < 1e-15);
        assert!(r.upper_ok);

        let ones = vec![vec![1.0; 3]; 3];
        let r = equivalence_averages_check(&ones, ReferenceMode::Exact).unwrap();
        assert!((r.affine_average - 3f64.sqrt()).abs() < 1e-14);
        assert!((r.permutation_average - 3f64.sqrt()).abs() < 1e-14);
        assert!(equivalence_averages_check(&vec![vec![1.0; 6]; 6], ReferenceMode::Exact).is_err());
    }

    #[test]
    fn distortion_for_unit_probes_is_symmetric() {
        let (spec, _) = EmbeddingSpec::affine(weights_preset("power:1.5", 5).unwrap(), 0.25, &sphere_points(5, 20, 1), 2).unwrap();
        let units: Vec<f64> = (0..5)
            .map(|i| {
                let mut e = vec![0.0; 5];
                e[i] = 1.0;
                psi_norm(&spec, &e).unwrap()
            })
            .collect();
        for u in &units {
            assert!((u - units[0]).abs() < 1e-12 * units[0]);
        }
        assert!(distortion_report(&spec, 0, 1).is_err());
        let r = distortion_report(&spec, 30, 1).unwrap();
        assert!(r.distortion >= 1.0);
    }

    #[test]
    fn spec_json_round_trip() {
        let (spec, _) = EmbeddingSpec::affine(vec![1.0, 2.0, 0.5], 0.25, &sphere_points(3, 5, 0), 9).unwrap();
        let text = serde_json::to_string(&spec.to_json().unwrap()).unwrap();
        let back = EmbeddingSpec::from_json(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.signs(), spec.signs());
        assert_eq!(back.weights(), spec.weights());
        let x = [0.2, -0.4, 1.0];
        assert_eq!(psi(&back, &x).unwrap(), psi(&spec, &x).unwrap());
    }

    #[test]
    fn sweep_rows() {
        let rows = embed_sweep(&[2, 3], "ones", 0.25, 10, 20, 1).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![2, 3]);
        assert!(rows.iter().all(|r| r.signs <= SIGN_BUDGET * r.n && r.distortion >= 1.0));
    }

    #[test]
    fn weight_presets() {
        assert_eq!(weights_preset("ones", 3).unwrap(), vec![1.0; 3]);
        let w = weights_preset("power:2", 4).unwrap();
        assert!(w.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(weights_preset("power:x", 2).is_err());
        assert!(weights_preset("bogus", 2).is_err());
    }
}
