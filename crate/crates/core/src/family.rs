//! Weighted map families `G` of maps `{1..n} -> Omega` and the checks of the
//! marginal condition `P(g(i) = j) = mu(j)` and the pair condition
//! `P(g(i1) = j1, g(i2) = j2) <= C_G mu(j1) mu(j2)`.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, recover_distribution};
use crate::field::FiniteField;

/// Absolute tolerance for probability comparisons on the floating path.
pub const PROB_TOL: f64 = 1e-9;
/// Tolerance on the total mass of a weight vector.
pub const MASS_TOL: f64 = 1e-12;
/// Largest `n` for which [`symmetric_group`] enumerates `n!` permutations.
pub const MAX_SYMMETRIC: usize = 10;
/// Largest `|Omega|^n` that [`full_function_family`] enumerates explicitly.
pub const MAX_EXPLICIT_MAPS: u64 = 10_000_000;

/// Map entries are atom indices; codomains are limited to `u16::MAX` atoms.
pub type Atom = u16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtomLabel {
    Int(i64),
    Text(String),
}

/// A finite probability space `(Omega, mu)`.
#[derive(Clone, Debug)]
pub struct WeightedSpace {
    labels: Vec<AtomLabel>,
    weights: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl WeightedSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let labels = (0..weights.len() as i64).map(AtomLabel::Int).collect();
        Self::with_labels(labels, weights)
    }

    pub fn with_labels(labels: Vec<AtomLabel>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weighted space needs at least one atom"));
        }
        if labels.len() != weights.len() {
            return Err(Error::invalid("atom labels and weights differ in length"));
        }
        if weights.len() > Atom::MAX as usize {
            return Err(Error::invalid("too many atoms"));
        }
        check_distribution(&weights, "atom weights")?;
        let exact = recover_distribution(&weights);
        Ok(WeightedSpace {
            labels,
            weights,
            exact,
        })
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size >= 1 && size <= Atom::MAX as usize);
        let w = exact::ratio(1, size as i64);
        WeightedSpace {
            labels: (0..size as i64).map(AtomLabel::Int).collect(),
            weights: vec![1.0 / size as f64; size],
            exact: Some(vec![w; size]),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.weights[atom]
    }

    pub fn exact_weights(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn labels(&self) -> &[AtomLabel] {
        &self.labels
    }

    pub fn is_uniform(&self) -> bool {
        match &self.exact {
            Some(w) => w.iter().all(|x| *x == w[0]),
            None => self.weights.iter().all(|&x| (x - self.weights[0]).abs() <= MASS_TOL),
        }
    }

    /// Inverse-CDF draw of one atom.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Atom {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return j as Atom;
            }
        }
        // Rounding left a sliver above the last partial sum.
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) as Atom
    }
}

fn check_distribution(weights: &[f64], what: &str) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid(format!("{what} must be finite and nonnegative")));
    }
    let total: f64 = exact::pairwise_sum(weights);
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::invalid(format!("{what} sum to {total}, not 1")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
struct ExactWeights {
    weights: Vec<BigRational>,
    /// Set when every map carries the same weight.
    uniform: Option<BigRational>,
}

#[derive(Clone, Debug)]
enum Storage {
    Explicit {
        /// Row-major `|G| x n`.
        maps: Vec<Atom>,
        weights: Vec<f64>,
        exact: Option<ExactWeights>,
    },
    /// `Omega^n` under the product measure, sampled coordinate-wise.
    Product,
}

/// A probability measure on a finite set of maps `{0..n} -> Omega`.
#[derive(Clone, Debug)]
pub struct MapFamily {
    domain_size: usize,
    codomain: WeightedSpace,
    storage: Storage,
}

impl MapFamily {
    pub fn explicit(
        domain_size: usize,
        codomain: WeightedSpace,
        maps: Vec<Vec<Atom>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if domain_size == 0 {
            return Err(Error::invalid("domain size must be positive"));
        }
        if maps.is_empty() || maps.len() != weights.len() {
            return Err(Error::invalid("need one weight per map and at least one map"));
        }
        check_distribution(&weights, "map weights")?;
        let mut flat = Vec::with_capacity(maps.len() * domain_size);
        for m in &maps {
            if m.len() != domain_size {
                return Err(Error::invalid(format!(
                    "map has {} entries, expected {domain_size}",
                    m.len()
                )));
            }
            if let Some(bad) = m.iter().find(|&&a| a as usize >= codomain.len()) {
                return Err(Error::invalid(format!("map entry {bad} is not an atom")));
            }
            flat.extend_from_slice(m);
        }
        let exact = recover_distribution(&weights).map(ExactWeights::new);
        Ok(MapFamily {
            domain_size,
            codomain,
            storage: Storage::Explicit {
                maps: flat,
                weights,
                exact,
            },
        })
    }

    /// Uniform weights over `maps`, stored flat and row-major.
    fn uniform_explicit(domain_size: usize, codomain: WeightedSpace, maps: Vec<Atom>) -> Self {
        let count = maps.len() / domain_size;
        let w = exact::ratio(1, count as i64);
        MapFamily {
            domain_size,
            codomain,
            storage: Storage::Explicit {
                maps,
                weights: vec![1.0 / count as f64; count],
                exact: Some(ExactWeights {
                    weights: vec![w.clone(); count],
                    uniform: Some(w),
                }),
            },
        }
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn codomain(&self) -> &WeightedSpace {
        &self.codomain
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.storage, Storage::Explicit { .. })
    }

    /// Number of maps with positive or zero weight; `None` for product samplers
    /// whose size does not fit in a `u64`.
    pub fn len(&self) -> Option<u64> {
        match &self.storage {
            Storage::Explicit { weights, .. } => Some(weights.len() as u64),
            Storage::Product => (self.codomain.len() as u64).checked_pow(self.domain_size as u32),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Iterator over `(map, weight)` of an explicit family.
    pub fn maps(&self) -> Result<impl ExactSizeIterator<Item = (&[Atom], f64)> + '_> {
        match &self.storage {
            Storage::Explicit { maps, weights, .. } => Ok(maps
                .chunks_exact(self.domain_size)
                .zip(weights.iter().copied())),
            Storage::Product => Err(Error::ImplicitFamily),
        }
    }

    pub fn map(&self, index: usize) -> Result<&[Atom]> {
        match &self.storage {
            Storage::Explicit { maps, .. } => {
                let n = self.domain_size;
                maps.get(index * n..(index + 1) * n)
                    .ok_or(Error::IndexOutOfRange {
                        index,
                        len: maps.len() / n,
                    })
            }
            Storage::Product => Err(Error::ImplicitFamily),
        }
    }

    pub fn weights(&self) -> Result<&[f64]> {
        match &self.storage {
            Storage::Explicit { weights, .. } => Ok(weights),
            Storage::Product => Err(Error::ImplicitFamily),
        }
    }

    pub fn exact_weights(&self) -> Option<&[BigRational]> {
        match &self.storage {
            Storage::Explicit { exact, .. } => exact.as_ref().map(|e| e.weights.as_slice()),
            Storage::Product => None,
        }
    }

    /// Common weight of every map, when the family is uniform and exact.
    pub fn uniform_weight(&self) -> Option<&BigRational> {
        match &self.storage {
            Storage::Explicit { exact, .. } => exact.as_ref().and_then(|e| e.uniform.as_ref()),
            Storage::Product => None,
        }
    }

    /// Draws one map according to `P` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Atom]) {
        debug_assert_eq!(out.len(), self.domain_size);
        match &self.storage {
            Storage::Product => {
                for slot in out.iter_mut() {
                    *slot = self.codomain.sample(rng);
                }
            }
            Storage::Explicit { maps, weights, .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = weights.len() - 1;
                for (g, &w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = g;
                        break;
                    }
                }
                let n = self.domain_size;
                out.copy_from_slice(&maps[pick * n..(pick + 1) * n]);
            }
        }
    }
}

impl ExactWeights {
    fn new(weights: Vec<BigRational>) -> Self {
        let uniform = weights
            .iter()
            .all(|w| *w == weights[0])
            .then(|| weights[0].clone());
        ExactWeights { weights, uniform }
    }
}

/// The `n^2` affine maps `i -> l*i + m` over `GF(n)`, uniformly weighted.
pub fn affine_family(field: &FiniteField) -> MapFamily {
    let n = field.order() as usize;
    let mut maps = Vec::with_capacity(n * n * n);
    for slope in field.elements() {
        for shift in field.elements() {
            for i in field.elements() {
                maps.push(field.add(field.mul(slope, i), shift) as Atom);
            }
        }
    }
    MapFamily::uniform_explicit(n, WeightedSpace::uniform(n), maps)
}

/// All `n!` permutations of `{0..n}` in lexicographic order, uniformly weighted.
pub fn symmetric_group(n: usize) -> Result<MapFamily> {
    if n == 0 {
        return Err(Error::invalid("symmetric group needs n >= 1"));
    }
    if n > MAX_SYMMETRIC {
        return Err(Error::DomainTooLarge {
            what: "symmetric group degree",
            size: n as u64,
            limit: MAX_SYMMETRIC as u64,
        });
    }
    let count: usize = (1..=n).product();
    let mut maps = Vec::with_capacity(count * n);
    let mut perm: Vec<Atom> = (0..n as Atom).collect();
    loop {
        maps.extend_from_slice(&perm);
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(MapFamily::uniform_explicit(n, WeightedSpace::uniform(n), maps))
}

pub(crate) fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|x| *x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// `Omega^n` with the product measure. Enumerated when `|Omega|^n` is at most
/// [`MAX_EXPLICIT_MAPS`], otherwise an iid coordinate sampler.
pub fn full_function_family(n: usize, codomain: WeightedSpace) -> Result<MapFamily> {
    if n == 0 {
        return Err(Error::invalid("domain size must be positive"));
    }
    let m = codomain.len();
    let count = (m as u64).checked_pow(n as u32).filter(|&c| c <= MAX_EXPLICIT_MAPS);
    let Some(count) = count else {
        return Ok(MapFamily {
            domain_size: n,
            codomain,
            storage: Storage::Product,
        });
    };
    let count = count as usize;
    let mut maps = Vec::with_capacity(count * n);
    let mut weights = Vec::with_capacity(count);
    let mut exact_w = codomain.exact_weights().map(|_| Vec::with_capacity(count));
    let mut current = vec![0 as Atom; n];
    for _ in 0..count {
        maps.extend_from_slice(&current);
        weights.push(current.iter().map(|&a| codomain.weight(a as usize)).product());
        if let (Some(ew), Some(cw)) = (exact_w.as_mut(), codomain.exact_weights()) {
            let w: BigRational = current
                .iter()
                .fold(BigRational::one(), |acc, &a| acc * &cw[a as usize]);
            ew.push(w);
        }
        // Odometer, last coordinate fastest.
        for slot in current.iter_mut().rev() {
            *slot += 1;
            if (*slot as usize) < m {
                break;
            }
            *slot = 0;
        }
    }
    // Floating products need not sum to one exactly; keep the invariant honest.
    let total = exact::pairwise_sum(&weights);
    for w in &mut weights {
        *w /= total;
    }
    Ok(MapFamily {
        domain_size: n,
        codomain,
        storage: Storage::Explicit {
            maps,
            weights,
            exact: exact_w.map(ExactWeights::new),
        },
    })
}

/// `n^2 / C_G`: the fewest maps a family with uniform marginals over `n` atoms
/// and pair constant `C_G` can have.
pub fn cardinality_lower_bound(n: usize, cg: f64) -> f64 {
    (n * n) as f64 / cg
}

/// A pair of `(index, atom)` positions.
pub type Witness = ((usize, usize), (usize, usize));

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub atoms: usize,
    pub family_size: u64,
    pub marginal_ok: bool,
    /// Largest `|P(g(i) = j) - mu(j)|`.
    pub marginal_deviation: f64,
    pub best_cg: f64,
    /// `best_cg` as a reduced fraction, when exact arithmetic was available.
    pub best_cg_exact: Option<String>,
    pub witness: Option<Witness>,
    pub cardinality_bound: Option<f64>,
    /// `|G| >= N^2 / C_G`; only evaluated for uniform codomains.
    pub cardinality_ok: Option<bool>,
    pub exact: bool,
    #[serde(skip)]
    pub best_cg_rational: Option<BigRational>,
}

impl ConditionReport {
    /// Both conditions hold with constant `cg`.
    pub fn passes(&self, cg: f64) -> bool {
        self.marginal_ok && self.best_cg <= cg + PROB_TOL && self.cardinality_ok != Some(false)
    }
}

enum PairMass {
    Counts(Vec<u64>, BigRational),
    Rationals(Vec<BigRational>),
    Floats,
}

pub fn verify_conditions(family: &MapFamily) -> Result<ConditionReport> {
    let Storage::Explicit { maps, weights, exact } = &family.storage else {
        return Err(Error::ImplicitFamily);
    };
    let n = family.domain_size;
    let m = family.codomain.len();
    let mu = family.codomain.weights();
    let mu_exact = family.codomain.exact_weights();
    let exact_ok = exact.is_some() && mu_exact.is_some();

    // Marginals P(g(i) = j), floats always and exactly when possible.
    let mut marginal = vec![0.0; n * m];
    let pair_index = |i1: usize, i2: usize, j1: usize, j2: usize| ((i1 * n + i2) * m + j1) * m + j2;
    let mut pair = vec![0.0; n * n * m * m];
    let mut pair_mass = match (exact_ok, exact) {
        (true, Some(ExactWeights { uniform: Some(w), .. })) => {
            PairMass::Counts(vec![0; n * n * m * m], w.clone())
        }
        (true, Some(_)) => PairMass::Rationals(vec![BigRational::zero(); n * n * m * m]),
        _ => PairMass::Floats,
    };
    for (g, map) in maps.chunks_exact(n).enumerate() {
        let w = weights[g];
        for (i1, &j1) in map.iter().enumerate() {
            let j1 = j1 as usize;
            marginal[i1 * m + j1] += w;
            for (i2, &j2) in map.iter().enumerate().skip(i1 + 1) {
                let idx = pair_index(i1, i2, j1, j2 as usize);
                pair[idx] += w;
                match &mut pair_mass {
                    PairMass::Counts(c, _) => c[idx] += 1,
                    PairMass::Rationals(r) => {
                        r[idx] += &exact.as_ref().expect("exact weights").weights[g];
                    }
                    PairMass::Floats => {}
                }
            }
        }
    }

    let mut marginal_deviation: f64 = 0.0;
    for i in 0..n {
        for j in 0..m {
            marginal_deviation = marginal_deviation.max((marginal[i * m + j] - mu[j]).abs());
        }
    }
    let marginal_ok = match (exact, mu_exact) {
        (Some(ew), Some(mu_e)) => {
            let mut ex = vec![BigRational::zero(); n * m];
            for (g, map) in maps.chunks_exact(n).enumerate() {
                for (i, &j) in map.iter().enumerate() {
                    ex[i * m + j as usize] += &ew.weights[g];
                }
            }
            (0..n).all(|i| (0..m).all(|j| ex[i * m + j] == mu_e[j]))
        }
        _ => marginal_deviation <= PROB_TOL,
    };

    // C_G = max P(g(i1)=j1, g(i2)=j2) / (mu(j1) mu(j2)) over i1 != i2.
    let mut best: Option<(f64, Option<BigRational>, Witness)> = None;
    for i1 in 0..n {
        for i2 in i1 + 1..n {
            for j1 in 0..m {
                for j2 in 0..m {
                    if mu[j1] == 0.0 || mu[j2] == 0.0 {
                        continue;
                    }
                    let idx = pair_index(i1, i2, j1, j2);
                    let witness = ((i1, j1), (i2, j2));
                    let (ratio_f, ratio_e) = match (&pair_mass, mu_exact) {
                        (PairMass::Counts(c, w), Some(mu_e)) => {
                            let p = w * exact::int(c[idx] as i128);
                            let r = p / (&mu_e[j1] * &mu_e[j2]);
                            (exact::to_f64(&r), Some(r))
                        }
                        (PairMass::Rationals(rs), Some(mu_e)) => {
                            let r = &rs[idx] / (&mu_e[j1] * &mu_e[j2]);
                            (exact::to_f64(&r), Some(r))
                        }
                        _ => (pair[idx] / (mu[j1] * mu[j2]), None),
                    };
                    let better = match &best {
                        None => true,
                        Some((bf, be, _)) => match (&ratio_e, be) {
                            (Some(re), Some(be)) => re > be,
                            _ => ratio_f > *bf,
                        },
                    };
                    if better {
                        best = Some((ratio_f, ratio_e, witness));
                    }
                }
            }
        }
    }
    let (best_cg, best_cg_rational, witness) = match best {
        Some((f, e, w)) => (f, e, Some(w)),
        // No index pairs (n = 1): the pair condition is vacuous.
        None => (1.0, exact_ok.then(BigRational::one), None),
    };

    let family_size = weights.len() as u64;
    let uniform_codomain = family.codomain.is_uniform();
    let (cardinality_bound, cardinality_ok) = if uniform_codomain && marginal_ok && best_cg > 0.0 {
        let bound = cardinality_lower_bound(m, best_cg);
        let ok = match &best_cg_rational {
            Some(cg) => exact::int(family_size as i128) * cg >= exact::int((m * m) as i128),
            None => family_size as f64 >= bound - PROB_TOL,
        };
        (Some(bound), Some(ok))
    } else {
        (None, None)
    };

    Ok(ConditionReport {
        n,
        atoms: m,
        family_size,
        marginal_ok,
        marginal_deviation,
        best_cg,
        best_cg_exact: best_cg_rational.as_ref().map(|r| r.to_string()),
        witness,
        cardinality_bound,
        cardinality_ok,
        exact: exact_ok,
        best_cg_rational,
    })
}

/// JSON wire format: `{"n", "atoms", "weights", "maps", "map_weights"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyJson {
    pub n: usize,
    pub atoms: Vec<AtomLabel>,
    pub weights: Vec<f64>,
    pub maps: Vec<Vec<Atom>>,
    pub map_weights: Vec<f64>,
}

impl MapFamily {
    pub fn to_json(&self) -> Result<FamilyJson> {
        let maps = self.maps()?.map(|(m, _)| m.to_vec()).collect();
        Ok(FamilyJson {
            n: self.domain_size,
            atoms: self.codomain.labels.clone(),
            weights: self.codomain.weights.clone(),
            maps,
            map_weights: self.weights()?.to_vec(),
        })
    }

    pub fn from_json(json: FamilyJson) -> Result<Self> {
        let codomain = WeightedSpace::with_labels(json.atoms, json.weights)?;
        MapFamily::explicit(json.n, codomain, json.maps, json.map_weights)
    }
}

/// Pair-probability lookup used by tests and the CLI.
pub fn pair_probability(family: &MapFamily, (i1, j1): (usize, usize), (i2, j2): (usize, usize)) -> Result<f64> {
    let mut p = 0.0;
    for (map, w) in family.maps()? {
        if map[i1] as usize == j1 && map[i2] as usize == j2 {
            p += w;
        }
    }
    Ok(p)
}

/// Parses `affine:9`, `sym:4`, `product:3x4` (domain 3, uniform codomain 4).
pub fn builtin(spec: &str) -> Result<MapFamily> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("builtin family `{spec}` lacks `kind:arg`")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid(format!("bad size `{s}` in `{spec}`")))
    };
    match kind {
        "affine" => {
            let n = parse(arg)?;
            Ok(affine_family(&crate::field::make_field(n as u64)?))
        }
        "sym" => symmetric_group(parse(arg)?),
        "product" => {
            let (n, m) = match arg.split_once('x') {
                Some((n, m)) => (parse(n)?, parse(m)?),
                None => {
                    let n = parse(arg)?;
                    (n, n)
                }
            };
            if m == 0 || m > Atom::MAX as usize {
                return Err(Error::invalid("codomain size out of range"));
            }
            full_function_family(n, WeightedSpace::uniform(m))
        }
        _ => Err(Error::invalid(format!("unknown builtin family `{kind}`"))),
    }
}
