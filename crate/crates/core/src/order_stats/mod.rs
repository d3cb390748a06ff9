//! Order statistics of bivariate functions `a: {1..n} x Omega -> R`.
//!
//! The product space `{1..n} x Omega` carries counting measure times `mu`, so
//! atom `(i, w)` has mass `mu(w)` and total mass is `n`. All values are stored
//! as absolute values.

mod bounds;
mod reduction;

pub use bounds::{
    check_bounds, expected_sum, BoundReport, BoundRow, ExpectationMode, SumEstimate,
};
pub use reduction::{averaged_function, verify_reduction, AveragedFunction, ReductionReport};

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exact;
use crate::family::{Atom, WeightedSpace, MASS_TOL};

/// An `n x |Omega|` table of nonnegative values over a weighted codomain.
#[derive(Clone, Debug)]
pub struct BivariateFunction {
    n: usize,
    codomain: WeightedSpace,
    values: Vec<f64>,
}

impl BivariateFunction {
    pub fn new(codomain: WeightedSpace, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("bivariate function needs at least one row"));
        }
        let m = codomain.len();
        let mut values = Vec::with_capacity(rows.len() * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, codomain has {m} atoms",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("row {i} has a non-finite entry")));
                }
                values.push(v.abs());
            }
        }
        Ok(BivariateFunction {
            n: rows.len(),
            codomain,
            values,
        })
    }

    /// A matrix over the uniform codomain of its column count.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 {
            return Err(Error::invalid("matrix needs at least one column"));
        }
        Self::new(WeightedSpace::uniform(cols), rows)
    }

    pub fn constant(n: usize, codomain: WeightedSpace, value: f64) -> Result<Self> {
        let m = codomain.len();
        Self::new(codomain, vec![vec![value; m]; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn codomain(&self) -> &WeightedSpace {
        &self.codomain
    }

    pub fn atoms(&self) -> usize {
        self.codomain.len()
    }

    /// Row-major values; atom `(i, w)` sits at `i * atoms + w`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, w: usize) -> f64 {
        self.values[i * self.atoms() + w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.atoms())
    }

    fn atom_mass(&self, atom: usize) -> f64 {
        self.codomain.weight(atom % self.atoms())
    }

    fn atom_mass_exact(&self, atom: usize) -> Option<&BigRational> {
        self.codomain.exact_weights().map(|w| &w[atom % self.atoms()])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = (*v * factor).abs();
        }
        out
    }

    /// Integer view of the table when every entry is an integer below 2^53.
    pub(crate) fn integer_values(&self) -> Option<Vec<i64>> {
        const LIMIT: f64 = 9_007_199_254_740_992.0;
        self.values
            .iter()
            .map(|&v| (v.fract() == 0.0 && v < LIMIT).then_some(v as i64))
            .collect()
    }

    /// Atom indices by value descending, then row ascending, then atom ascending.
    fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&x, &y| cmp_desc(self.values[x], self.values[y]).then(x.cmp(&y)));
        order
    }
}

fn cmp_desc(x: f64, y: f64) -> Ordering {
    y.partial_cmp(&x).expect("values are finite")
}

/// The `k`-th largest entry of `values`, counted with multiplicity (`k >= 1`).
pub fn kmax(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > values.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: values.len(),
        });
    }
    let mut v = values.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, |a, b| cmp_desc(*a, *b));
    Ok(*kth)
}

/// Sum of the `ell` largest entries; reorders `scratch`.
pub(crate) fn top_sum(scratch: &mut [f64], ell: usize) -> f64 {
    debug_assert!(ell >= 1 && ell <= scratch.len());
    if ell < scratch.len() {
        scratch.select_nth_unstable_by(ell - 1, |a, b| cmp_desc(*a, *b));
    }
    scratch[..ell].iter().sum()
}

pub(crate) fn top_sum_i64(scratch: &mut [i64], ell: usize) -> i128 {
    if ell < scratch.len() {
        scratch.select_nth_unstable_by(ell - 1, |a, b| b.cmp(a));
    }
    scratch[..ell].iter().map(|&v| v as i128).sum()
}

/// `sum_{k=1}^{ell} kmax_i a(i, g(i))`.
pub fn order_stat_sum(a: &BivariateFunction, g: &[Atom], ell: usize) -> Result<f64> {
    check_ell(a, ell)?;
    if g.len() != a.n {
        return Err(Error::invalid(format!("map has {} entries, expected {}", g.len(), a.n)));
    }
    let m = a.atoms();
    let mut scratch = Vec::with_capacity(a.n);
    for (i, &w) in g.iter().enumerate() {
        if w as usize >= m {
            return Err(Error::invalid(format!("map entry {w} is not an atom")));
        }
        scratch.push(a.values[i * m + w as usize]);
    }
    Ok(top_sum(&mut scratch, ell))
}

pub(crate) fn check_ell(a: &BivariateFunction, ell: usize) -> Result<()> {
    if ell == 0 || ell > a.n {
        return Err(Error::invalid(format!("ell must lie in 1..={}, got {ell}", a.n)));
    }
    Ok(())
}

/// A right-open step function on `[0, total)` with decreasing levels.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    /// `breakpoints[0] = 0`, `levels[j]` holds on `[breakpoints[j], breakpoints[j+1])`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn total_length(&self) -> f64 {
        *self.breakpoints.last().expect("at least the origin")
    }

    pub fn plateaus(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .map(|(j, &v)| (self.breakpoints[j], self.breakpoints[j + 1], v))
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.plateaus()
            .find(|&(_, hi, _)| t < hi)
            .map_or(0.0, |(_, _, v)| v)
    }

    /// `int_0^ell f`, splitting the plateau that contains `ell`.
    pub fn integral(&self, ell: f64) -> f64 {
        let mut acc = 0.0;
        for (lo, hi, v) in self.plateaus() {
            if ell <= lo {
                break;
            }
            acc += v * (hi.min(ell) - lo);
        }
        acc
    }

    /// Lebesgue length of `{f > s}`.
    pub fn length_above(&self, s: f64) -> f64 {
        self.plateaus()
            .filter(|&(_, _, v)| v > s)
            .map(|(lo, hi, _)| hi - lo)
            .sum()
    }
}

/// The decreasing rearrangement `a*` on `[0, n]`; plateau lengths are the atom
/// masses, equal neighbouring levels are merged.
pub fn decreasing_rearrangement(a: &BivariateFunction) -> StepFunction {
    let mut breakpoints = vec![0.0];
    let mut levels: Vec<f64> = Vec::new();
    let mut cum = 0.0;
    for atom in a.descending_order() {
        let mass = a.atom_mass(atom);
        if mass == 0.0 {
            continue;
        }
        cum += mass;
        let v = a.values[atom];
        if levels.last() == Some(&v) {
            *breakpoints.last_mut().unwrap() = cum;
        } else {
            levels.push(v);
            breakpoints.push(cum);
        }
    }
    // Pin the right end; the masses of each row sum to one.
    if let Some(last) = breakpoints.last_mut() {
        if (*last - a.n as f64).abs() <= MASS_TOL * a.n as f64 {
            *last = a.n as f64;
        }
    }
    StepFunction {
        breakpoints,
        levels,
    }
}

/// `int_0^ell a*(t) dt` for `ell` in `(0, n]`.
pub fn integral_rearrangement(a: &BivariateFunction, ell: f64) -> Result<f64> {
    if !(ell > 0.0 && ell <= a.n as f64) {
        return Err(Error::invalid(format!("ell must lie in (0, {}], got {ell}", a.n)));
    }
    Ok(decreasing_rearrangement(a).integral(ell))
}

/// Exact `int_0^ell a*`, available when the codomain weights are simple rationals.
pub fn integral_rearrangement_exact(a: &BivariateFunction, ell: &BigRational) -> Option<BigRational> {
    let weights = a.codomain.exact_weights()?;
    let m = a.atoms();
    let mut remaining = ell.clone();
    let mut acc = BigRational::zero();
    for atom in a.descending_order() {
        if !remaining.is_positive() {
            break;
        }
        let mass = &weights[atom % m];
        let take = if *mass < remaining { mass.clone() } else { remaining.clone() };
        acc += exact::from_f64(a.values[atom]) * &take;
        remaining -= take;
    }
    Some(acc)
}

/// Order-preserving perturbation with pairwise distinct values.
///
/// Atoms with equal values are ranked by atom index (row-major), lower index
/// lower value, and spread upward inside the gap to the next larger value, so
/// every strict inequality of `a` survives.
pub fn strictify(a: &BivariateFunction) -> BivariateFunction {
    let mut order: Vec<usize> = (0..a.values.len()).collect();
    order.sort_by(|&x, &y| a.values[x].partial_cmp(&a.values[y]).unwrap().then(x.cmp(&y)));
    let mut out = a.clone();
    let mut start = 0;
    while start < order.len() {
        let v = a.values[order[start]];
        let end = start + order[start..].iter().take_while(|&&x| a.values[x] == v).count();
        let k = end - start;
        if k > 1 {
            let next = order.get(end).map(|&x| a.values[x]);
            let gap = next.map_or(v.abs().max(1.0), |nv| nv - v);
            let step = gap / (k + 1) as f64;
            let mut prev = f64::NEG_INFINITY;
            for (r, &atom) in order[start..end].iter().enumerate() {
                let mut b = v + r as f64 * step;
                if b <= prev {
                    b = prev.next_up();
                }
                debug_assert!(next.is_none_or(|nv| b < nv), "tie group overflowed its gap");
                out.values[atom] = b;
                prev = b;
            }
        }
        start = end;
    }
    out
}

/// Atoms of the smallest upper level set with mass at least `t`.
#[derive(Clone, Debug)]
pub struct LevelSet {
    /// Atom indices from the largest value down.
    pub atoms: Vec<usize>,
    pub mass: f64,
    pub mass_exact: Option<BigRational>,
    /// The last atom added, which may overshoot `t`.
    pub boundary: Option<usize>,
}

impl LevelSet {
    pub fn contains(&self, atom: usize) -> bool {
        self.atoms.contains(&atom)
    }

    pub fn indicator(&self, total_atoms: usize) -> Vec<bool> {
        let mut mask = vec![false; total_atoms];
        for &x in &self.atoms {
            mask[x] = true;
        }
        mask
    }
}

/// `h(t)`: walk atoms from the largest value down and stop as soon as the
/// accumulated mass reaches `t`. Ties are taken in row-major order, which is
/// irrelevant for strictified input.
pub fn level_set(a: &BivariateFunction, t: f64) -> Result<LevelSet> {
    if !(0.0..=a.n as f64).contains(&t) {
        return Err(Error::invalid(format!("t must lie in [0, {}], got {t}", a.n)));
    }
    let exact_t = a
        .codomain
        .exact_weights()
        .map(|_| exact::recover(t, exact::MAX_DENOMINATOR).unwrap_or_else(|| exact::from_f64(t)));
    let mut set = LevelSet {
        atoms: Vec::new(),
        mass: 0.0,
        mass_exact: exact_t.as_ref().map(|_| BigRational::zero()),
        boundary: None,
    };
    if t == 0.0 {
        return Ok(set);
    }
    for atom in a.descending_order() {
        set.atoms.push(atom);
        set.boundary = Some(atom);
        set.mass += a.atom_mass(atom);
        let reached = match (&mut set.mass_exact, &exact_t) {
            (Some(me), Some(te)) => {
                *me += a.atom_mass_exact(atom).expect("exact codomain");
                *me >= *te
            }
            _ => set.mass >= t - MASS_TOL,
        };
        if reached {
            break;
        }
    }
    if let Some(me) = &set.mass_exact {
        set.mass = exact::to_f64(me);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed() -> BivariateFunction {
        let space = WeightedSpace::new(vec![0.25, 0.75]).unwrap();
        BivariateFunction::new(space, vec![vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap()
    }

    fn identity2() -> BivariateFunction {
        BivariateFunction::from_matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn kmax_examples() {
        assert_eq!(kmax(&[3.0, 1.0, 2.0], 2).unwrap(), 2.0);
        assert_eq!(kmax(&[5.0, 5.0, 1.0], 2).unwrap(), 5.0);
        assert_eq!(kmax(&[7.5], 1).unwrap(), 7.5);
        assert!(matches!(kmax(&[1.0], 2), Err(Error::IndexOutOfRange { .. })));
        assert!(kmax(&[1.0], 0).is_err());
    }

    #[test]
    fn rearrangement_examples() {
        let id = decreasing_rearrangement(&identity2());
        assert_eq!(id.levels(), &[1.0, 0.0]);
        assert_eq!(id.breakpoints(), &[0.0, 1.0, 2.0]);

        let s = decreasing_rearrangement(&skewed());
        assert_eq!(s.levels(), &[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(s.breakpoints(), &[0.0, 0.25, 1.0, 1.25, 2.0]);

        let c = BivariateFunction::constant(3, WeightedSpace::uniform(4), 7.0).unwrap();
        let r = decreasing_rearrangement(&c);
        assert_eq!(r.levels(), &[7.0]);
        assert_eq!(r.breakpoints(), &[0.0, 3.0]);
    }

    #[test]
    fn integral_examples() {
        assert_eq!(integral_rearrangement(&skewed(), 1.0).unwrap(), 3.25);
        let ones = BivariateFunction::constant(3, WeightedSpace::uniform(2), 1.0).unwrap();
        for ell in [0.5, 1.0, 2.75, 3.0] {
            assert!((integral_rearrangement(&ones, ell).unwrap() - ell).abs() < 1e-15);
        }
        assert!(integral_rearrangement(&ones, 0.0).is_err());
        assert!(integral_rearrangement(&ones, 3.5).is_err());
        let exact = integral_rearrangement_exact(&skewed(), &exact::int(1)).unwrap();
        assert_eq!(exact, exact::ratio(13, 4));
    }

    #[test]
    fn matrix_integral_is_scaled_prefix_sum() {
        // (1/N) sum_{j <= ell N} s(j) for a 3 x 4 matrix.
        let rows = vec![
            vec![5.0, 1.0, 0.0, 2.0],
            vec![3.0, 3.0, 9.0, 1.0],
            vec![4.0, 0.0, 6.0, 2.0],
        ];
        let mut s: Vec<f64> = rows.iter().flatten().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let a = BivariateFunction::from_matrix(rows).unwrap();
        for ell in 1..=3 {
            let expected: f64 = s[..ell * 4].iter().sum::<f64>() / 4.0;
            assert!((integral_rearrangement(&a, ell as f64).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn order_stat_sum_examples() {
        assert_eq!(order_stat_sum(&identity2(), &[0, 1], 1).unwrap(), 1.0);
        assert_eq!(order_stat_sum(&identity2(), &[1, 0], 2).unwrap(), 0.0);
        assert_eq!(order_stat_sum(&skewed(), &[0, 1], 2).unwrap(), 7.0);
        assert!(order_stat_sum(&skewed(), &[0, 1], 3).is_err());
        assert!(order_stat_sum(&skewed(), &[0, 2], 1).is_err());
    }

    #[test]
    fn negative_entries_are_absolute() {
        let a = BivariateFunction::from_matrix(vec![vec![-3.0, 2.0]]).unwrap();
        assert_eq!(a.values(), &[3.0, 2.0]);
        assert!(BivariateFunction::from_matrix(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn strictify_examples() {
        let distinct = skewed();
        assert_eq!(strictify(&distinct).values(), distinct.values());

        let tied = BivariateFunction::from_matrix(vec![vec![5.0, 1.0], vec![7.0, 5.0]]).unwrap();
        let b = strictify(&tied);
        let (x, y) = (b.value(0, 0), b.value(1, 1));
        assert_ne!(x, y);
        for v in [x, y] {
            assert!(v > 1.0 && v < 7.0);
        }
        assert!(x < y, "lower atom index ranks lower");

        let c = BivariateFunction::constant(2, WeightedSpace::uniform(3), 2.0).unwrap();
        let b = strictify(&c);
        assert!(b.values().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn level_set_examples() {
        let a = strictify(&skewed());
        let all = level_set(&a, 2.0).unwrap();
        assert_eq!(all.atoms.len(), 4);
        assert_eq!(all.mass, 2.0);
        assert!(level_set(&a, 0.0).unwrap().atoms.is_empty());
        let half = level_set(&a, 0.5).unwrap();
        assert_eq!(half.atoms, vec![0, 3]);
        assert_eq!(half.mass, 1.0);
        assert_eq!(half.mass_exact, Some(exact::int(1)));
        assert_eq!(half.boundary, Some(3));
        assert!(level_set(&a, 2.5).is_err());
    }
}
