use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::{check_ell, integral_rearrangement, integral_rearrangement_exact, top_sum, top_sum_i64};
use super::BivariateFunction;
use crate::error::{Error, Result};
use crate::exact;
use crate::family::{Atom, MapFamily, MASS_TOL};
use crate::rng::{self, Estimate};

/// Relative tolerance of floating bound comparisons.
pub const FLOAT_TOL: f64 = 1e-9;
/// Monte Carlo verdicts allow this many standard errors of slack.
pub const MC_SIGMAS: f64 = 4.0;

const MAP_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectationMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SumEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Exact value when every weight is a simple rational.
    pub exact: Option<BigRational>,
    pub trials: u64,
}

impl From<Estimate> for SumEstimate {
    fn from(e: Estimate) -> Self {
        SumEstimate {
            value: e.value,
            stderr: e.stderr,
            exact: None,
            trials: e.trials,
        }
    }
}

pub(crate) fn check_compatible(a: &BivariateFunction, family: &MapFamily) -> Result<()> {
    if a.n() != family.domain_size() {
        return Err(Error::invalid(format!(
            "function has {} rows but maps have {} entries",
            a.n(),
            family.domain_size()
        )));
    }
    let (fa, fb) = (a.codomain().weights(), family.codomain().weights());
    if fa.len() != fb.len() || fa.iter().zip(fb).any(|(x, y)| (x - y).abs() > MASS_TOL) {
        return Err(Error::invalid("function and family live on different codomains"));
    }
    Ok(())
}

/// `E_P sum_{k=1}^{ell} kmax_i a(i, g(i))`.
pub fn expected_sum(
    a: &BivariateFunction,
    family: &MapFamily,
    ell: usize,
    mode: ExpectationMode,
) -> Result<SumEstimate> {
    check_ell(a, ell)?;
    check_compatible(a, family)?;
    match mode {
        ExpectationMode::Exact => exact_expectation(a, family, ell),
        ExpectationMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::invalid("Monte Carlo needs at least one trial"));
            }
            Ok(sampled_expectation(a, family, ell, trials, seed).into())
        }
    }
}

fn sampled_expectation(
    a: &BivariateFunction,
    family: &MapFamily,
    ell: usize,
    trials: u64,
    seed: u64,
) -> Estimate {
    let n = a.n();
    let m = a.atoms();
    let values = a.values();
    rng::monte_carlo(
        trials,
        seed,
        ell as u64,
        || (vec![0 as Atom; n], vec![0.0; n]),
        |rng, (map, scratch)| {
            family.sample_into(rng, map);
            for (i, &w) in map.iter().enumerate() {
                scratch[i] = values[i * m + w as usize];
            }
            top_sum(scratch, ell)
        },
    )
}

fn exact_expectation(a: &BivariateFunction, family: &MapFamily, ell: usize) -> Result<SumEstimate> {
    let n = a.n();
    let m = a.atoms();
    let maps = family.weights()?.len();
    let map_at = |g: usize| family.map(g).expect("index in range");

    if let (Some(ints), Some(ew)) = (a.integer_values(), family.exact_weights()) {
        let per_map = |g: usize, scratch: &mut Vec<i64>| {
            scratch.clear();
            scratch.extend(map_at(g).iter().enumerate().map(|(i, &w)| ints[i * m + w as usize]));
            top_sum_i64(scratch, ell)
        };
        let exact = if let Some(w) = family.uniform_weight() {
            let total: i128 = chunks(maps)
                .into_par_iter()
                .map(|(lo, hi)| {
                    let mut scratch = Vec::with_capacity(n);
                    (lo..hi).map(|g| per_map(g, &mut scratch)).sum::<i128>()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .sum();
            exact::int(total) * w
        } else {
            chunks(maps)
                .into_par_iter()
                .map(|(lo, hi)| {
                    let mut scratch = Vec::with_capacity(n);
                    (lo..hi)
                        .map(|g| &ew[g] * exact::int(per_map(g, &mut scratch)))
                        .fold(BigRational::zero(), |acc, x| acc + x)
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(BigRational::zero(), |acc, x| acc + x)
        };
        return Ok(SumEstimate {
            value: exact::to_f64(&exact),
            stderr: 0.0,
            exact: Some(exact),
            trials: 0,
        });
    }

    if let Some(ew) = family.exact_weights() {
        // Rational entries: exact dyadic values of the floats.
        let exact = chunks(maps)
            .into_par_iter()
            .map(|(lo, hi)| {
                let mut idx: Vec<usize> = Vec::with_capacity(n);
                let mut acc = BigRational::zero();
                for g in lo..hi {
                    let map = map_at(g);
                    idx.clear();
                    idx.extend(map.iter().enumerate().map(|(i, &w)| i * m + w as usize));
                    idx.sort_by(|&x, &y| a.values()[y].partial_cmp(&a.values()[x]).unwrap());
                    let s: BigRational = idx[..ell].iter().map(|&x| exact::from_f64(a.values()[x])).sum();
                    acc += s * &ew[g];
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(BigRational::zero(), |acc, x| acc + x);
        return Ok(SumEstimate {
            value: exact::to_f64(&exact),
            stderr: 0.0,
            exact: Some(exact),
            trials: 0,
        });
    }

    let weights = family.weights()?;
    let terms: Vec<f64> = chunks(maps)
        .into_par_iter()
        .flat_map_iter(|(lo, hi)| {
            let mut scratch = Vec::with_capacity(n);
            (lo..hi)
                .map(|g| {
                    scratch.clear();
                    scratch.extend(map_at(g).iter().enumerate().map(|(i, &w)| a.values()[i * m + w as usize]));
                    weights[g] * top_sum(&mut scratch, ell)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(SumEstimate {
        value: exact::pairwise_sum(&terms),
        stderr: 0.0,
        exact: None,
        trials: 0,
    })
}

pub(crate) fn chunks(len: usize) -> Vec<(usize, usize)> {
    (0..len.div_ceil(MAP_CHUNK))
        .map(|c| (c * MAP_CHUNK, ((c + 1) * MAP_CHUNK).min(len)))
        .collect()
}

/// Both sides of `c int_0^ell a* <= E S(a) <= C int_0^ell a*`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub atoms: usize,
    pub ell: usize,
    pub cg: f64,
    /// `c = 1 / (48 (1 + 2 C_G)^2)`.
    pub lower_constant: f64,
    /// `C = 6 (1 + 2 C_G)`.
    pub upper_constant: f64,
    pub integral: f64,
    pub expectation: f64,
    pub stderr: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub exact: bool,
    /// `E / (c * integral)`; at least one when the lower bound holds.
    pub lower_slack: f64,
    /// `C * integral / E`; at least one when the upper bound holds.
    pub upper_slack: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }

    pub fn row(&self) -> BoundRow {
        BoundRow {
            n: self.n,
            n_or_atoms: self.atoms,
            ell: self.ell,
            cg: self.cg,
            c: self.lower_constant,
            upper_c: self.upper_constant,
            integral: self.integral,
            expectation: self.expectation,
            stderr: self.stderr,
            lower_ok: self.lower_ok,
            upper_ok: self.upper_ok,
        }
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} atoms={} ell={} C_G={}: {:.6e} * {:.6} <= {:.6} (+/- {:.2e}) <= {} * {:.6} [lower {}, upper {}]",
            self.n,
            self.atoms,
            self.ell,
            self.cg,
            self.lower_constant,
            self.integral,
            self.expectation,
            self.stderr,
            self.upper_constant,
            self.integral,
            if self.lower_ok { "ok" } else { "FAIL" },
            if self.upper_ok { "ok" } else { "FAIL" },
        )
    }
}

/// CSV layout of a [`BoundReport`].
#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub n: usize,
    #[serde(rename = "N_or_atoms")]
    pub n_or_atoms: usize,
    pub ell: usize,
    #[serde(rename = "CG")]
    pub cg: f64,
    pub c: f64,
    #[serde(rename = "C")]
    pub upper_c: f64,
    pub integral: f64,
    pub expectation: f64,
    pub stderr: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// The pair constant as a rational: simple fractions such as `4/3` are
/// recovered from their float, anything else is taken at its dyadic value.
pub(crate) fn cg_rational(cg: f64) -> BigRational {
    exact::recover(cg, 1 << 20).unwrap_or_else(|| exact::from_f64(cg))
}

pub(crate) fn check_cg(cg: f64) -> Result<()> {
    if !(cg.is_finite() && cg > 0.0) {
        return Err(Error::invalid(format!("C_G must be positive and finite, got {cg}")));
    }
    Ok(())
}

/// Certifies both sides of the order-statistic bound for one `ell`.
///
/// Returns [`Error::BoundViolation`] with the full report when either side
/// fails. Exact arithmetic is used whenever the entries and weights allow it.
pub fn check_bounds(
    a: &BivariateFunction,
    family: &MapFamily,
    ell: usize,
    cg: f64,
    mode: ExpectationMode,
) -> Result<BoundReport> {
    check_cg(cg)?;
    let estimate = expected_sum(a, family, ell, mode)?;
    let integral = integral_rearrangement(a, ell as f64)?;
    let one_plus = 1.0 + 2.0 * cg;
    let lower_constant = 1.0 / (48.0 * one_plus * one_plus);
    let upper_constant = 6.0 * one_plus;

    let exact_integral = integral_rearrangement_exact(a, &exact::int(ell as i128));
    let (lower_ok, upper_ok, exact) = match (&estimate.exact, &exact_integral) {
        (Some(e), Some(i)) => {
            let q = BigRational::one() + exact::int(2) * cg_rational(cg);
            let c = (exact::int(48) * &q * &q).recip();
            let upper = exact::int(6) * &q;
            (c * i <= *e, *e <= upper * i, true)
        }
        _ => {
            let e = estimate.value;
            let margin = match mode {
                ExpectationMode::Exact => FLOAT_TOL * e.abs().max(integral.abs()).max(1.0),
                ExpectationMode::MonteCarlo { .. } => MC_SIGMAS * estimate.stderr,
            };
            (
                lower_constant * integral <= e + margin,
                e - margin <= upper_constant * integral,
                false,
            )
        }
    };
    let ratio = |num: f64, den: f64| if den == 0.0 { if num == 0.0 { 1.0 } else { f64::INFINITY } } else { num / den };
    let report = BoundReport {
        n: a.n(),
        atoms: a.atoms(),
        ell,
        cg,
        lower_constant,
        upper_constant,
        integral,
        expectation: estimate.value,
        stderr: estimate.stderr,
        lower_ok,
        upper_ok,
        exact,
        lower_slack: ratio(estimate.value, lower_constant * integral),
        upper_slack: ratio(upper_constant * integral, estimate.value),
    };
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::BoundViolation(Box::new(report)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{full_function_family, symmetric_group, WeightedSpace};

    fn identity2() -> BivariateFunction {
        BivariateFunction::from_matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn skewed() -> (BivariateFunction, MapFamily) {
        let space = WeightedSpace::new(vec![0.25, 0.75]).unwrap();
        let a = BivariateFunction::new(space.clone(), vec![vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap();
        (a, full_function_family(2, space).unwrap())
    }

    #[test]
    fn expected_sum_examples() {
        let sym2 = symmetric_group(2).unwrap();
        let e = expected_sum(&identity2(), &sym2, 1, ExpectationMode::Exact).unwrap();
        assert_eq!(e.exact, Some(exact::ratio(1, 2)));

        let (a, fam) = skewed();
        let e = expected_sum(&a, &fam, 1, ExpectationMode::Exact).unwrap();
        assert_eq!(e.exact, Some(exact::ratio(49, 16)));
        assert_eq!(e.value, 3.0625);
    }

    #[test]
    fn constant_function_gives_ell() {
        let fam = symmetric_group(4).unwrap();
        let ones = BivariateFunction::constant(4, WeightedSpace::uniform(4), 1.0).unwrap();
        for ell in 1..=4 {
            let e = expected_sum(&ones, &fam, ell, ExpectationMode::Exact).unwrap();
            assert_eq!(e.exact, Some(exact::int(ell as i128)));
        }
    }

    #[test]
    fn rational_entries_take_the_exact_path() {
        let sym2 = symmetric_group(2).unwrap();
        let a = BivariateFunction::from_matrix(vec![vec![0.5, 0.25], vec![0.0, 1.5]]).unwrap();
        let e = expected_sum(&a, &sym2, 1, ExpectationMode::Exact).unwrap();
        // identity: max(0.5, 1.5) = 1.5; swap: max(0.25, 0) = 0.25
        assert_eq!(e.exact, Some(exact::ratio(7, 8)));
    }

    #[test]
    fn monte_carlo_converges() {
        let (a, fam) = skewed();
        let mode = ExpectationMode::MonteCarlo { trials: 200_000, seed: 5 };
        let e = expected_sum(&a, &fam, 1, mode).unwrap();
        assert!((e.value - 3.0625).abs() < MC_SIGMAS * e.stderr, "{e:?}");
        let implicit = full_function_family(2, a.codomain().clone()).unwrap();
        assert!(expected_sum(&a, &implicit, 2, mode).is_ok());
    }

    #[test]
    fn check_bounds_examples() {
        let sym2 = symmetric_group(2).unwrap();
        let r = check_bounds(&identity2(), &sym2, 1, 2.0, ExpectationMode::Exact).unwrap();
        assert_eq!((r.expectation, r.integral), (0.5, 1.0));
        assert_eq!(r.lower_constant, 1.0 / 1200.0);
        assert_eq!(r.upper_constant, 30.0);
        assert!(r.exact);

        let (a, fam) = skewed();
        let r = check_bounds(&a, &fam, 1, 1.0, ExpectationMode::Exact).unwrap();
        assert_eq!((r.expectation, r.integral), (3.0625, 3.25));
        assert_eq!(r.lower_constant, 1.0 / 432.0);
        assert_eq!(r.upper_constant, 18.0);

        let zero = BivariateFunction::constant(2, WeightedSpace::uniform(2), 0.0).unwrap();
        let r = check_bounds(&zero, &sym2, 2, 2.0, ExpectationMode::Exact).unwrap();
        assert_eq!((r.expectation, r.integral), (0.0, 0.0));
        assert!(r.passed());
    }

    #[test]
    fn violation_carries_report() {
        // An absurd C_G shrinks nothing, but a wrong family breaks the lower bound:
        // a deterministic map never sees the large entry.
        let fam = MapFamily::explicit(2, WeightedSpace::uniform(2), vec![vec![1, 0]], vec![1.0]).unwrap();
        let err = check_bounds(&identity2(), &fam, 1, 1.0, ExpectationMode::Exact).unwrap_err();
        match err {
            Error::BoundViolation(report) => {
                assert!(!report.lower_ok);
                assert!(report.upper_ok);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let sym2 = symmetric_group(2).unwrap();
        assert!(check_bounds(&identity2(), &sym2, 0, 1.0, ExpectationMode::Exact).is_err());
        assert!(check_bounds(&identity2(), &sym2, 1, 0.0, ExpectationMode::Exact).is_err());
        let sym3 = symmetric_group(3).unwrap();
        assert!(expected_sum(&identity2(), &sym3, 1, ExpectationMode::Exact).is_err());
        let implicit = full_function_family(30, WeightedSpace::uniform(2)).unwrap();
        let big = BivariateFunction::constant(30, WeightedSpace::uniform(2), 1.0).unwrap();
        assert!(matches!(
            expected_sum(&big, &implicit, 1, ExpectationMode::Exact),
            Err(Error::ImplicitFamily)
        ));
    }
}
