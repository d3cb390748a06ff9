use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::bounds::{cg_rational, check_cg, check_compatible, chunks, expected_sum, ExpectationMode, FLOAT_TOL};
use super::{
    check_ell, integral_rearrangement, integral_rearrangement_exact, level_set, strictify,
    BivariateFunction, LevelSet,
};
use crate::error::{Error, Result};
use crate::exact;
use crate::family::MapFamily;

/// The cut-off function: the mean of `a*` over `[0, ell]` placed on `h(ell)`.
#[derive(Clone, Debug)]
pub struct AveragedFunction {
    pub function: BivariateFunction,
    pub level: LevelSet,
    pub value: f64,
    pub value_exact: Option<BigRational>,
}

/// Builds the averaged function of `a` for a strictified `a`. For inputs with
/// ties, the level set breaks them in row-major order.
pub fn averaged_function(a: &BivariateFunction, ell: usize) -> Result<AveragedFunction> {
    check_ell(a, ell)?;
    let level = level_set(a, ell as f64)?;
    averaged_on(a, ell, level)
}

fn averaged_on(a: &BivariateFunction, ell: usize, level: LevelSet) -> Result<AveragedFunction> {
    let value = integral_rearrangement(a, ell as f64)? / ell as f64;
    let value_exact = integral_rearrangement_exact(a, &exact::int(ell as i128))
        .map(|i| i / exact::int(ell as i128));
    let mut function = a.clone();
    let mask = level.indicator(a.values().len());
    for (v, inside) in function.values.iter_mut().zip(mask) {
        *v = if inside { value } else { 0.0 };
    }
    Ok(AveragedFunction {
        function,
        level,
        value,
        value_exact,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub n: usize,
    pub atoms: usize,
    pub ell: usize,
    pub cg: f64,
    /// `E S(a)`.
    pub original: f64,
    /// `E S(a~)`.
    pub averaged: f64,
    /// `1 / (6 + 12 C_G)`.
    pub lower_constant: f64,
    /// `8 + 16 C_G`.
    pub upper_constant: f64,
    pub level_mass: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub exact: bool,
}

impl ReductionReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

impl fmt::Display for ReductionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} ell={} C_G={}: {:.6e} * {:.6} <= {:.6} <= {} * {:.6} [lower {}, upper {}]",
            self.n,
            self.ell,
            self.cg,
            self.lower_constant,
            self.original,
            self.averaged,
            self.upper_constant,
            self.original,
            if self.lower_ok { "ok" } else { "FAIL" },
            if self.upper_ok { "ok" } else { "FAIL" },
        )
    }
}

/// Checks `E S(a) / (6 + 12 C_G) <= E S(a~) <= (8 + 16 C_G) E S(a)` over an
/// explicit family.
///
/// `a~` uses the level set of `strictify(a)` and the average of the original
/// `a*`, so the comparison is against `a` itself rather than its perturbation.
pub fn verify_reduction(
    a: &BivariateFunction,
    family: &MapFamily,
    ell: usize,
    cg: f64,
) -> Result<ReductionReport> {
    check_cg(cg)?;
    check_ell(a, ell)?;
    check_compatible(a, family)?;
    let original = expected_sum(a, family, ell, ExpectationMode::Exact)?;
    let level = level_set(&strictify(a), ell as f64)?;
    let averaged = averaged_on(a, ell, level)?;

    // S(a~)(g) = value * min(ell, #{i : (i, g(i)) in h(ell)}).
    let m = a.atoms();
    let mask = averaged.level.indicator(a.values().len());
    let hits = |map: &[crate::family::Atom]| {
        map.iter()
            .enumerate()
            .filter(|&(i, &w)| mask[i * m + w as usize])
            .count()
            .min(ell) as i128
    };
    let maps = family.weights()?.len();
    let map_at = |g: usize| family.map(g).expect("index in range");
    let exact_hits: Option<BigRational> = if let Some(w) = family.uniform_weight() {
        let total: i128 = chunks(maps)
            .into_par_iter()
            .map(|(lo, hi)| (lo..hi).map(|g| hits(map_at(g))).sum::<i128>())
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        Some(exact::int(total) * w)
    } else {
        family.exact_weights().map(|ew| {
            (0..maps).fold(BigRational::zero(), |acc, g| acc + &ew[g] * exact::int(hits(map_at(g))))
        })
    };
    let weights = family.weights()?;
    let float_hits: Vec<f64> = (0..maps).map(|g| weights[g] * hits(map_at(g)) as f64).collect();
    let averaged_value = averaged.value * exact::pairwise_sum(&float_hits);

    let q = 1.0 + 2.0 * cg;
    let lower_constant = 1.0 / (6.0 * q);
    let upper_constant = 8.0 * q;
    let (lower_ok, upper_ok, exact, averaged_value) =
        match (&original.exact, &exact_hits, &averaged.value_exact) {
            (Some(orig), Some(h), Some(v)) => {
                let es_tilde = v * h;
                let q = BigRational::one() + exact::int(2) * cg_rational(cg);
                let lower = (exact::int(6) * &q).recip() * orig;
                let upper = exact::int(8) * &q * orig;
                (lower <= es_tilde, es_tilde <= upper, true, exact::to_f64(&es_tilde))
            }
            _ => {
                let tol = FLOAT_TOL * original.value.max(averaged_value).max(1.0);
                (
                    lower_constant * original.value <= averaged_value + tol,
                    averaged_value <= upper_constant * original.value + tol,
                    false,
                    averaged_value,
                )
            }
        };
    let report = ReductionReport {
        n: a.n(),
        atoms: m,
        ell,
        cg,
        original: original.value,
        averaged: averaged_value,
        lower_constant,
        upper_constant,
        level_mass: averaged.level.mass,
        lower_ok,
        upper_ok,
        exact,
    };
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::ReductionViolation(Box::new(report)))
    }
}
