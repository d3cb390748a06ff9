use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::{conjugate, luxemburg_norm, OrliczFunction, QuantileFunction};
use crate::error::{Error, Result};
use crate::rng;

const DUAL_TOL: f64 = 1e-9;
/// Slack on `sum M*(|z_i|) <= 1`; inverting `u` near a flat end loses about
/// half the digits of `z_i`.
pub const BALL_TOL: f64 = 1e-7;

/// Outcome of the search for `sup { sum f g : sum M*(|g|) <= 1 }`.
#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub norm: f64,
    /// Best feasible value found: a certified lower bound of the supremum.
    pub lower: f64,
    /// `2 ||f||_M`.
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub evaluations: usize,
}

impl DualityReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Searches dual vectors `g` with `sum M*(|g_i|) <= 1` and checks
/// `||f||_M <= sum f g <= 2 ||f||_M` for the best one found.
///
/// The start is the Young-equality family `g = M'(|f| / kappa)`, scaled to
/// the boundary of the dual ball. A seeded hill-climb then spends `budget`
/// random perturbations, each rescaled back to the boundary.
pub fn duality_gap(f: &[f64], m: &OrliczFunction, budget: usize, seed: u64) -> DualityReport {
    let norm = luxemburg_norm(m, f);
    if norm == 0.0 {
        return DualityReport {
            norm: 0.0,
            lower: 0.0,
            upper: 0.0,
            lower_ok: true,
            upper_ok: true,
            evaluations: 0,
        };
    }
    let dual = conjugate(m);
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    let modular = |g: &[f64]| -> f64 { g.iter().map(|&v| dual.eval(v)).sum() };
    let pairing = |g: &[f64]| -> f64 { abs.iter().zip(g).map(|(a, b)| a * b).sum() };
    let mut evaluations = 0usize;

    // Largest multiple of g that stays in the dual ball.
    let mut to_boundary = |g: &[f64]| -> Vec<f64> {
        let scaled = |t: f64| g.iter().map(|v| v * t).collect::<Vec<_>>();
        evaluations += 1;
        if modular(g) > 1.0 {
            let mut lo = 0.0;
            let mut hi = 1.0;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if modular(&scaled(mid)) <= 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return scaled(lo);
        }
        let mut lo = 1.0;
        let mut hi = 2.0;
        while modular(&scaled(hi)) <= 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return scaled(lo);
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if modular(&scaled(mid)) <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        scaled(lo)
    };

    let start: Vec<f64> = abs
        .iter()
        .map(|&a| if a > 0.0 { m.right_derivative(a / norm) } else { 0.0 })
        .collect();
    let start = if start.iter().all(|&v| v == 0.0) { abs.clone() } else { start };
    let mut best = to_boundary(&start);
    let mut best_value = pairing(&best);

    let mut rng: ChaCha8Rng = rng::stream(seed, 0xD0A1, 0);
    let mut step = 0.25;
    for _ in 0..budget {
        let mut candidate = best.clone();
        let i = rng.random_range(0..candidate.len());
        let scale = candidate.iter().fold(0.0f64, |acc, v| acc.max(*v)).max(1e-300);
        candidate[i] = (candidate[i] + step * scale * (2.0 * rng.random::<f64>() - 1.0)).max(0.0);
        let candidate = to_boundary(&candidate);
        let value = pairing(&candidate);
        if value > best_value && modular(&candidate) <= 1.0 {
            best = candidate;
            best_value = value;
        } else {
            step = (step * 0.97).max(1e-6);
        }
    }
    let upper = 2.0 * norm;
    let tol = DUAL_TOL * norm;
    DualityReport {
        norm,
        lower: best_value,
        upper,
        lower_ok: norm <= best_value + tol,
        upper_ok: best_value <= upper + tol,
        evaluations,
    }
}

/// Certificate that `z` lies in a dilate of the order-statistic body `B`.
#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub n: usize,
    pub ell: usize,
    /// `sum M*(|z_i|)`, at most 1 on input.
    pub modular: f64,
    /// Coordinates with `M*(|z_i|) > 1/n`.
    pub head: usize,
    /// `sum k_i` over the head; the comparison point lies in `B` when this is at most `n`.
    pub k_total: usize,
    pub head_factor: f64,
    pub tail_factor: f64,
    /// `head_factor + tail_factor`, with `z` in `factor * B`.
    pub factor: f64,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.k_total <= self.n && self.factor <= 3.0 + DUAL_TOL
    }
}

/// Certifies `z in factor * B` for `B = conv{(eps_i u(alpha_i)) : sum alpha_i = ell}`.
///
/// Coordinates with `M*(|z_i|) <= 1/n` are dominated by the constant vector
/// `u(ell/n)`, which lies in `B`. Each remaining coordinate gets
/// `k_i = floor(n M*(|z_i|))`, and `z_i` is compared with `u(ell k_i / n)`;
/// since `sum k_i <= n` that vector lies in `B` as well.
pub fn sandwich_check(
    xstar: &QuantileFunction,
    ell: usize,
    n: usize,
    z: &[f64],
) -> Result<SandwichReport> {
    if ell == 0 || n == 0 || ell > n || z.len() != n {
        return Err(Error::invalid(format!(
            "sandwich check needs 1 <= ell <= n = len(z) (ell={ell}, n={n}, len={})",
            z.len()
        )));
    }
    if xstar.mean() <= 0.0 {
        return Err(Error::DegenerateQuantile);
    }
    let l = ell as f64;
    let nf = n as f64;
    let mut abs: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| b.total_cmp(a));
    let mstar: Vec<f64> = abs
        .iter()
        .map(|&s| xstar.inverse_partial_integral(s).map_or(f64::INFINITY, |b| b / l))
        .collect();
    let modular: f64 = mstar.iter().sum();
    if modular > 1.0 + BALL_TOL {
        return Err(Error::NotInBall(modular));
    }

    // k_i / n <= M*(z_i) iff u(ell k_i / n) <= z_i; comparing in the
    // u-domain avoids inverting u where it is flat.
    let threshold = xstar.partial_integral(l / nf);
    let k_max = n / ell;
    let slack = 1.0 + DUAL_TOL;
    let mut head = 0;
    let mut k_total = 0;
    let mut head_factor = 0.0f64;
    let mut tail_factor = 0.0f64;
    for &s in abs.iter().filter(|&&s| s > 0.0) {
        if s <= threshold * slack {
            tail_factor = tail_factor.max(s / threshold);
            continue;
        }
        let k = (1..=k_max)
            .take_while(|&k| xstar.partial_integral(l * k as f64 / nf) <= s * slack)
            .last()
            .unwrap_or(1);
        head += 1;
        k_total += k;
        head_factor = head_factor.max(s / xstar.partial_integral(l * k as f64 / nf));
    }
    Ok(SandwichReport {
        n,
        ell,
        modular,
        head,
        k_total,
        head_factor,
        tail_factor,
        factor: head_factor + tail_factor,
    })
}

/// A random point with `sum M*(z_i) = 1`: Dirichlet weights `w_i <= 1/ell`
/// pushed through `z_i = u(ell w_i)`.
pub fn boundary_point(xstar: &QuantileFunction, ell: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    assert!(ell >= 1 && ell <= n, "need 1 <= ell <= n");
    let l = ell as f64;
    loop {
        let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = e.iter().sum();
        let w: Vec<f64> = e.iter().map(|v| v / total).collect();
        if w.iter().all(|&v| v * l <= 1.0) {
            return w.iter().map(|&v| xstar.partial_integral(l * v)).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_case() {
        let sq = OrliczFunction::power(2.0, 1.0).unwrap();
        let r = duality_gap(&[3.0, 4.0], &sq, 200, 1);
        assert!((r.norm - 5.0).abs() < 1e-12);
        // M* = s^2 / 4, so the dual ball has radius 2 and the sup is 10.
        assert!((r.lower - 10.0).abs() < 1e-6, "{}", r.lower);
        assert!(r.passed());
    }

    #[test]
    fn l1_case_and_zero() {
        let lin = OrliczFunction::power(1.0, 1.0).unwrap();
        let r = duality_gap(&[1.0, -2.0, 0.5], &lin, 50, 2);
        assert!((r.norm - 3.5).abs() < 1e-10);
        assert!((r.lower - 3.5).abs() < 1e-9);
        assert!(r.passed());
        let z = duality_gap(&[0.0, 0.0], &lin, 10, 0);
        assert_eq!((z.lower, z.upper), (0.0, 0.0));
    }

    #[test]
    fn sandwich_examples() {
        for xstar in [QuantileFunction::constant(1.0).unwrap(), QuantileFunction::Exponential] {
            for (n, ell) in [(4usize, 1usize), (6, 2)] {
                let w = vec![xstar.partial_integral(ell as f64 / n as f64); n];
                let r = sandwich_check(&xstar, ell, n, &w).unwrap();
                assert!((r.factor - 1.0).abs() < 1e-9, "{r:?}");
                let mut vertex = vec![0.0; n];
                vertex[0] = xstar.partial_integral(ell as f64);
                let r = sandwich_check(&xstar, ell, n, &vertex).unwrap();
                assert!((r.factor - 1.0).abs() < 1e-9, "{r:?}");
            }
        }
    }

    #[test]
    fn random_boundary_points() {
        let one = QuantileFunction::constant(1.0).unwrap();
        let mut rng = rng::stream(5, 0, 0);
        for _ in 0..100 {
            let z = boundary_point(&one, 2, 6, &mut rng);
            let r = sandwich_check(&one, 2, 6, &z).unwrap();
            assert!((r.modular - 1.0).abs() < BALL_TOL);
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn outside_the_ball() {
        let one = QuantileFunction::constant(1.0).unwrap();
        assert!(matches!(sandwich_check(&one, 1, 2, &[1.0, 0.5]), Err(Error::NotInBall(_))));
    }
}
