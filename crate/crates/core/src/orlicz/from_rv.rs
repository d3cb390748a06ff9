use super::{GridFunction, OrliczFunction, QuantileFunction, Tail};
use crate::error::{Error, Result};
use crate::rv::Distribution;

/// Chord error allowed when tabulating `M*` for a smooth quantile.
pub const MSTAR_TOL: f64 = 1e-10;
const QUAD_TOL: f64 = 1e-13;

/// `M*` with `M*(u(beta)) = beta / ell` on `[0, u(1)]` and `+inf` beyond.
///
/// Step quantiles give a piecewise-linear `u` and an exact grid. Otherwise
/// `beta` is bisected until the grid is within [`MSTAR_TOL`] of the curve
/// `(u(beta), beta / ell)` at every midpoint.
pub fn mstar_from_rv(xstar: &QuantileFunction, ell: usize) -> Result<OrliczFunction> {
    if ell == 0 {
        return Err(Error::invalid("ell must be positive"));
    }
    if xstar.mean() <= 0.0 {
        return Err(Error::DegenerateQuantile);
    }
    let l = ell as f64;
    let end = xstar.support_length();
    let point = |beta: f64| (xstar.partial_integral(beta), beta / l, beta);

    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    if xstar.is_step() {
        points.extend(xstar.breaks().into_iter().filter(|&b| b <= end).map(point));
    } else {
        points.push(point(0.0));
        let mut stack = vec![point(end)];
        while let Some(right) = stack.last().copied() {
            let left = *points.last().unwrap();
            let mid = point(0.5 * (left.2 + right.2));
            let chord = if right.0 > left.0 {
                left.1 + (right.1 - left.1) * (mid.0 - left.0) / (right.0 - left.0)
            } else {
                mid.1
            };
            if chord - mid.1 > MSTAR_TOL && right.2 - left.2 > 1e-12 {
                stack.push(mid);
            } else {
                points.push(stack.pop().unwrap());
            }
        }
    }
    let (nodes, values) = lower_hull(&points).into_iter().unzip();
    GridFunction::new(nodes, values, Tail::Infinite).map(OrliczFunction::Grid)
}

/// Lower convex hull of points on a convex curve, dropping the ones that
/// rounding has pushed above their neighbours' chord.
fn lower_hull(points: &[(f64, f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &(x, y, _) in points {
        if let Some(&(lx, _)) = hull.last() {
            if x <= lx {
                hull.pop();
            }
        }
        while hull.len() >= 2 {
            let (ax, ay) = hull[hull.len() - 2];
            let (bx, by) = hull[hull.len() - 1];
            if (bx - ax) * (y - ay) - (by - ay) * (x - ax) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, y));
    }
    hull
}

/// `M(s) = int_0^s E[|X| 1{|X| >= 1/(t ell)}] dt`.
///
/// The outer integral is split where the inner truncated mean jumps or
/// kinks, at `t = 1/(ell x)` for the atoms `x` of `|X|` and its supremum.
/// Step laws have a piecewise-constant integrand and are summed exactly;
/// other laws use adaptive Simpson on each piece.
pub fn m_from_rv(dist: &Distribution, ell: usize, s: f64) -> f64 {
    assert!(ell > 0, "ell must be positive");
    if s <= 0.0 {
        return 0.0;
    }
    let q = dist.quantile();
    let l = ell as f64;
    let inner = |t: f64| if t <= 0.0 { 0.0 } else { q.tail_mean(1.0 / (t * l)) };
    let mut cuts: Vec<f64> = q
        .atoms()
        .into_iter()
        .chain(q.sup())
        .filter(|&x| x > 0.0)
        .map(|x| 1.0 / (l * x))
        .filter(|&t| t < s)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![0.0];
    edges.extend(cuts);
    edges.push(s);
    edges
        .windows(2)
        .map(|w| {
            if q.is_step() {
                // Constant on the open piece: evaluate away from the jumps.
                inner(0.5 * (w[0] + w[1])) * (w[1] - w[0])
            } else {
                simpson(&inner, w[0], w[1])
            }
        })
        .sum()
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, QUAD_TOL.max(QUAD_TOL * whole.abs()), 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
