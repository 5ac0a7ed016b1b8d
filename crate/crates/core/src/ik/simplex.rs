//! Nelder–Mead downhill simplex over a fixed-size parameter vector.

/// Stopping rules and start geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Offset of the extra start vertices from the seed along each axis.
    pub initial_step: f64,
    /// Converged when `f_worst − f_best` drops below this...
    pub f_spread_tol: f64,
    /// ...and every vertex is within this (∞-norm) of the best one.
    pub diameter_tol: f64,
    pub max_evals: usize,
    /// Stop as soon as the best value is at or below this.
    pub f_target: Option<f64>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            initial_step: 0.05,
            f_spread_tol: 1e-12,
            diameter_tol: 1e-8,
            max_evals: 2000,
            f_target: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Converged,
    TargetReached,
    /// `max_evals` ran out first; the best vertex so far is still returned.
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexResult<const N: usize> {
    pub argmin: [f64; N],
    pub f_min: f64,
    pub evals: usize,
    pub status: SimplexStatus,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `seed`. The returned value is never worse than
/// `f(seed)` because the seed is a vertex of the start simplex and the best
/// vertex only ever improves. The evaluation count never exceeds `max_evals`.
pub fn minimize_simplex<const N: usize, F>(f: F, seed: [f64; N], opts: &SimplexOptions) -> SimplexResult<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut offsets = [[0.0; N]; N];
    for (i, o) in offsets.iter_mut().enumerate() {
        o[i] = opts.initial_step;
    }
    minimize_simplex_from(f, seed, &offsets, opts)
}

/// Same as [`minimize_simplex`] with the start vertices at `seed + offsets[i]`
/// instead of along the axes. `initial_step` is ignored.
pub fn minimize_simplex_from<const N: usize, F>(
    mut f: F,
    seed: [f64; N],
    offsets: &[[f64; N]; N],
    opts: &SimplexOptions,
) -> SimplexResult<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let max_evals = opts.max_evals.max(1);
    let mut evals = 0usize;
    let mut eval = |x: &[f64; N], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let f_seed = eval(&seed, &mut evals);
    let reached = |v: f64| opts.f_target.is_some_and(|t| v <= t);
    if reached(f_seed) {
        return SimplexResult { argmin: seed, f_min: f_seed, evals, status: SimplexStatus::TargetReached };
    }

    let mut verts: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    verts.push((seed, f_seed));
    for off in offsets {
        if evals >= max_evals {
            return best_of(&verts, evals, SimplexStatus::BudgetExhausted);
        }
        let mut x = seed;
        for (xi, oi) in x.iter_mut().zip(off.iter()) {
            *xi += oi;
        }
        let v = eval(&x, &mut evals);
        verts.push((x, v));
    }

    loop {
        // stable sort keeps the older vertex first on ties
        verts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = verts[0].1;
        if reached(best) {
            return best_of(&verts, evals, SimplexStatus::TargetReached);
        }
        let spread = verts[N].1 - best;
        let diameter = verts[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(verts[0].0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opts.f_spread_tol && diameter <= opts.diameter_tol {
            return best_of(&verts, evals, SimplexStatus::Converged);
        }
        if evals >= max_evals {
            return best_of(&verts, evals, SimplexStatus::BudgetExhausted);
        }

        let mut centroid = [0.0; N];
        for (x, _) in &verts[..N] {
            for (c, xi) in centroid.iter_mut().zip(x.iter()) {
                *c += xi;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= N as f64);
        let worst = verts[N];
        let along = |t: f64| -> [f64; N] {
            let mut y = [0.0; N];
            for k in 0..N {
                y[k] = centroid[k] + t * (worst.0[k] - centroid[k]);
            }
            y
        };

        let xr = along(-REFLECT);
        let fr = eval(&xr, &mut evals);
        if fr < best {
            if evals >= max_evals {
                verts[N] = (xr, fr);
                continue;
            }
            let xe = along(-REFLECT * EXPAND);
            let fe = eval(&xe, &mut evals);
            verts[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < verts[N - 1].1 {
            verts[N] = (xr, fr);
            continue;
        }
        if evals >= max_evals {
            if fr < worst.1 {
                verts[N] = (xr, fr);
            }
            continue;
        }
        // contraction: outside if the reflected point beat the worst vertex
        let (xc, fc) = if fr < worst.1 {
            let xc = along(-REFLECT * CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, if fc <= fr { fc } else { f64::INFINITY })
        } else {
            let xc = along(CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, if fc < worst.1 { fc } else { f64::INFINITY })
        };
        if fc.is_finite() {
            verts[N] = (xc, fc);
            continue;
        }
        if fr < worst.1 {
            verts[N] = (xr, fr);
        }
        if evals + N > max_evals {
            continue;
        }
        let anchor = verts[0].0;
        for (x, v) in verts[1..].iter_mut() {
            for k in 0..N {
                x[k] = anchor[k] + SHRINK * (x[k] - anchor[k]);
            }
            *v = eval(x, &mut evals);
        }
    }
}

fn best_of<const N: usize>(verts: &[([f64; N], f64)], evals: usize, status: SimplexStatus) -> SimplexResult<N> {
    let (argmin, f_min) = verts
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex has vertices");
    SimplexResult { argmin, f_min, evals, status }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_quadratic() {
        let c = [0.1, 0.2, 0.3];
        let f = |x: &[f64; 3]| x.iter().zip(c.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let r = minimize_simplex(f, [0.0; 3], &SimplexOptions::default());
        assert_eq!(r.status, SimplexStatus::Converged);
        for (x, y) in r.argmin.iter().zip(c.iter()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_function_returns_seed() {
        let seed = [0.3, -0.2, 1.0];
        let r = minimize_simplex(|_: &[f64; 3]| 7.5, seed, &SimplexOptions::default());
        assert_eq!(r.argmin, seed);
        assert_eq!(r.f_min, 7.5);
        // repeated shrinks collapse the simplex onto the seed
        assert_eq!(r.status, SimplexStatus::Converged);
    }

    #[test]
    fn budget_is_respected() {
        let f = |x: &[f64; 3]| (x[0] - 100.0).powi(2) + x[1].powi(2) + x[2].powi(2);
        for budget in [1, 2, 3, 4, 5, 17, 50] {
            let opts = SimplexOptions { max_evals: budget, ..Default::default() };
            let r = minimize_simplex(f, [0.0; 3], &opts);
            assert!(r.evals <= budget, "{} > {budget}", r.evals);
            assert_eq!(r.status, SimplexStatus::BudgetExhausted);
            assert!(r.f_min <= f(&[0.0; 3]));
        }
    }

    #[test]
    fn target_stops_early() {
        let f = |x: &[f64; 2]| x[0] * x[0] + x[1] * x[1];
        let opts = SimplexOptions { f_target: Some(1e-2), ..Default::default() };
        let r = minimize_simplex(f, [1.0, 1.0], &opts);
        assert_eq!(r.status, SimplexStatus::TargetReached);
        assert!(r.f_min <= 1e-2);
        let r = minimize_simplex(f, [0.0, 0.0], &opts);
        assert_eq!(r.evals, 1);
    }

    #[test]
    fn nan_is_treated_as_worst() {
        let f = |x: &[f64; 2]| if x[0] > 0.5 { f64::NAN } else { (x[0] - 0.4).powi(2) + x[1].powi(2) };
        let r = minimize_simplex(f, [0.0, 0.1], &SimplexOptions::default());
        assert!((r.argmin[0] - 0.4).abs() < 1e-6);
    }
}
