#![allow(dead_code)]

use admm_pep::interpolate::{AffinePiece, MonotonePoint, PiecewiseConvexFn};
use rand::Rng;

/// Grid for the certificate checks: 1.63, 1.64, ..., 2.00.
pub fn certificate_grid() -> Vec<f64> {
    (0..38).map(|i| 1.63 + 0.01 * i as f64).collect()
}

/// `(2 + √3)/√3`, the growth factor at `γ = 2` by hand substitution.
pub fn value_at_two() -> f64 {
    let r3 = 3f64.sqrt();
    (2.0 + r3) / r3
}

fn random_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Points on the graph of the subdifferential of a random convex function
/// `½xᵀQx + max_k (⟨a_k, x⟩ + b_k)` with `Q = MᵀM`.
pub fn random_monotone_set<R: Rng>(rng: &mut R, dim: usize, n: usize) -> Vec<MonotonePoint> {
    let m: Vec<Vec<f64>> = (0..dim).map(|_| random_vec(rng, dim, 1.0)).collect();
    let quad_weight = if rng.random_bool(0.3) { 0.0 } else { 1.0 };
    let pieces = rng.random_range(1..=4);
    let affine: Vec<(Vec<f64>, f64)> = (0..pieces)
        .map(|_| (random_vec(rng, dim, 2.0), rng.random_range(-1.0..1.0)))
        .collect();
    (0..n)
        .map(|_| {
            let x = random_vec(rng, dim, 2.0);
            // Mx, then Mᵀ(Mx)
            let mx: Vec<f64> = m.iter().map(|row| dot(row, &x)).collect();
            let mut g: Vec<f64> = (0..dim)
                .map(|j| quad_weight * (0..dim).map(|i| m[i][j] * mx[i]).sum::<f64>())
                .collect();
            let best = affine
                .iter()
                .max_by(|p, q| (dot(&p.0, &x) + p.1).total_cmp(&(dot(&q.0, &x) + q.1)))
                .unwrap();
            for (gj, aj) in g.iter_mut().zip(&best.0) {
                *gj += aj;
            }
            MonotonePoint::new(x, g)
        })
        .collect()
}

/// A set that is not cyclically monotone, with some pair of points or some
/// longer cycle violating the condition by a clear margin.
pub fn random_violated_set<R: Rng>(rng: &mut R, dim: usize, n: usize) -> Vec<MonotonePoint> {
    let n = n.max(2);
    loop {
        let pts = if rng.random_bool(0.5) {
            // Gradients of a concave quadratic: every pair is reversed.
            let c = random_vec(rng, dim, 1.0);
            let k = rng.random_range(0.5..2.0);
            (0..n)
                .map(|_| {
                    let x = random_vec(rng, dim, 2.0);
                    let g = x.iter().zip(&c).map(|(xi, ci)| ci - k * xi).collect();
                    MonotonePoint::new(x, g)
                })
                .collect::<Vec<_>>()
        } else {
            // Swap the subgradients of two points of a monotone set.
            let mut pts = random_monotone_set(rng, dim, n);
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            let (ga, gb) = (pts[a].subgradient.clone(), pts[b].subgradient.clone());
            pts[a].subgradient = gb;
            pts[b].subgradient = ga;
            pts
        };
        if min_pair_sum(&pts) < -1e-3 {
            return pts;
        }
    }
}

fn min_pair_sum(pts: &[MonotonePoint]) -> f64 {
    let mut worst = f64::INFINITY;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i != j {
                worst = worst.min(reference_cycle_sum(pts, &[i, j]));
            }
        }
    }
    worst
}

/// `Σ ⟨g_{i_t}, x_{i_{t+1}} − x_{i_t}⟩` negated, so that monotone sets give `≥ 0`.
pub fn reference_cycle_sum(pts: &[MonotonePoint], cycle: &[usize]) -> f64 {
    let mut s = 0.0;
    for t in 0..cycle.len() {
        let p = &pts[cycle[t]];
        let q = &pts[cycle[(t + 1) % cycle.len()]];
        let step: Vec<f64> = q.point.iter().zip(&p.point).map(|(a, b)| a - b).collect();
        s -= dot(&p.subgradient, &step);
    }
    s
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn random_max_affine<R: Rng>(rng: &mut R, dim: usize, pieces: usize) -> PiecewiseConvexFn {
    let pieces = (0..pieces)
        .map(|_| AffinePiece {
            slope: random_vec(rng, dim, 3.0),
            intercept: rng.random_range(-2.0..2.0),
        })
        .collect();
    PiecewiseConvexFn::new(dim, pieces).unwrap()
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let inv = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv * (hi - lo);
    let mut b = lo + inv * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force `argmin h(x) + ½‖x − v‖²` in dimension 1 or 2.
///
/// A coarse grid over the box `v ± (max‖a_k‖ + 1)` (which contains the
/// minimizer) seeds the search; the minimizer is then refined by nested
/// golden-section searches, which are exact for convex functions.
pub fn prox_oracle(h: &PiecewiseConvexFn, v: &[f64]) -> Vec<f64> {
    let objective = |x: &[f64]| {
        h.evaluate(x) + 0.5 * x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    };
    let radius = h
        .pieces
        .iter()
        .map(|p| dot(&p.slope, &p.slope).sqrt())
        .fold(0.0, f64::max)
        + 1.0;
    match v.len() {
        1 => {
            let (lo, hi) = (v[0] - radius, v[0] + radius);
            let cells = 400;
            let h_step = (hi - lo) / cells as f64;
            let best = (0..=cells)
                .map(|i| lo + i as f64 * h_step)
                .min_by(|a, b| objective(&[*a]).total_cmp(&objective(&[*b])))
                .unwrap();
            vec![golden_section(
                |t| objective(&[t]),
                (best - h_step).max(lo),
                (best + h_step).min(hi),
            )]
        }
        2 => {
            let inner = |x0: f64| {
                let y = golden_section(|t| objective(&[x0, t]), v[1] - radius, v[1] + radius);
                (y, objective(&[x0, y]))
            };
            let cells = 60;
            let h_step = 2.0 * radius / cells as f64;
            let best = (0..=cells)
                .map(|i| v[0] - radius + i as f64 * h_step)
                .min_by(|a, b| inner(*a).1.total_cmp(&inner(*b).1))
                .unwrap();
            // The partial minimum over x1 is convex in x0, so the bracket
            // around the grid minimizer contains the true minimizer.
            let x0 = golden_section(
                |t| inner(t).1,
                (best - h_step).max(v[0] - radius),
                (best + h_step).min(v[0] + radius),
            );
            vec![x0, inner(x0).0]
        }
        d => panic!("oracle supports dimension 1 or 2, got {d}"),
    }
}
