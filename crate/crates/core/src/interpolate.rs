//! Cyclic monotonicity and max-affine convex interpolation.
//!
//! A finite set `{(x_i, g_i)}` lies in the subdifferential of some closed
//! proper convex function iff it is cyclically monotone. Writing
//! `w(i→j) = ⟨g_i, x_j − x_i⟩`, the cycle condition says no directed cycle has
//! positive total weight, so longest-path potentials `v_i` exist and
//! `h(x) = max_i v_i + ⟨g_i, x − x_i⟩` interpolates the set.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Enumeration guard for cycle and face enumeration.
pub const MAX_POINTS: usize = 8;

/// A point together with a prescribed subgradient.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonePoint {
    pub point: Vec<f64>,
    pub subgradient: Vec<f64>,
}

impl MonotonePoint {
    pub fn new(point: Vec<f64>, subgradient: Vec<f64>) -> Self {
        Self { point, subgradient }
    }
}

/// A cycle `i_0 → i_1 → … → i_0` and its sum `Σ ⟨x_{i_t} − x_{i_{t+1}}, g_{i_t}⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleWitness {
    pub cycle: Vec<usize>,
    pub sum: f64,
}

/// Result of [`is_cyclically_monotone`].
#[derive(Debug, Clone, PartialEq)]
pub enum Monotonicity {
    Monotone,
    /// Holds the most negative cycle found.
    Violated(CycleWitness),
}

impl Monotonicity {
    pub fn holds(&self) -> bool {
        matches!(self, Monotonicity::Monotone)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(points: &[MonotonePoint]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidArgument("point set is empty".into()))?;
    let d = first.point.len();
    for p in points {
        for len in [p.point.len(), p.subgradient.len()] {
            if len != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: len,
                });
            }
        }
    }
    Ok(d)
}

/// Sum of `⟨x_i − x_next, g_i⟩` around `cycle`.
pub fn cycle_sum(points: &[MonotonePoint], cycle: &[usize]) -> f64 {
    (0..cycle.len())
        .map(|t| {
            let i = &points[cycle[t]];
            let j = &points[cycle[(t + 1) % cycle.len()]];
            i.point
                .iter()
                .zip(&j.point)
                .zip(&i.subgradient)
                .map(|((xi, xj), g)| (xi - xj) * g)
                .sum::<f64>()
        })
        .sum()
}

/// Exhaustively checks every simple cycle over every subset.
///
/// Each directed cycle is visited once, starting from its smallest index.
pub fn is_cyclically_monotone(points: &[MonotonePoint], tolerance: f64) -> Result<Monotonicity> {
    check_dims(points)?;
    let n = points.len();
    if n > MAX_POINTS {
        return Err(Error::Size {
            count: n,
            max: MAX_POINTS,
        });
    }
    // term[i][j] = ⟨x_i − x_j, g_i⟩
    let term: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let diff: Vec<f64> = points[i]
                        .point
                        .iter()
                        .zip(&points[j].point)
                        .map(|(a, b)| a - b)
                        .collect();
                    dot(&diff, &points[i].subgradient)
                })
                .collect()
        })
        .collect();

    let mut worst: Option<CycleWitness> = None;
    let mut path = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for start in 0..n {
        path.clear();
        path.push(start);
        used[start] = true;
        search(
            start, 0.0, &term, &mut path, &mut used, tolerance, &mut worst,
        );
        used[start] = false;
    }
    Ok(match worst {
        Some(w) => Monotonicity::Violated(w),
        None => Monotonicity::Monotone,
    })
}

fn search(
    start: usize,
    partial: f64,
    term: &[Vec<f64>],
    path: &mut Vec<usize>,
    used: &mut [bool],
    tolerance: f64,
    worst: &mut Option<CycleWitness>,
) {
    let last = *path.last().unwrap();
    if path.len() >= 2 {
        let sum = partial + term[last][start];
        if sum < -tolerance && worst.as_ref().is_none_or(|w| sum < w.sum) {
            *worst = Some(CycleWitness {
                cycle: path.clone(),
                sum,
            });
        }
    }
    for next in start + 1..term.len() {
        if used[next] {
            continue;
        }
        used[next] = true;
        path.push(next);
        search(
            start,
            partial + term[last][next],
            term,
            path,
            used,
            tolerance,
            worst,
        );
        path.pop();
        used[next] = false;
    }
}

/// One affine piece `x ↦ ⟨slope, x⟩ + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl AffinePiece {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.slope, x) + self.intercept
    }
}

/// Pointwise maximum of finitely many affine pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConvexFn {
    #[serde(rename = "dim")]
    pub domain_dimension: usize,
    pub pieces: Vec<AffinePiece>,
}

impl PiecewiseConvexFn {
    pub fn new(domain_dimension: usize, pieces: Vec<AffinePiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidArgument(
                "a max-affine function needs at least one piece".into(),
            ));
        }
        for p in &pieces {
            if p.slope.len() != domain_dimension {
                return Err(Error::DimensionMismatch {
                    expected: domain_dimension,
                    found: p.slope.len(),
                });
            }
        }
        Ok(Self {
            domain_dimension,
            pieces,
        })
    }

    /// The constant function `c` on `R^d`.
    pub fn constant(domain_dimension: usize, c: f64) -> Self {
        Self {
            domain_dimension,
            pieces: vec![AffinePiece {
                slope: vec![0.0; domain_dimension],
                intercept: c,
            }],
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `c·h` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            domain_dimension: self.domain_dimension,
            pieces: self
                .pieces
                .iter()
                .map(|p| AffinePiece {
                    slope: p.slope.iter().map(|s| s * c).collect(),
                    intercept: p.intercept * c,
                })
                .collect(),
        }
    }

    /// `x ↦ h(x − shift)`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        Self {
            domain_dimension: self.domain_dimension,
            pieces: self
                .pieces
                .iter()
                .map(|p| AffinePiece {
                    slope: p.slope.clone(),
                    intercept: p.intercept - dot(&p.slope, shift),
                })
                .collect(),
        }
    }

    /// Tests `g ∈ ∂h(x)`.
    ///
    /// For a max-affine `h` the subdifferential at `x` is the convex hull of
    /// the slopes of the active pieces. Pieces within
    /// `tolerance·(1 + |h(x)|)` of the maximum count as active, and `g` is
    /// accepted when its distance to that hull is at most
    /// `tolerance·(1 + ‖g‖)`.
    pub fn subdiff_contains(&self, x: &[f64], g: &[f64], tolerance: f64) -> bool {
        if x.len() != self.domain_dimension || g.len() != self.domain_dimension {
            return false;
        }
        let hx = self.evaluate(x);
        let eps = tolerance * (1.0 + hx.abs());
        let active: Vec<&[f64]> = self
            .pieces
            .iter()
            .filter(|p| p.eval(x) >= hx - eps)
            .map(|p| p.slope.as_slice())
            .collect();
        let dist = hull_distance(&active, g);
        dist <= tolerance * (1.0 + dot(g, g).sqrt())
    }
}

/// Euclidean distance from `g` to the convex hull of `slopes`.
///
/// Enumerates every face of the simplex over `slopes`, projects `g` onto the
/// affine hull of that face and keeps projections with nonnegative
/// barycentric coordinates. Faces with affinely dependent vertices are
/// skipped; their points are covered by smaller faces.
pub fn hull_distance(slopes: &[&[f64]], g: &[f64]) -> f64 {
    let n = slopes.len().min(12);
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let face: Vec<&[f64]> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| slopes[i])
            .collect();
        if let Some(weights) = affine_projection(&face, g) {
            if weights.iter().all(|&w| w >= -1e-12) {
                let p = combine(&face, &weights);
                let d = p
                    .iter()
                    .zip(g)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                best = best.min(d);
            }
        }
    }
    best
}

fn combine(face: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let d = face[0].len();
    let mut p = vec![0.0; d];
    for (v, w) in face.iter().zip(weights) {
        for k in 0..d {
            p[k] += w * v[k];
        }
    }
    p
}

/// Barycentric weights of the projection of `g` onto `aff(face)`.
fn affine_projection(face: &[&[f64]], g: &[f64]) -> Option<Vec<f64>> {
    let m = face.len();
    if m == 1 {
        return Some(vec![1.0]);
    }
    // [G 1; 1ᵀ 0][λ; t] = [Vg; 1]
    let mut k = DMatrix::zeros(m + 1, m + 1);
    let mut rhs = DVector::zeros(m + 1);
    for i in 0..m {
        for j in 0..m {
            k[(i, j)] = dot(face[i], face[j]);
        }
        k[(i, m)] = 1.0;
        k[(m, i)] = 1.0;
        rhs[i] = dot(face[i], g);
    }
    rhs[m] = 1.0;
    let scale = k.amax().max(1.0);
    let sol = k.clone().lu().solve(&rhs)?;
    // Any consistent solution gives the projection; reject inconsistent ones.
    let back = &k * &sol - &rhs;
    if !sol.iter().all(|v| v.is_finite()) || back.amax() > 1e-9 * scale {
        return None;
    }
    Some(sol.rows(0, m).iter().copied().collect())
}

/// Longest-path potentials `v` with `v_0 = 0` and `v_j ≥ v_i + ⟨g_i, x_j − x_i⟩`.
pub fn potentials(points: &[MonotonePoint]) -> Result<Vec<f64>> {
    check_dims(points)?;
    let n = points.len();
    let weight = |i: usize, j: usize| {
        let diff: Vec<f64> = points[j]
            .point
            .iter()
            .zip(&points[i].point)
            .map(|(a, b)| a - b)
            .collect();
        dot(&points[i].subgradient, &diff)
    };
    let w: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| weight(i, j)).collect())
        .collect();
    let scale = 1.0 + w.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;

    // Bellman–Ford over the complete digraph, maximizing.
    let mut v = vec![f64::NEG_INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    v[0] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i != j && v[i] + w[i][j] > v[j] + 1e-15 * scale {
                    v[j] = v[i] + w[i][j];
                    pred[j] = i;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    // A further strict improvement means a positive cycle.
    for i in 0..n {
        for j in 0..n {
            if i != j && v[i] + w[i][j] > v[j] + tol {
                let cycle = trace_cycle(&pred, i);
                let sum = cycle_sum(points, &cycle);
                return Err(Error::Monotonicity { cycle, sum });
            }
        }
    }
    if v[0] > tol {
        let cycle = trace_cycle(&pred, 0);
        let sum = cycle_sum(points, &cycle);
        return Err(Error::Monotonicity { cycle, sum });
    }
    v[0] = 0.0;
    Ok(v)
}

fn trace_cycle(pred: &[usize], from: usize) -> Vec<usize> {
    let n = pred.len();
    let mut node = from;
    for _ in 0..n {
        if pred[node] == usize::MAX {
            break;
        }
        node = pred[node];
    }
    let mut cycle = vec![node];
    let mut cur = pred[node];
    while cur != node && cur != usize::MAX && cycle.len() <= n {
        cycle.push(cur);
        cur = pred[cur];
    }
    cycle.reverse();
    cycle
}

/// Max-affine interpolant whose subdifferential contains every pair in `points`.
pub fn interpolant(points: &[MonotonePoint]) -> Result<PiecewiseConvexFn> {
    let d = check_dims(points)?;
    let v = potentials(points)?;
    let pieces = points
        .iter()
        .zip(&v)
        .map(|(p, &vi)| AffinePiece {
            slope: p.subgradient.clone(),
            intercept: vi - dot(&p.subgradient, &p.point),
        })
        .collect();
    PiecewiseConvexFn::new(d, pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts1(pairs: &[(f64, f64)]) -> Vec<MonotonePoint> {
        pairs
            .iter()
            .map(|&(x, g)| MonotonePoint::new(vec![x], vec![g]))
            .collect()
    }

    fn abs_fn() -> PiecewiseConvexFn {
        PiecewiseConvexFn::new(
            1,
            vec![
                AffinePiece {
                    slope: vec![1.0],
                    intercept: 0.0,
                },
                AffinePiece {
                    slope: vec![-1.0],
                    intercept: 0.0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn gradient_pairs_are_monotone() {
        let s = pts1(&[(0.0, 0.0), (1.0, 1.0)]);
        assert!(is_cyclically_monotone(&s, 0.0).unwrap().holds());
    }

    #[test]
    fn decreasing_pairs_are_rejected() {
        let s = pts1(&[(0.0, 1.0), (1.0, 0.0)]);
        match is_cyclically_monotone(&s, 1e-12).unwrap() {
            Monotonicity::Violated(w) => {
                assert_eq!(w.cycle, vec![0, 1]);
                assert_eq!(w.sum, -1.0);
                assert_eq!(cycle_sum(&s, &w.cycle), -1.0);
            }
            Monotonicity::Monotone => panic!("expected violation"),
        }
    }

    #[test]
    fn size_guard() {
        let s = pts1(&[(0.0, 0.0); 9]);
        assert!(matches!(
            is_cyclically_monotone(&s, 0.0),
            Err(Error::Size { .. })
        ));
        assert!(is_cyclically_monotone(&[], 0.0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = vec![
            MonotonePoint::new(vec![0.0], vec![0.0]),
            MonotonePoint::new(vec![0.0, 1.0], vec![0.0, 1.0]),
        ];
        assert!(matches!(
            is_cyclically_monotone(&s, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_point_interpolant_is_affine() {
        let s = vec![MonotonePoint::new(vec![1.0, 2.0], vec![3.0, -1.0])];
        let h = interpolant(&s).unwrap();
        assert_eq!(h.pieces.len(), 1);
        assert_eq!(h.evaluate(&[1.0, 2.0]), 0.0);
        assert_eq!(h.evaluate(&[2.0, 2.0]), 3.0);
    }

    #[test]
    fn chain_potentials_take_the_longest_path() {
        // Chains 1→3 (weight 0) and 1→2→3 (weight 1).
        let s = pts1(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        assert_eq!(potentials(&s).unwrap(), vec![0.0, 0.0, 1.0]);
        let h = interpolant(&s).unwrap();
        assert_eq!(h.evaluate(&[0.0]), 0.0);
        assert_eq!(h.evaluate(&[1.0]), 0.0);
        assert_eq!(h.evaluate(&[2.0]), 1.0);
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(
            PiecewiseConvexFn::constant(3, 2.5).evaluate(&[1.0, -4.0, 9.0]),
            2.5
        );
        assert_eq!(abs_fn().evaluate(&[-3.0]), 3.0);
        let h = interpolant(&pts1(&[(0.0, 0.0), (1.0, 1.0)])).unwrap();
        assert_eq!(h.evaluate(&[0.5]), 0.0);
    }

    #[test]
    fn subdifferential_of_absolute_value() {
        let h = abs_fn();
        assert!(h.subdiff_contains(&[0.0], &[0.5], 1e-9));
        assert!(h.subdiff_contains(&[0.0], &[-1.0], 1e-9));
        assert!(!h.subdiff_contains(&[0.0], &[1.5], 1e-9));
        assert!(!h.subdiff_contains(&[1.0], &[0.5], 1e-9));
        assert!(h.subdiff_contains(&[1.0], &[1.0], 1e-9));
    }

    #[test]
    fn hull_distance_in_the_plane() {
        let a = [0.0, 0.0];
        let b = [2.0, 0.0];
        let c = [0.0, 2.0];
        let hull = [&a[..], &b[..], &c[..]];
        assert_eq!(hull_distance(&hull, &[0.5, 0.5]), 0.0);
        assert!((hull_distance(&hull, &[2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-12);
        assert!((hull_distance(&hull, &[-1.0, 1.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_cycle_is_reported_by_potentials() {
        let s = pts1(&[(0.0, 1.0), (1.0, 0.0)]);
        match interpolant(&s) {
            Err(Error::Monotonicity { sum, .. }) => assert!(sum < 0.0),
            other => panic!("expected monotonicity error, got {other:?}"),
        }
    }

    #[test]
    fn json_layout() {
        let h = abs_fn();
        let v: serde_json::Value = serde_json::to_value(&h).unwrap();
        assert_eq!(v["dim"], 1);
        assert_eq!(v["pieces"][0]["slope"][0], 1.0);
        assert_eq!(v["pieces"][1]["intercept"], 0.0);
        let back: PiecewiseConvexFn = serde_json::from_value(v).unwrap();
        assert_eq!(back, h);
    }
}
