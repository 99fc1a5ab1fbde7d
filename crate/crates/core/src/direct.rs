//! DIRECT (DIviding RECTangles) global minimisation over a box.
//!
//! Works in the unit cube: every rectangle keeps its center, a trisection
//! depth per dimension (side `3^-level`), and the objective at its center.
//! Each iteration selects the potentially-optimal rectangles (lower-right
//! convex hull of `(size, f)` with the ε-improvement test) and trisects them
//! along all of their longest sides. Fully deterministic.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Value substituted for non-finite objective values.
pub const LARGE_VALUE: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidParameter("search box has no dimensions".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidParameter(format!(
                    "search box dimension {i}: [{l}, {u}] is not a finite nonempty interval"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim]).expect("unit box is valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Maps unit-cube coordinates into the box, clamped so rounding never leaves it.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&t, (&l, &h))| (l + t * (h - l)).clamp(l, h))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, h))| (*l..=*h).contains(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectConfig {
    pub max_evals: usize,
    /// Required relative improvement for potential optimality.
    pub epsilon: f64,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            max_evals: 200,
            epsilon: 1e-4,
        }
    }
}

impl DirectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals < 1 {
            return Err(Error::InvalidParameter("max_evals must be >= 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {} must be >= 0", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperRect {
    /// Center in unit-cube coordinates.
    pub center: Vec<f64>,
    /// Trisection depth per dimension; side length is `3^-level`.
    pub side_levels: Vec<u32>,
    pub f_center: f64,
    /// Evaluation index of the center, used for tie-breaking.
    pub eval_index: usize,
}

impl HyperRect {
    /// Half the diagonal length.
    pub fn size(&self) -> f64 {
        size_of_levels(&self.size_key())
    }

    pub fn volume(&self) -> f64 {
        self.side_levels.iter().map(|&l| 3f64.powi(-(l as i32))).product()
    }

    pub fn side(&self, dim: usize) -> f64 {
        3f64.powi(-(self.side_levels[dim] as i32))
    }

    /// Sorted levels: rectangles with equal keys have bitwise-equal sizes.
    fn size_key(&self) -> Vec<u32> {
        let mut k = self.side_levels.clone();
        k.sort_unstable();
        k
    }
}

fn size_of_levels(sorted: &[u32]) -> f64 {
    0.5 * sorted.iter().map(|&l| 9f64.powi(-(l as i32))).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectResult {
    /// Best evaluated point, in box coordinates.
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub evals_used: usize,
    /// Every evaluation in order: point (box coordinates) and value.
    pub trace: Vec<(Vec<f64>, f64)>,
}

/// Counts evaluations against a budget and tracks the incumbent.
struct Evaluator<'a, F> {
    objective: F,
    bx: &'a SearchBox,
    budget: usize,
    trace: Vec<(Vec<f64>, f64)>,
    best: usize,
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<'_, F> {
    /// `None` once the budget is spent.
    fn eval(&mut self, unit: &[f64]) -> Option<(f64, usize)> {
        if self.trace.len() >= self.budget {
            return None;
        }
        let x = self.bx.from_unit(unit);
        let mut f = (self.objective)(&x);
        if !f.is_finite() {
            f = LARGE_VALUE;
        }
        let index = self.trace.len();
        if index == 0 || f < self.trace[self.best].1 {
            self.best = index;
        }
        self.trace.push((x, f));
        Some((f, index))
    }

    fn f_min(&self) -> f64 {
        self.trace[self.best].1
    }
}

/// Indices of the potentially-optimal rectangles.
///
/// Only the best rectangle of each size (lowest `f`, then earliest evaluated)
/// competes. The result is the lower-right convex hull of `(size, f)` starting
/// at the incumbent, filtered by `f − K·size ≤ f_min − ε|f_min|` for the
/// largest admissible slope `K`.
pub fn potentially_optimal(rects: &[HyperRect], f_min: f64, epsilon: f64) -> Vec<usize> {
    if rects.is_empty() {
        return Vec::new();
    }
    let mut best_per_size: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for (i, r) in rects.iter().enumerate() {
        best_per_size
            .entry(r.size_key())
            .and_modify(|b| {
                if better(r, &rects[*b]) {
                    *b = i;
                }
            })
            .or_insert(i);
    }
    // ascending size
    let mut groups: Vec<(f64, f64, usize)> = best_per_size
        .into_iter()
        .map(|(key, i)| (size_of_levels(&key), rects[i].f_center, i))
        .collect();
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    // Start at the largest rectangle holding the minimum f.
    let mut start = 0;
    for (g, &(_, f, _)) in groups.iter().enumerate() {
        if f <= groups[start].1 {
            start = g;
        }
    }

    let mut hull: Vec<(f64, f64, usize)> = Vec::new();
    for &p in &groups[start..] {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b if it lies strictly above the segment a→p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross < 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let threshold = f_min - epsilon * f_min.abs();
    let mut out = Vec::with_capacity(hull.len());
    for (h, &(d, f, i)) in hull.iter().enumerate() {
        match hull.get(h + 1) {
            None => out.push(i),
            Some(&(d2, f2, _)) => {
                let k = (f2 - f) / (d2 - d);
                if f - k * d <= threshold {
                    out.push(i);
                }
            }
        }
    }
    out
}

fn better(a: &HyperRect, b: &HyperRect) -> bool {
    a.f_center < b.f_center || (a.f_center == b.f_center && a.eval_index < b.eval_index)
}

/// Trisects `rect` along every longest side. The first element is the
/// shrunken middle rectangle (which keeps the parent's center value).
pub fn trisect<F: FnMut(&[f64]) -> f64>(rect: &HyperRect, mut objective: F) -> Vec<HyperRect> {
    let mut counter = 0usize;
    trisect_with(rect, &mut |u: &[f64]| {
        counter += 1;
        Some((objective(u), counter))
    })
    .expect("unbounded evaluator")
}

fn trisect_with<E>(rect: &HyperRect, eval: &mut E) -> Option<Vec<HyperRect>>
where
    E: FnMut(&[f64]) -> Option<(f64, usize)>,
{
    let min_level = *rect.side_levels.iter().min()?;
    let offset = 3f64.powi(-(min_level as i32 + 1));
    let mut samples = Vec::new();
    for dim in (0..rect.center.len()).filter(|&d| rect.side_levels[d] == min_level) {
        let mut lo = rect.center.clone();
        lo[dim] -= offset;
        let mut hi = rect.center.clone();
        hi[dim] += offset;
        let (f_lo, i_lo) = eval(&lo)?;
        let (f_hi, i_hi) = eval(&hi)?;
        samples.push((dim, f_lo.min(f_hi), [(lo, f_lo, i_lo), (hi, f_hi, i_hi)]));
    }
    // Split the best direction first so it ends up in the largest pieces.
    samples.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal));

    let mut levels = rect.side_levels.clone();
    let mut children = Vec::with_capacity(2 * samples.len() + 1);
    for (dim, _, pair) in samples {
        levels[dim] += 1;
        for (center, f_center, eval_index) in pair {
            children.push(HyperRect {
                center,
                side_levels: levels.clone(),
                f_center,
                eval_index,
            });
        }
    }
    let middle = HyperRect {
        center: rect.center.clone(),
        side_levels: levels,
        f_center: rect.f_center,
        eval_index: rect.eval_index,
    };
    children.insert(0, middle);
    Some(children)
}

/// Minimises `objective` over `bx` with at most `cfg.max_evals` evaluations.
pub fn minimize<F>(objective: F, bx: &SearchBox, cfg: &DirectConfig) -> Result<DirectResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let n = bx.dim();
    let mut ev = Evaluator {
        objective,
        bx,
        budget: cfg.max_evals,
        trace: Vec::with_capacity(cfg.max_evals),
        best: 0,
    };
    let center = vec![0.5; n];
    let (f0, i0) = ev.eval(&center).expect("budget >= 1");
    let mut rects = vec![HyperRect {
        center,
        side_levels: vec![0; n],
        f_center: f0,
        eval_index: i0,
    }];

    'outer: while ev.trace.len() < ev.budget {
        let selected = potentially_optimal(&rects, ev.f_min(), cfg.epsilon);
        // Largest first; the replaced slots are filled in place.
        for idx in selected.into_iter().rev() {
            let parent = rects[idx].clone();
            match trisect_with(&parent, &mut |u: &[f64]| ev.eval(u)) {
                Some(mut pieces) => {
                    rects[idx] = pieces.remove(0);
                    rects.extend(pieces);
                }
                None => break 'outer,
            }
        }
    }

    let (x_best, f_best) = ev.trace[ev.best].clone();
    Ok(DirectResult {
        x_best,
        f_best,
        evals_used: ev.trace.len(),
        trace: ev.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rect(levels: Vec<u32>, f: f64, idx: usize) -> HyperRect {
        HyperRect {
            center: vec![0.5; levels.len()],
            side_levels: levels,
            f_center: f,
            eval_index: idx,
        }
    }

    /// Brute force over the definition: j is potentially optimal iff some
    /// K > 0 satisfies every pairwise inequality and the ε condition.
    fn oracle(rects: &[HyperRect], f_min: f64, eps: f64) -> Vec<usize> {
        let mut out = Vec::new();
        for (j, rj) in rects.iter().enumerate() {
            let (dj, fj) = (rj.size(), rj.f_center);
            let mut lo = 0.0f64;
            let mut hi = f64::INFINITY;
            let mut ok = true;
            for (i, ri) in rects.iter().enumerate() {
                if i == j {
                    continue;
                }
                let (di, fi) = (ri.size(), ri.f_center);
                if di < dj {
                    lo = lo.max((fj - fi) / (dj - di));
                } else if di > dj {
                    hi = hi.min((fi - fj) / (di - dj));
                } else if fi < fj || (fi == fj && ri.eval_index < rj.eval_index) {
                    ok = false;
                }
            }
            lo = lo.max((fj - f_min + eps * f_min.abs()) / dj);
            if ok && lo <= hi && hi > 0.0 {
                out.push(j);
            }
        }
        out
    }

    #[test]
    fn single_rectangle_is_selected() {
        let r = vec![rect(vec![0, 0], 1.0, 0)];
        assert_eq!(potentially_optimal(&r, 1.0, 1e-4), vec![0]);
    }

    #[test]
    fn equal_sizes_keep_the_lower_value() {
        let r = vec![rect(vec![1, 1], 2.0, 0), rect(vec![1, 1], 1.0, 1)];
        assert_eq!(potentially_optimal(&r, 1.0, 0.0), vec![1]);
    }

    #[test]
    fn three_point_hull() {
        // sizes from levels [2,2] < [1,1] < [0,0]; the middle point sits above
        // the chord between the outer two.
        let r = vec![
            rect(vec![2, 2], 0.0, 0),
            rect(vec![1, 1], 1.0, 1),
            rect(vec![0, 0], 1.5, 2),
        ];
        let mut po = potentially_optimal(&r, 0.0, 0.0);
        po.sort();
        assert_eq!(po, vec![0, 2]);
        assert_eq!(oracle(&r, 0.0, 0.0), vec![0, 2]);
        // convex version keeps all three
        let r2 = vec![
            rect(vec![2, 2], 0.0, 0),
            rect(vec![1, 1], 0.1, 1),
            rect(vec![0, 0], 1.5, 2),
        ];
        let mut po = potentially_optimal(&r2, 0.0, 0.0);
        po.sort();
        assert_eq!(po, oracle(&r2, 0.0, 0.0));
        assert_eq!(po, vec![0, 1, 2]);
    }

    #[test]
    fn matches_brute_force_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let n = rng.random_range(1..40);
            let rects: Vec<HyperRect> = (0..n)
                .map(|i| {
                    let levels = (0..3).map(|_| rng.random_range(0..4)).collect();
                    rect(levels, rng.random_range(-1.0..2.0), i)
                })
                .collect();
            let f_min = rects.iter().map(|r| r.f_center).fold(f64::INFINITY, f64::min);
            for eps in [0.0, 1e-4, 0.1] {
                let mut po = potentially_optimal(&rects, f_min, eps);
                po.sort();
                assert_eq!(po, oracle(&rects, f_min, eps));
                let largest = rects
                    .iter()
                    .enumerate()
                    .max_by(|a, b| {
                        a.1.size()
                            .partial_cmp(&b.1.size())
                            .unwrap()
                            .then(b.1.f_center.partial_cmp(&a.1.f_center).unwrap())
                            .then(b.1.eval_index.cmp(&a.1.eval_index))
                    })
                    .unwrap()
                    .0;
                assert!(po.contains(&largest));
            }
        }
    }

    #[test]
    fn unit_interval_trisection() {
        let root = rect(vec![0], 0.5, 0);
        let pieces = trisect(&root, |u| u[0]);
        let mut centers: Vec<f64> = pieces.iter().map(|r| r.center[0]).collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(centers[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(centers[1], 0.5);
        assert_relative_eq!(centers[2], 5.0 / 6.0, epsilon = 1e-15);
        assert!(pieces.iter().all(|r| r.side_levels == vec![1]));
    }

    #[test]
    fn square_trisection_partitions_the_parent() {
        let root = rect(vec![0, 0], 0.0, 0);
        let pieces = trisect(&root, |u| (u[0] - 0.2).powi(2) + 3.0 * (u[1] - 0.6).powi(2));
        assert_eq!(pieces.len(), 5);
        let vol: f64 = pieces.iter().map(HyperRect::volume).sum();
        assert_relative_eq!(vol, 1.0, epsilon = 1e-15);
        // the better direction (x: min over 1/6, 5/6) owns the large pieces
        let big: Vec<&HyperRect> = pieces.iter().filter(|r| r.volume() > 0.2).collect();
        assert_eq!(big.len(), 2);
        assert!(big.iter().all(|r| r.center[1] == 0.5));

        let deeper = rect(vec![1, 2], 0.0, 0);
        let pieces = trisect(&deeper, |u| u[0]);
        assert_eq!(pieces.len(), 3);
        assert_relative_eq!(pieces.iter().map(HyperRect::volume).sum::<f64>(), deeper.volume(), epsilon = 1e-15);
    }

    #[test]
    fn linear_1d_reaches_left_end() {
        let r = minimize(|x| x[0], &SearchBox::unit(1), &DirectConfig { max_evals: 30, epsilon: 1e-4 }).unwrap();
        assert!(r.x_best[0] <= 1.0 / 18.0 + 1e-15, "{:?}", r.x_best);
        assert_eq!(r.evals_used, 30);
    }

    #[test]
    fn constant_objective_returns_first_center() {
        let r = minimize(|_| 3.0, &SearchBox::unit(4), &DirectConfig::default()).unwrap();
        assert_eq!(r.x_best, vec![0.5; 4]);
        assert_eq!(r.f_best, 3.0);
    }

    #[test]
    fn shifted_sphere_against_grid_oracle() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>();
        let r = minimize(f, &SearchBox::unit(2), &DirectConfig { max_evals: 150, epsilon: 1e-4 }).unwrap();
        let mut grid_min = f64::INFINITY;
        for i in 0..=1000 {
            for j in 0..=1000 {
                grid_min = grid_min.min(f(&[i as f64 * 1e-3, j as f64 * 1e-3]));
            }
        }
        assert!(r.f_best - grid_min <= 1e-3, "{} vs {}", r.f_best, grid_min);
        let centered = minimize(|x| x.iter().map(|v| (v - 0.5).powi(2)).sum(), &SearchBox::unit(2), &DirectConfig { max_evals: 150, epsilon: 1e-4 }).unwrap();
        assert!(centered.f_best <= 1e-4);
    }

    #[test]
    fn maps_into_non_unit_box_and_stays_inside() {
        let bx = SearchBox::new(vec![-2.0, 10.0], vec![1.0, 10.5]).unwrap();
        let r = minimize(|x| (x[0] + 1.5).powi(2) + (x[1] - 10.1).powi(2), &bx, &DirectConfig::default()).unwrap();
        assert!(r.trace.iter().all(|(x, _)| bx.contains(x)));
        assert!(r.f_best < 1e-3);
    }

    #[test]
    fn non_finite_values_become_large() {
        let r = minimize(|x| if x[0] > 0.4 { f64::NAN } else { x[0] }, &SearchBox::unit(1), &DirectConfig::default()).unwrap();
        assert!(r.trace.iter().all(|(_, f)| f.is_finite()));
        assert!(r.f_best < 0.1);
    }

    #[test]
    fn budget_prefix_property() {
        let f = |x: &[f64]| (x[0] - 0.71).powi(2) + (x[1] - 0.13).abs() + (3.0 * x[2]).sin();
        let mut prev = f64::INFINITY;
        let mut prev_trace: Vec<(Vec<f64>, f64)> = Vec::new();
        for budget in [1, 5, 17, 60, 100, 250, 400] {
            let r = minimize(f, &SearchBox::unit(3), &DirectConfig { max_evals: budget, epsilon: 1e-4 }).unwrap();
            assert!(r.f_best <= prev);
            assert_eq!(&r.trace[..prev_trace.len()], &prev_trace[..]);
            prev = r.f_best;
            prev_trace = r.trace;
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(SearchBox::new(vec![0.0], vec![0.0]).is_err());
        assert!(SearchBox::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(minimize(|_| 0.0, &SearchBox::unit(1), &DirectConfig { max_evals: 0, epsilon: 0.0 }).is_err());
    }
}
