//! Linear objective over a polyhedron intersected with a ball.
//!
//! The solver projects the ball center onto the polyhedron, then follows the
//! piecewise-linear path `y(t) = proj_P(c + t a) - c` until it meets the
//! sphere. Along that path `|y(t)|` is nondecreasing, and the first contact
//! point is the maximizer of `a·x` over the intersection.

mod active;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, norm_sq};
use crate::model::{Point, WorkingSet};
use active::{project_polyhedron, Projection};

/// `normal · x <= bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub normal: Vec<f64>,
    pub bound: f64,
}

/// Maximize `(x - anchor)·direction` subject to the linear constraints and
/// `|x - ball_center| <= ball_radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct QclpProblem {
    pub direction: Vec<f64>,
    pub anchor: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    pub ball_center: Vec<f64>,
    pub ball_radius: f64,
    /// Set when vacuous constraints from coincident points were dropped.
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QclpStatus {
    Optimal,
    Infeasible,
    NotConverged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QclpSolution {
    pub status: QclpStatus,
    pub point: Option<Point>,
    /// `-inf` unless a point is present.
    pub objective_value: f64,
    pub iterations: usize,
}

impl QclpSolution {
    fn without_point(status: QclpStatus, iterations: usize) -> Self {
        Self {
            status,
            point: None,
            objective_value: f64::NEG_INFINITY,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == QclpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-6,
            max_iterations: 10_000,
        }
    }
}

impl QclpProblem {
    pub fn new(
        direction: Vec<f64>,
        anchor: Vec<f64>,
        constraints: Vec<LinearConstraint>,
        ball_center: Vec<f64>,
        ball_radius: f64,
    ) -> Result<Self> {
        let d = direction.len();
        if d == 0 {
            return Err(Error::Empty("direction"));
        }
        for v in [&anchor, &ball_center] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        if !(ball_radius > 0.0) || !ball_radius.is_finite() {
            return Err(Error::NonPositiveRadius(ball_radius));
        }
        for c in &constraints {
            if c.normal.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: c.normal.len() });
            }
            if !c.bound.is_finite() || c.normal.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("constraints", "non-finite constraint"));
            }
        }
        if direction.iter().chain(&anchor).chain(&ball_center).any(|v| !v.is_finite()) {
            return Err(Error::param("problem", "non-finite coordinates"));
        }
        Ok(Self {
            direction,
            anchor,
            constraints,
            ball_center,
            ball_radius,
            degenerate: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.direction
            .iter()
            .zip(x.iter().zip(&self.anchor))
            .map(|(a, (x, o))| a * (x - o))
            .sum()
    }

    /// Largest violation over all constraints; `<= 0` means feasible.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let lin = self
            .constraints
            .iter()
            .map(|c| dot(&c.normal, x) - c.bound)
            .fold(f64::NEG_INFINITY, f64::max);
        let ball = crate::linalg::dist(x, &self.ball_center) - self.ball_radius;
        lin.max(ball)
    }

    /// Constraints shifted so that the ball is centered at the origin.
    fn centered(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let normals = self.constraints.iter().map(|c| c.normal.clone()).collect();
        let bounds = self
            .constraints
            .iter()
            .map(|c| c.bound - dot(&c.normal, &self.ball_center))
            .collect();
        (normals, bounds)
    }

    fn finish(&self, y: &[f64], status: QclpStatus, iterations: usize) -> QclpSolution {
        let mut y = y.to_vec();
        let ny = norm(&y);
        if ny > self.ball_radius {
            let s = self.ball_radius / ny;
            y.iter_mut().for_each(|v| *v *= s);
        }
        let x: Vec<f64> = y.iter().zip(&self.ball_center).map(|(a, b)| a + b).collect();
        QclpSolution {
            status,
            objective_value: self.objective(&x),
            point: Some(Point::from_vec_unchecked(x)),
            iterations,
        }
    }
}

/// Voronoi cell of working-set point `i` intersected with the acceptance ball
/// around the working-set mean, with objective `(x - x_i)·direction`.
pub fn build_cell_problem(ws: &WorkingSet, i: usize, direction: &[f64], radius: f64) -> Result<QclpProblem> {
    let mean = ws.mean();
    build_cell_problem_at(ws, i, direction, radius, mean.as_slice())
}

pub(crate) fn build_cell_problem_at(
    ws: &WorkingSet,
    i: usize,
    direction: &[f64],
    radius: f64,
    center: &[f64],
) -> Result<QclpProblem> {
    if i >= ws.len() {
        return Err(Error::IndexOutOfRange { index: i, len: ws.len() });
    }
    let d = ws.dim();
    if direction.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: direction.len() });
    }
    let xi = ws.get(i).as_slice();
    let ni = norm_sq(xi);
    let mut degenerate = false;
    let mut constraints = Vec::with_capacity(ws.len().saturating_sub(1));
    for (j, xj) in ws.points().iter().enumerate() {
        if j == i {
            continue;
        }
        let normal: Vec<f64> = xj.iter().zip(xi).map(|(a, b)| 2.0 * (a - b)).collect();
        if normal.iter().all(|v| *v == 0.0) {
            degenerate = true;
            continue;
        }
        constraints.push(LinearConstraint {
            normal,
            bound: norm_sq(xj) - ni,
        });
    }
    let mut p = QclpProblem::new(direction.to_vec(), xi.to_vec(), constraints, center.to_vec(), radius)?;
    p.degenerate = degenerate;
    Ok(p)
}

/// Maximizes the linear objective over polyhedron ∩ ball.
pub fn solve_qclp(p: &QclpProblem, cfg: &SolverConfig) -> QclpSolution {
    let d = p.dim();
    let (normals, bounds) = p.centered();
    let r = p.ball_radius;
    let a = &p.direction;
    let ftol = cfg.feasibility_tol;

    let (y0, mut active) = match project_polyhedron(&vec![0.0; d], &normals, &bounds, ftol * 1e-3, cfg.max_iterations) {
        Projection::Solved { point, active, .. } => (point, active),
        Projection::Infeasible => return QclpSolution::without_point(QclpStatus::Infeasible, 0),
        Projection::NotConverged => {
            return QclpSolution::without_point(QclpStatus::NotConverged, cfg.max_iterations)
        }
    };
    if norm(&y0) > r + ftol {
        return QclpSolution::without_point(QclpStatus::Infeasible, 0);
    }

    let aa = norm_sq(a).max(1.0);
    let mut t0 = 0.0f64;
    for iter in 1..=cfg.max_iterations {
        let mu_s = active.solve(&active.project_coeffs(&normals, a));
        let mut y_s = active.combine(&normals, &mu_s, d);
        y_s.iter_mut().zip(a).for_each(|(v, a)| *v = a - *v);
        let ha: Vec<f64> = active.idx.iter().map(|&j| bounds[j]).collect();
        let nu_c = active.solve(&ha);
        let y_c = active.combine(&normals, &nu_c, d);
        let at = |t: f64| -> Vec<f64> { y_c.iter().zip(&y_s).map(|(c, s)| c + t * s).collect() };

        let qa = norm_sq(&y_s);
        let mut best = (f64::INFINITY, Event::None);
        let moving = qa > 1e-22 * aa;
        if moving {
            let qb = dot(&y_c, &y_s);
            let qc = norm_sq(&y_c) - r * r;
            let disc = (qb * qb - qa * qc).max(0.0);
            let t = if qb <= 0.0 {
                (-qb + disc.sqrt()) / qa
            } else {
                // stable form of the larger root
                -qc / (qb + disc.sqrt())
            };
            best = (t.max(t0), Event::Ball);
        }
        // multipliers are mu(t) = t mu_s - nu_c
        for (pos, (&ms, &nc)) in mu_s.iter().zip(&nu_c).enumerate() {
            if ms < -1e-14 {
                let t = (nc / ms).max(t0);
                if t < best.0 {
                    best = (t, Event::Drop(pos));
                }
            }
        }
        let ys_norm = qa.sqrt();
        for (j, g) in normals.iter().enumerate() {
            if !moving || active.contains(j) {
                continue;
            }
            let rate = dot(g, &y_s);
            if rate > 1e-12 * norm(g) * ys_norm {
                let t = ((bounds[j] - dot(g, &y_c)) / rate).max(t0);
                if t < best.0 {
                    best = (t, Event::Add(j));
                }
            }
        }
        match best.1 {
            Event::None => return p.finish(&at(t0), QclpStatus::Optimal, iter),
            Event::Ball => return p.finish(&at(best.0), QclpStatus::Optimal, iter),
            Event::Drop(pos) => active.remove(pos),
            Event::Add(j) => {
                if !active.push(j, &normals) {
                    return QclpSolution::without_point(QclpStatus::NotConverged, iter);
                }
            }
        }
        t0 = best.0;
    }
    QclpSolution::without_point(QclpStatus::NotConverged, cfg.max_iterations)
}

#[derive(Clone, Copy, Debug)]
enum Event {
    None,
    Ball,
    Drop(usize),
    Add(usize),
}

/// Smallest distance from the ball center to the part of the polyhedron
/// whose objective is at least `best_so_far`; `+inf` when that part is empty.
/// A value above the radius means no improving point lies in the ball.
pub fn aux_bound(p: &QclpProblem, best_so_far: f64, cfg: &SolverConfig) -> f64 {
    let d = p.dim();
    let (mut normals, mut bounds) = p.centered();
    if best_so_far.is_finite() {
        // (c + y - anchor)·a >= best  <=>  -a·y <= (c - anchor)·a - best
        normals.push(p.direction.iter().map(|v| -v).collect());
        bounds.push(p.objective(&p.ball_center) - best_so_far);
    }
    match project_polyhedron(&vec![0.0; d], &normals, &bounds, cfg.feasibility_tol * 1e-3, cfg.max_iterations) {
        Projection::Solved { point, .. } => norm(&point),
        Projection::Infeasible => f64::INFINITY,
        // cannot certify a skip
        Projection::NotConverged => 0.0,
    }
}

/// Bound used to skip the QCLP of cell `i` in the greedy outer loop.
pub fn aux_qp_prune(ws: &WorkingSet, i: usize, direction: &[f64], radius: f64, best_so_far: f64) -> Result<f64> {
    if best_so_far.is_nan() {
        return Err(Error::param("best_so_far", "NaN"));
    }
    let p = build_cell_problem(ws, i, direction, radius)?;
    Ok(aux_bound(&p, best_so_far, &SolverConfig::default()))
}

/// Grid search over the ball's bounding box with one local refinement pass
/// at `grid_step / 50` around the best grid point. Test oracle, `d <= 3`.
pub fn brute_force_oracle(p: &QclpProblem, grid_step: f64) -> Result<QclpSolution> {
    let d = p.dim();
    if d > 3 {
        return Err(Error::param("dimension", format!("brute force supports d <= 3, got {d}")));
    }
    if !(grid_step > 0.0) {
        return Err(Error::param("grid_step", "must be positive"));
    }
    let lo: Vec<f64> = p.ball_center.iter().map(|c| c - p.ball_radius).collect();
    let hi: Vec<f64> = p.ball_center.iter().map(|c| c + p.ball_radius).collect();
    let coarse = grid_argmax(p, &lo, &hi, grid_step, None);
    let Some((x, _)) = coarse.clone() else {
        return Ok(QclpSolution::without_point(QclpStatus::Infeasible, 0));
    };
    let lo2: Vec<f64> = x.iter().map(|v| v - 2.0 * grid_step).collect();
    let hi2: Vec<f64> = x.iter().map(|v| v + 2.0 * grid_step).collect();
    let (x, v) = grid_argmax(p, &lo2, &hi2, grid_step / 50.0, coarse).expect("seeded");
    Ok(QclpSolution {
        status: QclpStatus::Optimal,
        point: Some(Point::from_vec_unchecked(x)),
        objective_value: v,
        iterations: 0,
    })
}

fn grid_argmax(
    p: &QclpProblem,
    lo: &[f64],
    hi: &[f64],
    step: f64,
    seed: Option<(Vec<f64>, f64)>,
) -> Option<(Vec<f64>, f64)> {
    let d = p.dim();
    let counts: Vec<usize> = lo.iter().zip(hi).map(|(l, h)| ((h - l) / step).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let mut best = seed;
    let mut x = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for k in 0..d {
            x[k] = lo[k] + (rem % counts[k]) as f64 * step;
            rem /= counts[k];
        }
        if p.residual(&x) > 0.0 {
            continue;
        }
        let v = p.objective(&x);
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((x.clone(), v));
        }
    }
    best
}
