//! Optimal poisoning strategies for each learner regime.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvWriter};
use crate::learner::replace_at;
use crate::linalg::{self, dot};
use crate::model::{displacement_of, AttackContext, CentroidState, Point};
use crate::qclp::{aux_bound, build_cell_problem_at, solve_qclp, QclpStatus, SolverConfig};

/// `c + r a`: the farthest accepted point along the attack direction.
pub fn optimal_attack_point(state: &CentroidState, ctx: &AttackContext) -> Result<Point> {
    state.center.check_dim(ctx.dim())?;
    let mut x = state.center.as_slice().to_vec();
    linalg::axpy(state.radius, &ctx.direction, &mut x);
    Point::new(x)
}

/// `f(X) = X + a` for the unit-radius stochastic model.
pub fn limited_control_strategy(x: &[f64], ctx: &AttackContext) -> Result<Point> {
    if x.len() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.dim(),
            got: x.len(),
        });
    }
    Point::new(x.iter().zip(ctx.direction.iter()).map(|(x, a)| x + a).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub solver: SolverConfig,
    /// Skip cells whose restricted auxiliary QP shows no improving point.
    pub prune: bool,
    /// Override the argmax when a cached cell solution would leave the ball.
    pub immune_safeguard: bool,
    /// Record the distance of each emitted point from the span of the
    /// direction and the stored points.
    pub check_representer: bool,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            prune: true,
            immune_safeguard: true,
            check_representer: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u64,
    pub displacement: f64,
    pub replaced_index: usize,
    pub objective_value: f64,
    pub skipped_cells: usize,
}

pub const TRACE_HEADER: [&str; 5] = [
    "iteration",
    "displacement",
    "replaced_index",
    "objective_value",
    "skipped_cells",
];

#[derive(Clone, Debug, PartialEq)]
struct Cached {
    point: Vec<f64>,
    value: f64,
}

/// Bookkeeping across greedy iterations.
#[derive(Clone, Debug, Default)]
pub struct GreedyAttackState {
    cached: Vec<Option<Cached>>,
    pub replaced_history: Vec<(u64, usize)>,
    pub trace: Vec<TraceRow>,
    /// Per-step representer residuals when checking is enabled.
    pub representer_residuals: Vec<f64>,
    /// Steps where the immune-point override fired.
    pub overrides: u64,
    /// Cells whose solve hit the iteration cap (never treated as immune).
    pub unconverged: u64,
}

impl GreedyAttackState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn iterations(&self) -> u64 {
        self.trace.len() as u64
    }

    pub fn cached_solution(&self, i: usize) -> Option<&[f64]> {
        self.cached.get(i).and_then(|c| c.as_ref()).map(|c| c.point.as_slice())
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<W> {
        let mut w = CsvWriter::new(out, &TRACE_HEADER)?;
        for r in &self.trace {
            w.row(&[
                r.iteration.to_string(),
                fmt_f64(r.displacement),
                r.replaced_index.to_string(),
                fmt_f64(r.objective_value),
                r.skipped_cells.to_string(),
            ])?;
        }
        w.into_inner()
    }
}

/// One iteration of the greedy nearest-out attack.
pub fn greedy_step(
    state: &mut CentroidState,
    ctx: &AttackContext,
    gs: &mut GreedyAttackState,
    cfg: &GreedyConfig,
) -> Result<TraceRow> {
    step(state, ctx, gs, cfg, false)
}

/// Greedy step for unit-norm data: each cell solution is projected to the
/// unit sphere and kept only if it stays feasible.
pub fn greedy_step_normalized(
    state: &mut CentroidState,
    ctx: &AttackContext,
    gs: &mut GreedyAttackState,
    cfg: &GreedyConfig,
) -> Result<TraceRow> {
    step(state, ctx, gs, cfg, true)
}

fn step(
    state: &mut CentroidState,
    ctx: &AttackContext,
    gs: &mut GreedyAttackState,
    cfg: &GreedyConfig,
    normalized: bool,
) -> Result<TraceRow> {
    let ws = state
        .working_set
        .as_ref()
        .ok_or(Error::MissingWorkingSet("nearest_out"))?;
    ws.get(0).check_dim(ctx.dim())?;
    if normalized {
        if let Some(p) = ws.points().iter().find(|p| (linalg::norm(p) - 1.0).abs() > 1e-9) {
            return Err(Error::param(
                "working_set",
                format!("normalized attack needs unit-norm points, found norm {}", linalg::norm(p)),
            ));
        }
    }
    let n = ws.len();
    let r = state.radius;
    let c = state.center.as_slice().to_vec();
    let a = ctx.direction.as_slice();
    let ftol = cfg.solver.feasibility_tol;
    if gs.cached.len() != n {
        gs.cached = vec![None; n];
    }

    // duplicates: the lowest index owns the shared cell
    let owner = |i: usize| -> bool { (0..i).all(|j| ws.get(j).as_slice() != ws.get(i).as_slice()) };

    // cheapest bound first: the ball alone caps (x - x_i)·a at (c - x_i)·a + r
    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|i| (dot(&c, a) - dot(ws.get(i), a) + r, i))
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut skipped = 0usize;
    for &(ub, i) in &order {
        if !owner(i) {
            skipped += 1;
            continue;
        }
        let best_val = best.as_ref().map(|b| b.0);
        if let Some(bv) = best_val {
            if ub <= bv {
                skipped += 1;
                continue;
            }
        }
        let p = build_cell_problem_at(ws, i, a, r, &c)?;
        if cfg.prune {
            if let Some(bv) = best_val {
                if aux_bound(&p, bv, &cfg.solver) > r + ftol {
                    skipped += 1;
                    continue;
                }
            }
        }
        let sol = solve_qclp(&p, &cfg.solver);
        match sol.status {
            QclpStatus::Infeasible => {
                gs.cached[i] = None;
                continue;
            }
            QclpStatus::NotConverged => {
                gs.unconverged += 1;
                continue;
            }
            QclpStatus::Optimal => {}
        }
        let mut x = sol.point.expect("optimal has a point").into_inner();
        let mut value = sol.objective_value;
        if normalized {
            let nx = linalg::norm(&x);
            if nx == 0.0 {
                continue;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            if p.residual(&x) > ftol {
                continue;
            }
            value = p.objective(&x);
        }
        gs.cached[i] = Some(Cached { point: x.clone(), value });
        let better = match &best {
            None => true,
            Some((bv, bi, _)) => value > *bv || (value == *bv && i < *bi),
        };
        if better {
            best = Some((value, i, x));
        }
    }
    let Some((mut value, mut idx, mut x)) = best else {
        return Err(Error::Stalled);
    };

    if cfg.immune_safeguard {
        let nf = n as f64;
        let shifted: Vec<f64> = c
            .iter()
            .zip(x.iter().zip(ws.get(idx).iter()))
            .map(|(c, (x, o))| c + (x - o) / nf)
            .collect();
        let mut worst: Option<(f64, usize)> = None;
        for j in 0..n {
            if j == idx {
                continue;
            }
            let Some(cj) = &gs.cached[j] else { continue };
            let excess = linalg::dist(&cj.point, &shifted) - r;
            if excess <= 1e-9 * r {
                continue;
            }
            // stale entries are revalidated against the current geometry
            let valid = linalg::dist(&cj.point, &c) <= r + ftol
                && ws.nearest(&cj.point) == j
                && dot(&cj.point, a) - dot(ws.get(j), a) >= 0.0;
            if !valid {
                gs.cached[j] = None;
                continue;
            }
            if worst.is_none_or(|(e, _)| excess > e) {
                worst = Some((excess, j));
            }
        }
        if let Some((_, j)) = worst {
            let cj = gs.cached[j].take().expect("checked above");
            gs.overrides += 1;
            idx = j;
            value = cj.value;
            x = cj.point;
        }
    }

    let residual = if cfg.check_representer {
        let basis = linalg::orthonormal_basis(
            std::iter::once(a).chain(ws.points().iter().map(|p| p.as_slice())),
            1e-12,
        );
        Some(linalg::residual_norm(&x, &basis))
    } else {
        None
    };

    // keep the emitted point inside the ball exactly
    let dx = linalg::dist(&x, &c);
    if dx > r {
        let s = r / dx;
        x = c.iter().zip(&x).map(|(c, x)| c + (x - c) * s).collect();
    }
    replace_at(state, idx, &x)?;
    gs.cached[idx] = None;
    if let Some(res) = residual {
        gs.representer_residuals.push(res);
    }
    let it = gs.iterations() + 1;
    gs.replaced_history.push((it, idx));
    let row = TraceRow {
        iteration: it,
        displacement: displacement_of(&state.center, ctx, r),
        replaced_index: idx,
        objective_value: value,
        skipped_cells: skipped,
    };
    gs.trace.push(row);
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{update_finite, update_infinite, UpdateRule};
    use crate::model::relative_displacement;
    use crate::rng::{gaussian_vec, unit_vector, RandomSource};

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn optimal_point_examples() {
        let s = CentroidState::new(pt(&[0.0, 0.0]), 1.0, 10).unwrap();
        let ctx = AttackContext::from_direction(pt(&[1.0, 0.0]), pt(&[0.0, 0.0])).unwrap();
        assert_eq!(optimal_attack_point(&s, &ctx).unwrap().as_slice(), &[1.0, 0.0]);
        let s = CentroidState::new(pt(&[0.5, 0.0]), 2.0, 10).unwrap();
        let ctx = AttackContext::from_direction(pt(&[0.0, 1.0]), pt(&[0.0, 0.0])).unwrap();
        assert_eq!(optimal_attack_point(&s, &ctx).unwrap().as_slice(), &[0.5, 2.0]);
    }

    #[test]
    fn average_out_progress_is_one_over_n() {
        let mut s = CentroidState::new(pt(&[0.0, 0.0, 0.0]), 1.0, 100).unwrap();
        let ctx = AttackContext::new(pt(&[5.0, 0.0, 0.0]), pt(&[0.0, 0.0, 0.0])).unwrap();
        let mut rng = RandomSource::new(0).rng();
        for i in 1..=50 {
            let x = optimal_attack_point(&s, &ctx).unwrap();
            assert!(s.accepts(&x).unwrap());
            update_finite(&mut s, &x, UpdateRule::AverageOut, &mut rng).unwrap();
            assert!((relative_displacement(&s, &ctx).unwrap() - i as f64 / 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn infinite_horizon_follows_harmonic_sum() {
        // mean of 10 points: the next point is the 11th
        let mut s = CentroidState::new(pt(&[0.0, 0.0]), 2.0, 11).unwrap();
        let ctx = AttackContext::new(pt(&[0.0, 9.0]), pt(&[0.0, 0.0])).unwrap();
        let mut want = 0.0;
        for i in 1..=200u64 {
            let x = optimal_attack_point(&s, &ctx).unwrap();
            update_infinite(&mut s, &x).unwrap();
            want += 1.0 / (10 + i) as f64;
            assert!((relative_displacement(&s, &ctx).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn limited_control_examples() {
        let ctx = AttackContext::from_direction(pt(&[0.6, 0.8]), pt(&[0.0, 0.0])).unwrap();
        assert_eq!(limited_control_strategy(&[0.0, 0.0], &ctx).unwrap().as_slice(), &[0.6, 0.8]);
        let y = limited_control_strategy(&[3.0, 4.0], &ctx).unwrap();
        assert!((y[0] - 3.6).abs() < 1e-15 && (y[1] - 4.8).abs() < 1e-15);
    }

    #[test]
    fn single_point_set_matches_optimal_point() {
        let mut s = CentroidState::with_working_set(vec![pt(&[0.0, 0.0])], 1.0).unwrap();
        let ctx = AttackContext::from_direction(pt(&[0.0, 1.0]), pt(&[0.0, 0.0])).unwrap();
        let mut gs = GreedyAttackState::new();
        for i in 1..=5 {
            let want = optimal_attack_point(&s, &ctx).unwrap();
            let row = greedy_step(&mut s, &ctx, &mut gs, &GreedyConfig::default()).unwrap();
            assert!(linalg::dist(s.working_set.as_ref().unwrap().get(0), &want) < 1e-9);
            assert!((row.displacement - i as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_pair_picks_reachable_cell() {
        // two points straddling the direction; the second sits further back
        let pts = vec![pt(&[-0.5, 0.2]), pt(&[0.5, -0.3])];
        let mut s = CentroidState::with_working_set(pts, 1.0).unwrap();
        let ctx = AttackContext::from_direction(pt(&[0.0, 1.0]), s.center.clone()).unwrap();
        let mut gs = GreedyAttackState::new();
        let row = greedy_step(&mut s, &ctx, &mut gs, &GreedyConfig::default()).unwrap();
        // brute-force over both cells with a fine grid
        let c = [0.0, -0.05];
        let mut best = (f64::NEG_INFINITY, 0);
        let xs = [[-0.5, 0.2], [0.5, -0.3]];
        for i in 0..2 {
            let mut k = 0.0;
            while k <= 1.0 {
                let th = k * std::f64::consts::TAU;
                for rr in [0.999_999, 0.9, 0.5] {
                    let x = [c[0] + rr * th.cos(), c[1] + rr * th.sin()];
                    let near = if linalg::dist_sq(&x, &xs[0]) <= linalg::dist_sq(&x, &xs[1]) { 0 } else { 1 };
                    if near == i {
                        let v = x[1] - xs[i][1];
                        if v > best.0 {
                            best = (v, i);
                        }
                    }
                }
                k += 1e-5;
            }
        }
        assert_eq!(row.replaced_index, best.1);
        assert!((row.objective_value - best.0).abs() < 1e-3);
    }

    #[test]
    fn greedy_invariants_on_gaussian_data() {
        let src = RandomSource::new(11);
        let mut rng = src.rng();
        let (n, d) = (30, 5);
        let pts: Vec<Point> = (0..n).map(|_| pt(&gaussian_vec(&mut rng, d))).collect();
        let mut s = CentroidState::with_working_set(pts, 3.0).unwrap();
        let ctx = AttackContext::from_direction(pt(&unit_vector(&mut rng, d)), s.center.clone()).unwrap();
        let mut gs = GreedyAttackState::new();
        let cfg = GreedyConfig {
            check_representer: true,
            ..Default::default()
        };
        let mut prev = 0.0;
        for _ in 0..100 {
            let before = s.center.clone();
            let row = greedy_step(&mut s, &ctx, &mut gs, &cfg).unwrap();
            let inserted = s.working_set.as_ref().unwrap().get(row.replaced_index).clone();
            assert!(linalg::dist(&inserted, &before) <= s.radius + 1e-9);
            let step = row.displacement - prev;
            assert!(step >= -1e-12 && step <= 2.0 / n as f64 + 1e-12, "{step}");
            prev = row.displacement;
        }
        assert!(s.center_drift() < 1e-9);
        assert!(gs.representer_residuals.iter().all(|r| *r <= 1e-6));
        assert_eq!(gs.trace.len(), 100);
        let mut buf = Vec::new();
        gs.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,displacement,replaced_index,objective_value,skipped_cells\n"));
        assert_eq!(text.lines().count(), 101);
    }

    #[test]
    fn representer_residual_in_high_dimension() {
        let mut rng = RandomSource::new(5).rng();
        let (n, d) = (8, 40);
        let pts: Vec<Point> = (0..n).map(|_| pt(&gaussian_vec(&mut rng, d))).collect();
        let mut s = CentroidState::with_working_set(pts, 7.0).unwrap();
        let ctx = AttackContext::from_direction(pt(&unit_vector(&mut rng, d)), s.center.clone()).unwrap();
        let mut gs = GreedyAttackState::new();
        let cfg = GreedyConfig {
            check_representer: true,
            ..Default::default()
        };
        for _ in 0..20 {
            greedy_step(&mut s, &ctx, &mut gs, &cfg).unwrap();
        }
        assert!(gs.representer_residuals.iter().all(|r| *r <= 1e-6), "{:?}", gs.representer_residuals);
    }

    #[test]
    fn normalized_attack_progresses() {
        let mut rng = RandomSource::new(3).rng();
        let (n, d) = (50, 10);
        let pts: Vec<Point> = (0..n).map(|_| pt(&unit_vector(&mut rng, d))).collect();
        let mut s = CentroidState::with_working_set(pts, 1.0).unwrap();
        let ctx = AttackContext::from_direction(pt(&unit_vector(&mut rng, d)), s.center.clone()).unwrap();
        let mut gs = GreedyAttackState::new();
        let mut prev = 0.0;
        for _ in 0..50 {
            let row = greedy_step_normalized(&mut s, &ctx, &mut gs, &GreedyConfig::default()).unwrap();
            assert!(row.displacement >= prev - 1e-12);
            prev = row.displacement;
            let ws = s.working_set.as_ref().unwrap();
            assert!((linalg::norm(ws.get(row.replaced_index)) - 1.0).abs() < 1e-12);
        }
        assert!(prev > 0.0);
    }

    #[test]
    fn stall_is_reported() {
        // the ball around the mean never reaches the unit circle, so every
        // projected cell solution is rejected
        let pts = vec![pt(&[1.0, 0.0]), pt(&[-1.0, 0.0])];
        let mut s = CentroidState::with_working_set(pts, 0.5).unwrap();
        let ctx = AttackContext::from_direction(pt(&[0.0, 1.0]), s.center.clone()).unwrap();
        let mut gs = GreedyAttackState::new();
        assert!(matches!(
            greedy_step_normalized(&mut s, &ctx, &mut gs, &GreedyConfig::default()),
            Err(Error::Stalled)
        ));
        assert!(greedy_step(&mut s, &ctx, &mut gs, &GreedyConfig::default()).is_ok());
        let mut plain = CentroidState::new(pt(&[0.0, 0.0]), 1.0, 3).unwrap();
        assert!(greedy_step(&mut plain, &ctx, &mut gs, &GreedyConfig::default()).is_err());
    }
}
