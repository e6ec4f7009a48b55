//! Geometric primitives shared by the learner, the attacks and the harness.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// A finite point in feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point coordinates"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Point(coords))
    }

    pub fn zeros(d: usize) -> Self {
        Point(vec![0.0; d.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Point(coords)
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

/// The stored points of a finite-horizon learner with insertion stamps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkingSet {
    points: Vec<Point>,
    timestamps: Vec<u64>,
    next_stamp: u64,
}

impl WorkingSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("working set"))?;
        let d = first.dim();
        for p in &points {
            p.check_dim(d)?;
        }
        let n = points.len() as u64;
        Ok(Self {
            points,
            timestamps: (0..n).collect(),
            next_stamp: n,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    /// Index of the oldest point.
    pub fn oldest(&self) -> usize {
        self.timestamps
            .iter()
            .enumerate()
            .min_by_key(|(_, t)| **t)
            .map(|(i, _)| i)
            .expect("non-empty working set")
    }

    /// Nearest stored point to `x`; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = linalg::dist_sq(p, x);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Replace slot `i` with `x`, stamping it as the newest point.
    pub fn replace(&mut self, i: usize, x: Point) -> Point {
        self.timestamps[i] = self.next_stamp;
        self.next_stamp += 1;
        std::mem::replace(&mut self.points[i], x)
    }

    pub fn mean(&self) -> Point {
        let d = self.dim();
        let mut c = vec![0.0; d];
        for p in &self.points {
            linalg::axpy(1.0, p, &mut c);
        }
        let n = self.points.len() as f64;
        c.iter_mut().for_each(|x| *x /= n);
        Point(c)
    }
}

/// Complete mutable state of a centroid learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidState {
    pub center: Point,
    pub radius: f64,
    pub window: usize,
    pub working_set: Option<WorkingSet>,
}

impl CentroidState {
    /// Learner that keeps only its center (infinite horizon or average-out).
    pub fn new(center: Point, radius: f64, window: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonPositiveRadius(radius));
        }
        if window == 0 {
            return Err(Error::param("window", "must be at least 1"));
        }
        Ok(Self {
            center,
            radius,
            window,
            working_set: None,
        })
    }

    /// Learner storing its points; the center is their mean.
    pub fn with_working_set(points: Vec<Point>, radius: f64) -> Result<Self> {
        let ws = WorkingSet::new(points)?;
        let mut s = Self::new(ws.mean(), radius, ws.len())?;
        s.working_set = Some(ws);
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Full recomputation of the center from the stored points, if any.
    pub fn recompute_center(&self) -> Option<Point> {
        self.working_set.as_ref().map(WorkingSet::mean)
    }

    /// Largest coordinate deviation between the incremental and recomputed
    /// center; zero when no working set is stored.
    pub fn center_drift(&self) -> f64 {
        match self.recompute_center() {
            Some(c) => c
                .iter()
                .zip(self.center.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            None => 0.0,
        }
    }

    pub fn accepts(&self, x: &[f64]) -> Result<bool> {
        Ok(anomaly_score(self, x)? <= self.radius)
    }
}

/// Distance of `x` to the learner's center; `x` is anomalous iff the score
/// exceeds the radius.
pub fn anomaly_score(state: &CentroidState, x: &[f64]) -> Result<f64> {
    if x.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: x.len(),
        });
    }
    Ok(linalg::dist(x, &state.center))
}

/// Attack target, its unit direction from the initial center, and that center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackContext {
    pub attack_point: Point,
    pub direction: Point,
    pub initial_center: Point,
}

impl AttackContext {
    pub fn new(attack_point: Point, initial_center: Point) -> Result<Self> {
        initial_center.check_dim(attack_point.dim())?;
        let diff = linalg::sub(&attack_point, &initial_center);
        let len = linalg::norm(&diff);
        if len == 0.0 {
            return Err(Error::param(
                "attack_point",
                "coincides with the initial center",
            ));
        }
        let direction = Point(diff.into_iter().map(|x| x / len).collect());
        Ok(Self {
            attack_point,
            direction,
            initial_center,
        })
    }

    /// Context with a given direction; the attack point is placed at unit
    /// distance along it.
    pub fn from_direction(direction: Point, initial_center: Point) -> Result<Self> {
        initial_center.check_dim(direction.dim())?;
        let len = linalg::norm(&direction);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::param("direction", format!("norm {len} is not 1")));
        }
        let attack_point = Point(
            initial_center
                .iter()
                .zip(direction.iter())
                .map(|(c, a)| c + a)
                .collect(),
        );
        Ok(Self {
            attack_point,
            direction,
            initial_center,
        })
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }
}

/// Projection of the center shift onto the attack direction, in radii.
pub fn relative_displacement(state: &CentroidState, ctx: &AttackContext) -> Result<f64> {
    if !(state.radius > 0.0) {
        return Err(Error::NonPositiveRadius(state.radius));
    }
    state.center.check_dim(ctx.dim())?;
    Ok(displacement_of(&state.center, ctx, state.radius))
}

#[inline]
pub(crate) fn displacement_of(center: &[f64], ctx: &AttackContext, radius: f64) -> f64 {
    center
        .iter()
        .zip(ctx.initial_center.iter())
        .zip(ctx.direction.iter())
        .map(|((c, c0), a)| (c - c0) * a)
        .sum::<f64>()
        / radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn score_examples() {
        let s = CentroidState::new(p(&[0.0, 0.0]), 1.0, 1).unwrap();
        assert_eq!(anomaly_score(&s, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(s.accepts(&[0.0, 0.0]).unwrap());
        assert_eq!(anomaly_score(&s, &[2.0, 0.0]).unwrap(), 2.0);
        assert!(!s.accepts(&[2.0, 0.0]).unwrap());
        let s = CentroidState::new(p(&[1.0, 1.0]), 1.0, 1).unwrap();
        assert_eq!(anomaly_score(&s, &[4.0, 5.0]).unwrap(), 5.0);
        assert!(matches!(
            anomaly_score(&s, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(matches!(Point::new(vec![0.0, f64::NAN]), Err(Error::NonFinite(1))));
        assert!(Point::new(vec![]).is_err());
    }

    #[test]
    fn zero_radius_rejected() {
        assert!(matches!(
            CentroidState::new(p(&[0.0]), 0.0, 1),
            Err(Error::NonPositiveRadius(_))
        ));
    }

    #[test]
    fn displacement_examples() {
        let ctx = AttackContext::new(p(&[3.0, 4.0]), p(&[0.0, 0.0])).unwrap();
        assert!((linalg::norm(&ctx.direction) - 1.0).abs() < 1e-12);
        let r = 2.0;
        let mut s = CentroidState::new(p(&[0.0, 0.0]), r, 1).unwrap();
        assert_eq!(relative_displacement(&s, &ctx).unwrap(), 0.0);
        s.center = p(&[r * 0.6, r * 0.8]);
        assert!((relative_displacement(&s, &ctx).unwrap() - 1.0).abs() < 1e-15);
        s.center = p(&[-0.5 * r * 0.6, -0.5 * r * 0.8]);
        assert!((relative_displacement(&s, &ctx).unwrap() + 0.5).abs() < 1e-15);
        s.radius = 0.0;
        assert!(relative_displacement(&s, &ctx).is_err());
    }

    #[test]
    fn working_set_stamps_and_nearest() {
        let mut ws =
            WorkingSet::new(vec![p(&[0.0]), p(&[1.0]), p(&[1.0]), p(&[5.0])]).unwrap();
        assert_eq!(ws.nearest(&[1.0]), 1);
        assert_eq!(ws.oldest(), 0);
        ws.replace(0, p(&[2.0]));
        assert_eq!(ws.oldest(), 1);
        let t = ws.timestamps();
        assert!(t[0] > t[3]);
        assert!(WorkingSet::new(vec![p(&[0.0]), p(&[0.0, 1.0])]).is_err());
    }

    proptest! {
        #[test]
        fn displacement_is_linear(t in -10.0f64..10.0, r in 0.1f64..5.0, ax in -1.0f64..1.0, ay in 0.1f64..1.0) {
            let c0 = p(&[0.3, -0.2]);
            let target = p(&[0.3 + ax, -0.2 + ay]);
            let ctx = AttackContext::new(target, c0.clone()).unwrap();
            let center: Vec<f64> = c0.iter().zip(ctx.direction.iter()).map(|(c, a)| c + t * r * a).collect();
            let s = CentroidState::new(p(&center), r, 1).unwrap();
            prop_assert!((relative_displacement(&s, &ctx).unwrap() - t).abs() < 1e-9);
        }

        #[test]
        fn score_is_translation_covariant(
            c in prop::collection::vec(-5.0f64..5.0, 3),
            x in prop::collection::vec(-5.0f64..5.0, 3),
            v in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let s1 = CentroidState::new(p(&c), 1.0, 1).unwrap();
            let cv: Vec<f64> = c.iter().zip(&v).map(|(a, b)| a + b).collect();
            let xv: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + b).collect();
            let s2 = CentroidState::new(p(&cv), 1.0, 1).unwrap();
            let d = anomaly_score(&s1, &x).unwrap() - anomaly_score(&s2, &xv).unwrap();
            prop_assert!(d.abs() < 1e-9);
        }
    }
}
