//! Online centroid learner: update rules, radius calibration and the
//! false-positive-protected variant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{anomaly_score, CentroidState, Point};

/// Outgoing-point policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Growing window: every point is kept and `n` increases.
    Infinite,
    /// The center of mass itself is removed; no stored points needed.
    AverageOut,
    OldestOut,
    RandomOut,
    /// The nearest stored neighbor of the incoming point is removed.
    NearestOut,
}

impl UpdateRule {
    pub fn name(self) -> &'static str {
        match self {
            UpdateRule::Infinite => "infinite",
            UpdateRule::AverageOut => "average_out",
            UpdateRule::OldestOut => "oldest_out",
            UpdateRule::RandomOut => "random_out",
            UpdateRule::NearestOut => "nearest_out",
        }
    }

    pub fn needs_working_set(self) -> bool {
        matches!(
            self,
            UpdateRule::OldestOut | UpdateRule::RandomOut | UpdateRule::NearestOut
        )
    }
}

/// `c' = (1 - 1/n) c + x/n`, then `n' = n + 1`.
///
/// Here `window` is the 1-based position of the incoming point, so a center
/// averaged over `m` points carries `window = m + 1`.
///
/// Stored points, if any, are dropped: the center is no longer the mean of a
/// fixed-size set.
pub fn update_infinite(state: &mut CentroidState, x: &[f64]) -> Result<()> {
    state.center.check_dim(x.len())?;
    let inv = 1.0 / state.window as f64;
    for (c, xi) in state.center.coords_mut().iter_mut().zip(x) {
        *c = (1.0 - inv) * *c + inv * xi;
    }
    state.window += 1;
    state.working_set = None;
    Ok(())
}

/// Finite-horizon update `c' = c + (x - x_out)/n`. Returns the removed point
/// (the old center for average-out).
pub fn update_finite<R: Rng + ?Sized>(
    state: &mut CentroidState,
    x: &[f64],
    rule: UpdateRule,
    rng: &mut R,
) -> Result<Point> {
    state.center.check_dim(x.len())?;
    let n = state.window as f64;
    let removed = match rule {
        UpdateRule::Infinite => {
            return Err(Error::param("rule", "infinite is not a finite-horizon rule"))
        }
        UpdateRule::AverageOut => {
            // Stored points no longer determine the center.
            state.working_set = None;
            state.center.clone()
        }
        UpdateRule::OldestOut | UpdateRule::RandomOut | UpdateRule::NearestOut => {
            let ws = state
                .working_set
                .as_mut()
                .ok_or(Error::MissingWorkingSet(rule.name()))?;
            if ws.is_empty() {
                return Err(Error::Empty("working set"));
            }
            let idx = match rule {
                UpdateRule::OldestOut => ws.oldest(),
                UpdateRule::RandomOut => rng.random_range(0..ws.len()),
                _ => ws.nearest(x),
            };
            ws.replace(idx, Point::from_vec_unchecked(x.to_vec()))
        }
    };
    for ((c, xi), ri) in state.center.coords_mut().iter_mut().zip(x).zip(removed.iter()) {
        *c += (xi - ri) / n;
    }
    Ok(removed)
}

/// Replace the stored point at `idx` directly, as the nearest-out rule would
/// when `x` falls in that point's cell.
pub(crate) fn replace_at(state: &mut CentroidState, idx: usize, x: &[f64]) -> Result<Point> {
    let n = state.window as f64;
    let ws = state
        .working_set
        .as_mut()
        .ok_or(Error::MissingWorkingSet("nearest_out"))?;
    if idx >= ws.len() {
        return Err(Error::IndexOutOfRange {
            index: idx,
            len: ws.len(),
        });
    }
    let removed = ws.replace(idx, Point::from_vec_unchecked(x.to_vec()));
    for ((c, xi), ri) in state.center.coords_mut().iter_mut().zip(x).zip(removed.iter()) {
        *c += (xi - ri) / n;
    }
    Ok(removed)
}

/// Empirical `(1 - alpha)`-quantile of distances to `center`, interpolating
/// linearly between order statistics.
pub fn radius_from_quantile(points: &[Point], center: &[f64], alpha: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("calibration points"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} not in (0, 1)")));
    }
    let mut d: Vec<f64> = points
        .iter()
        .map(|p| {
            p.check_dim(center.len())?;
            Ok(linalg::dist(p, center))
        })
        .collect::<Result<_>>()?;
    d.sort_by(f64::total_cmp);
    let h = (d.len() - 1) as f64 * (1.0 - alpha);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(d.len() - 1);
    Ok(d[lo] + (h - lo as f64) * (d[hi] - d[lo]))
}

/// Fraction of holdout points scored above the radius.
pub fn estimate_fp_rate(state: &CentroidState, holdout: &[Point]) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::Empty("holdout"));
    }
    let mut rejected = 0usize;
    for h in holdout {
        if anomaly_score(state, h)? > state.radius {
            rejected += 1;
        }
    }
    Ok(rejected as f64 / holdout.len() as f64)
}

/// How long online updates stay off after a false-positive breach.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cooldown {
    /// Updates stay off for the rest of the run.
    Permanent,
    Steps(u64),
}

/// What a protected step did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// Innocuous point outside the radius; nothing changed.
    Ignored,
    /// Updates are switched off after an earlier reset.
    Frozen,
    /// False-positive rate exceeded alpha; state restored to the safe snapshot.
    Reset,
}

/// Centroid learner that falls back to a safe snapshot when its estimated
/// false-positive rate on a fixed innocuous holdout exceeds `alpha`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtectedLearnerState {
    pub state: CentroidState,
    pub alpha: f64,
    pub safe_state: CentroidState,
    pub holdout: Vec<Point>,
    pub cooldown: Cooldown,
    frozen_for: Option<u64>,
    // Largest holdout distance from the safe center; lets the FP check skip
    // the holdout scan while no holdout point can lie outside the ball.
    holdout_reach: f64,
}

impl ProtectedLearnerState {
    pub fn new(state: CentroidState, alpha: f64, holdout: Vec<Point>) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::param("alpha", format!("{alpha} not in [0, 1)")));
        }
        if holdout.is_empty() {
            return Err(Error::Empty("holdout"));
        }
        let mut reach: f64 = 0.0;
        for h in &holdout {
            h.check_dim(state.dim())?;
            reach = reach.max(linalg::dist(h, &state.center));
        }
        Ok(Self {
            safe_state: state.clone(),
            state,
            alpha,
            holdout,
            cooldown: Cooldown::Permanent,
            frozen_for: None,
            holdout_reach: reach,
        })
    }

    pub fn with_cooldown(mut self, cooldown: Cooldown) -> Self {
        self.cooldown = cooldown;
        self
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen_for.is_some()
    }

    pub fn fp_rate(&self) -> f64 {
        let shift = linalg::dist(&self.state.center, &self.safe_state.center);
        if shift + self.holdout_reach <= self.state.radius {
            return 0.0;
        }
        let r2 = self.state.radius * self.state.radius;
        let out = self
            .holdout
            .iter()
            .filter(|h| linalg::dist_sq(h, &self.state.center) > r2)
            .count();
        out as f64 / self.holdout.len() as f64
    }

    fn breached(&self) -> bool {
        self.fp_rate() > self.alpha
    }

    fn reset(&mut self) -> StepOutcome {
        self.state = self.safe_state.clone();
        self.frozen_for = match self.cooldown {
            Cooldown::Permanent => Some(u64::MAX),
            Cooldown::Steps(0) => None,
            Cooldown::Steps(k) => Some(k),
        };
        StepOutcome::Reset
    }

    /// Present one training point. Adversarial points are applied as given
    /// (the attacker guarantees acceptance); innocuous points only if they
    /// fall inside the current radius. Both use the average-out update.
    pub fn step(&mut self, incoming: &[f64], is_adversarial: bool) -> Result<StepOutcome> {
        self.state.center.check_dim(incoming.len())?;
        if let Some(left) = self.frozen_for {
            self.frozen_for = match left {
                u64::MAX => Some(u64::MAX),
                0 | 1 => None,
                k => Some(k - 1),
            };
            return Ok(StepOutcome::Frozen);
        }
        if self.breached() {
            return Ok(self.reset());
        }
        let r2 = self.state.radius * self.state.radius;
        if !is_adversarial && linalg::dist_sq(incoming, &self.state.center) > r2 {
            return Ok(StepOutcome::Ignored);
        }
        let inv = 1.0 / self.state.window as f64;
        for (c, x) in self.state.center.coords_mut().iter_mut().zip(incoming) {
            *c += inv * (x - *c);
        }
        if self.breached() {
            return Ok(self.reset());
        }
        Ok(StepOutcome::Applied)
    }
}

/// Convenience wrapper matching the operation form `p' = step(p, x, flag)`.
pub fn protected_step(
    p: &mut ProtectedLearnerState,
    incoming: &[f64],
    is_adversarial: bool,
) -> Result<StepOutcome> {
    p.step(incoming, is_adversarial)
}

/// Versioned checkpoint record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub state: CentroidState,
}

impl Snapshot {
    pub const VERSION: u32 = 1;

    pub fn to_json(state: &CentroidState) -> Result<String> {
        Ok(serde_json::to_string(&Snapshot {
            version: Self::VERSION,
            state: state.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<CentroidState> {
        let snap: Snapshot = serde_json::from_str(s)?;
        if snap.version != Self::VERSION {
            return Err(Error::Format {
                what: "snapshot",
                reason: format!("unsupported version {}", snap.version),
            });
        }
        Ok(snap.state)
    }
}
