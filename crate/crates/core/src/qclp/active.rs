//! Dense active-set machinery shared by the projection and the path solver.

use crate::linalg::dot;

/// Active constraint indices with a Cholesky factor of their Gram matrix.
#[derive(Clone, Debug, Default)]
pub(crate) struct ActiveSet {
    pub idx: Vec<usize>,
    gram: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
}

impl ActiveSet {
    pub fn contains(&self, j: usize) -> bool {
        self.idx.contains(&j)
    }

    /// Appends constraint `j`; fails when its normal is (numerically) in the
    /// span of the active normals.
    pub fn push(&mut self, j: usize, normals: &[Vec<f64>]) -> bool {
        let g = &normals[j];
        let col: Vec<f64> = self.idx.iter().map(|&a| dot(&normals[a], g)).collect();
        let gg = dot(g, g);
        let k = self.idx.len();
        let mut l = vec![0.0; k + 1];
        for r in 0..k {
            let s: f64 = (0..r).map(|c| self.chol[r][c] * l[c]).sum();
            l[r] = (col[r] - s) / self.chol[r][r];
        }
        let piv = gg - l[..k].iter().map(|v| v * v).sum::<f64>();
        if !(piv > 1e-13 * gg.max(f64::MIN_POSITIVE)) {
            return false;
        }
        l[k] = piv.sqrt();
        for (r, row) in self.gram.iter_mut().enumerate() {
            row.push(col[r]);
        }
        let mut last = col;
        last.push(gg);
        self.gram.push(last);
        self.chol.push(l);
        self.idx.push(j);
        true
    }

    /// Removes the constraint at position `pos` and refactors.
    pub fn remove(&mut self, pos: usize) {
        self.idx.remove(pos);
        self.gram.remove(pos);
        for row in &mut self.gram {
            row.remove(pos);
        }
        self.refactor();
    }

    fn refactor(&mut self) {
        let k = self.idx.len();
        let mut chol = vec![vec![0.0; 0]; k];
        for r in 0..k {
            let mut row = vec![0.0; r + 1];
            for c in 0..=r {
                if c == r {
                    let s: f64 = (0..r).map(|m| row[m] * row[m]).sum();
                    row[r] = (self.gram[r][r] - s).max(f64::MIN_POSITIVE).sqrt();
                } else {
                    let s: f64 = (0..c).map(|m| row[m] * chol[c][m]).sum();
                    row[c] = (self.gram[r][c] - s) / chol[c][c];
                }
            }
            chol[r] = row;
        }
        self.chol = chol;
    }

    /// Solves `M x = v` with `M` the active Gram matrix.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let k = self.idx.len();
        let mut y = vec![0.0; k];
        for r in 0..k {
            let s: f64 = (0..r).map(|c| self.chol[r][c] * y[c]).sum();
            y[r] = (v[r] - s) / self.chol[r][r];
        }
        for r in (0..k).rev() {
            let s: f64 = (r + 1..k).map(|c| self.chol[c][r] * y[c]).sum();
            y[r] = (y[r] - s) / self.chol[r][r];
        }
        y
    }

    /// `N^T v` for the active normals `N`.
    pub fn project_coeffs(&self, normals: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        self.idx.iter().map(|&a| dot(&normals[a], v)).collect()
    }

    /// `sum_k coef[k] * normals[idx[k]]`.
    pub fn combine(&self, normals: &[Vec<f64>], coef: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        for (&a, &c) in self.idx.iter().zip(coef) {
            for (o, g) in out.iter_mut().zip(&normals[a]) {
                *o += c * g;
            }
        }
        out
    }
}

pub(crate) enum Projection {
    Solved {
        point: Vec<f64>,
        active: ActiveSet,
    },
    Infeasible,
    NotConverged,
}

/// Euclidean projection of `z` onto `{y : normals[j]·y <= bounds[j]}` by the
/// dual active-set method of Goldfarb and Idnani (identity Hessian).
pub(crate) fn project_polyhedron(
    z: &[f64],
    normals: &[Vec<f64>],
    bounds: &[f64],
    tol: f64,
    max_iter: usize,
) -> Projection {
    let d = z.len();
    let mut y = z.to_vec();
    let mut active = ActiveSet::default();
    let mut u: Vec<f64> = Vec::new();
    let mut iters = 0usize;
    let scale: Vec<f64> = normals.iter().map(|g| dot(g, g).sqrt().max(1.0)).collect();

    loop {
        // most violated constraint, scaled by normal length
        let mut p = None;
        let mut worst = tol;
        for (j, g) in normals.iter().enumerate() {
            if active.contains(j) {
                continue;
            }
            let v = (dot(g, &y) - bounds[j]) / scale[j];
            if v > worst {
                worst = v;
                p = Some(j);
            }
        }
        let Some(p) = p else {
            return Projection::Solved { point: y, active };
        };
        let mut up = 0.0;
        loop {
            iters += 1;
            if iters > max_iter {
                return Projection::NotConverged;
            }
            // >= convention: normals are -g, so N^T N is the g-Gram and
            // N^T n_p = G_A g_p; the step direction is -g_p + G_A^T r
            let gp = &normals[p];
            let r = active.solve(&active.project_coeffs(normals, gp));
            let mut zdir = active.combine(normals, &r, d);
            for (z, g) in zdir.iter_mut().zip(gp) {
                *z -= g;
            }
            let np: Vec<f64> = gp.iter().map(|v| -v).collect();
            let mut t1 = f64::INFINITY;
            let mut k = usize::MAX;
            for (pos, &rj) in r.iter().enumerate() {
                if rj > 1e-14 {
                    let t = u[pos] / rj;
                    if t < t1 {
                        t1 = t;
                        k = pos;
                    }
                }
            }
            let zz = dot(&zdir, &np);
            let slack = -(dot(&normals[p], &y) - bounds[p]);
            let t2 = if dot(&zdir, &zdir) > 1e-24 * dot(&np, &np).max(1.0) && zz > 0.0 {
                (-slack / zz).max(0.0)
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Projection::Infeasible;
            }
            for (uj, rj) in u.iter_mut().zip(&r) {
                *uj -= t * rj;
            }
            up += t;
            if t2.is_finite() {
                for (yv, zv) in y.iter_mut().zip(&zdir) {
                    *yv += t * zv;
                }
            }
            if t2 <= t1 {
                if active.push(p, normals) {
                    u.push(up);
                } else {
                    return Projection::NotConverged;
                }
                break;
            }
            active.remove(k);
            u.remove(k);
        }
    }
}
