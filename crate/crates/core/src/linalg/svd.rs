//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of the (tall) input are rotated pairwise, cyclic by row, until every
//! pair is orthogonal to within [`ORTHOGONALITY_TOL`] relative to the pair's
//! norms. Working on columns directly keeps small singular values accurate to
//! high relative precision, which is what minor-component adaptation relies on.
//!
//! Output is fully deterministic: fixed sweep order, stable descending sort
//! (ties keep column order), and each left singular vector is signed so that
//! its largest-magnitude entry is positive (lowest row index wins ties).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{dot, Matrix};
use crate::{Error, Result};

/// Pairs whose normalised inner product is below this are considered orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-14;
/// Hard cap on full Jacobi sweeps.
pub const MAX_SWEEPS: usize = 60;
/// `σᵢ` counts toward the numerical rank iff `σᵢ > RANK_TOL · σ₀`.
pub const RANK_TOL: f64 = 1e-12;

/// Thin SVD `W = U · diag(σ) · Vᵀ` with `k = min(m, n)` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    /// `m × k`, orthonormal columns.
    pub u: Matrix,
    /// Nonincreasing, nonnegative, length `k`.
    pub sigma: Vec<f64>,
    /// `k × n`, orthonormal rows.
    pub vt: Matrix,
}

impl SvdFactors {
    /// Number of components `k = min(m, n)`.
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// Numerical rank `R`: singular values above `RANK_TOL · σ₀`.
    pub fn rank(&self) -> usize {
        let cutoff = self.sigma.first().copied().unwrap_or(0.0) * RANK_TOL;
        self.sigma.iter().filter(|&&s| s > cutoff).count()
    }

    /// The `i`-th left singular vector.
    pub fn u_col(&self, i: usize) -> Vec<f64> {
        self.u.col(i)
    }

    /// The `i`-th right singular vector.
    pub fn v_col(&self, i: usize) -> &[f64] {
        self.vt.row(i)
    }
}

/// A contiguous group of singular components `[start, end)` in descending-σ order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentRange {
    pub start: usize,
    pub end: usize,
}

impl ComponentRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// The `r` principal components.
    pub fn top(r: usize) -> Self {
        Self { start: 0, end: r }
    }

    /// The `r` minor components out of `k`.
    pub fn bottom(r: usize, k: usize) -> Self {
        Self { start: k.saturating_sub(r), end: k }
    }

    pub fn full(k: usize) -> Self {
        Self { start: 0, end: k }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks `start < end ≤ k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.start < self.end && self.end <= k {
            Ok(())
        } else {
            Err(Error::InvalidRange { start: self.start, end: self.end, k })
        }
    }
}

/// Computes the thin SVD of `w`.
pub fn svd(w: &Matrix) -> Result<SvdFactors> {
    if w.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(index) = w.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (m, n) = w.shape();
    let transposed = m < n;
    // Work on the tall orientation: `rows ≥ k = cols`.
    let (rows, k) = if transposed { (n, m) } else { (m, n) };
    let scale = w.max_abs();

    // Column-major working copy, scaled into [-1, 1].
    let mut cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            (0..rows)
                .map(|i| {
                    let v = if transposed { w[(j, i)] } else { w[(i, j)] };
                    if scale > 0.0 {
                        v / scale
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    let mut off = 0.0;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        off = 0.0;
        for p in 0..k.saturating_sub(1) {
            for q in p + 1..k {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                let measure = libm::fabs(gamma) / libm::sqrt(alpha) / libm::sqrt(beta);
                off = f64::max(off, measure);
                if measure < ORTHOGONALITY_TOL {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::hypot(1.0, zeta));
                let c = 1.0 / libm::hypot(1.0, t);
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if off < ORTHOGONALITY_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps, off_diagonal: off });
    }

    let norms: Vec<f64> = cols.iter().map(|c| libm::sqrt(dot(c, c))).collect();
    let mut order: Vec<usize> = (0..k).collect();
    // Stable: equal singular values keep their column order.
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut left: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut right: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut sigma = Vec::with_capacity(k);
    let mut null = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let nrm = norms[j];
        if nrm > f64::MIN_POSITIVE {
            left.push(cols[j].iter().map(|x| x / nrm).collect());
        } else {
            left.push(vec![0.0; rows]);
            null.push(slot);
        }
        right.push(core::mem::take(&mut v[j]));
        sigma.push(nrm * scale);
    }
    for &slot in &null {
        left[slot] = complete_basis(&left, slot, &null, rows);
    }

    // In the tall orientation `A = L Σ Rᵀ`; for a wide input `W = Aᵀ = R Σ Lᵀ`.
    let (mut ucols, mut vcols) = if transposed { (right, left) } else { (left, right) };
    for (u, vv) in ucols.iter_mut().zip(vcols.iter_mut()) {
        let mut best = 0;
        for (i, x) in u.iter().enumerate() {
            if libm::fabs(*x) > libm::fabs(u[best]) {
                best = i;
            }
        }
        if u[best] < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            vv.iter_mut().for_each(|x| *x = -*x);
        }
    }

    let u = Matrix::from_fn(m, k, |i, j| ucols[j][i]);
    let vt = Matrix::from_fn(k, n, |i, j| vcols[i][j]);
    Ok(SvdFactors { u, sigma, vt })
}

#[inline]
fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// A unit vector orthogonal to every non-null column in `basis` and to the
/// null columns already completed before `slot`. Picks the standard basis
/// vector with the largest residual (lowest index on ties), orthogonalised twice.
fn complete_basis(basis: &[Vec<f64>], slot: usize, null: &[usize], rows: usize) -> Vec<f64> {
    let filled: Vec<&Vec<f64>> = basis
        .iter()
        .enumerate()
        .filter(|(i, _)| !null.contains(i) || *i < slot)
        .map(|(_, c)| c)
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..rows {
        let mut x = vec![0.0; rows];
        x[e] = 1.0;
        for _ in 0..2 {
            for b in &filled {
                let proj = dot(b, &x);
                x.iter_mut().zip(b.iter()).for_each(|(xi, bi)| *xi -= proj * bi);
            }
        }
        let nrm = libm::sqrt(dot(&x, &x));
        if best.as_ref().is_none_or(|(n, _)| nrm > *n) {
            best = Some((nrm, x));
        }
    }
    let (nrm, mut x) = best.expect("rows > 0");
    x.iter_mut().for_each(|xi| *xi /= nrm);
    x
}

/// `Σ_{i ∈ range} σᵢ uᵢ vᵢᵀ`.
pub fn reconstruct(f: &SvdFactors, range: ComponentRange) -> Result<Matrix> {
    range.validate(f.k())?;
    let (m, n) = (f.u.rows(), f.vt.cols());
    let mut out = Matrix::zeros(m, n);
    for i in range.start..range.end {
        let s = f.sigma[i];
        if s == 0.0 {
            continue;
        }
        let v = f.vt.row(i);
        for r in 0..m {
            let coef = s * f.u[(r, i)];
            if coef == 0.0 {
                continue;
            }
            let row = &mut out.as_mut_slice()[r * n..(r + 1) * n];
            row.iter_mut().zip(v).for_each(|(o, vj)| *o += coef * vj);
        }
    }
    Ok(out)
}
