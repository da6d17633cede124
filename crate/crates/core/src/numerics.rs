//! Dense numerical helpers shared by the solver: the thin SVD, seeded
//! random number streams, and feasible random initial values.
//!
//! All matrices are `nalgebra::DMatrix<f64>`, which stores entries in
//! column-major order. Data matrices are kept features × instances, so a
//! single instance is a contiguous column slice.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GoalError, Result};

/// Column-major dense matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;

/// Thin singular value decomposition `A = U diag(sigma) Vᵀ` with
/// `r = min(rows, cols)` retained singular triplets, sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Matrix,
    pub sigma: DVector<f64>,
    pub v: Matrix,
}

impl ThinSvd {
    /// Number of singular values above a relative threshold of the largest one.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let top = self.sigma.iter().copied().fold(0.0_f64, f64::max);
        if top == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > rel_tol * top).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

const LANES: usize = 8;

/// Dot product with independent partial sums, so the loop is not bound by
/// the latency of a single accumulator.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `‖a − b‖²`, accumulated like [`dot`].
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            let d = x[i] - y[i];
            acc[i] += d * d;
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `aᵀ b` for column-major matrices with equal row counts.
pub fn tr_mul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows(), "tr_mul: row counts differ");
    let mut out = Matrix::zeros(a.ncols(), b.ncols());
    for j in 0..b.ncols() {
        let bj = b.column(j);
        for i in 0..a.ncols() {
            out[(i, j)] = dot(a.column(i).as_slice(), bj.as_slice());
        }
    }
    out
}


/// Rejects matrices that contain NaN or infinite entries.
pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % m.nrows(), pos / m.nrows());
        return Err(GoalError::invalid(format!(
            "{what}: non-finite entry at row {r}, column {c}"
        )));
    }
    Ok(())
}

/// One-sided Jacobi SVD. Columns of a copy of `a` are rotated pairwise
/// until mutually orthogonal; their norms are the singular values. This
/// stays accurate on rank-deficient input, which is common in the rotation
/// update when K < G, and is cheap for the tall, narrow matrices it sees.
pub fn thin_svd(a: &Matrix) -> Result<ThinSvd> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(GoalError::invalid("thin_svd: empty matrix"));
    }
    ensure_finite(a, "thin_svd")?;
    if a.nrows() < a.ncols() {
        let t = thin_svd(&a.transpose())?;
        return Ok(ThinSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }

    let (m, n) = a.shape();
    // Work on a copy scaled to unit max entry so that squared column norms
    // neither underflow nor overflow.
    let scale = a.amax();
    if scale == 0.0 {
        return Ok(ThinSvd {
            u: complete_orthonormal(&Matrix::zeros(m, 0), n),
            sigma: DVector::zeros(n),
            v: Matrix::identity(n, n),
        });
    }
    let mut w = a / scale;
    let mut v = Matrix::identity(n, n);
    // Columns this short are rounding noise of a rank-deficient input;
    // rotating against them never settles.
    let tol = f64::EPSILON * m as f64;
    let negligible = (tol * w.norm()).powi(2);
    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (w.column(p), w.column(q));
                    (
                        dot(wp.as_slice(), wp.as_slice()),
                        dot(wq.as_slice(), wq.as_slice()),
                        dot(wp.as_slice(), wq.as_slice()),
                    )
                };
                if alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GoalError::Numerical("thin_svd: Jacobi sweeps did not converge".into()));
    }

    let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    // Negligible columns were never rotated and carry no reliable direction;
    // their left singular vectors come from an orthonormal completion.
    let cutoff = negligible.sqrt();

    let mut sigma = DVector::zeros(n);
    let mut sv = Matrix::zeros(n, n);
    let mut kept = Matrix::zeros(m, n);
    let mut rank = 0;
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src] * scale;
        sv.set_column(dst, &v.column(src));
        if norms[src] > cutoff && norms[src] > 0.0 {
            kept.set_column(dst, &(w.column(src) / norms[src]));
            rank += 1;
        }
    }
    let u = complete_orthonormal(&kept.columns(0, rank).clone_owned(), n);
    Ok(ThinSvd { u, sigma, v: sv })
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// `(x_p, x_q) ← (c x_p − s x_q, s x_p + c x_q)` on two columns.
fn rotate_columns(x: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = x.nrows();
    let data = x.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * rows);
    let xp = &mut head[p * rows..(p + 1) * rows];
    let xq = &mut tail[..rows];
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (u, w) = (*a, *b);
        *a = c * u - s * w;
        *b = s * u + c * w;
    }
}

/// Deterministic generator for a given seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream index (splitmix64 finalizer) so that
/// restarts, replicates and folds get decorrelated but reproducible seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    // Filled column by column so the draw order is independent of storage details.
    let mut m = Matrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Random `d × g` matrix with orthonormal columns (Gram–Schmidt of a
/// Gaussian matrix, two orthogonalization passes per column).
pub fn random_orthonormal(d: usize, g: usize, seed: u64) -> Result<Matrix> {
    if g == 0 || d == 0 {
        return Err(GoalError::invalid(format!(
            "random_orthonormal: dimensions must be positive (D={d}, G={g})"
        )));
    }
    if g > d {
        return Err(GoalError::invalid(format!(
            "random_orthonormal: G={g} exceeds D={d}"
        )));
    }
    let mut rng = seeded_rng(seed);
    loop {
        let mut q = gaussian_matrix(d, g, &mut rng);
        if orthonormalize_columns(&mut q, 0) {
            return Ok(q);
        }
    }
}

/// Modified Gram–Schmidt with re-orthogonalization on columns `from..`,
/// assuming columns `..from` are already orthonormal. Returns false if a
/// column collapses.
fn orthonormalize_columns(q: &mut Matrix, from: usize) -> bool {
    (from..q.ncols()).all(|j| orthonormalize_column(q, j))
}

fn orthonormalize_column(q: &mut Matrix, j: usize) -> bool {
    let mut col = q.column(j).clone_owned();
    let start = col.norm();
    for _ in 0..2 {
        for i in 0..j {
            let qi = q.column(i);
            let proj = qi.dot(&col);
            col.axpy(-proj, &qi, 1.0);
        }
    }
    let n = col.norm();
    if !(n > 1e-10 * start.max(f64::MIN_POSITIVE)) {
        return false;
    }
    q.set_column(j, &(col / n));
    true
}

/// Extends an orthonormal `d × r` basis to `d × g` columns by repeatedly
/// adding the canonical basis vector with the largest residual against the
/// current span. Deterministic; no randomness involved.
pub fn complete_orthonormal(basis: &Matrix, g: usize) -> Matrix {
    let d = basis.nrows();
    let r = basis.ncols();
    assert!(g <= d && r <= g, "cannot complete {r} columns to {g} in dimension {d}");
    let mut q = Matrix::zeros(d, g);
    q.columns_mut(0, r).copy_from(basis);
    // residual[i] = 1 - sum_j q[i, j]^2 = squared norm of e_i's residual.
    let mut residual: Vec<f64> = (0..d)
        .map(|i| 1.0 - (0..r).map(|j| q[(i, j)] * q[(i, j)]).sum::<f64>())
        .collect();
    for j in r..g {
        let pick = (0..d)
            .max_by(|&a, &b| residual[a].total_cmp(&residual[b]).then(b.cmp(&a)))
            .expect("d > 0");
        let mut col = DVector::zeros(d);
        col[pick] = 1.0;
        q.set_column(j, &col);
        let ok = orthonormalize_column(&mut q, j);
        debug_assert!(ok, "canonical vector with maximal residual cannot collapse");
        for (i, res) in residual.iter_mut().enumerate() {
            *res -= q[(i, j)] * q[(i, j)];
        }
    }
    q
}

/// Uniform random cluster index in `0..k` for each of `t` instances.
pub fn random_assignments(k: usize, t: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || t == 0 {
        return Err(GoalError::invalid(format!(
            "random assignment: dimensions must be positive (K={k}, T={t})"
        )));
    }
    let mut rng = seeded_rng(seed);
    Ok((0..t).map(|_| rng.random_range(0..k)).collect())
}

/// One-hot `k × t` affiliation matrix with uniformly drawn clusters.
pub fn random_discrete_gamma(k: usize, t: usize, seed: u64) -> Result<Matrix> {
    let labels = random_assignments(k, t, seed)?;
    let mut gamma = Matrix::zeros(k, t);
    for (col, &row) in labels.iter().enumerate() {
        gamma[(row, col)] = 1.0;
    }
    Ok(gamma)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
