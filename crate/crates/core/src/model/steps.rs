use crate::error::{GoalError, Result};
use crate::numerics::{complete_orthonormal, squared_distance, thin_svd, tr_mul, Matrix};

use super::{Affiliation, DataSet, GaugeModel};

/// Singular values below this fraction of the largest one count as zero in
/// the rotation update.
const RANK_TOL: f64 = 1e-12;

fn check_affiliation(data: &DataSet, gamma: &Affiliation) -> Result<()> {
    if gamma.t() != data.t() {
        return Err(GoalError::invalid(format!(
            "affiliation covers {} instances, data has {}",
            gamma.t(),
            data.t()
        )));
    }
    Ok(())
}

/// Per-box feature sums (D × K) and occupancies.
pub fn cluster_sums(x: &Matrix, gamma: &Affiliation) -> (Matrix, Vec<usize>) {
    let mut sums = Matrix::zeros(x.nrows(), gamma.k());
    let mut counts = vec![0usize; gamma.k()];
    let d = x.nrows();
    let (xs, ss) = (x.as_slice(), sums.as_mut_slice());
    for (t, &k) in gamma.assignments().iter().enumerate() {
        for (s, v) in ss[k * d..(k + 1) * d].iter_mut().zip(&xs[t * d..(t + 1) * d]) {
            *s += v;
        }
        counts[k] += 1;
    }
    (sums, counts)
}

/// `log(max(Λ, floor))`, M × K.
fn floored_log(lambda: &Matrix, floor: f64) -> Matrix {
    lambda.map(|v| v.max(floor).ln())
}

/// The two terms of the objective: mean squared distance of each instance
/// to its box image, and the label cross-entropy `−1/(TM) Σ Π log Λ`
/// (not yet weighted by ε_CL).
pub fn objective_terms(data: &DataSet, model: &GaugeModel, gamma: &Affiliation) -> Result<(f64, f64)> {
    check_affiliation(data, gamma)?;
    if model.d() != data.d() || model.m() != data.m() || model.k() != gamma.k() {
        return Err(GoalError::invalid(format!(
            "model (D={}, M={}, K={}) does not match data (D={}, M={}) / affiliation (K={})",
            model.d(),
            model.m(),
            model.k(),
            data.d(),
            data.m(),
            gamma.k()
        )));
    }
    let images = model.box_images();
    let log_lambda = floored_log(&model.lambda, model.lambda_floor);
    let (t_count, m_count) = (data.t() as f64, data.m() as f64);
    let mut euclid = 0.0;
    let mut label = 0.0;
    for (t, &k) in gamma.assignments().iter().enumerate() {
        euclid += squared_distance(data.x().column(t).as_slice(), images.column(k).as_slice());
        label -= data.pi().column(t).dot(&log_lambda.column(k));
    }
    Ok((euclid / t_count, label / (t_count * m_count)))
}

pub fn objective(data: &DataSet, model: &GaugeModel, gamma: &Affiliation) -> Result<f64> {
    let (euclid, label) = objective_terms(data, model, gamma)?;
    Ok(euclid + model.eps_cl * label)
}

/// `‖X − R S Γ‖_F²`, the part of the objective that depends on `R`.
pub fn rotation_objective(data: &DataSet, gamma: &Affiliation, r: &Matrix, s: &Matrix) -> f64 {
    let images = r * s;
    gamma
        .assignments()
        .iter()
        .enumerate()
        .map(|(t, &k)| squared_distance(data.x().column(t).as_slice(), images.column(k).as_slice()))
        .sum()
}

/// Output of the box update.
#[derive(Debug, Clone)]
pub struct SStep {
    /// Box centres in feature space (D × K): cluster means, or the re-seed
    /// point for empty boxes.
    pub rs: Matrix,
    /// Box coordinates in the gauge, `Rᵀ · rs` (G × K).
    pub s: Matrix,
    /// Boxes that were empty and got re-seeded.
    pub reseeded: Vec<usize>,
}

/// Box update: each box centre becomes the mean of its instances and is
/// expressed in gauge coordinates. Empty boxes are moved onto the instances
/// farthest from their own box centre.
pub fn s_step(data: &DataSet, gamma: &Affiliation, r: &Matrix) -> Result<SStep> {
    check_affiliation(data, gamma)?;
    if r.nrows() != data.d() {
        return Err(GoalError::invalid(format!(
            "rotation has {} rows, data has D={}",
            r.nrows(),
            data.d()
        )));
    }
    let (sums, counts) = cluster_sums(data.x(), gamma);
    Ok(s_step_from_sums(data, gamma, r, sums, &counts))
}

/// [`s_step`] given the cluster sums and occupancies of `gamma`.
pub(crate) fn s_step_from_sums(
    data: &DataSet,
    gamma: &Affiliation,
    r: &Matrix,
    sums: Matrix,
    counts: &[usize],
) -> SStep {
    let mut rs = sums;
    let mut empty = Vec::new();
    for (k, &n) in counts.iter().enumerate() {
        if n == 0 {
            empty.push(k);
        } else {
            rs.column_mut(k).unscale_mut(n as f64);
        }
    }

    if !empty.is_empty() {
        let mut far: Vec<(usize, f64)> = gamma
            .assignments()
            .iter()
            .enumerate()
            .map(|(t, &k)| (t, squared_distance(data.x().column(t).as_slice(), rs.column(k).as_slice())))
            .collect();
        far.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (i, &k) in empty.iter().enumerate() {
            let t = far[i % far.len()].0;
            rs.set_column(k, &data.x().column(t));
        }
    }

    let s = tr_mul(r, &rs);
    SStep { rs, s, reseeded: empty }
}

/// Affiliation update: every instance goes to the box minimizing squared
/// distance to the box image minus the weighted label log-likelihood.
/// Ties go to the lowest box index.
pub fn gamma_step(
    data: &DataSet,
    box_images: &Matrix,
    lambda: &Matrix,
    eps_cl: f64,
    lambda_floor: f64,
) -> Result<Affiliation> {
    let k_count = box_images.ncols();
    if box_images.nrows() != data.d() || lambda.nrows() != data.m() || lambda.ncols() != k_count {
        return Err(GoalError::invalid(format!(
            "box images {}x{} / label table {}x{} do not match data D={}, M={}",
            box_images.nrows(),
            k_count,
            lambda.nrows(),
            lambda.ncols(),
            data.d(),
            data.m()
        )));
    }
    if k_count == 0 {
        return Err(GoalError::invalid("gamma_step needs at least one box"));
    }
    let cross = tr_mul(box_images, data.x());
    let image_norms: Vec<f64> = box_images.column_iter().map(|c| c.norm_squared()).collect();
    assign(data, &cross, &image_norms, lambda, eps_cl, lambda_floor)
}

/// Affiliation rule given `cross[(k, t)] = cᵀ_k x_t` and `‖c_k‖²` for the
/// box images `c_k`. Uses ‖x − c‖² = ‖x‖² − 2 xᵀc + ‖c‖², dropping ‖x‖².
pub(crate) fn assign(
    data: &DataSet,
    cross: &Matrix,
    image_norms: &[f64],
    lambda: &Matrix,
    eps_cl: f64,
    lambda_floor: f64,
) -> Result<Affiliation> {
    let k_count = image_norms.len();
    let weight = eps_cl / data.m() as f64;
    // label_score[(k, t)] = Σ_m Π_{m,t} log Λ_{m,k}
    let label_score = if weight != 0.0 {
        Some(floored_log(lambda, lambda_floor).transpose() * data.pi())
    } else {
        None
    };
    let mut assignments = Vec::with_capacity(data.t());
    for t in 0..data.t() {
        let mut best = 0;
        let mut best_score = f64::INFINITY;
        for k in 0..k_count {
            let mut score = image_norms[k] - 2.0 * cross[(k, t)];
            if let Some(ls) = &label_score {
                score -= weight * ls[(k, t)];
            }
            if score < best_score {
                best_score = score;
                best = k;
            }
        }
        assignments.push(best);
    }
    Affiliation::new(k_count, assignments)
}

/// Label probabilities per box: column-normalized `Π Γᵀ`; empty boxes get
/// the uniform distribution.
pub fn lambda_step(data: &DataSet, gamma: &Affiliation) -> Result<Matrix> {
    check_affiliation(data, gamma)?;
    let (mut lambda, counts) = cluster_sums(data.pi(), gamma);
    let uniform = 1.0 / data.m() as f64;
    for (k, &n) in counts.iter().enumerate() {
        let mut col = lambda.column_mut(k);
        let total = col.sum();
        if n == 0 || total <= 0.0 {
            col.fill(uniform);
        } else {
            col.unscale_mut(total);
        }
    }
    Ok(lambda)
}

/// Rotation update: the orthonormal-column `R` minimizing `‖X − R S Γ‖_F`
/// is `U Vᵀ` from the thin SVD of `X Γᵀ Sᵀ`. Directions with zero singular
/// value are filled with a deterministic orthonormal completion.
pub fn r_step(data: &DataSet, gamma: &Affiliation, s: &Matrix) -> Result<Matrix> {
    check_affiliation(data, gamma)?;
    let (g, k) = s.shape();
    if k != gamma.k() || g == 0 || g > data.d() {
        return Err(GoalError::invalid(format!(
            "box coordinates {g}x{k} do not match K={} and D={}",
            gamma.k(),
            data.d()
        )));
    }
    let (sums, _) = cluster_sums(data.x(), gamma);
    r_step_from_sums(&sums, s)
}

/// [`r_step`] given the per-box feature sums `X Γᵀ`.
pub(crate) fn r_step_from_sums(sums: &Matrix, s: &Matrix) -> Result<Matrix> {
    let g = s.nrows();
    let target = sums * s.transpose();
    // Inputs are finite, so anything else here is overflow in the solver.
    if target.iter().any(|v| !v.is_finite()) {
        return Err(GoalError::Numerical(
            "rotation update overflowed; rescale the features".into(),
        ));
    }
    let svd = thin_svd(&target)?;
    let rank = svd.numerical_rank(RANK_TOL * sums.nrows().max(g) as f64);
    if rank == g {
        return Ok(&svd.u * svd.v.transpose());
    }
    let left = complete_orthonormal(&svd.u.columns(0, rank).clone_owned(), g);
    Ok(left * svd.v.transpose())
}
