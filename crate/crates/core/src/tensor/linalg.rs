use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use super::{Index, Label, Tensor};
use crate::error::{Error, Result};

/// Relative cutoff on normalized squared singular values.
pub const DEFAULT_SVD_CUTOFF: f64 = 1e-14;
/// Relative eigenvalue cutoff below which a mode is dropped from a pseudo-inverse.
pub const DEFAULT_REG_CUTOFF: f64 = 1e-12;

const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-8;

/// A truncated singular value decomposition split across a new bond.
#[derive(Clone, Debug)]
pub struct SvdSplit {
    /// Left indices plus the bond; columns are orthonormal.
    pub u: Tensor,
    /// Kept singular values, non-increasing.
    pub s: Vec<f64>,
    /// Bond plus right indices; rows are orthonormal.
    pub vh: Tensor,
    /// Full spectrum, non-increasing, unnormalized.
    pub singular_values: Vec<f64>,
    pub kept_rank: usize,
    pub exact_rank: usize,
    /// Discarded share of the squared spectrum.
    pub discarded_weight: f64,
}

/// Output of [`svd_truncate`]: `left · right` approximates the input.
///
/// With degenerate spectra the kept subspace is not unique (the first
/// `max_rank` values returned by the decomposition are kept), but
/// `discarded_weight` is.
#[derive(Clone, Debug)]
pub struct TruncationResult {
    /// Isometry carrying the left indices and the new bond.
    pub left: Tensor,
    /// Singular values times the right isometry.
    pub right: Tensor,
    pub kept_rank: usize,
    pub exact_rank: usize,
    pub discarded_weight: f64,
    pub singular_values: Vec<f64>,
}

fn split_labels(t: &Tensor, left: &[Label]) -> Result<()> {
    for l in left {
        if !t.has(l) {
            return Err(Error::Structural(format!("label {l} not present")));
        }
    }
    Ok(())
}

/// Singular value decomposition of `t` with `left` as the row space.
///
/// Either side may be empty, in which case it is treated as a dimension-1
/// space. `cutoff` applies to squared singular values normalized to sum to
/// one; `max_rank` caps the number kept.
pub fn svd_split(
    t: &Tensor,
    left: &[Label],
    max_rank: usize,
    cutoff: f64,
    bond: &Label,
) -> Result<SvdSplit> {
    split_labels(t, left)?;
    if max_rank == 0 {
        return Err(Error::Config("max_rank must be at least 1".into()));
    }
    let (mat, rows, cols) = t.to_matrix(left)?;
    let svd = mat
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let spectrum: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re.max(0.0)).collect();

    let total: f64 = spectrum.iter().map(|s| s * s).sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::Degenerate("tensor has zero norm".into()));
    }
    let exact_rank = spectrum.iter().filter(|s| *s * *s / total > cutoff).count();
    let kept = exact_rank.min(max_rank);
    if kept == 0 {
        return Err(Error::Degenerate("all singular values fall below the cutoff".into()));
    }
    let discarded: f64 = spectrum[kept..].iter().map(|s| s * s).sum::<f64>() / total;

    let um = Mat::from_fn(u.nrows(), kept, |i, k| u[(i, k)]);
    let vm = Mat::from_fn(kept, v.nrows(), |k, j| v[(j, k)].conj());
    let bond_idx = Index { label: bond.clone(), dim: kept };
    let u_t = Tensor::from_matrix(&um, rows, vec![bond_idx.clone()])?;
    let vh_t = Tensor::from_matrix(&vm, vec![bond_idx], cols)?;
    Ok(SvdSplit {
        u: u_t,
        s: spectrum[..kept].to_vec(),
        vh: vh_t,
        singular_values: spectrum,
        kept_rank: kept,
        exact_rank,
        discarded_weight: discarded.clamp(0.0, 1.0),
    })
}

/// Truncated SVD of `t` across the bipartition `left_labels | rest`.
pub fn svd_truncate(
    t: &Tensor,
    left_labels: &[Label],
    max_rank: usize,
    cutoff: f64,
    bond: &Label,
) -> Result<TruncationResult> {
    if left_labels.is_empty() || left_labels.len() >= t.rank() {
        return Err(Error::Structural(
            "left labels must be a nonempty proper subset of the tensor's labels".into(),
        ));
    }
    let split = svd_split(t, left_labels, max_rank, cutoff, bond)?;
    let right = scale_along(&split.vh, bond, &split.s)?;
    Ok(TruncationResult {
        left: split.u,
        right,
        kept_rank: split.kept_rank,
        exact_rank: split.exact_rank,
        discarded_weight: split.discarded_weight,
        singular_values: split.singular_values,
    })
}

/// Multiply slice `k` of index `label` by `factors[k]`.
pub fn scale_along(t: &Tensor, label: &Label, factors: &[f64]) -> Result<Tensor> {
    let p = t
        .position(label)
        .ok_or_else(|| Error::Structural(format!("label {label} not present")))?;
    let dim = t.indices()[p].dim;
    if dim != factors.len() {
        return Err(Error::Structural("scale vector length mismatch".into()));
    }
    let inner: usize = t.indices()[p + 1..].iter().map(|i| i.dim).product();
    let mut out = t.clone();
    for (i, z) in out.data_mut().iter_mut().enumerate() {
        *z *= factors[(i / inner) % dim];
    }
    Ok(out)
}

/// All eigenvalues of `m` viewed as a square matrix with `rows` as row
/// space, sorted by descending magnitude.
pub fn eig_full(m: &Tensor, rows: &[Label]) -> Result<Vec<C64>> {
    split_labels(m, rows)?;
    let (mat, _, _) = m.to_matrix(rows)?;
    if mat.nrows() != mat.ncols() {
        return Err(Error::Structural(format!(
            "eigenvalues need a square matrix, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    let mut eigs: Vec<C64> = if mat.nrows() == 1 {
        vec![mat[(0, 0)]]
    } else {
        mat.eigenvalues()
            .map_err(|e| Error::Numerical(format!("eigensolver did not converge: {e:?}")))?
    };
    eigs.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(eigs)
}

/// Square root and regularized inverse square root of a Hermitian positive
/// semi-definite matrix.
///
/// The input is symmetrized first. Eigenvalues at or below
/// `reg_cutoff * λ_max` are dropped from the inverse square root. Returns the
/// two matrices with the same index layout as `m` plus the number of dropped
/// modes.
pub fn psd_sqrt_and_pinv_sqrt(
    m: &Tensor,
    rows: &[Label],
    reg_cutoff: f64,
) -> Result<(Tensor, Tensor, usize)> {
    split_labels(m, rows)?;
    let (mat, ri, ci) = m.to_matrix(rows)?;
    if mat.nrows() != mat.ncols() {
        return Err(Error::Structural("square root needs a square matrix".into()));
    }
    let n = mat.nrows();
    let herm = Mat::from_fn(n, n, |i, j| (mat[(i, j)] + mat[(j, i)].conj()) * 0.5);
    let eig = herm
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver did not converge: {e:?}")))?;
    let lams: Vec<f64> = eig.S().column_vector().iter().map(|z| z.re).collect();
    let lam_max = lams.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let scale = if lam_max > 0.0 { lam_max } else { 1.0 };
    let mut dropped = 0;
    let mut sq = vec![0.0; n];
    let mut isq = vec![0.0; n];
    for (k, &l) in lams.iter().enumerate() {
        if l < -NEGATIVE_EIGENVALUE_TOLERANCE * scale {
            return Err(Error::NotPsd(l));
        }
        let l = l.max(0.0);
        sq[k] = l.sqrt();
        if l > reg_cutoff * scale {
            isq[k] = 1.0 / l.sqrt();
        } else {
            dropped += 1;
        }
    }
    let v = eig.U();
    let build = |d: &[f64]| {
        Mat::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * d[k] * v[(j, k)].conj()).sum::<C64>()
        })
    };
    let sqrt = Tensor::from_matrix(&build(&sq), ri.clone(), ci.clone())?;
    let inv = Tensor::from_matrix(&build(&isq), ri, ci)?;
    Ok((sqrt, inv, dropped))
}

/// Thin QR decomposition: `Q` carries `left` plus `bond` (orthonormal
/// columns), `R` carries `bond` plus the remaining indices.
pub fn qr_split(t: &Tensor, left: &[Label], bond: &Label) -> Result<(Tensor, Tensor)> {
    split_labels(t, left)?;
    let (mat, rows, cols) = t.to_matrix(left)?;
    let k = mat.nrows().min(mat.ncols());
    let qr = mat.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R().to_owned();
    let bond_idx = Index { label: bond.clone(), dim: k };
    Ok((
        Tensor::from_matrix(&q, rows, vec![bond_idx.clone()])?,
        Tensor::from_matrix(&r, vec![bond_idx], cols)?,
    ))
}
