//! Dense complex tensors with named indices.
//!
//! Every tensor carries an ordered list of [`Index`]es. Data is stored
//! row-major: the last index varies fastest. Contraction matches indices by
//! label only, so the order in which indices are stored never affects the
//! value a network evaluates to.

mod linalg;

pub use linalg::{
    eig_full, psd_sqrt_and_pinv_sqrt, qr_split, scale_along, svd_split, svd_truncate, SvdSplit,
    TruncationResult, DEFAULT_REG_CUTOFF, DEFAULT_SVD_CUTOFF,
};

use std::fmt;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Opaque index name. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(s: impl AsRef<str>) -> Self {
        Label(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The bra-layer partner of a ket label.
    pub fn prime(&self) -> Label {
        Label::new(format!("{}'", self.0))
    }

    pub fn with_suffix(&self, suffix: &str) -> Label {
        Label::new(format!("{}{}", self.0, suffix))
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::new(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Index {
    pub label: Label,
    pub dim: usize,
}

impl Index {
    pub fn new(label: impl Into<Label>, dim: usize) -> Self {
        Index { label: label.into(), dim }
    }

    pub fn relabeled(&self, label: Label) -> Index {
        Index { label, dim: self.dim }
    }
}

fn volume(indices: &[Index]) -> usize {
    indices.iter().map(|i| i.dim).product()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    indices: Vec<Index>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn new(indices: Vec<Index>, data: Vec<C64>) -> Result<Self> {
        for (i, a) in indices.iter().enumerate() {
            if a.dim == 0 {
                return Err(Error::Structural(format!("index {} has dimension 0", a.label)));
            }
            if indices[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::Structural(format!("duplicate index label {}", a.label)));
            }
        }
        if volume(&indices) != data.len() {
            return Err(Error::Structural(format!(
                "data length {} does not match index volume {}",
                data.len(),
                volume(&indices)
            )));
        }
        Ok(Tensor { indices, data })
    }

    pub fn scalar(value: C64) -> Self {
        Tensor { indices: Vec::new(), data: vec![value] }
    }

    pub fn zeros(indices: Vec<Index>) -> Result<Self> {
        let n = volume(&indices);
        Tensor::new(indices, vec![C64::new(0.0, 0.0); n])
    }

    pub fn from_fn(indices: Vec<Index>, mut f: impl FnMut(&[usize]) -> C64) -> Result<Self> {
        let dims: Vec<usize> = indices.iter().map(|i| i.dim).collect();
        let n = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut counter = vec![0usize; dims.len()];
        for _ in 0..n {
            data.push(f(&counter));
            for k in (0..dims.len()).rev() {
                counter[k] += 1;
                if counter[k] < dims[k] {
                    break;
                }
                counter[k] = 0;
            }
        }
        Tensor::new(indices, data)
    }

    /// Identity matrix between two labels.
    pub fn identity(row: Label, col: Label, dim: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0, 0.0);
        }
        Tensor { indices: vec![Index { label: row, dim }, Index { label: col, dim }], data }
    }

    /// Diagonal matrix between two labels.
    pub fn diagonal(row: Label, col: Label, diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for (i, &d) in diag.iter().enumerate() {
            data[i * dim + i] = C64::new(d, 0.0);
        }
        Tensor { indices: vec![Index { label: row, dim }, Index { label: col, dim }], data }
    }

    pub fn indices(&self) -> &[Index] {
        &self.indices
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i.dim).collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.indices.iter().map(|i| &i.label)
    }

    pub fn position(&self, label: &Label) -> Option<usize> {
        self.indices.iter().position(|i| &i.label == label)
    }

    pub fn has(&self, label: &Label) -> bool {
        self.position(label).is_some()
    }

    pub fn index(&self, label: &Label) -> Option<&Index> {
        self.indices.iter().find(|i| &i.label == label)
    }

    pub fn dim_of(&self, label: &Label) -> Option<usize> {
        self.index(label).map(|i| i.dim)
    }

    /// Value of a rank-0 tensor.
    pub fn scalar_value(&self) -> Result<C64> {
        if self.indices.is_empty() {
            Ok(self.data[0])
        } else {
            Err(Error::Structural(format!("expected a scalar, found rank {}", self.rank())))
        }
    }

    pub fn get(&self, position: &[usize]) -> C64 {
        let mut offset = 0;
        for (idx, &p) in self.indices.iter().zip(position) {
            offset = offset * idx.dim + p;
        }
        self.data[offset]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Tensor {
        Tensor {
            indices: self.indices.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&mut self, factor: C64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn scaled(&self, factor: C64) -> Tensor {
        let mut t = self.clone();
        t.scale(factor);
        t
    }

    /// Rescale to unit Frobenius norm, returning the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.scale(C64::new(1.0 / n, 0.0));
        }
        n
    }

    pub fn relabel(&mut self, from: &Label, to: Label) {
        if let Some(p) = self.position(from) {
            self.indices[p].label = to;
        }
    }

    pub fn relabeled(&self, from: &Label, to: Label) -> Tensor {
        let mut t = self.clone();
        t.relabel(from, to);
        t
    }

    /// Rename every index through `f`.
    pub fn map_labels(&self, mut f: impl FnMut(&Label) -> Label) -> Tensor {
        Tensor {
            indices: self.indices.iter().map(|i| i.relabeled(f(&i.label))).collect(),
            data: self.data.clone(),
        }
    }

    /// Reorder the stored indices to follow `order`.
    pub fn permute(&self, order: &[Label]) -> Result<Tensor> {
        if order.len() != self.rank() {
            return Err(Error::Structural(format!(
                "permutation of rank {} given {} labels",
                self.rank(),
                order.len()
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for l in order {
            let p = self
                .position(l)
                .ok_or_else(|| Error::Structural(format!("label {l} not present")))?;
            if perm.contains(&p) {
                return Err(Error::Structural(format!("label {l} repeated in permutation")));
            }
            perm.push(p);
        }
        Ok(self.permute_by(&perm))
    }

    fn permute_by(&self, perm: &[usize]) -> Tensor {
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return self.clone();
        }
        let indices: Vec<Index> = perm.iter().map(|&p| self.indices[p].clone()).collect();
        let data = permute_data(&self.data, &self.dims(), perm);
        Tensor { indices, data }
    }

    /// Fix index `label` to `value`, removing it.
    pub fn fix(&self, label: &Label, value: usize) -> Result<Tensor> {
        let p = self
            .position(label)
            .ok_or_else(|| Error::Structural(format!("label {label} not present")))?;
        let dim = self.indices[p].dim;
        if value >= dim {
            return Err(Error::Structural(format!("value {value} out of range for {label}")));
        }
        let outer: usize = self.indices[..p].iter().map(|i| i.dim).product();
        let inner: usize = self.indices[p + 1..].iter().map(|i| i.dim).product();
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * dim + value) * inner;
            data.extend_from_slice(&self.data[base..base + inner]);
        }
        let mut indices = self.indices.clone();
        indices.remove(p);
        Ok(Tensor { indices, data })
    }

    /// Element-wise `self + factor * other`, matching indices by label.
    pub fn add_scaled(&self, other: &Tensor, factor: C64) -> Result<Tensor> {
        let order: Vec<Label> = self.labels().cloned().collect();
        let other = other.permute(&order)?;
        if other.dims() != self.dims() {
            return Err(Error::Structural("dimension mismatch in addition".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + factor * b).collect();
        Ok(Tensor { indices: self.indices.clone(), data })
    }

    /// Frobenius distance to `other`, matching indices by label.
    pub fn distance(&self, other: &Tensor) -> Result<f64> {
        Ok(self.add_scaled(other, C64::new(-1.0, 0.0))?.norm())
    }

    /// Matricize with `rows` (in order) as the row space and the remaining
    /// indices, in stored order, as the column space.
    pub fn to_matrix(&self, rows: &[Label]) -> Result<(Mat<C64>, Vec<Index>, Vec<Index>)> {
        let mut order: Vec<Label> = rows.to_vec();
        for l in self.labels() {
            if !rows.contains(l) {
                order.push(l.clone());
            }
        }
        let t = self.permute(&order)?;
        let row_idx: Vec<Index> = t.indices[..rows.len()].to_vec();
        let col_idx: Vec<Index> = t.indices[rows.len()..].to_vec();
        let m = volume(&row_idx);
        let n = volume(&col_idx);
        Ok((Mat::from_fn(m, n, |i, j| t.data[i * n + j]), row_idx, col_idx))
    }

    pub fn from_matrix(mat: &Mat<C64>, rows: Vec<Index>, cols: Vec<Index>) -> Result<Tensor> {
        if volume(&rows) != mat.nrows() || volume(&cols) != mat.ncols() {
            return Err(Error::Structural("matrix shape does not match index volumes".into()));
        }
        let mut data = Vec::with_capacity(mat.nrows() * mat.ncols());
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                data.push(mat[(i, j)]);
            }
        }
        let mut indices = rows;
        indices.extend(cols);
        Tensor::new(indices, data)
    }
}

fn permute_data(data: &[C64], dims: &[usize], perm: &[usize]) -> Vec<C64> {
    let rank = dims.len();
    let mut in_strides = vec![1usize; rank];
    for k in (0..rank.saturating_sub(1)).rev() {
        in_strides[k] = in_strides[k + 1] * dims[k + 1];
    }
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    if rank == 0 {
        out.extend_from_slice(data);
        return out;
    }
    let last_dim = out_dims[rank - 1];
    let last_stride = strides[rank - 1];
    let mut counter = vec![0usize; rank];
    let mut base = 0usize;
    while out.len() < n {
        let mut off = base;
        for _ in 0..last_dim {
            out.push(data[off]);
            off += last_stride;
        }
        // advance the outer counters
        let mut k = rank - 1;
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            counter[k] += 1;
            base += strides[k];
            if counter[k] < out_dims[k] {
                break;
            }
            base -= strides[k] * out_dims[k];
            counter[k] = 0;
        }
    }
    out
}

/// Contract `a` with `b` over every label they share.
///
/// The result carries `a`'s free indices followed by `b`'s free indices.
pub fn contract(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut shared = Vec::new();
    for ia in &a.indices {
        if let Some(ib) = b.index(&ia.label) {
            if ib.dim != ia.dim {
                return Err(Error::Structural(format!(
                    "index {} has dimension {} vs {}",
                    ia.label, ia.dim, ib.dim
                )));
            }
            shared.push(ia.label.clone());
        }
    }
    let free_a: Vec<Index> =
        a.indices.iter().filter(|i| !shared.contains(&i.label)).cloned().collect();
    let free_b: Vec<Index> =
        b.indices.iter().filter(|i| !shared.contains(&i.label)).cloned().collect();

    let mut order_a: Vec<Label> = free_a.iter().map(|i| i.label.clone()).collect();
    order_a.extend(shared.iter().cloned());
    let mut order_b: Vec<Label> = shared.clone();
    order_b.extend(free_b.iter().map(|i| i.label.clone()));
    let pa = a.permute(&order_a)?;
    let pb = b.permute(&order_b)?;

    let m = volume(&free_a);
    let n = volume(&free_b);
    let k: usize = shared.iter().map(|l| a.dim_of(l).unwrap()).product();
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    gemm(m, k, n, &pa.data, &pb.data, &mut out);

    let mut indices = free_a;
    indices.extend(free_b);
    Ok(Tensor { indices, data: out })
}

/// Row-major `c = a · b` with `a` of shape m×k and `b` of shape k×n.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[C64], b: &[C64], c: &mut [C64]) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        return;
    }
    if m * n * k < 512 {
        for i in 0..m {
            let row = &a[i * k..(i + 1) * k];
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (l, av) in row.iter().enumerate() {
                    acc += av * b[l * n + j];
                }
                c[i * n + j] = acc;
            }
        }
        return;
    }
    // SAFETY: Complex<f64> is repr(C) with layout [re, im], identical to [f64; 2];
    // the slices have exactly m*k, k*n and m*n elements.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            n as isize,
            1,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

/// Contract a list of tensors, greedily picking at each step the connected
/// tensor that keeps the running result smallest.
pub fn contract_all(tensors: &[Tensor]) -> Result<Tensor> {
    let mut iter = tensors.iter();
    let first = match iter.next() {
        Some(t) => t.clone(),
        None => return Ok(Tensor::scalar(C64::new(1.0, 0.0))),
    };
    contract_into(first, tensors[1..].iter().collect())
}

/// Contract `acc` with every tensor of `rest` using the greedy ordering.
pub fn contract_into(mut acc: Tensor, mut rest: Vec<&Tensor>) -> Result<Tensor> {
    while !rest.is_empty() {
        // (disconnected, result size, -shared volume): smallest wins
        let mut best = 0;
        let mut best_key = (true, f64::INFINITY, 0.0);
        for (i, t) in rest.iter().enumerate() {
            let mut shared = 1.0;
            let mut connected = false;
            for ix in &t.indices {
                if acc.has(&ix.label) {
                    shared *= ix.dim as f64;
                    connected = true;
                }
            }
            let size = acc.len() as f64 * t.len() as f64 / (shared * shared);
            let key = (!connected, size, -shared);
            if key.partial_cmp(&best_key) == Some(std::cmp::Ordering::Less) {
                best_key = key;
                best = i;
            }
        }
        let t = rest.remove(best);
        acc = contract(&acc, t)?;
    }
    Ok(acc)
}
