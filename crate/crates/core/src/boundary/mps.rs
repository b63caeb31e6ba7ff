use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{contract, contract_into, qr_split, scale_along, svd_split, Index, Label, Tensor};
use crate::C64;

/// Default number of one-site sweeps after the zip-up initialization.
pub const DEFAULT_FIT_SWEEPS: usize = 10;
/// Sweeps stop once the objective changes by less than this, relatively.
pub const DEFAULT_FIT_TOL: f64 = 1e-12;
/// Normalized squared singular values at or below this are treated as zero
/// while building the initial guess.
pub const DEFAULT_FIT_CUTOFF: f64 = 1e-28;

/// Settings for [`fit_mps_mpo`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitOptions {
    pub sweeps: usize,
    pub tol: f64,
    pub cutoff: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { sweeps: DEFAULT_FIT_SWEEPS, tol: DEFAULT_FIT_TOL, cutoff: DEFAULT_FIT_CUTOFF }
    }
}

/// Outcome of one MPS-MPO fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FitReport {
    /// Full back-and-forth sweeps performed; zero when the initial guess was
    /// already exact.
    pub sweeps: usize,
    /// Overlap of the normalized output with the exact contraction after the
    /// initial guess and after every sweep.
    pub objective: Vec<f64>,
    /// Relative change of the objective over the last sweep.
    pub relative_change: f64,
    /// Whether any bond had to be cut below its exact rank.
    pub truncated: bool,
}

/// Open-boundary matrix product state `exp(log_scale) · A_0 A_1 ⋯`.
///
/// Site `k` carries its physical labels plus `bonds[k-1]` and `bonds[k]`
/// where present. A zero state has `log_scale = -inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    sites: Vec<Tensor>,
    bonds: Vec<Label>,
    log_scale: f64,
}

impl Mps {
    pub fn new(sites: Vec<Tensor>, bonds: Vec<Label>, log_scale: f64) -> Result<Self> {
        if sites.is_empty() || bonds.len() + 1 != sites.len() {
            return Err(Error::Structural("an MPS needs n sites and n - 1 bonds".into()));
        }
        for (k, b) in bonds.iter().enumerate() {
            let (l, r) = (sites[k].dim_of(b), sites[k + 1].dim_of(b));
            if l.is_none() || l != r {
                return Err(Error::Structural(format!("bond {b} does not join sites {k} and {}", k + 1)));
            }
        }
        Ok(Mps { sites, bonds, log_scale })
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn bonds(&self) -> &[Label] {
        &self.bonds
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn is_zero(&self) -> bool {
        self.log_scale == f64::NEG_INFINITY
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bonds
            .iter()
            .enumerate()
            .map(|(k, b)| self.sites[k].dim_of(b).unwrap_or(1))
            .max()
            .unwrap_or(1)
    }

    /// Site tensors with the scale folded into the first one.
    pub fn scaled_sites(&self) -> Vec<Tensor> {
        let mut sites = self.sites.clone();
        let f = if self.is_zero() { 0.0 } else { self.log_scale.exp() };
        sites[0].scale(C64::new(f, 0.0));
        sites
    }

    /// Complex conjugate with every label mapped through `f`, used to place
    /// the bra copy of a ket-side MPS.
    pub fn conj_mapped(&self, f: impl Fn(&Label) -> Label) -> Mps {
        Mps {
            sites: self.sites.iter().map(|t| t.conj().map_labels(&f)).collect(),
            bonds: self.bonds.iter().map(&f).collect(),
            log_scale: self.log_scale,
        }
    }

    /// Dense contraction of all sites, scale included.
    pub fn to_tensor(&self) -> Result<Tensor> {
        let sites = self.scaled_sites();
        let mut acc = sites[0].clone();
        for t in &sites[1..] {
            acc = contract(&acc, t)?;
        }
        Ok(acc)
    }
}

/// Assign each tensor of `incoming` to the first block it shares a label
/// with; unconnected tensors follow their predecessor.
pub(crate) fn place_incoming(blocks: &mut [Vec<Tensor>], incoming: Vec<Tensor>) {
    let mut owner: HashMap<Label, usize> = HashMap::new();
    for (k, block) in blocks.iter().enumerate() {
        for t in block {
            for l in t.labels() {
                owner.entry(l.clone()).or_insert(k);
            }
        }
    }
    let mut last = 0;
    for t in incoming {
        let k = t.labels().filter_map(|l| owner.get(l)).min().copied().unwrap_or(last);
        last = k;
        blocks[k].push(t);
    }
}

/// Labels that appear on exactly one tensor, grouped by block in order of
/// first appearance.
fn open_labels(blocks: &[Vec<Tensor>]) -> Result<Vec<Vec<Index>>> {
    let mut count: HashMap<&Label, usize> = HashMap::new();
    for t in blocks.iter().flatten() {
        for l in t.labels() {
            *count.entry(l).or_default() += 1;
        }
    }
    if let Some((l, _)) = count.iter().find(|(_, &c)| c > 2) {
        return Err(Error::Structural(format!("label {l} appears on more than two tensors")));
    }
    Ok(blocks
        .iter()
        .map(|block| {
            block
                .iter()
                .flat_map(|t| t.indices().iter())
                .filter(|ix| count[&ix.label] == 1)
                .cloned()
                .collect()
        })
        .collect())
}

pub(crate) fn contract_block(acc: Option<Tensor>, block: &[Tensor], extra: Option<&Tensor>) -> Result<Tensor> {
    let mut rest: Vec<&Tensor> = block.iter().collect();
    rest.extend(extra);
    match acc {
        Some(a) => contract_into(a, rest),
        None if rest.is_empty() => Ok(Tensor::scalar(C64::new(1.0, 0.0))),
        None => {
            let first = rest.remove(0).clone();
            contract_into(first, rest)
        }
    }
}

/// Fully contract `incoming` (if any) with `blocks`.
pub fn contract_closed(incoming: Option<&Mps>, blocks: &[Vec<Tensor>]) -> Result<C64> {
    let mut blocks = blocks.to_vec();
    let mut log_scale = 0.0;
    if let Some(m) = incoming {
        if m.is_zero() {
            return Ok(C64::new(0.0, 0.0));
        }
        log_scale = m.log_scale;
        place_incoming(&mut blocks, m.sites.clone());
    }
    let mut acc: Option<Tensor> = None;
    for block in &blocks {
        acc = Some(contract_block(acc, block, None)?);
    }
    let value = acc.map_or(Ok(C64::new(1.0, 0.0)), |t| t.scalar_value())?;
    Ok(value * log_scale.exp())
}

/// Approximate the contraction of `incoming` with the operator `blocks` by
/// an MPS with one site per block and bonds of dimension at most
/// `max_rank`.
///
/// The operator may be any network: block `k` holds the tensors whose open
/// indices become the physical indices of output site `k`, and each tensor
/// of `incoming` is attached to the first block it connects to. The initial
/// guess contracts block by block with truncated SVDs; if anything was
/// truncated, one-site sweeps then maximize the overlap of the normalized
/// output with the exact contraction. Output bonds are named
/// `{bond_prefix}{k}`.
pub fn fit_mps_mpo(
    incoming: Option<&Mps>,
    blocks: &[Vec<Tensor>],
    max_rank: usize,
    opts: &FitOptions,
    bond_prefix: &str,
) -> Result<(Mps, FitReport)> {
    if max_rank == 0 {
        return Err(Error::Config("boundary rank must be at least 1".into()));
    }
    if blocks.is_empty() {
        return Err(Error::Structural("cannot fit an MPS with no sites".into()));
    }
    let n = blocks.len();
    let bonds: Vec<Label> = (0..n - 1).map(|k| Label::new(format!("{bond_prefix}{k}"))).collect();
    let mut blocks = blocks.to_vec();
    let mut in_scale = 0.0;
    if let Some(m) = incoming {
        if m.is_zero() {
            return Ok((zero_mps(&open_labels(&blocks)?, &bonds), FitReport::default()));
        }
        in_scale = m.log_scale;
        place_incoming(&mut blocks, m.sites.clone());
    }
    let phys = open_labels(&blocks)?;
    let phys_labels: Vec<Vec<Label>> =
        phys.iter().map(|p| p.iter().map(|ix| ix.label.clone()).collect()).collect();

    // Zip-up initial guess, leaving sites 0..n-1 left-orthonormal.
    let mut report = FitReport::default();
    let mut sites: Vec<Tensor> = Vec::with_capacity(n);
    let mut carry: Option<Tensor> = None;
    for k in 0..n {
        let c = contract_block(carry.take(), &blocks[k], None)?;
        if c.norm() == 0.0 {
            return Ok((zero_mps(&phys, &bonds), report));
        }
        if k + 1 == n {
            sites.push(c);
            break;
        }
        let mut left: Vec<Label> = Vec::new();
        if k > 0 {
            left.push(bonds[k - 1].clone());
        }
        left.extend(phys_labels[k].iter().cloned());
        let split = svd_split(&c, &left, max_rank, opts.cutoff, &bonds[k])?;
        report.truncated |= split.kept_rank < split.exact_rank;
        carry = Some(scale_along(&split.vh, &bonds[k], &split.s)?);
        sites.push(split.u);
    }

    let mut objective = sites[n - 1].norm();
    report.objective.push(objective);
    if report.truncated && n > 1 {
        let mut lefts: Vec<Tensor> = Vec::with_capacity(n);
        for k in 0..n - 1 {
            let prev = if k == 0 { None } else { Some(lefts[k - 1].clone()) };
            lefts.push(contract_block(prev, &blocks[k], Some(&sites[k].conj()))?);
        }
        let mut rights: Vec<Option<Tensor>> = vec![None; n + 1];
        let tmp = Label::new(format!("{bond_prefix}~"));
        for sweep in 0..opts.sweeps {
            // Right to left: the center starts at the last site.
            for k in (1..n).rev() {
                let d = contract_block(Some(lefts[k - 1].clone()), &blocks[k], rights[k + 1].as_ref())?;
                let mut right_side: Vec<Label> = phys_labels[k].clone();
                if k + 1 < n {
                    right_side.push(bonds[k].clone());
                }
                let (q, _) = qr_split(&d, &right_side, &tmp)?;
                let q = q.relabeled(&tmp, bonds[k - 1].clone());
                rights[k] = Some(contract_block(rights[k + 1].clone(), &blocks[k], Some(&q.conj()))?);
                sites[k] = q;
            }
            // Left to right.
            for k in 0..n - 1 {
                let prev = if k == 0 { None } else { Some(lefts[k - 1].clone()) };
                let d = contract_block(prev.clone(), &blocks[k], rights[k + 1].as_ref())?;
                let mut left_side: Vec<Label> = Vec::new();
                if k > 0 {
                    left_side.push(bonds[k - 1].clone());
                }
                left_side.extend(phys_labels[k].iter().cloned());
                let (q, _) = qr_split(&d, &left_side, &tmp)?;
                let q = q.relabeled(&tmp, bonds[k].clone());
                lefts[k] = contract_block(prev, &blocks[k], Some(&q.conj()))?;
                sites[k] = q;
            }
            let d = contract_block(Some(lefts[n - 2].clone()), &blocks[n - 1], None)?;
            let next = d.norm();
            sites[n - 1] = d;
            report.sweeps = sweep + 1;
            report.relative_change = if next > 0.0 { (next - objective).abs() / next } else { 0.0 };
            report.objective.push(next);
            objective = next;
            if report.relative_change < opts.tol {
                break;
            }
        }
    }

    if objective == 0.0 {
        return Ok((zero_mps(&phys, &bonds), report));
    }
    sites[n - 1].scale(C64::new(1.0 / objective, 0.0));
    let mps = Mps::new(sites, bonds, in_scale + objective.ln())?;
    Ok((mps, report))
}

/// A zero MPS with bond dimension one and the given physical indices.
fn zero_mps(phys: &[Vec<Index>], bonds: &[Label]) -> Mps {
    let n = phys.len();
    let sites = (0..n)
        .map(|k| {
            let mut ix = phys[k].clone();
            if k > 0 {
                ix.push(Index { label: bonds[k - 1].clone(), dim: 1 });
            }
            if k + 1 < n {
                ix.push(Index { label: bonds[k].clone(), dim: 1 });
            }
            Tensor::zeros(ix).expect("valid indices")
        })
        .collect();
    Mps { sites, bonds: bonds.to_vec(), log_scale: f64::NEG_INFINITY }
}
