//! Boundary-MPS contraction of planar networks grouped into a line of
//! partitions: norm environments, amplitudes and expectation values.

mod mps;
mod partition;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub(crate) use mps::{contract_block, place_incoming};
pub use mps::{
    contract_closed, fit_mps_mpo, FitOptions, FitReport, Mps, DEFAULT_FIT_CUTOFF, DEFAULT_FIT_SWEEPS,
    DEFAULT_FIT_TOL,
};
pub use partition::{partition_line, Partitioning, Strategy};

use crate::error::{Error, Result};
use crate::network::{phys_label, Bitstring, TensorNetworkState};
use crate::tensor::{contract, Index, Tensor};
use crate::C64;

/// Ket tensor of `v` as stored.
pub(crate) fn ket(state: &TensorNetworkState, v: usize) -> Tensor {
    state.tensor(v).clone()
}

/// Conjugate of `v` with virtual labels primed. The physical label is
/// primed too when `open_phys` is set, otherwise it pairs with the ket.
pub(crate) fn bra(state: &TensorNetworkState, v: usize, open_phys: bool) -> Tensor {
    let p = phys_label(v);
    state.tensor(v).conj().map_labels(|l| if *l == p && !open_phys { l.clone() } else { l.prime() })
}

/// Partition `b` of the norm network, one block of `[ket, bra]` per vertex.
pub(crate) fn norm_blocks(state: &TensorNetworkState, part: &Partitioning, b: usize) -> Vec<Vec<Tensor>> {
    part.group(b).iter().map(|&v| vec![ket(state, v), bra(state, v, false)]).collect()
}

/// Partition `b` of `⟨x|ψ⟩`, one projected ket per vertex.
pub(crate) fn amplitude_blocks(
    state: &TensorNetworkState,
    part: &Partitioning,
    b: usize,
    x: &Bitstring,
) -> Result<Vec<Vec<Tensor>>> {
    part.group(b)
        .iter()
        .map(|&v| Ok(vec![state.tensor(v).fix(&phys_label(v), x.bits()[v] as usize)?]))
        .collect()
}

pub(crate) fn message_prefix(kind: char, b: usize) -> String {
    format!("{kind}{b}.")
}

/// Single-qubit Pauli operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Row-major 2x2 matrix.
    pub fn matrix(self) -> [C64; 4] {
        let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
        match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Product of single-site Paulis, written like `Z5` or `X0 Y1` or `Z3*Z4`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PauliString {
    terms: Vec<(usize, Pauli)>,
}

impl PauliString {
    pub fn new(mut terms: Vec<(usize, Pauli)>) -> Result<Self> {
        terms.sort_by_key(|t| t.0);
        if terms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("observable repeats a site".into()));
        }
        Ok(PauliString { terms })
    }

    pub fn z(site: usize) -> Self {
        PauliString { terms: vec![(site, Pauli::Z)] }
    }

    pub fn terms(&self) -> &[(usize, Pauli)] {
        &self.terms
    }

    /// Whether the operator is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|(_, p)| matches!(p, Pauli::I | Pauli::Z))
    }

    /// `⟨x|O|x⟩` for a diagonal operator.
    pub fn diagonal_value(&self, x: &Bitstring) -> Result<f64> {
        if !self.is_diagonal() {
            return Err(Error::Config(format!("{self} is not diagonal")));
        }
        Ok(self
            .terms
            .iter()
            .map(|&(v, p)| if p == Pauli::Z && x.bits()[v] == 1 { -1.0 } else { 1.0 })
            .product())
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            let p = match c.to_ascii_uppercase() {
                ' ' | '*' | ',' => continue,
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                _ => return Err(Error::Config(format!("unknown observable {s:?}"))),
            };
            let mut digits = String::new();
            while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                digits.push(*d);
                chars.next();
            }
            let site = digits.parse().map_err(|_| Error::Config(format!("observable {s:?} lacks a site")))?;
            terms.push((site, p));
        }
        if terms.is_empty() {
            return Err(Error::Config("empty observable".into()));
        }
        PauliString::new(terms)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (v, p) in &self.terms {
            write!(f, "{}{v}", p.letter())?;
        }
        Ok(())
    }
}

/// Apply a one-site operator to the physical index of `t`.
fn apply_local(t: &Tensor, v: usize, m: [C64; 4]) -> Result<Tensor> {
    let p = phys_label(v);
    let tmp = p.with_suffix("*");
    let op = Tensor::new(vec![Index { label: tmp.clone(), dim: 2 }, Index { label: p.clone(), dim: 2 }], m.to_vec())?;
    Ok(contract(&op, t)?.relabeled(&tmp, p))
}

/// Norm-network messages `M_{b+1→b}` for every partition, computed once
/// from the last partition inward and then shared read-only.
#[derive(Clone, Debug)]
pub struct BoundaryEnvironment {
    partitioning: Partitioning,
    rank: usize,
    options: FitOptions,
    messages: Vec<Option<Mps>>,
    reports: Vec<FitReport>,
    norm_sqr: f64,
}

impl BoundaryEnvironment {
    pub fn partitioning(&self) -> &Partitioning {
        &self.partitioning
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn options(&self) -> &FitOptions {
        &self.options
    }

    /// `M_{b+1→b}`: the contraction of partitions `b+1..` arriving at `b`.
    /// `None` for the last partition.
    pub fn message(&self, b: usize) -> Option<&Mps> {
        self.messages[b].as_ref()
    }

    /// Fit reports in order of computation (last partition first).
    pub fn reports(&self) -> &[FitReport] {
        &self.reports
    }

    /// `⟨ψ|ψ⟩` from closing the environment against the first partition.
    pub fn norm_sqr(&self) -> f64 {
        self.norm_sqr
    }

    /// `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩` at the environment's rank.
    pub fn expectation(&self, state: &TensorNetworkState, obs: &PauliString) -> Result<f64> {
        let n = state.num_qubits();
        if let Some(&(v, _)) = obs.terms().iter().find(|(v, _)| *v >= n) {
            return Err(Error::Config(format!("observable site {v} outside the network")));
        }
        let part = &self.partitioning;
        let modified = |b: usize| -> Result<Vec<Vec<Tensor>>> {
            let mut blocks = norm_blocks(state, part, b);
            for (&v, block) in part.group(b).iter().zip(blocks.iter_mut()) {
                if let Some(&(_, p)) = obs.terms().iter().find(|(s, _)| *s == v) {
                    block[0] = apply_local(&block[0], v, p.matrix())?;
                }
            }
            Ok(blocks)
        };
        let top = obs.terms().iter().map(|&(v, _)| part.group_of(v)).max().unwrap_or(0);
        let mut incoming = self.messages[top].clone();
        for b in (1..=top).rev() {
            let (m, _) = fit_mps_mpo(incoming.as_ref(), &modified(b)?, self.rank, &self.options, &message_prefix('O', b))?;
            incoming = Some(m);
        }
        let num = contract_closed(incoming.as_ref(), &modified(0)?)?;
        if self.norm_sqr <= 0.0 {
            return Err(Error::Degenerate("state has zero norm".into()));
        }
        Ok(num.re / self.norm_sqr)
    }
}

/// Fit the norm-network messages `M_{N_b→N_b-1}, …, M_{2→1}` at rank
/// `rank` and close the result against the first partition.
pub fn norm_environments(
    state: &TensorNetworkState,
    partitioning: &Partitioning,
    rank: usize,
    options: &FitOptions,
) -> Result<BoundaryEnvironment> {
    check_partitioning(state, partitioning)?;
    let nb = partitioning.len();
    let mut messages: Vec<Option<Mps>> = vec![None; nb];
    let mut reports = Vec::new();
    for b in (1..nb).rev() {
        let blocks = norm_blocks(state, partitioning, b);
        let (m, rep) = fit_mps_mpo(messages[b].as_ref(), &blocks, rank, options, &message_prefix('M', b))?;
        messages[b - 1] = Some(m);
        reports.push(rep);
    }
    let norm = contract_closed(messages[0].as_ref(), &norm_blocks(state, partitioning, 0))?;
    Ok(BoundaryEnvironment {
        partitioning: partitioning.clone(),
        rank,
        options: *options,
        messages,
        reports,
        norm_sqr: norm.re,
    })
}

pub(crate) fn check_partitioning(state: &TensorNetworkState, partitioning: &Partitioning) -> Result<()> {
    partitioning.check_graph(state.graph())
}

/// `⟨x|ψ⟩` by sweeping the projected network from the first partition with
/// boundary MPS of rank `rank`.
pub fn amplitude(
    state: &TensorNetworkState,
    x: &Bitstring,
    partitioning: &Partitioning,
    rank: usize,
    options: &FitOptions,
) -> Result<C64> {
    check_partitioning(state, partitioning)?;
    if x.len() != state.num_qubits() {
        return Err(Error::Config(format!("bitstring has {} bits for {} qubits", x.len(), state.num_qubits())));
    }
    let nb = partitioning.len();
    let mut m: Option<Mps> = None;
    for b in 0..nb - 1 {
        let blocks = amplitude_blocks(state, partitioning, b, x)?;
        let (next, _) = fit_mps_mpo(m.as_ref(), &blocks, rank, options, &message_prefix('m', b))?;
        m = Some(next);
    }
    contract_closed(m.as_ref(), &amplitude_blocks(state, partitioning, nb - 1, x)?)
}

/// `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩` with boundary MPS of rank `rank`.
pub fn expectation(
    state: &TensorNetworkState,
    obs: &PauliString,
    partitioning: &Partitioning,
    rank: usize,
    options: &FitOptions,
) -> Result<f64> {
    norm_environments(state, partitioning, rank, options)?.expectation(state, obs)
}
