//! Belief propagation on the norm network `⟨ψ|ψ⟩`.
//!
//! A message on directed edge `u → v` is a matrix over the ket and bra copies
//! of the edge's virtual index, labelled `e` and `e'`. It summarizes the part
//! of the norm network on `u`'s side of the edge.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::network::{edge_label, phys_label, Loop, TensorNetworkState};
use crate::tensor::{contract, eig_full, Label, Tensor};

pub const DEFAULT_BP_TOL: f64 = 1e-10;
pub const DEFAULT_BP_MAX_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Every message of a sweep is computed from the previous sweep.
    #[default]
    Synchronous,
    /// Messages are updated in place, in a fixed order, forward then backward.
    Sequential,
}

impl std::str::FromStr for Schedule {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synchronous" => Ok(Schedule::Synchronous),
            "sequential" => Ok(Schedule::Sequential),
            other => Err(crate::Error::Config(format!("unknown BP schedule {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub schedule: Schedule,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions { tol: DEFAULT_BP_TOL, max_iters: DEFAULT_BP_MAX_ITERS, schedule: Schedule::Synchronous }
    }
}

/// Converged (or last) messages on every directed edge.
#[derive(Clone, Debug)]
pub struct MessageEnvironment {
    messages: BTreeMap<(usize, usize), Tensor>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl MessageEnvironment {
    /// Normalized identity messages on every directed edge.
    pub fn identity(state: &TensorNetworkState) -> Self {
        let mut messages = BTreeMap::new();
        for &(u, v) in state.graph().edges() {
            let l = edge_label(u, v);
            let chi = state.bond_dim(u, v).unwrap_or(1);
            let mut m = Tensor::identity(l.clone(), l.prime(), chi);
            m.normalize();
            messages.insert((u, v), m.clone());
            messages.insert((v, u), m);
        }
        MessageEnvironment { messages, converged: false, iterations: 0, residual: f64::INFINITY }
    }

    /// The message sent from `from` to `to`, indexed by the edge label and its prime.
    pub fn message(&self, from: usize, to: usize) -> &Tensor {
        &self.messages[&(from, to)]
    }

    pub fn set_message(&mut self, from: usize, to: usize, m: Tensor) {
        self.messages.insert((from, to), m);
    }

    pub fn messages(&self) -> impl Iterator<Item = (&(usize, usize), &Tensor)> {
        self.messages.iter()
    }
}

/// Contract site `v`'s ket tensor with the incoming messages from every
/// neighbour except `skip`, then with the bra tensor.
fn absorb_site(
    state: &TensorNetworkState,
    env: &MessageEnvironment,
    v: usize,
    skip: &[usize],
) -> Result<Tensor> {
    let mut acc = state.tensor(v).clone();
    for &w in state.graph().neighbors(v) {
        if !skip.contains(&w) {
            acc = contract(&acc, env.message(w, v))?;
        }
    }
    let p = phys_label(v);
    let bra = state.tensor(v).conj().map_labels(|l| if *l == p { l.clone() } else { l.prime() });
    contract(&acc, &bra)
}

/// Hermitian part with unit Frobenius norm and non-negative trace.
fn hermitian_normalized(m: &Tensor, l: &Label) -> Result<Tensor> {
    let lp = l.prime();
    let order = [l.clone(), lp.clone()];
    let m = m.permute(&order)?;
    let dagger = m
        .conj()
        .map_labels(|x| if x == l { lp.clone() } else { l.clone() })
        .permute(&order)?;
    let mut h = m.add_scaled(&dagger, C64::new(1.0, 0.0))?;
    let d = h.dims()[0];
    let trace: f64 = (0..d).map(|i| h.data()[i * d + i].re).sum();
    let n = h.norm();
    if n > 0.0 {
        let sign = if trace < 0.0 { -1.0 } else { 1.0 };
        h.scale(C64::new(sign / n, 0.0));
    }
    Ok(h)
}

fn outgoing(state: &TensorNetworkState, env: &MessageEnvironment, from: usize, to: usize) -> Result<Tensor> {
    let t = absorb_site(state, env, from, &[to])?;
    hermitian_normalized(&t, &edge_label(from, to))
}

/// Iterate messages to a fixed point. Non-convergence is reported through
/// `converged = false` rather than as an error.
pub fn run_bp(state: &TensorNetworkState, opts: &BpOptions) -> Result<MessageEnvironment> {
    run_bp_from(state, MessageEnvironment::identity(state), opts)
}

/// As [`run_bp`], starting from existing messages. Messages whose dimensions
/// no longer match the state are reset to the identity.
pub fn run_bp_from(
    state: &TensorNetworkState,
    mut env: MessageEnvironment,
    opts: &BpOptions,
) -> Result<MessageEnvironment> {
    let directed: Vec<(usize, usize)> =
        state.graph().edges().iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
    let fresh = MessageEnvironment::identity(state);
    for &(u, v) in &directed {
        let l = edge_label(u, v);
        let ok = env.messages.get(&(u, v)).is_some_and(|m| m.dim_of(&l) == state.bond_dim(u, v));
        if !ok {
            env.set_message(u, v, fresh.message(u, v).clone());
        }
    }
    env.converged = directed.is_empty();
    env.iterations = 0;
    env.residual = 0.0;
    if directed.is_empty() {
        return Ok(env);
    }
    for it in 1..=opts.max_iters {
        let mut residual = 0.0f64;
        match opts.schedule {
            Schedule::Synchronous => {
                let updated: Vec<Tensor> = directed
                    .par_iter()
                    .map(|&(u, v)| outgoing(state, &env, u, v))
                    .collect::<Result<_>>()?;
                for (&(u, v), m) in directed.iter().zip(updated) {
                    residual = residual.max(m.distance(env.message(u, v))?);
                    env.set_message(u, v, m);
                }
            }
            Schedule::Sequential => {
                let order = directed.iter().chain(directed.iter().rev());
                for &(u, v) in order {
                    let m = outgoing(state, &env, u, v)?;
                    residual = residual.max(m.distance(env.message(u, v))?);
                    env.set_message(u, v, m);
                }
            }
        }
        env.iterations = it;
        env.residual = residual;
        if residual <= opts.tol {
            env.converged = true;
            break;
        }
    }
    Ok(env)
}

/// BP estimate of `⟨ψ|ψ⟩` with the convergence flag of the environment it
/// was computed from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BpNorm {
    pub value: f64,
    pub log_value: f64,
    pub converged: bool,
}

/// Product of vertex contractions over product of edge contractions.
pub fn bp_norm(state: &TensorNetworkState, env: &MessageEnvironment) -> Result<BpNorm> {
    let mut log = 0.0;
    for v in 0..state.num_qubits() {
        let z = absorb_site(state, env, v, &[])?.scalar_value()?;
        log += z.re.ln();
    }
    for &(u, v) in state.graph().edges() {
        let z = contract(env.message(u, v), env.message(v, u))?.scalar_value()?;
        log -= z.re.ln();
    }
    Ok(BpNorm { value: log.exp(), log_value: log, converged: env.converged })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopError {
    pub loop_id: usize,
    pub cut_edge: (usize, usize),
    pub error: f64,
}

/// Per-loop BP errors and their mean (zero when there are no loops).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopErrorReport {
    pub per_loop: Vec<LoopError>,
    pub mean_error: f64,
}

/// `1 − |λ₁| / Σ|λᵢ|` of each primitive loop's transfer matrix.
///
/// The loop's norm-network tensors are contracted with the BP messages
/// arriving from outside the loop. The loop is cut at its lexicographically
/// smallest edge `(a, b)`; the transfer matrix maps the copy of that edge at
/// `b` to the copy at `a`.
pub fn loop_error(state: &TensorNetworkState, env: &MessageEnvironment) -> Result<LoopErrorReport> {
    let loops = state.graph().primitive_loops();
    let per_loop: Vec<LoopError> = loops
        .par_iter()
        .enumerate()
        .map(|(id, lp)| {
            let (cut, error) = single_loop_error(state, env, lp)?;
            Ok(LoopError { loop_id: id, cut_edge: cut, error })
        })
        .collect::<Result<_>>()?;
    let mean_error = if per_loop.is_empty() {
        0.0
    } else {
        per_loop.iter().map(|l| l.error).sum::<f64>() / per_loop.len() as f64
    };
    Ok(LoopErrorReport { per_loop, mean_error })
}

fn single_loop_error(
    state: &TensorNetworkState,
    env: &MessageEnvironment,
    lp: &Loop,
) -> Result<((usize, usize), f64)> {
    let (a, b) = lp.edges[0];
    let k = lp.vertices.len();
    let start = lp.vertices.iter().position(|&x| x == a).unwrap();
    // walk a → ... → b, leaving the cut edge (a, b) for last
    let forward = lp.vertices[(start + 1) % k] != b;
    let walk: Vec<usize> = (0..k)
        .map(|i| if forward { lp.vertices[(start + i) % k] } else { lp.vertices[(start + k - i) % k] })
        .collect();
    let cut = edge_label(a, b);
    let (cut_b, cut_bp) = (cut.with_suffix("#"), cut.prime().with_suffix("#"));

    let mut acc: Option<Tensor> = None;
    for (i, &v) in walk.iter().enumerate() {
        let prev = walk[(i + k - 1) % k];
        let next = walk[(i + 1) % k];
        let mut site = absorb_site(state, env, v, &[prev, next])?;
        if v == b {
            site = site.relabeled(&cut, cut_b.clone()).relabeled(&cut.prime(), cut_bp.clone());
        }
        acc = Some(match acc {
            None => site,
            Some(t) => contract(&t, &site)?,
        });
    }
    let t = acc.expect("loop has vertices");
    let eigs = eig_full(&t, &[cut.clone(), cut.prime()])?;
    let total: f64 = eigs.iter().map(|z| z.norm()).sum();
    let error = if total > 0.0 { (1.0 - eigs[0].norm() / total).max(0.0) } else { 0.0 };
    Ok(((a, b), error))
}
