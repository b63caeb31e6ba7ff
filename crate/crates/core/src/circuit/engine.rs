use rayon::prelude::*;
use serde::Serialize;

use super::gate::out_label;
use super::{Circuit, Gate};
use crate::bp::{run_bp_from, BpOptions, MessageEnvironment};
use crate::error::{Error, Result};
use crate::C64;
use crate::network::{edge_label, phys_label, TensorNetworkState};
use crate::tensor::{
    contract, psd_sqrt_and_pinv_sqrt, qr_split, scale_along, svd_split, Label, Tensor, DEFAULT_REG_CUTOFF,
    DEFAULT_SVD_CUTOFF,
};

/// When messages are re-converged during a circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BpPolicy {
    /// Before every layer that contains two-qubit gates.
    #[default]
    PerLayer,
    /// Before every two-qubit gate.
    PerGate,
    /// Once, before the first two-qubit gate.
    Never,
}

impl std::str::FromStr for BpPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-layer" => Ok(BpPolicy::PerLayer),
            "per-gate" => Ok(BpPolicy::PerGate),
            "never" => Ok(BpPolicy::Never),
            other => Err(Error::Config(format!("unknown BP policy {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub chi: usize,
    pub cutoff: f64,
    pub reg_cutoff: f64,
    pub bp_policy: BpPolicy,
    pub bp: BpOptions,
}

impl RunOptions {
    pub fn with_chi(chi: usize) -> Self {
        RunOptions {
            chi,
            cutoff: DEFAULT_SVD_CUTOFF,
            reg_cutoff: DEFAULT_REG_CUTOFF,
            bp_policy: BpPolicy::PerLayer,
            bp: BpOptions::default(),
        }
    }
}

/// Result of one truncated two-qubit gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoSiteOutcome {
    /// Discarded share of the normalized squared singular values.
    pub error: f64,
    pub kept_rank: usize,
    pub exact_rank: usize,
    /// Message eigenmodes dropped by the regularized inverse square root.
    pub dropped_modes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateRecord {
    pub gate_index: usize,
    pub layer: usize,
    pub kind: String,
    pub sites: Vec<usize>,
    pub error: f64,
    pub kept_rank: usize,
    pub exact_rank: usize,
    pub dropped_modes: usize,
    /// Cumulative product of `1 − ε` up to and including this gate.
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BpRecord {
    /// Layer before which the messages were refreshed.
    pub layer: usize,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Per-gate errors and the fidelity estimate `f = Π (1 − ε_i)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GateLog {
    pub gates: Vec<GateRecord>,
    pub bp_runs: Vec<BpRecord>,
    pub fidelity: f64,
}

impl GateLog {
    pub fn max_error(&self) -> f64 {
        self.gates.iter().map(|g| g.error).fold(0.0, f64::max)
    }
}

/// Apply a one-qubit gate exactly; bond dimensions are unchanged.
pub fn apply_one_site(state: &mut TensorNetworkState, gate: &Gate) -> Result<()> {
    if gate.sites.len() != 1 {
        return Err(Error::Circuit("expected a one-qubit gate".into()));
    }
    let v = gate.sites[0];
    if v >= state.num_qubits() {
        return Err(Error::Circuit(format!("site {v} out of range")));
    }
    let t = contract(&gate.tensor(), state.tensor(v))?.relabeled(&out_label(v), phys_label(v));
    state.set_tensor(v, t);
    Ok(())
}

struct TwoSiteUpdate {
    u: usize,
    v: usize,
    tensor_u: Tensor,
    tensor_v: Tensor,
    message: Tensor,
    outcome: TwoSiteOutcome,
}

/// Absorb the square roots of the messages arriving at `x` from every
/// neighbour except `other`. Returns the gauged tensor, the inverse square
/// roots needed to undo the gauge, and how many near-singular message modes
/// were regularized.
///
/// Each message is shifted by `reg_cutoff * ‖m‖` times the identity before
/// the square root, so the gauge is always invertible and an untruncated
/// update stays exact even when loopy BP leaves messages near-singular.
fn gauge_site(
    state: &TensorNetworkState,
    env: &MessageEnvironment,
    x: usize,
    other: usize,
    reg_cutoff: f64,
) -> Result<(Tensor, Vec<(Label, Tensor)>, usize)> {
    let mut phi = state.tensor(x).clone();
    let mut inverses = Vec::new();
    let mut dropped = 0;
    for &w in state.graph().neighbors(x) {
        if w == other {
            continue;
        }
        let l = edge_label(x, w);
        let m = env.message(w, x);
        let shift = reg_cutoff * m.norm();
        let dim = m.dim_of(&l).expect("message carries the edge label");
        let shifted = m.add_scaled(&Tensor::identity(l.clone(), l.prime(), dim), C64::new(shift, 0.0))?;
        let (sqrt, inv, _) = psd_sqrt_and_pinv_sqrt(&shifted, &[l.clone()], 0.0)?;
        let (_, _, d) = psd_sqrt_and_pinv_sqrt(m, &[l.clone()], reg_cutoff)?;
        dropped += d;
        phi = contract(&phi, &sqrt)?.relabeled(&l.prime(), l.clone());
        inverses.push((l, inv));
    }
    Ok((phi, inverses, dropped))
}

fn ungauge(mut t: Tensor, inverses: &[(Label, Tensor)]) -> Result<Tensor> {
    for (l, inv) in inverses {
        t = contract(&t, inv)?.relabeled(&l.prime(), l.clone());
    }
    Ok(t)
}

/// Split off the virtual indices other than the gate edge with a QR so the
/// SVD only sees the small `(bond, physical, edge)` factor.
fn reduce(phi: Tensor, x: usize, e: &Label) -> Result<(Option<Tensor>, Tensor)> {
    let p = phys_label(x);
    let outer: Vec<Label> = phi.labels().filter(|l| **l != p && *l != e).cloned().collect();
    if outer.is_empty() {
        return Ok((None, phi));
    }
    let bond = Label::new(format!("r{x}"));
    let (q, r) = qr_split(&phi, &outer, &bond)?;
    Ok((Some(q), r))
}

fn two_site_update(
    state: &TensorNetworkState,
    env: &MessageEnvironment,
    gate: &Gate,
    max_rank: usize,
    cutoff: f64,
    reg_cutoff: f64,
) -> Result<TwoSiteUpdate> {
    let (u, v) = (gate.sites[0], gate.sites[1]);
    if !state.graph().has_edge(u, v) {
        return Err(Error::Circuit(format!("sites ({u},{v}) are not coupled in the graph")));
    }
    let e = edge_label(u, v);
    let (phi_u, inv_u, du) = gauge_site(state, env, u, v, reg_cutoff)?;
    let (phi_v, inv_v, dv) = gauge_site(state, env, v, u, reg_cutoff)?;
    let (q_u, r_u) = reduce(phi_u, u, &e)?;
    let (q_v, r_v) = reduce(phi_v, v, &e)?;

    let theta = contract(&contract(&r_u, &r_v)?, &gate.tensor())?
        .relabeled(&out_label(u), phys_label(u))
        .relabeled(&out_label(v), phys_label(v));
    let pu = phys_label(u);
    let left: Vec<Label> = r_u.labels().filter(|l| **l != e).cloned().collect();
    debug_assert!(left.contains(&pu));
    let split = svd_split(&theta, &left, max_rank, cutoff, &e)?;

    // keep the overall weight of the spectrum so a truncated state stays
    // close to unit norm
    let total: f64 = split.singular_values.iter().map(|s| s * s).sum();
    let kept: f64 = split.s.iter().map(|s| s * s).sum();
    let rescale = if split.kept_rank < split.singular_values.len() { (total / kept).sqrt() } else { 1.0 };
    let s: Vec<f64> = split.s.iter().map(|x| x * rescale).collect();
    let root: Vec<f64> = s.iter().map(|x| x.sqrt()).collect();

    let mut a = scale_along(&split.u, &e, &root)?;
    let mut b = scale_along(&split.vh, &e, &root)?;
    if let Some(q) = q_u {
        a = contract(&q, &a)?;
    }
    if let Some(q) = q_v {
        b = contract(&q, &b)?;
    }
    let a = ungauge(a, &inv_u)?;
    let b = ungauge(b, &inv_v)?;

    let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diag: Vec<f64> = s.iter().map(|x| x / norm).collect();
    let message = Tensor::diagonal(e.clone(), e.prime(), &diag);
    Ok(TwoSiteUpdate {
        u,
        v,
        tensor_u: a,
        tensor_v: b,
        message,
        outcome: TwoSiteOutcome {
            error: split.discarded_weight,
            kept_rank: split.kept_rank,
            exact_rank: split.exact_rank,
            dropped_modes: du + dv,
        },
    })
}

fn commit(state: &mut TensorNetworkState, env: &mut MessageEnvironment, up: TwoSiteUpdate) -> TwoSiteOutcome {
    state.set_tensor(up.u, up.tensor_u);
    state.set_tensor(up.v, up.tensor_v);
    env.set_message(up.u, up.v, up.message.clone());
    env.set_message(up.v, up.u, up.message);
    up.outcome
}

/// Apply a two-qubit gate with a message-gauged truncated SVD.
///
/// The square roots of the messages entering the two sites (other than across
/// the gate edge) are absorbed, the gate is applied, the pair is split with
/// an SVD truncated to `max_rank`, and the gauge is removed with the
/// regularized inverse square roots. The messages across the updated edge
/// are replaced by the normalized kept singular values; all other messages
/// are left as they are.
pub fn apply_two_site(
    state: &mut TensorNetworkState,
    env: &mut MessageEnvironment,
    gate: &Gate,
    max_rank: usize,
    cutoff: f64,
    reg_cutoff: f64,
) -> Result<TwoSiteOutcome> {
    if gate.sites.len() != 2 {
        return Err(Error::Circuit("expected a two-qubit gate".into()));
    }
    let up = two_site_update(state, env, gate, max_rank, cutoff, reg_cutoff)?;
    Ok(commit(state, env, up))
}

fn refresh(
    state: &TensorNetworkState,
    env: Option<MessageEnvironment>,
    opts: &RunOptions,
    layer: usize,
    log: &mut GateLog,
) -> Result<MessageEnvironment> {
    let start = env.unwrap_or_else(|| MessageEnvironment::identity(state));
    let env = run_bp_from(state, start, &opts.bp)?;
    log.bp_runs.push(BpRecord {
        layer,
        iterations: env.iterations,
        converged: env.converged,
        residual: env.residual,
    });
    Ok(env)
}

/// Apply every gate of `circuit` in order, refreshing messages according to
/// the policy. BP that fails to converge is recorded in the log and the run
/// continues with the last messages.
pub fn run_circuit(
    mut state: TensorNetworkState,
    circuit: &Circuit,
    opts: &RunOptions,
) -> Result<(TensorNetworkState, GateLog)> {
    if opts.chi == 0 {
        return Err(Error::Config("chi must be at least 1".into()));
    }
    circuit.validate_for(state.graph())?;
    let mut log = GateLog { fidelity: 1.0, ..Default::default() };
    let mut env: Option<MessageEnvironment> = None;
    let mut gate_index = 0;
    for (li, layer) in circuit.layers.iter().enumerate() {
        let mut two = Vec::new();
        for g in layer {
            if g.is_two_site() {
                two.push((gate_index, g));
            } else {
                apply_one_site(&mut state, g)?;
                log.gates.push(GateRecord {
                    gate_index,
                    layer: li,
                    kind: g.kind.name().to_string(),
                    sites: g.sites.clone(),
                    error: 0.0,
                    kept_rank: 0,
                    exact_rank: 0,
                    dropped_modes: 0,
                    fidelity: 0.0,
                });
            }
            gate_index += 1;
        }
        if two.is_empty() {
            continue;
        }
        let mut outcomes = Vec::with_capacity(two.len());
        match opts.bp_policy {
            BpPolicy::PerGate => {
                for &(_, g) in &two {
                    let mut current = refresh(&state, env.take(), opts, li, &mut log)?;
                    let up = two_site_update(&state, &current, g, opts.chi, opts.cutoff, opts.reg_cutoff)?;
                    outcomes.push(commit(&mut state, &mut current, up));
                    env = Some(current);
                }
            }
            BpPolicy::PerLayer | BpPolicy::Never => {
                let mut current = match (opts.bp_policy, env.take()) {
                    (BpPolicy::Never, Some(e)) => e,
                    (_, e) => refresh(&state, e, opts, li, &mut log)?,
                };
                let updates: Vec<TwoSiteUpdate> = two
                    .par_iter()
                    .map(|&(_, g)| two_site_update(&state, &current, g, opts.chi, opts.cutoff, opts.reg_cutoff))
                    .collect::<Result<_>>()?;
                for up in updates {
                    outcomes.push(commit(&mut state, &mut current, up));
                }
                env = Some(current);
            }
        }
        for ((index, g), o) in two.into_iter().zip(outcomes) {
            log.gates.push(GateRecord {
                gate_index: index,
                layer: li,
                kind: g.kind.name().to_string(),
                sites: g.sites.clone(),
                error: o.error,
                kept_rank: o.kept_rank,
                exact_rank: o.exact_rank,
                dropped_modes: o.dropped_modes,
                fidelity: 0.0,
            });
        }
    }
    log.gates.sort_by_key(|g| g.gate_index);
    for g in &mut log.gates {
        log.fidelity *= 1.0 - g.error;
        g.fidelity = log.fidelity;
    }
    Ok((state, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::run_bp;
    use crate::circuit::{heisenberg_trotter_circuit, GateKind};
    use crate::network::{Bitstring, NetworkGraph};
    use num_complex::Complex64 as C64;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    /// Minimal dense simulator, qubit 0 most significant.
    pub(super) fn dense_apply(psi: &mut [C64], n: usize, g: &Gate) {
        let m = g.matrix();
        let k = g.sites.len();
        let d = 1 << k;
        let bit = |idx: usize, s: usize| (idx >> (n - 1 - s)) & 1;
        let old = psi.to_vec();
        for (idx, out) in psi.iter_mut().enumerate() {
            let row: usize = (0..k).map(|j| bit(idx, g.sites[j]) << j).sum();
            let mut acc = re(0.0);
            for col in 0..d {
                let mut src = idx;
                for j in 0..k {
                    let shift = n - 1 - g.sites[j];
                    src = (src & !(1 << shift)) | (((col >> j) & 1) << shift);
                }
                acc += m[row * d + col] * old[src];
            }
            *out = acc;
        }
    }

    pub(super) fn basis(n: usize, x: &Bitstring) -> Vec<C64> {
        let mut psi = vec![re(0.0); 1 << n];
        psi[x.dense_index()] = re(1.0);
        psi
    }

    #[test]
    fn one_site_gates() {
        let g = NetworkGraph::chain(3).unwrap();
        let mut s = TensorNetworkState::product_state(&g, &Bitstring::zeros(3)).unwrap();
        apply_one_site(&mut s, &Gate::new(GateKind::X, vec![1], vec![]).unwrap()).unwrap();
        assert_eq!(s.amplitude_exact(&"010".parse().unwrap()).unwrap(), re(1.0));
        let before = s.clone();
        let h = Gate::new(GateKind::H, vec![2], vec![]).unwrap();
        apply_one_site(&mut s, &h).unwrap();
        apply_one_site(&mut s, &h).unwrap();
        assert!(s.tensor(2).distance(before.tensor(2)).unwrap() < 1e-13);
        assert!(apply_one_site(&mut s, &Gate::new(GateKind::X, vec![7], vec![]).unwrap()).is_err());
    }

    #[test]
    fn cnot_on_product_stays_product() {
        let g = NetworkGraph::chain(2).unwrap();
        let mut s = TensorNetworkState::product_state(&g, &"10".parse().unwrap()).unwrap();
        let mut env = run_bp(&s, &BpOptions::default()).unwrap();
        let gate = Gate::new(GateKind::Cnot, vec![0, 1], vec![]).unwrap();
        let o = apply_two_site(&mut s, &mut env, &gate, 1, DEFAULT_SVD_CUTOFF, DEFAULT_REG_CUTOFF).unwrap();
        assert_eq!(o.error, 0.0);
        assert_eq!(o.kept_rank, 1);
        assert!((s.amplitude_exact(&"11".parse().unwrap()).unwrap() - re(1.0)).norm() < 1e-14);
    }

    #[test]
    fn truncated_heisenberg_on_domain_wall_edge() {
        let g = NetworkGraph::chain(2).unwrap();
        let x: Bitstring = "01".parse().unwrap();
        let mut s = TensorNetworkState::product_state(&g, &x).unwrap();
        let mut env = run_bp(&s, &BpOptions::default()).unwrap();
        let gate = Gate::new(GateKind::Heisenberg, vec![0, 1], vec![0.1]).unwrap();
        let o = apply_two_site(&mut s, &mut env, &gate, 1, DEFAULT_SVD_CUTOFF, DEFAULT_REG_CUTOFF).unwrap();
        // dense Schmidt oracle: the output is a|01> + b|10>, Schmidt weights |a|², |b|²
        let mut psi = basis(2, &x);
        dense_apply(&mut psi, 2, &gate);
        let w: Vec<f64> = vec![psi[1].norm_sqr(), psi[2].norm_sqr()];
        let dominant = w.iter().cloned().fold(0.0, f64::max) / w.iter().sum::<f64>();
        assert!((o.error - (1.0 - dominant)).abs() < 1e-12);
        assert_eq!(o.exact_rank, 2);
    }

    #[test]
    fn exact_regime_matches_statevector() {
        let g = NetworkGraph::grid(2, 3).unwrap();
        let x = Bitstring::new(g.domain_wall_bits()).unwrap();
        let s = TensorNetworkState::product_state(&g, &x).unwrap();
        let c = heisenberg_trotter_circuit(&g, 1.0, 0.1, 3).unwrap();
        for policy in [BpPolicy::PerGate, BpPolicy::Never, BpPolicy::PerLayer] {
            // The default cutoff drops amplitudes near 1e-7; keep everything here.
            let opts = RunOptions { bp_policy: policy, cutoff: 1e-24, ..RunOptions::with_chi(64) };
            let (out, log) = run_circuit(s.clone(), &c, &opts).unwrap();
            assert!((log.fidelity - 1.0).abs() < 1e-12);
            let mut psi = basis(6, &x);
            for gate in c.gates() {
                dense_apply(&mut psi, 6, gate);
            }
            let tn = out.to_dense().unwrap();
            let err = tn.iter().zip(&psi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{policy:?}: {err}");
        }
    }

    #[test]
    fn identity_gate_is_exact_at_any_chi() {
        let g = NetworkGraph::grid(2, 2).unwrap();
        let c = heisenberg_trotter_circuit(&g, 1.0, 0.3, 2).unwrap();
        let s0 = TensorNetworkState::product_state(&g, &"0110".parse().unwrap()).unwrap();
        let (mut s, _) = run_circuit(s0, &c, &RunOptions::with_chi(2)).unwrap();
        let before = s.to_dense().unwrap();
        let mut env = run_bp(&s, &BpOptions::default()).unwrap();
        let id = Gate::from_matrix(vec![0, 1], (0..16).map(|k| re(if k % 5 == 0 { 1.0 } else { 0.0 })).collect())
            .unwrap();
        let o = apply_two_site(&mut s, &mut env, &id, 2, DEFAULT_SVD_CUTOFF, DEFAULT_REG_CUTOFF).unwrap();
        assert!(o.error < 1e-12);
        let after = s.to_dense().unwrap();
        let err = before.iter().zip(&after).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn fidelity_is_monotone() {
        let g = NetworkGraph::grid(3, 3).unwrap();
        let x = Bitstring::new(g.domain_wall_bits()).unwrap();
        let s = TensorNetworkState::product_state(&g, &x).unwrap();
        let c = heisenberg_trotter_circuit(&g, 1.0, 0.2, 3).unwrap();
        let (_, log) = run_circuit(s, &c, &RunOptions::with_chi(2)).unwrap();
        assert!(log.fidelity < 1.0 && log.fidelity > 0.0);
        for w in log.gates.windows(2) {
            assert!(w[1].fidelity <= w[0].fidelity);
        }
        assert!(log.gates.iter().all(|g| (0.0..=1.0).contains(&g.error)));
    }
}
