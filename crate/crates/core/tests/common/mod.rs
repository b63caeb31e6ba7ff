//! Dense statevector oracle shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use planartn::circuit::{heisenberg_trotter_circuit, run_circuit, Circuit, Gate, GateKind, GateLog, RunOptions};
use planartn::network::{Bitstring, NetworkGraph, TensorNetworkState};
use rand::Rng;

/// Apply `g` to a dense state with qubit 0 as the most significant bit.
pub fn apply_gate(psi: &mut [C64], n: usize, g: &Gate) {
    let m = g.matrix();
    let k = g.sites.len();
    let d = 1usize << k;
    let shifts: Vec<usize> = g.sites.iter().map(|&s| n - 1 - s).collect();
    let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
    let mut local = vec![C64::new(0.0, 0.0); d];
    for base in 0..psi.len() {
        if base & mask != 0 {
            continue;
        }
        let addr = |b: usize| -> usize {
            shifts.iter().enumerate().fold(base, |a, (j, s)| a | (((b >> j) & 1) << s))
        };
        for (b, slot) in local.iter_mut().enumerate() {
            *slot = psi[addr(b)];
        }
        for row in 0..d {
            let acc: C64 = (0..d).map(|col| m[row * d + col] * local[col]).sum();
            psi[addr(row)] = acc;
        }
    }
}

pub fn basis_state(n: usize, x: &Bitstring) -> Vec<C64> {
    let mut psi = vec![C64::new(0.0, 0.0); 1 << n];
    psi[x.dense_index()] = C64::new(1.0, 0.0);
    psi
}

pub fn run_dense(n: usize, x: &Bitstring, circuit: &Circuit) -> Vec<C64> {
    let mut psi = basis_state(n, x);
    for g in circuit.gates() {
        apply_gate(&mut psi, n, g);
    }
    psi
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `<Z_site>` of an unnormalized dense state.
pub fn z_expectation(psi: &[C64], n: usize, site: usize) -> f64 {
    let shift = n - 1 - site;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, a) in psi.iter().enumerate() {
        let w = a.norm_sqr();
        den += w;
        num += if (i >> shift) & 1 == 0 { w } else { -w };
    }
    num / den
}

/// Options that keep every singular value: unbounded rank and a cutoff far
/// below the default.
pub fn exact_options() -> RunOptions {
    RunOptions { cutoff: 1e-24, ..RunOptions::with_chi(1 << 20) }
}

/// Heisenberg quench (J = 1, δt = 0.1) from the domain-wall state.
pub struct Quench {
    pub graph: NetworkGraph,
    pub x0: Bitstring,
    pub circuit: Circuit,
    pub state: TensorNetworkState,
    pub log: GateLog,
}

pub fn quench(graph: NetworkGraph, steps: usize, opts: &RunOptions) -> Quench {
    let x0 = Bitstring::new(graph.domain_wall_bits()).unwrap();
    let circuit = heisenberg_trotter_circuit(&graph, 1.0, 0.1, steps).unwrap();
    let start = TensorNetworkState::product_state(&graph, &x0).unwrap();
    let (state, log) = run_circuit(start, &circuit, opts).unwrap();
    Quench { graph, x0, circuit, state, log }
}

/// Same quench with the state rescaled to unit norm.
pub fn normalized_quench(graph: NetworkGraph, steps: usize, chi: usize) -> Quench {
    let mut q = quench(graph, steps, &RunOptions::with_chi(chi));
    let z = q.state.norm_sqr_exact().unwrap();
    q.state.normalize_with(z).unwrap();
    q
}

/// Random layers of rotations and entangling gates on the edges of `graph`.
pub fn random_circuit(graph: &NetworkGraph, depth: usize, rng: &mut impl Rng) -> Circuit {
    let n = graph.num_vertices();
    let mut gates = Vec::new();
    for _ in 0..depth {
        for v in 0..n {
            let kind = [GateKind::Rx, GateKind::Ry, GateKind::Rz][rng.random_range(0..3)];
            gates.push(Gate::new(kind, vec![v], vec![rng.random_range(-3.0..3.0)]).unwrap());
        }
        for &(u, v) in graph.edges() {
            let (a, b) = if rng.random::<bool>() { (u, v) } else { (v, u) };
            let g = match rng.random_range(0..3) {
                0 => Gate::new(GateKind::Cnot, vec![a, b], vec![]),
                1 => Gate::new(GateKind::Heisenberg, vec![a, b], vec![rng.random_range(-1.0..1.0)]),
                _ => Gate::new(GateKind::Cp, vec![a, b], vec![rng.random_range(-3.0..3.0)]),
            };
            gates.push(g.unwrap());
        }
    }
    Circuit::from_gates(n, gates).unwrap()
}

/// `|⟨x|ψ⟩|² / ⟨ψ|ψ⟩` for every basis state.
pub fn probabilities(psi: &[C64]) -> Vec<f64> {
    let z: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    psi.iter().map(|a| a.norm_sqr() / z).collect()
}
