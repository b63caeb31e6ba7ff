mod common;

use common::{normalized_quench, probabilities, z_expectation};
use planartn::boundary::{norm_environments, FitOptions, Partitioning, PauliString, Strategy};
use planartn::circuit::{run_circuit, Circuit, Gate, GateKind, RunOptions};
use planartn::network::{Bitstring, NetworkGraph, TensorNetworkState};
use planartn::sampler::{draw_samples, importance_expectation, raw_expectation, verify_p, SampleReport, SamplerConfig};

fn sample(state: &TensorNetworkState, strategy: Strategy, rx: usize, rn: usize, n: usize, seed: u64) -> SampleReport {
    let part = Partitioning::new(state.graph(), strategy).unwrap();
    let env = norm_environments(state, &part, rn, &FitOptions::default()).unwrap();
    let mut cfg = SamplerConfig::new(rn, state.max_bond_dim(), n, seed);
    cfg.rank_x = rx;
    draw_samples(state, &env, &cfg).unwrap()
}

fn ghz_chain(n: usize) -> TensorNetworkState {
    let g = NetworkGraph::chain(n).unwrap();
    let mut gates = vec![Gate::new(GateKind::H, vec![0], vec![]).unwrap()];
    gates.extend((0..n - 1).map(|i| Gate::new(GateKind::Cnot, vec![i, i + 1], vec![]).unwrap()));
    let circuit = Circuit::from_gates(n, gates).unwrap();
    let start = TensorNetworkState::product_state(&g, &Bitstring::zeros(n)).unwrap();
    run_circuit(start, &circuit, &RunOptions::with_chi(2)).unwrap().0
}

#[test]
fn ghz_chain_splits_evenly() {
    let n = 8;
    let state = ghz_chain(n);
    let rep = sample(&state, Strategy::Columns, 2, 4, 10_000, 5);
    let ones = rep.records.iter().filter(|r| r.x.bits()[0] == 1).count() as f64;
    for r in &rep.records {
        assert!(r.x.bits().iter().all(|&b| b == r.x.bits()[0]), "{} is not uniform", r.x);
        assert!((r.q - 0.5).abs() < 1e-12 && (r.p - 0.5).abs() < 1e-12);
    }
    // Three binomial standard deviations.
    assert!((ones - 5000.0).abs() <= 3.0 * 50.0, "{ones} ones");
    assert!(rep.kld.abs() < 1e-12);
}

#[test]
fn exact_rank_q_equals_dense_probability() {
    let q = normalized_quench(NetworkGraph::grid(3, 3).unwrap(), 2, 2);
    let probs = probabilities(&q.state.to_dense().unwrap());
    let rep = sample(&q.state, Strategy::Diagonal, 64, 64, 300, 1);
    for r in &rep.records {
        let p = probs[r.x.dense_index()];
        assert!((r.q - p).abs() < 1e-12, "{}: q {} vs {p}", r.x, r.q);
        assert!((r.p - p).abs() < 1e-10);
        assert!((r.p_sweep.expect("exact sweep records p") - p).abs() < 1e-10);
    }
    assert!(rep.kld.abs() < 1e-9);
    assert!((rep.norm_estimate - 1.0).abs() < 1e-10);
}

#[test]
fn verification_rank_recovers_dense_probability() {
    let q = normalized_quench(NetworkGraph::grid(3, 4).unwrap(), 2, 2);
    let dense = q.state.to_dense().unwrap();
    let part = Partitioning::new(&q.graph, Strategy::Columns).unwrap();
    for i in [0usize, 17, 1234, 2047, 4000] {
        let x = Bitstring::from_dense_index(i, 12);
        let p = verify_p(&q.state, &x, &part, 4, &FitOptions::default()).unwrap();
        assert!((p - dense[i].norm_sqr()).abs() < 1e-8);
    }
}

#[test]
fn norm_estimator_is_unbiased_for_small_amplitude_rank() {
    let mut q = normalized_quench(NetworkGraph::grid(3, 3).unwrap(), 2, 2);
    // A non-unit norm makes the check meaningful.
    q.state.normalize_with(0.25).unwrap();
    let exact = q.state.norm_sqr_exact().unwrap();
    for (rx, rn) in [(1, 64), (2, 64), (2, 4)] {
        let rep = sample(&q.state, Strategy::Columns, rx, rn, 3000, 9);
        let dev = (rep.norm_estimate - exact).abs();
        assert!(dev <= 3.0 * rep.norm_std_error.max(1e-12), "R=({rx},{rn}): {} ± {} vs {exact}", rep.norm_estimate, rep.norm_std_error);
    }
}

#[test]
fn heisenberg_samples_stay_in_the_initial_sector() {
    let q = normalized_quench(NetworkGraph::heavy_hex(1, 1).unwrap(), 2, 1 << 10);
    let part = Partitioning::new(&q.graph, Strategy::Columns).unwrap();
    let env = norm_environments(&q.state, &part, 256, &FitOptions::default()).unwrap();
    let mut cfg = SamplerConfig::new(256, q.state.max_bond_dim(), 500, 2);
    cfg.expected_magnetization = Some(q.x0.magnetization());
    let rep = draw_samples(&q.state, &env, &cfg).unwrap();
    assert_eq!(rep.magnetization_pass_rate, Some(1.0));
}

#[test]
fn importance_weights_correct_a_biased_sampler() {
    let q = normalized_quench(NetworkGraph::grid(3, 4).unwrap(), 2, 2);
    let exact = z_expectation(&q.state.to_dense().unwrap(), 12, 5);
    // At R = 1 some branches get nearly zero q while p is sizable; the
    // weights are then too heavy-tailed for a 3σ check at this sample size.
    let rep = sample(&q.state, Strategy::Columns, 2, 2, 4000, 4);
    let obs = PauliString::z(5);
    let (mean, se) = importance_expectation(&rep.records, &obs).unwrap();
    let (raw, _) = raw_expectation(&rep.records, &obs).unwrap();
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} ± {se} vs {exact}");
    assert!((mean - exact).abs() <= (raw - exact).abs() + 3.0 * se);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let q = normalized_quench(NetworkGraph::grid(2, 3).unwrap(), 2, 2);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| sample(&q.state, Strategy::Columns, 2, 2, 64, 77))
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.records, b.records);
    assert_eq!(serde_json::to_string(&a.records).unwrap(), serde_json::to_string(&b.records).unwrap());
}

#[test]
fn product_state_always_gives_its_bitstring() {
    let g = NetworkGraph::grid(2, 3).unwrap();
    let x: Bitstring = "010110".parse().unwrap();
    let state = TensorNetworkState::product_state(&g, &x).unwrap();
    let rep = sample(&state, Strategy::Rows, 1, 1, 20, 0);
    assert!(rep.records.iter().all(|r| r.x == x && r.q == 1.0 && (r.p - 1.0).abs() < 1e-14));
}
