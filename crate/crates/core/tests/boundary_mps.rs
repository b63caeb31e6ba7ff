mod common;

use common::{exact_options, quench, z_expectation};
use planartn::boundary::{
    amplitude, expectation, norm_environments, FitOptions, Partitioning, PauliString, Strategy,
};
use planartn::circuit::RunOptions;
use planartn::network::{Bitstring, NetworkGraph, TensorNetworkState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fit() -> FitOptions {
    FitOptions::default()
}

#[test]
fn grid_norm_matches_exact_contraction_at_full_rank() {
    let q = quench(NetworkGraph::grid(2, 4).unwrap(), 2, &RunOptions::with_chi(2));
    let exact = q.state.norm_sqr_exact().unwrap();
    let part = Partitioning::new(&q.graph, Strategy::Columns).unwrap();
    // Two bonds of dimension χ = 2 cross each cut, ket and bra: χ⁴ = 16.
    let env = norm_environments(&q.state, &part, 16, &fit()).unwrap();
    assert!((env.norm_sqr() - exact).abs() < 1e-8 * exact);
}

#[test]
fn twelve_qubit_amplitudes_match_statevector() {
    let q = quench(NetworkGraph::grid(3, 4).unwrap(), 2, &RunOptions::with_chi(4));
    let dense = q.state.to_dense().unwrap();
    let part = Partitioning::new(&q.graph, Strategy::Columns).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let i = rng.random_range(0..dense.len());
        let x = Bitstring::from_dense_index(i, 12);
        let a = amplitude(&q.state, &x, &part, 64, &fit()).unwrap();
        assert!((a - dense[i]).norm() < 1e-8, "x = {x}: {a} vs {}", dense[i]);
    }
}

#[test]
fn expectation_converges_with_rank() {
    let q = quench(NetworkGraph::grid(3, 3).unwrap(), 2, &RunOptions::with_chi(2));
    let exact = z_expectation(&q.state.to_dense().unwrap(), 9, 4);
    let part = Partitioning::new(&q.graph, Strategy::Columns).unwrap();
    let err = |r| (expectation(&q.state, &PauliString::z(4), &part, r, &fit()).unwrap() - exact).abs();
    assert!(err(64) < 1e-10);
    assert!(err(1) > err(64));
}

#[test]
fn strategies_agree_at_exact_rank() {
    let q = quench(NetworkGraph::grid(3, 3).unwrap(), 2, &RunOptions::with_chi(2));
    let obs: PauliString = "Z4".parse().unwrap();
    let values: Vec<f64> = [Strategy::Columns, Strategy::Rows, Strategy::Diagonal]
        .iter()
        .map(|&s| {
            let part = Partitioning::new(&q.graph, s).unwrap();
            expectation(&q.state, &obs, &part, 256, &fit()).unwrap()
        })
        .collect();
    assert!(values.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-8), "{values:?}");
}

#[test]
fn chain_norm_is_exact_at_rank_one_after_gauging() {
    // A chain in columns cuts one bond per step; an untruncated quench on a
    // product state at χ = 1 gives a product state, exact at R = 1.
    let q = quench(NetworkGraph::chain(6).unwrap(), 3, &RunOptions::with_chi(1));
    let part = Partitioning::new(&q.graph, Strategy::Columns).unwrap();
    let env = norm_environments(&q.state, &part, 1, &fit()).unwrap();
    let exact = q.state.norm_sqr_exact().unwrap();
    assert!((env.norm_sqr() - exact).abs() < 1e-10 * exact);
}

#[test]
fn two_site_correlator_matches_statevector() {
    let q = quench(NetworkGraph::grid(2, 3).unwrap(), 2, &exact_options());
    let dense = q.state.to_dense().unwrap();
    let part = Partitioning::new(&q.graph, Strategy::Columns).unwrap();
    // ⟨Z0 Z1⟩ from the dense vector.
    let exact: f64 = dense
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let x = Bitstring::from_dense_index(i, 6);
            let s = |b: u8| 1.0 - 2.0 * b as f64;
            a.norm_sqr() * s(x.bits()[0]) * s(x.bits()[1])
        })
        .sum();
    let value = expectation(&q.state, &"Z0 Z1".parse().unwrap(), &part, 64, &fit()).unwrap();
    assert!((value - exact).abs() < 1e-9);
    // X and Y terms leave the magnetization sector, so ⟨X0⟩ vanishes.
    let x0 = expectation(&q.state, &"X0".parse().unwrap(), &part, 64, &fit()).unwrap();
    assert!(x0.abs() < 1e-9);
}

#[test]
fn random_state_on_rotated_square_lattice() {
    let g = NetworkGraph::rotated_square(2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let state = TensorNetworkState::random(&g, 2, &mut rng).unwrap();
    let exact = state.norm_sqr_exact().unwrap();
    let part = Partitioning::new(&g, Strategy::Columns).unwrap();
    let env = norm_environments(&state, &part, 256, &fit()).unwrap();
    assert!((env.norm_sqr() - exact).abs() < 1e-9 * exact);
}

#[test]
fn fit_reports_are_monotone() {
    let q = quench(NetworkGraph::grid(3, 4).unwrap(), 3, &RunOptions::with_chi(3));
    let part = Partitioning::new(&q.graph, Strategy::Columns).unwrap();
    let env = norm_environments(&q.state, &part, 2, &fit()).unwrap();
    assert!(env.reports().iter().any(|r| r.truncated));
    for r in env.reports() {
        assert!(r.objective.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)), "{:?}", r.objective);
    }
}

#[test]
fn mismatched_partitioning_is_rejected() {
    let q = quench(NetworkGraph::grid(2, 2).unwrap(), 1, &RunOptions::with_chi(2));
    let other = Partitioning::new(&NetworkGraph::chain(4).unwrap(), Strategy::Columns).unwrap();
    assert!(norm_environments(&q.state, &other, 2, &fit()).is_err());
}
