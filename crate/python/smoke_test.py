"""Smoke test for the planartn extension module.

Build and install with `maturin develop -m crates/python/Cargo.toml` (or
`pip install ./crates/python`), then run this script.
"""

import math

import planartn


def main():
    g = planartn.Graph.grid(3, 3)
    assert g.num_vertices == 9 and len(g.edges) == 12
    assert len(g.primitive_loops()) == 4

    x0 = g.domain_wall_bits()
    psi0 = planartn.State.product(g, x0)
    circuit = planartn.Circuit.heisenberg(g, steps=1)

    exact, log = planartn.run(psi0, circuit, chi=4, cutoff=1e-24)
    assert abs(log["fidelity"] - 1.0) < 1e-12
    assert abs(exact.norm_sqr_exact() - 1.0) < 1e-10

    dense = exact.to_dense()
    z4 = sum(abs(a) ** 2 * (1 - 2 * ((i >> (8 - 4)) & 1)) for i, a in enumerate(dense))
    assert abs(planartn.expectation(exact, "Z4", rank=16) - z4) < 1e-8
    amp = planartn.amplitude(exact, x0, rank=16)
    assert abs(amp - exact.amplitude_exact(x0)) < 1e-10

    state, log = planartn.run(psi0, planartn.Circuit.heisenberg(g, steps=3), chi=2)
    assert state.max_bond_dim == 2 and log["fidelity"] < 1.0
    print(f"truncated fidelity {log['fidelity']:.4f}, bp norm {planartn.bp_norm(state):.6f}")
    print(f"mean loop error {planartn.loop_error(state)['mean_error']:.3e}")

    state.normalize()
    m = x0.count("0") - x0.count("1")
    records, report = planartn.sample(state, rank=4, n=200, seed=5, magnetization=m)
    assert len(records) == 200 and all(len(r["x"]) == 9 for r in records)
    assert abs(report["kld"]) < 1e-9 and report["magnetization_pass_rate"] == 1.0
    assert math.isclose(report["norm_estimate"], 1.0, abs_tol=1e-9)
    print(f"KLD {report['kld']:.1e}, norm estimate {report['norm_estimate']:.6f}")
    print("ok")


if __name__ == "__main__":
    main()
