//! Circuits, gate application and the Heisenberg Trotter circuit builder.

mod engine;
mod gate;

pub use engine::{
    apply_one_site, apply_two_site, run_circuit, BpPolicy, BpRecord, GateLog, GateRecord, RunOptions,
    TwoSiteOutcome,
};
pub use gate::{Gate, GateKind, GateSpec};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkGraph;

/// Ordered layers of gates; gates within one layer act on disjoint sites.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n: usize,
    pub layers: Vec<Vec<Gate>>,
}

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<Vec<GateSpec>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gates: Option<Vec<GateSpec>>,
}

impl Circuit {
    pub fn new(n: usize, layers: Vec<Vec<Gate>>) -> Result<Self> {
        let c = Circuit { n, layers };
        c.check_layers()?;
        Ok(c)
    }

    /// Group a gate sequence into layers: each gate goes into the layer after
    /// the last one that touches any of its sites, so gate order on every
    /// qubit is preserved.
    pub fn from_gates(n: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut last_layer = vec![0usize; n];
        let mut layers: Vec<Vec<Gate>> = Vec::new();
        for g in gates {
            check_sites(&g, n)?;
            let slot = g.sites.iter().map(|&s| last_layer[s]).max().unwrap_or(0);
            if slot == layers.len() {
                layers.push(Vec::new());
            }
            for &s in &g.sites {
                last_layer[s] = slot + 1;
            }
            layers[slot].push(g);
        }
        Circuit::new(n, layers)
    }

    fn check_layers(&self) -> Result<()> {
        for (li, layer) in self.layers.iter().enumerate() {
            let mut used = vec![false; self.n];
            for (gi, g) in layer.iter().enumerate() {
                check_sites(g, self.n).map_err(|e| Error::Circuit(format!("layer {li}, gate {gi}: {e}")))?;
                for &s in &g.sites {
                    if used[s] {
                        return Err(Error::Circuit(format!("layer {li}, gate {gi}: site {s} already used in this layer")));
                    }
                    used[s] = true;
                }
            }
        }
        Ok(())
    }

    /// Check that every two-qubit gate acts on an edge of `graph`.
    pub fn validate_for(&self, graph: &NetworkGraph) -> Result<()> {
        if self.n != graph.num_vertices() {
            return Err(Error::Circuit(format!(
                "circuit has {} qubits, graph has {}",
                self.n,
                graph.num_vertices()
            )));
        }
        for (li, layer) in self.layers.iter().enumerate() {
            for (gi, g) in layer.iter().enumerate() {
                if g.is_two_site() && !graph.has_edge(g.sites[0], g.sites[1]) {
                    return Err(Error::Circuit(format!(
                        "layer {li}, gate {gi}: sites {:?} are not coupled in the graph",
                        g.sites
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_gates(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flatten()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CircuitFile = serde_json::from_str(text)?;
        let convert = |specs: Vec<GateSpec>, where_: &dyn Fn(usize) -> String| -> Result<Vec<Gate>> {
            specs
                .iter()
                .enumerate()
                .map(|(i, s)| Gate::from_spec(s).map_err(|e| Error::Circuit(format!("{}: {e}", where_(i)))))
                .collect()
        };
        match (raw.layers, raw.gates) {
            (Some(_), Some(_)) => Err(Error::Circuit("give either \"layers\" or \"gates\", not both".into())),
            (Some(layers), None) => {
                let layers = layers
                    .into_iter()
                    .enumerate()
                    .map(|(li, l)| convert(l, &|gi| format!("layer {li}, gate {gi}")))
                    .collect::<Result<Vec<_>>>()?;
                Circuit::new(raw.n, layers)
            }
            (None, Some(gates)) => Circuit::from_gates(raw.n, convert(gates, &|gi| format!("gate {gi}"))?),
            (None, None) => Circuit::new(raw.n, Vec::new()),
        }
    }

    pub fn to_json(&self) -> String {
        let file = CircuitFile {
            n: self.n,
            layers: Some(self.layers.iter().map(|l| l.iter().map(Gate::to_spec).collect()).collect()),
            gates: None,
        };
        serde_json::to_string(&file).expect("circuit serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Circuit::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn check_sites(g: &Gate, n: usize) -> Result<()> {
    if let Some(&s) = g.sites.iter().find(|&&s| s >= n) {
        return Err(Error::Circuit(format!("site {s} out of range for {n} qubits")));
    }
    Ok(())
}

/// Partition the edges into matchings.
///
/// Bipartite graphs get exactly `z` colours (maximum degree) via alternating
/// path recolouring; other graphs fall back to a greedy colouring.
pub fn edge_coloring(graph: &NetworkGraph) -> Vec<Vec<(usize, usize)>> {
    let n = graph.num_vertices();
    let z = graph.coordination_number();
    let bipartite = graph.bipartition().is_some();
    // colour_at[v][c] = neighbour joined to v by an edge of colour c
    let mut colour_at: Vec<Vec<Option<usize>>> = vec![vec![None; if bipartite { z } else { 2 * z }]; n];
    let free = |ca: &Vec<Option<usize>>| ca.iter().position(|x| x.is_none()).expect("a free colour exists");
    for &(u, v) in graph.edges() {
        if !bipartite {
            let c = (0..colour_at[u].len())
                .find(|&c| colour_at[u][c].is_none() && colour_at[v][c].is_none())
                .expect("2z - 1 colours suffice greedily");
            colour_at[u][c] = Some(v);
            colour_at[v][c] = Some(u);
            continue;
        }
        let a = free(&colour_at[u]);
        let b = free(&colour_at[v]);
        if colour_at[v][a].is_some() {
            // flip the a/b alternating path starting at v; it cannot reach u
            let mut path = vec![v];
            let mut cur = v;
            let mut c = a;
            while let Some(next) = colour_at[cur][c] {
                path.push(next);
                cur = next;
                c = if c == a { b } else { a };
            }
            let mut c = a;
            let mut pairs = Vec::new();
            for w in path.windows(2) {
                pairs.push((w[0], w[1], c));
                c = if c == a { b } else { a };
            }
            for &(x, y, c) in &pairs {
                colour_at[x][c] = None;
                colour_at[y][c] = None;
            }
            for &(x, y, c) in &pairs {
                let swapped = if c == a { b } else { a };
                colour_at[x][swapped] = Some(y);
                colour_at[y][swapped] = Some(x);
            }
        }
        colour_at[u][a] = Some(v);
        colour_at[v][a] = Some(u);
    }
    let k = colour_at.first().map_or(0, |c| c.len());
    let mut groups = vec![Vec::new(); k];
    for (v, row) in colour_at.iter().enumerate() {
        for (c, w) in row.iter().enumerate() {
            if let Some(w) = *w {
                if v < w {
                    groups[c].push((v, w));
                }
            }
        }
    }
    groups.retain(|g| !g.is_empty());
    for g in &mut groups {
        g.sort_unstable();
    }
    groups
}

/// First-order Trotter circuit for `H = J Σ (XX + YY + ZZ)`: each of the `L`
/// steps applies `exp(-i J δt (XX+YY+ZZ))` on every edge, one layer per
/// colour group of [`edge_coloring`].
pub fn heisenberg_trotter_circuit(graph: &NetworkGraph, j: f64, dt: f64, steps: usize) -> Result<Circuit> {
    let groups = edge_coloring(graph);
    let mut layers = Vec::with_capacity(steps * groups.len());
    for _ in 0..steps {
        for group in &groups {
            let layer = group
                .iter()
                .map(|&(u, v)| Gate::new(GateKind::Heisenberg, vec![u, v], vec![j * dt]))
                .collect::<Result<Vec<_>>>()?;
            layers.push(layer);
        }
    }
    Circuit::new(graph.num_vertices(), layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_coloring(g: &NetworkGraph, expected: usize) {
        let groups = edge_coloring(g);
        assert_eq!(groups.len(), expected);
        let mut all: Vec<(usize, usize)> = groups.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, g.edges());
        for group in &groups {
            let mut seen = vec![false; g.num_vertices()];
            for &(u, v) in group {
                assert!(!seen[u] && !seen[v]);
                seen[u] = true;
                seen[v] = true;
            }
        }
    }

    #[test]
    fn coloring_uses_coordination_number() {
        check_coloring(&NetworkGraph::chain(6).unwrap(), 2);
        check_coloring(&NetworkGraph::heavy_hex(2, 2).unwrap(), 3);
        check_coloring(&NetworkGraph::heavy_hex_164(), 3);
        check_coloring(&NetworkGraph::rotated_square(4, 5).unwrap(), 4);
        check_coloring(&NetworkGraph::willow_105(), 4);
        check_coloring(&NetworkGraph::grid(3, 4).unwrap(), 4);
    }

    #[test]
    fn non_bipartite_coloring_is_proper() {
        let g = NetworkGraph::new(3, vec![(0, 1), (1, 2), (0, 2)], None).unwrap();
        let groups = edge_coloring(&g);
        assert_eq!(groups.len(), 3);
    }

    #[test]
    fn trotter_circuit_layout() {
        let g = NetworkGraph::grid(2, 3).unwrap();
        let c = heisenberg_trotter_circuit(&g, 1.0, 0.1, 3).unwrap();
        assert_eq!(c.layers.len(), 3 * edge_coloring(&g).len());
        assert_eq!(c.num_gates(), 3 * g.edges().len());
        c.validate_for(&g).unwrap();
    }

    #[test]
    fn json_loading() {
        let c = Circuit::from_json(r#"{"n": 2, "gates": []}"#).unwrap();
        assert_eq!(c.num_gates(), 0);
        let c = Circuit::from_json(
            r#"{"n": 2, "layers": [[{"kind": "CP", "sites": [0, 1], "params": [1.5707963267948966]}]]}"#,
        )
        .unwrap();
        assert_eq!(c.layers.len(), 1);
        assert_eq!(c.num_gates(), 1);
        let err = Circuit::from_json(r#"{"n": 2, "layers": [[{"kind": "CP", "sites": [0, 3], "params": [1]}]]}"#);
        assert!(matches!(err, Err(Error::Circuit(msg)) if msg.contains("layer 0, gate 0")));
        let err = Circuit::from_json(r#"{"n": 1, "gates": [{"kind": "matrix", "sites": [0], "matrix": [[1,0],[1,0],[0,0],[1,0]]}]}"#);
        assert!(err.is_err());
    }

    #[test]
    fn auto_grouping_preserves_order() {
        let h = |s| Gate::new(GateKind::H, vec![s], vec![]).unwrap();
        let cz = |a, b| Gate::new(GateKind::Cz, vec![a, b], vec![]).unwrap();
        let c = Circuit::from_gates(3, vec![h(0), h(2), cz(0, 1), h(1), cz(1, 2)]).unwrap();
        assert_eq!(c.layers.len(), 4);
        assert_eq!(c.layers[0].len(), 2);
        assert_eq!(c.layers[1][0].kind, GateKind::Cz);
        assert!(Circuit::new(2, vec![vec![h(0), h(0)]]).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let g = NetworkGraph::heavy_hex(1, 1).unwrap();
        let c = heisenberg_trotter_circuit(&g, 1.0, 0.1, 2).unwrap();
        assert_eq!(Circuit::from_json(&c.to_json()).unwrap(), c);
    }
}
