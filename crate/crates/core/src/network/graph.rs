use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::planar;
use crate::error::{Error, Result};

/// Undirected planar qubit connectivity graph.
///
/// Edges are stored as `(u, v)` with `u < v`, sorted. Builders number
/// vertices row-major over their drawing: by increasing `y`, then `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<[f64; 2]>>,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
}

/// One primitive loop: a cyclic vertex sequence and its edges.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Loop {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeKind {
    Chain,
    Grid,
    RotatedSquare,
    HeavyHex,
    Custom,
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "chain" => LatticeKind::Chain,
            "grid" | "square" => LatticeKind::Grid,
            "rotated-square" => LatticeKind::RotatedSquare,
            "heavy-hex" => LatticeKind::HeavyHex,
            "custom" | "custom-adjacency" => LatticeKind::Custom,
            other => return Err(Error::Config(format!("unknown lattice kind {other}"))),
        })
    }
}

pub(crate) fn norm_edge(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl NetworkGraph {
    /// Validate and build. The graph must be simple, connected and planar.
    pub fn new(n: usize, edges: Vec<(usize, usize)>, coords: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("graph has no vertices".into()));
        }
        let mut es: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Graph(format!("edge ({u},{v}) out of range for {n} vertices")));
            }
            if u == v {
                return Err(Error::Graph(format!("self-loop at {u}")));
            }
            es.push(norm_edge(u, v));
        }
        es.sort_unstable();
        if es.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Graph("duplicate edge".into()));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::Graph(format!("{} coordinates for {n} vertices", c.len())));
            }
        }
        let mut g = NetworkGraph { n, edges: es, coords, adjacency: Vec::new() };
        g.rebuild_adjacency();
        if !g.is_connected() {
            return Err(Error::Graph("graph is not connected".into()));
        }
        if let Some(cert) = planar::kuratowski_certificate(n, &g.edges) {
            return Err(Error::NonPlanar { certificate: cert });
        }
        Ok(g)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        self.adjacency = adj;
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: NetworkGraph = serde_json::from_str(text)?;
        NetworkGraph::new(raw.n, raw.edges, raw.coords)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        NetworkGraph::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Coordination number: the maximum degree.
    pub fn coordination_number(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n
    }

    /// Two-colouring of the vertices, if one exists.
    pub fn bipartition(&self) -> Option<Vec<u8>> {
        let mut side = vec![u8::MAX; self.n];
        side[0] = 0;
        let mut queue = VecDeque::from([0]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if side[w] == u8::MAX {
                    side[w] = 1 - side[v];
                    queue.push_back(w);
                } else if side[w] == side[v] {
                    return None;
                }
            }
        }
        Some(side)
    }

    /// Interior faces of the planar embedding (the primitive loops of the
    /// lattices built here). A tree has none.
    pub fn primitive_loops(&self) -> Vec<Loop> {
        let faces = planar::interior_faces(self.n, &self.edges, self.coords())
            .expect("graph was validated as planar");
        let mut loops: Vec<Loop> = faces
            .into_iter()
            .map(|vertices| {
                let k = vertices.len();
                let mut edges: Vec<(usize, usize)> =
                    (0..k).map(|i| norm_edge(vertices[i], vertices[(i + 1) % k])).collect();
                edges.sort_unstable();
                Loop { vertices, edges }
            })
            .collect();
        loops.sort_by(|a, b| a.edges.cmp(&b.edges));
        loops
    }

    pub fn chain(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("chain length must be positive".into()));
        }
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        let coords = (0..n).map(|i| [i as f64, 0.0]).collect();
        NetworkGraph::new(n, edges, Some(coords))
    }

    /// Square grid with `rows` rows and `cols` columns, drawn axis-aligned.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        let points = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
        square_lattice(points, |r, c| [c as f64, r as f64])
    }

    /// Square grid of `rows`x`cols` qubits drawn rotated by 45 degrees, as on
    /// processors whose couplers run diagonally. Columns of the drawing are
    /// diagonals of the underlying grid.
    pub fn rotated_square(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        let points = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
        square_lattice(points, |r, c| [c as f64 - r as f64, c as f64 + r as f64])
    }

    /// Heavy-hex lattice with `cell_rows`x`cell_cols` primitive loops of
    /// twelve qubits each, in a brick arrangement.
    ///
    /// Horizontal qubit chains sit at even `y`; bridge qubits at odd `y`
    /// connect consecutive chains every fourth column, offset by two columns
    /// on alternating rows.
    pub fn heavy_hex(cell_rows: usize, cell_cols: usize) -> Result<Self> {
        if cell_rows == 0 || cell_cols == 0 {
            return Err(Error::Config("heavy-hex cell counts must be positive".into()));
        }
        let offset = |r: usize| if r % 2 == 0 { 0 } else { 2 };
        let mut points: Vec<(i64, i64)> = Vec::new();
        for chain in 0..=cell_rows {
            let rows_touching: Vec<usize> =
                [chain.checked_sub(1), (chain < cell_rows).then_some(chain)].into_iter().flatten().collect();
            let lo = rows_touching.iter().map(|&r| offset(r)).min().unwrap();
            let hi = rows_touching.iter().map(|&r| offset(r) + 4 * cell_cols).max().unwrap();
            for x in lo..=hi {
                points.push((x as i64, 2 * chain as i64));
            }
        }
        for r in 0..cell_rows {
            for c in 0..=cell_cols {
                points.push(((4 * c + offset(r)) as i64, 2 * r as i64 + 1));
            }
        }
        lattice_from_points(points, |a, b| (a.0 - b.0).abs() + (a.1 - b.1).abs() == 1)
    }

    /// 164-qubit heavy-hex cutout with 5x5 primitive loops.
    pub fn heavy_hex_164() -> Self {
        NetworkGraph::heavy_hex(5, 5).expect("valid lattice")
    }

    /// 105-qubit rotated square layout: qubits at `(x, y)` with `x + y` even,
    /// `0 <= x <= 14`, `0 <= y <= 13`, coupled diagonally.
    pub fn willow_105() -> Self {
        let mut points = Vec::new();
        for y in 0..14i64 {
            for x in 0..15i64 {
                if (x + y) % 2 == 0 {
                    points.push((x, y));
                }
            }
        }
        lattice_from_points(points, |a, b| (a.0 - b.0).abs() == 1 && (a.1 - b.1).abs() == 1)
            .expect("valid lattice")
    }

    /// Two parallel qubit registers of `len` qubits joined by rungs at the
    /// given positions, as in heavy-hex sublattices used for pair-register
    /// circuits.
    pub fn ladder(len: usize, rungs: &[usize]) -> Result<Self> {
        let mut points = Vec::new();
        for y in 0..2i64 {
            for x in 0..len as i64 {
                points.push((x, y));
            }
        }
        let rung_set: Vec<i64> = rungs.iter().map(|&r| r as i64).collect();
        lattice_from_points(points, |a, b| {
            (a.1 == b.1 && (a.0 - b.0).abs() == 1) || (a.0 == b.0 && a.1 != b.1 && rung_set.contains(&a.0))
        })
    }

    /// 52-qubit two-register sublattice with six primitive loops.
    pub fn n2_52() -> Self {
        NetworkGraph::ladder(26, &[0, 4, 8, 12, 16, 20, 24]).expect("valid lattice")
    }

    /// 72-qubit two-register sublattice with four primitive loops.
    pub fn fe4s4_72() -> Self {
        NetworkGraph::ladder(36, &[0, 8, 16, 24, 32]).expect("valid lattice")
    }

    /// Look up one of the bundled layouts by file name.
    pub fn bundled(name: &str) -> Option<Self> {
        let text = match name.trim_end_matches(".json") {
            "heavyhex_164" => include_str!("../../data/heavyhex_164.json"),
            "willow_105" => include_str!("../../data/willow_105.json"),
            "n2_52" => include_str!("../../data/n2_52.json"),
            "fe4s4_72" => include_str!("../../data/fe4s4_72.json"),
            _ => return None,
        };
        Some(NetworkGraph::from_json(text).expect("bundled graph is valid"))
    }

    /// Split the vertices into a 0-half and a 1-half along the drawing's `x`
    /// axis (ties broken by `y`, then vertex id).
    pub fn domain_wall_bits(&self) -> Vec<u8> {
        let mut order: Vec<usize> = (0..self.n).collect();
        if let Some(c) = &self.coords {
            order.sort_by(|&a, &b| {
                c[a][0].total_cmp(&c[b][0]).then(c[a][1].total_cmp(&c[b][1])).then(a.cmp(&b))
            });
        }
        let mut bits = vec![0u8; self.n];
        for &v in &order[self.n / 2..] {
            bits[v] = 1;
        }
        bits
    }
}

fn square_lattice(points: Vec<(usize, usize)>, draw: impl Fn(usize, usize) -> [f64; 2]) -> Result<NetworkGraph> {
    let mut verts: Vec<((usize, usize), [f64; 2])> = points.into_iter().map(|(r, c)| ((r, c), draw(r, c))).collect();
    verts.sort_by(|a, b| a.1[1].total_cmp(&b.1[1]).then(a.1[0].total_cmp(&b.1[0])));
    let mut edges = Vec::new();
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            let (a, b) = (verts[i].0, verts[j].0);
            if a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1 {
                edges.push((i, j));
            }
        }
    }
    let coords = verts.iter().map(|v| v.1).collect();
    NetworkGraph::new(verts.len(), edges, Some(coords))
}

fn lattice_from_points(
    mut points: Vec<(i64, i64)>,
    adjacent: impl Fn((i64, i64), (i64, i64)) -> bool,
) -> Result<NetworkGraph> {
    points.sort_by_key(|&(x, y)| (y, x));
    points.dedup();
    let mut edges = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if adjacent(points[i], points[j]) {
                edges.push((i, j));
            }
        }
    }
    let coords = points.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
    NetworkGraph::new(points.len(), edges, Some(coords))
}
