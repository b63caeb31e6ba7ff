use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{NetworkGraph, TensorNetworkState};

/// How vertices are grouped into a line of partitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Equal `x`, ordered by `y`; partitions run left to right.
    Columns,
    /// Equal `y`, ordered by `x`; partitions run top to bottom.
    Rows,
    /// Equal `x + y`, ordered by `x - y`.
    Diagonal,
    /// Caller-supplied groups.
    Custom,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "columns" | "column" => Ok(Strategy::Columns),
            "rows" | "row" => Ok(Strategy::Rows),
            "diagonal" | "diagonals" => Ok(Strategy::Diagonal),
            "custom" => Ok(Strategy::Custom),
            _ => Err(Error::Config(format!("unknown partition strategy {s:?}"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strategy::Columns => "columns",
            Strategy::Rows => "rows",
            Strategy::Diagonal => "diagonal",
            Strategy::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// An ordered line of vertex groups.
///
/// Edges only join vertices of the same group or of consecutive groups, and
/// inside a group only consecutive members (in the stored order) may be
/// adjacent, so each group reads as an MPO and the boundary between groups
/// as an MPS.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partitioning {
    groups: Vec<Vec<usize>>,
    strategy: Strategy,
    #[serde(skip)]
    group_of: Vec<usize>,
    #[serde(skip)]
    position: Vec<usize>,
}

// Coordinates closer than this are treated as equal when grouping.
const COORD_EPS: f64 = 1e-6;

impl Partitioning {
    /// Group the vertices of `graph` by its drawing coordinates.
    pub fn new(graph: &NetworkGraph, strategy: Strategy) -> Result<Self> {
        let coords = graph
            .coords()
            .ok_or_else(|| Error::Partition(format!("{strategy} partitioning needs vertex coordinates")))?;
        let key = |v: usize| -> (f64, f64) {
            let [x, y] = coords[v];
            match strategy {
                Strategy::Columns => (x, y),
                Strategy::Rows => (y, x),
                Strategy::Diagonal => (x + y, x - y),
                Strategy::Custom => unreachable!("custom groups are supplied by the caller"),
            }
        };
        if strategy == Strategy::Custom {
            return Err(Error::Partition("custom partitioning needs explicit groups".into()));
        }
        let mut order: Vec<usize> = (0..graph.num_vertices()).collect();
        order.sort_by(|&a, &b| {
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(a.cmp(&b))
        });
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for v in order {
            let k = key(v).0;
            if groups.is_empty() || k - last > COORD_EPS {
                groups.push(Vec::new());
                last = k;
            }
            groups.last_mut().expect("just pushed").push(v);
        }
        Self::build(graph, groups, strategy)
    }

    /// Use caller-supplied groups, each listed in MPS site order.
    pub fn custom(graph: &NetworkGraph, groups: Vec<Vec<usize>>) -> Result<Self> {
        Self::build(graph, groups, Strategy::Custom)
    }

    fn build(graph: &NetworkGraph, groups: Vec<Vec<usize>>, strategy: Strategy) -> Result<Self> {
        let n = graph.num_vertices();
        let mut group_of = vec![usize::MAX; n];
        let mut position = vec![usize::MAX; n];
        for (b, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::Partition(format!("group {b} is empty")));
            }
            for (k, &v) in g.iter().enumerate() {
                if v >= n {
                    return Err(Error::Partition(format!("vertex {v} out of range")));
                }
                if group_of[v] != usize::MAX {
                    return Err(Error::Partition(format!("vertex {v} appears in two groups")));
                }
                group_of[v] = b;
                position[v] = k;
            }
        }
        if let Some(v) = group_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::Partition(format!("vertex {v} is not in any group")));
        }
        let p = Partitioning { groups, strategy, group_of, position };
        p.check_graph(graph)?;
        Ok(p)
    }

    /// Check that every edge of `graph` respects the line structure.
    pub fn check_graph(&self, graph: &NetworkGraph) -> Result<()> {
        if graph.num_vertices() != self.group_of.len() {
            return Err(Error::Partition(format!(
                "partitioning covers {} vertices but the graph has {}",
                self.group_of.len(),
                graph.num_vertices()
            )));
        }
        for &(u, v) in graph.edges() {
            let (bu, bv) = (self.group_of[u], self.group_of[v]);
            if bu.abs_diff(bv) > 1 {
                return Err(Error::Partition(format!(
                    "edge {u}-{v} joins groups {bu} and {bv}; the groups do not form a line"
                )));
            }
            if bu == bv && self.position[u].abs_diff(self.position[v]) != 1 {
                return Err(Error::Partition(format!(
                    "edge {u}-{v} joins non-consecutive members of group {bu}; the group is not a path"
                )));
            }
        }
        Ok(())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, b: usize) -> &[usize] {
        &self.groups[b]
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Group containing `v`.
    pub fn group_of(&self, v: usize) -> usize {
        self.group_of[v]
    }

    /// Position of `v` inside its group.
    pub fn position_of(&self, v: usize) -> usize {
        self.position[v]
    }

    /// Group sizes, for reporting.
    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Number of edges between each pair of consecutive groups.
    pub fn cut_sizes(&self, graph: &NetworkGraph) -> Vec<usize> {
        let mut cuts: BTreeMap<usize, usize> = (0..self.len().saturating_sub(1)).map(|b| (b, 0)).collect();
        for &(u, v) in graph.edges() {
            let (bu, bv) = (self.group_of[u], self.group_of[v]);
            if bu != bv {
                *cuts.entry(bu.min(bv)).or_default() += 1;
            }
        }
        cuts.into_values().collect()
    }
}

/// Partition the network of `state` into a line of groups.
pub fn partition_line(state: &TensorNetworkState, strategy: Strategy) -> Result<Partitioning> {
    Partitioning::new(state.graph(), strategy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_columns_are_single_vertices() {
        let g = NetworkGraph::chain(5).unwrap();
        let p = Partitioning::new(&g, Strategy::Columns).unwrap();
        assert_eq!(p.groups(), &[vec![0], vec![1], vec![2], vec![3], vec![4]]);
    }

    #[test]
    fn grid_columns_and_rows() {
        let g = NetworkGraph::grid(3, 3).unwrap();
        let p = Partitioning::new(&g, Strategy::Columns).unwrap();
        assert_eq!(p.sizes(), vec![3, 3, 3]);
        assert_eq!(p.group(0), &[0, 3, 6]);
        let r = Partitioning::new(&g, Strategy::Rows).unwrap();
        assert_eq!(r.group(1), &[3, 4, 5]);
        let d = Partitioning::new(&g, Strategy::Diagonal).unwrap();
        assert_eq!(d.sizes(), vec![1, 2, 3, 2, 1]);
    }

    #[test]
    fn all_lattices_partition_into_lines() {
        let graphs = [
            NetworkGraph::heavy_hex(2, 2).unwrap(),
            NetworkGraph::heavy_hex_164(),
            NetworkGraph::willow_105(),
            NetworkGraph::rotated_square(3, 4).unwrap(),
            NetworkGraph::n2_52(),
        ];
        for g in &graphs {
            for s in [Strategy::Columns, Strategy::Rows, Strategy::Diagonal] {
                let p = Partitioning::new(g, s);
                if s == Strategy::Columns || g.num_vertices() == 105 {
                    assert!(p.is_ok(), "{s} on {} vertices: {p:?}", g.num_vertices());
                }
            }
        }
    }

    #[test]
    fn non_line_groupings_are_rejected() {
        let g = NetworkGraph::grid(2, 2).unwrap();
        // Edge 0-1 would skip the middle group.
        assert!(matches!(
            Partitioning::custom(&g, vec![vec![0], vec![3], vec![1, 2]]),
            Err(Error::Partition(_))
        ));
        assert!(Partitioning::custom(&g, vec![vec![0, 1], vec![2]]).is_err());
        assert!(Partitioning::custom(&g, vec![vec![0, 1], vec![2, 3], vec![]]).is_err());
        assert!(Partitioning::custom(&g, vec![vec![0, 3], vec![1, 2]]).is_ok());
        // A single group holding the whole square is a cycle, not a path.
        assert!(Partitioning::custom(&g, vec![vec![0, 1, 3, 2]]).is_err());
    }
}
