use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use rand::Rng;

use super::graph::norm_edge;
use super::NetworkGraph;
use crate::error::{Error, Result};
use crate::tensor::{contract, contract_all, Index, Label, Tensor};

const MAGIC: &[u8; 4] = b"PTNS";
const FORMAT_VERSION: u32 = 1;

/// Physical index of qubit `v`.
pub fn phys_label(v: usize) -> Label {
    Label::new(format!("p{v}"))
}

/// Virtual index shared by the two tensors of edge `(u, v)`.
pub fn edge_label(u: usize, v: usize) -> Label {
    let (a, b) = norm_edge(u, v);
    Label::new(format!("e{a}-{b}"))
}

/// A computational basis state. Character `i` of the string form is qubit `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring(Vec<u8>);

impl Bitstring {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Config("bits must be 0 or 1".into()));
        }
        Ok(Bitstring(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Bitstring(vec![0; n])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of Z eigenvalues, +1 for a 0 bit and -1 for a 1 bit.
    pub fn magnetization(&self) -> i64 {
        self.0.iter().map(|&b| 1 - 2 * b as i64).sum()
    }

    /// Index into a dense state vector where qubit 0 is the most significant bit.
    pub fn dense_index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn from_dense_index(index: usize, n: usize) -> Self {
        Bitstring((0..n).map(|i| ((index >> (n - 1 - i)) & 1) as u8).collect())
    }
}

impl std::str::FromStr for Bitstring {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::Config(format!("invalid bit character {c:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Bitstring)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// One tensor per qubit on the edges of a planar graph.
///
/// The tensor of vertex `v` carries the physical index [`phys_label`]`(v)`
/// (dimension 2) and one virtual index [`edge_label`] per incident edge.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorNetworkState {
    graph: NetworkGraph,
    tensors: Vec<Tensor>,
}

impl TensorNetworkState {
    /// Assemble a state from explicit site tensors, checking index structure.
    pub fn from_tensors(graph: NetworkGraph, tensors: Vec<Tensor>) -> Result<Self> {
        let s = TensorNetworkState { graph, tensors };
        s.validate()?;
        Ok(s)
    }

    pub fn product_state(graph: &NetworkGraph, bits: &Bitstring) -> Result<Self> {
        if bits.len() != graph.num_vertices() {
            return Err(Error::Config(format!(
                "{} bits for {} qubits",
                bits.len(),
                graph.num_vertices()
            )));
        }
        let tensors = (0..graph.num_vertices())
            .map(|v| {
                let mut indices = vec![Index::new(phys_label(v), 2)];
                indices.extend(graph.neighbors(v).iter().map(|&w| Index::new(edge_label(v, w), 1)));
                let mut data = vec![C64::new(0.0, 0.0); 2];
                data[bits.bits()[v] as usize] = C64::new(1.0, 0.0);
                Tensor::new(indices, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TensorNetworkState { graph: graph.clone(), tensors })
    }

    /// Random site tensors with every bond of dimension `chi`, rescaled so each
    /// tensor has unit Frobenius norm.
    pub fn random(graph: &NetworkGraph, chi: usize, rng: &mut impl Rng) -> Result<Self> {
        let tensors = (0..graph.num_vertices())
            .map(|v| {
                let mut indices = vec![Index::new(phys_label(v), 2)];
                indices.extend(graph.neighbors(v).iter().map(|&w| Index::new(edge_label(v, w), chi)));
                let mut t = Tensor::from_fn(indices, |_| {
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })?;
                t.normalize();
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TensorNetworkState { graph: graph.clone(), tensors })
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn num_qubits(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn tensor(&self, v: usize) -> &Tensor {
        &self.tensors[v]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    /// Replace a site tensor. The caller keeps the edge structure consistent;
    /// [`TensorNetworkState::validate`] checks it.
    pub fn set_tensor(&mut self, v: usize, t: Tensor) {
        self.tensors[v] = t;
    }

    pub fn bond_dim(&self, u: usize, v: usize) -> Option<usize> {
        self.tensors.get(u)?.dim_of(&edge_label(u, v))
    }

    pub fn max_bond_dim(&self) -> usize {
        self.graph.edges().iter().map(|&(u, v)| self.bond_dim(u, v).unwrap_or(1)).max().unwrap_or(1)
    }

    /// Check that each tensor has exactly the expected indices and that the
    /// two ends of every edge agree on its dimension.
    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_vertices();
        if self.tensors.len() != n {
            return Err(Error::Structural(format!("{} tensors for {n} qubits", self.tensors.len())));
        }
        for v in 0..n {
            let t = &self.tensors[v];
            if t.dim_of(&phys_label(v)) != Some(2) {
                return Err(Error::Structural(format!("site {v} lacks a dimension-2 physical index")));
            }
            if t.rank() != 1 + self.graph.degree(v) {
                return Err(Error::Structural(format!("site {v} has unexpected rank {}", t.rank())));
            }
            for &w in self.graph.neighbors(v) {
                let l = edge_label(v, w);
                let d = t
                    .dim_of(&l)
                    .ok_or_else(|| Error::Structural(format!("site {v} lacks index {l}")))?;
                if self.tensors[w].dim_of(&l) != Some(d) {
                    return Err(Error::Structural(format!("bond {l} has mismatched dimensions")));
                }
            }
        }
        Ok(())
    }

    /// Bytes held by the site tensors: 16 per complex entry.
    pub fn memory_footprint(&self) -> usize {
        self.tensors.iter().map(|t| 16 * t.len()).sum()
    }

    /// Multiply the whole state by `factor` (applied to one site tensor).
    pub fn scale(&mut self, factor: C64) {
        self.tensors[0].scale(factor);
    }

    /// Rescale so that `⟨ψ|ψ⟩ = 1` given its current value.
    pub fn normalize_with(&mut self, norm_sqr: f64) -> Result<()> {
        if !(norm_sqr > 0.0 && norm_sqr.is_finite()) {
            return Err(Error::Numerical(format!("cannot normalize by norm {norm_sqr}")));
        }
        self.scale(C64::new(1.0 / norm_sqr.sqrt(), 0.0));
        Ok(())
    }

    /// Dense state vector, qubit 0 most significant. Cost is exponential in
    /// the number of qubits.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        if self.num_qubits() > 26 {
            return Err(Error::Config("dense conversion limited to 26 qubits".into()));
        }
        let full = contract_all(&self.tensors)?;
        let order: Vec<Label> = (0..self.num_qubits()).map(phys_label).collect();
        Ok(full.permute(&order)?.into_data())
    }

    /// `⟨x|ψ⟩` by exact contraction of the projected network.
    pub fn amplitude_exact(&self, x: &Bitstring) -> Result<C64> {
        let fixed = self
            .tensors
            .iter()
            .enumerate()
            .map(|(v, t)| t.fix(&phys_label(v), x.bits()[v] as usize))
            .collect::<Result<Vec<_>>>()?;
        contract_all(&fixed)?.scalar_value()
    }

    /// `⟨ψ|ψ⟩` by exact contraction: through the dense vector for small
    /// registers (the ket network alone has bonds χ instead of χ²), through
    /// the norm network otherwise.
    pub fn norm_sqr_exact(&self) -> Result<f64> {
        let n = self.num_qubits() as u32;
        let d = self.max_bond_dim().max(1) as f64;
        if n <= 16 || (n <= 26 && 2f64.powi(n as i32) <= d.powi(4)) {
            return Ok(self.to_dense()?.iter().map(|a| a.norm_sqr()).sum());
        }
        let layers: Vec<Tensor> = (0..self.num_qubits()).map(|v| self.norm_site(v)).collect::<Result<_>>()?;
        Ok(contract_all(&layers)?.scalar_value()?.re)
    }

    /// Site tensor of the norm network: `ψ_v` contracted with its conjugate
    /// over the physical index, bra virtual labels primed.
    pub fn norm_site(&self, v: usize) -> Result<Tensor> {
        let t = &self.tensors[v];
        let p = phys_label(v);
        let bra = t.conj().map_labels(|l| if *l == p { l.clone() } else { l.prime() });
        contract(t, &bra)
    }

    /// Write the self-describing binary container.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let graph = self.graph.to_json();
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(graph.len() as u64).to_le_bytes())?;
        w.write_all(graph.as_bytes())?;
        w.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.rank() as u32).to_le_bytes())?;
            for ix in t.indices() {
                let name = ix.label.as_str().as_bytes();
                w.write_all(&(name.len() as u32).to_le_bytes())?;
                w.write_all(name)?;
                w.write_all(&(ix.dim as u64).to_le_bytes())?;
            }
            for z in t.data() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a state file".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let glen = read_u64(r)? as usize;
        let mut gbytes = vec![0u8; glen];
        r.read_exact(&mut gbytes)?;
        let graph = NetworkGraph::from_json(
            std::str::from_utf8(&gbytes).map_err(|e| Error::Format(e.to_string()))?,
        )?;
        let count = read_u64(r)? as usize;
        if count != graph.num_vertices() {
            return Err(Error::Format(format!("{count} tensors for {} qubits", graph.num_vertices())));
        }
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let rank = read_u32(r)? as usize;
            let mut indices = Vec::with_capacity(rank);
            for _ in 0..rank {
                let len = read_u32(r)? as usize;
                let mut name = vec![0u8; len];
                r.read_exact(&mut name)?;
                let name = String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?;
                let dim = read_u64(r)? as usize;
                indices.push(Index::new(name.as_str(), dim));
            }
            let vol: usize = indices.iter().map(|i| i.dim).product();
            let mut data = Vec::with_capacity(vol);
            for _ in 0..vol {
                let re = read_f64(r)?;
                let im = read_f64(r)?;
                data.push(C64::new(re, im));
            }
            tensors.push(Tensor::new(indices, data)?);
        }
        TensorNetworkState::from_tensors(graph, tensors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        TensorNetworkState::read_from(&mut r)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
