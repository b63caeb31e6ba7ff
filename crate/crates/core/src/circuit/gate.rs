use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::phys_label;
use crate::tensor::{Index, Label, Tensor};

const UNITARITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    I,
    X,
    Y,
    Z,
    H,
    Rx,
    Ry,
    Rz,
    Phase,
    Cp,
    XxPlusYy,
    Heisenberg,
    Cnot,
    Cz,
    Swap,
    Matrix,
}

impl GateKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "i" | "id" => GateKind::I,
            "x" => GateKind::X,
            "y" => GateKind::Y,
            "z" => GateKind::Z,
            "h" => GateKind::H,
            "rx" => GateKind::Rx,
            "ry" => GateKind::Ry,
            "rz" => GateKind::Rz,
            "phase" | "p" => GateKind::Phase,
            "cp" | "cphase" => GateKind::Cp,
            "xx+yy" | "xx_plus_yy" => GateKind::XxPlusYy,
            "heisenberg" => GateKind::Heisenberg,
            "cnot" | "cx" => GateKind::Cnot,
            "cz" => GateKind::Cz,
            "swap" => GateKind::Swap,
            "matrix" => GateKind::Matrix,
            other => return Err(Error::Circuit(format!("unknown gate kind {other:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::I => "I",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::Rx => "Rx",
            GateKind::Ry => "Ry",
            GateKind::Rz => "Rz",
            GateKind::Phase => "phase",
            GateKind::Cp => "CP",
            GateKind::XxPlusYy => "XX+YY",
            GateKind::Heisenberg => "heisenberg",
            GateKind::Cnot => "CNOT",
            GateKind::Cz => "CZ",
            GateKind::Swap => "SWAP",
            GateKind::Matrix => "matrix",
        }
    }

    /// Number of qubits, or `None` for raw matrices (inferred from the matrix).
    fn arity(self) -> Option<usize> {
        match self {
            GateKind::I
            | GateKind::X
            | GateKind::Y
            | GateKind::Z
            | GateKind::H
            | GateKind::Rx
            | GateKind::Ry
            | GateKind::Rz
            | GateKind::Phase => Some(1),
            GateKind::Matrix => None,
            _ => Some(2),
        }
    }

    /// Accepted parameter counts.
    fn param_counts(self) -> &'static [usize] {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Phase | GateKind::Cp => &[1],
            GateKind::Heisenberg => &[1],
            GateKind::XxPlusYy => &[1, 2],
            _ => &[0],
        }
    }
}

/// A one- or two-qubit unitary on specific sites.
///
/// Matrices are row-major over the computational basis of the gate's sites.
/// For two-qubit gates the basis index is `b0 + 2·b1` where `b0` is the bit
/// of `sites[0]`; for CNOT `sites[0]` is the control.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub sites: Vec<usize>,
    pub params: Vec<f64>,
    matrix: Vec<C64>,
}

/// Wire format of a gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: String,
    pub sites: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn two_site(f: impl Fn(usize, usize) -> C64) -> Vec<C64> {
    (0..16).map(|k| f(k / 4, k % 4)).collect()
}

fn named_matrix(kind: GateKind, p: &[f64]) -> Vec<C64> {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    match kind {
        GateKind::I => vec![l, o, o, l],
        GateKind::X => vec![o, l, l, o],
        GateKind::Y => vec![o, c(0.0, -1.0), c(0.0, 1.0), o],
        GateKind::Z => vec![l, o, o, -l],
        GateKind::H => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            vec![h, h, h, -h]
        }
        GateKind::Rx => {
            let (s, co) = (p[0] / 2.0).sin_cos();
            vec![c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)]
        }
        GateKind::Ry => {
            let (s, co) = (p[0] / 2.0).sin_cos();
            vec![c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]
        }
        GateKind::Rz => {
            vec![C64::from_polar(1.0, -p[0] / 2.0), o, o, C64::from_polar(1.0, p[0] / 2.0)]
        }
        GateKind::Phase => vec![l, o, o, C64::from_polar(1.0, p[0])],
        GateKind::Cp => {
            two_site(|r, col| if r != col { o } else if r == 3 { C64::from_polar(1.0, p[0]) } else { l })
        }
        GateKind::Cz => two_site(|r, col| if r != col { o } else if r == 3 { -l } else { l }),
        GateKind::Cnot => {
            // control is bit 0, target bit 1: flips bit 1 when bit 0 is set
            let image = |k: usize| if k & 1 == 1 { k ^ 2 } else { k };
            two_site(|r, col| if image(col) == r { l } else { o })
        }
        GateKind::Swap => {
            let image = |k: usize| ((k & 1) << 1) | (k >> 1);
            two_site(|r, col| if image(col) == r { l } else { o })
        }
        GateKind::XxPlusYy => {
            let beta = p.get(1).copied().unwrap_or(0.0);
            let (s, co) = (p[0] / 2.0).sin_cos();
            two_site(|r, col| match (r, col) {
                (0, 0) | (3, 3) => l,
                (1, 1) | (2, 2) => c(co, 0.0),
                (1, 2) => c(0.0, -s) * C64::from_polar(1.0, -beta),
                (2, 1) => c(0.0, -s) * C64::from_polar(1.0, beta),
                _ => o,
            })
        }
        GateKind::Heisenberg => {
            // exp(-iθ(XX+YY+ZZ)) = e^{iθ}(cos 2θ·I − i sin 2θ·SWAP)
            let theta = p[0];
            let phase = C64::from_polar(1.0, theta);
            let (s, co) = (2.0 * theta).sin_cos();
            let image = |k: usize| ((k & 1) << 1) | (k >> 1);
            two_site(|r, col| {
                let mut z = o;
                if r == col {
                    z += c(co, 0.0);
                }
                if image(col) == r {
                    z += c(0.0, -s);
                }
                phase * z
            })
        }
        GateKind::Matrix => unreachable!("raw matrices carry their own entries"),
    }
}

fn check_unitary(m: &[C64], d: usize) -> Result<()> {
    for i in 0..d {
        for j in 0..d {
            let mut acc = c(0.0, 0.0);
            for k in 0..d {
                acc += m[k * d + i].conj() * m[k * d + j];
            }
            let target = if i == j { 1.0 } else { 0.0 };
            if (acc - c(target, 0.0)).norm() > UNITARITY_TOL {
                return Err(Error::Circuit(format!(
                    "matrix is not unitary within {UNITARITY_TOL:e} (entry ({i},{j}) of U†U is {acc})"
                )));
            }
        }
    }
    Ok(())
}

impl Gate {
    pub fn new(kind: GateKind, sites: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if kind == GateKind::Matrix {
            return Err(Error::Circuit("raw matrix gates are built with Gate::from_matrix".into()));
        }
        if Some(sites.len()) != kind.arity() {
            return Err(Error::Circuit(format!(
                "{} acts on {} site(s), got {}",
                kind.name(),
                kind.arity().unwrap(),
                sites.len()
            )));
        }
        if !kind.param_counts().contains(&params.len()) {
            return Err(Error::Circuit(format!(
                "{} takes {:?} parameter(s), got {}",
                kind.name(),
                kind.param_counts(),
                params.len()
            )));
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::Circuit("non-finite gate parameter".into()));
        }
        if sites.len() == 2 && sites[0] == sites[1] {
            return Err(Error::Circuit("two-qubit gate on a repeated site".into()));
        }
        let matrix = named_matrix(kind, &params);
        Ok(Gate { kind, sites, params, matrix })
    }

    /// A gate given by an explicit unitary (2×2 or 4×4, row-major).
    pub fn from_matrix(sites: Vec<usize>, matrix: Vec<C64>) -> Result<Self> {
        let d = 1usize << sites.len();
        if sites.is_empty() || sites.len() > 2 || matrix.len() != d * d {
            return Err(Error::Circuit(format!(
                "raw matrix with {} entries does not fit {} site(s)",
                matrix.len(),
                sites.len()
            )));
        }
        if sites.len() == 2 && sites[0] == sites[1] {
            return Err(Error::Circuit("two-qubit gate on a repeated site".into()));
        }
        check_unitary(&matrix, d)?;
        Ok(Gate { kind: GateKind::Matrix, sites, params: Vec::new(), matrix })
    }

    pub fn from_spec(spec: &GateSpec) -> Result<Self> {
        let kind = GateKind::parse(&spec.kind)?;
        if kind == GateKind::Matrix {
            let m = spec
                .matrix
                .as_ref()
                .ok_or_else(|| Error::Circuit("matrix gate without \"matrix\" field".into()))?;
            Gate::from_matrix(spec.sites.clone(), m.iter().map(|z| c(z[0], z[1])).collect())
        } else {
            Gate::new(kind, spec.sites.clone(), spec.params.clone())
        }
    }

    pub fn to_spec(&self) -> GateSpec {
        GateSpec {
            kind: self.kind.name().to_string(),
            sites: self.sites.clone(),
            params: self.params.clone(),
            matrix: (self.kind == GateKind::Matrix).then(|| self.matrix.iter().map(|z| [z.re, z.im]).collect()),
        }
    }

    pub fn is_two_site(&self) -> bool {
        self.sites.len() == 2
    }

    pub fn matrix(&self) -> &[C64] {
        &self.matrix
    }

    /// The gate as a tensor with output indices `p{v}*` and input indices
    /// `p{v}` for each site, outputs first.
    pub fn tensor(&self) -> Tensor {
        let outs: Vec<Index> = self.sites.iter().map(|&v| Index::new(out_label(v), 2)).collect();
        let ins: Vec<Index> = self.sites.iter().map(|&v| Index::new(phys_label(v), 2)).collect();
        let k = self.sites.len();
        let d = 1usize << k;
        let mut indices = outs;
        indices.extend(ins);
        // tensor position (o0, o1, i0, i1) maps to matrix entry [o0 + 2 o1][i0 + 2 i1]
        Tensor::from_fn(indices, |pos| {
            let row: usize = (0..k).map(|j| pos[j] << j).sum();
            let col: usize = (0..k).map(|j| pos[k + j] << j).sum();
            self.matrix[row * d + col]
        })
        .expect("gate indices are well formed")
    }
}

pub(crate) fn out_label(v: usize) -> Label {
    phys_label(v).with_suffix("*")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
        let mut out = vec![c(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    out[i * d + j] += a[i * d + k] * b[k * d + j];
                }
            }
        }
        out
    }

    /// exp(-iθA) by Taylor series, as an independent check of closed forms.
    fn expm_minus_i(a: &[C64], theta: f64, d: usize) -> Vec<C64> {
        let mut term: Vec<C64> = (0..d * d).map(|k| if k / d == k % d { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect();
        let mut sum = term.clone();
        for n in 1..60 {
            term = matmul(&term, a, d).into_iter().map(|z| z * c(0.0, -theta) / n as f64).collect();
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
        }
        sum
    }

    fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
        // basis index b0 + 2 b1: a acts on bit 0, b on bit 1
        two_site(|r, col| a[(r & 1) * 2 + (col & 1)] * b[(r >> 1) * 2 + (col >> 1)])
    }

    fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn all_named_gates_are_unitary() {
        let kinds = [
            (GateKind::I, 1, 0),
            (GateKind::X, 1, 0),
            (GateKind::Y, 1, 0),
            (GateKind::Z, 1, 0),
            (GateKind::H, 1, 0),
            (GateKind::Rx, 1, 1),
            (GateKind::Ry, 1, 1),
            (GateKind::Rz, 1, 1),
            (GateKind::Phase, 1, 1),
            (GateKind::Cp, 2, 1),
            (GateKind::XxPlusYy, 2, 2),
            (GateKind::Heisenberg, 2, 1),
            (GateKind::Cnot, 2, 0),
            (GateKind::Cz, 2, 0),
            (GateKind::Swap, 2, 0),
        ];
        for (kind, n, np) in kinds {
            let g = Gate::new(kind, (0..n).collect(), vec![0.37; np]).unwrap();
            check_unitary(g.matrix(), 1 << n).unwrap();
        }
    }

    #[test]
    fn heisenberg_matches_matrix_exponential() {
        let x = named_matrix(GateKind::X, &[]);
        let y = named_matrix(GateKind::Y, &[]);
        let z = named_matrix(GateKind::Z, &[]);
        let h: Vec<C64> =
            (0..16).map(|k| kron(&x, &x)[k] + kron(&y, &y)[k] + kron(&z, &z)[k]).collect();
        for theta in [0.1, -0.3, 1.2] {
            let g = Gate::new(GateKind::Heisenberg, vec![0, 1], vec![theta]).unwrap();
            assert!(close(g.matrix(), &expm_minus_i(&h, theta, 4), 1e-12));
        }
    }

    #[test]
    fn rotations_match_matrix_exponential() {
        for (kind, pauli) in [(GateKind::Rx, GateKind::X), (GateKind::Ry, GateKind::Y), (GateKind::Rz, GateKind::Z)] {
            let p = named_matrix(pauli, &[]);
            let g = Gate::new(kind, vec![0], vec![0.8]).unwrap();
            assert!(close(g.matrix(), &expm_minus_i(&p, 0.4, 2), 1e-13));
        }
    }

    #[test]
    fn xx_plus_yy_matches_exponential() {
        let x = named_matrix(GateKind::X, &[]);
        let y = named_matrix(GateKind::Y, &[]);
        let h: Vec<C64> = (0..16).map(|k| (kron(&x, &x)[k] + kron(&y, &y)[k]) * 0.25).collect();
        let g = Gate::new(GateKind::XxPlusYy, vec![0, 1], vec![0.9]).unwrap();
        assert!(close(g.matrix(), &expm_minus_i(&h, 0.9, 4), 1e-12));
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        let g = Gate::new(GateKind::Cnot, vec![0, 1], vec![]).unwrap();
        let m = g.matrix();
        // |b0=1, b1=0> (index 1) maps to |1,1> (index 3)
        assert_eq!(m[3 * 4 + 1], c(1.0, 0.0));
        assert_eq!(m[0], c(1.0, 0.0));
        assert_eq!(m[2 * 4 + 2], c(1.0, 0.0));
    }

    #[test]
    fn rejects_bad_gates() {
        assert!(Gate::new(GateKind::Rz, vec![0], vec![]).is_err());
        assert!(Gate::new(GateKind::Cz, vec![0], vec![]).is_err());
        assert!(Gate::new(GateKind::Cz, vec![1, 1], vec![]).is_err());
        let not_unitary = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(Gate::from_matrix(vec![0], not_unitary).is_err());
        assert!(GateKind::parse("toffoli").is_err());
    }

    #[test]
    fn spec_round_trip() {
        let g = Gate::new(GateKind::XxPlusYy, vec![2, 5], vec![0.3, 0.1]).unwrap();
        assert_eq!(Gate::from_spec(&g.to_spec()).unwrap(), g);
        let m = Gate::from_matrix(vec![1], named_matrix(GateKind::H, &[])).unwrap();
        assert_eq!(Gate::from_spec(&m.to_spec()).unwrap(), m);
    }
}
