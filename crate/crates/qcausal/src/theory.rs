//! Concrete numerics for the two process theories: matrices over the
//! nonnegative reals (finite stochastic processes) and completely positive
//! maps on finite-dimensional operator algebras, behind one process type.
//!
//! Representation conventions, fixed for bit-exact reproducibility:
//!
//! - A classical process with output outcome count `m` and input outcome
//!   count `n` is an `m x n` matrix of nonnegative reals. Causal processes
//!   have columns summing to 1.
//! - A quantum process is a superoperator matrix acting on column-stacked
//!   density operators, stored *wire by wire*: each wire of Hilbert dimension
//!   `d` contributes one index factor of size `d^2` holding the pair
//!   `(column, row)` of the operator on that wire, column major. Multi-wire
//!   indices compose left to right with the leftmost wire most significant.
//! - Under these conventions sequential composition is matrix multiplication
//!   and parallel composition is the Kronecker product in both theories, and
//!   the representation dimension of a wire is `d` (classical) or `d^2`
//!   (quantum).
//!
//! Kraus operators are accepted at the boundary and converted on ingestion;
//! everything downstream is plain matrix algebra.

use ndarray::{linalg::kron, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tol;

/// Which concrete process theory a value lives in.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum TheoryTag {
    Classical,
    Quantum,
}

impl TheoryTag {
    pub fn name(self) -> &'static str {
        match self {
            TheoryTag::Classical => "classical",
            TheoryTag::Quantum => "quantum",
        }
    }
}

impl std::fmt::Display for TheoryTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A named system type with its concrete dimension (outcome count for the
/// classical theory, Hilbert-space dimension for the quantum one). The
/// monoidal unit is the empty wire list; a dimension-1 system behaves the
/// same way.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemType {
    name: String,
    dim: usize,
}

impl SystemType {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        assert!(dim >= 1, "system dimension must be at least 1");
        SystemType { name: name.into(), dim }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Size of the index this wire contributes to a representation matrix.
    pub fn rep_dim(&self, theory: TheoryTag) -> usize {
        match theory {
            TheoryTag::Classical => self.dim,
            TheoryTag::Quantum => self.dim * self.dim,
        }
    }
}

impl std::fmt::Display for SystemType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}[{}]", self.name, self.dim)
    }
}

pub(crate) fn dims_of(types: &[SystemType]) -> Vec<usize> {
    types.iter().map(|t| t.dim).collect()
}

/// Product of the per-wire representation dimensions.
pub fn rep_dim_of(theory: TheoryTag, types: &[SystemType]) -> usize {
    types.iter().map(|t| t.rep_dim(theory)).product()
}

fn hilbert_dim_of(types: &[SystemType]) -> usize {
    types.iter().map(|t| t.dim).product()
}

fn type_list(types: &[SystemType]) -> String {
    if types.is_empty() {
        "I".to_string()
    } else {
        types.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ⊗ ")
    }
}

/// Split a wire-by-wire representation index into the `(column, row)` pair of
/// the corresponding column-stacked global operator index.
fn split_perwire(idx: usize, dims: &[usize]) -> (usize, usize) {
    let mut suffix = vec![1usize; dims.len() + 1];
    for j in (0..dims.len()).rev() {
        suffix[j] = suffix[j + 1] * dims[j] * dims[j];
    }
    let mut rem = idx;
    let (mut c, mut r) = (0usize, 0usize);
    for (j, &d) in dims.iter().enumerate() {
        let sub = rem / suffix[j + 1];
        rem %= suffix[j + 1];
        c = c * d + sub / d;
        r = r * d + sub % d;
    }
    (c, r)
}

/// Inverse of [`split_perwire`].
fn join_perwire(c: usize, r: usize, dims: &[usize]) -> usize {
    let n = dims.len();
    let mut cdig = vec![0usize; n];
    let mut rdig = vec![0usize; n];
    let (mut cc, mut rr) = (c, r);
    for j in (0..n).rev() {
        cdig[j] = cc % dims[j];
        cc /= dims[j];
        rdig[j] = rr % dims[j];
        rr /= dims[j];
    }
    let mut idx = 0usize;
    for j in 0..n {
        idx = idx * dims[j] * dims[j] + (cdig[j] * dims[j] + rdig[j]);
    }
    idx
}

/// A concrete morphism in one of the two theories: a dense representation
/// matrix together with its typed port lists.
///
/// The container itself only guarantees shape consistency. Causality,
/// complete positivity and entrywise nonnegativity are checked by the
/// predicates below and enforced where models are built, so that
/// non-physical maps (projector effects, the transpose map, ...) can still
/// be represented and examined.
#[derive(Clone, Debug)]
pub struct ProcessValue {
    theory: TheoryTag,
    in_type: Vec<SystemType>,
    out_type: Vec<SystemType>,
    mat: Array2<Complex64>,
}

impl ProcessValue {
    /// Wraps a raw representation matrix. Only the shape is validated.
    pub fn from_rep_matrix(
        theory: TheoryTag,
        in_type: Vec<SystemType>,
        out_type: Vec<SystemType>,
        mat: Array2<Complex64>,
    ) -> Result<Self> {
        let rows = rep_dim_of(theory, &out_type);
        let cols = rep_dim_of(theory, &in_type);
        if mat.dim() != (rows, cols) {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "representation of {} -> {} must be {}x{}, got {}x{}",
                    type_list(&in_type),
                    type_list(&out_type),
                    rows,
                    cols,
                    mat.nrows(),
                    mat.ncols()
                ),
            });
        }
        Ok(ProcessValue { theory, in_type, out_type, mat })
    }

    /// A classical process from a real matrix; entries must be nonnegative.
    pub fn classical(
        in_type: Vec<SystemType>,
        out_type: Vec<SystemType>,
        data: Array2<f64>,
    ) -> Result<Self> {
        if let Some(v) = data.iter().find(|v| **v < -1e-12) {
            return Err(Error::InvalidBoxData {
                name: String::new(),
                reason: format!("classical matrix entry {v} is negative"),
            });
        }
        let mat = data.mapv(|v| Complex64::new(v, 0.0));
        Self::from_rep_matrix(TheoryTag::Classical, in_type, out_type, mat)
    }

    /// A quantum process from its Kraus operators, each a
    /// `dim(out) x dim(in)` matrix over the undoubled Hilbert spaces
    /// (leftmost wire most significant).
    pub fn from_kraus(
        in_type: Vec<SystemType>,
        out_type: Vec<SystemType>,
        kraus: &[Array2<Complex64>],
    ) -> Result<Self> {
        let din = hilbert_dim_of(&in_type);
        let dout = hilbert_dim_of(&out_type);
        if kraus.is_empty() {
            return Err(Error::InvalidBoxData {
                name: String::new(),
                reason: "at least one Kraus operator required".into(),
            });
        }
        for k in kraus {
            if k.dim() != (dout, din) {
                return Err(Error::ShapeMismatch {
                    context: format!(
                        "Kraus operator must be {}x{}, got {}x{}",
                        dout,
                        din,
                        k.nrows(),
                        k.ncols()
                    ),
                });
            }
        }
        let mut sg: Array2<Complex64> = Array2::zeros((dout * dout, din * din));
        for k in kraus {
            let kc = k.mapv(|v| v.conj());
            sg = sg + kron(&kc, k);
        }
        let in_dims = dims_of(&in_type);
        let out_dims = dims_of(&out_type);
        let mat = if in_dims.len() > 1 || out_dims.len() > 1 {
            // reorder the global column-stacked indices into the
            // wire-by-wire convention
            let rep_out = dout * dout;
            let rep_in = din * din;
            let mut s = Array2::zeros((rep_out, rep_in));
            for pr in 0..rep_out {
                let (c, r) = split_perwire(pr, &out_dims);
                let gr = c * dout + r;
                for pc in 0..rep_in {
                    let (c2, r2) = split_perwire(pc, &in_dims);
                    let gc = c2 * din + r2;
                    s[[pr, pc]] = sg[[gr, gc]];
                }
            }
            s
        } else {
            sg
        };
        Self::from_rep_matrix(TheoryTag::Quantum, in_type, out_type, mat)
    }

    pub fn theory(&self) -> TheoryTag {
        self.theory
    }

    pub fn in_type(&self) -> &[SystemType] {
        &self.in_type
    }

    pub fn out_type(&self) -> &[SystemType] {
        &self.out_type
    }

    pub fn mat(&self) -> &Array2<Complex64> {
        &self.mat
    }

    /// Sequential composition `self ∘ f` (first `f`, then `self`).
    pub fn compose_seq(&self, f: &ProcessValue) -> Result<ProcessValue> {
        if self.theory != f.theory {
            return Err(Error::TheoryMismatch);
        }
        if self.in_type != f.out_type {
            return Err(Error::TypeMismatch {
                context: format!(
                    "cannot compose: inner ports {} vs {}",
                    type_list(&f.out_type),
                    type_list(&self.in_type)
                ),
            });
        }
        Ok(ProcessValue {
            theory: self.theory,
            in_type: f.in_type.clone(),
            out_type: self.out_type.clone(),
            mat: self.mat.dot(&f.mat),
        })
    }

    /// Parallel composition `self ⊗ g`, concatenating port lists.
    pub fn tensor(&self, g: &ProcessValue) -> Result<ProcessValue> {
        if self.theory != g.theory {
            return Err(Error::TheoryMismatch);
        }
        let mut in_type = self.in_type.clone();
        in_type.extend_from_slice(&g.in_type);
        let mut out_type = self.out_type.clone();
        out_type.extend_from_slice(&g.out_type);
        Ok(ProcessValue {
            theory: self.theory,
            in_type,
            out_type,
            mat: kron(&self.mat, &g.mat),
        })
    }

    /// Discarding the output must equal discarding the input (probability or
    /// trace preservation).
    pub fn is_causal(&self, tolerance: f64) -> bool {
        let lhs = discard(self.theory, &self.out_type).mat.dot(&self.mat);
        let rhs = discard(self.theory, &self.in_type).mat;
        linalg::max_abs_diff(&lhs, &rhs) <= tolerance
    }

    /// How far discarding the output deviates from discarding the input.
    pub fn causality_deviation(&self) -> f64 {
        let lhs = discard(self.theory, &self.out_type).mat.dot(&self.mat);
        let rhs = discard(self.theory, &self.in_type).mat;
        linalg::max_abs_diff(&lhs, &rhs)
    }

    /// The Choi operator of a quantum process, normalized by the input
    /// dimension so that trace-preserving maps give trace-1 operators.
    pub fn choi(&self) -> Result<Array2<Complex64>> {
        if self.theory != TheoryTag::Quantum {
            return Err(Error::WrongTheory { expected: "quantum" });
        }
        let in_dims = dims_of(&self.in_type);
        let out_dims = dims_of(&self.out_type);
        let din = hilbert_dim_of(&self.in_type);
        let dout = hilbert_dim_of(&self.out_type);
        let side = din * dout;
        let mut choi = Array2::zeros((side, side));
        for i_in in 0..din {
            for i_out in 0..dout {
                for j_in in 0..din {
                    for j_out in 0..dout {
                        let pr = join_perwire(j_out, i_out, &out_dims);
                        let pc = join_perwire(j_in, i_in, &in_dims);
                        choi[[i_in * dout + i_out, j_in * dout + j_out]] =
                            self.mat[[pr, pc]] / din as f64;
                    }
                }
            }
        }
        Ok(choi)
    }

    /// Complete positivity test: the Choi operator must be Hermitian with
    /// minimum eigenvalue at least `-tolerance`.
    pub fn is_cp(&self, tolerance: f64) -> Result<bool> {
        let choi = self.choi()?;
        if linalg::hermiticity_deviation(&choi) > tolerance {
            return Ok(false);
        }
        let ev = linalg::hermitian_eigenvalues(&choi);
        Ok(ev.first().is_none_or(|&min| min >= -tolerance))
    }

    /// Extracts a real scalar from a 1x1 representation.
    pub fn scalar(&self) -> Result<f64> {
        if self.mat.dim() != (1, 1) {
            return Err(Error::TypeMismatch {
                context: format!(
                    "expected a scalar, got {} -> {}",
                    type_list(&self.in_type),
                    type_list(&self.out_type)
                ),
            });
        }
        let v = self.mat[[0, 0]];
        if v.im.abs() > tol::SCALAR_IMAG {
            return Err(Error::NonRealScalar { imag: v.im });
        }
        Ok(v.re)
    }

    /// Largest entrywise deviation from another process of the same shape.
    pub fn max_diff(&self, other: &ProcessValue) -> Result<f64> {
        if self.theory != other.theory {
            return Err(Error::TheoryMismatch);
        }
        if self.mat.dim() != other.mat.dim() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "{}x{} vs {}x{}",
                    self.mat.nrows(),
                    self.mat.ncols(),
                    other.mat.nrows(),
                    other.mat.ncols()
                ),
            });
        }
        Ok(linalg::max_abs_diff(&self.mat, &other.mat))
    }
}

/// The identity process on a wire list.
pub fn identity(theory: TheoryTag, types: &[SystemType]) -> ProcessValue {
    let rep = rep_dim_of(theory, types);
    ProcessValue {
        theory,
        in_type: types.to_vec(),
        out_type: types.to_vec(),
        mat: Array2::eye(rep),
    }
}

/// The discarding effect on a wire list: the all-ones row classically, the
/// trace as a superoperator quantumly. `discard(_, &[])` is the scalar 1.
pub fn discard(theory: TheoryTag, types: &[SystemType]) -> ProcessValue {
    let mut mat = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
    for t in types {
        let rep = t.rep_dim(theory);
        let mut row = Array2::zeros((1, rep));
        match theory {
            TheoryTag::Classical => row.fill(Complex64::new(1.0, 0.0)),
            TheoryTag::Quantum => {
                for i in 0..t.dim {
                    row[[0, i * t.dim + i]] = Complex64::new(1.0, 0.0);
                }
            }
        }
        mat = kron(&mat, &row);
    }
    ProcessValue { theory, in_type: types.to_vec(), out_type: vec![], mat }
}

/// The unnormalized perfectly correlated pair state `I -> A ⊗ A`. In the
/// quantum theory this is the unnormalized maximally entangled state; in
/// both theories its entries are 1 exactly where the two wire-by-wire
/// indices agree, so the yanking equations hold exactly on representations.
pub fn cup(theory: TheoryTag, t: &SystemType) -> ProcessValue {
    let rep = t.rep_dim(theory);
    let mut mat = Array2::zeros((rep * rep, 1));
    for p in 0..rep {
        mat[[p * rep + p, 0]] = Complex64::new(1.0, 0.0);
    }
    ProcessValue {
        theory,
        in_type: vec![],
        out_type: vec![t.clone(), t.clone()],
        mat,
    }
}

/// The matching effect `A ⊗ A -> I`; the transpose of [`cup`].
pub fn cap(theory: TheoryTag, t: &SystemType) -> ProcessValue {
    let c = cup(theory, t);
    ProcessValue {
        theory,
        in_type: c.out_type.clone(),
        out_type: vec![],
        mat: c.mat.t().to_owned(),
    }
}

/// The uniform distribution (classical) or maximally mixed state (quantum)
/// on a wire.
pub fn uniform_state(theory: TheoryTag, t: &SystemType) -> ProcessValue {
    let rep = t.rep_dim(theory);
    let mut mat = Array2::zeros((rep, 1));
    match theory {
        TheoryTag::Classical => {
            mat.fill(Complex64::new(1.0 / t.dim as f64, 0.0));
        }
        TheoryTag::Quantum => {
            for i in 0..t.dim {
                mat[[i * t.dim + i, 0]] = Complex64::new(1.0 / t.dim as f64, 0.0);
            }
        }
    }
    ProcessValue { theory, in_type: vec![], out_type: vec![t.clone()], mat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use TheoryTag::{Classical, Quantum};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bit() -> SystemType {
        SystemType::new("B", 2)
    }

    fn qubit() -> SystemType {
        SystemType::new("Q", 2)
    }

    fn dephasing() -> ProcessValue {
        let p0 = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let p1 = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        ProcessValue::from_kraus(vec![qubit()], vec![qubit()], &[p0, p1]).unwrap()
    }

    #[test]
    fn identity_is_neutral_for_sequential_composition() {
        let f = ProcessValue::classical(
            vec![bit()],
            vec![bit()],
            array![[0.25, 0.5], [0.75, 0.5]],
        )
        .unwrap();
        let id = identity(Classical, &[bit()]);
        let left = id.compose_seq(&f).unwrap();
        let right = f.compose_seq(&id).unwrap();
        assert_eq!(left.mat(), f.mat());
        assert_eq!(right.mat(), f.mat());
    }

    #[test]
    fn permutation_composition_matches_matrix_product() {
        let g = ProcessValue::classical(vec![bit()], vec![bit()], array![[1.0, 0.0], [0.0, 1.0]])
            .unwrap();
        let f = ProcessValue::classical(vec![bit()], vec![bit()], array![[0.0, 1.0], [1.0, 0.0]])
            .unwrap();
        let gf = g.compose_seq(&f).unwrap();
        assert_eq!(gf.mat(), f.mat());
    }

    #[test]
    fn dephasing_superoperator_is_idempotent() {
        // Direct computation from the Kraus form: the superoperator of
        // standard-basis dephasing on a qubit is diag(1, 0, 0, 1).
        let e = dephasing();
        let expected = array![
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]
        ];
        assert!(linalg::max_abs_diff(e.mat(), &expected) < 1e-15);
        let ee = e.compose_seq(&e).unwrap();
        assert!(ee.max_diff(&e).unwrap() < 1e-15);
    }

    #[test]
    fn tensor_with_unit_scalar_is_neutral() {
        let f = dephasing();
        let one = identity(Quantum, &[]);
        let fs = f.tensor(&one).unwrap();
        assert_eq!(fs.mat(), f.mat());
        assert_eq!(fs.in_type(), f.in_type());
    }

    #[test]
    fn discard_distributes_over_tensor() {
        for theory in [Classical, Quantum] {
            let a = SystemType::new("A", 2);
            let b = SystemType::new("B", 3);
            let separate = discard(theory, std::slice::from_ref(&a)).tensor(&discard(theory, std::slice::from_ref(&b))).unwrap();
            let joint = discard(theory, &[a, b]);
            assert_eq!(separate.mat(), joint.mat());
        }
    }

    #[test]
    fn point_states_tensor_to_composite_point_state() {
        let e0 = ProcessValue::classical(vec![], vec![bit()], array![[1.0], [0.0]]).unwrap();
        let e1 = ProcessValue::classical(vec![], vec![bit()], array![[0.0], [1.0]]).unwrap();
        let e01 = e0.tensor(&e1).unwrap();
        let expected = array![[0.0], [1.0], [0.0], [0.0]];
        assert_eq!(e01.mat(), &expected.mapv(|v| c(v, 0.0)));
    }

    #[test]
    fn discard_of_unit_is_one() {
        for theory in [Classical, Quantum] {
            assert_eq!(discard(theory, &[]).scalar().unwrap(), 1.0);
        }
    }

    #[test]
    fn classical_discard_is_all_ones_row() {
        let d = discard(Classical, &[SystemType::new("T", 3)]);
        assert_eq!(d.mat(), &Array2::from_elem((1, 3), c(1.0, 0.0)));
    }

    #[test]
    fn quantum_discard_of_causal_state_is_one() {
        let rho = ProcessValue::from_kraus(
            vec![],
            vec![qubit()],
            &[array![[c(0.6f64.sqrt(), 0.0)], [c(0.0, 0.0)]], array![[c(0.0, 0.0)], [c(0.4f64.sqrt(), 0.0)]]],
        )
        .unwrap();
        let s = discard(Quantum, &[qubit()]).compose_seq(&rho).unwrap();
        assert!((s.scalar().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn yanking_holds_exactly_in_both_theories() {
        for (theory, t) in [(Classical, bit()), (Quantum, qubit()), (Classical, SystemType::new("T", 3))] {
            let id = identity(theory, std::slice::from_ref(&t));
            let lhs = cap(theory, &t)
                .tensor(&id)
                .unwrap()
                .compose_seq(&id.tensor(&cup(theory, &t)).unwrap())
                .unwrap();
            assert_eq!(lhs.mat(), id.mat());
        }
    }

    #[test]
    fn classical_cup_is_correlated_pair() {
        let cu = cup(Classical, &bit());
        let expected = array![[1.0], [0.0], [0.0], [1.0]].mapv(|v| c(v, 0.0));
        assert_eq!(cu.mat(), &expected);
    }

    #[test]
    fn circle_scalar_is_representation_dimension() {
        // cap ∘ cup counts the wire-by-wire representation dimension: d for
        // a classical system, d^2 for a quantum one (the doubled theory
        // squares the circle).
        let cl = cap(Classical, &bit()).compose_seq(&cup(Classical, &bit())).unwrap();
        assert_eq!(cl.scalar().unwrap(), 2.0);
        let qu = cap(Quantum, &qubit()).compose_seq(&cup(Quantum, &qubit())).unwrap();
        assert_eq!(qu.scalar().unwrap(), 4.0);
    }

    #[test]
    fn column_stochastic_matrices_are_causal() {
        let f = ProcessValue::classical(
            vec![bit()],
            vec![SystemType::new("T", 3)],
            array![[0.2, 0.5], [0.3, 0.1], [0.5, 0.4]],
        )
        .unwrap();
        assert!(f.is_causal(tol::EQ));
    }

    #[test]
    fn projector_effect_is_not_causal() {
        // Measuring effect <0|.|0> strictly decreases trace on |1><1|.
        let eff = ProcessValue::from_kraus(
            vec![qubit()],
            vec![],
            &[array![[c(1.0, 0.0), c(0.0, 0.0)]]],
        )
        .unwrap();
        assert!(!eff.is_causal(tol::EQ));
    }

    #[test]
    fn kraus_maps_are_completely_positive() {
        assert!(dephasing().is_cp(tol::CP_EIG).unwrap());
    }

    #[test]
    fn transpose_map_is_not_completely_positive() {
        // vec(X^T)[(c,r)] = vec(X)[(r,c)], so the superoperator is the swap.
        let mut swap = Array2::zeros((4, 4));
        for cc in 0..2 {
            for rr in 0..2 {
                swap[[cc * 2 + rr, rr * 2 + cc]] = c(1.0, 0.0);
            }
        }
        let t =
            ProcessValue::from_rep_matrix(Quantum, vec![qubit()], vec![qubit()], swap).unwrap();
        assert!(!t.is_cp(tol::CP_EIG).unwrap());
        let ev = linalg::hermitian_eigenvalues(&t.choi().unwrap());
        assert!((ev[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_map_is_completely_positive() {
        let z = ProcessValue::from_rep_matrix(Quantum, vec![qubit()], vec![qubit()], Array2::zeros((4, 4)))
            .unwrap();
        assert!(z.is_cp(tol::CP_EIG).unwrap());
    }

    #[test]
    fn cp_test_requires_the_quantum_theory() {
        let f = identity(Classical, &[bit()]);
        assert!(matches!(f.is_cp(tol::CP_EIG), Err(Error::WrongTheory { .. })));
    }

    #[test]
    fn cross_theory_composition_is_rejected() {
        let f = identity(Classical, &[bit()]);
        let g = identity(Quantum, &[qubit()]);
        assert!(matches!(g.compose_seq(&f), Err(Error::TheoryMismatch)));
        assert!(matches!(g.tensor(&f), Err(Error::TheoryMismatch)));
    }

    #[test]
    fn multiwire_kraus_agrees_with_tensor_of_superoperators() {
        // The wire-by-wire reordering must make `from_kraus` on a composite
        // match the Kronecker product of single-wire ingestions.
        let h = array![
            [c(0.5f64.sqrt(), 0.0), c(0.5f64.sqrt(), 0.0)],
            [c(0.5f64.sqrt(), 0.0), c(-(0.5f64.sqrt()), 0.0)]
        ];
        let p0 = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let p1 = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let f = ProcessValue::from_kraus(vec![qubit()], vec![qubit()], std::slice::from_ref(&h)).unwrap();
        let g = ProcessValue::from_kraus(vec![qubit()], vec![qubit()], &[p0.clone(), p1.clone()]).unwrap();
        let tensored = f.tensor(&g).unwrap();
        let joint_kraus: Vec<Array2<Complex64>> =
            [&p0, &p1].iter().map(|p| kron(&h, p)).collect();
        let joint = ProcessValue::from_kraus(
            vec![qubit(), qubit()],
            vec![qubit(), qubit()],
            &joint_kraus,
        )
        .unwrap();
        assert!(tensored.max_diff(&joint).unwrap() < 1e-14);
    }

    #[test]
    fn scalar_with_imaginary_part_is_rejected() {
        let s = ProcessValue::from_rep_matrix(
            Quantum,
            vec![],
            vec![],
            Array2::from_elem((1, 1), c(1.0, 1e-3)),
        )
        .unwrap();
        assert!(matches!(s.scalar(), Err(Error::NonRealScalar { .. })));
    }

    #[test]
    fn negative_classical_entries_are_rejected() {
        let err = ProcessValue::classical(vec![bit()], vec![bit()], array![[0.5, 1.0], [0.5, -0.1]]);
        assert!(matches!(err, Err(Error::InvalidBoxData { .. })));
    }

    mod properties {
        use super::*;
        use crate::random::random_causal_process;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        fn sys(dim: usize) -> SystemType {
            SystemType::new("S", dim)
        }

        fn raw(theory: TheoryTag, din: usize, dout: usize, rng: &mut impl Rng) -> ProcessValue {
            let a = sys(din);
            let b = sys(dout);
            let (rin, rout) = (a.rep_dim(theory), b.rep_dim(theory));
            let mat = Array2::from_shape_fn((rout, rin), |_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            ProcessValue::from_rep_matrix(theory, vec![a], vec![b], mat).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn interchange_of_tensor_and_composition(
                dims in proptest::array::uniform6(1usize..=3),
                quantum in any::<bool>(),
                seed in any::<u64>(),
            ) {
                let theory = if quantum { Quantum } else { Classical };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let [a, b, cc, d, e, f] = dims;
                let f1 = raw(theory, a, b, &mut rng);
                let g1 = raw(theory, b, cc, &mut rng);
                let f2 = raw(theory, d, e, &mut rng);
                let g2 = raw(theory, e, f, &mut rng);
                let lhs = g1.compose_seq(&f1).unwrap().tensor(&g2.compose_seq(&f2).unwrap()).unwrap();
                let rhs = g1.tensor(&g2).unwrap().compose_seq(&f1.tensor(&f2).unwrap()).unwrap();
                prop_assert!(lhs.max_diff(&rhs).unwrap() <= 1e-12);
            }

            #[test]
            fn discard_absorbs_causal_processes(
                din in 1usize..=3,
                dout in 1usize..=3,
                quantum in any::<bool>(),
                seed in any::<u64>(),
            ) {
                let theory = if quantum { Quantum } else { Classical };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = random_causal_process(theory, &[sys(din)], &[sys(dout)], &mut rng);
                let absorbed = discard(theory, &[sys(dout)]).compose_seq(&f).unwrap();
                let direct = discard(theory, &[sys(din)]);
                prop_assert!(absorbed.max_diff(&direct).unwrap() <= 1e-12);
            }

            #[test]
            fn composition_preserves_the_positivity_class(
                dims in proptest::array::uniform3(1usize..=3),
                quantum in any::<bool>(),
                seed in any::<u64>(),
            ) {
                let theory = if quantum { Quantum } else { Classical };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let [a, b, cc] = dims;
                let f = random_causal_process(theory, &[sys(a)], &[sys(b)], &mut rng);
                let g = random_causal_process(theory, &[sys(b)], &[sys(cc)], &mut rng);
                let seq = g.compose_seq(&f).unwrap();
                let par = f.tensor(&g).unwrap();
                for h in [seq, par] {
                    match theory {
                        Classical => {
                            prop_assert!(h.mat().iter().all(|v| v.re >= -1e-10 && v.im.abs() <= 1e-12));
                        }
                        Quantum => prop_assert!(h.is_cp(1e-10).unwrap()),
                    }
                    prop_assert!(h.is_causal(1e-10));
                }
            }
        }
    }
}
