//! Composite Hilbert space of the auxiliary atom 0 (levels `{g, r}`) and the
//! computational atoms 1 and 2 (levels `{0, 1, r}`).
//!
//! Basis states are ordered lexicographically by atom level with atom 0 the
//! slowest index, so for the two-qubit layout `|a0 a1 a2>` sits at
//! `a0 * 9 + a1 * 3 + a2`. Dressed states `|±>_k` and the heralded subspaces
//! are derived from this single bare ordering.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Level index of the ground state of atom 0.
pub const AUX_GROUND: usize = 0;
/// Level index of the Rydberg state of atom 0.
pub const AUX_RYDBERG: usize = 1;
/// Level index of the Rydberg state of a computational atom.
pub const COMP_RYDBERG: usize = 2;

/// Per-atom level structure of the simulated register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemLayout {
    levels: Vec<usize>,
}

impl SystemLayout {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if !(2..=3).contains(&levels.len()) {
            return Err(Error::UnsupportedLayout(format!(
                "{} atoms (expected 2 or 3)",
                levels.len()
            )));
        }
        if let Some(bad) = levels.iter().find(|&&l| !(2..=3).contains(&l)) {
            return Err(Error::UnsupportedLayout(format!(
                "{bad} levels on one atom (expected 2 or 3)"
            )));
        }
        Ok(Self { levels })
    }

    /// Atom 0 plus computational atom 1 (dimension 6).
    pub fn single_qubit() -> Self {
        Self { levels: vec![2, 3] }
    }

    /// Atom 0 plus computational atoms 1 and 2 (dimension 18).
    pub fn two_qubit() -> Self {
        Self { levels: vec![2, 3, 3] }
    }

    pub fn n_atoms(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn total_dim(&self) -> usize {
        self.levels.iter().product()
    }

    /// True for the `[2, 3, ...]` layouts the physical models are defined on.
    pub fn is_physical(&self) -> bool {
        self.levels[0] == 2 && self.levels[1..].iter().all(|&l| l == 3)
    }

    pub(crate) fn require_physical(&self) -> Result<()> {
        if self.is_physical() {
            Ok(())
        } else {
            Err(Error::UnsupportedLayout(format!(
                "levels {:?}; the atom models need [2, 3] or [2, 3, 3]",
                self.levels
            )))
        }
    }

    /// Number of computational atoms (atoms 1..).
    pub fn n_computational(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Ordered product basis for a [`SystemLayout`].
#[derive(Clone, Debug)]
pub struct Basis {
    layout: SystemLayout,
    strides: Vec<usize>,
}

pub fn build_basis(layout: &SystemLayout) -> Result<Basis> {
    // re-validate: layouts are constructible only through `new`, but keep the
    // contract local to this function
    let layout = SystemLayout::new(layout.levels.clone())?;
    let mut strides = vec![1; layout.n_atoms()];
    for a in (0..layout.n_atoms() - 1).rev() {
        strides[a] = strides[a + 1] * layout.levels[a + 1];
    }
    Ok(Basis { layout, strides })
}

impl Basis {
    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn index_of(&self, tuple: &[usize]) -> Result<usize> {
        let levels = self.layout.levels();
        if tuple.len() != levels.len() || tuple.iter().zip(levels).any(|(&x, &l)| x >= l) {
            return Err(Error::InvalidBasisTuple {
                tuple: tuple.to_vec(),
                levels: levels.to_vec(),
            });
        }
        Ok(tuple.iter().zip(&self.strides).map(|(x, s)| x * s).sum())
    }

    pub fn tuple_of(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange { index, dim: self.dim() });
        }
        Ok(self
            .strides
            .iter()
            .zip(self.layout.levels())
            .map(|(s, l)| (index / s) % l)
            .collect())
    }

    /// All basis tuples in index order.
    pub fn tuples(&self) -> Vec<Vec<usize>> {
        (0..self.dim()).map(|i| self.tuple_of(i).unwrap()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

/// Dressing angles `(theta_k, phi_k)` defining `|±>_k` of a computational atom.
#[derive(Clone, Copy, Debug, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Dressing {
    pub theta: f64,
    pub phi: f64,
}

impl Dressing {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Amplitudes of `|±>` on `(|0>, |1>)`.
    pub fn amplitudes(&self, sign: Sign) -> [C64; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let e = C64::from_polar(1.0, self.phi);
        match sign {
            Sign::Plus => [C64::from(c), e * s],
            Sign::Minus => [C64::from(s), -e * c],
        }
    }

    /// 2x2 unitary whose columns are `|+>` and `|->`.
    pub fn unitary(&self) -> DMatrix<C64> {
        let p = self.amplitudes(Sign::Plus);
        let m = self.amplitudes(Sign::Minus);
        DMatrix::from_column_slice(2, 2, &[p[0], p[1], m[0], m[1]])
    }
}

/// Single-atom ket of computational atom `k` on its three levels `{0, 1, r}`.
pub fn dressed_state(k: usize, sign: Sign, theta: f64, phi: f64) -> Result<StateVector> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidAtom(k));
    }
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::InvalidParameter("dressing angles must be finite".into()));
    }
    let a = Dressing::new(theta, phi).amplitudes(sign);
    Ok(StateVector::new(DVector::from_vec(vec![a[0], a[1], ZERO])))
}

/// Single-atom level label used to assemble product kets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Local {
    /// Ground state of atom 0.
    G,
    /// Rydberg state of any atom.
    R,
    Zero,
    One,
    Plus,
    Minus,
}

impl Local {
    fn symbol(self) -> char {
        match self {
            Local::G => '0',
            Local::R => 'r',
            Local::Zero => '0',
            Local::One => '1',
            Local::Plus => '+',
            Local::Minus => '-',
        }
    }
}

fn local_ket(atom: usize, n_levels: usize, label: Local, dressing: Dressing) -> Result<DVector<C64>> {
    let mut v = DVector::zeros(n_levels);
    let aux = atom == 0;
    match (aux, label) {
        (true, Local::G) => v[AUX_GROUND] = ONE,
        (true, Local::R) => v[AUX_RYDBERG] = ONE,
        (false, Local::R) => v[COMP_RYDBERG] = ONE,
        (false, Local::Zero) => v[0] = ONE,
        (false, Local::One) => v[1] = ONE,
        (false, Local::Plus) | (false, Local::Minus) => {
            let sign = if label == Local::Plus { Sign::Plus } else { Sign::Minus };
            let a = dressing.amplitudes(sign);
            v[0] = a[0];
            v[1] = a[1];
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "label {label:?} is not a level of atom {atom}"
            )))
        }
    }
    Ok(v)
}

/// Product ket `|l0 l1 (l2)>`; `dressings[k - 1]` dresses computational atom `k`.
pub fn product_ket(layout: &SystemLayout, labels: &[Local], dressings: &[Dressing]) -> Result<StateVector> {
    layout.require_physical()?;
    if labels.len() != layout.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: layout.n_atoms(),
            found: labels.len(),
        });
    }
    let mut out = DVector::from_element(1, ONE);
    for (atom, (&label, &n)) in labels.iter().zip(layout.levels()).enumerate() {
        let d = if atom == 0 {
            Dressing::default()
        } else {
            dressings.get(atom - 1).copied().unwrap_or_default()
        };
        out = out.kronecker(&local_ket(atom, n, label, d)?);
    }
    Ok(StateVector::new(out))
}

pub fn label_string(labels: &[Local]) -> String {
    labels.iter().map(|l| l.symbol()).collect()
}

/// Dressed basis of the dissipative evolution: the unitary block `B` followed
/// by the decay-product block reached by spontaneous emission.
///
/// For the two-qubit layout the ordering is `|r++>, |r+->, |r-+>, |r-->,
/// |0r+>, |0r->, |0+r>, |0-r>` then `|0++>, |0+->, |0-+>, |0-->`. The
/// single-qubit analogue is `|r+>, |r->, |0r>` then `|0+>, |0->`.
#[derive(Clone, Debug)]
pub struct HeraldedSubspace {
    pub unitary_labels: Vec<Vec<Local>>,
    pub leak_labels: Vec<Vec<Local>>,
    pub unitary: Vec<StateVector>,
    pub leak: Vec<StateVector>,
}

impl HeraldedSubspace {
    pub fn new(layout: &SystemLayout, dressings: &[Dressing]) -> Result<Self> {
        use Local::*;
        layout.require_physical()?;
        let (unitary_labels, leak_labels): (Vec<Vec<Local>>, Vec<Vec<Local>>) = match layout.n_atoms() {
            2 => (
                vec![vec![R, Plus], vec![R, Minus], vec![G, R]],
                vec![vec![G, Plus], vec![G, Minus]],
            ),
            _ => (
                vec![
                    vec![R, Plus, Plus],
                    vec![R, Plus, Minus],
                    vec![R, Minus, Plus],
                    vec![R, Minus, Minus],
                    vec![G, R, Plus],
                    vec![G, R, Minus],
                    vec![G, Plus, R],
                    vec![G, Minus, R],
                ],
                vec![
                    vec![G, Plus, Plus],
                    vec![G, Plus, Minus],
                    vec![G, Minus, Plus],
                    vec![G, Minus, Minus],
                ],
            ),
        };
        let build = |ls: &Vec<Vec<Local>>| -> Result<Vec<StateVector>> {
            ls.iter().map(|l| product_ket(layout, l, dressings)).collect()
        };
        Ok(Self {
            unitary: build(&unitary_labels)?,
            leak: build(&leak_labels)?,
            unitary_labels,
            leak_labels,
        })
    }

    /// All basis vectors, unitary block first.
    pub fn all(&self) -> impl Iterator<Item = &StateVector> {
        self.unitary.iter().chain(self.leak.iter())
    }

    /// Position (0-based) of a label tuple in the combined ordering.
    pub fn position(&self, labels: &[Local]) -> Option<usize> {
        self.unitary_labels
            .iter()
            .chain(self.leak_labels.iter())
            .position(|l| l == labels)
    }

    pub fn unitary_projector(&self) -> Operator {
        Operator::projector(&self.unitary)
    }

    pub fn leak_projector(&self) -> Operator {
        Operator::projector(&self.leak)
    }

    /// Columns are the basis vectors in combined order.
    pub fn frame(&self) -> DMatrix<C64> {
        let cols: Vec<DVector<C64>> = self.all().map(|v| v.amplitudes().clone()).collect();
        DMatrix::from_columns(&cols)
    }
}

/// Unitary whose columns are the dressed product states, in the same
/// lexicographic order as the bare basis with local levels relabelled
/// `(0, 1, r) -> (+, -, r)` on each computational atom.
///
/// All propagation runs in these coordinates; the Table III vectors and the
/// Stark counter-terms are then coordinate axes.
pub fn working_frame(layout: &SystemLayout, dressings: &[Dressing]) -> Result<DMatrix<C64>> {
    layout.require_physical()?;
    if dressings.len() != layout.n_computational() {
        return Err(Error::DimensionMismatch { expected: layout.n_computational(), found: dressings.len() });
    }
    let mut w = DMatrix::from_element(1, 1, ONE);
    w = w.kronecker(&DMatrix::<C64>::identity(2, 2));
    for d in dressings {
        let mut local = DMatrix::zeros(3, 3);
        local.view_mut((0, 0), (2, 2)).copy_from(&d.unitary());
        local[(COMP_RYDBERG, COMP_RYDBERG)] = ONE;
        w = w.kronecker(&local);
    }
    Ok(w)
}

/// Local level index of a label in working-frame coordinates.
pub fn working_level(atom: usize, label: Local) -> Option<usize> {
    match (atom == 0, label) {
        (true, Local::G) => Some(AUX_GROUND),
        (true, Local::R) => Some(AUX_RYDBERG),
        (false, Local::Plus) => Some(0),
        (false, Local::Minus) => Some(1),
        (false, Local::R) => Some(COMP_RYDBERG),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(amps: DVector<C64>) -> Self {
        Self { amps }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = DVector::zeros(dim);
        amps[index] = ONE;
        Self { amps }
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(&self) -> Self {
        Self { amps: self.amps.unscale(self.norm()) }
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { amps: self.amps.map(|a| a * c) }
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        StateVector::new(&self.amps + &rhs.amps)
    }
}

/// Dense operator on the composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: DMatrix<C64>,
    hermitian_hint: bool,
}

impl Operator {
    pub fn new(matrix: DMatrix<C64>, hermitian_hint: bool) -> Self {
        assert!(matrix.is_square(), "operators are square");
        Self { matrix, hermitian_hint }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(DMatrix::zeros(dim, dim), true)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), true)
    }

    /// `|ket><bra|`
    pub fn outer(ket: &StateVector, bra: &StateVector) -> Self {
        Self::new(ket.amps.clone() * bra.amps.adjoint(), false)
    }

    /// Sum of `|v><v|` over the given (orthonormal) vectors.
    pub fn projector(vectors: &[StateVector]) -> Self {
        let dim = vectors.first().map_or(0, |v| v.dim());
        let mut m = DMatrix::zeros(dim, dim);
        for v in vectors {
            m += &v.amps * v.amps.adjoint();
        }
        Self::new(m, true)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::from(x)));
        Self::new(DMatrix::from_diagonal(&d), true)
    }

    /// Embed a single-atom operator acting on `atom` into the full space.
    pub fn embed(layout: &SystemLayout, atom: usize, local: &DMatrix<C64>) -> Result<Self> {
        if atom >= layout.n_atoms() {
            return Err(Error::InvalidAtom(atom));
        }
        let n = layout.levels()[atom];
        if local.nrows() != n || local.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: local.nrows() });
        }
        let mut m = DMatrix::from_element(1, 1, ONE);
        for (a, &l) in layout.levels().iter().enumerate() {
            let factor = if a == atom { local.clone() } else { DMatrix::identity(l, l) };
            m = m.kronecker(&factor);
        }
        Ok(Self::new(m, false))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn with_hermitian_hint(mut self, hint: bool) -> Self {
        self.hermitian_hint = hint;
        self
    }

    /// `max |A - A^dag|` over all elements.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn dagger(&self) -> Self {
        Self::new(self.matrix.adjoint(), self.hermitian_hint)
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self::new(self.matrix.kronecker(&other.matrix), self.hermitian_hint && other.hermitian_hint)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        StateVector::new(&self.matrix * &v.amps)
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::new(self.matrix.map(|x| x * c), self.hermitian_hint && c.im == 0.0)
    }

    /// `<bra|A|ket>`
    pub fn element(&self, bra: &StateVector, ket: &StateVector) -> C64 {
        bra.amps.dotc(&(&self.matrix * &ket.amps))
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator::new(&self.matrix * &rhs.matrix, false)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::new(&self.matrix + &rhs.matrix, self.hermitian_hint && rhs.hermitian_hint)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::new(&self.matrix - &rhs.matrix, self.hermitian_hint && rhs.hermitian_hint)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Self {
        assert!(matrix.is_square(), "density matrices are square");
        Self { matrix }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        Self::new(&state.amps * state.amps.adjoint())
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::from(0.5);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks hermiticity (1e-10), unit trace (1e-9) and positivity (-1e-9).
    pub fn is_valid(&self) -> bool {
        self.hermiticity_defect() <= 1e-10
            && (self.trace() - 1.0).abs() <= 1e-9
            && self.min_eigenvalue() >= -1e-9
    }

    /// `Tr[rho A]`
    pub fn expectation(&self, op: &Operator) -> C64 {
        trace_product(&self.matrix, op.matrix())
    }
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Projector onto the computational subspace with atom 0 in `|r>`:
/// `|r0>,|r1>` (single qubit, rank 2) or `|r ij>` (two qubit, rank 4).
///
/// The span does not depend on the dressing angles.
pub fn projector_computational(layout: &SystemLayout) -> Result<Operator> {
    Ok(Operator::projector(&computational_states(layout)?))
}

/// Bare computational kets with atom 0 in `|r>`, in binary order.
pub fn computational_states(layout: &SystemLayout) -> Result<Vec<StateVector>> {
    layout.require_physical()?;
    let basis = build_basis(layout)?;
    let n = layout.n_computational();
    (0..1usize << n)
        .map(|bits| {
            let mut tuple = vec![AUX_RYDBERG];
            tuple.extend((0..n).map(|j| (bits >> (n - 1 - j)) & 1));
            Ok(StateVector::basis(basis.dim(), basis.index_of(&tuple)?))
        })
        .collect()
}

/// `|r>_0<r| ⊗ 1` on the remaining atoms.
pub fn projector_rydberg_aux(layout: &SystemLayout) -> Result<Operator> {
    layout.require_physical()?;
    let mut local = DMatrix::zeros(2, 2);
    local[(AUX_RYDBERG, AUX_RYDBERG)] = ONE;
    Ok(Operator::embed(layout, 0, &local)?.with_hermitian_hint(true))
}
