//! Truncated Fock space of the isotropic 3D harmonic oscillator and the
//! operators entering the master equation: `Ĥ`, `p̂_k`, `q̂^kl` and `q̂̇^kl`.
//!
//! The basis keeps every occupation triple with `n_x + n_y + n_z ≤ ncut`.
//! Quadratic momentum products are assembled in normal order, which makes
//! them the exact projection of the untruncated operators; plain products of
//! truncated `p̂` matrices would be wrong on the top shell.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, I, ONE};
use crate::params::PhysicalParams;

pub type Occupation = [u32; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    ncut: usize,
    states: Vec<Occupation>,
    index: BTreeMap<Occupation, usize>,
}

impl FockBasis {
    /// All triples with at most `ncut` quanta, shell by shell, each shell in
    /// ascending lexicographic order.
    pub fn new(ncut: usize) -> Result<Self> {
        if ncut < 2 {
            return Err(Error::TruncationTooSmall { ncut });
        }
        let mut states = Vec::new();
        for total in 0..=ncut as u32 {
            for nx in 0..=total {
                for ny in 0..=(total - nx) {
                    states.push([nx, ny, total - nx - ny]);
                }
            }
        }
        // within a shell the loop above is already lexicographic
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(FockBasis {
            ncut,
            states,
            index,
        })
    }

    pub fn ncut(&self) -> usize {
        self.ncut
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn state(&self, i: usize) -> Occupation {
        self.states[i]
    }

    pub fn index_of(&self, occ: Occupation) -> Result<usize> {
        self.index
            .get(&occ)
            .copied()
            .ok_or(Error::UnknownState(occ[0], occ[1], occ[2]))
    }

    pub fn total_quanta(&self, i: usize) -> u32 {
        self.states[i].iter().sum()
    }

    /// Basis indices whose total quanta do not exceed `max_quanta`.
    pub fn indices_up_to(&self, max_quanta: u32) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.total_quanta(i) <= max_quanta)
            .collect()
    }
}

/// Convenience alias for [`FockBasis::new`].
pub fn build_basis(ncut: usize) -> Result<FockBasis> {
    FockBasis::new(ncut)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn from_index(i: usize) -> Axis {
        Self::ALL[i]
    }
}

/// Dense operator on a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    ncut: usize,
    mat: CMatrix,
    hermitian: bool,
}

impl FockOperator {
    /// Wrap a matrix. With `hermitian` set the matrix must satisfy
    /// `‖A − A†‖_max ≤ 1e-12 ‖A‖_max`.
    pub fn new(basis: &FockBasis, mat: CMatrix, hermitian: bool) -> Result<Self> {
        if mat.rows() != basis.dim() || mat.cols() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: mat.rows(),
            });
        }
        if hermitian && mat.hermiticity_defect() > 1e-12 * mat.max_abs() {
            return Err(crate::error::invalid("mat", "flagged Hermitian but is not"));
        }
        Ok(FockOperator {
            ncut: basis.ncut(),
            mat,
            hermitian,
        })
    }

    pub(crate) fn raw(ncut: usize, mat: CMatrix, hermitian: bool) -> Self {
        FockOperator {
            ncut,
            mat,
            hermitian,
        }
    }

    pub fn ncut(&self) -> usize {
        self.ncut
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator::raw(self.ncut, self.mat.adjoint(), self.hermitian)
    }

    pub fn check_same_basis(&self, other: &FockOperator) -> Result<()> {
        if self.ncut != other.ncut {
            Err(Error::BasisMismatch {
                left: self.ncut,
                right: other.ncut,
            })
        } else {
            Ok(())
        }
    }
}

/// Lowering operator `a_axis`, `a|n⟩ = √n |n−1⟩`.
pub fn ladder(basis: &FockBasis, axis: Axis) -> FockOperator {
    let n = basis.dim();
    let mut mat = CMatrix::zeros(n, n);
    let ax = axis as usize;
    for (col, occ) in basis.states().iter().enumerate() {
        if occ[ax] == 0 {
            continue;
        }
        let mut lower = *occ;
        lower[ax] -= 1;
        let row = basis.index[&lower];
        mat[(row, col)] = C64::new(libm::sqrt(occ[ax] as f64), 0.0);
    }
    FockOperator::raw(basis.ncut(), mat, false)
}

/// Raising operator `a†_axis` (drops amplitude leaving the truncation).
pub fn creation(basis: &FockBasis, axis: Axis) -> FockOperator {
    ladder(basis, axis).adjoint()
}

/// Total number operator `Σ_k a†_k a_k`.
pub fn number_operator(basis: &FockBasis) -> FockOperator {
    let diag: Vec<C64> = (0..basis.dim())
        .map(|i| C64::new(basis.total_quanta(i) as f64, 0.0))
        .collect();
    FockOperator::raw(basis.ncut(), CMatrix::from_diagonal(&diag), true)
}

fn momentum_scale(params: &PhysicalParams, omega: f64) -> f64 {
    libm::sqrt(params.hbar() * params.mass() * omega / 2.0)
}

/// `p̂ = i√(ħMω/2)(a† − a)`.
pub fn momentum(basis: &FockBasis, axis: Axis, params: &PhysicalParams, omega: f64) -> FockOperator {
    let a = ladder(basis, axis).mat;
    let ad = a.adjoint();
    let diff = &ad - &a;
    let mat = diff.scale(I * momentum_scale(params, omega));
    FockOperator::raw(basis.ncut(), mat, true)
}

/// Exact projection of `p̂_k p̂_l` onto the truncated space:
/// `−(ħMω/2)(a†_k a†_l − a†_k a_l − a†_l a_k − δ_kl + a_k a_l)`.
pub fn momentum_product(
    basis: &FockBasis,
    k: Axis,
    l: Axis,
    params: &PhysicalParams,
    omega: f64,
) -> FockOperator {
    let ak = ladder(basis, k).mat;
    let al = ladder(basis, l).mat;
    let akd = ak.adjoint();
    let ald = al.adjoint();
    let mut sum = akd.matmul(&ald);
    sum.add_scaled(-ONE, &akd.matmul(&al));
    sum.add_scaled(-ONE, &ald.matmul(&ak));
    sum.add_scaled(ONE, &ak.matmul(&al));
    if k == l {
        sum.add_scaled(-ONE, &CMatrix::identity(basis.dim()));
    }
    let s = momentum_scale(params, omega);
    let mat = sum.scale_real(-s * s);
    FockOperator::raw(basis.ncut(), mat, true)
}

/// `Ĥ = p̂²/2M + ½Mω²x̂²`, diagonal with `ħω(n_x + n_y + n_z + 3/2)`.
pub fn hamiltonian_ho(basis: &FockBasis, params: &PhysicalParams, omega: f64) -> FockOperator {
    let hw = params.hbar() * omega;
    let diag: Vec<C64> = (0..basis.dim())
        .map(|i| C64::new(hw * (basis.total_quanta(i) as f64 + 1.5), 0.0))
        .collect();
    FockOperator::raw(basis.ncut(), CMatrix::from_diagonal(&diag), true)
}

/// `(i/ħ)[H, O]`.
pub fn heisenberg_derivative(h: &FockOperator, o: &FockOperator, hbar: f64) -> Result<FockOperator> {
    h.check_same_basis(o)?;
    let mat = h.mat.commutator(&o.mat).scale(I / hbar);
    Ok(FockOperator::raw(h.ncut, mat, h.hermitian && o.hermitian))
}

/// Symmetric family of operators `T^kl = T^lk` stored as six components.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorOperator {
    comps: [FockOperator; 6],
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

fn slot(k: usize, l: usize) -> usize {
    match (k.min(l), k.max(l)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (0, 2) => 4,
        (1, 2) => 5,
        _ => panic!("tensor index out of range"),
    }
}

impl TensorOperator {
    pub fn get(&self, k: usize, l: usize) -> &FockOperator {
        &self.comps[slot(k, l)]
    }

    pub fn ncut(&self) -> usize {
        self.comps[0].ncut
    }

    /// The six stored components with their `(k, l)` labels, `k ≤ l`.
    pub fn components(&self) -> impl Iterator<Item = ((usize, usize), &FockOperator)> {
        PAIRS.iter().copied().zip(self.comps.iter())
    }

    /// All nine `(k, l)` entries, off-diagonal components appearing twice,
    /// as required by `Σ_kl` contractions.
    pub fn all_pairs(&self) -> impl Iterator<Item = ((usize, usize), &FockOperator)> {
        (0..3).flat_map(move |k| (0..3).map(move |l| ((k, l), self.get(k, l))))
    }

    /// `Σ_k T^kk`.
    pub fn trace(&self) -> CMatrix {
        let mut acc = self.comps[0].mat.clone();
        acc.add_scaled(ONE, &self.comps[1].mat);
        acc.add_scaled(ONE, &self.comps[2].mat);
        acc
    }

    /// Combine two families component by component.
    pub fn zip_with(
        &self,
        other: &TensorOperator,
        mut f: impl FnMut(&FockOperator, &FockOperator) -> Result<FockOperator>,
    ) -> Result<Self> {
        let comps = [
            f(&self.comps[0], &other.comps[0])?,
            f(&self.comps[1], &other.comps[1])?,
            f(&self.comps[2], &other.comps[2])?,
            f(&self.comps[3], &other.comps[3])?,
            f(&self.comps[4], &other.comps[4])?,
            f(&self.comps[5], &other.comps[5])?,
        ];
        Ok(TensorOperator { comps })
    }

    /// Multiplicity of a stored component in a `Σ_kl` contraction.
    pub fn multiplicity(k: usize, l: usize) -> f64 {
        if k == l {
            1.0
        } else {
            2.0
        }
    }

    pub fn map(&self, mut f: impl FnMut(&FockOperator) -> Result<FockOperator>) -> Result<Self> {
        let comps = [
            f(&self.comps[0])?,
            f(&self.comps[1])?,
            f(&self.comps[2])?,
            f(&self.comps[3])?,
            f(&self.comps[4])?,
            f(&self.comps[5])?,
        ];
        Ok(TensorOperator { comps })
    }

    /// Componentwise Heisenberg derivative `(i/ħ)[H, T^kl]`.
    pub fn heisenberg_derivative(&self, h: &FockOperator, hbar: f64) -> Result<Self> {
        self.map(|o| heisenberg_derivative(h, o, hbar))
    }
}

/// `q̂^kl = (p̂_k p̂_l − ⅓δ_kl p̂²)/(M²c²)`.
///
/// `q̂^zz` is formed as `−(q̂^xx + q̂^yy)` so the trace vanishes exactly.
pub fn q_operator(basis: &FockBasis, params: &PhysicalParams, omega: f64) -> TensorOperator {
    let m = params.mass();
    let c = params.c();
    let norm = 1.0 / (m * m * c * c);
    let pp = |k: usize, l: usize| {
        momentum_product(basis, Axis::from_index(k), Axis::from_index(l), params, omega).mat
    };
    let diag = [pp(0, 0), pp(1, 1), pp(2, 2)];
    let mut p2 = diag[0].clone();
    p2.add_scaled(ONE, &diag[1]);
    p2.add_scaled(ONE, &diag[2]);
    let traceless = |d: &CMatrix| {
        let mut t = d.clone();
        t.add_scaled(C64::new(-1.0 / 3.0, 0.0), &p2);
        t.scale_real(norm)
    };
    let qxx = traceless(&diag[0]);
    let qyy = traceless(&diag[1]);
    let qzz = (&qxx + &qyy).scale(-ONE);
    let op = |mat: CMatrix| FockOperator::raw(basis.ncut(), mat, true);
    TensorOperator {
        comps: [
            op(qxx),
            op(qyy),
            op(qzz),
            op(pp(0, 1).scale_real(norm)),
            op(pp(0, 2).scale_real(norm)),
            op(pp(1, 2).scale_real(norm)),
        ],
    }
}

/// Oscillator of frequency `omega` with its quadrupole operators.
#[derive(Debug, Clone)]
pub struct OscillatorModel {
    pub basis: FockBasis,
    pub params: PhysicalParams,
    pub omega: f64,
    pub hamiltonian: FockOperator,
    pub q: TensorOperator,
    /// `q̂̇ = (i/ħ)[Ĥ, q̂]` with the bare oscillator Hamiltonian.
    pub qdot: TensorOperator,
}

impl OscillatorModel {
    pub fn new(ncut: usize, params: PhysicalParams, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(crate::error::invalid("omega", "must be positive and finite"));
        }
        let basis = FockBasis::new(ncut)?;
        let hamiltonian = hamiltonian_ho(&basis, &params, omega);
        let q = q_operator(&basis, &params, omega);
        let qdot = q.heisenberg_derivative(&hamiltonian, params.hbar())?;
        Ok(OscillatorModel {
            basis,
            params,
            omega,
            hamiltonian,
            q,
            qdot,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `E_i` of basis state `i`.
    pub fn energy(&self, i: usize) -> f64 {
        self.hamiltonian.mat[(i, i)].re
    }

    /// `ω_if = (E_i − E_f)/ħ`.
    pub fn transition_frequency(&self, i: usize, f: usize) -> f64 {
        (self.energy(i) - self.energy(f)) / self.params.hbar()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

    fn natural() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn basis_dimensions() {
        assert_eq!(FockBasis::new(2).unwrap().dim(), 10);
        assert_eq!(FockBasis::new(3).unwrap().dim(), 20);
        assert_eq!(FockBasis::new(4).unwrap().dim(), 35);
        for ncut in 2..8 {
            let n = ncut + 1;
            assert_eq!(FockBasis::new(ncut).unwrap().dim(), n * (n + 1) * (n + 2) / 6);
        }
        assert_eq!(FockBasis::new(0), Err(Error::TruncationTooSmall { ncut: 0 }));
        assert!(FockBasis::new(1).is_err());
    }

    #[test]
    fn basis_ordering_is_shell_major_lexicographic() {
        let b = FockBasis::new(2).unwrap();
        let expected: [Occupation; 10] = [
            [0, 0, 0],
            [0, 0, 1],
            [0, 1, 0],
            [1, 0, 0],
            [0, 0, 2],
            [0, 1, 1],
            [0, 2, 0],
            [1, 0, 1],
            [1, 1, 0],
            [2, 0, 0],
        ];
        assert_eq!(b.states(), &expected);
        assert_eq!(b, FockBasis::new(2).unwrap());
        assert!(b.index_of([3, 0, 0]).is_err());
    }

    #[test]
    fn ladder_amplitudes() {
        let b = FockBasis::new(3).unwrap();
        let a = ladder(&b, Axis::X);
        let g = b.index_of([0, 0, 0]).unwrap();
        let one = b.index_of([1, 0, 0]).unwrap();
        let two = b.index_of([2, 0, 0]).unwrap();
        assert_eq!(a.element(g, one), ONE);
        let ad = creation(&b, Axis::X);
        assert!((ad.element(two, one).re - libm::sqrt(2.0)).abs() < 1e-15);
    }

    #[test]
    fn canonical_commutator_below_top_shell() {
        let b = FockBasis::new(4).unwrap();
        for axis in Axis::ALL {
            let a = ladder(&b, axis).into_matrix();
            let comm = a.commutator(&a.adjoint());
            for i in b.indices_up_to(3) {
                for j in 0..b.dim() {
                    let want = if i == j { ONE } else { ZERO };
                    assert!((comm[(j, i)] - want).norm_sqr() < 1e-28);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_spectrum() {
        let b = FockBasis::new(3).unwrap();
        let h = hamiltonian_ho(&b, &natural(), 2.0);
        assert_eq!(h.element(0, 0).re, 3.0);
        let i = b.index_of([2, 0, 0]).unwrap();
        assert_eq!(h.element(i, i).re, 7.0);
        let n = number_operator(&b);
        assert!(h.matrix().commutator(n.matrix()).max_abs() < 1e-14);
    }

    #[test]
    fn ground_to_two_quanta_element() {
        // ⟨0|p_x²|2⟩ = −√2 ħMω/2 → ⟨0|q^xx|2⟩ = −√2 ħω/(3Mc²)
        let p = PhysicalParams::new(2.0, 1.0, 0.1).unwrap();
        let omega = 3.0;
        let b = FockBasis::new(3).unwrap();
        let q = q_operator(&b, &p, omega);
        let g = b.index_of([0, 0, 0]).unwrap();
        let two = b.index_of([2, 0, 0]).unwrap();
        let want = -libm::sqrt(2.0) * omega / (3.0 * 2.0);
        let got = q.get(0, 0).element(g, two);
        assert!((got.re - want).abs() < 1e-15 && got.im.abs() < 1e-15);
        // the trace part puts half as much, with opposite sign, on yy and zz
        let yy = q.get(1, 1).element(g, two).re;
        assert!((yy + want / 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadrupole_is_traceless_and_hermitian() {
        let b = FockBasis::new(4).unwrap();
        let q = q_operator(&b, &natural(), 1.3);
        assert_eq!(q.trace().max_abs(), 0.0);
        for (_, op) in q.components() {
            assert!(op.matrix().hermiticity_defect() <= 1e-13);
        }
    }

    #[test]
    fn off_diagonal_quadrupole_acting_on_vacuum() {
        let b = FockBasis::new(3).unwrap();
        let q = q_operator(&b, &natural(), 1.0);
        let g = b.index_of([0, 0, 0]).unwrap();
        let target = b.index_of([1, 1, 0]).unwrap();
        for f in 0..b.dim() {
            let x = q.get(0, 1).element(f, g);
            if f == target {
                assert!(x.norm_sqr() > 0.0);
            } else {
                assert_eq!(x, ZERO);
            }
        }
    }

    #[test]
    fn normal_ordered_product_matches_naive_product_off_top_shell() {
        let p = natural();
        let b = FockBasis::new(4).unwrap();
        let px = momentum(&b, Axis::X, &p, 1.0).into_matrix();
        let naive = px.matmul(&px);
        let exact = momentum_product(&b, Axis::X, Axis::X, &p, 1.0).into_matrix();
        for i in b.indices_up_to(3) {
            for j in b.indices_up_to(3) {
                assert!((naive[(i, j)] - exact[(i, j)]).norm_sqr() < 1e-28);
            }
        }
        // naive product misses the a a† contribution on the top shell
        let top = b.index_of([4, 0, 0]).unwrap();
        assert!((naive[(top, top)] - exact[(top, top)]).norm_sqr() > 1e-6);
    }

    #[test]
    fn heisenberg_derivative_of_h_vanishes() {
        let b = FockBasis::new(2).unwrap();
        let h = hamiltonian_ho(&b, &natural(), 1.0);
        let d = heisenberg_derivative(&h, &h, 1.0).unwrap();
        assert_eq!(d.matrix().max_abs(), 0.0);
        let other = hamiltonian_ho(&FockBasis::new(3).unwrap(), &natural(), 1.0);
        assert_eq!(
            heisenberg_derivative(&h, &other, 1.0).unwrap_err(),
            Error::BasisMismatch { left: 2, right: 3 }
        );
    }

    #[test]
    fn hermitian_flag_is_validated() {
        let b = FockBasis::new(2).unwrap();
        let a = ladder(&b, Axis::Y).into_matrix();
        assert!(FockOperator::new(&b, a.clone(), true).is_err());
        assert!(FockOperator::new(&b, a, false).is_ok());
        assert!(FockOperator::new(&b, CMatrix::identity(3), false).is_err());
    }

    #[test]
    fn qdot_matrix_elements_follow_energy_differences() {
        // ⟨f|q̇|i⟩ = −i ω_if ⟨f|q|i⟩, ω_if = (E_i − E_f)/ħ
        let m = OscillatorModel::new(3, natural(), 1.7).unwrap();
        for ((k, l), q) in m.q.components() {
            let d = m.qdot.get(k, l);
            assert!(d.matrix().hermiticity_defect() < 1e-13);
            for f in 0..m.dim() {
                for i in 0..m.dim() {
                    let want = -I * m.transition_frequency(i, f) * q.element(f, i);
                    assert!((d.element(f, i) - want).norm_sqr() < 1e-26);
                }
            }
        }
    }
}
