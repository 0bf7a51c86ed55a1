//! Density-matrix generators, time stepping and transition rates.
//!
//! Superoperators act on column-stacked density matrices, so `ρ ↦ AρB` is the
//! matrix `Bᵀ ⊗ A` and entry `ρ[r, c]` sits at `r + c·dim`.
//!
//! Two generators are provided. [`liouvillian_master`] follows the master
//! equation term by term, including its operator order. [`lindblad_generator`]
//! is the extended Lindblad form with jump operators `L₁`, `L₂`; it is
//! completely positive but differs from the master equation by the
//! Hamiltonian-like term returned by [`lamb_shift_term`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::hilbert::{momentum_product, Axis, FockBasis, FockOperator, OscillatorModel, TensorOperator};
use crate::linalg::{expm, hermitian_eigenvalues, CMatrix, CsrMatrix, C64, I, ONE, ZERO};
use crate::params::PhysicalParams;
use crate::quadrature::SphereQuadrature;
use crate::tensor::polarization_tensors;

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    ncut: usize,
    mat: CMatrix,
}

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-12;
    pub const EIGEN_TOL: f64 = 1e-10;

    pub fn new(basis: &FockBasis, mat: CMatrix) -> Result<Self> {
        if mat.rows() != basis.dim() || mat.cols() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: mat.rows(),
            });
        }
        let herm = mat.hermiticity_defect();
        if !(herm <= Self::HERMITICITY_TOL) {
            return Err(Error::InvalidDensityMatrix(alloc::format!(
                "hermiticity defect {herm:e}"
            )));
        }
        let tr = mat.trace();
        if !((tr - ONE).norm_sqr() <= Self::TRACE_TOL * Self::TRACE_TOL) {
            return Err(Error::InvalidDensityMatrix(alloc::format!(
                "trace {} + {}i",
                tr.re,
                tr.im
            )));
        }
        let min = min_eigenvalue(&mat);
        if !(min >= -Self::EIGEN_TOL) {
            return Err(Error::InvalidDensityMatrix(alloc::format!(
                "smallest eigenvalue {min:e}"
            )));
        }
        Ok(DensityMatrix {
            ncut: basis.ncut(),
            mat,
        })
    }

    /// `|ψ⟩⟨ψ|` for a normalized (or normalizable) state vector.
    pub fn pure(basis: &FockBasis, psi: &[C64]) -> Result<Self> {
        if psi.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: psi.len(),
            });
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(invalid("psi", "must have positive finite norm"));
        }
        let mat = CMatrix::from_fn(psi.len(), psi.len(), |r, c| psi[r] * psi[c].conj() / norm2);
        Ok(DensityMatrix {
            ncut: basis.ncut(),
            mat,
        })
    }

    /// Projector onto the basis state at `index`.
    pub fn basis_state(basis: &FockBasis, index: usize) -> Result<Self> {
        if index >= basis.dim() {
            return Err(invalid("index", "outside the basis"));
        }
        let mut mat = CMatrix::zeros(basis.dim(), basis.dim());
        mat[(index, index)] = ONE;
        Ok(DensityMatrix {
            ncut: basis.ncut(),
            mat,
        })
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

    pub fn population(&self, i: usize) -> f64 {
        self.mat[(i, i)].re
    }

    pub fn purity(&self) -> f64 {
        purity(&self.mat)
    }
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// `tr ρ²` for Hermitian `ρ`.
pub fn purity(m: &CMatrix) -> f64 {
    m.as_slice().iter().map(|z| z.norm_sqr()).sum()
}

/// Linear map on `dim×dim` matrices stored as a dense `dim²×dim²` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    ncut: usize,
    dim: usize,
    mat: CMatrix,
}

impl Superoperator {
    pub fn zeros(basis: &FockBasis) -> Self {
        let d = basis.dim();
        Superoperator {
            ncut: basis.ncut(),
            dim: d,
            mat: CMatrix::zeros(d * d, d * d),
        }
    }

    /// Wrap an explicit `dim²×dim²` matrix.
    pub fn from_matrix(basis: &FockBasis, mat: CMatrix) -> Result<Self> {
        let d2 = basis.dim() * basis.dim();
        if mat.rows() != d2 || mat.cols() != d2 {
            return Err(Error::DimensionMismatch {
                expected: d2,
                found: mat.rows(),
            });
        }
        Ok(Superoperator {
            ncut: basis.ncut(),
            dim: basis.dim(),
            mat,
        })
    }

    pub fn ncut(&self) -> usize {
        self.ncut
    }

    /// Hilbert-space dimension; the matrix is `dim²×dim²`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.max_abs()
    }

    pub fn to_sparse(&self) -> CsrMatrix {
        self.mat.to_sparse()
    }

    /// Adds `ρ ↦ s·AρB`.
    pub fn add_sandwich(&mut self, s: C64, a: &CMatrix, b: &CMatrix) {
        let n = self.dim;
        let an = a.nonzeros();
        let bn = b.nonzeros();
        for &(r, rp, x) in &an {
            let sx = s * x;
            for &(cp, c, y) in &bn {
                self.mat[(r + c * n, rp + cp * n)] += sx * y;
            }
        }
    }

    /// Adds `ρ ↦ s·Aρ`.
    pub fn add_left(&mut self, s: C64, a: &CMatrix) {
        let n = self.dim;
        for (r, rp, x) in a.nonzeros() {
            for c in 0..n {
                self.mat[(r + c * n, rp + c * n)] += s * x;
            }
        }
    }

    /// Adds `ρ ↦ s·ρB`.
    pub fn add_right(&mut self, s: C64, b: &CMatrix) {
        let n = self.dim;
        for (cp, c, y) in b.nonzeros() {
            for r in 0..n {
                self.mat[(r + c * n, r + cp * n)] += s * y;
            }
        }
    }

    /// Adds `ρ ↦ s·[A, ρ]`.
    pub fn add_commutator(&mut self, s: C64, a: &CMatrix) {
        self.add_left(s, a);
        self.add_right(-s, a);
    }

    /// Adds `ρ ↦ s·[A, [A, ρ]] = s(A²ρ − 2AρA + ρA²)`.
    pub fn add_double_commutator(&mut self, s: C64, a: &CMatrix) {
        let a2 = a.matmul(a);
        self.add_left(s, &a2);
        self.add_sandwich(s * -2.0, a, a);
        self.add_right(s, &a2);
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.rows(),
            });
        }
        let out = self.mat.matvec(&rho.vectorize());
        Ok(CMatrix::unvectorize(&out, self.dim))
    }

    /// Largest `|Σ_r S[(r,r), col]|`: how far the generator is from keeping
    /// the trace fixed.
    pub fn trace_preservation_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for col in 0..n * n {
            let mut acc = ZERO;
            for r in 0..n {
                acc += self.mat[(r + r * n, col)];
            }
            worst = worst.max(acc.norm_sqr());
        }
        libm::sqrt(worst)
    }

    pub fn max_abs_diff(&self, other: &Superoperator) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.mat.max_abs_diff(&other.mat))
    }

    fn check_same(&self, other: &Superoperator) -> Result<()> {
        if self.ncut != other.ncut {
            Err(Error::BasisMismatch {
                left: self.ncut,
                right: other.ncut,
            })
        } else {
            Ok(())
        }
    }

    pub fn add(&self, other: &Superoperator) -> Result<Superoperator> {
        self.check_same(other)?;
        Ok(Superoperator {
            ncut: self.ncut,
            dim: self.dim,
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Superoperator) -> Result<Superoperator> {
        self.check_same(other)?;
        Ok(Superoperator {
            ncut: self.ncut,
            dim: self.dim,
            mat: &self.mat - &other.mat,
        })
    }
}

/// Which groups of master-equation terms to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MasterTerms {
    pub hamiltonian: bool,
    /// The `γ` terms.
    pub damping: bool,
    /// The `w` terms.
    pub diffusion: bool,
}

impl MasterTerms {
    pub const ALL: MasterTerms = MasterTerms {
        hamiltonian: true,
        damping: true,
        diffusion: true,
    };
    pub const DAMPING_ONLY: MasterTerms = MasterTerms {
        hamiltonian: true,
        damping: true,
        diffusion: false,
    };
    pub const DIFFUSION_ONLY: MasterTerms = MasterTerms {
        hamiltonian: true,
        damping: false,
        diffusion: true,
    };
}

fn basis_of(h: &FockOperator) -> Result<FockBasis> {
    FockBasis::new(h.ncut())
}

fn check_family(h: &FockOperator, t: &TensorOperator) -> Result<()> {
    if h.ncut() != t.ncut() {
        Err(Error::BasisMismatch {
            left: h.ncut(),
            right: t.ncut(),
        })
    } else {
        Ok(())
    }
}

/// The master equation generator with every term.
pub fn liouvillian_master(
    h: &FockOperator,
    q: &TensorOperator,
    qdot: &TensorOperator,
    params: &PhysicalParams,
) -> Result<Superoperator> {
    liouvillian_master_terms(h, q, qdot, params, MasterTerms::ALL)
}

/// ```text
/// −(i/ħ)[H,ρ] − i(γ/2)Σ(q q̇ ρ − ρ q̇ q + q ρ q̇ − q̇ ρ q)
///             − (w/2)Σ([q,[q,ρ]] + (β²ħ²/12)[q̇,[q̇,ρ]])
/// ```
/// summed over all nine `kl`. At zero temperature `w = 0` and the last line
/// is absent.
pub fn liouvillian_master_terms(
    h: &FockOperator,
    q: &TensorOperator,
    qdot: &TensorOperator,
    params: &PhysicalParams,
    terms: MasterTerms,
) -> Result<Superoperator> {
    check_family(h, q)?;
    check_family(h, qdot)?;
    let basis = basis_of(h)?;
    let mut s = Superoperator::zeros(&basis);
    if terms.hamiltonian {
        s.add_commutator(-I / params.hbar(), h.matrix());
    }
    let gamma = params.gamma();
    let w = params.w();
    let thermal = params.thermal_correction();
    for ((k, l), qkl) in q.components() {
        let m = TensorOperator::multiplicity(k, l);
        let qm = qkl.matrix();
        let dm = qdot.get(k, l).matrix();
        if terms.damping && gamma != 0.0 {
            let g = -I * (0.5 * gamma * m);
            s.add_left(g, &qm.matmul(dm));
            s.add_right(-g, &dm.matmul(qm));
            s.add_sandwich(g, qm, dm);
            s.add_sandwich(-g, dm, qm);
        }
        if terms.diffusion && w != 0.0 {
            s.add_double_commutator(C64::new(-0.5 * w * m, 0.0), qm);
            if thermal != 0.0 {
                s.add_double_commutator(C64::new(-0.5 * w * m * thermal, 0.0), dm);
            }
        }
    }
    Ok(s)
}

/// Jump-operator families `L₁ = (√w/2) q̂` and
/// `L₂ = (√(3w)/2)(q̂ − i(ħ/3k_BT) q̂̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladOps {
    pub l1: TensorOperator,
    pub l2: TensorOperator,
}

impl LindbladOps {
    /// Needs `T > 0`: `L₂` carries `1/T`.
    pub fn new(q: &TensorOperator, qdot: &TensorOperator, params: &PhysicalParams) -> Result<Self> {
        let beta = params.beta().ok_or(Error::ZeroTemperature)?;
        let w = params.w();
        let hbar = params.hbar();
        let s1 = 0.5 * libm::sqrt(w);
        let s2 = 0.5 * libm::sqrt(3.0 * w);
        let alpha = hbar * beta / 3.0;
        let l1 = q.map(|o| Ok(FockOperator::raw(o.ncut(), o.matrix().scale_real(s1), true)))?;
        let l2 = q.zip_with(qdot, |a, b| {
            a.check_same_basis(b)?;
            let mut m = a.matrix().clone();
            m.add_scaled(-I * alpha, b.matrix());
            Ok(FockOperator::raw(a.ncut(), m.scale_real(s2), false))
        })?;
        Ok(LindbladOps { l1, l2 })
    }
}

/// `−(i/ħ)[H,ρ] − Σ(½LL†ρ + ½ρLL† − L†ρL)` over both families and all `kl`.
pub fn lindblad_generator(
    h: &FockOperator,
    lops: &LindbladOps,
    params: &PhysicalParams,
) -> Result<Superoperator> {
    check_family(h, &lops.l1)?;
    check_family(h, &lops.l2)?;
    let basis = basis_of(h)?;
    let mut s = Superoperator::zeros(&basis);
    s.add_commutator(-I / params.hbar(), h.matrix());
    for family in [&lops.l1, &lops.l2] {
        for ((k, l), op) in family.components() {
            let m = TensorOperator::multiplicity(k, l);
            let lm = op.matrix();
            let ld = lm.adjoint();
            let lld = lm.matmul(&ld);
            s.add_left(C64::new(-0.5 * m, 0.0), &lld);
            s.add_right(C64::new(-0.5 * m, 0.0), &lld);
            s.add_sandwich(C64::new(m, 0.0), &ld, lm);
        }
    }
    Ok(s)
}

/// `ρ ↦ −(iγ/4) Σ_kl [{q̂^kl, q̂̇^kl}, ρ]`, the difference between the master
/// equation and the Lindblad form.
pub fn lamb_shift_term(
    q: &TensorOperator,
    qdot: &TensorOperator,
    params: &PhysicalParams,
) -> Result<Superoperator> {
    if q.ncut() != qdot.ncut() {
        return Err(Error::BasisMismatch {
            left: q.ncut(),
            right: qdot.ncut(),
        });
    }
    let basis = FockBasis::new(q.ncut())?;
    let mut s = Superoperator::zeros(&basis);
    let mut anti = CMatrix::zeros(basis.dim(), basis.dim());
    for ((k, l), qkl) in q.components() {
        let m = TensorOperator::multiplicity(k, l);
        anti.add_scaled(C64::new(m, 0.0), &qkl.matrix().anticommutator(qdot.get(k, l).matrix()));
    }
    s.add_commutator(-I * (0.25 * params.gamma()), &anti);
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    /// Exact propagator `exp(L·dt)` by scaling and squaring, applied per step.
    Expm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    pub method: Method,
    /// Record every this many steps (the initial state is always recorded).
    pub sample_every: usize,
}

impl EvolveOptions {
    pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;

    pub fn new(t_final: f64, dt: f64) -> Self {
        EvolveOptions {
            t_final,
            dt,
            method: Method::Rk4,
            sample_every: 1,
        }
    }

    /// Default step `0.02/(ω + w + γω)`.
    pub fn default_dt(params: &PhysicalParams, omega: f64) -> f64 {
        0.02 / (omega + params.w() + params.gamma() * omega)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
}

fn vec_trace(v: &[C64], n: usize) -> C64 {
    (0..n).map(|r| v[r + r * n]).sum()
}

/// Integrate `dρ/dt = L ρ` from `rho0` up to `t_final`.
///
/// The step count is `ceil(t_final/dt)` with the step shrunk to land on
/// `t_final` exactly. Aborts when the trace drifts by more than `1e-8`.
pub fn evolve(rho0: &CMatrix, gen: &Superoperator, opts: &EvolveOptions) -> Result<Trajectory> {
    let n = gen.dim();
    if rho0.rows() != n || rho0.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.rows(),
        });
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(invalid("dt", "must be positive and finite"));
    }
    if !(opts.t_final >= 0.0 && opts.t_final.is_finite()) {
        return Err(invalid("t_final", "must be non-negative and finite"));
    }
    if opts.sample_every == 0 {
        return Err(invalid("sample_every", "must be at least 1"));
    }
    let steps = libm::ceil(opts.t_final / opts.dt - 1e-9).max(0.0) as usize;
    let dt = if steps == 0 { 0.0 } else { opts.t_final / steps as f64 };

    let mut v = rho0.vectorize();
    let tr0 = vec_trace(&v, n);
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];

    let mut stepper: Stepper = match opts.method {
        Method::Rk4 => Stepper::rk4(gen.to_sparse(), dt),
        Method::Expm => Stepper::Exact(expm(&gen.matrix().scale_real(dt))),
    };
    for step in 1..=steps {
        stepper.step(&mut v);
        let t = dt * step as f64;
        let drift = (vec_trace(&v, n) - tr0).norm_sqr();
        if !(drift <= EvolveOptions::TRACE_DRIFT_LIMIT * EvolveOptions::TRACE_DRIFT_LIMIT) {
            if v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite { t });
            }
            return Err(Error::TraceDrift {
                t,
                drift: libm::sqrt(drift),
            });
        }
        if step % opts.sample_every == 0 || step == steps {
            times.push(t);
            states.push(CMatrix::unvectorize(&v, n));
        }
    }
    Ok(Trajectory { times, states })
}

enum Stepper {
    Rk4 {
        op: CsrMatrix,
        dt: f64,
        k: [Vec<C64>; 4],
        tmp: Vec<C64>,
    },
    Exact(CMatrix),
}

impl Stepper {
    fn rk4(op: CsrMatrix, dt: f64) -> Self {
        let n = op.rows();
        Stepper::Rk4 {
            op,
            dt,
            k: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
            tmp: vec![ZERO; n],
        }
    }

    fn step(&mut self, v: &mut Vec<C64>) {
        match self {
            Stepper::Exact(p) => *v = p.matvec(v),
            Stepper::Rk4 { op, dt, k, tmp } => {
                let h = *dt;
                op.matvec_into(v, &mut k[0]);
                for ((t, x), d) in tmp.iter_mut().zip(v.iter()).zip(&k[0]) {
                    *t = x + d * (0.5 * h);
                }
                op.matvec_into(tmp, &mut k[1]);
                for ((t, x), d) in tmp.iter_mut().zip(v.iter()).zip(&k[1]) {
                    *t = x + d * (0.5 * h);
                }
                op.matvec_into(tmp, &mut k[2]);
                for ((t, x), d) in tmp.iter_mut().zip(v.iter()).zip(&k[2]) {
                    *t = x + d * h;
                }
                op.matvec_into(tmp, &mut k[3]);
                for (i, x) in v.iter_mut().enumerate() {
                    *x += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (h / 6.0);
                }
            }
        }
    }
}

/// `d⟨i|ρ|i⟩/dt` at `t = 0` for `ρ(0) = |i⟩⟨i|`.
pub fn diagonal_rate(index: usize, gen: &Superoperator) -> Result<f64> {
    let n = gen.dim();
    if index >= n {
        return Err(invalid("index", "outside the basis"));
    }
    let k = index + index * n;
    Ok(gen.matrix()[(k, k)].re)
}

/// `Σ_kl |⟨f|T^kl|i⟩|²` with the nine-term multiplicity.
fn contracted_sq(t: &TensorOperator, f: usize, i: usize) -> f64 {
    t.components()
        .map(|((k, l), op)| TensorOperator::multiplicity(k, l) * op.element(f, i).norm_sqr())
        .sum()
}

fn state_index(model: &OscillatorModel, state: [u32; 3]) -> Result<usize> {
    model.basis.index_of(state)
}

fn require_interior(model: &OscillatorModel, i: usize) -> Result<()> {
    if model.basis.total_quanta(i) as usize + 2 > model.basis.ncut() {
        Err(invalid(
            "state",
            "needs two shells of headroom below the truncation for upward transitions",
        ))
    } else {
        Ok(())
    }
}

/// `Γ = 2γ Σ_{f<i} ω_if Σ_kl |⟨f|q̂^kl|i⟩|²`.
pub fn spontaneous_rate(model: &OscillatorModel, state: [u32; 3]) -> Result<f64> {
    let i = state_index(model, state)?;
    let mut psi = vec![ZERO; model.dim()];
    psi[i] = ONE;
    spontaneous_rate_vector(model, &psi)
}

/// [`spontaneous_rate`] for a normalized energy eigenvector, which may be any
/// superposition within one degenerate shell.
pub fn spontaneous_rate_vector(model: &OscillatorModel, psi: &[C64]) -> Result<f64> {
    let shell = single_shell(model, psi)?;
    let ei = model.energy(first_nonzero(psi));
    let hbar = model.params.hbar();
    let mut sum = 0.0;
    for f in 0..model.dim() {
        if model.basis.total_quanta(f) >= shell {
            continue;
        }
        let omega_if = (ei - model.energy(f)) / hbar;
        for ((k, l), op) in model.q.components() {
            let amp: C64 = psi.iter().enumerate().map(|(j, a)| op.element(f, j) * a).sum();
            sum += TensorOperator::multiplicity(k, l) * omega_if * amp.norm_sqr();
        }
    }
    Ok(2.0 * model.params.gamma() * sum)
}

fn first_nonzero(psi: &[C64]) -> usize {
    psi.iter().position(|z| z.norm_sqr() > 0.0).unwrap_or(0)
}

fn single_shell(model: &OscillatorModel, psi: &[C64]) -> Result<u32> {
    if psi.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: psi.len(),
        });
    }
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if !((norm2 - 1.0).abs() <= 1e-12) {
        return Err(invalid("psi", "must be normalized"));
    }
    let shell = model.basis.total_quanta(first_nonzero(psi));
    if psi
        .iter()
        .enumerate()
        .any(|(j, z)| z.norm_sqr() > 0.0 && model.basis.total_quanta(j) != shell)
    {
        return Err(invalid("psi", "must lie in a single energy shell"));
    }
    Ok(shell)
}

/// `(ε²/8π²ħ)(1/c²M²) ∫dΩ Σ_h Σ_{f<i} ω_if |ε^kl(k̂,h)⟨f|p̂_k p̂_l|i⟩|²`,
/// with the angular integral done on `quad`.
pub fn golden_rule_rate(
    model: &OscillatorModel,
    state: [u32; 3],
    quad: &SphereQuadrature,
) -> Result<f64> {
    quad.require_degree(4)?;
    let i = state_index(model, state)?;
    let pp = momentum_products(model);
    let p = &model.params;
    let mut integral = 0.0;
    for f in lower_states(model, i) {
        let omega_if = model.transition_frequency(i, f);
        let elems: [[f64; 3]; 3] = core::array::from_fn(|k| core::array::from_fn(|l| pp[k][l].element(f, i).re));
        let mut ang = 0.0;
        for (khat, wt) in quad.points() {
            let n = crate::tensor::norm(khat);
            let khat = [khat[0] / n, khat[1] / n, khat[2] / n];
            for eps in polarization_tensors(&khat)? {
                let mut amp = ZERO;
                for k in 0..3 {
                    for l in 0..3 {
                        amp += eps[k][l] * elems[k][l];
                    }
                }
                ang += wt * amp.norm_sqr();
            }
        }
        integral += omega_if * ang;
    }
    let c = p.c();
    let m = p.mass();
    Ok(p.eps2() / (8.0 * PI * PI * p.hbar()) / (c * c * m * m) * integral)
}

/// Closed form after the angular integral:
/// `(ε²/2πħ)(2/5c²M²) Σ_{f<i} ω_if Σ_kl |⟨f|(p̂_k p̂_l)_traceless|i⟩|²`.
pub fn golden_rule_closed_form(model: &OscillatorModel, state: [u32; 3]) -> Result<f64> {
    let i = state_index(model, state)?;
    let pp = momentum_products(model);
    let p = &model.params;
    let mut sum = 0.0;
    for f in lower_states(model, i) {
        let omega_if = model.transition_frequency(i, f);
        let e: [[f64; 3]; 3] = core::array::from_fn(|k| core::array::from_fn(|l| pp[k][l].element(f, i).re));
        let tr = (e[0][0] + e[1][1] + e[2][2]) / 3.0;
        let mut s = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                let x = e[k][l] - if k == l { tr } else { 0.0 };
                s += x * x;
            }
        }
        sum += omega_if * s;
    }
    let c = p.c();
    let m = p.mass();
    Ok(p.eps2() / (2.0 * PI * p.hbar()) * 2.0 / (5.0 * c * c * m * m) * sum)
}

fn momentum_products(model: &OscillatorModel) -> [[FockOperator; 3]; 3] {
    core::array::from_fn(|k| {
        core::array::from_fn(|l| {
            momentum_product(
                &model.basis,
                Axis::from_index(k),
                Axis::from_index(l),
                &model.params,
                model.omega,
            )
        })
    })
}

fn lower_states(model: &OscillatorModel, i: usize) -> impl Iterator<Item = usize> + '_ {
    let shell = model.basis.total_quanta(i);
    (0..model.dim()).filter(move |&f| model.basis.total_quanta(f) < shell)
}

/// Population rate from the `γ` terms alone,
/// `∂_t ρ_i = −γ Σ_{f≠i} ω_if Σ_kl |⟨f|q̂^kl|i⟩|²`.
///
/// Includes upward transitions, so `i` must sit at least two shells below
/// the truncation.
pub fn damping_population_rate(model: &OscillatorModel, state: [u32; 3]) -> Result<f64> {
    let i = state_index(model, state)?;
    require_interior(model, i)?;
    let mut sum = 0.0;
    for f in 0..model.dim() {
        if f == i {
            continue;
        }
        sum += model.transition_frequency(i, f) * contracted_sq(&model.q, f, i);
    }
    Ok(-model.params.gamma() * sum)
}

/// Thermally induced depletion rate
/// `w{Σ_f |q_fi|² − |q_ii|² + (β²ħ²/12)[Σ_f |q̇_fi|² − |q̇_ii|²]}`, summed over `kl`.
///
/// Under the `w` terms alone `∂_t ρ_i` equals minus this value.
pub fn induced_rate(model: &OscillatorModel, state: [u32; 3]) -> Result<f64> {
    let i = state_index(model, state)?;
    require_interior(model, i)?;
    let w = model.params.w();
    if w == 0.0 {
        return Ok(0.0);
    }
    let thermal = model.params.thermal_correction();
    let mut q_sum = 0.0;
    let mut d_sum = 0.0;
    for f in 0..model.dim() {
        if f == i {
            continue;
        }
        q_sum += contracted_sq(&model.q, f, i);
        d_sum += contracted_sq(&model.qdot, f, i);
    }
    Ok(w * (q_sum + thermal * d_sum))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(ncut: usize, t: f64) -> OscillatorModel {
        let p = PhysicalParams::new(1.0, t, 1.0).unwrap().with_gamma(0.05).unwrap();
        OscillatorModel::new(ncut, p, 1.0).unwrap()
    }

    fn generator(m: &OscillatorModel, terms: MasterTerms) -> Superoperator {
        liouvillian_master_terms(&m.hamiltonian, &m.q, &m.qdot, &m.params, terms).unwrap()
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let b = FockBasis::new(2).unwrap();
        let n = b.dim();
        let a = CMatrix::from_fn(n, n, |r, c| C64::new((r * 3 + c) as f64, (r as f64) - (c as f64)));
        let bm = CMatrix::from_fn(n, n, |r, c| C64::new(1.0 / (1.0 + (r + 2 * c) as f64), 0.5));
        let rho = CMatrix::from_fn(n, n, |r, c| C64::new((r + c) as f64, (r * c) as f64));
        let mut s = Superoperator::zeros(&b);
        s.add_sandwich(C64::new(0.0, 2.0), &a, &bm);
        let want = a.matmul(&rho).matmul(&bm).scale(C64::new(0.0, 2.0));
        assert!(s.apply(&rho).unwrap().max_abs_diff(&want) < 1e-10 * want.max_abs());
        let mut l = Superoperator::zeros(&b);
        l.add_left(ONE, &a);
        l.add_right(ONE, &bm);
        let want = &a.matmul(&rho) + &rho.matmul(&bm);
        assert!(l.apply(&rho).unwrap().max_abs_diff(&want) < 1e-12 * want.max_abs());
    }

    #[test]
    fn hamiltonian_only_generator_keeps_eigenstates() {
        let p = PhysicalParams::new(1.0, 0.0, 0.0).unwrap();
        let m = OscillatorModel::new(2, p, 1.0).unwrap();
        let gen = liouvillian_master(&m.hamiltonian, &m.q, &m.qdot, &m.params).unwrap();
        let rho = DensityMatrix::basis_state(&m.basis, 4).unwrap();
        assert_eq!(gen.apply(rho.matrix()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn diffusion_terms_annihilate_identity() {
        let m = model(2, 2.0);
        let gen = generator(&m, MasterTerms {
            hamiltonian: false,
            damping: false,
            diffusion: true,
        });
        let id = CMatrix::identity(m.dim());
        assert!(gen.apply(&id).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn both_generators_preserve_trace() {
        let m = model(3, 1.5);
        let master = liouvillian_master(&m.hamiltonian, &m.q, &m.qdot, &m.params).unwrap();
        let lops = LindbladOps::new(&m.q, &m.qdot, &m.params).unwrap();
        let lind = lindblad_generator(&m.hamiltonian, &lops, &m.params).unwrap();
        assert!(master.trace_preservation_defect() < 1e-12);
        assert!(lind.trace_preservation_defect() < 1e-12);
    }

    #[test]
    fn lindblad_needs_temperature() {
        let m = model(2, 0.0);
        assert_eq!(LindbladOps::new(&m.q, &m.qdot, &m.params), Err(Error::ZeroTemperature));
        // the master equation just loses its w terms
        assert!(liouvillian_master(&m.hamiltonian, &m.q, &m.qdot, &m.params).is_ok());
    }

    #[test]
    fn l2_antihermitian_part_is_qdot() {
        let m = model(2, 2.0);
        let lops = LindbladOps::new(&m.q, &m.qdot, &m.params).unwrap();
        let w = m.params.w();
        let alpha = m.params.hbar() / (3.0 * m.params.kb() * m.params.temperature());
        for ((k, l), op) in lops.l2.components() {
            let diff = op.matrix() - &op.matrix().adjoint();
            let want = m.qdot.get(k, l).matrix().scale(-I * (2.0 * alpha * 0.5 * libm::sqrt(3.0 * w)));
            assert!(diff.max_abs_diff(&want) < 1e-14);
            assert!(lops.l1.get(k, l).matrix().hermiticity_defect() == 0.0);
        }
    }

    #[test]
    fn selection_rules() {
        let m = model(4, 1.0);
        for s in [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]] {
            assert_eq!(spontaneous_rate(&m, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn spontaneous_rate_two_quanta() {
        // Σ_kl |⟨0|q|2,0,0⟩|² = ⅓ (ħω/Mc²)², ω_if = 2ω
        let m = model(4, 1.0);
        let g = spontaneous_rate(&m, [2, 0, 0]).unwrap();
        let want = 4.0 / 3.0 * m.params.gamma();
        assert!((g / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn golden_rule_agrees_with_sum_formula() {
        let m = model(4, 1.0);
        let quad = SphereQuadrature::new(8);
        for s in [[2, 0, 0], [1, 1, 0], [0, 1, 1]] {
            let g = spontaneous_rate(&m, s).unwrap();
            let gr = golden_rule_rate(&m, s, &quad).unwrap();
            let cf = golden_rule_closed_form(&m, s).unwrap();
            assert!((gr / g - 1.0).abs() < 1e-9, "{s:?}");
            assert!((gr / cf - 1.0).abs() < 1e-10, "{s:?}");
        }
        assert_eq!(golden_rule_rate(&m, [0, 0, 0], &quad).unwrap(), 0.0);
        assert!(golden_rule_rate(&m, [2, 0, 0], &SphereQuadrature::new(3)).is_err());
    }

    #[test]
    fn rotated_state_has_same_rate() {
        // (n·a†)²|0⟩/√2 for n = (1,1,0)/√2
        let m = model(4, 1.0);
        let mut psi = vec![ZERO; m.dim()];
        psi[m.basis.index_of([2, 0, 0]).unwrap()] = C64::new(0.5, 0.0);
        psi[m.basis.index_of([0, 2, 0]).unwrap()] = C64::new(0.5, 0.0);
        psi[m.basis.index_of([1, 1, 0]).unwrap()] = C64::new(libm::sqrt(0.5), 0.0);
        let g = spontaneous_rate_vector(&m, &psi).unwrap();
        let g0 = spontaneous_rate(&m, [2, 0, 0]).unwrap();
        assert!((g / g0 - 1.0).abs() < 1e-12);
        psi[0] = C64::new(0.1, 0.0);
        assert!(spontaneous_rate_vector(&m, &psi).is_err());
    }

    #[test]
    fn diagonal_rates_match_matrix_element_sums() {
        let m = model(4, 2.0);
        for s in [[0, 0, 0], [1, 0, 0], [2, 0, 0], [1, 1, 0]] {
            let i = m.basis.index_of(s).unwrap();
            let d = diagonal_rate(i, &generator(&m, MasterTerms::DAMPING_ONLY)).unwrap();
            let e = damping_population_rate(&m, s).unwrap();
            assert!((d - e).abs() <= 1e-10 * e.abs().max(1e-3), "{s:?}: {d} {e}");
            let dw = diagonal_rate(i, &generator(&m, MasterTerms::DIFFUSION_ONLY)).unwrap();
            let ind = induced_rate(&m, s).unwrap();
            assert!((dw + ind).abs() <= 1e-10 * ind.abs(), "{s:?}: {dw} {ind}");
            let full = diagonal_rate(i, &generator(&m, MasterTerms::ALL)).unwrap();
            assert!((full - (e - ind)).abs() <= 1e-10 * ind.abs());
        }
        let g = damping_population_rate(&m, [0, 0, 0]).unwrap();
        assert!(g > 0.0);
        assert!(induced_rate(&m, [3, 0, 0]).is_err());
    }

    #[test]
    fn expm_matches_rk4_on_small_system() {
        let m = model(2, 1.0);
        let gen = liouvillian_master(&m.hamiltonian, &m.q, &m.qdot, &m.params).unwrap();
        let t = 1.0 / gen.matrix().norm_one();
        let rho = DensityMatrix::basis_state(&m.basis, 5).unwrap();
        let mut opts = EvolveOptions::new(t, t / 50.0);
        let rk = evolve(rho.matrix(), &gen, &opts).unwrap();
        opts.method = Method::Expm;
        opts.dt = t;
        let ex = evolve(rho.matrix(), &gen, &opts).unwrap();
        let a = rk.states.last().unwrap();
        let b = ex.states.last().unwrap();
        assert!(a.max_abs_diff(b) <= 1e-8);
    }

    #[test]
    fn zero_generator_leaves_state_unchanged() {
        let b = FockBasis::new(2).unwrap();
        let gen = Superoperator::zeros(&b);
        let rho = DensityMatrix::basis_state(&b, 3).unwrap();
        let tr = evolve(rho.matrix(), &gen, &EvolveOptions::new(1.0, 0.1)).unwrap();
        assert_eq!(tr.states.len(), 11);
        assert!(tr.states.iter().all(|s| s == rho.matrix()));
        assert!((tr.times[10] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unstable_step_is_reported() {
        let b = FockBasis::new(2).unwrap();
        let mut gen = Superoperator::zeros(&b);
        // leaks trace: ρ ↦ −ρ
        gen.add_left(-ONE, &CMatrix::identity(b.dim()));
        let rho = DensityMatrix::basis_state(&b, 0).unwrap();
        let err = evolve(rho.matrix(), &gen, &EvolveOptions::new(1.0, 0.1)).unwrap_err();
        assert!(matches!(err, Error::TraceDrift { .. }));
    }

    #[test]
    fn density_matrix_validation() {
        let b = FockBasis::new(2).unwrap();
        let n = b.dim();
        assert!(DensityMatrix::new(&b, CMatrix::identity(n)).is_err());
        let mixed = CMatrix::identity(n).scale_real(1.0 / n as f64);
        assert!(DensityMatrix::new(&b, mixed).is_ok());
        let mut bad = CMatrix::zeros(n, n);
        bad[(0, 0)] = C64::new(1.5, 0.0);
        bad[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(&b, bad).is_err());
        let mut nonherm = CMatrix::zeros(n, n);
        nonherm[(0, 0)] = ONE;
        nonherm[(0, 1)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix::new(&b, nonherm).is_err());
    }
}

