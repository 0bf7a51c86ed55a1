//! 3-vectors, rank-2 and rank-4 spatial tensors.
//!
//! Every polarization object here is a purely spatial 3-tensor in radiation
//! gauge. The rank-4 projector is stored densely as a `3×3×3×3` array and
//! contracted over index pairs, `(Λ·Λ)_{ij,mn} = Σ_kl Λ_{ij,kl} Λ_{kl,mn}`.

use core::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];
pub type CMat3 = [[Complex64; 3]; 3];

/// Maximum allowed deviation of `|k̂|` from one.
pub const UNIT_TOLERANCE: f64 = 1e-12;

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `a + s·b`
#[inline]
pub fn axpy(a: &Vec3, s: f64, b: &Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i] * b[j];
        }
    }
    out
}

pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((a[i][j] - b[i][j]).abs());
        }
    }
    worst
}

fn check_unit(khat: &Vec3) -> Result<()> {
    let n = norm(khat);
    if n == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotUnitVector { norm: n });
    }
    Ok(())
}

/// Transverse projector `δ_ij − k_i k_j` for a unit direction.
pub fn transverse_projector(khat: &Vec3) -> Result<Mat3> {
    check_unit(khat)?;
    let mut out = IDENTITY3;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] -= khat[i] * khat[j];
        }
    }
    Ok(out)
}

/// Orthonormal transverse pair `(e₁, e₂)` with `e₁ × e₂ = k̂`.
///
/// `e₁` is built from the coordinate axis least aligned with `k̂` (the first
/// one on ties), so `k̂ = ẑ` gives `(x̂, ŷ)`.
pub fn transverse_frame(khat: &Vec3) -> Result<(Vec3, Vec3)> {
    check_unit(khat)?;
    let mut axis = 0;
    for i in 1..3 {
        if khat[i].abs() < khat[axis].abs() {
            axis = i;
        }
    }
    let mut reference = [0.0; 3];
    reference[axis] = 1.0;
    let e1 = axpy(&reference, -dot(&reference, khat), khat);
    let e1 = scale(&e1, 1.0 / norm(&e1));
    let e2 = cross(khat, &e1);
    Ok((e1, e2))
}

/// Helicity `+2` and `−2` polarization tensors `(e₁ ± i e₂)⊗(e₁ ± i e₂)/2`.
pub fn polarization_tensors(khat: &Vec3) -> Result<[CMat3; 2]> {
    let (e1, e2) = transverse_frame(khat)?;
    let mut out = [[[Complex64::new(0.0, 0.0); 3]; 3]; 2];
    for (h, sign) in [1.0, -1.0].into_iter().enumerate() {
        let m: [Complex64; 3] = core::array::from_fn(|i| Complex64::new(e1[i], sign * e2[i]));
        for i in 0..3 {
            for j in 0..3 {
                out[h][i][j] = m[i] * m[j] * 0.5;
            }
        }
    }
    Ok(out)
}

/// Rank-4 tensor `Λ_{ij,kl}` acting on symmetric 3×3 tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolProjector(pub [[[[f64; 3]; 3]; 3]; 3]);

impl Index<(usize, usize, usize, usize)> for PolProjector {
    type Output = f64;
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &f64 {
        &self.0[i][j][k][l]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for PolProjector {
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.0[i][j][k][l]
    }
}

impl PolProjector {
    pub fn zero() -> Self {
        PolProjector([[[[0.0; 3]; 3]; 3]; 3])
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        out.0[i][j][k][l] = f(i, j, k, l);
                    }
                }
            }
        }
        out
    }

    /// Pair contraction `Σ_kl self_{ij,kl} other_{kl,mn}`.
    pub fn compose(&self, other: &PolProjector) -> PolProjector {
        PolProjector::from_fn(|i, j, m, n| {
            let mut acc = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    acc += self.0[i][j][k][l] * other.0[k][l][m][n];
                }
            }
            acc
        })
    }

    /// `(Λ t)_ij = Σ_kl Λ_{ij,kl} t_kl`.
    pub fn apply(&self, t: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        acc += self.0[i][j][k][l] * t[k][l];
                    }
                }
                out[i][j] = acc;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &PolProjector) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        worst = worst.max((self.0[i][j][k][l] - other.0[i][j][k][l]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest violation of the three index symmetries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = self.0[i][j][k][l];
                        worst = worst
                            .max((v - self.0[j][i][k][l]).abs())
                            .max((v - self.0[i][j][l][k]).abs())
                            .max((v - self.0[k][l][i][j]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest `|Σ_i Λ_{ii,kl}|` or `|Σ_k Λ_{ij,kk}|`.
    pub fn trace_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..3 {
            for b in 0..3 {
                let left: f64 = (0..3).map(|i| self.0[i][i][a][b]).sum();
                let right: f64 = (0..3).map(|k| self.0[a][b][k][k]).sum();
                worst = worst.max(left.abs()).max(right.abs());
            }
        }
        worst
    }
}

/// `Λ_{ij,kl}(k̂) = ½[Λ_ik Λ_jl + Λ_il Λ_jk − Λ_ij Λ_kl]`.
pub fn pol_projector(khat: &Vec3) -> Result<PolProjector> {
    let t = transverse_projector(khat)?;
    Ok(PolProjector::from_fn(|i, j, k, l| {
        0.5 * (t[i][k] * t[j][l] + t[i][l] * t[j][k] - t[i][j] * t[k][l])
    }))
}

/// Closed-form sphere average `(2/5)[½(δ_kmδ_ln + δ_knδ_lm) − ⅓δ_klδ_mn]`.
pub fn analytic_angular_average() -> PolProjector {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    PolProjector::from_fn(|k, l, m, n| {
        0.4 * (0.5 * (d(k, m) * d(l, n) + d(k, n) * d(l, m)) - d(k, l) * d(m, n) / 3.0)
    })
}

/// Traceless symmetric 3×3 tensor, stored in full.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracelessSymTensor3(Mat3);

impl TracelessSymTensor3 {
    /// Symmetrize and remove the trace of an arbitrary matrix.
    pub fn project(m: &Mat3) -> Self {
        let mut out = [[0.0; 3]; 3];
        let tr = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = 0.5 * (m[i][j] + m[j][i]);
            }
            out[i][i] -= tr;
        }
        TracelessSymTensor3(out)
    }

    pub fn as_mat(&self) -> &Mat3 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// `Σ_kl t_kl²`.
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum()
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.0[k][l]
    }
}

/// `q^kl = (v_k v_l − ⅓δ_kl v²)/c²`.
pub fn q_tensor_classical(v: &Vec3, c: f64) -> TracelessSymTensor3 {
    let c2 = c * c;
    let third = dot(v, v) / 3.0;
    let mut out = outer(v, v);
    for (i, row) in out.iter_mut().enumerate() {
        row[i] -= third;
        for x in row.iter_mut() {
            *x /= c2;
        }
    }
    TracelessSymTensor3(out)
}

/// Exact time derivative of [`q_tensor_classical`] along velocity `v` with
/// acceleration `a`: `(a_k v_l + v_k a_l − ⅔δ_kl a·v)/c²`.
pub fn q_tensor_rate(v: &Vec3, a: &Vec3, c: f64) -> TracelessSymTensor3 {
    let c2 = c * c;
    let av = 2.0 * dot(a, v) / 3.0;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (a[i] * v[j] + v[i] * a[j]) / c2;
        }
        out[i][i] -= av / c2;
    }
    TracelessSymTensor3(out)
}

/// `Ω_kl = v_k v_l + 3 v² δ_kl`.
pub fn omega_matrix(v: &Vec3) -> Mat3 {
    let v2 = dot(v, v);
    let mut out = outer(v, v);
    for (i, row) in out.iter_mut().enumerate() {
        row[i] += 3.0 * v2;
    }
    out
}

/// Symmetric PSD square root of [`omega_matrix`].
///
/// `Ω` has eigenvalue `4v²` along `v̂` and `3v²` on the transverse plane, so
/// `Ω^{1/2} = √3|v|(I − v̂v̂ᵀ) + 2|v| v̂v̂ᵀ`.
pub fn omega_sqrt(v: &Vec3) -> Mat3 {
    let speed = norm(v);
    if speed == 0.0 {
        return [[0.0; 3]; 3];
    }
    let sqrt3 = libm::sqrt(3.0);
    let transverse = sqrt3 * speed;
    let longitudinal = (2.0 - sqrt3) / speed;
    let mut out = outer(v, v);
    for (i, row) in out.iter_mut().enumerate() {
        for x in row.iter_mut() {
            *x *= longitudinal;
        }
        row[i] += transverse;
    }
    out
}
