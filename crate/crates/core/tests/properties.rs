use gravdamp_core::hilbert::OscillatorModel;
use gravdamp_core::langevin::{radiated_power, radiated_power_quadrupole, Potential};
use gravdamp_core::linalg::{symmetric_eigen, CMatrix, C64};
use gravdamp_core::master::{lindblad_generator, liouvillian_master, LindbladOps};
use gravdamp_core::tensor::{
    mat_mul, max_abs_diff, omega_matrix, omega_sqrt, pol_projector, polarization_tensors, Vec3,
};
use gravdamp_core::{PhysicalParams, Units};
use proptest::prelude::*;

fn direction() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("not too short", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|v| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        })
}

fn vector(scale: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-scale..scale)
}

proptest! {
    #[test]
    fn projector_is_idempotent_and_traceless(k in direction()) {
        let p = pol_projector(&k).unwrap();
        prop_assert!(p.compose(&p).max_abs_diff(&p) <= 1e-12);
        prop_assert!(p.symmetry_defect() <= 1e-15);
        prop_assert!(p.trace_defect() <= 1e-15);
    }

    #[test]
    fn helicity_tensors_complete_the_projector(k in direction()) {
        let p = pol_projector(&k).unwrap();
        let eps = polarization_tensors(&k).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for m in 0..3 {
                    for n in 0..3 {
                        let s: C64 = eps.iter().map(|e| e[i][j] * e[m][n].conj()).sum();
                        prop_assert!((s.re - p[(i, j, m, n)]).abs() <= 1e-12);
                        prop_assert!(s.im.abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn radiated_power_tensor_identity(v in vector(0.5), a in vector(3.0)) {
        let units = Units { hbar: 1.0, c: 2.0, kb: 1.0 };
        let p = PhysicalParams::with_units(1.0, 1.0, 0.3, units).unwrap();
        let p1 = radiated_power(&v, &a, &p);
        let p2 = radiated_power_quadrupole(&v, &a, &p);
        prop_assert!((p1 - p2).abs() <= 1e-12 * p1.abs().max(1e-300));
    }

    #[test]
    fn omega_root_squares_back_and_matches_eigen_root(v in vector(2.0)) {
        let s = omega_sqrt(&v);
        let om = omega_matrix(&v);
        let scale = om.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        prop_assert!(max_abs_diff(&mat_mul(&s, &s), &om) <= 1e-13 * scale);
        // oracle: square root through the Jacobi eigendecomposition
        let flat: Vec<f64> = om.iter().flatten().copied().collect();
        let (vals, vecs) = symmetric_eigen(&flat, 3);
        let mut root = [[0.0; 3]; 3];
        for (e, lam) in vals.iter().enumerate() {
            let r = lam.max(0.0).sqrt();
            for i in 0..3 {
                for j in 0..3 {
                    root[i][j] += r * vecs[i * 3 + e] * vecs[j * 3 + e];
                }
            }
        }
        prop_assert!(max_abs_diff(&root, &s) <= 1e-12 * scale.sqrt().max(1e-12));
    }

    #[test]
    fn potential_gradients_match_finite_differences(x in vector(2.0), which in 0usize..3) {
        let pot = match which {
            0 => Potential::Harmonic { omega: 1.3 },
            1 => Potential::KeplerSoftened { mu: 2.0, softening: 0.5 },
            _ => Potential::Polynomial { terms: vec![(0.7, [4, 0, 0]), (-0.2, [1, 1, 2]), (1.0, [0, 2, 0])] },
        };
        let g = pot.gradient(&x, 1.7);
        let gnorm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        let h = 1e-5;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (pot.value(&xp, 1.7) - pot.value(&xm, 1.7)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * gnorm.max(1.0));
        }
    }
}

fn random_hermitian(n: usize, seed: u64) -> CMatrix {
    // small LCG keeps the inputs reproducible without another dependency
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
    &a + &a.adjoint()
}

#[test]
fn generator_outputs_are_traceless_for_hermitian_inputs() {
    let p = PhysicalParams::new(1.0, 2.0, 1.0).unwrap().with_gamma(0.05).unwrap();
    let m = OscillatorModel::new(2, p, 1.0).unwrap();
    let master = liouvillian_master(&m.hamiltonian, &m.q, &m.qdot, &m.params).unwrap();
    let lops = LindbladOps::new(&m.q, &m.qdot, &m.params).unwrap();
    let lind = lindblad_generator(&m.hamiltonian, &lops, &m.params).unwrap();
    for seed in 0..100 {
        let rho = random_hermitian(m.dim(), seed);
        for gen in [&master, &lind] {
            let out = gen.apply(&rho).unwrap();
            assert!(out.trace().norm() <= 1e-11, "seed {seed}");
            assert!(out.hermiticity_defect() <= 1e-12 * out.max_abs());
        }
    }
}
