//! Invariant checks: machine-readable records and the `verify` suite.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use gravdamp_core::bath::{kernel_a_coefficient, thermal_kernel_moments, KernelSpec};
use gravdamp_core::hilbert::OscillatorModel;
use gravdamp_core::langevin::{
    energy_balance_residual, integrate_classical, integrate_langevin, radiated_power, radiated_power_quadrupole,
    sample_noise, IntegratorConfig, NoiseConfig, Potential,
};
use gravdamp_core::master::{
    evolve, golden_rule_closed_form, golden_rule_rate, lamb_shift_term, lindblad_generator,
    liouvillian_master, min_eigenvalue, spontaneous_rate, DensityMatrix, EvolveOptions,
    LindbladOps,
};
use gravdamp_core::linalg::C64;
use gravdamp_core::quadrature::{angular_average_pol_projector, SphereQuadrature};
use gravdamp_core::tensor::{analytic_angular_average, pol_projector, polarization_tensors, Vec3};
use gravdamp_core::{PhysicalParams, Units};
use serde::Serialize;

use crate::error::{io_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ tolerance`; NaN fails.
    pub fn at_most(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
            detail: detail.into(),
        }
    }

    /// Relative deviation of `value` from `target`.
    pub fn relative(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        let dev = ((value - target) / target).abs();
        Check::at_most(name, dev, tolerance, format!("value {value:e}, target {target:e}"))
    }

    /// Passes when `value ≥ floor`.
    pub fn at_least(name: &str, value: f64, floor: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            value,
            tolerance: floor,
            pass: value >= floor,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:e} (tolerance {:e}) {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            self.detail
        )
    }
}

pub fn write_checks(checks: &[Check], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for c in checks {
        writeln!(w, "{}", serde_json::to_string(c)?).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// `n` nearly uniform unit vectors on a Fibonacci lattice.
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let v = [r * phi.cos(), r * phi.sin(), z];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / norm, v[1] / norm, v[2] / norm]
        })
        .collect()
}

fn projection_checks(out: &mut Vec<Check>) -> Result<()> {
    let mut idem: f64 = 0.0;
    let mut complete: f64 = 0.0;
    for k in fibonacci_directions(2000) {
        let p = pol_projector(&k)?;
        idem = idem.max(p.compose(&p).max_abs_diff(&p));
        let eps = polarization_tensors(&k)?;
        for i in 0..3 {
            for j in 0..3 {
                for m in 0..3 {
                    for n in 0..3 {
                        let s: C64 = eps.iter().map(|e| e[i][j] * e[m][n].conj()).sum();
                        complete = complete.max((s - C64::new(p[(i, j, m, n)], 0.0)).norm_sqr().sqrt());
                    }
                }
            }
        }
    }
    out.push(Check::at_most("projector_idempotent", idem, 1e-12, "2000 directions"));
    out.push(Check::at_most("polarization_completeness", complete, 1e-12, "2000 directions"));
    let avg = angular_average_pol_projector(&SphereQuadrature::default())?;
    out.push(Check::at_most(
        "angular_average_two_fifths",
        avg.max_abs_diff(&analytic_angular_average()),
        1e-12,
        "sphere rule degree 8",
    ));
    Ok(())
}

fn quantum_params() -> Result<PhysicalParams> {
    Ok(PhysicalParams::new(1.0, 5.0, 1.0)?.with_gamma(0.05)?)
}

fn generator_checks(out: &mut Vec<Check>) -> Result<()> {
    let m = OscillatorModel::new(3, quantum_params()?, 1.0)?;
    let master = liouvillian_master(&m.hamiltonian, &m.q, &m.qdot, &m.params)?;
    let lops = LindbladOps::new(&m.q, &m.qdot, &m.params)?;
    let lind = lindblad_generator(&m.hamiltonian, &lops, &m.params)?;
    let lamb = lamb_shift_term(&m.q, &m.qdot, &m.params)?;
    let diff = master.sub(&lind)?.sub(&lamb)?.max_abs() / master.max_abs();
    out.push(Check::at_most("generator_relation", diff, 1e-10, "ncut=3, relative to max|L|"));
    out.push(Check::at_most(
        "trace_preservation_master",
        master.trace_preservation_defect(),
        1e-10,
        "ncut=3",
    ));
    out.push(Check::at_most(
        "trace_preservation_lindblad",
        lind.trace_preservation_defect(),
        1e-10,
        "ncut=3",
    ));

    // positivity along a short Lindblad run from a coherent superposition
    let n = m.dim();
    let psi: Vec<C64> = (0..n).map(|i| C64::new(1.0 / (1.0 + i as f64), 0.1 * i as f64)).collect();
    let rho = DensityMatrix::pure(&m.basis, &psi)?;
    let rate = m.params.w().max(m.params.gamma() * m.omega);
    let mut opts = EvolveOptions::new(1.0 / rate, EvolveOptions::default_dt(&m.params, m.omega));
    opts.sample_every = 20;
    let traj = evolve(rho.matrix(), &lind, &opts)?;
    let mut min_eig = f64::INFINITY;
    let mut trace_dev: f64 = 0.0;
    for s in &traj.states {
        min_eig = min_eig.min(min_eigenvalue(s));
        trace_dev = trace_dev.max((s.trace() - C64::new(1.0, 0.0)).norm_sqr().sqrt());
    }
    out.push(Check::at_least("lindblad_positivity", min_eig, -1e-10, "ncut=3, t = 1/max(w, γω)"));
    out.push(Check::at_most("lindblad_trace", trace_dev, 1e-10, "ncut=3"));
    Ok(())
}

fn rate_checks(out: &mut Vec<Check>) -> Result<()> {
    let p = quantum_params()?;
    let m = OscillatorModel::new(4, p, 1.0)?;
    let g = spontaneous_rate(&m, [2, 0, 0])?;
    let expected = 4.0 / 3.0 * p.gamma() * p.hbar() * p.hbar() / (p.mass() * p.mass() * p.c().powi(4));
    out.push(Check::relative("gamma_two_quanta", g, expected, 1e-12));
    let gr = golden_rule_rate(&m, [2, 0, 0], &SphereQuadrature::default())?;
    out.push(Check::relative("golden_rule_vs_sum", gr, g, 1e-9));
    let cf = golden_rule_closed_form(&m, [2, 0, 0])?;
    out.push(Check::relative("golden_rule_vs_closed_form", gr, cf, 1e-10));
    let mut worst: f64 = 0.0;
    for s in [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]] {
        worst = worst.max(spontaneous_rate(&m, s)?.abs());
    }
    out.push(Check::at_most("selection_rules", worst, 0.0, "ground and one-quantum states"));
    Ok(())
}

fn classical_params(k: f64, hbar: f64, temperature: f64) -> Result<PhysicalParams> {
    let c: f64 = 20.0;
    let units = Units { hbar, c, kb: 1.0 };
    Ok(PhysicalParams::with_units(1.0, temperature, 1.0, units)?.with_gamma(k * c.powi(4) / hbar)?)
}

fn max_residual(p: &PhysicalParams, dt: f64) -> Result<f64> {
    let cfg = IntegratorConfig::new(dt, 6.0);
    let traj = integrate_classical(
        [1.0, 0.2, 0.0],
        [0.1, 0.7, 0.4],
        &Potential::Harmonic { omega: 1.0 },
        p,
        &cfg,
    )?;
    Ok(energy_balance_residual(&traj.states, p)?
        .iter()
        .map(|b| b.residual.abs())
        .fold(0.0, f64::max))
}

fn classical_checks(out: &mut Vec<Check>) -> Result<()> {
    let p = classical_params(1e-3, 1.0, 1.0)?;
    let ratio = max_residual(&p, 0.02)? / max_residual(&p, 0.01)?;
    out.push(Check::at_most(
        "energy_balance_order",
        (ratio - 4.0).abs(),
        0.3,
        format!("Richardson ratio {ratio}"),
    ));

    let mut worst: f64 = 0.0;
    for (i, v) in fibonacci_directions(200).iter().enumerate() {
        let a = fibonacci_directions(7)[i % 7];
        let v = [0.3 * v[0], 0.3 * v[1], 0.3 * v[2]];
        let a = [2.0 * a[0], 2.0 * a[1] - 0.5, 2.0 * a[2]];
        let p1 = radiated_power(&v, &a, &p);
        let p2 = radiated_power_quadrupole(&v, &a, &p);
        worst = worst.max(((p1 - p2) / p1).abs());
    }
    out.push(Check::at_most("radiated_power_identity", worst, 1e-12, "200 (v, a) pairs"));

    let k = 1e-4;
    let pc = classical_params(k, 1.0, 1.0)?;
    let period = 2.0 * PI;
    let traj = integrate_classical(
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        &Potential::Harmonic { omega: 1.0 },
        &pc,
        &IntegratorConfig::new(period / 2000.0, period),
    )?;
    let (first, last) = (&traj.states[0], traj.states.last().expect("non-empty"));
    let measured = (last.energy + last.e_schott - first.energy - first.e_schott) / period;
    out.push(Check::relative("circular_orbit_power", measured, -2.0 * k, 0.01));

    let run = |hbar: f64| -> Result<Vec<f64>> {
        let p = classical_params(1e-3, hbar, 1e-3)?;
        let traj = integrate_langevin(
            [1.0, 0.0, 0.3],
            [0.0, 0.8, 0.1],
            &Potential::Harmonic { omega: 1.0 },
            &p,
            &NoiseConfig::new(&p, 0.01, 7),
            &IntegratorConfig::new(0.01, 20.0),
        )?;
        Ok(traj.states.iter().flat_map(|s| s.x.into_iter().chain(s.v)).collect())
    };
    let a = run(1.0)?;
    let b = run(10.0)?;
    let dev = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    out.push(Check::at_most("hbar_independence", dev, 1e-12, "ħ → 10ħ at fixed γħ, wħ²"));
    Ok(())
}

fn noise_checks(out: &mut Vec<Check>, seed: u64) -> Result<()> {
    let p = PhysicalParams::new(1.0, 2.0, 1.0)?.with_gamma(0.3)?;
    let cfg = NoiseConfig::new(&p, 0.01, seed);
    let n = 100_000;
    let samples = sample_noise(n, &cfg)?;
    let target = cfg.sample_variance();
    let se = target * (2.0 / n as f64).sqrt();
    let mut worst_var: f64 = 0.0;
    let mut worst_cov: f64 = 0.0;
    for i in 0..3 {
        let var = samples.iter().map(|e| e[i] * e[i]).sum::<f64>() / n as f64;
        worst_var = worst_var.max((var - target).abs() / se);
        let j = (i + 1) % 3;
        let cov = samples.iter().map(|e| e[i] * e[j]).sum::<f64>() / n as f64;
        worst_cov = worst_cov.max(cov.abs() / (target / (n as f64).sqrt()));
    }
    out.push(Check::at_most("noise_variance", worst_var, 3.0, "standard errors, 1e5 samples"));
    out.push(Check::at_most("noise_cross_covariance", worst_cov, 3.0, "standard errors, 1e5 samples"));
    let again = sample_noise(n, &cfg)?;
    out.push(Check::at_most(
        "noise_determinism",
        (again != samples) as u8 as f64,
        0.0,
        "same seed, same stream",
    ));
    Ok(())
}

fn kernel_checks(out: &mut Vec<Check>) -> Result<()> {
    let p = PhysicalParams::new(1.0, 1.0, 1.0)?;
    let beta_hbar = p.beta().expect("T > 0") * p.hbar();
    let m = thermal_kernel_moments(&KernelSpec::new(p, 20.0 / beta_hbar))?;
    out.push(Check::relative("kernel_m0", m.m0, kernel_a_coefficient(&p)?, 0.02));
    // second-order coth expansion: δ − (β²ħ²/12) δ̈ has τ² moment −β²ħ²/6
    out.push(Check::relative("kernel_m2_coth", m.ratio(), -beta_hbar * beta_hbar / 6.0, 0.05));
    Ok(())
}

/// Desk-scale invariant suite behind `gravdamp verify`.
pub fn verify_suite(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    projection_checks(&mut out)?;
    generator_checks(&mut out)?;
    rate_checks(&mut out)?;
    classical_checks(&mut out)?;
    noise_checks(&mut out, seed)?;
    kernel_checks(&mut out)?;
    Ok(out)
}
