//! Scenario runners behind each subcommand.
//!
//! Every run writes `meta.json`, one table per output under `data/`, and
//! `checks.jsonl`. Data files depend only on the configuration and seed;
//! the wall time in `meta.json` is the only nondeterministic field.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gravdamp_core::bath::{kernel_a_coefficient, thermal_kernel_moments, KernelSpec};
use gravdamp_core::hilbert::OscillatorModel;
use gravdamp_core::langevin::{
    energy_balance_residual, integrate_classical, integrate_langevin, radiated_power_quadrupole,
    IntegratorConfig, NoiseConfig, Potential, Trajectory as PathTrajectory, TrajectoryState,
};
use gravdamp_core::linalg::C64;
use gravdamp_core::master::{
    damping_population_rate, evolve, golden_rule_closed_form, golden_rule_rate, induced_rate,
    lindblad_generator, liouvillian_master, min_eigenvalue, purity, spontaneous_rate,
    DensityMatrix, EvolveOptions, LindbladOps, Superoperator,
};
use gravdamp_core::quadrature::SphereQuadrature;
use gravdamp_core::PhysicalParams;
use rayon::prelude::*;
use serde_json::json;

use crate::checks::{verify_suite, write_checks, Check};
use crate::config::{Format, GeneratorKind, ScenarioConfig, Subcommand};
use crate::error::{io_err, CliError, Result};
use crate::table::{emit_table, trajectory_table, Table};

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub subcommand: Subcommand,
    pub out_dir: PathBuf,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

struct Context<'a> {
    config: &'a ScenarioConfig,
    params: PhysicalParams,
    seed: u64,
    format: Format,
    data_dir: PathBuf,
    checks: Vec<Check>,
}

impl Context<'_> {
    fn emit(&self, name: &str, table: &Table) -> Result<()> {
        let path = self.data_dir.join(format!("{name}.{}", self.format.extension()));
        emit_table(table, self.format, &path)
    }
}

pub fn run(sub: Subcommand, config: &ScenarioConfig, opts: &RunOptions) -> Result<Report> {
    if let Some(declared) = config.subcommand {
        if declared != sub {
            return Err(CliError::Invalid(format!(
                "scenario file is for `{}`, not `{}`",
                declared.name(),
                sub.name()
            )));
        }
    }
    let mut config = config.clone();
    config.subcommand = Some(sub);
    if let Some(seed) = opts.seed {
        config.run.seed = seed;
    }
    if let Some(format) = opts.format {
        config.output.format = format;
    }
    if let Some(dir) = &opts.out_dir {
        config.output.directory = dir.clone();
    }
    let params = config.params.build()?;
    let out_dir = config.output.directory.clone();
    let data_dir = out_dir.join("data");
    fs::create_dir_all(&data_dir).map_err(io_err(&data_dir))?;

    let start = Instant::now();
    let mut ctx = Context {
        config: &config,
        params,
        seed: config.run.seed,
        format: config.output.format,
        data_dir,
        checks: Vec::new(),
    };
    let body = |ctx: &mut Context| match sub {
        Subcommand::Lindblad => run_lindblad(ctx),
        Subcommand::Rates => run_rates(ctx),
        Subcommand::Langevin => run_langevin(ctx),
        Subcommand::Classical => run_classical(ctx),
        Subcommand::Kernels => run_kernels(ctx),
        Subcommand::Verify => {
            ctx.checks = verify_suite(ctx.seed)?;
            Ok(())
        }
    };
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?
            .install(|| body(&mut ctx))?,
        None => body(&mut ctx)?,
    }
    let wall = start.elapsed().as_secs_f64();
    let checks = ctx.checks;

    write_checks(&checks, &out_dir.join("checks.jsonl"))?;
    write_meta(&config, &params, &checks, wall, &out_dir.join("meta.json"))?;
    Ok(Report {
        subcommand: sub,
        out_dir,
        checks,
    })
}

fn write_meta(
    config: &ScenarioConfig,
    p: &PhysicalParams,
    checks: &[Check],
    wall: f64,
    path: &Path,
) -> Result<()> {
    let meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": config.subcommand.map(Subcommand::name),
        "seed": config.run.seed,
        "config": config,
        "derived": {
            "gamma": p.gamma(),
            "eps2": p.eps2(),
            "w": p.w(),
            "beta": p.beta(),
            "thermal_correction": p.thermal_correction(),
            "damping_strength": p.damping_strength(),
            "noise_intensity": p.noise_intensity(),
        },
        "checks_passed": checks.iter().filter(|c| c.pass).count(),
        "checks_total": checks.len(),
        "wall_time_s": wall,
    });
    let text = serde_json::to_string_pretty(&meta)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn occupation_name(s: [u32; 3]) -> String {
    format!("{}_{}_{}", s[0], s[1], s[2])
}

/// Configured states, or every state at least two shells below the truncation.
fn interior_states(ctx: &Context, model: &OscillatorModel) -> Vec<[u32; 3]> {
    if !ctx.config.model.states.is_empty() {
        return ctx.config.model.states.clone();
    }
    let max = model.basis.ncut() as u32 - 2;
    model
        .basis
        .indices_up_to(max)
        .into_iter()
        .map(|i| model.basis.state(i))
        .collect()
}

fn build_generator(ctx: &Context, model: &OscillatorModel) -> Result<Superoperator> {
    Ok(match ctx.config.run.generator {
        GeneratorKind::Master => {
            liouvillian_master(&model.hamiltonian, &model.q, &model.qdot, &model.params)?
        }
        GeneratorKind::Lindblad => {
            let lops = LindbladOps::new(&model.q, &model.qdot, &model.params)?;
            lindblad_generator(&model.hamiltonian, &lops, &model.params)?
        }
    })
}

fn run_lindblad(ctx: &mut Context) -> Result<()> {
    let m = &ctx.config.model;
    let model = OscillatorModel::new(m.ncut, ctx.params, m.omega)?;
    let gen = build_generator(ctx, &model)?;
    let rate = ctx.params.w().max(ctx.params.gamma() * m.omega);
    let t_final = match ctx.config.run.t_final {
        Some(t) => t,
        None if rate > 0.0 => 5.0 / rate,
        None => {
            return Err(CliError::Invalid(
                "no dissipation, so [run] t_final must be given".into(),
            ))
        }
    };
    let dt = ctx
        .config
        .run
        .dt
        .unwrap_or_else(|| EvolveOptions::default_dt(&ctx.params, m.omega));
    let mut opts = EvolveOptions::new(t_final, dt);
    opts.method = ctx.config.run.method.into();
    opts.sample_every = ctx.config.run.sample_every;

    let mut summary = Table::new([
        "nx",
        "ny",
        "nz",
        "gamma",
        "p_initial_final",
        "p_ground_final",
        "max_trace_deviation",
        "min_eigenvalue",
        "max_hermiticity_defect",
    ]);
    let (mut worst_trace, mut worst_herm, mut worst_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for state in interior_states(ctx, &model) {
        let i = model.basis.index_of(state)?;
        let rho0 = DensityMatrix::basis_state(&model.basis, i)?;
        let traj = evolve(rho0.matrix(), &gen, &opts)?;
        let mut table = Table::new([
            "t",
            "p_initial",
            "p_ground",
            "trace",
            "purity",
            "min_eigenvalue",
            "hermiticity_defect",
        ]);
        let (mut tr, mut herm, mut eig) = (0.0f64, 0.0f64, f64::INFINITY);
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let trace = rho.trace();
            let e = min_eigenvalue(rho);
            let h = rho.hermiticity_defect();
            tr = tr.max((trace - C64::new(1.0, 0.0)).norm_sqr().sqrt());
            herm = herm.max(h);
            eig = eig.min(e);
            table.push(vec![
                (*t).into(),
                rho[(i, i)].re.into(),
                rho[(0, 0)].re.into(),
                trace.re.into(),
                purity(rho).into(),
                e.into(),
                h.into(),
            ]);
        }
        ctx.emit(&format!("populations_{}", occupation_name(state)), &table)?;
        let last = traj.states.last().expect("initial state is recorded");
        summary.push(vec![
            state[0].into(),
            state[1].into(),
            state[2].into(),
            spontaneous_rate(&model, state)?.into(),
            last[(i, i)].re.into(),
            last[(0, 0)].re.into(),
            tr.into(),
            eig.into(),
            herm.into(),
        ]);
        worst_trace = worst_trace.max(tr);
        worst_herm = worst_herm.max(herm);
        worst_eig = worst_eig.min(eig);
    }
    ctx.emit("summary", &summary)?;
    ctx.checks.push(Check::at_most(
        "generator_trace_preservation",
        gen.trace_preservation_defect(),
        1e-10,
        "max over columns of |Tr L(e_rc)|",
    ));
    ctx.checks.push(Check::at_most("trace", worst_trace, 1e-10, "max |Tr ρ − 1|"));
    ctx.checks.push(Check::at_most("hermiticity", worst_herm, 1e-11, "max |ρ − ρ†|"));
    if ctx.config.run.generator == GeneratorKind::Lindblad {
        ctx.checks.push(Check::at_least("positivity", worst_eig, -1e-10, "min eigenvalue of ρ"));
    }
    Ok(())
}

fn run_rates(ctx: &mut Context) -> Result<()> {
    let m = &ctx.config.model;
    let model = OscillatorModel::new(m.ncut, ctx.params, m.omega)?;
    let quad = SphereQuadrature::new(ctx.config.run.quad_degree);
    let p = &ctx.params;
    // natural size of a one-graviton rate, used to judge zeros
    let scale = p.gamma() * p.hbar() * p.hbar() * m.omega.powi(3) / (p.mass() * p.mass() * p.c().powi(4));
    let mut table = Table::new([
        "nx",
        "ny",
        "nz",
        "energy",
        "gamma_sum",
        "gamma_golden",
        "gamma_closed_form",
        "rel_diff",
        "damping_population_rate",
        "induced_rate",
    ]);
    let (mut worst_golden, mut worst_closed, mut worst_zero) = (0.0f64, 0.0f64, 0.0f64);
    for state in interior_states(ctx, &model) {
        let i = model.basis.index_of(state)?;
        let sum = spontaneous_rate(&model, state)?;
        let golden = golden_rule_rate(&model, state, &quad)?;
        let closed = golden_rule_closed_form(&model, state)?;
        let denom = sum.abs().max(scale);
        let rel = (golden - sum).abs() / denom;
        worst_golden = worst_golden.max(rel);
        worst_closed = worst_closed.max((golden - closed).abs() / denom);
        if state.iter().sum::<u32>() <= 1 {
            worst_zero = worst_zero.max(sum.abs() / scale);
        }
        table.push(vec![
            state[0].into(),
            state[1].into(),
            state[2].into(),
            model.energy(i).into(),
            sum.into(),
            golden.into(),
            closed.into(),
            rel.into(),
            damping_population_rate(&model, state)?.into(),
            induced_rate(&model, state)?.into(),
        ]);
    }
    ctx.emit("rates", &table)?;
    ctx.checks.push(Check::at_most("golden_rule_vs_sum", worst_golden, 1e-9, "relative"));
    ctx.checks.push(Check::at_most(
        "golden_rule_vs_closed_form",
        worst_closed,
        1e-10,
        "relative",
    ));
    ctx.checks.push(Check::at_most(
        "selection_rules",
        worst_zero,
        1e-14,
        "|Γ| of states with fewer than two quanta, in units of γħ²ω³/(M²c⁴)",
    ));
    Ok(())
}

fn initial_conditions(ctx: &Context) -> Result<([f64; 3], [f64; 3], f64, f64)> {
    let m = &ctx.config.model;
    let r = &ctx.config.run;
    let need = |what: &str| CliError::Invalid(format!("{what} is required for this subcommand"));
    Ok((
        m.x0.ok_or_else(|| need("[model] x0"))?,
        m.v0.ok_or_else(|| need("[model] v0"))?,
        r.dt.ok_or_else(|| need("[run] dt"))?,
        r.t_final.ok_or_else(|| need("[run] t_final"))?,
    ))
}

fn tensor_identity_defect(states: &[TrajectoryState], p: &PhysicalParams) -> f64 {
    states
        .iter()
        .filter(|s| s.p_rad != 0.0)
        .map(|s| ((radiated_power_quadrupole(&s.v, &s.a, p) - s.p_rad) / s.p_rad).abs())
        .fold(0.0, f64::max)
}

fn warning_detail(trajs: &[PathTrajectory]) -> String {
    let warned = trajs.iter().filter(|t| t.speed_warning_at.is_some()).count();
    format!("{warned} of {} trajectories exceeded 0.1c", trajs.len())
}

fn run_langevin(ctx: &mut Context) -> Result<()> {
    let (x0, v0, dt, t_final) = initial_conditions(ctx)?;
    let run = &ctx.config.run;
    if run.n_trajectories == 0 {
        return Err(CliError::Invalid("[run] n_trajectories must be at least 1".into()));
    }
    let potential = ctx.config.model.potential.build();
    let mut cfg = IntegratorConfig::new(dt, t_final);
    cfg.sample_every = run.sample_every;
    let noise = NoiseConfig::new(&ctx.params, dt, ctx.seed).with_quantum_correction(run.quantum_correction);
    let params = ctx.params;
    let trajs: Vec<PathTrajectory> = (0..run.n_trajectories)
        .into_par_iter()
        .map(|i| {
            integrate_langevin(x0, v0, &potential, &params, &noise.with_stream(i as u64), &cfg)
                .map_err(|source| CliError::Trajectory { index: i, source })
        })
        .collect::<Result<_>>()?;

    let mut ens = Table::new(["t", "mean_E", "var_E", "mean_x1", "mean_x2", "mean_x3", "mean_E_schott"]);
    let n = trajs.len() as f64;
    for (j, s0) in trajs[0].states.iter().enumerate() {
        let col = |f: &dyn Fn(&TrajectoryState) -> f64| trajs.iter().map(|t| f(&t.states[j])).sum::<f64>() / n;
        let mean_e = col(&|s| s.energy);
        let var_e = if trajs.len() > 1 {
            trajs.iter().map(|t| (t.states[j].energy - mean_e).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        ens.push(vec![
            s0.t.into(),
            mean_e.into(),
            var_e.into(),
            col(&|s| s.x[0]).into(),
            col(&|s| s.x[1]).into(),
            col(&|s| s.x[2]).into(),
            col(&|s| s.e_schott).into(),
        ]);
    }
    ctx.emit("ensemble", &ens)?;
    ctx.emit("trajectory_0", &trajectory_table(&trajs[0].states))?;
    ctx.checks.push(Check::at_most(
        "radiated_power_identity",
        tensor_identity_defect(&trajs[0].states, &params),
        1e-12,
        warning_detail(&trajs),
    ));
    Ok(())
}

fn balance_residual(
    x0: [f64; 3],
    v0: [f64; 3],
    potential: &Potential,
    p: &PhysicalParams,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let traj = integrate_classical(x0, v0, potential, p, cfg)?;
    Ok(energy_balance_residual(&traj.states, p)?
        .iter()
        .map(|b| b.residual.abs())
        .fold(0.0, f64::max))
}

fn run_classical(ctx: &mut Context) -> Result<()> {
    let (x0, v0, dt, t_final) = initial_conditions(ctx)?;
    let potential = ctx.config.model.potential.build();
    let p = ctx.params;
    let mut cfg = IntegratorConfig::new(dt, t_final);
    cfg.sample_every = ctx.config.run.sample_every;
    let traj = integrate_classical(x0, v0, &potential, &p, &cfg)?;
    ctx.emit("trajectory", &trajectory_table(&traj.states))?;

    let balance = energy_balance_residual(&traj.states, &p)?;
    let mut table = Table::new(["t", "lhs", "rhs", "remainder", "residual"]);
    for b in &balance {
        table.push(vec![
            b.t.into(),
            b.lhs.into(),
            b.rhs.into(),
            b.reduction_remainder.into(),
            b.residual.into(),
        ]);
    }
    ctx.emit("balance", &table)?;
    ctx.checks.push(Check::at_most(
        "radiated_power_identity",
        tensor_identity_defect(&traj.states, &p),
        1e-12,
        warning_detail(std::slice::from_ref(&traj)),
    ));
    if p.damping_strength() > 0.0 {
        let coarse = balance.iter().map(|b| b.residual.abs()).fold(0.0, f64::max);
        let mut half = cfg;
        half.dt = dt / 2.0;
        let fine = balance_residual(x0, v0, &potential, &p, &half)?;
        let ratio = coarse / fine;
        ctx.checks.push(Check::at_most(
            "energy_balance_order",
            (ratio - 4.0).abs(),
            0.3,
            format!("max residual {coarse:e} at dt, {fine:e} at dt/2, ratio {ratio}"),
        ));
    }
    Ok(())
}

fn run_kernels(ctx: &mut Context) -> Result<()> {
    let k = &ctx.config.kernels;
    let temps = if k.temperatures.is_empty() {
        vec![ctx.params.temperature()]
    } else {
        k.temperatures.clone()
    };
    let mut table = Table::new([
        "temperature",
        "uv_cutoff",
        "m0",
        "kernel_a",
        "m0_over_a",
        "m2_over_m0",
        "coth_expansion",
        "thermal_correction",
    ]);
    let (mut worst_m0, mut worst_m2) = (0.0f64, 0.0f64);
    for t in temps {
        let p = ctx.params.with_temperature(t)?;
        let beta_hbar = p.beta().ok_or(gravdamp_core::Error::ZeroTemperature)? * p.hbar();
        let spec = KernelSpec::new(p, k.cutoff_factor / beta_hbar);
        let mom = thermal_kernel_moments(&spec)?;
        let a = kernel_a_coefficient(&p)?;
        // τ² moment of δ − (β²ħ²/12)δ̈ relative to its weight
        let coth = -beta_hbar * beta_hbar / 6.0;
        worst_m0 = worst_m0.max((mom.m0 / a - 1.0).abs());
        worst_m2 = worst_m2.max((mom.ratio() / coth - 1.0).abs());
        table.push(vec![
            t.into(),
            spec.uv_cutoff.into(),
            mom.m0.into(),
            a.into(),
            (mom.m0 / a).into(),
            mom.ratio().into(),
            coth.into(),
            p.thermal_correction().into(),
        ]);
    }
    ctx.emit("kernels", &table)?;
    ctx.checks.push(Check::at_most("kernel_m0", worst_m0, 0.02, "relative to the local coefficient"));
    ctx.checks.push(Check::at_most("kernel_m2", worst_m2, 0.05, "relative to −β²ħ²/6"));
    Ok(())
}
