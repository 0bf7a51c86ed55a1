//! Radiation-damped classical motion and its stochastic extension.
//!
//! The damping term `2k (d/dt)[a v² + ⅓ v (a·v)]`, `k = γħ/c⁴`, is third order
//! in time. It is evaluated with the order-reduced substitution
//! `a → −∇V/M`, `ȧ → −(∇∇V) v / M`, which keeps the dynamics second order.
//!
//! A step is a Strang splitting: half a damping step (midpoint rule at fixed
//! position), one fourth-order symplectic step of the conservative motion
//! (Omelyan's PEFRL), and another damping half step. The scheme is second
//! order overall and reduces to the symplectic map when `k = 0`.
//!
//! The noise `d/dt(Ω^{1/2} η)` is handled by integrating the equation once:
//! `P = M v − 2k[a v² + ⅓ v (a·v)]` receives the increment
//! `N_{n+1} − N_n` with `N_{n+1} = Ω^{1/2}(v_n) η_{n+1}` and `N_0 = 0`, so the
//! noise is never differenced numerically. Because white noise then enters the
//! velocity directly, the velocity jitter per component has variance
//! `𝓜ħ² Ω / (M² dt)`; results are meaningful while this stays small
//! compared with `v²`.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::params::PhysicalParams;
use crate::tensor::{add, axpy, dot, mat_vec, norm, omega_sqrt, q_tensor_rate, scale, sub, Mat3, Vec3};

/// Divisor in the quantum noise correction `η → η − (ħ²β²/D) η̈`.
pub const QUANTUM_FILTER_DIVISOR: f64 = 24.0;

/// External potential `V(x)`.
#[derive(Debug, Clone)]
pub enum Potential {
    /// `½ M ω² |x|²`.
    Harmonic { omega: f64 },
    /// `−M μ / √(|x|² + s²)`.
    KeplerSoftened { mu: f64, softening: f64 },
    /// `Σ c x^i y^j z^k` over `(c, [i, j, k])` terms; mass independent.
    Polynomial { terms: Vec<(f64, [u32; 3])> },
    /// User-supplied functions of position, mass independent.
    Custom {
        value: fn(&Vec3) -> f64,
        gradient: fn(&Vec3) -> Vec3,
        hessian: Option<fn(&Vec3) -> Mat3>,
    },
}

fn powi(x: f64, n: u32) -> f64 {
    let mut out = 1.0;
    for _ in 0..n {
        out *= x;
    }
    out
}

/// `d^order/dx^order x^n`.
fn mono_deriv(x: f64, n: u32, order: u32) -> f64 {
    if order > n {
        return 0.0;
    }
    let mut coef = 1.0;
    for j in 0..order {
        coef *= (n - j) as f64;
    }
    coef * powi(x, n - order)
}

impl Potential {
    pub fn value(&self, x: &Vec3, mass: f64) -> f64 {
        match self {
            Potential::Harmonic { omega } => 0.5 * mass * omega * omega * dot(x, x),
            Potential::KeplerSoftened { mu, softening } => {
                -mass * mu / libm::sqrt(dot(x, x) + softening * softening)
            }
            Potential::Polynomial { terms } => terms
                .iter()
                .map(|(c, p)| c * powi(x[0], p[0]) * powi(x[1], p[1]) * powi(x[2], p[2]))
                .sum(),
            Potential::Custom { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &Vec3, mass: f64) -> Vec3 {
        match self {
            Potential::Harmonic { omega } => scale(x, mass * omega * omega),
            Potential::KeplerSoftened { mu, softening } => {
                let s2 = dot(x, x) + softening * softening;
                scale(x, mass * mu / (s2 * libm::sqrt(s2)))
            }
            Potential::Polynomial { terms } => {
                let mut g = [0.0; 3];
                for (c, p) in terms {
                    for (d, gd) in g.iter_mut().enumerate() {
                        let mut t = *c;
                        for ax in 0..3 {
                            t *= mono_deriv(x[ax], p[ax], (ax == d) as u32);
                        }
                        *gd += t;
                    }
                }
                g
            }
            Potential::Custom { gradient, .. } => gradient(x),
        }
    }

    pub fn hessian(&self, x: &Vec3, mass: f64) -> Result<Mat3> {
        match self {
            Potential::Harmonic { omega } => {
                let k = mass * omega * omega;
                Ok([[k, 0.0, 0.0], [0.0, k, 0.0], [0.0, 0.0, k]])
            }
            Potential::KeplerSoftened { mu, softening } => {
                let s2 = dot(x, x) + softening * softening;
                let s3 = s2 * libm::sqrt(s2);
                let f = mass * mu / s3;
                let mut h = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        h[i][j] = -3.0 * f * x[i] * x[j] / s2;
                    }
                    h[i][i] += f;
                }
                Ok(h)
            }
            Potential::Polynomial { terms } => {
                let mut h = [[0.0; 3]; 3];
                for (c, p) in terms {
                    for i in 0..3 {
                        for j in 0..3 {
                            let mut t = *c;
                            for ax in 0..3 {
                                let order = (ax == i) as u32 + (ax == j) as u32;
                                t *= mono_deriv(x[ax], p[ax], order);
                            }
                            h[i][j] += t;
                        }
                    }
                }
                Ok(h)
            }
            Potential::Custom { hessian, .. } => match hessian {
                Some(h) => Ok(h(x)),
                None => Err(Error::MissingHessian),
            },
        }
    }

    pub fn has_hessian(&self) -> bool {
        !matches!(self, Potential::Custom { hessian: None, .. })
    }
}

/// `d/dt[a v² + ⅓ v (a·v)]` with `v̇ = a`:
/// `ȧ v² + (7/3) a (a·v) + ⅓ v (ȧ·v + a²)`.
pub fn damping_bracket_rate(v: &Vec3, a: &Vec3, adot: &Vec3) -> Vec3 {
    let v2 = dot(v, v);
    let av = dot(a, v);
    let s = (dot(adot, v) + dot(a, a)) / 3.0;
    let mut out = scale(adot, v2);
    out = axpy(&out, 7.0 / 3.0 * av, a);
    axpy(&out, s, v)
}

/// Order-reduced damping force `2(γħ/c⁴)(d/dt)[a v² + ⅓ v (a·v)]` at `(x, v)`.
pub fn radiation_damping_force(
    x: &Vec3,
    v: &Vec3,
    potential: &Potential,
    params: &PhysicalParams,
) -> Result<Vec3> {
    let k = params.damping_strength();
    if k == 0.0 {
        return Ok([0.0; 3]);
    }
    let m = params.mass();
    let a = scale(&potential.gradient(x, m), -1.0 / m);
    let adot = scale(&mat_vec(&potential.hessian(x, m)?, v), -1.0 / m);
    Ok(scale(&damping_bracket_rate(v, &a, &adot), 2.0 * k))
}

/// `−2(γħ/c⁴)[a²v² + ⅓(a·v)²]`, the radiated power (negative for loss).
pub fn radiated_power(v: &Vec3, a: &Vec3, params: &PhysicalParams) -> f64 {
    let av = dot(a, v);
    -2.0 * params.damping_strength() * (dot(a, a) * dot(v, v) + av * av / 3.0)
}

/// The same power through the quadrupole rate, `−γħ Σ_kl q̇_kl²`.
pub fn radiated_power_quadrupole(v: &Vec3, a: &Vec3, params: &PhysicalParams) -> f64 {
    -params.gamma() * params.hbar() * q_tensor_rate(v, a, params.c()).norm_sqr()
}

/// `−(2/3)(γħ/c⁴)(d/dt)(v²)² = −(8/3)(γħ/c⁴) v² (a·v)`.
pub fn schott_energy(v: &Vec3, a: &Vec3, params: &PhysicalParams) -> f64 {
    -8.0 / 3.0 * params.damping_strength() * dot(v, v) * dot(a, v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
    /// Order-reduced acceleration `−∇V/M`.
    pub a: Vec3,
    /// `−(∇∇V) v / M`, absent when the potential has no Hessian.
    pub jerk: Option<Vec3>,
    /// `½ M v² + V(x)`.
    pub energy: f64,
    pub e_schott: f64,
    pub p_rad: f64,
}

impl TrajectoryState {
    pub fn new(t: f64, x: Vec3, v: Vec3, potential: &Potential, params: &PhysicalParams) -> Self {
        let m = params.mass();
        let a = scale(&potential.gradient(&x, m), -1.0 / m);
        let jerk = potential
            .hessian(&x, m)
            .ok()
            .map(|h| scale(&mat_vec(&h, &v), -1.0 / m));
        TrajectoryState {
            t,
            x,
            v,
            a,
            jerk,
            energy: 0.5 * m * dot(&v, &v) + potential.value(&x, m),
            e_schott: schott_energy(&v, &a, params),
            p_rad: radiated_power(&v, &a, params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Record every this many steps; the initial and final states are always kept.
    pub sample_every: usize,
    /// Abort once `|v| > speed_limit · c`.
    pub speed_limit: f64,
    /// Note the first time `|v| > speed_warning · c`.
    pub speed_warning: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        IntegratorConfig {
            dt,
            t_final,
            sample_every: 1,
            speed_limit: 0.3,
            speed_warning: 0.1,
        }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive and finite"));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid("t_final", "must be non-negative and finite"));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every", "must be at least 1"));
        }
        if !(self.speed_warning > 0.0 && self.speed_warning <= self.speed_limit) {
            return Err(invalid("speed_warning", "must lie in (0, speed_limit]"));
        }
        Ok(libm::ceil(self.t_final / self.dt - 1e-9).max(0.0) as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<TrajectoryState>,
    /// Time at which the speed first exceeded the warning threshold.
    pub speed_warning_at: Option<f64>,
}

// Omelyan–Mryglod–Folk position-extended Forest–Ruth-like coefficients.
const PEFRL_XI: f64 = 0.1786178958448091;
const PEFRL_LAMBDA: f64 = -0.2123418310626054;
const PEFRL_CHI: f64 = -0.0662645826698185;

struct Dynamics<'a> {
    potential: &'a Potential,
    mass: f64,
    k: f64,
}

impl Dynamics<'_> {
    fn accel(&self, x: &Vec3) -> Vec3 {
        scale(&self.potential.gradient(x, self.mass), -1.0 / self.mass)
    }

    fn damping_accel(&self, x: &Vec3, a: &Vec3, v: &Vec3) -> Result<Vec3> {
        let h = self.potential.hessian(x, self.mass)?;
        let adot = scale(&mat_vec(&h, v), -1.0 / self.mass);
        Ok(scale(&damping_bracket_rate(v, a, &adot), 2.0 * self.k / self.mass))
    }

    /// Midpoint rule for `v̇ = F(x, v)/M` at fixed `x`.
    fn damping_half(&self, x: &Vec3, v: &Vec3, h: f64) -> Result<Vec3> {
        let a = self.accel(x);
        let k1 = self.damping_accel(x, &a, v)?;
        let mid = axpy(v, 0.5 * h, &k1);
        let k2 = self.damping_accel(x, &a, &mid)?;
        Ok(axpy(v, h, &k2))
    }

    fn pefrl(&self, x: &mut Vec3, v: &mut Vec3, h: f64) {
        *x = axpy(x, PEFRL_XI * h, v);
        *v = axpy(v, (1.0 - 2.0 * PEFRL_LAMBDA) * 0.5 * h, &self.accel(x));
        *x = axpy(x, PEFRL_CHI * h, v);
        *v = axpy(v, PEFRL_LAMBDA * h, &self.accel(x));
        *x = axpy(x, (1.0 - 2.0 * (PEFRL_CHI + PEFRL_XI)) * h, v);
        *v = axpy(v, PEFRL_LAMBDA * h, &self.accel(x));
        *x = axpy(x, PEFRL_CHI * h, v);
        *v = axpy(v, (1.0 - 2.0 * PEFRL_LAMBDA) * 0.5 * h, &self.accel(x));
        *x = axpy(x, PEFRL_XI * h, v);
    }

    fn step(&self, x: &mut Vec3, v: &mut Vec3, h: f64) -> Result<()> {
        if self.k != 0.0 {
            *v = self.damping_half(x, v, 0.5 * h)?;
        }
        self.pefrl(x, v, h);
        if self.k != 0.0 {
            *v = self.damping_half(x, v, 0.5 * h)?;
        }
        Ok(())
    }

    /// `P = M v − 2k[a v² + ⅓ v (a·v)]`.
    fn momentum(&self, a: &Vec3, v: &Vec3) -> Vec3 {
        let bracket = axpy(&scale(a, dot(v, v)), dot(a, v) / 3.0, v);
        sub(&scale(v, self.mass), &scale(&bracket, 2.0 * self.k))
    }

    /// Invert [`Self::momentum`] at fixed `a` by fixed-point iteration.
    fn velocity_from_momentum(&self, a: &Vec3, p: &Vec3, guess: &Vec3, t: f64) -> Result<Vec3> {
        if self.k == 0.0 {
            return Ok(scale(p, 1.0 / self.mass));
        }
        let mut v = *guess;
        for _ in 0..100 {
            let bracket = axpy(&scale(a, dot(&v, &v)), dot(a, &v) / 3.0, &v);
            let next = scale(&axpy(p, 2.0 * self.k, &bracket), 1.0 / self.mass);
            let change = norm(&sub(&next, &v));
            v = next;
            if change <= 1e-15 * norm(&v) {
                return Ok(v);
            }
        }
        Err(Error::VelocitySolve { t })
    }
}

struct Recorder<'a> {
    potential: &'a Potential,
    params: &'a PhysicalParams,
    cfg: &'a IntegratorConfig,
    out: Trajectory,
}

impl Recorder<'_> {
    fn check(&mut self, t: f64, x: &Vec3, v: &Vec3) -> Result<()> {
        if !(x.iter().chain(v.iter()).all(|c| c.is_finite())) {
            return Err(Error::NonFinite { t });
        }
        let c = self.params.c();
        let speed = norm(v);
        if speed > self.cfg.speed_limit * c {
            return Err(Error::SpeedGuard {
                t,
                speed,
                limit: self.cfg.speed_limit * c,
            });
        }
        if speed > self.cfg.speed_warning * c && self.out.speed_warning_at.is_none() {
            self.out.speed_warning_at = Some(t);
        }
        Ok(())
    }

    fn record(&mut self, t: f64, x: Vec3, v: Vec3) {
        self.out
            .states
            .push(TrajectoryState::new(t, x, v, self.potential, self.params));
    }
}

fn validate_start(potential: &Potential, params: &PhysicalParams) -> Result<()> {
    if params.damping_strength() != 0.0 && !potential.has_hessian() {
        return Err(Error::MissingHessian);
    }
    Ok(())
}

/// Deterministic radiation-damped motion.
pub fn integrate_classical(
    x0: Vec3,
    v0: Vec3,
    potential: &Potential,
    params: &PhysicalParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate(x0, v0, potential, params, cfg, None)
}

/// Langevin motion driven by the graviton noise.
///
/// With zero noise intensity this is [`integrate_classical`] exactly.
pub fn integrate_langevin(
    x0: Vec3,
    v0: Vec3,
    potential: &Potential,
    params: &PhysicalParams,
    noise: &NoiseConfig,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if noise.dt != cfg.dt {
        return Err(invalid("noise.dt", "must equal the integrator step"));
    }
    if noise.variance_scale == 0.0 {
        return integrate(x0, v0, potential, params, cfg, None);
    }
    integrate(x0, v0, potential, params, cfg, Some(noise))
}

fn integrate(
    x0: Vec3,
    v0: Vec3,
    potential: &Potential,
    params: &PhysicalParams,
    cfg: &IntegratorConfig,
    noise: Option<&NoiseConfig>,
) -> Result<Trajectory> {
    let steps = cfg.steps()?;
    validate_start(potential, params)?;
    let dyn_ = Dynamics {
        potential,
        mass: params.mass(),
        k: params.damping_strength(),
    };
    let mut rec = Recorder {
        potential,
        params,
        cfg,
        out: Trajectory {
            states: Vec::with_capacity(steps / cfg.sample_every + 2),
            speed_warning_at: None,
        },
    };
    rec.check(0.0, &x0, &v0)?;
    rec.record(0.0, x0, v0);

    let etas = match noise {
        Some(n) => sample_noise(steps, n)?,
        None => Vec::new(),
    };
    let mut prev_kick = [0.0; 3];

    let mut x = x0;
    let mut v = v0;
    for n in 0..steps {
        let t = cfg.dt * (n + 1) as f64;
        let v_start = v;
        dyn_.step(&mut x, &mut v, cfg.dt)?;
        if noise.is_some() {
            let kick = mat_vec(&omega_sqrt(&v_start), &etas[n]);
            let a = dyn_.accel(&x);
            let p = add(&dyn_.momentum(&a, &v), &sub(&kick, &prev_kick));
            v = dyn_.velocity_from_momentum(&a, &p, &v, t)?;
            prev_kick = kick;
        }
        rec.check(t, &x, &v)?;
        if (n + 1) % cfg.sample_every == 0 || n + 1 == steps {
            rec.record(t, x, v);
        }
    }
    Ok(rec.out)
}

/// Seeded white-noise source for the Langevin force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub seed: u64,
    /// Independent stream within one seed, e.g. the trajectory index.
    pub stream: u64,
    pub dt: f64,
    pub quantum_correction: bool,
    /// `𝓜ħ² = 4wħ²/(3c⁴)`.
    pub variance_scale: f64,
    /// `ħβ`, used only by the quantum correction (zero at `T = 0`).
    pub hbar_beta: f64,
}

impl NoiseConfig {
    pub fn new(params: &PhysicalParams, dt: f64, seed: u64) -> Self {
        NoiseConfig {
            seed,
            stream: 0,
            dt,
            quantum_correction: false,
            variance_scale: params.noise_intensity(),
            hbar_beta: params.beta().map_or(0.0, |b| b * params.hbar()),
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_quantum_correction(mut self, on: bool) -> Self {
        self.quantum_correction = on;
        self
    }

    /// Per-component variance of one sample before filtering.
    pub fn sample_variance(&self) -> f64 {
        self.variance_scale / self.dt
    }

    /// `ħ²β²/24`.
    pub fn filter_coefficient(&self) -> f64 {
        self.hbar_beta * self.hbar_beta / QUANTUM_FILTER_DIVISOR
    }
}

/// `n_steps` noise vectors `η_1 … η_n` with per-component variance
/// `variance_scale/dt`. With the quantum correction each sample becomes
/// `η_n − (ħ²β²/24)(η_{n+1} − 2η_n + η_{n−1})/dt²`.
pub fn sample_noise(n_steps: usize, config: &NoiseConfig) -> Result<Vec<Vec3>> {
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return Err(invalid("dt", "must be positive and finite"));
    }
    if !(config.variance_scale >= 0.0 && config.variance_scale.is_finite()) {
        return Err(invalid("variance_scale", "must be non-negative and finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream);
    let sd = libm::sqrt(config.sample_variance());
    let mut draw = || -> Vec3 {
        let mut e = [0.0; 3];
        for c in e.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *c = sd * z;
        }
        e
    };
    if !config.quantum_correction {
        return Ok((0..n_steps).map(|_| draw()).collect());
    }
    // one extra sample on each side feeds the second difference
    let raw: Vec<Vec3> = (0..n_steps + 2).map(|_| draw()).collect();
    let alpha = config.filter_coefficient() / (config.dt * config.dt);
    let mut out = vec![[0.0; 3]; n_steps];
    for (n, o) in out.iter_mut().enumerate() {
        let (prev, cur, next) = (&raw[n], &raw[n + 1], &raw[n + 2]);
        for c in 0..3 {
            o[c] = cur[c] - alpha * (next[c] - 2.0 * cur[c] + prev[c]);
        }
    }
    Ok(out)
}

/// One point of the energy balance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancePoint {
    pub t: f64,
    /// Central difference of `E + E_schott`.
    pub lhs: f64,
    /// `−2(γħ/c⁴)[a²v² + ⅓(a·v)²]`.
    pub rhs: f64,
    /// `O(k²)` term that order reduction adds to the balance:
    /// `−(8/3)k[2(v·δ)(a·v) + v²(a·δ)]`, `δ = F/M`.
    pub reduction_remainder: f64,
    /// `lhs − rhs − reduction_remainder`; vanishes as `dt²`.
    pub residual: f64,
}

/// Energy balance along a uniformly sampled trajectory.
///
/// With the exact third-order dynamics `d/dt(E + E_schott) = P_rad`. The
/// order-reduced motion satisfies it up to `reduction_remainder`, reported
/// separately so that `residual` measures discretization error only.
pub fn energy_balance_residual(
    traj: &[TrajectoryState],
    params: &PhysicalParams,
) -> Result<Vec<BalancePoint>> {
    if traj.len() < 3 {
        return Err(Error::TooShort {
            len: traj.len(),
            need: 3,
        });
    }
    let h = traj[1].t - traj[0].t;
    for w in traj.windows(2) {
        if !((w[1].t - w[0].t - h).abs() <= 1e-9 * h.abs().max(1e-300)) || !(h > 0.0) {
            return Err(Error::NonUniformSampling { t: w[1].t });
        }
    }
    let k = params.damping_strength();
    let m = params.mass();
    let mut out = Vec::with_capacity(traj.len() - 2);
    for w in traj.windows(3) {
        let s = &w[1];
        let total = |st: &TrajectoryState| st.energy + st.e_schott;
        let lhs = (total(&w[2]) - total(&w[0])) / (2.0 * h);
        let remainder = if k == 0.0 {
            0.0
        } else {
            let jerk = s.jerk.ok_or(Error::MissingHessian)?;
            let delta = scale(&damping_bracket_rate(&s.v, &s.a, &jerk), 2.0 * k / m);
            -8.0 / 3.0 * k * (2.0 * dot(&s.v, &delta) * dot(&s.a, &s.v) + dot(&s.v, &s.v) * dot(&s.a, &delta))
        };
        out.push(BalancePoint {
            t: s.t,
            lhs,
            rhs: s.p_rad,
            reduction_remainder: remainder,
            residual: lhs - s.p_rad - remainder,
        });
    }
    Ok(out)
}
