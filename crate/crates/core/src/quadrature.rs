//! Gauss–Legendre rules and product quadrature on the unit sphere.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{pol_projector, PolProjector, Vec3};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Exact for polynomials of degree `2n − 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre in `cos θ` times a uniform trapezoid rule in `φ`.
///
/// A rule of degree `d` integrates every polynomial in the components of
/// `k̂` of total degree `≤ d` exactly.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    degree: usize,
    points: Vec<(Vec3, f64)>,
}

impl SphereQuadrature {
    pub const DEFAULT_DEGREE: usize = 8;

    pub fn new(degree: usize) -> Self {
        let n_theta = degree / 2 + 1;
        let n_phi = degree + 1;
        let (nodes, weights) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut points = Vec::with_capacity(n_theta * n_phi);
        for (&ct, &wt) in nodes.iter().zip(&weights) {
            let st = libm::sqrt((1.0 - ct * ct).max(0.0));
            for j in 0..n_phi {
                let phi = dphi * j as f64;
                let k = [st * libm::cos(phi), st * libm::sin(phi), ct];
                points.push((k, wt * dphi));
            }
        }
        SphereQuadrature { degree, points }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Unit directions with solid-angle weights summing to `4π`.
    pub fn points(&self) -> &[(Vec3, f64)] {
        &self.points
    }

    /// Fails unless the rule is exact for integrands of degree `required`.
    pub fn require_degree(&self, required: usize) -> Result<()> {
        if self.degree < required {
            Err(Error::QuadratureTooCoarse {
                degree: self.degree,
                required,
            })
        } else {
            Ok(())
        }
    }

    /// `∫ dΩ f(k̂)`.
    pub fn integrate(&self, mut f: impl FnMut(&Vec3) -> f64) -> f64 {
        self.points.iter().map(|(k, w)| w * f(k)).sum()
    }
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        SphereQuadrature::new(Self::DEFAULT_DEGREE)
    }
}

/// Sphere average of [`pol_projector`], a degree-4 integrand in `k̂`.
pub fn angular_average_pol_projector(quad: &SphereQuadrature) -> Result<PolProjector> {
    quad.require_degree(4)?;
    let mut acc = PolProjector::zero();
    for (k, w) in quad.points() {
        // quadrature nodes are unit vectors up to rounding; renormalize
        let n = crate::tensor::norm(k);
        let khat = [k[0] / n, k[1] / n, k[2] / n];
        let p = pol_projector(&khat)?;
        for (a, b) in acc.0.iter_mut().flatten().flatten().flatten().zip(p.0.iter().flatten().flatten().flatten()) {
            *a += w * b;
        }
    }
    for a in acc.0.iter_mut().flatten().flatten().flatten() {
        *a /= 4.0 * PI;
    }
    Ok(acc)
}
