//! Reference solution of `u_t + u u_x = ν u_xx` on `[-1, 1]` via Cole–Hopf.
//!
//! With `φ₀(y) = exp(-P(y) / 2ν)` and `P' = u₀`, the substitution
//! `y = x - σz`, `σ = sqrt(4νt)` gives
//!
//! ```text
//! u(x, t) = ∫ (σz/t) φ₀(x - σz) e^{-z²} dz / ∫ φ₀(x - σz) e^{-z²} dz
//! ```
//!
//! Both integrals are accumulated in log space because `φ₀` reaches `e^{100}`.

use std::f64::consts::PI;

use gauss_quad::{hermite::GaussHermite, legendre::GaussLegendre};

use super::BurgersInitial;
use crate::error::{Error, Result};

/// Viscosity `0.01/π`.
pub const BURGERS_NU: f64 = 0.01 / PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BurgersMethod {
    /// Gauss–Hermite rule with the given node count (≥ 100).
    GaussHermite(usize),
    /// Composite Gauss–Legendre over `z ∈ [-Z, Z]` with panels of width `panel`.
    Composite { panel: f64, order: usize },
}

impl Default for BurgersMethod {
    fn default() -> Self {
        BurgersMethod::Composite {
            panel: 0.05,
            order: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BurgersReference {
    initial: BurgersInitial,
    method: BurgersMethod,
    /// `(z, ln w)` pairs for the Hermite rule, or `(z, w)` Legendre pairs on the unit interval.
    nodes: Vec<(f64, f64)>,
}

impl BurgersReference {
    pub fn new(initial: BurgersInitial, method: BurgersMethod) -> Result<Self> {
        let nodes = match method {
            BurgersMethod::GaussHermite(n) => {
                if n < 100 {
                    return Err(Error::config(format!(
                        "gauss-hermite needs at least 100 nodes, got {n}"
                    )));
                }
                let rule = GaussHermite::new(n)
                    .map_err(|e| Error::Quadrature(format!("gauss-hermite({n}): {e}")))?;
                rule.iter()
                    .filter(|(_, w)| *w > 0.0)
                    .map(|(z, w)| (*z, w.ln()))
                    .collect()
            }
            BurgersMethod::Composite { panel, order } => {
                if !(panel > 0.0) || order < 2 {
                    return Err(Error::config("composite rule needs panel > 0 and order >= 2"));
                }
                let rule = GaussLegendre::new(order)
                    .map_err(|e| Error::Quadrature(format!("gauss-legendre({order}): {e}")))?;
                rule.iter().map(|(z, w)| (*z, *w)).collect()
            }
        };
        Ok(Self {
            initial,
            method,
            nodes,
        })
    }

    pub fn initial_value(&self, x: f64) -> f64 {
        match self.initial {
            BurgersInitial::SinPiX => -(PI * x).sin(),
            BurgersInitial::SinX => -x.sin(),
        }
    }

    /// `ln φ₀(y) = -P(y) / 2ν`.
    fn log_phi0(&self, y: f64) -> f64 {
        match self.initial {
            BurgersInitial::SinPiX => -((PI * y).cos() - 1.0) / (PI * 2.0 * BURGERS_NU),
            BurgersInitial::SinX => -(y.cos() - 1.0) / (2.0 * BURGERS_NU),
        }
    }

    fn max_log_phi0(&self) -> f64 {
        match self.initial {
            BurgersInitial::SinPiX => 1.0 / (PI * BURGERS_NU),
            BurgersInitial::SinX => 1.0 / BURGERS_NU,
        }
    }

    pub fn value(&self, x: f64, t: f64) -> Result<f64> {
        if !(x.is_finite() && t.is_finite()) || t < 0.0 {
            return Err(Error::config(format!("burgers reference undefined at ({x}, {t})")));
        }
        if t == 0.0 {
            return Ok(self.initial_value(x));
        }
        let sigma = (4.0 * BURGERS_NU * t).sqrt();
        // Terms (log weight, z).
        let mut terms: Vec<(f64, f64)> = Vec::new();
        match self.method {
            BurgersMethod::GaussHermite(_) => {
                for &(z, lw) in &self.nodes {
                    terms.push((lw + self.log_phi0(x - sigma * z), z));
                }
            }
            BurgersMethod::Composite { panel, .. } => {
                let half = (self.max_log_phi0() + 40.0).sqrt() * 1.05;
                let panels = (2.0 * half / panel).ceil() as usize;
                let width = 2.0 * half / panels as f64;
                for p in 0..panels {
                    let mid = -half + (p as f64 + 0.5) * width;
                    for &(s, w) in &self.nodes {
                        let z = mid + 0.5 * width * s;
                        let lw = (0.5 * width * w).ln() - z * z;
                        terms.push((lw + self.log_phi0(x - sigma * z), z));
                    }
                }
            }
        }
        let (imax, m) = terms
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bm), (i, &(e, _))| {
                if e > bm {
                    (i, e)
                } else {
                    (bi, bm)
                }
            });
        if let BurgersMethod::GaussHermite(_) = self.method {
            if imax == 0 || imax + 1 == terms.len() {
                return Err(Error::Quadrature(format!(
                    "gauss-hermite mass sits on the outermost node at ({x}, {t})"
                )));
            }
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(e, z) in &terms {
            let w = (e - m).exp();
            num += w * z;
            den += w;
        }
        let u = sigma / t * num / den;
        if !u.is_finite() || den <= 0.0 {
            return Err(Error::Quadrature(format!("degenerate quotient at ({x}, {t})")));
        }
        Ok(u)
    }
}

/// Independent explicit finite-difference solve for the `-sin(πx)` initial
/// condition with homogeneous Dirichlet ends.
///
/// Conservative central fluxes, second-order diffusion and SSP-RK3 time
/// stepping on `nx` nodes. Returns the node coordinates and `u(·, t_end)`.
pub fn burgers_fd_reference(nx: usize, t_end: f64) -> (Vec<f64>, Vec<f64>) {
    let dx = 2.0 / (nx - 1) as f64;
    let xs: Vec<f64> = (0..nx).map(|i| -1.0 + dx * i as f64).collect();
    let mut u: Vec<f64> = xs.iter().map(|&x| -(PI * x).sin()).collect();
    u[0] = 0.0;
    u[nx - 1] = 0.0;
    let dt_limit = (0.4 * dx * dx / BURGERS_NU).min(0.5 * dx);
    let steps = (t_end / dt_limit).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let rhs = |u: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[nx - 1] = 0.0;
        for i in 1..nx - 1 {
            let fr = 0.25 * (u[i] * u[i] + u[i + 1] * u[i + 1]);
            let fl = 0.25 * (u[i - 1] * u[i - 1] + u[i] * u[i]);
            let diff = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
            out[i] = -(fr - fl) / dx + BURGERS_NU * diff;
        }
    };
    let mut k = vec![0.0; nx];
    let mut u1 = vec![0.0; nx];
    let mut u2 = vec![0.0; nx];
    for _ in 0..steps {
        rhs(&u, &mut k);
        for i in 0..nx {
            u1[i] = u[i] + dt * k[i];
        }
        rhs(&u1, &mut k);
        for i in 0..nx {
            u2[i] = 0.75 * u[i] + 0.25 * (u1[i] + dt * k[i]);
        }
        rhs(&u2, &mut k);
        for i in 0..nx {
            u[i] = u[i] / 3.0 + 2.0 / 3.0 * (u2[i] + dt * k[i]);
        }
    }
    (xs, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> BurgersReference {
        BurgersReference::new(BurgersInitial::SinPiX, BurgersMethod::default()).unwrap()
    }

    #[test]
    fn initial_condition() {
        let r = reference();
        for x in [-0.9, -0.3, 0.0, 0.2, 0.77] {
            assert_eq!(r.value(x, 0.0).unwrap(), -(PI * x).sin());
        }
        let lit = BurgersReference::new(BurgersInitial::SinX, BurgersMethod::default()).unwrap();
        assert_eq!(lit.value(0.5, 0.0).unwrap(), -(0.5f64).sin());
    }

    #[test]
    fn odd_symmetry() {
        let r = reference();
        for t in [0.1, 0.4, 0.9, 1.0] {
            assert!(r.value(0.0, t).unwrap().abs() < 1e-12);
            let a = r.value(0.37, t).unwrap();
            let b = r.value(-0.37, t).unwrap();
            assert!((a + b).abs() < 1e-10);
        }
    }

    #[test]
    fn short_time_tracks_initial_data() {
        let r = reference();
        let u = r.value(0.5, 1e-6).unwrap();
        assert!((u + 1.0).abs() < 1e-4);
    }

    #[test]
    fn agrees_with_finite_differences() {
        let r = reference();
        let (xs, u) = burgers_fd_reference(2001, 0.5);
        for x in [-0.75, -0.5, 0.25, 0.5, 0.9] {
            let i = xs.iter().position(|&v| (v - x).abs() < 1e-9).unwrap();
            let q = r.value(x, 0.5).unwrap();
            assert!((q - u[i]).abs() < 1e-4, "x={x}: {q} vs {}", u[i]);
        }
    }

    #[test]
    fn hermite_matches_composite_away_from_shock() {
        let r = reference();
        let gh = BurgersReference::new(BurgersInitial::SinPiX, BurgersMethod::GaussHermite(100)).unwrap();
        for (x, t) in [(0.5, 0.5), (-0.5, 0.2), (0.9, 1.0), (0.3, 0.05)] {
            let a = r.value(x, t).unwrap();
            let b = gh.value(x, t).unwrap();
            assert!((a - b).abs() < 1e-6, "({x},{t}): {a} vs {b}");
        }
    }

    #[test]
    fn refinement_is_stable() {
        let r = reference();
        let fine = BurgersReference::new(
            BurgersInitial::SinPiX,
            BurgersMethod::Composite { panel: 0.02, order: 10 },
        )
        .unwrap();
        for (x, t) in [(0.003, 0.8), (0.01, 1.0), (-0.02, 0.6)] {
            assert!((r.value(x, t).unwrap() - fine.value(x, t).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_small_hermite_rules() {
        assert!(BurgersReference::new(BurgersInitial::SinPiX, BurgersMethod::GaussHermite(20)).is_err());
    }
}
