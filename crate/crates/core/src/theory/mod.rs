//! Frequency-domain kernels of the linearized two-layer tanh dynamics (d = 1).
//!
//! The five functions are `g₁ = (σ, aσ')`, `g₂ = aσ'`, `g₃ = (σ'', aσ''')`,
//! `g₄ = 2aσ''` and `g₅ = aσ'''` with `σ = tanh`, and
//! `F[g](ξ) = ∫ g(x) e^{-2πiξx} dx`. With `c(η) = csch(π²η)`:
//!
//! ```text
//! F[g₁] = (-iπ c, 2π²aη c)      F[g₂] = 2π²aη c
//! F[g₃] = (4π³iη² c, -8π⁴aη³ c)  F[g₄] = 8π³iaη² c    F[g₅] = -8π⁴aη³ c
//! ```
//!
//! `h(r^α, gᵢ, gⱼ)(ξ) = E_{a,r}[r^α F[gᵢ](ξ/r) · F[gⱼ](-ξ/r)]`, where vector
//! functions are paired component-wise and summed.

mod lfp;
mod rate;

use std::f64::consts::PI;

use gauss_quad::{hermite::GaussHermite, legendre::GaussLegendre};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use lfp::{lfp_simulate, LfpMethod, LfpTrajectory};
pub use rate::{rate_peak, xi_n_csch2};

use crate::error::{Error, Result};
use crate::rng::{streams, Rng};

/// `ξ^p csch(π²ξ)`, finite wherever the limit is.
pub fn xp_csch(p: i32, xi: f64) -> f64 {
    let x = PI * PI * xi;
    if x == 0.0 {
        return match p {
            0 => f64::INFINITY,
            1 => 1.0 / (PI * PI),
            _ => 0.0,
        };
    }
    let ax = x.abs();
    let csch_abs = if ax > 300.0 {
        2.0 * (-ax).exp() / (1.0 - (-2.0 * ax).exp())
    } else {
        1.0 / ax.sinh()
    };
    xi.powi(p) * csch_abs * x.signum()
}

/// Value of `F[gᵢ]`: one component, or two for `g₁` and `g₃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GValue {
    comps: [Complex64; 2],
    len: usize,
}

impl GValue {
    fn scalar(c: Complex64) -> Self {
        Self {
            comps: [c, Complex64::new(0.0, 0.0)],
            len: 1,
        }
    }

    fn pair(a: Complex64, b: Complex64) -> Self {
        Self {
            comps: [a, b],
            len: 2,
        }
    }

    pub fn components(&self) -> &[Complex64] {
        &self.comps[..self.len]
    }

    /// Each component as a real number: the real part when the component is
    /// real, otherwise the coefficient of `i`.
    pub fn signed_magnitudes(&self) -> Vec<f64> {
        self.components()
            .iter()
            .map(|c| if c.im == 0.0 { c.re } else { c.im })
            .collect()
    }

    fn pair_with(&self, other: &GValue) -> Complex64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Closed-form `F[gᵢ](ξ)` for tanh.
pub fn fourier_g(i: usize, a: f64, xi: f64) -> Result<GValue> {
    let im = |v: f64| Complex64::new(0.0, v);
    let re = |v: f64| Complex64::new(v, 0.0);
    let p2 = PI * PI;
    Ok(match i {
        1 => GValue::pair(im(-PI * xp_csch(0, xi)), re(2.0 * p2 * a * xp_csch(1, xi))),
        2 => GValue::scalar(re(2.0 * p2 * a * xp_csch(1, xi))),
        3 => GValue::pair(
            im(4.0 * PI * p2 * xp_csch(2, xi)),
            re(-8.0 * p2 * p2 * a * xp_csch(3, xi)),
        ),
        4 => GValue::scalar(im(8.0 * PI * p2 * a * xp_csch(2, xi))),
        5 => GValue::scalar(re(-8.0 * p2 * p2 * a * xp_csch(3, xi))),
        _ => return Err(Error::config(format!("g-function index must be 1..=5, got {i}"))),
    })
}

fn check_pairing(i: usize, j: usize) -> Result<()> {
    let len = |k: usize| if k == 1 || k == 3 { 2 } else { 1 };
    for k in [i, j] {
        if !(1..=5).contains(&k) {
            return Err(Error::config(format!("g-function index must be 1..=5, got {k}")));
        }
    }
    if len(i) != len(j) {
        return Err(Error::config(format!(
            "g{i} and g{j} have different numbers of components"
        )));
    }
    Ok(())
}

/// Law of the hidden-unit parameters: `a ~ N(0, σ_a²)`, `r = |w|` with
/// `w ~ N(0, σ_w²)`; `σ_b` enters only through `κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDistribution {
    pub sigma_a: f64,
    pub sigma_w: f64,
    pub sigma_b: f64,
}

impl Default for ParamDistribution {
    fn default() -> Self {
        Self {
            sigma_a: 1.0,
            sigma_w: 1.0,
            sigma_b: 1.0,
        }
    }
}

impl ParamDistribution {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_a", self.sigma_a),
            ("sigma_w", self.sigma_w),
            ("sigma_b", self.sigma_b),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `κ = Γ(1/2) / (2√2 π σ_b) = 1 / (2√(2π) σ_b)`.
    pub fn kappa(&self) -> f64 {
        1.0 / (2.0 * (2.0 * PI).sqrt() * self.sigma_b)
    }

    fn r_density(&self, r: f64) -> f64 {
        let s = self.sigma_w;
        (2.0 / PI).sqrt() / s * (-0.5 * r * r / (s * s)).exp()
    }

    /// Location of the bulk of `p(r) e^{-2π²ξ/r}`: `r* = (2π²ξσ_w²)^{1/3}`.
    fn r_peak(&self, xi: f64) -> f64 {
        (2.0 * PI * PI * xi.abs() * self.sigma_w * self.sigma_w).cbrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum KernelMethod {
    /// Importance-sampled Monte Carlo: `a` from its law, `r` from a folded
    /// normal of scale `max(σ_w, r*)` with likelihood-ratio weights.
    MonteCarlo { samples: usize, seed: u64 },
    /// Gauss–Hermite (64 nodes) in `a` and composite 16-point Gauss–Legendre
    /// with `nodes` total nodes in `r`.
    Quadrature { nodes: usize },
}

impl Default for KernelMethod {
    fn default() -> Self {
        KernelMethod::Quadrature { nodes: 1024 }
    }
}

impl KernelMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelMethod::MonteCarlo { samples, .. } if samples < 10_000 => Err(Error::config(
                format!("monte carlo needs at least 10^4 samples, got {samples}"),
            )),
            KernelMethod::Quadrature { nodes } if nodes < 64 => Err(Error::config(format!(
                "quadrature needs at least 64 nodes, got {nodes}"
            ))),
            _ => Ok(()),
        }
    }
}

/// An expectation estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Monte Carlo standard error; `None` for quadrature.
    pub std_error: Option<f64>,
    /// Some integrand values at small `r` were non-finite and were dropped.
    pub truncated: bool,
}

/// `E_{a,r}[f(a, r)]` for a complex integrand whose imaginary part must vanish.
pub fn expectation(
    f: impl Fn(f64, f64) -> Complex64,
    xi: f64,
    dist: &ParamDistribution,
    method: KernelMethod,
) -> Result<Estimate> {
    dist.validate()?;
    method.validate()?;
    let mut truncated = false;
    let mut eval = |a: f64, r: f64| -> Complex64 {
        let v = f(a, r);
        if v.re.is_finite() && v.im.is_finite() {
            v
        } else {
            truncated = true;
            Complex64::new(0.0, 0.0)
        }
    };
    let (value, std_error) = match method {
        KernelMethod::MonteCarlo { samples, seed } => {
            let mut rng = Rng::with_stream(seed, streams::THEORY);
            let s = dist.sigma_w.max(dist.r_peak(xi));
            let (mut sum, mut sum_sq, mut sum_im) = (0.0, 0.0, 0.0);
            for _ in 0..samples {
                let a = dist.sigma_a * rng.normal();
                let r = loop {
                    let r = (s * rng.normal()).abs();
                    if r > 0.0 {
                        break r;
                    }
                };
                let q = (2.0 / PI).sqrt() / s * (-0.5 * r * r / (s * s)).exp();
                let w = dist.r_density(r) / q;
                let v = eval(a, r) * w;
                sum += v.re;
                sum_sq += v.re * v.re;
                sum_im += v.im;
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
            (Complex64::new(mean, sum_im / n), Some((var / n).sqrt()))
        }
        KernelMethod::Quadrature { nodes } => {
            let gh = GaussHermite::new(64).map_err(|e| Error::Quadrature(e.to_string()))?;
            let gl = GaussLegendre::new(16).map_err(|e| Error::Quadrature(e.to_string()))?;
            let panels = (nodes / 16).max(4);
            let r_max = dist.r_peak(xi) + 12.0 * dist.sigma_w;
            let width = r_max / panels as f64;
            let mut total = Complex64::new(0.0, 0.0);
            for p in 0..panels {
                let mid = (p as f64 + 0.5) * width;
                for (s, wr) in gl.iter() {
                    let r = mid + 0.5 * width * s;
                    let pr = dist.r_density(r) * 0.5 * width * wr;
                    let mut inner = Complex64::new(0.0, 0.0);
                    for (z, wa) in gh.iter() {
                        let a = std::f64::consts::SQRT_2 * dist.sigma_a * z;
                        inner += eval(a, r) * (wa / PI.sqrt());
                    }
                    total += inner * pr;
                }
            }
            (total, None)
        }
    };
    let scale = value.re.abs().max(1e-300);
    if value.im.abs() > 1e-10 * scale {
        return Err(Error::Numeric {
            op: "expectation has a non-vanishing imaginary part".into(),
            value: value.im,
        });
    }
    Ok(Estimate {
        value: value.re,
        std_error,
        truncated,
    })
}

/// The `h(r^α, gᵢ, gⱼ)` expectation at frequency `ξ`.
///
/// Pairs of opposite parity give a purely imaginary expectation and are
/// rejected.
pub fn h_kernel(
    alpha: f64,
    i: usize,
    j: usize,
    xi: f64,
    dist: &ParamDistribution,
    method: KernelMethod,
) -> Result<Estimate> {
    check_pairing(i, j)?;
    if !(xi > 0.0) {
        return Err(Error::config(format!("h kernel needs ξ > 0, got {xi}")));
    }
    expectation(
        |a, r| {
            let eta = xi / r;
            let gi = fourier_g(i, a, eta).expect("checked index");
            let gj = fourier_g(j, a, -eta).expect("checked index");
            gi.pair_with(&gj) * r.powf(alpha)
        },
        xi,
        dist,
        method,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Laplacian-error dynamics, coefficient of `F[v'']`.
    Delta,
    /// Solution-error dynamics, coefficient of `F[v]`.
    Solution,
}

/// The pieces of the two diagonal operators at one frequency, each already
/// multiplied by `κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParts {
    /// `κ[h(r³,g₃,g₃) + h(r,g₄,g₄)]`.
    pub delta_residual: Estimate,
    /// `κ h(r,g₃,g₁)`, multiplying `γ F[v]`.
    pub delta_gamma: Estimate,
    /// `κ(-4π²ξ²) h(r,g₁,g₃)`, the residual coefficient of `F[v]`.
    pub solution_residual: Estimate,
    /// `κ h(1/r,g₁,g₁)`, multiplying `γ F[v]`.
    pub solution_gamma: Estimate,
}

fn combine(terms: &[(f64, Estimate)]) -> Estimate {
    let value = terms.iter().map(|(c, e)| c * e.value).sum();
    let std_error = if terms.iter().all(|(_, e)| e.std_error.is_some()) {
        // Terms share samples, so the bound adds errors linearly.
        Some(terms.iter().map(|(c, e)| c.abs() * e.std_error.unwrap()).sum())
    } else {
        None
    };
    Estimate {
        value,
        std_error,
        truncated: terms.iter().any(|(_, e)| e.truncated),
    }
}

/// The h-kernel terms that make up both diagonal operators.
pub fn kernel_parts(xi: f64, dist: &ParamDistribution, method: KernelMethod) -> Result<KernelParts> {
    let k = dist.kappa();
    let h = |alpha, i, j| h_kernel(alpha, i, j, xi, dist, method);
    let h333 = h(3.0, 3, 3)?;
    let h144 = h(1.0, 4, 4)?;
    let h131 = h(1.0, 3, 1)?;
    let h113 = h(1.0, 1, 3)?;
    let hm11 = h(-1.0, 1, 1)?;
    let lift = -4.0 * PI * PI * xi * xi;
    Ok(KernelParts {
        delta_residual: combine(&[(k, h333), (k, h144)]),
        delta_gamma: combine(&[(k, h131)]),
        solution_residual: combine(&[(k * lift, h113)]),
        solution_gamma: combine(&[(k, hm11)]),
    })
}

impl KernelParts {
    /// Diagonal coefficient for the chosen operator with balance weight `γ`.
    ///
    /// For the delta operator the `γ` term multiplies `F[v] = F[v''] / (-4π²ξ²)`
    /// and is converted accordingly.
    pub fn total(&self, which: KernelKind, xi: f64, gamma: f64) -> f64 {
        match which {
            KernelKind::Delta => {
                self.delta_residual.value
                    + gamma * self.delta_gamma.value / (-4.0 * PI * PI * xi * xi)
            }
            KernelKind::Solution => self.solution_residual.value + gamma * self.solution_gamma.value,
        }
    }
}

/// Coefficient of the simplified operator at one frequency.
pub fn simplified_kernel(
    which: KernelKind,
    xi: f64,
    gamma: f64,
    dist: &ParamDistribution,
    method: KernelMethod,
) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::config(format!("gamma must be >= 0, got {gamma}")));
    }
    Ok(kernel_parts(xi, dist, method)?.total(which, xi, gamma))
}

/// Both simplified operators on a frequency grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalKernel {
    pub xi: Vec<f64>,
    pub gamma: f64,
    pub dist: ParamDistribution,
    pub parts: Vec<KernelParts>,
    pub delta: Vec<f64>,
    pub solution: Vec<f64>,
}

impl DiagonalKernel {
    pub fn compute(xi: &[f64], gamma: f64, dist: &ParamDistribution, method: KernelMethod) -> Result<Self> {
        if xi.is_empty() || xi.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::config("frequency grid must be non-empty and positive"));
        }
        if !(gamma >= 0.0) {
            return Err(Error::config(format!("gamma must be >= 0, got {gamma}")));
        }
        let parts = xi
            .iter()
            .map(|&x| kernel_parts(x, dist, method))
            .collect::<Result<Vec<_>>>()?;
        let delta = parts
            .iter()
            .zip(xi)
            .map(|(p, &x)| p.total(KernelKind::Delta, x, gamma))
            .collect();
        let solution = parts
            .iter()
            .zip(xi)
            .map(|(p, &x)| p.total(KernelKind::Solution, x, gamma))
            .collect();
        Ok(Self {
            xi: xi.to_vec(),
            gamma,
            dist: *dist,
            parts,
            delta,
            solution,
        })
    }

    pub fn rates(&self, which: KernelKind) -> &[f64] {
        match which {
            KernelKind::Delta => &self.delta,
            KernelKind::Solution => &self.solution,
        }
    }
}

/// The closed-form bracket integrands of the simplified operators, without `κ`,
/// written out term by term (an independent transcription of the assembly).
pub fn bracket_integrand(which: KernelKind, gamma_part: bool, a: f64, r: f64, xi: f64) -> f64 {
    let c = xp_csch(0, xi / r);
    let c2 = c * c;
    let (p2, p4) = (PI * PI, PI.powi(4));
    let a2 = a * a;
    let x2 = xi * xi;
    let v = match (which, gamma_part) {
        (KernelKind::Delta, false) => {
            64.0 * p4 * p4 * a2 * x2 * x2 * x2 / r.powi(3)
                + 16.0 * p4 * p2 * x2 * x2 / r
                + 64.0 * p4 * p2 * a2 * x2 * x2 / r.powi(3)
        }
        (KernelKind::Delta, true) => -16.0 * p4 * p2 * a2 * x2 * x2 / r.powi(3) - 4.0 * p4 * x2 / r,
        (KernelKind::Solution, false) => {
            64.0 * p4 * p4 * a2 * x2 * x2 * x2 / r.powi(3) + 16.0 * p4 * p2 * x2 * x2 / r
        }
        (KernelKind::Solution, true) => 4.0 * p4 * a2 * x2 / r.powi(3) + p2 / r,
    };
    v * c2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g2_limits_and_values() {
        let g = fourier_g(2, 1.0, 0.0).unwrap().signed_magnitudes();
        assert!((g[0] - 2.0).abs() < 1e-15);
        let g = fourier_g(2, 1.0, 1.0).unwrap().signed_magnitudes();
        let expect = 2.0 * PI * PI / (PI * PI).sinh();
        assert!((g[0] - expect).abs() < 1e-15);
        assert!((g[0] - 2.042e-3).abs() < 1e-6);
        let tiny = fourier_g(2, 1.0, 1e-9).unwrap().signed_magnitudes()[0];
        assert!((tiny - 2.0).abs() < 1e-12);
    }

    #[test]
    fn g2_matches_numerical_transform() {
        // ∫ sech²(x) cos(2πξx) dx by composite Gauss–Legendre on [-40, 40].
        let gl = GaussLegendre::new(20).unwrap();
        for xi in [0.25, 0.5, 1.0] {
            let mut s = 0.0;
            for p in 0..400 {
                let a = -40.0 + 0.2 * p as f64;
                s += gl.integrate(a, a + 0.2, |x| (2.0 * PI * xi * x).cos() / x.cosh().powi(2));
            }
            let g = fourier_g(2, 1.0, xi).unwrap().signed_magnitudes()[0];
            assert!((s - g).abs() < 1e-10, "ξ={xi}: {s} vs {g}");
        }
    }

    #[test]
    fn g5_equals_g3_b_component() {
        for xi in [0.1, 0.7, 2.0] {
            let g5 = fourier_g(5, 1.0, xi).unwrap().signed_magnitudes()[0];
            let g3 = fourier_g(3, 1.0, xi).unwrap().signed_magnitudes()[1];
            assert!((g5.abs() / g3.abs() - 1.0).abs() < 1e-15);
        }
        assert!(fourier_g(6, 1.0, 1.0).is_err());
    }

    #[test]
    fn stable_csch_for_large_arguments() {
        let v = xp_csch(3, 200.0);
        assert!(v.is_finite() && v >= 0.0);
        assert_eq!(xp_csch(3, 1e5), 0.0);
        assert!((xp_csch(0, -0.3) + xp_csch(0, 0.3)).abs() < 1e-15);
    }

    #[test]
    fn kappa_in_one_dimension() {
        let d = ParamDistribution::default();
        assert!((d.kappa() - 1.0 / (2.0 * (2.0 * PI).sqrt())).abs() < 1e-15);
        let d2 = ParamDistribution {
            sigma_b: 2.0,
            ..d
        };
        assert!((d2.kappa() * 2.0 - d.kappa()).abs() < 1e-15);
    }

    #[test]
    fn mismatched_parity_is_rejected() {
        let d = ParamDistribution::default();
        let m = KernelMethod::Quadrature { nodes: 128 };
        assert!(h_kernel(1.0, 4, 2, 1.0, &d, m).is_err());
        assert!(h_kernel(1.0, 1, 2, 1.0, &d, m).is_err());
        assert!(h_kernel(1.0, 2, 2, -1.0, &d, m).is_err());
    }

    #[test]
    fn h22_is_nonnegative() {
        let d = ParamDistribution::default();
        for xi in [0.05, 0.5, 1.0, 3.0] {
            let v = h_kernel(1.0, 2, 2, xi, &d, KernelMethod::Quadrature { nodes: 256 }).unwrap();
            assert!(v.value >= 0.0);
        }
    }

    #[test]
    fn brackets_match_assembly() {
        let d = ParamDistribution::default();
        let m = KernelMethod::Quadrature { nodes: 1024 };
        for xi in [0.5, 1.0, 2.0] {
            let parts = kernel_parts(xi, &d, m).unwrap();
            for (which, gamma_part, got) in [
                (KernelKind::Delta, false, parts.delta_residual.value),
                (KernelKind::Delta, true, parts.delta_gamma.value),
                (KernelKind::Solution, false, parts.solution_residual.value),
                (KernelKind::Solution, true, parts.solution_gamma.value),
            ] {
                let direct = expectation(
                    |a, r| Complex64::new(bracket_integrand(which, gamma_part, a, r, xi), 0.0),
                    xi,
                    &d,
                    m,
                )
                .unwrap()
                .value
                    * d.kappa();
                assert!(
                    (got - direct).abs() < 1e-9 * direct.abs(),
                    "{which:?} {gamma_part} ξ={xi}: {got} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn printed_fifth_power_differs_from_assembly() {
        let d = ParamDistribution::default();
        let m = KernelMethod::Quadrature { nodes: 1024 };
        let xi = 1.0;
        let h = h_kernel(1.0, 4, 4, xi, &d, m).unwrap().value;
        let c = |r: f64| xp_csch(0, xi / r).powi(2);
        let r3 = expectation(|a, r| Complex64::new(64.0 * PI.powi(6) * a * a / r.powi(3) * c(r), 0.0), xi, &d, m)
            .unwrap()
            .value;
        let r5 = expectation(|a, r| Complex64::new(64.0 * PI.powi(6) * a * a / r.powi(5) * c(r), 0.0), xi, &d, m)
            .unwrap()
            .value;
        assert!((h - r3).abs() < 1e-9 * r3);
        assert!((h - r5).abs() > 1e-2 * r5);
    }

    #[test]
    fn solution_kernel_positive_and_gamma_zero() {
        let d = ParamDistribution::default();
        let m = KernelMethod::Quadrature { nodes: 512 };
        for xi in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let p = kernel_parts(xi, &d, m).unwrap();
            assert!(p.total(KernelKind::Solution, xi, 1.0) > 0.0);
            assert_eq!(p.total(KernelKind::Solution, xi, 0.0), p.solution_residual.value);
            assert!(p.delta_gamma.value < 0.0);
            assert!(p.total(KernelKind::Delta, xi, 1.0) > 0.0);
        }
    }

    #[test]
    fn method_validation() {
        assert!(KernelMethod::MonteCarlo { samples: 10, seed: 0 }.validate().is_err());
        assert!(KernelMethod::Quadrature { nodes: 8 }.validate().is_err());
        let bad = ParamDistribution {
            sigma_a: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
