//! The five benchmark problems: Poisson toy, Burgers, heat, diffusion and wave.
//!
//! Points are `[x]` for the stationary Poisson problem and `[x, t]` otherwise.

mod burgers;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use burgers::{burgers_fd_reference, BurgersMethod, BurgersReference, BURGERS_NU};

use crate::autodiff::{Jet2, JetVars, PointSet, Tape, Tracking, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Coordinate index of space.
pub const X: usize = 0;
/// Coordinate index of time.
pub const T: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    PoissonToy,
    Burgers,
    Heat,
    Diffusion,
    Wave,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 5] = [
        ProblemKind::PoissonToy,
        ProblemKind::Burgers,
        ProblemKind::Heat,
        ProblemKind::Diffusion,
        ProblemKind::Wave,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::PoissonToy => "poisson_toy",
            ProblemKind::Burgers => "burgers",
            ProblemKind::Heat => "heat",
            ProblemKind::Diffusion => "diffusion",
            ProblemKind::Wave => "wave",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown problem `{s}`")))
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial condition used for Burgers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurgersInitial {
    /// `u(x, 0) = -sin(πx)`, the usual benchmark.
    #[default]
    SinPiX,
    /// `u(x, 0) = -sin(x)` read literally.
    SinX,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Boundary,
    Initial,
}

/// How points are placed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum Sampling {
    /// Inclusive linspace grids; `n_t` is ignored for stationary problems.
    Equidistant { n_x: usize, n_t: usize },
    MonteCarlo { n: usize, seed: u64 },
}

/// Diffusion modes `(k, c_k)`: `u = e^{-t} Σ c_k sin(kx)`.
const DIFFUSION_MODES: [(f64, f64); 5] = [
    (1.0, 1.0),
    (2.0, 0.5),
    (3.0, 1.0 / 3.0),
    (4.0, 0.25),
    (8.0, 0.125),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub kind: ProblemKind,
    #[serde(default)]
    pub burgers_initial: BurgersInitial,
}

impl Problem {
    pub fn new(kind: ProblemKind) -> Self {
        Self {
            kind,
            burgers_initial: BurgersInitial::default(),
        }
    }

    pub fn with_burgers_initial(mut self, ic: BurgersInitial) -> Self {
        self.burgers_initial = ic;
        self
    }

    /// Differences between this problem and its textbook statement, for run manifests.
    pub fn discrepancies(&self) -> Vec<String> {
        match (self.kind, self.burgers_initial) {
            (ProblemKind::Burgers, BurgersInitial::SinPiX) => vec![
                "burgers initial condition is -sin(pi x) (vanishes at x = +-1); the printed form is -sin(x)"
                    .to_string(),
            ],
            (ProblemKind::Burgers, BurgersInitial::SinX) => vec![
                "burgers initial condition is -sin(x), which is not zero at the Dirichlet ends x = +-1"
                    .to_string(),
            ],
            _ => Vec::new(),
        }
    }

    pub fn space_domain(&self) -> (f64, f64) {
        match self.kind {
            ProblemKind::PoissonToy => (0.0, 2.0 * PI),
            ProblemKind::Burgers => (-1.0, 1.0),
            ProblemKind::Heat => (0.0, 1.0),
            ProblemKind::Diffusion | ProblemKind::Wave => (-PI, PI),
        }
    }

    pub fn time_domain(&self) -> Option<(f64, f64)> {
        match self.kind {
            ProblemKind::PoissonToy => None,
            ProblemKind::Wave => Some((0.0, 10.0)),
            _ => Some((0.0, 1.0)),
        }
    }

    pub fn is_stationary(&self) -> bool {
        self.time_domain().is_none()
    }

    pub fn input_dim(&self) -> usize {
        if self.is_stationary() {
            1
        } else {
            2
        }
    }

    pub fn has_closed_form(&self) -> bool {
        self.kind != ProblemKind::Burgers
    }

    fn split(&self, point: &[f64]) -> Result<(f64, f64)> {
        if point.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: point.len(),
            });
        }
        Ok((point[X], point.get(T).copied().unwrap_or(0.0)))
    }

    /// Closed-form solution. Burgers has none; use [`BurgersReference`].
    pub fn exact(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.exact_dense(x, t)?.0)
    }

    pub fn exact_at(&self, point: &[f64]) -> Result<f64> {
        let (x, t) = self.split(point)?;
        self.exact(x, t)
    }

    /// Value, gradient and Hessian (dense, row-major) of the closed form.
    fn exact_dense(&self, x: f64, t: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        Ok(match self.kind {
            ProblemKind::PoissonToy => {
                let v = x.sin() + (10.0 * x).sin();
                let dx = x.cos() + 10.0 * (10.0 * x).cos();
                let dxx = -x.sin() - 100.0 * (10.0 * x).sin();
                (v, vec![dx], vec![dxx])
            }
            ProblemKind::Heat => {
                let e = (-PI * PI * t).exp();
                let (s, c) = (PI * x).sin_cos();
                let v = e * s;
                let ux = e * PI * c;
                let ut = -PI * PI * v;
                let uxx = -PI * PI * v;
                let uxt = -PI * PI * ux;
                let utt = PI.powi(4) * v;
                (v, vec![ux, ut], vec![uxx, uxt, uxt, utt])
            }
            ProblemKind::Diffusion => {
                let e = (-t).exp();
                let (mut s, mut c, mut s2) = (0.0, 0.0, 0.0);
                for (k, ck) in DIFFUSION_MODES {
                    let (sk, cs) = (k * x).sin_cos();
                    s += ck * sk;
                    c += ck * k * cs;
                    s2 -= ck * k * k * sk;
                }
                let v = e * s;
                (v, vec![e * c, -v], vec![e * s2, -e * c, -e * c, v])
            }
            ProblemKind::Wave => {
                let (s, c) = (x - t).sin_cos();
                (s, vec![c, -c], vec![-s, s, s, -s])
            }
            ProblemKind::Burgers => {
                return Err(Error::Unavailable(
                    "burgers has no closed-form solution; use BurgersReference".into(),
                ))
            }
        })
    }

    /// Full jet of the closed-form solution at `point`.
    pub fn exact_jet(&self, point: &[f64], tracking: &Tracking) -> Result<Jet2> {
        let (x, t) = self.split(point)?;
        tracking.validate(self.input_dim())?;
        let (v, d1, d2) = self.exact_dense(x, t)?;
        Ok(Jet2::from_dense(v, &d1, &d2, tracking))
    }

    /// Right-hand side `f` of `L u = f`.
    pub fn source(&self, x: f64, t: f64) -> f64 {
        match self.kind {
            ProblemKind::PoissonToy => -x.sin() - 100.0 * (10.0 * x).sin(),
            ProblemKind::Diffusion => {
                let e = (-t).exp();
                e * (1.5 * (2.0 * x).sin()
                    + 8.0 / 3.0 * (3.0 * x).sin()
                    + 3.75 * (4.0 * x).sin()
                    + 63.0 / 8.0 * (8.0 * x).sin())
            }
            ProblemKind::Burgers | ProblemKind::Heat | ProblemKind::Wave => 0.0,
        }
    }

    pub fn source_at(&self, point: &[f64]) -> Result<f64> {
        let (x, t) = self.split(point)?;
        Ok(self.source(x, t))
    }

    /// Initial data `h(x)`; `None` for the stationary problem.
    pub fn initial(&self, x: f64) -> Option<f64> {
        match self.kind {
            ProblemKind::PoissonToy => None,
            ProblemKind::Burgers => Some(match self.burgers_initial {
                BurgersInitial::SinPiX => -(PI * x).sin(),
                BurgersInitial::SinX => -x.sin(),
            }),
            ProblemKind::Heat => Some((PI * x).sin()),
            ProblemKind::Diffusion => Some(
                DIFFUSION_MODES
                    .iter()
                    .map(|&(k, c)| c * (k * x).sin())
                    .sum(),
            ),
            ProblemKind::Wave => Some(x.sin()),
        }
    }

    /// Boundary data `g(x, t)` on `x ∈ {x_lo, x_hi}`.
    ///
    /// For the wave problem `g = sin(t)`, which coincides with `sin(x - t)` at
    /// `x = ±π`.
    pub fn boundary(&self, _x: f64, t: f64) -> f64 {
        match self.kind {
            ProblemKind::Wave => t.sin(),
            _ => 0.0,
        }
    }

    /// Derivatives the residual operator reads.
    pub fn residual_tracking(&self) -> Tracking {
        match self.kind {
            ProblemKind::PoissonToy => Tracking::new(&[], &[(X, X)]),
            ProblemKind::Heat | ProblemKind::Diffusion => Tracking::new(&[T], &[(X, X)]),
            ProblemKind::Wave => Tracking::new(&[], &[(T, T), (X, X)]),
            ProblemKind::Burgers => Tracking::new(&[X, T], &[(X, X)]),
        }
    }

    /// `L u - f` from a jet.
    pub fn residual(&self, jet: &Jet2, x: f64, t: f64) -> Result<f64> {
        let f = self.source(x, t);
        Ok(match self.kind {
            ProblemKind::PoissonToy => jet.require_d2(X, X)? - f,
            ProblemKind::Heat | ProblemKind::Diffusion => {
                jet.require_d1(T)? - jet.require_d2(X, X)? - f
            }
            ProblemKind::Wave => jet.require_d2(T, T)? - jet.require_d2(X, X)? - f,
            ProblemKind::Burgers => {
                jet.require_d1(T)? + jet.value * jet.require_d1(X)?
                    - BURGERS_NU * jet.require_d2(X, X)?
                    - f
            }
        })
    }

    pub fn residual_at(&self, jet: &Jet2, point: &[f64]) -> Result<f64> {
        let (x, t) = self.split(point)?;
        self.residual(jet, x, t)
    }

    /// `L u - f` at the `i`-th point of a batch, recorded on the tape.
    pub fn residual_var<'t>(
        &self,
        tape: &'t Tape,
        jets: &JetVars<'t>,
        i: usize,
        point: &[f64],
    ) -> Result<Var<'t>> {
        let (x, t) = self.split(point)?;
        let f = self.source(x, t);
        let lu = match self.kind {
            ProblemKind::PoissonToy => jets.d2(i, X, X)?,
            ProblemKind::Heat | ProblemKind::Diffusion => {
                tape.linear_combination([(1.0, jets.d1(i, T)?), (-1.0, jets.d2(i, X, X)?)])
            }
            ProblemKind::Wave => {
                tape.linear_combination([(1.0, jets.d2(i, T, T)?), (-1.0, jets.d2(i, X, X)?)])
            }
            ProblemKind::Burgers => {
                let nonlinear = jets.value(i) * jets.d1(i, X)?;
                tape.linear_combination([
                    (1.0, jets.d1(i, T)?),
                    (1.0, nonlinear),
                    (-BURGERS_NU, jets.d2(i, X, X)?),
                ])
            }
        };
        Ok(lu - f)
    }

    /// Reference target at a point: the closed form, or the Cole–Hopf
    /// quadrature for Burgers.
    pub fn target_fn(&self) -> Result<Box<dyn Fn(&[f64]) -> f64 + Send + Sync>> {
        if self.has_closed_form() {
            let p = self.clone();
            Ok(Box::new(move |pt: &[f64]| p.exact_at(pt).unwrap_or(f64::NAN)))
        } else {
            let r = BurgersReference::new(self.burgers_initial, BurgersMethod::default())?;
            Ok(Box::new(move |pt: &[f64]| {
                r.value(pt[X], pt[T]).unwrap_or(f64::NAN)
            }))
        }
    }

    /// Target values at every point of a set.
    pub fn targets(&self, points: &PointSet) -> Result<Vec<f64>> {
        if points.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: points.dim(),
            });
        }
        if self.has_closed_form() {
            points.iter().map(|p| self.exact_at(p)).collect()
        } else {
            let r = BurgersReference::new(self.burgers_initial, BurgersMethod::default())?;
            points.iter().map(|p| r.value(p[X], p[T])).collect()
        }
    }

    /// Places points in a region of the domain.
    ///
    /// Equidistant grids include both endpoints. The boundary region holds
    /// both ends of the space interval at each of `n_t` time levels (one level,
    /// giving two points, when stationary); Monte Carlo boundary points
    /// alternate between the two ends.
    pub fn sample_points(&self, sampling: Sampling, region: Region) -> Result<PointSet> {
        match sampling {
            Sampling::Equidistant { n_x, n_t } => self.sample_equidistant(n_x, n_t, region),
            Sampling::MonteCarlo { n, seed } => {
                let mut rng = Rng::with_stream(seed, crate::rng::streams::SAMPLING);
                self.sample_random(n, region, &mut rng)
            }
        }
    }

    fn sample_equidistant(&self, n_x: usize, n_t: usize, region: Region) -> Result<PointSet> {
        let (lo, hi) = self.space_domain();
        let n_t = if self.is_stationary() { 1 } else { n_t };
        if n_x == 0 || n_t == 0 {
            return Err(Error::config("equidistant grids need n_x, n_t >= 1"));
        }
        let dim = self.input_dim();
        let mut set = PointSet::new(dim);
        match (region, self.time_domain()) {
            (Region::Interior, None) => {
                for x in linspace(lo, hi, n_x) {
                    set.push(&[x])?;
                }
            }
            (Region::Interior, Some((t0, t1))) => {
                for t in linspace(t0, t1, n_t) {
                    for x in linspace(lo, hi, n_x) {
                        set.push(&[x, t])?;
                    }
                }
            }
            (Region::Boundary, None) => {
                set.push(&[lo])?;
                set.push(&[hi])?;
            }
            (Region::Boundary, Some((t0, t1))) => {
                for t in linspace(t0, t1, n_t) {
                    set.push(&[lo, t])?;
                    set.push(&[hi, t])?;
                }
            }
            (Region::Initial, None) => return Err(no_initial(self.kind)),
            (Region::Initial, Some((t0, _))) => {
                for x in linspace(lo, hi, n_x) {
                    set.push(&[x, t0])?;
                }
            }
        }
        Ok(set)
    }

    /// Uniform random points drawn from `rng`.
    pub fn sample_random(&self, n: usize, region: Region, rng: &mut Rng) -> Result<PointSet> {
        if n == 0 {
            return Err(Error::config("monte carlo sampling needs n >= 1"));
        }
        let (lo, hi) = self.space_domain();
        let mut set = PointSet::new(self.input_dim());
        match (region, self.time_domain()) {
            (Region::Interior, None) => {
                for _ in 0..n {
                    set.push(&[rng.uniform_in(lo, hi)])?;
                }
            }
            (Region::Interior, Some((t0, t1))) => {
                for _ in 0..n {
                    let x = rng.uniform_in(lo, hi);
                    let t = rng.uniform_in(t0, t1);
                    set.push(&[x, t])?;
                }
            }
            (Region::Boundary, None) => {
                for i in 0..n {
                    set.push(&[if i % 2 == 0 { lo } else { hi }])?;
                }
            }
            (Region::Boundary, Some((t0, t1))) => {
                for i in 0..n {
                    let t = rng.uniform_in(t0, t1);
                    set.push(&[if i % 2 == 0 { lo } else { hi }, t])?;
                }
            }
            (Region::Initial, None) => return Err(no_initial(self.kind)),
            (Region::Initial, Some((t0, _))) => {
                for _ in 0..n {
                    set.push(&[rng.uniform_in(lo, hi), t0])?;
                }
            }
        }
        Ok(set)
    }
}

fn no_initial(kind: ProblemKind) -> Error {
    Error::config(format!("{kind} is stationary and has no initial region"))
}

/// `n` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |k| if k + 1 == n && n > 1 { hi } else { lo + step * k as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(kind: ProblemKind) -> Problem {
        Problem::new(kind)
    }

    #[test]
    fn exact_values() {
        let v = p(ProblemKind::PoissonToy).exact(PI / 4.0, 0.0).unwrap();
        assert!((v - (0.5f64.sqrt() + 1.0)).abs() < 1e-12);
        assert!((v - 1.70711).abs() < 1e-5);
        assert_eq!(p(ProblemKind::Heat).exact(0.5, 0.0).unwrap(), 1.0);
        let d = p(ProblemKind::Diffusion).exact(PI / 2.0, 0.0).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(p(ProblemKind::Wave).exact(PI / 2.0, 0.0).unwrap(), 1.0);
        assert!(matches!(
            p(ProblemKind::Burgers).exact(0.1, 0.1),
            Err(Error::Unavailable(_))
        ));
    }

    #[test]
    fn source_values() {
        let f = p(ProblemKind::PoissonToy).source(PI / 2.0, 0.0);
        assert!((f + 1.0).abs() < 1e-12);
        assert_eq!(p(ProblemKind::Heat).source(0.3, 0.7), 0.0);
        assert_eq!(p(ProblemKind::Diffusion).source(0.0, 0.4), 0.0);
        assert_eq!(p(ProblemKind::Wave).source(1.0, 2.0), 0.0);
    }

    #[test]
    fn zero_jet_residual_on_poisson() {
        let tr = p(ProblemKind::PoissonToy).residual_tracking();
        let jet = Jet2::from_dense(0.0, &[0.0], &[0.0], &tr);
        let r = p(ProblemKind::PoissonToy)
            .residual(&jet, PI / 2.0, 0.0)
            .unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_derivative_is_config_error() {
        let jet = Jet2::from_dense(0.0, &[0.0, 0.0], &[0.0; 4], &Tracking::new(&[T], &[]));
        let err = p(ProblemKind::Heat).residual(&jet, 0.1, 0.1).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn exact_solutions_satisfy_their_pdes() {
        for kind in [
            ProblemKind::PoissonToy,
            ProblemKind::Heat,
            ProblemKind::Diffusion,
            ProblemKind::Wave,
        ] {
            let prob = p(kind);
            let tr = prob.residual_tracking();
            let pts = prob
                .sample_points(Sampling::Equidistant { n_x: 50, n_t: 11 }, Region::Interior)
                .unwrap();
            let worst = pts
                .iter()
                .map(|pt| {
                    let j = prob.exact_jet(pt, &tr).unwrap();
                    prob.residual_at(&j, pt).unwrap().abs()
                })
                .fold(0.0, f64::max);
            assert!(worst < 1e-8, "{kind}: {worst}");
        }
    }

    #[test]
    fn boundary_and_initial_match_exact() {
        for kind in [
            ProblemKind::PoissonToy,
            ProblemKind::Heat,
            ProblemKind::Diffusion,
            ProblemKind::Wave,
        ] {
            let prob = p(kind);
            let b = prob
                .sample_points(Sampling::Equidistant { n_x: 7, n_t: 9 }, Region::Boundary)
                .unwrap();
            for pt in b.iter() {
                let t = pt.get(T).copied().unwrap_or(0.0);
                let diff = prob.exact_at(pt).unwrap() - prob.boundary(pt[X], t);
                assert!(diff.abs() < 1e-12, "{kind} at {pt:?}: {diff}");
            }
            if !prob.is_stationary() {
                let i = prob
                    .sample_points(Sampling::Equidistant { n_x: 31, n_t: 1 }, Region::Initial)
                    .unwrap();
                for pt in i.iter() {
                    let diff = prob.exact_at(pt).unwrap() - prob.initial(pt[X]).unwrap();
                    assert!(diff.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn equidistant_grid_includes_endpoints() {
        let pts = p(ProblemKind::PoissonToy)
            .sample_points(Sampling::Equidistant { n_x: 5120, n_t: 1 }, Region::Interior)
            .unwrap();
        assert_eq!(pts.len(), 5120);
        assert_eq!(pts.point(0)[0], 0.0);
        assert_eq!(pts.point(5119)[0], 2.0 * PI);
        assert!((pts.point(1)[0] - 2.0 * PI / 5119.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_regions() {
        let heat = p(ProblemKind::Heat);
        let init = heat
            .sample_points(Sampling::Equidistant { n_x: 100, n_t: 1 }, Region::Initial)
            .unwrap();
        assert_eq!(init.len(), 100);
        assert!(init.iter().all(|q| q[T] == 0.0));
        let mc = heat
            .sample_points(Sampling::MonteCarlo { n: 64, seed: 3 }, Region::Boundary)
            .unwrap();
        assert!(mc.iter().all(|q| q[X] == 0.0 || q[X] == 1.0));
        let a = heat
            .sample_points(Sampling::MonteCarlo { n: 8192, seed: 9 }, Region::Interior)
            .unwrap();
        let b = heat
            .sample_points(Sampling::MonteCarlo { n: 8192, seed: 9 }, Region::Interior)
            .unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|q| (0.0..=1.0).contains(&q[X]) && (0.0..=1.0).contains(&q[T])));
        let err = p(ProblemKind::PoissonToy)
            .sample_points(Sampling::Equidistant { n_x: 10, n_t: 1 }, Region::Initial)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn names_round_trip() {
        for k in ProblemKind::ALL {
            assert_eq!(k.name().parse::<ProblemKind>().unwrap(), k);
        }
        assert!("poisson".parse::<ProblemKind>().is_err());
    }
}
