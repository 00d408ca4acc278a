use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfpMethod {
    Exact,
    Rk4,
}

/// Frequency amplitudes `F[v](ξ, t)` on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfpTrajectory {
    pub times: Vec<f64>,
    /// `values[step][ξ index]`.
    pub values: Vec<Vec<f64>>,
}

impl LfpTrajectory {
    /// First time at which `|F[v](ξ_k)|` drops below `fraction` of its start.
    pub fn time_to_fraction(&self, k: usize, fraction: f64) -> Option<f64> {
        let v0 = self.values.first()?.get(k)?.abs();
        self.values
            .iter()
            .zip(&self.times)
            .find(|(v, _)| v[k].abs() <= fraction * v0)
            .map(|(_, &t)| t)
    }
}

/// Integrates `∂ₜ F[v](ξ) = -λ(ξ) F[v](ξ)` independently per frequency.
pub fn lfp_simulate(
    rates: &[f64],
    initial: &[f64],
    t_end: f64,
    steps: usize,
    method: LfpMethod,
) -> Result<LfpTrajectory> {
    if rates.len() != initial.len() {
        return Err(Error::DimensionMismatch {
            expected: rates.len(),
            got: initial.len(),
        });
    }
    if steps == 0 || !(t_end > 0.0) {
        return Err(Error::config("lfp needs steps > 0 and t_end > 0"));
    }
    if let Some(&bad) = rates.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Numeric {
            op: "lfp rate must be positive".into(),
            value: bad,
        });
    }
    let dt = t_end / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|s| s as f64 * dt).collect();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(initial.to_vec());
    match method {
        LfpMethod::Exact => {
            for &t in &times[1..] {
                values.push(
                    rates
                        .iter()
                        .zip(initial)
                        .map(|(l, v)| v * (-l * t).exp())
                        .collect(),
                );
            }
        }
        LfpMethod::Rk4 => {
            let mut cur = initial.to_vec();
            for _ in 0..steps {
                for (v, &l) in cur.iter_mut().zip(rates) {
                    let k1 = -l * *v;
                    let k2 = -l * (*v + 0.5 * dt * k1);
                    let k3 = -l * (*v + 0.5 * dt * k2);
                    let k4 = -l * (*v + dt * k3);
                    *v += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                values.push(cur.clone());
            }
        }
    }
    Ok(LfpTrajectory { times, values })
}
