//! Decoupling of a distilled one-step jump from a windowed alignment field.
//!
//! The base field is `V(x) = λx` and the alignment field is
//! `U(τ) = (1 + ε·((τ − t_a)/|I|)²)·d` on the window `I = [t_a, t_b]`, zero
//! elsewhere. Integrating `dx/dτ = V + U` from `τ = 1` down to `0` gives the
//! reference endpoint; the merged model jumps with the closed-form flow of
//! `V` and adds the window contribution sampled once at its midpoint.

use serde::{Deserialize, Serialize};

use super::GeometryError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeSetup {
    /// Contraction rate `λ` of the base field.
    pub rate: f64,
    /// State at `τ = 1`.
    pub start: Vec<f64>,
    /// Direction `d` of the alignment field.
    pub direction: Vec<f64>,
    pub window: (f64, f64),
    /// Relative temporal variation `ε` of the alignment field over its window.
    pub epsilon: f64,
    /// Total RK4 steps of the reference integration.
    pub steps: usize,
}

impl Default for OdeSetup {
    fn default() -> Self {
        OdeSetup {
            rate: 1e-4,
            start: vec![1.0, 0.5],
            direction: vec![0.3, -0.4],
            window: (0.4, 0.6),
            epsilon: 0.1,
            steps: 10_000,
        }
    }
}

impl OdeSetup {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let (a, b) = self.window;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(GeometryError::Config(format!("window [{a}, {b}] must satisfy 0 ≤ t_a < t_b ≤ 1")));
        }
        if self.steps == 0 {
            return Err(GeometryError::Config("steps must be at least 1".into()));
        }
        if self.start.len() != self.direction.len() || self.start.is_empty() {
            return Err(GeometryError::Shape("start and direction must have the same nonzero length".into()));
        }
        if ![self.rate, self.epsilon].iter().chain(&self.start).chain(&self.direction).all(|v| v.is_finite()) {
            return Err(GeometryError::Config("values must be finite".into()));
        }
        Ok(())
    }

    fn width(&self) -> f64 {
        self.window.1 - self.window.0
    }

    /// Scalar profile of `U` at time `tau`; `U(τ) = profile(τ)·d`.
    pub fn align_profile(&self, tau: f64) -> f64 {
        let (a, b) = self.window;
        if tau < a || tau > b {
            return 0.0;
        }
        let u = (tau - a) / self.width();
        1.0 + self.epsilon * u * u
    }

    fn field(&self, x: &[f64], tau: f64, inside: bool) -> Vec<f64> {
        let p = if inside { self.align_profile(tau) } else { 0.0 };
        x.iter().zip(&self.direction).map(|(x, d)| self.rate * x + p * d).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationResult {
    pub reference: Vec<f64>,
    pub merged: Vec<f64>,
    pub gap: f64,
}

fn rk4_segment(setup: &OdeSetup, x: &mut [f64], from: f64, to: f64, steps: usize, inside: bool) {
    let h = (to - from) / steps as f64;
    let axpy = |x: &[f64], k: &[f64], s: f64| x.iter().zip(k).map(|(x, k)| x + s * k).collect::<Vec<_>>();
    for i in 0..steps {
        let t = from + h * i as f64;
        let k1 = setup.field(x, t, inside);
        let k2 = setup.field(&axpy(x, &k1, h / 2.0), t + h / 2.0, inside);
        let k3 = setup.field(&axpy(x, &k2, h / 2.0), t + h / 2.0, inside);
        let k4 = setup.field(&axpy(x, &k3, h), t + h, inside);
        for j in 0..x.len() {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
}

/// Distance between the fully integrated endpoint and the merged one-step jump.
pub fn truncation_gap(setup: &OdeSetup) -> Result<TruncationResult, GeometryError> {
    setup.validate()?;
    let (a, b) = setup.window;
    // Integrate backwards in three pieces so U's jumps fall on step edges.
    let pieces = [(1.0, b, false), (b, a, true), (a, 0.0, false)];
    let mut x = setup.start.clone();
    for (from, to, inside) in pieces {
        let len: f64 = from - to;
        if len > 0.0 {
            let steps = ((setup.steps as f64 * len).ceil() as usize).max(1);
            rk4_segment(setup, &mut x, from, to, steps, inside);
        }
    }

    let decay = (-setup.rate).exp();
    let mid = 0.5 * (a + b);
    let kick = setup.width() * setup.align_profile(mid);
    let merged: Vec<f64> = setup.start.iter().zip(&setup.direction).map(|(x, d)| decay * x - kick * d).collect();
    let gap = x.iter().zip(&merged).map(|(r, m)| (r - m).powi(2)).sum::<f64>().sqrt();
    Ok(TruncationResult { reference: x, merged, gap })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweep {
    pub epsilons: Vec<f64>,
    pub gaps: Vec<f64>,
    pub log_log_slope: Option<f64>,
}

pub fn epsilon_sweep(setup: &OdeSetup, epsilons: &[f64]) -> Result<EpsilonSweep, GeometryError> {
    let gaps = epsilons
        .iter()
        .map(|&epsilon| truncation_gap(&OdeSetup { epsilon, ..setup.clone() }).map(|r| r.gap))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EpsilonSweep {
        log_log_slope: super::log_log_slope(epsilons, &gaps),
        epsilons: epsilons.to_vec(),
        gaps,
    })
}
