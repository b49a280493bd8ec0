use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GeometryError, TinyNet};

/// Perturbation size `h·‖Δ‖` used by the finite-difference JVP.
pub const JVP_STEP: f64 = 1e-4;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn shifted(params: &[f64], delta: &[f64], s: f64) -> Vec<f64> {
    params.iter().zip(delta).map(|(p, d)| p + s * d).collect()
}

/// `J_W · Δ` at input `x` by central differences with `h = JVP_STEP / ‖Δ‖`.
pub fn jvp(net: &TinyNet, params: &[f64], delta: &[f64], x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    if delta.len() != params.len() {
        return Err(GeometryError::Shape(format!("delta has {} entries, net has {}", delta.len(), params.len())));
    }
    let n = norm(delta);
    if n == 0.0 {
        return Ok(vec![0.0; *net.widths().last().expect("widths")]);
    }
    let h = JVP_STEP / n;
    let up = net.forward(&shifted(params, delta, h), x)?;
    let down = net.forward(&shifted(params, delta, -h), x)?;
    Ok(up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * h)).collect())
}

/// Largest first-order superposition residual over the probe inputs:
/// `max ‖f(W + s(Δ1 + Δ2)) − f(W) − s·JΔ1 − s·JΔ2‖`.
pub fn superposition_error(
    net: &TinyNet,
    params: &[f64],
    delta1: &[f64],
    delta2: &[f64],
    scale: f64,
    inputs: &[Vec<f64>],
) -> Result<f64, GeometryError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GeometryError::Config(format!("scale must be positive, got {scale}")));
    }
    for d in [delta1, delta2] {
        if d.len() != params.len() {
            return Err(GeometryError::Shape(format!("delta has {} entries, net has {}", d.len(), params.len())));
        }
    }
    let combined: Vec<f64> = delta1.iter().zip(delta2).map(|(a, b)| a + b).collect();
    let moved = shifted(params, &combined, scale);
    let residuals = inputs
        .par_iter()
        .map(|x| {
            let full = net.forward(&moved, x)?;
            let base = net.forward(params, x)?;
            let j1 = jvp(net, params, delta1, x)?;
            let j2 = jvp(net, params, delta2, x)?;
            let r: Vec<f64> = (0..full.len()).map(|k| full[k] - base[k] - scale * j1[k] - scale * j2[k]).collect();
            Ok(norm(&r))
        })
        .collect::<Result<Vec<f64>, GeometryError>>()?;
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSweep {
    pub scales: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln E` against `ln s`.
    pub log_log_slope: Option<f64>,
}

/// Least-squares slope of `ln y` on `ln x`; `None` if any value is not positive.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn superposition_sweep(
    net: &TinyNet,
    params: &[f64],
    delta1: &[f64],
    delta2: &[f64],
    scales: &[f64],
    inputs: &[Vec<f64>],
) -> Result<ScalingSweep, GeometryError> {
    let errors = scales
        .iter()
        .map(|&s| superposition_error(net, params, delta1, delta2, s, inputs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScalingSweep { log_log_slope: log_log_slope(scales, &errors), scales: scales.to_vec(), errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Activation;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn zero_increments() {
        let net = TinyNet::new(vec![2, 4, 2], Activation::Tanh).unwrap();
        let params = net.init(&mut seeded(1));
        let zero = vec![0.0; params.len()];
        let e = superposition_error(&net, &params, &zero, &zero, 0.1, &[vec![0.3, -0.2]]).unwrap();
        assert_eq!(e, 0.0);
        assert!(superposition_error(&net, &params, &zero[1..], &zero, 0.1, &[vec![0.3, -0.2]]).is_err());
    }

    #[test]
    fn tanh_remainder_is_quadratic() {
        let net = TinyNet::new(vec![2, 8, 2], Activation::Tanh).unwrap();
        let mut rng = seeded(5);
        let params = net.init(&mut rng);
        let d1: Vec<f64> = (0..params.len()).map(|_| rng.random_range(-0.2..0.2)).collect();
        let d2: Vec<f64> = (0..params.len()).map(|_| rng.random_range(-0.2..0.2)).collect();
        let inputs = vec![vec![0.5, -0.5], vec![1.0, 0.2]];
        let e = superposition_error(&net, &params, &d1, &d2, 0.01, &inputs).unwrap();
        let half = superposition_error(&net, &params, &d1, &d2, 0.005, &inputs).unwrap();
        assert!((3.5..=4.5).contains(&(e / half)), "{}", e / half);
    }
}
