use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Activation, Circle, GeometryError, TinyNet};
use crate::rng::{seeded, substream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineStats {
    /// One cosine per probe input with two nonzero increments.
    pub cosines: Vec<f64>,
    /// Probe inputs skipped because an increment vanished.
    pub excluded: usize,
    pub median_abs: Option<f64>,
    pub mean_abs: Option<f64>,
    pub max_abs: Option<f64>,
}

impl CosineStats {
    fn from_cosines(cosines: Vec<f64>, excluded: usize) -> Self {
        let mut abs: Vec<f64> = cosines.iter().map(|c| c.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let n = abs.len();
        let median_abs = (n > 0).then(|| if n % 2 == 1 { abs[n / 2] } else { 0.5 * (abs[n / 2 - 1] + abs[n / 2]) });
        CosineStats {
            median_abs,
            mean_abs: (n > 0).then(|| abs.iter().sum::<f64>() / n as f64),
            max_abs: abs.last().copied(),
            cosines,
            excluded,
        }
    }
}

/// Cosine between `f(W+Δ_d) − f(W)` and `f(W+Δ_a) − f(W)` at each probe input.
pub fn increment_cosine(
    net: &TinyNet,
    params: &[f64],
    delta_distill: &[f64],
    delta_align: &[f64],
    inputs: &[Vec<f64>],
) -> Result<CosineStats, GeometryError> {
    for d in [delta_distill, delta_align] {
        if d.len() != params.len() {
            return Err(GeometryError::Shape(format!("delta has {} entries, net has {}", d.len(), params.len())));
        }
    }
    let add = |d: &[f64]| params.iter().zip(d).map(|(p, d)| p + d).collect::<Vec<_>>();
    let (wd, wa) = (add(delta_distill), add(delta_align));
    let per_input = inputs
        .par_iter()
        .map(|x| {
            let base = net.forward(params, x)?;
            let fd: Vec<f64> = net.forward(&wd, x)?.iter().zip(&base).map(|(a, b)| a - b).collect();
            let fa: Vec<f64> = net.forward(&wa, x)?.iter().zip(&base).map(|(a, b)| a - b).collect();
            let nd = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
            let na = fa.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nd == 0.0 || na == 0.0 {
                return Ok(None);
            }
            Ok(Some(fd.iter().zip(&fa).map(|(a, b)| a * b).sum::<f64>() / (nd * na)))
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;
    let excluded = per_input.iter().filter(|c| c.is_none()).count();
    Ok(CosineStats::from_cosines(per_input.into_iter().flatten().collect(), excluded))
}

/// Points on the circle at evenly spaced angles.
pub fn circle_points(circle: &Circle, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64 + 0.1;
            vec![circle.center[0] + circle.radius * a.cos(), circle.center[1] + circle.radius * a.sin()]
        })
        .collect()
}

/// Identity network with a scaling increment (radial output change) and a
/// rotation-generator increment (tangential output change) on the unit circle.
pub fn constructed_toy(epsilon: f64, probes: usize) -> Result<CosineStats, GeometryError> {
    let net = TinyNet::new(vec![2, 2], Activation::Identity)?;
    let params = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    let distill = vec![epsilon, 0.0, 0.0, epsilon, 0.0, 0.0];
    let align = vec![0.0, -epsilon, epsilon, 0.0, 0.0, 0.0];
    increment_cosine(&net, &params, &distill, &align, &circle_points(&Circle::default(), probes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyTrainingConfig {
    pub hidden: usize,
    pub train_points: usize,
    pub probe_points: usize,
    /// Points are drawn at radius `1 ± radial_noise` around the unit circle.
    pub radial_noise: f64,
    /// Tangential displacement per unit radius requested of the align delta.
    pub rotation: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ToyTrainingConfig {
    fn default() -> Self {
        ToyTrainingConfig {
            hidden: 16,
            train_points: 256,
            probe_points: 128,
            radial_noise: 0.2,
            rotation: 0.2,
            steps: 5000,
            learning_rate: 0.5,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedToyReport {
    pub distill_loss: f64,
    pub align_loss: f64,
    /// Mean share of ‖Δf_distill‖² lying along the circle normal.
    pub distill_normal_share: f64,
    /// Mean share of ‖Δf_align‖² lying along the circle tangent.
    pub align_tangent_share: f64,
    pub stats: CosineStats,
}

fn annulus_points<R: Rng>(rng: &mut R, n: usize, noise: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let a = rng.random_range(0.0..TAU);
            let r = 1.0 + rng.random_range(-noise..=noise);
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

/// Train a distillation delta that pulls outputs onto the circle and an
/// alignment delta that moves them along it, both from the same random
/// base, then measure how orthogonal their output increments are.
pub fn trained_toy(cfg: &ToyTrainingConfig) -> Result<TrainedToyReport, GeometryError> {
    if cfg.radial_noise >= 1.0 || cfg.radial_noise < 0.0 || cfg.train_points == 0 || cfg.probe_points == 0 {
        return Err(GeometryError::Config("need 0 ≤ radial_noise < 1 and nonempty point sets".into()));
    }
    let circle = Circle::default();
    let net = TinyNet::new(vec![2, cfg.hidden, 2], Activation::Tanh)?;
    let mut rng = seeded(cfg.seed);
    let base = net.init(&mut rng);
    let train = annulus_points(&mut rng, cfg.train_points, cfg.radial_noise);

    let targets = |shift: &dyn Fn([f64; 2]) -> Result<[f64; 2], GeometryError>| {
        train
            .iter()
            .map(|&x| {
                let f = net.forward(&base, &x)?;
                let d = shift(x)?;
                Ok((x.to_vec(), vec![f[0] + d[0], f[1] + d[1]]))
            })
            .collect::<Result<Vec<_>, GeometryError>>()
    };
    let distill_data = targets(&|x| {
        let p = circle.project(x)?;
        Ok([p[0] - x[0], p[1] - x[1]])
    })?;
    let align_data = targets(&|x| Ok([-cfg.rotation * x[1], cfg.rotation * x[0]]))?;

    let (wd, distill_loss) = net.train(&base, &distill_data, cfg.steps, cfg.learning_rate)?;
    let (wa, align_loss) = net.train(&base, &align_data, cfg.steps, cfg.learning_rate)?;
    let delta = |w: &[f64]| w.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<_>>();
    let (dd, da) = (delta(&wd), delta(&wa));

    let probes: Vec<Vec<f64>> = annulus_points(&mut substream(cfg.seed, 0, 1), cfg.probe_points, cfg.radial_noise)
        .into_iter()
        .map(|p| p.to_vec())
        .collect();
    let stats = increment_cosine(&net, &base, &dd, &da, &probes)?;

    let mut normal_share = 0.0;
    let mut tangent_share = 0.0;
    for x in &probes {
        let at = [x[0], x[1]];
        let f0 = net.forward(&base, x)?;
        let inc = |w: &[f64]| -> Result<[f64; 2], GeometryError> {
            let f = net.forward(w, x)?;
            Ok([f[0] - f0[0], f[1] - f0[1]])
        };
        let share = |v: [f64; 2], normal: bool| -> Result<f64, GeometryError> {
            let (n, t) = circle.decompose(at, v)?;
            let part = if normal { n } else { t };
            let total = v[0] * v[0] + v[1] * v[1];
            Ok(if total == 0.0 { 0.0 } else { (part[0] * part[0] + part[1] * part[1]) / total })
        };
        normal_share += share(inc(&wd)?, true)?;
        tangent_share += share(inc(&wa)?, false)?;
    }
    let n = probes.len() as f64;
    Ok(TrainedToyReport {
        distill_loss,
        align_loss,
        distill_normal_share: normal_share / n,
        align_tangent_share: tangent_share / n,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructed_is_orthogonal() {
        let stats = constructed_toy(0.1, 64).unwrap();
        assert_eq!(stats.cosines.len(), 64);
        assert!(stats.max_abs.unwrap() < 1e-10);
    }

    #[test]
    fn zero_align_is_excluded() {
        let net = TinyNet::new(vec![2, 2], Activation::Identity).unwrap();
        let params = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let stats = increment_cosine(&net, &params, &[0.1; 6], &[0.0; 6], &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(stats.excluded, 1);
        assert!(stats.median_abs.is_none());
    }
}
