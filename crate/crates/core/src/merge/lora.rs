use super::{MergeError, Tensor, TensorMap};

/// Low-rank adapter for one weight matrix: `ΔW = (α / r) · B · A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub target: String,
    /// `r × n`
    pub a: Tensor,
    /// `m × r`
    pub b: Tensor,
    pub alpha: f64,
    pub rank: usize,
}

impl LoraAdapter {
    /// Read `{target}.lora_A` and `{target}.lora_B` from an adapter checkpoint.
    pub fn from_map(
        map: &TensorMap,
        target: &str,
        alpha: f64,
        rank: usize,
    ) -> Result<Self, MergeError> {
        let fetch = |suffix: &str| {
            let name = format!("{target}.{suffix}");
            map.get(&name)
                .cloned()
                .ok_or_else(|| MergeError::Lora(format!("adapter has no tensor {name:?}")))
        };
        Ok(LoraAdapter { target: target.to_string(), a: fetch("lora_A")?, b: fetch("lora_B")?, alpha, rank })
    }

    /// `(m, n)` of the increment, after checking the factor shapes.
    pub fn output_shape(&self) -> Result<(usize, usize), MergeError> {
        if self.rank == 0 {
            return Err(MergeError::Lora("rank must be at least 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(MergeError::Lora(format!("alpha must be positive, got {}", self.alpha)));
        }
        let (&[ra, n], &[m, rb]) = (self.a.shape(), self.b.shape()) else {
            return Err(MergeError::Lora(format!(
                "A and B must be matrices, got {:?} and {:?}",
                self.a.shape(),
                self.b.shape()
            )));
        };
        if ra != self.rank || rb != self.rank {
            return Err(MergeError::Lora(format!(
                "rank {} does not match A {:?} / B {:?}",
                self.rank,
                self.a.shape(),
                self.b.shape()
            )));
        }
        Ok((m, n))
    }
}

/// Materialise the adapter's increment as a single-tensor map named after
/// its target. When `base` is given the target must exist with shape `(m, n)`.
pub fn expand_lora(adapter: &LoraAdapter, base: Option<&TensorMap>) -> Result<TensorMap, MergeError> {
    let (m, n) = adapter.output_shape()?;
    if let Some(base) = base {
        let target = base
            .get(&adapter.target)
            .ok_or_else(|| MergeError::Lora(format!("base has no tensor {:?}", adapter.target)))?;
        if target.shape() != [m, n] {
            return Err(MergeError::ShapeMismatch {
                name: adapter.target.clone(),
                left: target.shape().to_vec(),
                right: vec![m, n],
            });
        }
    }

    let r = adapter.rank;
    let scale = adapter.alpha / r as f64;
    let (a, b) = (adapter.a.data(), adapter.b.data());
    let mut out = vec![0f32; m * n];
    for i in 0..m {
        let b_row = &b[i * r..(i + 1) * r];
        for j in 0..n {
            let acc: f64 = b_row
                .iter()
                .enumerate()
                .map(|(k, &bk)| f64::from(bk) * f64::from(a[k * n + j]))
                .sum();
            out[i * n + j] = (scale * acc) as f32;
        }
    }
    let mut map = TensorMap::new();
    map.insert(adapter.target.clone(), Tensor::new(vec![m, n], out)?)?;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(n: usize) -> Tensor {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 1.0;
        }
        Tensor::new(vec![n, n], d).unwrap()
    }

    #[test]
    fn identity_factors() {
        let adapter = LoraAdapter { target: "w".into(), a: eye(3), b: eye(3), alpha: 3.0, rank: 3 };
        let out = expand_lora(&adapter, None).unwrap();
        assert_eq!(out.get("w").unwrap(), &eye(3));
    }

    #[test]
    fn zero_b_gives_zero() {
        let adapter = LoraAdapter {
            target: "w".into(),
            a: Tensor::new(vec![2, 3], vec![1.0; 6]).unwrap(),
            b: Tensor::zeros(vec![4, 2]).unwrap(),
            alpha: 8.0,
            rank: 2,
        };
        let out = expand_lora(&adapter, None).unwrap();
        assert!(out.get("w").unwrap().data().iter().all(|v| *v == 0.0));
        assert_eq!(out.get("w").unwrap().shape(), &[4, 3]);
    }

    #[test]
    fn hand_product() {
        // B (2×1) = [1, 2]^T, A (1×2) = [3, 4], α/r = 2
        let adapter = LoraAdapter {
            target: "w".into(),
            a: Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap(),
            b: Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap(),
            alpha: 2.0,
            rank: 1,
        };
        let out = expand_lora(&adapter, None).unwrap();
        assert_eq!(out.get("w").unwrap().data(), &[6.0, 8.0, 12.0, 16.0]);
    }

    #[test]
    fn dimension_errors() {
        let bad_rank = LoraAdapter {
            target: "w".into(),
            a: Tensor::new(vec![2, 3], vec![1.0; 6]).unwrap(),
            b: Tensor::new(vec![4, 3], vec![1.0; 12]).unwrap(),
            alpha: 1.0,
            rank: 2,
        };
        assert!(expand_lora(&bad_rank, None).is_err());

        let ok = LoraAdapter { target: "w".into(), a: eye(2), b: eye(2), alpha: 1.0, rank: 2 };
        let mut base = TensorMap::new();
        base.insert("w", Tensor::zeros(vec![2, 3]).unwrap()).unwrap();
        assert!(matches!(expand_lora(&ok, Some(&base)), Err(MergeError::ShapeMismatch { .. })));
    }

    #[test]
    fn from_map_names() {
        let mut m = TensorMap::new();
        m.insert("w.lora_A", eye(2)).unwrap();
        m.insert("w.lora_B", eye(2)).unwrap();
        let adapter = LoraAdapter::from_map(&m, "w", 4.0, 2).unwrap();
        assert_eq!(expand_lora(&adapter, None).unwrap().get("w").unwrap(), &eye(2).scaled(2.0));
        assert!(LoraAdapter::from_map(&m, "v", 4.0, 2).is_err());
    }
}
