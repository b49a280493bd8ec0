use std::collections::BTreeMap;

use super::MergeError;

/// Dense row-major f32 tensor. An empty shape is a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, MergeError> {
        if shape.contains(&0) {
            return Err(MergeError::BadShape(format!("{shape:?} has a zero dimension")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(MergeError::BadShape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn scalar(value: f32) -> Self {
        Tensor { shape: Vec::new(), data: vec![value] }
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self, MergeError> {
        let n = shape.iter().product();
        Tensor::new(shape, vec![0.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Squared Frobenius norm accumulated in f64.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    /// Elementwise `f32` scaling.
    pub fn scaled(&self, s: f32) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|v| v * s).collect() }
    }

    pub(crate) fn map_data(&self, data: Vec<f32>) -> Tensor {
        debug_assert_eq!(data.len(), self.data.len());
        Tensor { shape: self.shape.clone(), data }
    }
}

/// Named tensors in canonical (lexicographic) name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorMap {
    tensors: BTreeMap<String, Tensor>,
}

impl TensorMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a tensor; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), MergeError> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(MergeError::DuplicateName(name));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub(crate) fn insert_unchecked(&mut self, name: String, tensor: Tensor) {
        self.tensors.insert(name, tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Keep only the tensors whose name matches `filter`.
    pub fn filtered(&self, filter: &regex::Regex) -> TensorMap {
        TensorMap {
            tensors: self
                .tensors
                .iter()
                .filter(|(name, _)| filter.is_match(name))
                .map(|(n, t)| (n.clone(), t.clone()))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f32) -> TensorMap {
        TensorMap {
            tensors: self.tensors.iter().map(|(n, t)| (n.clone(), t.scaled(s))).collect(),
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.tensors.values().map(Tensor::frobenius_sq).sum()
    }

    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, Tensor)>,
    ) -> Result<TensorMap, MergeError> {
        let mut map = TensorMap::new();
        for (name, tensor) in entries {
            map.insert(name, tensor)?;
        }
        Ok(map)
    }
}
