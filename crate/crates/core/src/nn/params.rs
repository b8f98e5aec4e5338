use ndarray::Array2;

use crate::rng::SeededRng;

/// Handle to a tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
struct Param {
    name: String,
    value: Array2<f64>,
    rank: u8,
}

/// Named learnable tensors. Vectors are stored as `1 x n` matrices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_matrix(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        self.push(name.into(), value, 2)
    }

    pub fn add_vector(&mut self, name: impl Into<String>, value: Vec<f64>) -> ParamId {
        let n = value.len();
        let value = Array2::from_shape_vec((1, n), value).expect("row vector");
        self.push(name.into(), value, 1)
    }

    fn push(&mut self, name: String, value: Array2<f64>, rank: u8) -> ParamId {
        debug_assert!(self.id(&name).is_none(), "duplicate parameter {name}");
        self.params.push(Param { name, value, rank });
        ParamId(self.params.len() - 1)
    }

    /// Uniform in `[-bound, bound]`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        bound: f64,
        rng: &mut SeededRng,
    ) -> ParamId {
        let value = Array2::from_shape_simple_fn((rows, cols), || rng.uniform_range(-bound, bound));
        self.add_matrix(name, value)
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn rank(&self, id: ParamId) -> u8 {
        self.params[id.0].rank
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(
            self.params
                .iter()
                .map(|p| Array2::zeros(p.value.dim()))
                .collect(),
        )
    }
}

/// Gradients aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub(crate) Vec<Array2<f64>>);

impl Grads {
    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.0[id.0]
    }

    pub(crate) fn add(&mut self, id: ParamId, g: &Array2<f64>) {
        self.0[id.0] += g;
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.0 {
            g.mapv_inplace(|v| v * factor);
        }
    }

    pub fn accumulate(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}
