use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::{Error, Result};
use crate::rng;

/// Dense tensor, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Layer widths of the autoencoder. Tensor shapes follow from these.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub codeword_dim: usize,
    pub k_neighbors: usize,
    pub grid_side: usize,
    /// Output widths of the per-point perceptron (input width is 3).
    pub point_mlp: Vec<usize>,
    /// Output widths of the two graph max-pool layers.
    pub graph_widths: [usize; 2],
    pub head_hidden: usize,
    pub fold_hidden: usize,
}

/// One fully connected layer: `weight` is `[fan_out, fan_in]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub fan_in: usize,
    pub fan_out: usize,
}

/// Positions of each layer in [`Architecture::layers`].
#[derive(Clone, Debug)]
pub(crate) struct LayerIndex {
    pub mlp: Vec<usize>,
    pub graph: [usize; 2],
    pub head: usize,
    pub bottleneck: usize,
    pub fold1: [usize; 3],
    pub fold2: [usize; 3],
}

impl Architecture {
    /// Full-size widths: 3→64→64→64, graph 128 and 1024, head 512, folds 512.
    pub fn paper(codeword_dim: usize) -> Self {
        Architecture {
            codeword_dim,
            k_neighbors: 16,
            grid_side: 45,
            point_mlp: vec![64, 64, 64],
            graph_widths: [128, 1024],
            head_hidden: 512,
            fold_hidden: 512,
        }
    }

    /// Same topology with every width divided by 4 or 8; small enough for
    /// full finite-difference checks and CPU training in minutes.
    pub fn desk(codeword_dim: usize) -> Self {
        Architecture {
            codeword_dim,
            k_neighbors: 8,
            grid_side: 5,
            point_mlp: vec![16, 16, 16],
            graph_widths: [32, 128],
            head_hidden: 64,
            fold_hidden: 64,
        }
    }

    pub fn grid_points(&self) -> usize {
        self.grid_side * self.grid_side
    }

    pub fn validate(&self) -> Result<()> {
        let widths = self
            .point_mlp
            .iter()
            .chain(&self.graph_widths)
            .chain([&self.head_hidden, &self.fold_hidden, &self.codeword_dim]);
        if self.point_mlp.is_empty() || widths.into_iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument(format!("invalid layer widths in {self:?}")));
        }
        if self.k_neighbors == 0 || self.grid_side == 0 {
            return Err(Error::InvalidArgument(
                "k_neighbors and grid_side must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let spec = |name: String, fan_in, fan_out| LayerSpec {
            name,
            fan_in,
            fan_out,
        };
        let mut out = Vec::new();
        let mut width = 3;
        for (i, &w) in self.point_mlp.iter().enumerate() {
            out.push(spec(format!("encoder.mlp.{i}"), width, w));
            width = w;
        }
        for (i, &w) in self.graph_widths.iter().enumerate() {
            out.push(spec(format!("encoder.graph{}", i + 1), width, w));
            width = w;
        }
        out.push(spec("encoder.head".into(), width, self.head_hidden));
        out.push(spec(
            "encoder.bottleneck".into(),
            self.head_hidden,
            self.codeword_dim,
        ));
        let h = self.fold_hidden;
        for (fold, extra) in [(1, 2), (2, 3)] {
            out.push(spec(format!("decoder.fold{fold}.0"), self.codeword_dim + extra, h));
            out.push(spec(format!("decoder.fold{fold}.1"), h, h));
            out.push(spec(format!("decoder.fold{fold}.2"), h, 3));
        }
        out
    }

    pub(crate) fn index(&self) -> LayerIndex {
        let m = self.point_mlp.len();
        LayerIndex {
            mlp: (0..m).collect(),
            graph: [m, m + 1],
            head: m + 2,
            bottleneck: m + 3,
            fold1: [m + 4, m + 5, m + 6],
            fold2: [m + 7, m + 8, m + 9],
        }
    }

    /// Tensor names and shapes in storage order (weight then bias per layer).
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        self.layers()
            .into_iter()
            .flat_map(|l| {
                [
                    (format!("{}.weight", l.name), vec![l.fan_out, l.fan_in]),
                    (format!("{}.bias", l.name), vec![l.fan_out]),
                ]
            })
            .collect()
    }
}

/// Named weights and biases; tensor `2l` is layer `l`'s weight, `2l + 1` its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<T> {
    pub arch: Architecture,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<T>>,
}

/// Gradients share the parameter layout.
pub type Gradients<T> = NetworkParams<T>;

impl<T: Scalar> NetworkParams<T> {
    pub fn zeros(arch: &Architecture) -> Self {
        let (names, tensors) = arch
            .tensor_specs()
            .into_iter()
            .map(|(n, s)| (n, Tensor::zeros(s)))
            .unzip();
        NetworkParams {
            arch: arch.clone(),
            names,
            tensors,
        }
    }

    /// Uniform in ±1/sqrt(fan_in) for weights and biases alike. Values are
    /// drawn in f64, so f32 and f64 instances with one seed agree after rounding.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut p = Self::zeros(arch);
        let mut r = rng::stream(seed, "foldnet-init");
        for (l, spec) in arch.layers().iter().enumerate() {
            let bound = 1.0 / (spec.fan_in as f64).sqrt();
            for t in [2 * l, 2 * l + 1] {
                for v in &mut p.tensors[t].data {
                    *v = T::from(r.random_range(-bound..bound)).unwrap_or_else(T::zero);
                }
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.arch)
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn weight(&self, layer: usize) -> &[T] {
        &self.tensors[2 * layer].data
    }

    pub fn bias(&self, layer: usize) -> &[T] {
        &self.tensors[2 * layer + 1].data
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<T>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn cast<U: Scalar>(&self) -> NetworkParams<U> {
        NetworkParams {
            arch: self.arch.clone(),
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|&v| U::from(v).unwrap_or_else(U::nan)).collect(),
                })
                .collect(),
        }
    }

    /// Checks that `other` has this layout, naming the first differing tensor.
    pub fn check_layout<U>(&self, other: &NetworkParams<U>) -> Result<()> {
        for (i, (name, t)) in self.names.iter().zip(&self.tensors).enumerate() {
            match other.tensors.get(i) {
                Some(o) if o.shape == t.shape && other.names[i] == *name => {}
                Some(o) => {
                    return Err(Error::TensorShape {
                        name: name.clone(),
                        expected: t.shape.clone(),
                        found: o.shape.clone(),
                    })
                }
                None => {
                    return Err(Error::TensorShape {
                        name: name.clone(),
                        expected: t.shape.clone(),
                        found: vec![],
                    })
                }
            }
        }
        if other.tensors.len() != self.tensors.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} tensors, found {}",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        Ok(())
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x = *x + scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in &mut self.tensors {
            for x in &mut t.data {
                *x = *x * s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_shapes() {
        let a = Architecture::paper(512);
        let specs = a.tensor_specs();
        let shape = |n: &str| specs.iter().find(|(s, _)| s == n).unwrap().1.clone();
        assert_eq!(shape("encoder.mlp.0.weight"), vec![64, 3]);
        assert_eq!(shape("encoder.graph2.weight"), vec![1024, 128]);
        assert_eq!(shape("encoder.bottleneck.weight"), vec![512, 512]);
        assert_eq!(shape("decoder.fold1.0.weight"), vec![512, 514]);
        assert_eq!(shape("decoder.fold2.0.weight"), vec![512, 515]);
        assert_eq!(shape("decoder.fold2.2.bias"), vec![3]);
        assert_eq!(specs.len(), 2 * 13);
        assert_eq!(a.grid_points(), 2025);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Architecture::desk(16);
        let p = NetworkParams::<f64>::init(&a, 3).unwrap();
        assert_eq!(p, NetworkParams::<f64>::init(&a, 3).unwrap());
        assert_ne!(p, NetworkParams::<f64>::init(&a, 4).unwrap());
        for (l, spec) in a.layers().iter().enumerate() {
            let bound = 1.0 / (spec.fan_in as f64).sqrt();
            assert!(p.weight(l).iter().all(|w| w.abs() <= bound));
        }
        let single: NetworkParams<f32> = NetworkParams::init(&a, 3).unwrap();
        assert_eq!(single, p.cast::<f32>());
    }

    #[test]
    fn layout_mismatch_names_tensor() {
        let a = NetworkParams::<f32>::zeros(&Architecture::desk(16));
        let b = NetworkParams::<f32>::zeros(&Architecture::desk(8));
        match a.check_layout(&b) {
            Err(Error::TensorShape { name, .. }) => assert_eq!(name, "encoder.bottleneck.weight"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tensor_shape_checked() {
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 6]).unwrap().is_finite());
    }
}
