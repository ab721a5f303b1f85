//! Small dense feed-forward networks with manual reverse-mode gradients.
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for gradient checking.

mod adam;
pub mod checkpoint;

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DockError, Result};

pub use adam::{adam_step, AdamState};

pub trait Scalar: Float + FromPrimitive + ToPrimitive + Default + Debug + Send + Sync + 'static {
    /// `C = alpha·A·B + beta·C` on strided row/column-major buffers.
    ///
    /// # Safety
    /// The strides and dimensions must describe memory inside the buffers.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 conversion")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Scalar for f32 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Row-major dense matrix; rows are batch samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DockError::Domain(format!(
                "matrix data of length {} does not fit {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.as_ref().len() != cols {
                return Err(DockError::Domain("ragged rows".into()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.rows != other.rows {
            return Err(DockError::Domain(format!(
                "cannot concatenate {} rows with {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Matrix<T> {
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
}

/// One affine layer. `weight` is `rows × cols` = `out × in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub grad_weight: Vec<T>,
    pub grad_bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            rows,
            cols,
            weight: vec![T::zero(); rows * cols],
            bias: vec![T::zero(); rows],
            grad_weight: vec![T::zero(); rows * cols],
            grad_bias: vec![T::zero(); rows],
        }
    }

    /// `out = x·Wᵀ + b`
    fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        let batch = x.rows;
        let mut out = Matrix::zeros(batch, self.rows);
        for i in 0..batch {
            out.row_mut(i).copy_from_slice(&self.bias);
        }
        unsafe {
            T::gemm(
                batch,
                self.cols,
                self.rows,
                T::one(),
                x.data.as_ptr(),
                x.cols as isize,
                1,
                self.weight.as_ptr(),
                1,
                self.cols as isize,
                T::one(),
                out.data.as_mut_ptr(),
                self.rows as isize,
                1,
            );
        }
        out
    }

    /// Accumulate `dW += δᵀ·x`, `db += Σ δ`.
    fn accumulate_grads(&mut self, delta: &Matrix<T>, x: &Matrix<T>) {
        let batch = x.rows;
        unsafe {
            T::gemm(
                self.rows,
                batch,
                self.cols,
                T::one(),
                delta.data.as_ptr(),
                1,
                self.rows as isize,
                x.data.as_ptr(),
                x.cols as isize,
                1,
                T::one(),
                self.grad_weight.as_mut_ptr(),
                self.cols as isize,
                1,
            );
        }
        for i in 0..batch {
            for (g, d) in self.grad_bias.iter_mut().zip(delta.row(i)) {
                *g = *g + *d;
            }
        }
    }

    /// `δ_in = δ·W`
    fn input_grad(&self, delta: &Matrix<T>) -> Matrix<T> {
        let batch = delta.rows;
        let mut out = Matrix::zeros(batch, self.cols);
        unsafe {
            T::gemm(
                batch,
                self.rows,
                self.cols,
                T::one(),
                delta.data.as_ptr(),
                self.rows as isize,
                1,
                self.weight.as_ptr(),
                self.cols as isize,
                1,
                T::zero(),
                out.data.as_mut_ptr(),
                self.cols as isize,
                1,
            );
        }
        out
    }
}

/// Multilayer perceptron with ReLU hidden layers.
#[derive(Debug, Clone)]
pub struct MlpNet<T: Scalar = f32> {
    layers: Vec<Layer<T>>,
    output: Activation,
    /// Layer inputs plus final output from the last cached forward pass.
    cache: Option<Vec<Matrix<T>>>,
}

impl<T: Scalar> PartialEq for MlpNet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.output == other.output
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.rows == b.rows && a.cols == b.cols && a.weight == b.weight && a.bias == b.bias)
    }
}

impl<T: Scalar> MlpNet<T> {
    /// Build from explicit layers; consecutive shapes must chain.
    pub fn from_layers(layers: Vec<Layer<T>>, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(DockError::Domain("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].rows != pair[1].cols {
                return Err(DockError::Domain(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    pair[0].rows,
                    i + 1,
                    pair[1].cols
                )));
            }
        }
        for l in &layers {
            if l.weight.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(DockError::Domain("layer buffers do not match shape".into()));
            }
        }
        Ok(MlpNet {
            layers,
            output,
            cache: None,
        })
    }

    /// Fan-in uniform initialisation `U(±1/√fan_in)` for weights and biases;
    /// the last layer is additionally multiplied by `final_scale`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        output: Activation,
        final_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(DockError::Domain(format!("invalid layer sizes {sizes:?}")));
        }
        let n_layers = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for (idx, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut bound = 1.0 / (fan_in as f64).sqrt();
            if idx + 1 == n_layers {
                bound *= final_scale;
            }
            let mut layer = Layer::zeros(fan_out, fan_in);
            for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *w = T::from_f64_lossy(rng.random_range(-1.0..=1.0) * bound);
            }
            layers.push(layer);
        }
        MlpNet::from_layers(layers, output)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    /// `[in, hidden.., out]`
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.rows));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn run(&self, input: &Matrix<T>, mut keep: Option<&mut Vec<Matrix<T>>>) -> Result<Matrix<T>> {
        if input.cols != self.input_dim() {
            return Err(DockError::Domain(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.cols
            )));
        }
        let last = self.layers.len() - 1;
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&x);
            if i == last {
                if self.output == Activation::Tanh {
                    z.data.iter_mut().for_each(|v| *v = v.tanh());
                }
            } else {
                z.data.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
            if let Some(k) = keep.as_deref_mut() {
                k.push(x);
            }
            x = z;
        }
        if let Some(k) = keep {
            k.push(x.clone());
        }
        Ok(x)
    }

    pub fn forward_batch(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        self.run(input, None)
    }

    /// Forward pass that keeps the activations needed by [`MlpNet::backward`].
    pub fn forward_cached(&mut self, input: &Matrix<T>) -> Result<Matrix<T>> {
        let mut keep = Vec::with_capacity(self.layers.len() + 1);
        let out = self.run(input, Some(&mut keep))?;
        self.cache = Some(keep);
        Ok(out)
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let m = Matrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.forward_batch(&m)?.into_vec())
    }

    /// Back-propagate `upstream` (gradient of the loss w.r.t. the cached
    /// output), accumulating parameter gradients. Returns the input gradient.
    pub fn backward(&mut self, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        self.backprop(upstream, true)
    }

    /// Like [`MlpNet::backward`] but leaves parameter gradients untouched.
    pub fn backward_input(&mut self, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        self.backprop(upstream, false)
    }

    fn backprop(&mut self, upstream: &Matrix<T>, accumulate: bool) -> Result<Matrix<T>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| DockError::Usage("backward called without a cached forward pass".into()))?;
        let output = &cache[cache.len() - 1];
        if upstream.rows != output.rows || upstream.cols != output.cols {
            return Err(DockError::Domain(format!(
                "upstream gradient is {}x{}, cached output is {}x{}",
                upstream.rows, upstream.cols, output.rows, output.cols
            )));
        }
        let last = self.layers.len() - 1;
        let mut delta = upstream.clone();
        if self.output == Activation::Tanh {
            for (d, y) in delta.data.iter_mut().zip(&output.data) {
                *d = *d * (T::one() - *y * *y);
            }
        }
        for i in (0..=last).rev() {
            if i != last {
                // ReLU: cache[i + 1] is this layer's activated output
                for (d, y) in delta.data.iter_mut().zip(&cache[i + 1].data) {
                    if *y <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            let x = &cache[i];
            if accumulate {
                self.layers[i].accumulate_grads(&delta, x);
            }
            delta = self.layers[i].input_grad(&delta);
        }
        Ok(delta)
    }

    pub fn zero_grads(&mut self) {
        for l in &mut self.layers {
            l.grad_weight.iter_mut().for_each(|g| *g = T::zero());
            l.grad_bias.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Parameters flattened layer by layer, weights (row-major) before biases.
    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn grads_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.grad_weight);
            out.extend_from_slice(&l.grad_bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(DockError::Domain(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weight.len();
            l.weight.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &MlpNet<T>) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.rows == b.rows && a.cols == b.cols)
    }
}

/// `target ← (1 − tau)·target + tau·source`
pub fn polyak_update<T: Scalar>(target: &mut MlpNet<T>, source: &MlpNet<T>, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(DockError::Domain(format!("tau {tau} outside [0, 1]")));
    }
    if !target.same_shape(source) {
        return Err(DockError::Domain("polyak update between differently shaped networks".into()));
    }
    let t = T::from_f64_lossy(tau);
    let keep = T::one() - t;
    for (lt, ls) in target.layers.iter_mut().zip(&source.layers) {
        for (a, b) in lt.weight.iter_mut().zip(&ls.weight) {
            *a = keep * *a + t * *b;
        }
        for (a, b) in lt.bias.iter_mut().zip(&ls.bias) {
            *a = keep * *a + t * *b;
        }
    }
    Ok(())
}
