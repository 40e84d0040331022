//! Differentiable primitives.
//!
//! Every forward function has a matching `*_backward` that maps the upstream
//! gradient onto its inputs. Backward functions take whatever the forward pass
//! needs to be cached (inputs or outputs) explicitly; nothing is recorded
//! behind the caller's back.

use rand::Rng;

use super::tensor::{check_same, matmul, matmul_nt, matmul_tn, Tensor};
use crate::error::{dim_err, Result};
use crate::par::Exec;

/// Gathers rows `ids` of `table` into an `ids.len() × cols` tensor.
pub fn lookup_rows(table: &Tensor, ids: &[usize]) -> Result<Tensor> {
    let c = table.cols();
    let mut out = Vec::with_capacity(ids.len() * c);
    for &id in ids {
        if id >= table.rows() {
            return Err(dim_err(
                "lookup_rows",
                format!("row {} of {}", id, table.rows()),
            ));
        }
        out.extend_from_slice(table.row(id));
    }
    Tensor::from_vec(&[ids.len(), c], out)
}

/// Scatter-adds `upstream` rows into `grad_table` at `ids`.
pub fn lookup_rows_backward(grad_table: &mut Tensor, ids: &[usize], upstream: &Tensor) -> Result<()> {
    if upstream.rows() != ids.len() || upstream.cols() != grad_table.cols() {
        return Err(dim_err(
            "lookup_rows_backward",
            format!("{:?} for {} ids", upstream.shape(), ids.len()),
        ));
    }
    for (k, &id) in ids.iter().enumerate() {
        let src = upstream.row(k);
        grad_table
            .row_mut(id)
            .iter_mut()
            .zip(src)
            .for_each(|(g, u)| *g += u);
    }
    Ok(())
}

/// Column-wise concatenation `[a, b]` of two tensors with equal row counts.
pub fn concat_cols(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rows() != b.rows() {
        return Err(dim_err(
            "concat",
            format!("{} rows vs {} rows", a.rows(), b.rows()),
        ));
    }
    let (ca, cb) = (a.cols(), b.cols());
    let mut out = Vec::with_capacity(a.rows() * (ca + cb));
    for i in 0..a.rows() {
        out.extend_from_slice(a.row(i));
        out.extend_from_slice(b.row(i));
    }
    Tensor::from_vec(&[a.rows(), ca + cb], out)
}

/// Splits the upstream gradient of [`concat_cols`] back into its two blocks.
pub fn concat_cols_backward(upstream: &Tensor, a_cols: usize) -> Result<(Tensor, Tensor)> {
    let c = upstream.cols();
    if a_cols > c {
        return Err(dim_err("concat_backward", format!("split {} of {}", a_cols, c)));
    }
    let r = upstream.rows();
    let mut a = Vec::with_capacity(r * a_cols);
    let mut b = Vec::with_capacity(r * (c - a_cols));
    for i in 0..r {
        let row = upstream.row(i);
        a.extend_from_slice(&row[..a_cols]);
        b.extend_from_slice(&row[a_cols..]);
    }
    Ok((
        Tensor::from_vec(&[r, a_cols], a)?,
        Tensor::from_vec(&[r, c - a_cols], b)?,
    ))
}

/// `x · W` for inputs stacked as rows, `W: in × out`. A single input vector is
/// a one-row `x`, so this is `Wᵀx` per row.
pub fn affine(x: &Tensor, w: &Tensor, exec: Exec) -> Result<Tensor> {
    if x.cols() != w.rows() {
        return Err(dim_err(
            "affine",
            format!("input width {} vs weight {:?}", x.cols(), w.shape()),
        ));
    }
    matmul(x, w, exec)
}

/// Returns `(dx, dW)` for [`affine`].
pub fn affine_backward(x: &Tensor, w: &Tensor, upstream: &Tensor, exec: Exec) -> Result<(Tensor, Tensor)> {
    if upstream.cols() != w.cols() || upstream.rows() != x.rows() {
        return Err(dim_err(
            "affine_backward",
            format!("upstream {:?} for weight {:?}", upstream.shape(), w.shape()),
        ));
    }
    let dx = matmul_nt(upstream, w, exec)?;
    let dw = matmul_tn(x, upstream, exec)?;
    Ok((dx, dw))
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

/// Backward of [`tanh`] in terms of its output `y`.
pub fn tanh_backward(y: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    zip_map("tanh_backward", y, upstream, |y, g| g * (1.0 - y * y))
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Backward of [`relu`] in terms of its input. The subgradient at 0 is 0.
pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    zip_map("relu_backward", x, upstream, |x, g| if x > 0.0 { g } else { 0.0 })
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

/// Backward of [`sigmoid`] in terms of its output.
pub fn sigmoid_backward(y: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    zip_map("sigmoid_backward", y, upstream, |y, g| g * y * (1.0 - y))
}

/// Row-wise softmax.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Jacobian-vector form of the softmax backward: `dx = y ⊙ (g − ⟨g, y⟩)` per row.
pub fn softmax_rows_backward(y: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    check_same("softmax_backward", y, upstream)?;
    let mut out = Tensor::zeros(y.shape());
    for i in 0..y.rows() {
        let (yr, gr) = (y.row(i), upstream.row(i));
        let inner: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        out.row_mut(i)
            .iter_mut()
            .zip(yr.iter().zip(gr))
            .for_each(|(o, (y, g))| *o = y * (g - inner));
    }
    Ok(out)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_map("elementwise_mul", a, b, |a, b| a * b)
}

/// Returns `(da, db)` for [`mul`].
pub fn mul_backward(a: &Tensor, b: &Tensor, upstream: &Tensor) -> Result<(Tensor, Tensor)> {
    check_same("elementwise_mul_backward", a, upstream)?;
    Ok((mul(upstream, b)?, mul(upstream, a)?))
}

/// Sums each row into an `rows × 1` tensor.
pub fn row_sum(x: &Tensor) -> Tensor {
    let data = (0..x.rows()).map(|i| x.row(i).iter().sum()).collect();
    Tensor::from_vec(&[x.rows(), 1], data).expect("row count matches")
}

/// Broadcasts a `rows × 1` upstream gradient back over `cols` columns.
pub fn row_sum_backward(upstream: &Tensor, cols: usize) -> Tensor {
    let mut out = Vec::with_capacity(upstream.len() * cols);
    for &g in upstream.data() {
        out.extend(std::iter::repeat_n(g, cols));
    }
    Tensor::from_vec(&[upstream.len(), cols], out).expect("shape by construction")
}

/// Per-element scale factors of an inverted-dropout mask: `0` for dropped
/// entries and `1/(1−rate)` for survivors.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask(Vec<f64>);

impl DropoutMask {
    /// Identity mask (evaluation mode or rate 0).
    pub fn identity(len: usize) -> Self {
        DropoutMask(vec![1.0; len])
    }

    pub fn sample<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(dim_err("dropout", format!("rate {} outside [0, 1)", rate)));
        }
        if rate == 0.0 {
            return Ok(Self::identity(len));
        }
        let keep = 1.0 / (1.0 - rate);
        Ok(DropoutMask(
            (0..len)
                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                .collect(),
        ))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(v, m)| v * m).collect()
    }

    pub fn scales(&self) -> &[f64] {
        &self.0
    }
}

/// Inverted dropout. In evaluation mode (`train == false`) this is the identity
/// and consumes no randomness.
pub fn dropout<R: Rng + ?Sized>(x: &Tensor, rate: f64, train: bool, rng: &mut R) -> Result<(Tensor, DropoutMask)> {
    let mask = if train {
        DropoutMask::sample(x.len(), rate, rng)?
    } else {
        if !(0.0..1.0).contains(&rate) {
            return Err(dim_err("dropout", format!("rate {} outside [0, 1)", rate)));
        }
        return Ok((x.clone(), DropoutMask::identity(x.len())));
    };
    let y = Tensor::from_vec(x.shape(), mask.apply(x.data()))?;
    Ok((y, mask))
}

pub fn dropout_backward(mask: &DropoutMask, upstream: &Tensor) -> Result<Tensor> {
    if mask.0.len() != upstream.len() {
        return Err(dim_err(
            "dropout_backward",
            format!("mask {} vs {}", mask.0.len(), upstream.len()),
        ));
    }
    Tensor::from_vec(upstream.shape(), mask.apply(upstream.data()))
}

fn zip_map(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    check_same(op, a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.shape(), data)
}
