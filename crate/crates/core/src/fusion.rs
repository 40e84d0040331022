//! Learnable literal fusion `g: ℝ^H × ℝ^{N_d} → ℝ^H`.
//!
//! All variants read the concatenation `x = [e, l]`:
//!
//! | kind   | output                                   | weights                     |
//! |--------|------------------------------------------|-----------------------------|
//! | linear | `x W`                                    | `W: (H+N_d) × H`            |
//! | tanh   | `tanh(x W)`                              | `W: (H+N_d) × H`            |
//! | relu   | `relu(x W)`                              | `W: (H+N_d) × H`            |
//! | mlp    | `relu(relu(x W₁) W₂)`                    | `W₁: (H+N_d) × Z, W₂: Z × H` |
//! | gate   | `z + (1 − z) ⊙ e`, `z = softmax(x W)`    | `W: (H+N_d) × H`            |
//!
//! The gate's first term is the softmax vector `z` itself.

use std::fmt;
use std::str::FromStr;

use crate::error::{dim_err, Error, Result};
use crate::numeric::ops;
use crate::numeric::Tensor;
use crate::par::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionKind {
    None,
    Linear,
    Tanh,
    Relu,
    Mlp,
    Gate,
}

impl FusionKind {
    pub const ALL: [FusionKind; 6] = [
        FusionKind::None,
        FusionKind::Linear,
        FusionKind::Tanh,
        FusionKind::Relu,
        FusionKind::Mlp,
        FusionKind::Gate,
    ];
}

impl FromStr for FusionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(FusionKind::None),
            "linear" => Ok(FusionKind::Linear),
            "tanh" => Ok(FusionKind::Tanh),
            "relu" => Ok(FusionKind::Relu),
            "mlp" => Ok(FusionKind::Mlp),
            "gate" => Ok(FusionKind::Gate),
            other => Err(Error::Config(format!(
                "unknown fusion {:?} (expected none|linear|tanh|relu|mlp|gate)",
                other
            ))),
        }
    }
}

impl fmt::Display for FusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionKind::None => "none",
            FusionKind::Linear => "linear",
            FusionKind::Tanh => "tanh",
            FusionKind::Relu => "relu",
            FusionKind::Mlp => "mlp",
            FusionKind::Gate => "gate",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FusionConfig {
    pub kind: FusionKind,
    /// MLP hidden width `Z`; defaults to `H`.
    pub hidden_dim: Option<usize>,
}

impl FusionConfig {
    pub fn new(kind: FusionKind) -> Self {
        FusionConfig { kind, hidden_dim: None }
    }

    pub fn hidden(&self, dim: usize) -> usize {
        self.hidden_dim.unwrap_or(dim)
    }

    /// Weight shapes of one `g`, as `(suffix, shape)`.
    pub fn weight_shapes(&self, dim: usize, n_data: usize) -> Vec<(&'static str, Vec<usize>)> {
        let input = dim + n_data;
        match self.kind {
            FusionKind::None => vec![],
            FusionKind::Mlp => {
                let z = self.hidden(dim);
                vec![("w1", vec![input, z]), ("w2", vec![z, dim])]
            }
            _ => vec![("w", vec![input, dim])],
        }
    }

    pub fn weight_count(&self, dim: usize, n_data: usize) -> usize {
        self.weight_shapes(dim, n_data)
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == Some(0) {
            return Err(Error::Config("MLP hidden width must be positive".into()));
        }
        Ok(())
    }
}

/// Borrowed fusion weights. `w2` is only used by the MLP.
#[derive(Clone, Copy, Debug)]
pub struct FusionWeights<'a> {
    pub w: Option<&'a Tensor>,
    pub w2: Option<&'a Tensor>,
}

impl<'a> FusionWeights<'a> {
    pub fn none() -> Self {
        FusionWeights { w: None, w2: None }
    }

    pub fn single(w: &'a Tensor) -> Self {
        FusionWeights { w: Some(w), w2: None }
    }

    pub fn mlp(w1: &'a Tensor, w2: &'a Tensor) -> Self {
        FusionWeights { w: Some(w1), w2: Some(w2) }
    }
}

/// Values kept from [`fuse`] for [`fuse_backward`].
#[derive(Clone, Debug)]
pub struct FusionCache {
    kind: FusionKind,
    x: Option<Tensor>,
    pre: Option<Tensor>,
    act: Option<Tensor>,
    hidden_pre: Option<Tensor>,
    hidden: Option<Tensor>,
}

#[derive(Clone, Debug)]
pub struct FusionGrads {
    pub d_e: Tensor,
    pub d_w: Option<Tensor>,
    pub d_w2: Option<Tensor>,
}

fn weight<'a>(w: Option<&'a Tensor>, which: &str) -> Result<&'a Tensor> {
    w.ok_or_else(|| Error::Config(format!("fusion weight {} missing", which)))
}

fn check_weight(op: &'static str, w: &Tensor, rows: usize, cols: usize) -> Result<()> {
    if w.shape().len() != 2 || w.rows() != rows || w.cols() != cols {
        return Err(dim_err(op, format!("weight {:?}, expected {}x{}", w.shape(), rows, cols)));
    }
    Ok(())
}

/// Applies `g` row-wise: `e` is `n × H`, `l` is `n × N_d`.
pub fn fuse(kind: FusionKind, e: &Tensor, l: &Tensor, weights: FusionWeights<'_>, exec: Exec) -> Result<(Tensor, FusionCache)> {
    let mut cache = FusionCache {
        kind,
        x: None,
        pre: None,
        act: None,
        hidden_pre: None,
        hidden: None,
    };
    if kind == FusionKind::None {
        return Ok((e.clone(), cache));
    }
    let (h, input) = (e.cols(), e.cols() + l.cols());
    let x = ops::concat_cols(e, l)?;
    let out = match kind {
        FusionKind::None => unreachable!(),
        FusionKind::Linear => {
            let w = weight(weights.w, "w")?;
            check_weight("fuse_linear", w, input, h)?;
            ops::affine(&x, w, exec)?
        }
        FusionKind::Tanh | FusionKind::Relu => {
            let w = weight(weights.w, "w")?;
            check_weight("fuse_nonlinear", w, input, h)?;
            let pre = ops::affine(&x, w, exec)?;
            let out = if kind == FusionKind::Tanh { ops::tanh(&pre) } else { ops::relu(&pre) };
            cache.pre = Some(pre);
            cache.act = Some(out.clone());
            out
        }
        FusionKind::Mlp => {
            let w1 = weight(weights.w, "w1")?;
            let w2 = weight(weights.w2, "w2")?;
            check_weight("fuse_mlp", w1, input, w1.cols())?;
            check_weight("fuse_mlp", w2, w1.cols(), h)?;
            let hidden_pre = ops::affine(&x, w1, exec)?;
            let hidden = ops::relu(&hidden_pre);
            let pre = ops::affine(&hidden, w2, exec)?;
            let out = ops::relu(&pre);
            cache.hidden_pre = Some(hidden_pre);
            cache.hidden = Some(hidden);
            cache.pre = Some(pre);
            out
        }
        FusionKind::Gate => {
            let w = weight(weights.w, "w")?;
            check_weight("fuse_gate", w, input, h)?;
            let z = ops::softmax_rows(&ops::affine(&x, w, exec)?);
            let mut out = z.clone();
            out.data_mut()
                .iter_mut()
                .zip(e.data())
                .for_each(|(o, &ev)| *o += (1.0 - *o) * ev);
            cache.act = Some(z);
            out
        }
    };
    cache.x = Some(x);
    Ok((out, cache))
}

/// Backward of [`fuse`] given `∂loss/∂output`. `e` is the input passed to the
/// forward call.
pub fn fuse_backward(
    cache: &FusionCache,
    e: &Tensor,
    weights: FusionWeights<'_>,
    upstream: &Tensor,
    exec: Exec,
) -> Result<FusionGrads> {
    let h = e.cols();
    let take_e = |dx: &Tensor| -> Result<Tensor> { Ok(ops::concat_cols_backward(dx, h)?.0) };
    let x = || cache.x.as_ref().expect("forward cached input");
    match cache.kind {
        FusionKind::None => Ok(FusionGrads {
            d_e: upstream.clone(),
            d_w: None,
            d_w2: None,
        }),
        FusionKind::Linear => {
            let (dx, dw) = ops::affine_backward(x(), weight(weights.w, "w")?, upstream, exec)?;
            Ok(FusionGrads { d_e: take_e(&dx)?, d_w: Some(dw), d_w2: None })
        }
        FusionKind::Tanh | FusionKind::Relu => {
            let d_pre = if cache.kind == FusionKind::Tanh {
                ops::tanh_backward(cache.act.as_ref().unwrap(), upstream)?
            } else {
                ops::relu_backward(cache.pre.as_ref().unwrap(), upstream)?
            };
            let (dx, dw) = ops::affine_backward(x(), weight(weights.w, "w")?, &d_pre, exec)?;
            Ok(FusionGrads { d_e: take_e(&dx)?, d_w: Some(dw), d_w2: None })
        }
        FusionKind::Mlp => {
            let d_pre = ops::relu_backward(cache.pre.as_ref().unwrap(), upstream)?;
            let (d_hidden, dw2) =
                ops::affine_backward(cache.hidden.as_ref().unwrap(), weight(weights.w2, "w2")?, &d_pre, exec)?;
            let d_hidden_pre = ops::relu_backward(cache.hidden_pre.as_ref().unwrap(), &d_hidden)?;
            let (dx, dw1) = ops::affine_backward(x(), weight(weights.w, "w1")?, &d_hidden_pre, exec)?;
            Ok(FusionGrads { d_e: take_e(&dx)?, d_w: Some(dw1), d_w2: Some(dw2) })
        }
        FusionKind::Gate => {
            let z = cache.act.as_ref().unwrap();
            // out = z + (1 − z) ⊙ e
            let one_minus_e = e.map(|v| 1.0 - v);
            let d_z = ops::mul(upstream, &one_minus_e)?;
            let d_e_direct = ops::mul(upstream, &z.map(|v| 1.0 - v))?;
            let d_pre = ops::softmax_rows_backward(z, &d_z)?;
            let (dx, dw) = ops::affine_backward(x(), weight(weights.w, "w")?, &d_pre, exec)?;
            let mut d_e = take_e(&dx)?;
            d_e.add_assign(&d_e_direct)?;
            Ok(FusionGrads { d_e, d_w: Some(dw), d_w2: None })
        }
    }
}

fn single_row(op: &'static str, e: &[f64], l: &[f64], kind: FusionKind, weights: FusionWeights<'_>) -> Result<Vec<f64>> {
    let (out, _) = fuse(kind, &Tensor::row_vector(e), &Tensor::row_vector(l), weights, Exec::Sequential)
        .map_err(|err| match err {
            Error::Dimension { detail, .. } => Error::Config(format!("{}: {}", op, detail)),
            other => other,
        })?;
    Ok(out.into_vec())
}

/// `Wᵀ[e, l]`.
pub fn fuse_linear(e: &[f64], l: &[f64], w: &Tensor) -> Result<Vec<f64>> {
    single_row("fuse_linear", e, l, FusionKind::Linear, FusionWeights::single(w))
}

/// `h(Wᵀ[e, l])` with `h` tanh or ReLU.
pub fn fuse_nonlinear(e: &[f64], l: &[f64], w: &Tensor, kind: FusionKind) -> Result<Vec<f64>> {
    if !matches!(kind, FusionKind::Tanh | FusionKind::Relu) {
        return Err(Error::Config(format!("{} is not a nonlinear fusion", kind)));
    }
    single_row("fuse_nonlinear", e, l, kind, FusionWeights::single(w))
}

/// `relu(W₂ᵀ relu(W₁ᵀ[e, l]))`.
pub fn fuse_mlp(e: &[f64], l: &[f64], w1: &Tensor, w2: &Tensor) -> Result<Vec<f64>> {
    single_row("fuse_mlp", e, l, FusionKind::Mlp, FusionWeights::mlp(w1, w2))
}

/// `z + (1 − z) ⊙ e` with `z = softmax(Wᵀ[e, l])`.
pub fn fuse_gate(e: &[f64], l: &[f64], w: &Tensor) -> Result<Vec<f64>> {
    single_row("fuse_gate", e, l, FusionKind::Gate, FusionWeights::single(w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_block(h: usize, n_data: usize) -> Tensor {
        let mut w = Tensor::zeros(&[h + n_data, h]);
        for i in 0..h {
            w.row_mut(i)[i] = 1.0;
        }
        w
    }

    #[test]
    fn linear_identity_block_returns_e() {
        let w = identity_block(3, 2);
        let e = [0.25, -1.5, 2.0];
        assert_eq!(fuse_linear(&e, &[9.0, -4.0], &w).unwrap(), e.to_vec());
    }

    #[test]
    fn linear_all_ones() {
        let w = Tensor::from_vec(&[3, 2], vec![1.0; 6]).unwrap();
        assert_eq!(fuse_linear(&[1.0, 2.0], &[3.0], &w).unwrap(), vec![6.0, 6.0]);
    }

    #[test]
    fn zero_literals_use_only_e_block() {
        let w = Tensor::from_vec(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 100.0, -100.0]).unwrap();
        let out = fuse_linear(&[1.0, 1.0], &[0.0], &w).unwrap();
        assert_eq!(out, vec![4.0, 6.0]);
    }

    #[test]
    fn nonlinear_ranges() {
        let zero = Tensor::zeros(&[5, 3]);
        assert_eq!(fuse_nonlinear(&[1.0, 2.0, 3.0], &[4.0, 5.0], &zero, FusionKind::Tanh).unwrap(), vec![0.0; 3]);
        let w = Tensor::from_vec(&[3, 2], vec![1.0, -1.0, -2.0, 0.5, 0.3, -0.3]).unwrap();
        let out = fuse_nonlinear(&[0.4, -0.9], &[1.0], &w, FusionKind::Relu).unwrap();
        assert!(out.iter().all(|&v| v >= 0.0));
        assert!(fuse_nonlinear(&[0.4, -0.9], &[1.0], &w, FusionKind::Gate).is_err());
    }

    #[test]
    fn mlp_shapes() {
        let w1 = Tensor::zeros(&[3, 7]);
        let w2 = Tensor::from_vec(&[7, 2], vec![1.0; 14]).unwrap();
        assert_eq!(fuse_mlp(&[1.0, 2.0], &[3.0], &w1, &w2).unwrap(), vec![0.0, 0.0]);
        let w1 = Tensor::from_vec(&[3, 5], vec![0.1; 15]).unwrap();
        let w2 = Tensor::from_vec(&[5, 2], vec![0.2; 10]).unwrap();
        assert_eq!(fuse_mlp(&[1.0, 2.0], &[3.0], &w1, &w2).unwrap().len(), 2);
    }

    #[test]
    fn gate_with_unit_embedding_is_unit() {
        let w = Tensor::from_vec(&[4, 3], (0..12).map(|i| (i as f64 * 0.37).sin() * 3.0).collect()).unwrap();
        let out = fuse_gate(&[1.0, 1.0, 1.0], &[0.2], &w).unwrap();
        assert!(out.iter().all(|&v| (v - 1.0).abs() < 1e-15), "{:?}", out);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let w = Tensor::zeros(&[4, 2]);
        assert!(matches!(fuse_linear(&[1.0, 2.0], &[3.0], &w), Err(Error::Config(_))));
    }

    #[test]
    fn names_roundtrip() {
        for k in FusionKind::ALL {
            assert_eq!(k.to_string().parse::<FusionKind>().unwrap(), k);
        }
        assert!("concat".parse::<FusionKind>().is_err());
    }
}
