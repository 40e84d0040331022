use super::tensor::Tensor;
use crate::error::{dim_err, Result};

/// Geometry of a single-channel, stride-1, unpadded 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub filters: usize,
}

impl ConvShape {
    pub fn out_h(&self) -> usize {
        self.in_h + 1 - self.kernel
    }

    pub fn out_w(&self) -> usize {
        self.in_w + 1 - self.kernel
    }

    /// Length of the flattened feature map.
    pub fn out_len(&self) -> usize {
        self.filters * self.out_h() * self.out_w()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.filters == 0 || self.kernel > self.in_h || self.kernel > self.in_w {
            return Err(dim_err(
                "conv2d",
                format!(
                    "{} filters of {}x{} on a {}x{} grid",
                    self.filters, self.kernel, self.kernel, self.in_h, self.in_w
                ),
            ));
        }
        Ok(())
    }

    fn check(&self, input: &[f64], filters: &Tensor) -> Result<()> {
        self.validate()?;
        if input.len() != self.in_h * self.in_w {
            return Err(dim_err(
                "conv2d",
                format!("input of {} for a {}x{} grid", input.len(), self.in_h, self.in_w),
            ));
        }
        if filters.len() != self.filters * self.kernel * self.kernel {
            return Err(dim_err(
                "conv2d",
                format!("filter bank {:?}", filters.shape()),
            ));
        }
        Ok(())
    }
}

/// Cross-correlates the `in_h × in_w` grid with each filter. Output is the
/// row-major `filters × out_h × out_w` feature map.
pub fn conv2d(shape: ConvShape, input: &[f64], filters: &Tensor) -> Result<Vec<f64>> {
    shape.check(input, filters)?;
    let (k, oh, ow, iw) = (shape.kernel, shape.out_h(), shape.out_w(), shape.in_w);
    let w = filters.data();
    let mut out = vec![0.0; shape.out_len()];
    for f in 0..shape.filters {
        let fw = &w[f * k * k..(f + 1) * k * k];
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0;
                for dy in 0..k {
                    let irow = &input[(y + dy) * iw + x..(y + dy) * iw + x + k];
                    let frow = &fw[dy * k..(dy + 1) * k];
                    acc += irow.iter().zip(frow).map(|(a, b)| a * b).sum::<f64>();
                }
                out[(f * oh + y) * ow + x] = acc;
            }
        }
    }
    Ok(out)
}

/// Returns `(d_input, d_filters)` for [`conv2d`].
pub fn conv2d_backward(
    shape: ConvShape,
    input: &[f64],
    filters: &Tensor,
    upstream: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    shape.check(input, filters)?;
    if upstream.len() != shape.out_len() {
        return Err(dim_err(
            "conv2d_backward",
            format!("upstream {} vs feature map {}", upstream.len(), shape.out_len()),
        ));
    }
    let (k, oh, ow, iw) = (shape.kernel, shape.out_h(), shape.out_w(), shape.in_w);
    let w = filters.data();
    let mut d_in = vec![0.0; input.len()];
    let mut d_w = vec![0.0; filters.len()];
    for f in 0..shape.filters {
        for y in 0..oh {
            for x in 0..ow {
                let g = upstream[(f * oh + y) * ow + x];
                if g == 0.0 {
                    continue;
                }
                for dy in 0..k {
                    for dx in 0..k {
                        let ii = (y + dy) * iw + x + dx;
                        let fi = f * k * k + dy * k + dx;
                        d_w[fi] += g * input[ii];
                        d_in[ii] += g * w[fi];
                    }
                }
            }
        }
    }
    Ok((d_in, d_w))
}
