use crate::error::{dim_err, Result};
use crate::par::Exec;

/// Dense row-major array of `f64`.
///
/// Most of the crate treats a tensor as a matrix: `rows()` is the leading
/// dimension and `cols()` the product of the remaining ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(dim_err(
                "tensor",
                format!("shape {:?} needs {} values, got {}", shape, n, data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// A `1 × n` tensor holding `values`.
    pub fn row_vector(values: &[f64]) -> Self {
        Tensor {
            shape: vec![1, values.len()],
            data: values.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        if self.shape.is_empty() {
            1
        } else {
            self.shape[1..].iter().product()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        check_same("add", self, other)?;
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }
}

pub(crate) fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(dim_err(op, format!("{:?} vs {:?}", a.shape, b.shape)));
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `a · b` for `a: m×k`, `b: k×n`.
pub fn matmul(a: &Tensor, b: &Tensor, exec: Exec) -> Result<Tensor> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    if b.rows() != k {
        return Err(dim_err(
            "matmul",
            format!("{}x{} times {}x{}", m, k, b.rows(), n),
        ));
    }
    let mut out = Tensor::zeros(&[m, n]);
    exec.for_each_row(&mut out.data, n, |i, orow| {
        let arow = &a.data[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    });
    Ok(out)
}

/// `aᵀ · b` for `a: k×m`, `b: k×n`.
pub fn matmul_tn(a: &Tensor, b: &Tensor, exec: Exec) -> Result<Tensor> {
    let (k, m, n) = (a.rows(), a.cols(), b.cols());
    if b.rows() != k {
        return Err(dim_err(
            "matmul_tn",
            format!("({}x{})ᵀ times {}x{}", k, m, b.rows(), n),
        ));
    }
    let mut out = Tensor::zeros(&[m, n]);
    exec.for_each_row(&mut out.data, n, |i, orow| {
        for p in 0..k {
            let av = a.data[p * m + i];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    });
    Ok(out)
}

/// `a · bᵀ` for `a: m×k`, `b: n×k`.
pub fn matmul_nt(a: &Tensor, b: &Tensor, exec: Exec) -> Result<Tensor> {
    let (m, k, n) = (a.rows(), a.cols(), b.rows());
    if b.cols() != k {
        return Err(dim_err(
            "matmul_nt",
            format!("{}x{} times ({}x{})ᵀ", m, k, n, b.cols()),
        ));
    }
    let mut out = Tensor::zeros(&[m, n]);
    exec.for_each_row(&mut out.data, n, |i, orow| {
        let arow = &a.data[i * k..(i + 1) * k];
        for (j, o) in orow.iter_mut().enumerate() {
            *o = dot(arow, &b.data[j * k..(j + 1) * k]);
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            for j in 0..n {
                out.data[i * n + j] = (0..k).map(|p| a.data[i * k + p] * b.data[p * n + j]).sum();
            }
        }
        out
    }

    fn transpose(a: &Tensor) -> Tensor {
        let (r, c) = (a.rows(), a.cols());
        let mut out = Tensor::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = a.data[i * c + j];
            }
        }
        out
    }

    #[test]
    fn matmul_variants_match_naive() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 0.5, 3.0, 0.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[3, 2], vec![0.5, 1.0, -1.0, 2.0, 3.0, 0.25]).unwrap();
        let expect = naive(&a, &b);
        for exec in [Exec::Sequential, Exec::Parallel] {
            let got = matmul(&a, &b, exec).unwrap();
            assert!(got.data.iter().zip(&expect.data).all(|(x, y)| (x - y).abs() < 1e-12));
            let got = matmul_tn(&transpose(&a), &b, exec).unwrap();
            assert!(got.data.iter().zip(&expect.data).all(|(x, y)| (x - y).abs() < 1e-12));
            let got = matmul_nt(&a, &transpose(&b), exec).unwrap();
            assert!(got.data.iter().zip(&expect.data).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn matmul_rejects_bad_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let err = matmul(&a, &a, Exec::Sequential).unwrap_err();
        assert!(err.to_string().contains("matmul"));
    }
}
