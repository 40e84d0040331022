//! Data-parallel helpers.
//!
//! With the `parallel` feature the [`Exec::Parallel`] strategy maps over
//! rayon's pool; without it every strategy runs sequentially. Results are
//! always collected in input order, so both strategies produce identical
//! output bit for bit.

/// Execution strategy for the data-parallel inner loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Calls `f(row_index, row)` for every `width`-sized chunk of `out`.
    pub fn for_each_row<F>(self, out: &mut [f64], width: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                out.par_chunks_mut(width)
                    .enumerate()
                    .for_each(|(i, row)| f(i, row));
            }
            _ => out
                .chunks_mut(width)
                .enumerate()
                .for_each(|(i, row)| f(i, row)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Exec::Sequential.map_range(1000, f);
        let b = Exec::Parallel.map_range(1000, f);
        assert_eq!(a, b);

        let mut x = vec![0.0; 30];
        let mut y = vec![0.0; 30];
        Exec::Sequential.for_each_row(&mut x, 3, |i, r| r.iter_mut().for_each(|v| *v = i as f64));
        Exec::Parallel.for_each_row(&mut y, 3, |i, r| r.iter_mut().for_each(|v| *v = i as f64));
        assert_eq!(x, y);
    }
}
