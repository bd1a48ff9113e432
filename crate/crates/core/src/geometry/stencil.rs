//! Finite-difference weights on arbitrary (possibly non-uniform) nodes.

/// Fornberg's recursion: weights `w[k][j]` such that
/// `f^(k)(z) ≈ Σ_j w[k][j] f(x_j)` for `k = 0..=max_order`.
pub(crate) fn fornberg(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Index window and weights for the first and second derivative at node `i`.
///
/// Interior nodes use the centered three-point stencil. The end nodes use
/// three points for the first derivative and four for the second, which keeps
/// both one-sided formulas second order on uniform grids.
pub(crate) struct DerivativeStencils {
    first: Vec<(usize, Vec<f64>)>,
    second: Vec<(usize, Vec<f64>)>,
}

impl DerivativeStencils {
    pub(crate) fn new(params: &[f64]) -> Self {
        let n = params.len();
        debug_assert!(n >= 4);
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for i in 0..n {
            let (start1, len1, start2, len2) = if i == 0 {
                (0, 3, 0, 4)
            } else if i == n - 1 {
                (n - 3, 3, n - 4, 4)
            } else {
                (i - 1, 3, i - 1, 3)
            };
            let w1 = fornberg(params[i], &params[start1..start1 + len1], 1);
            let w2 = fornberg(params[i], &params[start2..start2 + len2], 2);
            first.push((start1, w1[1].clone()));
            second.push((start2, w2[2].clone()));
        }
        Self { first, second }
    }

    pub(crate) fn first<T>(&self, i: usize, values: &[T]) -> T
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        apply(&self.first[i], values)
    }

    pub(crate) fn second<T>(&self, i: usize, values: &[T]) -> T
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        apply(&self.second[i], values)
    }
}

fn apply<T>(stencil: &(usize, Vec<f64>), values: &[T]) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let (start, w) = stencil;
    w.iter()
        .enumerate()
        .fold(T::default(), |acc, (k, &wk)| acc + values[start + k] * wk)
}
