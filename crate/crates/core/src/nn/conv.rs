//! 3x3 same-padding convolution via im2col + GEMM.

use super::Scalar;
use ndarray::{Array1, Array2, Array4, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub struct Conv2d<F> {
    /// (c_out, c_in * 9), row-major over (c_in, ky, kx).
    pub weight: Array2<F>,
    pub bias: Array1<F>,
    pub grad_weight: Array2<F>,
    pub grad_bias: Array1<F>,
    c_in: usize,
    c_out: usize,
    cols: Option<Array2<F>>,
    in_shape: (usize, usize, usize, usize),
}

impl<F: Scalar> Conv2d<F> {
    /// Variance-preserving init (zero bias), optionally scaled down.
    pub fn new<R: Rng>(c_in: usize, c_out: usize, scale: f64, rng: &mut R) -> Conv2d<F> {
        let std = (2.0 / (c_in as f64 * 9.0)).sqrt() * scale;
        let normal = Normal::new(0.0, std).unwrap();
        let weight =
            Array2::from_shape_fn((c_out, c_in * 9), |_| F::from_f64_(normal.sample(rng)));
        Conv2d {
            weight,
            bias: Array1::zeros(c_out),
            grad_weight: Array2::zeros((c_out, c_in * 9)),
            grad_bias: Array1::zeros(c_out),
            c_in,
            c_out,
            cols: None,
            in_shape: (0, 0, 0, 0),
        }
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    fn im2col(&self, x: &Array4<F>) -> Array2<F> {
        let (b, c, h, w) = x.dim();
        let n = b * h * w;
        let mut cols = Array2::<F>::zeros((c * 9, n));
        let xs = x.as_slice().expect("standard layout");
        let cs = cols.as_slice_mut().expect("standard layout");
        for ci in 0..c {
            for ky in 0..3usize {
                let dy = ky as i64 - 1;
                for kx in 0..3usize {
                    let dx = kx as i64 - 1;
                    let row = ci * 9 + ky * 3 + kx;
                    let y_lo = (-dy).max(0) as usize;
                    let y_hi = (h as i64 - dy.max(0)) as usize;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (w as i64 - dx.max(0)) as usize;
                    let len = x_hi - x_lo;
                    for bi in 0..b {
                        let img_base = (bi * c + ci) * h * w;
                        for y in y_lo..y_hi {
                            let sy = (y as i64 + dy) as usize;
                            let dst = row * n + bi * h * w + y * w + x_lo;
                            let src = img_base + sy * w + (x_lo as i64 + dx) as usize;
                            cs[dst..dst + len].copy_from_slice(&xs[src..src + len]);
                        }
                    }
                }
            }
        }
        cols
    }

    /// Forward pass; caches the im2col matrix for `backward`.
    pub fn forward(&mut self, x: &Array4<F>) -> Array4<F> {
        let (b, c, h, w) = x.dim();
        assert_eq!(c, self.c_in, "input channel mismatch");
        let cols = self.im2col(x);
        let mut out_mat = self.weight.dot(&cols); // (c_out, b*h*w)
        for (mut row, &bias) in out_mat.axis_iter_mut(Axis(0)).zip(self.bias.iter()) {
            row.mapv_inplace(|v| v + bias);
        }
        self.cols = Some(cols);
        self.in_shape = (b, c, h, w);
        mat_to_nchw(out_mat, b, self.c_out, h, w)
    }

    /// Forward pass without caching; usable through a shared
    /// reference at inference time.
    pub fn apply(&self, x: &Array4<F>) -> Array4<F> {
        let (b, c, h, w) = x.dim();
        assert_eq!(c, self.c_in, "input channel mismatch");
        let cols = self.im2col(x);
        let mut out_mat = self.weight.dot(&cols);
        for (mut row, &bias) in out_mat.axis_iter_mut(Axis(0)).zip(self.bias.iter()) {
            row.mapv_inplace(|v| v + bias);
        }
        mat_to_nchw(out_mat, b, self.c_out, h, w)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let (b, c, h, w) = self.in_shape;
        let cols = self.cols.take().expect("backward without cached forward");
        let g_mat = nchw_to_mat(grad_out); // (c_out, b*h*w)
        self.grad_weight = &self.grad_weight + &g_mat.dot(&cols.t());
        self.grad_bias = &self.grad_bias + &g_mat.sum_axis(Axis(1));
        let g_cols = self.weight.t().dot(&g_mat); // (c_in*9, b*h*w)
        col2im(&g_cols, b, c, h, w)
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight.fill(F::zero());
        self.grad_bias.fill(F::zero());
    }
}

/// (c, b*h*w) -> (b, c, h, w) standard layout.
fn mat_to_nchw<F: Scalar>(mat: Array2<F>, b: usize, c: usize, h: usize, w: usize) -> Array4<F> {
    let hw = h * w;
    let mut out = Array4::<F>::zeros((b, c, h, w));
    let ms = mat.as_slice().expect("standard layout");
    let os = out.as_slice_mut().expect("standard layout");
    for ci in 0..c {
        for bi in 0..b {
            let src = (ci * b + bi) * hw;
            let dst = (bi * c + ci) * hw;
            os[dst..dst + hw].copy_from_slice(&ms[src..src + hw]);
        }
    }
    out
}

/// (b, c, h, w) -> (c, b*h*w).
fn nchw_to_mat<F: Scalar>(x: &Array4<F>) -> Array2<F> {
    let (b, c, h, w) = x.dim();
    let hw = h * w;
    let mut out = Array2::<F>::zeros((c, b * hw));
    let xs = x.as_slice().expect("standard layout");
    let os = out.as_slice_mut().expect("standard layout");
    for bi in 0..b {
        for ci in 0..c {
            let src = (bi * c + ci) * hw;
            let dst = (ci * b + bi) * hw;
            os[dst..dst + hw].copy_from_slice(&xs[src..src + hw]);
        }
    }
    out
}

/// Scatter-add the column gradient back onto the input image grid.
fn col2im<F: Scalar>(g_cols: &Array2<F>, b: usize, c: usize, h: usize, w: usize) -> Array4<F> {
    let n = b * h * w;
    let mut out = Array4::<F>::zeros((b, c, h, w));
    let gs = g_cols.as_slice().expect("standard layout");
    let os = out.as_slice_mut().expect("standard layout");
    for ci in 0..c {
        for ky in 0..3usize {
            let dy = ky as i64 - 1;
            for kx in 0..3usize {
                let dx = kx as i64 - 1;
                let row = ci * 9 + ky * 3 + kx;
                let y_lo = (-dy).max(0) as usize;
                let y_hi = (h as i64 - dy.max(0)) as usize;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as i64 - dx.max(0)) as usize;
                let len = x_hi - x_lo;
                for bi in 0..b {
                    let img_base = (bi * c + ci) * h * w;
                    for y in y_lo..y_hi {
                        let sy = (y as i64 + dy) as usize;
                        let src = row * n + bi * h * w + y * w + x_lo;
                        let dst = img_base + sy * w + (x_lo as i64 + dx) as usize;
                        for i in 0..len {
                            os[dst + i] = os[dst + i] + gs[src + i];
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct triple-loop convolution oracle.
    fn conv_reference(x: &Array4<f64>, w: &Array2<f64>, bias: &Array1<f64>) -> Array4<f64> {
        let (b, c_in, h, wd) = x.dim();
        let c_out = w.dim().0;
        let mut out = Array4::<f64>::zeros((b, c_out, h, wd));
        for bi in 0..b {
            for co in 0..c_out {
                for y in 0..h as i64 {
                    for xx in 0..wd as i64 {
                        let mut acc = bias[co];
                        for ci in 0..c_in {
                            for ky in -1i64..=1 {
                                for kx in -1i64..=1 {
                                    let sy = y + ky;
                                    let sx = xx + kx;
                                    if sy < 0 || sx < 0 || sy >= h as i64 || sx >= wd as i64 {
                                        continue;
                                    }
                                    let wi = ci * 9 + ((ky + 1) * 3 + kx + 1) as usize;
                                    acc += w[[co, wi]] * x[[bi, ci, sy as usize, sx as usize]];
                                }
                            }
                        }
                        out[[bi, co, y as usize, xx as usize]] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut conv = Conv2d::<f64>::new(3, 5, 1.0, &mut rng);
        conv.bias = Array1::from_shape_fn(5, |i| 0.1 * i as f64);
        let x = Array4::from_shape_fn((2, 3, 6, 4), |(b, c, y, x)| {
            ((b * 100 + c * 31 + y * 7 + x) as f64 * 0.37).sin()
        });
        let out = conv.forward(&x);
        let want = conv_reference(&x, &conv.weight, &conv.bias);
        for (a, b) in out.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut conv = Conv2d::<f64>::new(2, 3, 1.0, &mut rng);
        let x = Array4::from_shape_fn((1, 2, 5, 5), |(_, c, y, x)| {
            ((c * 13 + y * 5 + x) as f64 * 0.61).cos()
        });
        // Loss = sum of outputs; gradient of loss wrt output is ones.
        let out = conv.forward(&x);
        let ones = Array4::from_elem(out.dim(), 1.0);
        conv.zero_grad();
        let gx = conv.backward(&ones);

        let eps = 1e-6;
        // Check a few weight entries.
        for &(i, j) in &[(0usize, 0usize), (1, 5), (2, 17)] {
            let orig = conv.weight[[i, j]];
            conv.weight[[i, j]] = orig + eps;
            let lp: f64 = conv.forward(&x).sum();
            conv.weight[[i, j]] = orig - eps;
            let lm: f64 = conv.forward(&x).sum();
            conv.weight[[i, j]] = orig;
            let num = (lp - lm) / (2.0 * eps);
            assert!((num - conv.grad_weight[[i, j]]).abs() < 1e-5);
        }
        // Check a couple of input entries.
        let mut x2 = x.clone();
        for &(c, y, xx) in &[(0usize, 0usize, 0usize), (1, 3, 4)] {
            let orig = x2[[0, c, y, xx]];
            x2[[0, c, y, xx]] = orig + eps;
            let lp: f64 = conv.forward(&x2).sum();
            x2[[0, c, y, xx]] = orig - eps;
            let lm: f64 = conv.forward(&x2).sum();
            x2[[0, c, y, xx]] = orig;
            let num = (lp - lm) / (2.0 * eps);
            assert!((num - gx[[0, c, y, xx]]).abs() < 1e-5);
        }
    }
}
