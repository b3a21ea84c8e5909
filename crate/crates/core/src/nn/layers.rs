use super::{gemm, Param, Scalar, Tensor, Trans};
use rand::Rng;

/// Same-padded, stride-1 2D convolution with an odd square kernel,
/// computed as an im2col matrix product.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    /// `out_c x (in_c * k * k)`
    pub weight: Param<T>,
    pub bias: Param<T>,
}

/// What [`Conv2d::backward`] needs from the forward pass.
#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    col: Vec<T>,
    h: usize,
    w: usize,
}

impl<T: Scalar> Conv2d<T> {
    /// He-normal weights, zero bias.
    pub fn new<R: Rng + ?Sized>(in_c: usize, out_c: usize, k: usize, rng: &mut R) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        let fan_in = in_c * k * k;
        Self {
            in_c,
            out_c,
            k,
            weight: Param::normal(out_c * fan_in, (2.0 / fan_in as f64).sqrt(), rng),
            bias: Param::zeros(out_c),
        }
    }

    fn im2col(&self, x: &Tensor<T>) -> Vec<T> {
        let (h, w, k) = (x.h, x.w, self.k);
        let pad = (k / 2) as isize;
        let n = h * w;
        let mut col = vec![T::zero(); self.in_c * k * k * n];
        for ci in 0..self.in_c {
            let plane = &x.data[ci * n..(ci + 1) * n];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let dst = &mut col[row * n..(row + 1) * n];
                    let dx = kx as isize - pad;
                    let dy = ky as isize - pad;
                    // valid output columns for this horizontal offset
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                    for oy in 0..h {
                        let iy = oy as isize + dy;
                        if iy < 0 || iy >= h as isize || x0 >= x1 {
                            continue;
                        }
                        let src_off = iy as usize * w;
                        let d = &mut dst[oy * w + x0..oy * w + x1];
                        let s0 = (x0 as isize + dx) as usize;
                        d.copy_from_slice(&plane[src_off + s0..src_off + s0 + (x1 - x0)]);
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[T], h: usize, w: usize) -> Tensor<T> {
        let k = self.k;
        let pad = (k / 2) as isize;
        let n = h * w;
        let mut out = Tensor::zeros(self.in_c, h, w);
        for ci in 0..self.in_c {
            let plane = &mut out.data[ci * n..(ci + 1) * n];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let src = &col[row * n..(row + 1) * n];
                    let dx = kx as isize - pad;
                    let dy = ky as isize - pad;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                    for oy in 0..h {
                        let iy = oy as isize + dy;
                        if iy < 0 || iy >= h as isize || x0 >= x1 {
                            continue;
                        }
                        let base = iy as usize * w;
                        let s0 = (x0 as isize + dx) as usize;
                        for (i, v) in src[oy * w + x0..oy * w + x1].iter().enumerate() {
                            plane[base + s0 + i] = plane[base + s0 + i] + *v;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, ConvCache<T>) {
        assert_eq!(x.c, self.in_c, "conv input channels");
        let n = x.h * x.w;
        let kk = self.in_c * self.k * self.k;
        let col = if self.k == 1 {
            x.data.clone()
        } else {
            self.im2col(x)
        };
        let mut y = Tensor::zeros(self.out_c, x.h, x.w);
        for (o, b) in self.bias.value.iter().enumerate() {
            y.data[o * n..(o + 1) * n].iter_mut().for_each(|v| *v = *b);
        }
        gemm(
            Trans::No,
            Trans::No,
            self.out_c,
            n,
            kk,
            T::one(),
            &self.weight.value,
            &col,
            T::one(),
            &mut y.data,
        );
        (y, ConvCache { col, h: x.h, w: x.w })
    }

    /// Accumulates weight and bias gradients; returns the input gradient
    /// when `need_dx` is set.
    pub fn backward(
        &mut self,
        cache: &ConvCache<T>,
        dy: &Tensor<T>,
        need_dx: bool,
    ) -> Option<Tensor<T>> {
        let n = cache.h * cache.w;
        let kk = self.in_c * self.k * self.k;
        assert_eq!(dy.data.len(), self.out_c * n, "conv output gradient shape");
        gemm(
            Trans::No,
            Trans::Yes,
            self.out_c,
            kk,
            n,
            T::one(),
            &dy.data,
            &cache.col,
            T::one(),
            &mut self.weight.grad,
        );
        for (o, g) in self.bias.grad.iter_mut().enumerate() {
            *g = *g + dy.data[o * n..(o + 1) * n].iter().copied().sum::<T>();
        }
        if !need_dx {
            return None;
        }
        let mut dcol = vec![T::zero(); kk * n];
        gemm(
            Trans::Yes,
            Trans::No,
            kk,
            n,
            self.out_c,
            T::one(),
            &self.weight.value,
            &dy.data,
            T::zero(),
            &mut dcol,
        );
        if self.k == 1 {
            return Some(Tensor::from_vec(self.in_c, cache.h, cache.w, dcol));
        }
        Some(self.col2im(&dcol, cache.h, cache.w))
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param<T>; 2] {
        [&self.weight, &self.bias]
    }
}

pub struct Relu;

impl Relu {
    pub fn forward<T: Scalar>(x: &mut Tensor<T>) {
        x.data.iter_mut().for_each(|v| {
            if *v < T::zero() {
                *v = T::zero()
            }
        });
    }

    /// `y` is the forward output.
    pub fn backward<T: Scalar>(y: &Tensor<T>, dy: &mut Tensor<T>) {
        for (g, v) in dy.data.iter_mut().zip(&y.data) {
            if *v <= T::zero() {
                *g = T::zero();
            }
        }
    }
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
pub struct MaxPool2;

#[derive(Debug, Clone)]
pub struct PoolCache {
    argmax: Vec<u32>,
    in_shape: (usize, usize, usize),
}

impl MaxPool2 {
    pub fn forward<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, PoolCache) {
        let (oh, ow) = (x.h / 2, x.w / 2);
        let mut y = Tensor::zeros(x.c, oh, ow);
        let mut argmax = vec![0u32; x.c * oh * ow];
        for c in 0..x.c {
            let base = c * x.h * x.w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + (2 * oy) * x.w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let i = base + (2 * oy + dy) * x.w + 2 * ox + dx;
                        if x.data[i] > x.data[best] {
                            best = i;
                        }
                    }
                    let o = (c * oh + oy) * ow + ox;
                    y.data[o] = x.data[best];
                    argmax[o] = best as u32;
                }
            }
        }
        (
            y,
            PoolCache {
                argmax,
                in_shape: x.shape(),
            },
        )
    }

    pub fn backward<T: Scalar>(cache: &PoolCache, dy: &Tensor<T>) -> Tensor<T> {
        let (c, h, w) = cache.in_shape;
        let mut dx = Tensor::zeros(c, h, w);
        for (g, &i) in dy.data.iter().zip(&cache.argmax) {
            dx.data[i as usize] = dx.data[i as usize] + *g;
        }
        dx
    }
}

/// Nearest-neighbour 2x upsampling.
pub struct Upsample2;

impl Upsample2 {
    pub fn forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
        let (h, w) = (x.h * 2, x.w * 2);
        let mut y = Tensor::zeros(x.c, h, w);
        for c in 0..x.c {
            for yy in 0..h {
                for xx in 0..w {
                    y.data[(c * h + yy) * w + xx] = x.at(c, yy / 2, xx / 2);
                }
            }
        }
        y
    }

    pub fn backward<T: Scalar>(dy: &Tensor<T>) -> Tensor<T> {
        let (h, w) = (dy.h / 2, dy.w / 2);
        let mut dx = Tensor::zeros(dy.c, h, w);
        for c in 0..dy.c {
            for yy in 0..dy.h {
                for xx in 0..dy.w {
                    let i = (c * h + yy / 2) * w + xx / 2;
                    dx.data[i] = dx.data[i] + dy.at(c, yy, xx);
                }
            }
        }
        dx
    }
}

/// Depth concatenation of equally sized tensors.
pub struct Concat;

impl Concat {
    pub fn forward<T: Scalar>(parts: &[&Tensor<T>]) -> Tensor<T> {
        let (h, w) = (parts[0].h, parts[0].w);
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut c = 0;
        for p in parts {
            assert!(p.h == h && p.w == w, "concat spatial mismatch");
            data.extend_from_slice(&p.data);
            c += p.c;
        }
        Tensor::from_vec(c, h, w, data)
    }

    pub fn split<T: Scalar>(dy: &Tensor<T>, channels: &[usize]) -> Vec<Tensor<T>> {
        let n = dy.h * dy.w;
        let mut off = 0;
        channels
            .iter()
            .map(|&c| {
                let t = Tensor::from_vec(c, dy.h, dy.w, dy.data[off * n..(off + c) * n].to_vec());
                off += c;
                t
            })
            .collect()
    }
}

/// Fully connected layer, `weight` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Scalar> Dense<T> {
    /// Glorot-normal weights, zero bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let std = (2.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weight: Param::normal(inputs * outputs, std, rng),
            bias: Param::zeros(outputs),
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.inputs, "dense input size");
        let mut y = self.bias.value.clone();
        gemm(
            Trans::No,
            Trans::No,
            self.outputs,
            1,
            self.inputs,
            T::one(),
            &self.weight.value,
            x,
            T::one(),
            &mut y,
        );
        y
    }

    pub fn backward(&mut self, x: &[T], dy: &[T]) -> Vec<T> {
        for o in 0..self.outputs {
            let row = &mut self.weight.grad[o * self.inputs..(o + 1) * self.inputs];
            for (g, xi) in row.iter_mut().zip(x) {
                *g = *g + dy[o] * *xi;
            }
            self.bias.grad[o] = self.bias.grad[o] + dy[o];
        }
        let mut dx = vec![T::zero(); self.inputs];
        gemm(
            Trans::Yes,
            Trans::No,
            self.inputs,
            1,
            self.outputs,
            T::one(),
            &self.weight.value,
            dy,
            T::zero(),
            &mut dx,
        );
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Param<T>; 2] {
        [&self.weight, &self.bias]
    }
}

pub struct Sigmoid;

impl Sigmoid {
    pub fn apply<T: Scalar>(z: T) -> T {
        if z >= T::zero() {
            T::one() / (T::one() + (-z).exp())
        } else {
            let e = z.exp();
            e / (T::one() + e)
        }
    }

    pub fn forward<T: Scalar>(z: &[T]) -> Vec<T> {
        z.iter().map(|v| Self::apply(*v)).collect()
    }

    pub fn backward<T: Scalar>(y: &[T], dy: &[T]) -> Vec<T> {
        y.iter()
            .zip(dy)
            .map(|(y, g)| *g * *y * (T::one() - *y))
            .collect()
    }
}

/// Mean absolute error and its (sub)gradient.
pub fn mae_loss<T: Scalar>(pred: &[T], target: &[T]) -> (T, Vec<T>) {
    assert_eq!(pred.len(), target.len());
    let n = T::of(pred.len() as f64);
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (*p - *t).abs())
        .sum::<T>()
        / n;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = *p - *t;
            if d > T::zero() {
                T::one() / n
            } else if d < T::zero() {
                -T::one() / n
            } else {
                T::zero()
            }
        })
        .collect();
    (loss, grad)
}

/// Mean binary cross-entropy on logits with soft targets in `[0, 1]`;
/// positive terms are weighted by `pos_weight`.
pub fn bce_with_logits<T: Scalar>(logits: &[T], target: &[T], pos_weight: T) -> (T, Vec<T>) {
    assert_eq!(logits.len(), target.len());
    let n = T::of(logits.len() as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (z, t) in logits.iter().zip(target) {
        // -[w t log s(z) + (1-t) log(1 - s(z))]
        let softplus_neg = (-z.abs()).exp().ln_1p() + (-*z).max(T::zero()); // -log s(z)
        let softplus_pos = softplus_neg + *z; // -log(1 - s(z))
        loss = loss + pos_weight * *t * softplus_neg + (T::one() - *t) * softplus_pos;
        let s = Sigmoid::apply(*z);
        // d/dz: w t (s - 1) + (1 - t) s
        grad.push((pos_weight * *t * (s - T::one()) + (T::one() - *t) * s) / n);
    }
    (loss / n, grad)
}
