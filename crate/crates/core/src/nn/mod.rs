//! Minimal CPU neural-network kernels with hand-written backward passes.
//!
//! Everything is generic over [`Scalar`] so that the same code runs in
//! `f32` for training and in `f64` for finite-difference gradient checks.
//! Tensors hold a single sample in channel-major (CHW) order; batching is
//! done by the callers, which accumulate parameter gradients sample by
//! sample in a fixed order so that training is bit-reproducible.

mod layers;
mod optim;
mod store;

pub use layers::{
    bce_with_logits, mae_loss, Concat, Conv2d, ConvCache, Dense, MaxPool2, PoolCache, Relu,
    Sigmoid, Upsample2,
};
pub use optim::{Adam, Optimizer, Sgd};
pub use store::{read_params, write_params, StoreError};

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Debug;

/// Floating-point element type of the kernels.
pub trait Scalar: Float + Default + Debug + Send + Sync + std::iter::Sum + 'static {
    /// `C = alpha * A B + beta * C` on strided row-major operands.
    ///
    /// # Safety
    /// The pointers and strides must describe valid `m x k`, `k x n` and
    /// `m x n` matrices, and `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
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

    fn of(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite cast")
    }

    fn as_f64(self) -> f64 {
        <Self as num_traits::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
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
    unsafe fn gemm_raw(
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

/// Whether a matrix operand is read as stored or transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

/// `C (m x n) = alpha * op(A) op(B) + beta * C` with row-major storage.
/// `op(A)` is `m x k`, `op(B)` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Scalar>(
    ta: Trans,
    tb: Trans,
    m: usize,
    n: usize,
    k: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = match ta {
        Trans::No => (k as isize, 1),
        Trans::Yes => (1, m as isize),
    };
    let (rsb, csb) = match tb {
        Trans::No => (n as isize, 1),
        Trans::Yes => (1, k as isize),
    };
    // SAFETY: the asserts above bound every access implied by the strides.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

/// One sample, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![T::zero(); c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), c * h * w, "tensor shape mismatch");
        Self { c, h, w, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.h + y) * self.w + x]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// A trainable array together with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            value: vec![T::zero(); n],
            grad: vec![T::zero(); n],
        }
    }

    /// Gaussian initialisation with the given standard deviation.
    pub fn normal<R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> Self {
        let value = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                T::of(z * std)
            })
            .collect();
        Self {
            value,
            grad: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn scale_grad(&mut self, s: T) {
        self.grad.iter_mut().for_each(|g| *g = *g * s);
    }

    pub fn cast<U: Scalar>(&self) -> Param<U> {
        Param {
            value: self.value.iter().map(|v| U::of(v.as_f64())).collect(),
            grad: self.grad.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Implemented by networks so optimizers and serializers can walk their
/// parameters in a stable order.
pub trait Parameters<T: Scalar> {
    fn params_mut(&mut self) -> Vec<&mut Param<T>>;
    fn params(&self) -> Vec<&Param<T>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

pub mod gradcheck {
    //! Central finite differences for checking hand-written backward passes.

    use super::Parameters;

    /// Relative error that tolerates exact zeros on both sides.
    pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        (analytic - numeric).abs() / denom
    }

    pub fn numeric_grad(f: &mut dyn FnMut(f64) -> f64, x0: f64) -> f64 {
        let h = 1e-5;
        (f(x0 + h) - f(x0 - h)) / (2.0 * h)
    }

    /// Largest relative error between accumulated and numeric parameter
    /// gradients, probing up to `probes` evenly spaced coordinates of every
    /// parameter. Gradients are zeroed first; `backward` then accumulates
    /// the gradient of the scalar that `loss` returns.
    pub fn worst_param_error<N: Parameters<f64>>(
        net: &mut N,
        probes: usize,
        backward: impl Fn(&mut N),
        loss: impl Fn(&N) -> f64,
    ) -> f64 {
        net.zero_grad();
        backward(net);
        let analytic: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();
        let mut worst = 0.0f64;
        for (pi, grads) in analytic.iter().enumerate() {
            let stride = (grads.len() / probes.max(1)).max(1);
            for k in (0..grads.len()).step_by(stride) {
                let x0 = net.params()[pi].value[k];
                let mut f = |x: f64| {
                    net.params_mut()[pi].value[k] = x;
                    loss(net)
                };
                let numeric = numeric_grad(&mut f, x0);
                net.params_mut()[pi].value[k] = x0;
                worst = worst.max(rel_err(grads[k], numeric));
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // A = [[1,2,3],[4,5,6]] (2x3), B = [[1,0],[0,1],[1,1]] (3x2)
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0f64, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0f64; 4];
        gemm(Trans::No, Trans::No, 2, 2, 3, 1.0, &a, &b, 0.0, &mut c);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        // A^T A (3x3) from the stored 2x3 A
        let mut d = [0.0f64; 9];
        gemm(Trans::Yes, Trans::No, 3, 3, 2, 1.0, &a, &a, 0.0, &mut d);
        assert_eq!(d, [17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
        // A A^T (2x2)
        let mut e = [1.0f64; 4];
        gemm(Trans::No, Trans::Yes, 2, 2, 3, 1.0, &a, &a, 1.0, &mut e);
        assert_eq!(e, [15.0, 33.0, 33.0, 78.0]);
    }
}
