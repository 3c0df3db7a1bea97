//! Iterative radix-2 complex FFT.
//!
//! The crate is `no_std`, which rules out the usual std-only FFT crates; the
//! transform sizes used here are all powers of two, so a precomputed
//! decimation-in-time plan is sufficient.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    /// Twiddles of every butterfly stage laid out back to back; the stage
    /// with half-size `h` occupies `h - 1 .. 2h - 1`.
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl FftPlan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::param("fft_size", "must be a nonzero power of two"));
        }
        let mut twiddles = Vec::with_capacity(len.saturating_sub(1));
        let mut half = 1;
        while half < len {
            twiddles.extend((0..half).map(|k| {
                let a = -PI * k as f64 / half as f64;
                Complex64::new(a.cos(), a.sin())
            }));
            half *= 2;
        }
        let bits = len.trailing_zeros();
        let bitrev = (0..len as u32)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (32 - bits)
                }
            })
            .collect();
        Ok(Self {
            len,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform, `X[k] = sum_n x[n] e^{-2 pi i k n / N}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf);
    }

    /// In-place inverse transform including the `1/N` normalisation.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        buf.iter_mut().for_each(|v| *v = v.conj());
        self.transform(buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v = v.conj() * scale);
    }

    fn transform(&self, buf: &mut [Complex64]) {
        let n = self.len;
        assert_eq!(buf.len(), n, "buffer length does not match FFT plan");
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if j > i {
                buf.swap(i, j);
            }
        }
        if n >= 2 {
            for pair in buf.chunks_exact_mut(2) {
                let (a, b) = (pair[0], pair[1]);
                pair[0] = a + b;
                pair[1] = a - b;
            }
        }
        let mut half = 2;
        while half < n {
            let tw = &self.twiddles[half - 1..2 * half - 1];
            for block in buf.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let t = *b * w;
                    *b = *a - t;
                    *a += t;
                }
            }
            half *= 2;
        }
    }
}
