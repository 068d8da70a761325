//! Radix-2 FFT and linear convolution of real sequences.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

/// Operands shorter than this are convolved directly.
pub const DIRECT_THRESHOLD: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    #[inline]
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }
}

impl Add for Complex {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl Mul<f64> for Complex {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }
}

/// In-place iterative Cooley-Tukey transform. `buf.len()` must be a power
/// of two. The inverse transform is unnormalized.
pub fn fft_in_place(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    // Twiddles are evaluated directly rather than by recurrence.
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddles: Vec<Complex> = (0..n / 2)
        .map(|k| {
            let angle = sign * 2.0 * PI * k as f64 / n as f64;
            Complex::new(libm::cos(angle), libm::sin(angle))
        })
        .collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let u = buf[start + k];
                let v = buf[start + k + half] * w;
                buf[start + k] = u + v;
                buf[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

/// Direct O(len(a) * len(b)) linear convolution.
pub fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &s) in short.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for (o, &l) in out[i..].iter_mut().zip(long) {
            *o += s * l;
        }
    }
    out
}

/// FFT linear convolution. Both real inputs are packed into one complex
/// transform.
pub fn convolve_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut z = vec![Complex::default(); n];
    for (slot, &v) in z.iter_mut().zip(a) {
        slot.re = v;
    }
    for (slot, &v) in z.iter_mut().zip(b) {
        slot.im = v;
    }
    fft_in_place(&mut z, false);
    // Split Z = A + iB using conjugate symmetry, multiply, transform back.
    let mut prod = vec![Complex::default(); n];
    for k in 0..n {
        let zk = z[k];
        let zc = z[(n - k) & (n - 1)].conj();
        let fa = (zk + zc) * 0.5;
        let d = zk - zc;
        // (zk - zc) / (2i)
        let fb = Complex::new(d.im * 0.5, -d.re * 0.5);
        prod[k] = fa * fb;
    }
    fft_in_place(&mut prod, true);
    let scale = 1.0 / n as f64;
    prod[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Linear convolution of two non-negative sequences: direct when either
/// operand is short, FFT otherwise. Negative FFT round-off is clipped to 0.
pub fn convolve_nonneg(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.len().min(b.len()) < DIRECT_THRESHOLD {
        return convolve_direct(a, b);
    }
    let mut out = convolve_fft(a, b);
    for v in &mut out {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fft_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(la, lb) in &[(1, 1), (3, 700), (256, 256), (1000, 777), (4096, 3)] {
            let a: Vec<f64> = (0..la).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..lb).map(|_| rng.random::<f64>()).collect();
            let d = convolve_direct(&a, &b);
            let f = convolve_fft(&a, &b);
            assert_eq!(d.len(), f.len());
            let scale = (la.min(lb)) as f64;
            for (x, y) in d.iter().zip(&f) {
                assert!((x - y).abs() < 1e-13 * scale, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        let mut buf: Vec<Complex> = (0..64).map(|i| Complex::new(i as f64, -(i as f64) / 2.0)).collect();
        let orig = buf.clone();
        fft_in_place(&mut buf, false);
        fft_in_place(&mut buf, true);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a.re / 64.0 - b.re).abs() < 1e-12 && (a.im / 64.0 - b.im).abs() < 1e-12);
        }
    }

    #[test]
    fn short_operand_is_exact() {
        let a = [0.25, 0.5, 0.25];
        let b = [0.5, 0.5];
        assert_eq!(convolve_nonneg(&a, &b), vec![0.125, 0.375, 0.375, 0.125]);
        assert!(convolve_nonneg(&[], &b).is_empty());
    }
}
