//! Spectral differentiation along latitude rings.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub struct RingFft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for RingFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingFft").field("len", &self.len).finish()
    }
}

/// Reusable transform buffers.
#[derive(Debug, Default)]
pub struct RingWork {
    spec: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl RingWork {
    fn prepare(&mut self, n: usize, scratch: usize) {
        self.spec.resize(n, Complex::new(0.0, 0.0));
        self.scratch.resize(scratch, Complex::new(0.0, 0.0));
    }
}

impl RingFft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Signed wavenumber of FFT bin `b`.
    fn wavenumber(&self, b: usize) -> i64 {
        if b <= self.len / 2 {
            b as i64
        } else {
            b as i64 - self.len as i64
        }
    }

    /// First and second longitude derivatives of one ring.
    #[cfg(test)]
    pub fn derivatives(&self, ring: &[f64], d1: &mut [f64], d2: &mut [f64]) {
        let mut work = RingWork::default();
        self.derivatives_with(ring, d1, d2, &mut work);
    }

    /// [`RingFft::derivatives`] with caller-owned buffers. Both outputs are
    /// real, so they come back from a single inverse transform as the real
    /// and imaginary parts of `d1 + i d2`.
    pub fn derivatives_with(&self, ring: &[f64], d1: &mut [f64], d2: &mut [f64], work: &mut RingWork) {
        let n = self.len;
        work.prepare(n, self.scratch_len());
        let spec = &mut work.spec;
        for (c, &v) in spec.iter_mut().zip(ring) {
            *c = Complex::new(v, 0.0);
        }
        self.forward.process_with_scratch(spec, &mut work.scratch);
        let scale = 1.0 / n as f64;
        for b in 0..n {
            let mf = self.wavenumber(b) as f64;
            let c = spec[b] * scale;
            // the Nyquist mode has no odd derivative on an even ring
            let first = if n.is_multiple_of(2) && b == n / 2 {
                Complex::new(0.0, 0.0)
            } else {
                c * Complex::new(0.0, mf)
            };
            let second = c * (-mf * mf);
            spec[b] = first + Complex::new(0.0, 1.0) * second;
        }
        self.inverse.process_with_scratch(spec, &mut work.scratch);
        for j in 0..n {
            d1[j] = spec[j].re;
            d2[j] = spec[j].im;
        }
    }

    fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// Removes wavenumbers `|m| > cut` from one ring in place.
    pub fn low_pass(&self, ring: &mut [f64], cut: usize) {
        let n = self.len;
        if cut >= n / 2 {
            return;
        }
        let mut work = RingWork::default();
        work.prepare(n, self.scratch_len());
        let spec = &mut work.spec;
        for (c, &v) in spec.iter_mut().zip(ring.iter()) {
            *c = Complex::new(v, 0.0);
        }
        self.forward.process_with_scratch(spec, &mut work.scratch);
        for b in 0..n {
            if self.wavenumber(b).unsigned_abs() as usize > cut {
                spec[b] = Complex::new(0.0, 0.0);
            }
        }
        self.inverse.process_with_scratch(spec, &mut work.scratch);
        let scale = 1.0 / n as f64;
        for j in 0..n {
            ring[j] = spec[j].re * scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn differentiates_trig_polynomials() {
        let n = 16;
        let fft = RingFft::new(n);
        let phi: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let ring: Vec<f64> = phi.iter().map(|p| (3.0 * p).sin() + 0.5 * (2.0 * p).cos()).collect();
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        fft.derivatives(&ring, &mut d1, &mut d2);
        for (j, p) in phi.iter().enumerate() {
            let e1 = 3.0 * (3.0 * p).cos() - (2.0 * p).sin();
            let e2 = -9.0 * (3.0 * p).sin() - 2.0 * (2.0 * p).cos();
            assert!((d1[j] - e1).abs() < 1e-12);
            assert!((d2[j] - e2).abs() < 1e-12);
        }
    }

    #[test]
    fn low_pass_keeps_low_modes() {
        let n = 16;
        let fft = RingFft::new(n);
        let mut ring: Vec<f64> = (0..n)
            .map(|j| {
                let p = 2.0 * PI * j as f64 / n as f64;
                1.0 + p.cos() + (5.0 * p).sin()
            })
            .collect();
        fft.low_pass(&mut ring, 2);
        for (j, v) in ring.iter().enumerate() {
            let p = 2.0 * PI * j as f64 / n as f64;
            assert!((v - 1.0 - p.cos()).abs() < 1e-13);
        }
    }
}
