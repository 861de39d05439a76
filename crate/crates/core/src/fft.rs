//! Chirp-z transform on the unit circle via Bluestein's FFT convolution.
//!
//! Evaluates X_m = Σ_k x_k · exp(−i·α·k·m) for an arbitrary real α, which
//! lets a uniformly sampled spectrum be transformed straight onto an
//! arbitrary uniform delay grid.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub fn chirp_z(input: &[Complex64], alpha: f64, m_out: usize) -> Vec<Complex64> {
    let n_in = input.len();
    if n_in == 0 || m_out == 0 {
        return vec![Complex64::new(0.0, 0.0); m_out];
    }
    let len = (n_in + m_out - 1).next_power_of_two();
    let chirp = |n: usize| {
        let n = n as f64;
        Complex64::from_polar(1.0, -0.5 * alpha * n * n)
    };

    let mut a = vec![Complex64::new(0.0, 0.0); len];
    for (k, x) in input.iter().enumerate() {
        a[k] = x * chirp(k);
    }
    let mut b = vec![Complex64::new(0.0, 0.0); len];
    for n in 0..m_out.max(n_in) {
        let h = chirp(n).conj();
        if n < m_out {
            b[n] = h;
        }
        if n > 0 && n < n_in {
            b[len - n] = h;
        }
    }

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    forward.process(&mut a);
    forward.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inverse.process(&mut a);

    let scale = 1.0 / len as f64;
    (0..m_out).map(|m| a[m] * scale * chirp(m)).collect()
}
