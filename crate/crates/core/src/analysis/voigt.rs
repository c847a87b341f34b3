//! Faddeeva function and Voigt line shape.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::units::GAUSSIAN_FWHM_PER_SIGMA;

const N: usize = 32;
const M: usize = 2 * N;

struct Weideman {
    l: f64,
    /// Polynomial coefficients, lowest degree first.
    a: [f64; N],
}

fn weideman() -> &'static Weideman {
    static CELL: OnceLock<Weideman> = OnceLock::new();
    CELL.get_or_init(|| {
        let l = (N as f64 / 2f64.sqrt()).sqrt();
        // Samples of exp(−t²)(L² + t²) at t = L·tan(θ/2), θ = kπ/M, in
        // FFT order (k = 0..M−1, then −M..−1 with the k = −M sample zero).
        let g = |k: i64| -> f64 {
            if k == -(M as i64) {
                return 0.0;
            }
            let t = l * (k as f64 * PI / M as f64 / 2.0).tan();
            (-t * t).exp() * (l * l + t * t)
        };
        let mut a = [0.0; N];
        for (n, coeff) in a.iter_mut().enumerate() {
            let n = n + 1;
            let mut s = 0.0;
            for i in 0..2 * M {
                let k = if i < M { i as i64 } else { i as i64 - 2 * M as i64 };
                s += g(k) * (PI * (n * i) as f64 / M as f64).cos();
            }
            *coeff = s / (2 * M) as f64;
        }
        Weideman { l, a }
    })
}

/// Faddeeva function w(z) = e^{−z²} erfc(−iz) for Im z ≥ 0, by Weideman's
/// rational series with 32 terms.
pub fn faddeeva(z: Complex64) -> Complex64 {
    let w = weideman();
    let i = Complex64::i();
    let lz = Complex64::new(w.l, 0.0) - i * z;
    let big_z = (Complex64::new(w.l, 0.0) + i * z) / lz;
    let mut p = Complex64::new(0.0, 0.0);
    for c in w.a.iter().rev() {
        p = p * big_z + c;
    }
    2.0 * p / (lz * lz) + (1.0 / PI.sqrt()) / lz
}

/// Area-normalized Voigt profile with Gaussian std `sigma` and Lorentzian
/// half width `gamma`.
pub fn voigt(x: f64, sigma: f64, gamma: f64) -> f64 {
    if sigma <= 1e-12 * gamma.max(1e-300) || sigma == 0.0 {
        if gamma == 0.0 {
            return if x == 0.0 { f64::INFINITY } else { 0.0 };
        }
        return gamma / (PI * (x * x + gamma * gamma));
    }
    let s2 = sigma * std::f64::consts::SQRT_2;
    let z = Complex64::new(x / s2, gamma / s2);
    faddeeva(z).re / (sigma * (2.0 * PI).sqrt())
}

/// Full width at half maximum of a Voigt profile given component FWHMs.
pub fn voigt_fwhm(gauss_fwhm: f64, lorentz_fwhm: f64) -> f64 {
    let sigma = gauss_fwhm / GAUSSIAN_FWHM_PER_SIGMA;
    let gamma = 0.5 * lorentz_fwhm;
    if gauss_fwhm <= 0.0 {
        return lorentz_fwhm.max(0.0);
    }
    if lorentz_fwhm <= 0.0 {
        return gauss_fwhm;
    }
    let half = 0.5 * voigt(0.0, sigma, gamma);
    let (mut lo, mut hi) = (0.0, gauss_fwhm + lorentz_fwhm);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if voigt(mid, sigma, gamma) > half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    2.0 * 0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faddeeva_reference_points() {
        assert!((faddeeva(Complex64::new(0.0, 0.0)) - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        // w(i) = e·erfc(1)
        assert!((faddeeva(Complex64::new(0.0, 1.0)).re - 0.427_583_576_155_807).abs() < 1e-10);
        // w(1) = e^{−1} + 2i·D(1)/√π, D = Dawson function
        let w1 = faddeeva(Complex64::new(1.0, 0.0));
        assert!((w1.re - (-1.0f64).exp()).abs() < 1e-10);
        assert!((w1.im - 2.0 * 0.538_079_506_912_768 / PI.sqrt()).abs() < 1e-10);
    }

    fn quadrature(x: f64, sigma: f64, gamma: f64) -> f64 {
        // Direct convolution integral, trapezoid on a fine grid.
        let n = 200_000;
        let lim = 12.0 * sigma;
        let h = 2.0 * lim / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let u = -lim + i as f64 * h;
            let g = (-(u * u) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
            let l = gamma / (PI * ((x - u).powi(2) + gamma * gamma));
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += wgt * g * l;
        }
        s * h
    }

    #[test]
    fn voigt_matches_convolution_integral() {
        for &(x, s, g) in &[(0.0, 1.0, 0.5), (1.3, 2.0, 0.16), (-4.0, 0.7, 1.1), (0.2, 2.1, 0.035)] {
            let v = voigt(x, s, g);
            let q = quadrature(x, s, g);
            assert!((v - q).abs() < 1e-6 * q.max(1e-3), "{x} {s} {g}: {v} vs {q}");
        }
    }

    #[test]
    fn fwhm_limits() {
        assert!((voigt_fwhm(0.0, 0.32) - 0.32).abs() < 1e-12);
        assert!((voigt_fwhm(4.8, 0.0) - 4.8).abs() < 1e-12);
        // Olivero–Longbothum empirical formula agrees to ~0.02%.
        let (fg, fl) = (4.7f64, 0.39f64);
        let ol = 0.5346 * fl + (0.2166 * fl * fl + fg * fg).sqrt();
        assert!((voigt_fwhm(fg, fl) - ol).abs() < 5e-4 * ol);
        let f = voigt_fwhm(1e-9, 0.5);
        assert!((f - 0.5).abs() < 1e-6);
    }
}
