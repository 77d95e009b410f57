//! Transition function of the uniform theory of diffraction.

use num_complex::Complex64;

use crate::error::{Error, Result};

const SERIES_RADIUS: f64 = 2.5;

/// `F(x) = 2√x · |∫_{√x}^∞ exp(i y²) dy|`.
///
/// The tail integral equals `(√π/2) e^{iπ/4} erfc(e^{-iπ/4} √x)`, so
/// `F(x) = √(πx) |erfc(e^{-iπ/4} √x)|`.
pub fn fresnel_transition(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "transition function argument {x} must be finite and ≥ 0"
        )));
    }
    Ok(transition_unchecked(x))
}

pub(crate) fn transition_unchecked(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let w = x.sqrt();
    let z = Complex64::from_polar(w, -std::f64::consts::FRAC_PI_4);
    (std::f64::consts::PI * x).sqrt() * erfc(z).norm()
}

/// Complementary error function for `Re z ≥ 0`.
pub(crate) fn erfc(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_RADIUS {
        Complex64::new(1.0, 0.0) - erf_series(z)
    } else {
        erfc_continued_fraction(z)
    }
}

fn erf_series(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for n in 1..200 {
        term = -term * z2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum * (2.0 / std::f64::consts::PI.sqrt())
}

/// `erfc(z) = e^{-z²}/√π · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + …))))`,
/// evaluated with the modified Lentz algorithm.
fn erfc_continued_fraction(z: Complex64) -> Complex64 {
    let tiny = Complex64::new(1e-300, 0.0);
    let mut f = z;
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for n in 1..10_000 {
        let a = n as f64 / 2.0;
        d = z + d * a;
        if d.norm() == 0.0 {
            d = tiny;
        }
        c = z + c.inv() * a;
        if c.norm() == 0.0 {
            c = tiny;
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    (-z * z).exp() / (std::f64::consts::PI.sqrt() * f)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule for ∫_0^a cos(y²), ∫_0^a sin(y²).
    fn partial_integrals(a: f64) -> (f64, f64) {
        let n = 400_000usize;
        let h = a / n as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for i in 0..=n {
            let y = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c += w * (y * y).cos();
            s += w * (y * y).sin();
        }
        (c * h / 3.0, s * h / 3.0)
    }

    fn oracle(x: f64) -> f64 {
        let limit = (std::f64::consts::PI / 8.0).sqrt();
        let (c, s) = partial_integrals(x.sqrt());
        2.0 * x.sqrt() * ((limit - c).powi(2) + (limit - s).powi(2)).sqrt()
    }

    #[test]
    fn matches_quadrature() {
        for x in [0.01, 0.1, 0.5, 1.0, 3.0, 6.0, 6.5, 10.0, 100.0] {
            let f = fresnel_transition(x).unwrap();
            assert!(
                (f - oracle(x)).abs() < 1e-8,
                "x = {x}: {f} vs {}",
                oracle(x)
            );
        }
    }

    #[test]
    fn limits() {
        assert_eq!(fresnel_transition(0.0).unwrap(), 0.0);
        let f100 = fresnel_transition(100.0).unwrap();
        assert!((0.95..=1.05).contains(&f100));
        assert!(fresnel_transition(10.0).unwrap() < f100);
        assert!((fresnel_transition(1e6).unwrap() - 1.0).abs() < 1e-6);
        assert!(fresnel_transition(-1.0).is_err());
        assert!(fresnel_transition(f64::NAN).is_err());
    }

    #[test]
    fn small_argument_asymptote() {
        // F(x) ≈ √(πx) for x → 0
        let x = 1e-8;
        let f = fresnel_transition(x).unwrap();
        assert!((f / (std::f64::consts::PI * x).sqrt() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn erfc_branches_agree() {
        for r in [2.3, 2.5, 2.7] {
            let z = Complex64::from_polar(r, -std::f64::consts::FRAC_PI_4);
            let a = Complex64::new(1.0, 0.0) - erf_series(z);
            let b = erfc_continued_fraction(z);
            assert!((a - b).norm() < 1e-12, "r = {r}");
        }
    }
}
