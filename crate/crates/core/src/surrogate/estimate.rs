//! A-priori bound of the frozen-`μ̄` diffraction modelling error.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{FieldComponent, Surrogate};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2, SupportKind};
use crate::utd::coefficient_at;

/// Field of the parent of diffraction component `comp` at its vertex,
/// sampled on the Ψ time grid.
pub fn vertex_trace(s: &Surrogate, comp: &FieldComponent) -> Result<Vec<f64>> {
    if comp.kind != SupportKind::Diffraction {
        return Err(Error::InvalidArgument(format!(
            "component {} is not a diffraction",
            comp.index
        )));
    }
    let parent = &s.components[comp.parent.expect("diffraction parent")];
    let y = comp.xi - parent.xi;
    let rho = y.norm() + parent.r;
    let w = parent.zeta.eval(y);
    Ok((0..=s.psi.n_t)
        .map(|n| s.psi.sample_unchecked(rho, n as f64 * s.psi.dt) * w)
        .collect())
}

/// `(1/M) Σ |X_m|`: the L¹ norm of the continuous spectrum
/// `(1/2π) ∫ f(t) e^{-ikt} dt` approximated by the DFT of `M` samples.
fn spectrum_l1(trace: &[f64]) -> f64 {
    let m = trace.len();
    let mut buf: Vec<Complex64> = trace.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    buf.iter().map(|c| c.norm()).sum::<f64>() / m as f64
}

/// `sup_k |D̃_μ̄(φ) − D_k(φ)| · ‖F[ũ_i](ξₙ, ·)‖_{L¹}` with `D_k` evaluated at
/// `μ = k · s_dist`.
pub fn apriori_diffraction_bound(
    s: &Surrogate,
    comp: &FieldComponent,
    phi: f64,
    k_grid: &[f64],
    s_dist: f64,
) -> Result<f64> {
    if k_grid.is_empty() {
        return Err(Error::InvalidArgument("empty wavenumber grid".into()));
    }
    if let Some(k) = k_grid.iter().find(|k| !(**k > 0.0) || !k.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "wavenumber {k} must be positive"
        )));
    }
    if !(s_dist > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance {s_dist} must be positive"
        )));
    }
    let trace = vertex_trace(s, comp)?;
    let table = comp.zeta.table().expect("diffraction weight is tabulated");
    let frame = &table.frame;
    let eps = s.config.diffraction.eps_sing;
    let frozen = coefficient_at(frame, s.config.diffraction.mu_bar, eps, phi);
    let sup = k_grid
        .iter()
        .map(|k| (frozen - coefficient_at(frame, k * s_dist, eps, phi)).abs())
        .fold(0.0, f64::max);
    if sup == 0.0 {
        return Ok(0.0);
    }
    Ok(sup * spectrum_l1(&trace))
}

/// Sum of the a-priori bounds of all diffraction-born components that have
/// reached `x` by time `t`; piecewise constant in `t`.
pub fn apriori_bound_at(s: &Surrogate, x: Point2, t: f64, k_grid: &[f64]) -> Result<f64> {
    if !s.domain.contains(x) {
        return Err(Error::OutsideDomain { x1: x.x1, x2: x.x2 });
    }
    let mut total = 0.0;
    for c in s.components.iter().filter(|c| c.diffracted) {
        let y = x - c.xi;
        if y.norm() + c.r - s.config.radius > t || !s.domain.support_contains(&c.support, x) {
            continue;
        }
        // nearest diffraction ancestor
        let mut d = c;
        while d.kind != SupportKind::Diffraction {
            d = &s.components[d.parent.expect("diffracted component has a parent")];
        }
        let table = d.zeta.table().expect("diffraction weight is tabulated");
        let phi =
            wrap_angle(c.zeta.base_angle(y) - table.frame.ref_angle).min(table.frame.opening());
        total += apriori_diffraction_bound(s, d, phi, k_grid, y.norm().max(1e-12))?;
    }
    Ok(total)
}

/// Angular frequencies of the DFT of a trace on the Ψ time grid, up to
/// Nyquist, thinned to at most `max_len` values.
pub fn default_k_grid(s: &Surrogate, max_len: usize) -> Vec<f64> {
    let m = s.psi.n_t + 1;
    let base = 2.0 * std::f64::consts::PI / (m as f64 * s.psi.dt);
    let half = m / 2;
    let stride = half.div_ceil(max_len.max(1)).max(1);
    (1..=half)
        .step_by(stride)
        .map(|j| j as f64 * base)
        .collect()
}
