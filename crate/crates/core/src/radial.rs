//! Radially symmetric free-space solution `Ψ(ρ, t)`.
//!
//! Piecewise-linear finite elements in ρ for the weak form
//! `∫ρ Ψ_tt v + ∫ρ Ψ_ρ v_ρ = ∫ρ η₂ v`, lumped mass, leapfrog in time.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative size of a profile at `ρ = R` above which the support is
/// considered to exceed `R`.
pub const SUPPORT_TOL: f64 = 1e-4;

/// Radial profile of an initial condition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Zero,
    /// `exp(-ρ²/(2σ²))`.
    Gaussian { sigma: f64 },
    /// `(1 - ρ²/σ²) exp(-ρ²/(2σ²))`.
    Ricker { sigma: f64 },
}

impl Profile {
    pub fn eval(&self, rho: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Gaussian { sigma } => (-rho * rho / (2.0 * sigma * sigma)).exp(),
            Profile::Ricker { sigma } => {
                let q = rho * rho / (sigma * sigma);
                (1.0 - q) * (-q / 2.0).exp()
            }
        }
    }

    fn width(&self) -> Option<f64> {
        match *self {
            Profile::Zero => None,
            Profile::Gaussian { sigma } | Profile::Ricker { sigma } => Some(sigma),
        }
    }

    /// Largest |value|; attained at ρ = 0 for both shapes.
    fn peak(&self) -> f64 {
        self.eval(0.0).abs()
    }
}

/// Space-time forcing term `η₂`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Forcing {
    #[default]
    Zero,
    /// `-ω² sin(ωt) g(ρ)` with `g(ρ) = exp(-ρ²/(2σ_g²))`.
    Harmonic { omega: f64, sigma_g: f64 },
}

impl Forcing {
    pub fn eval(&self, rho: f64, t: f64) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::Harmonic { omega, sigma_g } => {
                -omega * omega * (omega * t).sin() * (-rho * rho / (2.0 * sigma_g * sigma_g)).exp()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(default)]
    pub eta0: Profile,
    #[serde(default)]
    pub eta1: Profile,
    #[serde(default)]
    pub eta2: Forcing,
    /// Support radius.
    pub radius: f64,
}

impl SourceSpec {
    pub fn gaussian(sigma: f64, radius: f64) -> Self {
        SourceSpec {
            eta0: Profile::Gaussian { sigma },
            eta1: Profile::Zero,
            eta2: Forcing::Zero,
            radius,
        }
    }

    pub fn harmonic(omega: f64, sigma_g: f64, radius: f64) -> Self {
        SourceSpec {
            eta0: Profile::Zero,
            eta1: Profile::Zero,
            eta2: Forcing::Harmonic { omega, sigma_g },
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.radius;
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidSource(format!(
                "support radius {r} must be positive"
            )));
        }
        for (name, p) in [("eta0", self.eta0), ("eta1", self.eta1)] {
            if let Some(s) = p.width() {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::InvalidSource(format!(
                        "{name}: width {s} must be positive"
                    )));
                }
                if p.eval(r).abs() > SUPPORT_TOL * p.peak() {
                    return Err(Error::InvalidSource(format!(
                        "{name}: profile support exceeds R = {r}"
                    )));
                }
            }
        }
        if let Forcing::Harmonic { omega, sigma_g } = self.eta2 {
            if !(omega > 0.0) || !(sigma_g > 0.0) || !omega.is_finite() {
                return Err(Error::InvalidSource(
                    "harmonic forcing needs ω > 0 and σ_g > 0".into(),
                ));
            }
            if (-r * r / (2.0 * sigma_g * sigma_g)).exp() > SUPPORT_TOL {
                return Err(Error::InvalidSource(format!(
                    "eta2: forcing support exceeds R = {r}"
                )));
            }
        }
        Ok(())
    }

    /// Smallest profile width, used for resolution checks.
    pub fn min_width(&self) -> Option<f64> {
        let g = match self.eta2 {
            Forcing::Harmonic { sigma_g, .. } => Some(sigma_g),
            Forcing::Zero => None,
        };
        [self.eta0.width(), self.eta1.width(), g]
            .into_iter()
            .flatten()
            .reduce(f64::min)
    }

    fn initial(&self, rho: f64) -> f64 {
        if rho > self.radius {
            0.0
        } else {
            self.eta0.eval(rho)
        }
    }

    fn velocity(&self, rho: f64) -> f64 {
        if rho > self.radius {
            0.0
        } else {
            self.eta1.eval(rho)
        }
    }

    fn forcing(&self, rho: f64, t: f64) -> f64 {
        if rho > self.radius {
            0.0
        } else {
            self.eta2.eval(rho, t)
        }
    }
}

/// Default grid sizes: 1000 cells and 2000 steps for `T = 5, R = 1`,
/// scaled with the horizon.
pub fn default_grid_size(t_max: f64, radius: f64) -> (usize, usize) {
    let cells = (1000.0 * (t_max + radius) / 6.0).ceil().max(1.0) as usize;
    let steps = (2000.0 * t_max / 5.0).ceil().max(1.0) as usize;
    (cells + 1, steps)
}

/// `Ψ` sampled on a uniform grid over `[0, T + R] × [0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeSpaceGrid {
    pub rho_max: f64,
    pub t_max: f64,
    pub n_rho: usize,
    pub n_t: usize,
    pub dx: f64,
    pub dt: f64,
    /// Time-major: `values[n * n_rho + i] = Ψ(i dx, n dt)`.
    pub values: Vec<f64>,
    /// `tail_max[i] = max |Ψ|` over all samples with node index ≥ i.
    tail_max: Vec<f64>,
}

pub fn solve_radial(
    src: &SourceSpec,
    t_max: f64,
    n_rho: usize,
    n_t: usize,
) -> Result<FreeSpaceGrid> {
    src.validate()?;
    if n_rho < 2 || n_t < 1 {
        return Err(Error::InvalidArgument(format!(
            "grid {n_rho}×{n_t} too small"
        )));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time horizon {t_max} must be positive"
        )));
    }
    let rho_max = t_max + src.radius;
    let dx = rho_max / (n_rho - 1) as f64;
    let dt = t_max / n_t as f64;
    if dt / dx > 1.0 + 1e-12 {
        return Err(Error::Cfl(format!("dt/dx = {} > 1", dt / dx)));
    }

    let rho: Vec<f64> = (0..n_rho).map(|i| i as f64 * dx).collect();
    let (mass, stiff) = assemble(&rho, dx);
    let lam = max_eigenvalue(&mass, &stiff);
    if dt * lam.sqrt() > 2.0 {
        return Err(Error::Cfl(format!(
            "dt = {dt} exceeds the stability limit {}",
            2.0 / lam.sqrt()
        )));
    }

    let apply = |u: &[f64], out: &mut [f64]| {
        // out = -M⁻¹ K u
        let n = u.len();
        for i in 0..n {
            let mut s = 0.0;
            if i > 0 {
                s += stiff[i - 1] * (u[i] - u[i - 1]);
            }
            if i + 1 < n {
                s += stiff[i] * (u[i] - u[i + 1]);
            }
            out[i] = -s / mass[i];
        }
    };

    let mut values = vec![0.0; (n_t + 1) * n_rho];
    let cur: Vec<f64> = rho.iter().map(|&r| src.initial(r)).collect();
    let mut acc = vec![0.0; n_rho];
    apply(&cur, &mut acc);
    let mut prev: Vec<f64> = (0..n_rho)
        .map(|i| {
            cur[i] - dt * src.velocity(rho[i]) + 0.5 * dt * dt * (acc[i] + src.forcing(rho[i], 0.0))
        })
        .collect();
    let mut cur = cur;
    values[..n_rho].copy_from_slice(&cur);
    let mut next = vec![0.0; n_rho];
    for n in 0..n_t {
        let t = n as f64 * dt;
        apply(&cur, &mut acc);
        for i in 0..n_rho {
            next[i] = 2.0 * cur[i] - prev[i] + dt * dt * (acc[i] + src.forcing(rho[i], t));
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        values[(n + 1) * n_rho..(n + 2) * n_rho].copy_from_slice(&cur);
    }
    Ok(FreeSpaceGrid::from_values(
        rho_max, t_max, n_rho, n_t, values,
    ))
}

/// Lumped ρ-weighted mass and per-element stiffness `ρ̄_e / dx`.
fn assemble(rho: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rho.len();
    let mut mass = vec![0.0; n];
    let mut stiff = vec![0.0; n - 1];
    for e in 0..n - 1 {
        let (a, b) = (rho[e], rho[e + 1]);
        mass[e] += dx * (2.0 * a + b) / 6.0;
        mass[e + 1] += dx * (a + 2.0 * b) / 6.0;
        stiff[e] = 0.5 * (a + b) / dx;
    }
    (mass, stiff)
}

/// Largest eigenvalue of `M⁻¹K` by power iteration (upper estimate).
fn max_eigenvalue(mass: &[f64], stiff: &[f64]) -> f64 {
    // Gershgorin bound on the symmetric form M^{-1/2} K M^{-1/2}
    let n = mass.len();
    let mut bound: f64 = 0.0;
    for i in 0..n {
        let mut diag = 0.0;
        let mut off = 0.0;
        if i > 0 {
            diag += stiff[i - 1];
            off += stiff[i - 1] / (mass[i] * mass[i - 1]).sqrt();
        }
        if i + 1 < n {
            diag += stiff[i];
            off += stiff[i] / (mass[i] * mass[i + 1]).sqrt();
        }
        bound = bound.max(diag / mass[i] + off);
    }
    let mut v: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let mut lam = 0.0;
    let mut w = vec![0.0; n];
    for _ in 0..300 {
        for i in 0..n {
            let mut s = 0.0;
            let si = mass[i].sqrt();
            if i > 0 {
                s += stiff[i - 1] * (v[i] / si - v[i - 1] / mass[i - 1].sqrt());
            }
            if i + 1 < n {
                s += stiff[i] * (v[i] / si - v[i + 1] / mass[i + 1].sqrt());
            }
            w[i] = s / si;
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lam = norm / vn;
        for i in 0..n {
            v[i] = w[i] / norm;
        }
    }
    // power iteration approaches from below; never exceed the Gershgorin bound
    (lam * 1.01).min(bound)
}

impl FreeSpaceGrid {
    pub fn from_values(
        rho_max: f64,
        t_max: f64,
        n_rho: usize,
        n_t: usize,
        values: Vec<f64>,
    ) -> Self {
        let dx = rho_max / (n_rho - 1) as f64;
        let dt = t_max / n_t as f64;
        let mut tail_max = vec![0.0; n_rho + 1];
        for i in (0..n_rho).rev() {
            let m = (0..=n_t)
                .map(|n| values[n * n_rho + i].abs())
                .fold(0.0, f64::max);
            tail_max[i] = m.max(tail_max[i + 1]);
        }
        FreeSpaceGrid {
            rho_max,
            t_max,
            n_rho,
            n_t,
            dx,
            dt,
            values,
            tail_max,
        }
    }

    pub fn node(&self, i: usize, n: usize) -> f64 {
        self.values[n * self.n_rho + i]
    }

    pub fn time_row(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_rho..(n + 1) * self.n_rho]
    }

    /// Bilinear interpolation; exactly 0 beyond `rho_max`.
    pub fn sample(&self, rho: f64, t: f64) -> Result<f64> {
        let tol = 1e-12 * self.t_max.max(1.0);
        if !(t >= -tol && t <= self.t_max + tol) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.t_max,
            });
        }
        if !(rho >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative radius {rho}")));
        }
        Ok(self.sample_unchecked(rho, t.clamp(0.0, self.t_max)))
    }

    #[inline]
    pub(crate) fn sample_unchecked(&self, rho: f64, t: f64) -> f64 {
        if rho > self.rho_max {
            return 0.0;
        }
        let (i, a) = split(rho / self.dx, self.n_rho - 1);
        let (n, b) = split(t / self.dt, self.n_t);
        let row0 = n * self.n_rho;
        let v00 = self.values[row0 + i];
        if a == 0.0 && b == 0.0 {
            return v00;
        }
        let v01 = if a > 0.0 {
            self.values[row0 + i + 1]
        } else {
            v00
        };
        let lo = v00 + a * (v01 - v00);
        if b == 0.0 {
            return lo;
        }
        let row1 = row0 + self.n_rho;
        let v10 = self.values[row1 + i];
        let v11 = if a > 0.0 {
            self.values[row1 + i + 1]
        } else {
            v10
        };
        lo + b * (v10 + a * (v11 - v10) - lo)
    }

    /// `max |Ψ(ρ, t)|` over grid samples with `ρ ≥ rho_min`.
    pub fn max_abs_from(&self, rho_min: f64) -> f64 {
        if !(rho_min <= self.rho_max) {
            return 0.0;
        }
        let i = (rho_min.max(0.0) / self.dx - 1e-9).ceil().max(0.0) as usize;
        self.tail_max[i.min(self.n_rho)]
    }

    /// `max |Ψ(ρ, t)|` over ρ at the time step nearest to `t`.
    pub fn max_abs_at(&self, t: f64) -> f64 {
        let n = ((t / self.dt).round() as usize).min(self.n_t);
        self.time_row(n).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Conserved leapfrog energy between steps `n` and `n + 1`:
    /// `½ Σ M_i ((Ψ^{n+1}_i − Ψ^n_i)/dt)² + ½ (Ψ^{n+1})ᵀ K Ψ^n`.
    pub fn energy(&self, n: usize) -> f64 {
        let rho: Vec<f64> = (0..self.n_rho).map(|i| i as f64 * self.dx).collect();
        let (mass, stiff) = assemble(&rho, self.dx);
        let (a, b) = (self.time_row(n), self.time_row(n + 1));
        let kin: f64 = (0..self.n_rho)
            .map(|i| mass[i] * ((b[i] - a[i]) / self.dt).powi(2))
            .sum();
        let pot: f64 = (0..self.n_rho - 1)
            .map(|e| stiff[e] * (b[e + 1] - b[e]) * (a[e + 1] - a[e]))
            .sum();
        0.5 * (kin + pot)
    }

    /// Binary dump: `n_rho` (u64), `n_t` (u64), `rho_max` (f64), `T` (f64),
    /// then ρ-major samples, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_rho as u64).to_le_bytes())?;
        w.write_all(&(self.n_t as u64).to_le_bytes())?;
        w.write_all(&self.rho_max.to_le_bytes())?;
        w.write_all(&self.t_max.to_le_bytes())?;
        for i in 0..self.n_rho {
            for n in 0..=self.n_t {
                w.write_all(&self.node(i, n).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let n_rho = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_t = u64::from_le_bytes(next(&mut r)?) as usize;
        let rho_max = f64::from_le_bytes(next(&mut r)?);
        let t_max = f64::from_le_bytes(next(&mut r)?);
        if n_rho < 2 || n_t < 1 || !(rho_max > 0.0) || !(t_max > 0.0) {
            return Err(Error::InvalidArgument("corrupt grid header".into()));
        }
        let mut values = vec![0.0; (n_t + 1) * n_rho];
        for i in 0..n_rho {
            for n in 0..=n_t {
                values[n * n_rho + i] = f64::from_le_bytes(next(&mut r)?);
            }
        }
        Ok(FreeSpaceGrid::from_values(
            rho_max, t_max, n_rho, n_t, values,
        ))
    }
}

/// Cell index and fractional offset, clamped to the last cell.
#[inline]
fn split(s: f64, cells: usize) -> (usize, f64) {
    let f = s.floor();
    let i = f as usize;
    if i >= cells {
        (cells, 0.0)
    } else {
        (i, s - f)
    }
}
