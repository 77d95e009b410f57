//! Wedge diffraction coefficient of the uniform theory of diffraction,
//! frozen at a fixed dimensionless distance `μ̄`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fresnel::transition_unchecked;
use crate::geometry::{wrap_angle, Point2, EPS_ANGLE};

pub const DEFAULT_MU_BAR: f64 = 10.0;
pub const DEFAULT_EPS_SING: f64 = 1e-7;

/// Local polar frame at a wedge vertex. Angles are measured
/// counterclockwise from the reference face; the wedge interior (the part
/// of the domain near the vertex) is `0 < φ < 2π - α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeLocalFrame {
    pub apex: Point2,
    /// Global angle of the reference face.
    pub ref_angle: f64,
    pub alpha: f64,
    pub theta: f64,
    pub nu: f64,
    pub bc_sign: f64,
    /// Incidence direction lies on a face (θ clamped to the closed range).
    pub grazing: bool,
}

impl WedgeLocalFrame {
    pub fn new(apex: Point2, ref_angle: f64, alpha: f64, theta: f64, bc_sign: f64) -> Self {
        let opening = TAU - alpha;
        let grazing = theta <= EPS_ANGLE || theta >= opening - EPS_ANGLE;
        WedgeLocalFrame {
            apex,
            ref_angle,
            alpha,
            theta: theta.clamp(0.0, opening),
            nu: snap_integer(PI / opening),
            bc_sign,
            grazing,
        }
    }

    /// Frame with the apex at the origin and the reference face along +x1.
    pub fn canonical(alpha: f64, theta: f64, bc_sign: f64) -> Result<Self> {
        wedge_index(alpha)?;
        let opening = TAU - alpha;
        if !(theta > 0.0 && theta < opening) {
            return Err(Error::InvalidArgument(format!(
                "incidence angle {theta} outside (0, {opening})"
            )));
        }
        Ok(WedgeLocalFrame::new(
            Point2::ORIGIN,
            0.0,
            alpha,
            theta,
            bc_sign,
        ))
    }

    pub fn opening(&self) -> f64 {
        TAU - self.alpha
    }

    /// Local angle of the direction from the apex to `x`, in [0, 2π).
    pub fn angle_of(&self, x: Point2) -> f64 {
        wrap_angle((x - self.apex).angle() - self.ref_angle)
    }

    /// Local angle of a direction vector.
    pub fn angle_of_direction(&self, dir: Point2) -> f64 {
        wrap_angle(dir.angle() - self.ref_angle)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffractionParams {
    pub mu_bar: f64,
    pub eps_sing: f64,
}

impl Default for DiffractionParams {
    fn default() -> Self {
        DiffractionParams {
            mu_bar: DEFAULT_MU_BAR,
            eps_sing: DEFAULT_EPS_SING,
        }
    }
}

impl DiffractionParams {
    pub fn new(mu_bar: f64) -> Result<Self> {
        let p = DiffractionParams {
            mu_bar,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_bar >= 1.0) || !self.mu_bar.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mu_bar = {} must be finite and ≥ 1",
                self.mu_bar
            )));
        }
        if !(self.eps_sing > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps_sing = {} must be positive",
                self.eps_sing
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// Incident shadow boundary.
    Isb,
    /// Reflection shadow boundary.
    Rsb,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowBoundary {
    pub phi: f64,
    pub kind: BoundaryKind,
    /// Jump `D(φ+) - D(φ-)` in the limit of infinitesimal offsets.
    pub jump: f64,
}

/// `ν = π / (2π - α)`.
pub fn wedge_index(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < TAU) {
        return Err(Error::InvalidArgument(format!(
            "exterior angle {alpha} outside (0, 2π)"
        )));
    }
    Ok(PI / (TAU - alpha))
}

fn snap_integer(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Nearest integer, ties to even, after snapping half-integers that are
/// off by rounding noise.
fn nearest_integer(x: f64) -> f64 {
    let half = (2.0 * x).round();
    let x = if (2.0 * x - half).abs() <= 1e-12 * x.abs().max(1.0) {
        half / 2.0
    } else {
        x
    };
    x.round_ties_even()
}

/// Integer `N_j` of the four terms.
fn term_integers(nu: f64) -> [f64; 4] {
    [
        nearest_integer(nu / 2.0),
        nearest_integer(-nu / 2.0),
        nearest_integer((1.0 + nu) / 2.0),
        nearest_integer((1.0 - nu) / 2.0),
    ]
}

/// Signs (s_φ, s_θ) of the angle combination `π + s_φ φ + s_θ θ` per term.
const TERM_SIGNS: [(f64, f64); 4] = [(1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0)];

struct Terms {
    nu: f64,
    opening: f64,
    theta: f64,
    n: [f64; 4],
    weights: [f64; 4],
}

impl Terms {
    fn new(frame: &WedgeLocalFrame) -> Self {
        let b = frame.bc_sign;
        Terms {
            nu: frame.nu,
            opening: frame.opening(),
            theta: frame.theta,
            n: term_integers(frame.nu),
            weights: [1.0, 1.0, b, b],
        }
    }

    /// `(φ̂_j, φ̃_j)`.
    fn angles(&self, j: usize, phi: f64) -> (f64, f64) {
        let (sp, st) = TERM_SIGNS[j];
        let hat = (PI + sp * phi + st * self.theta) / 2.0 * self.nu;
        let tilde = self.n[j] * self.opening - (phi + sp * st * self.theta) / 2.0;
        (hat, tilde)
    }

    fn raw(&self, j: usize, mu: f64, phi: f64) -> f64 {
        let (hat, tilde) = self.angles(j, phi);
        let c = tilde.cos();
        -self.nu / (2.0 * (TAU * mu).sqrt()) / hat.tan() * transition_unchecked(2.0 * mu * c * c)
    }

    /// Term `j` with the cotangent singularity guarded.
    fn term(&self, j: usize, mu: f64, eps: f64, phi: f64) -> f64 {
        let (hat, _) = self.angles(j, phi);
        let m = (hat / PI).round();
        let delta = hat - m * PI;
        if delta.abs() >= eps {
            return self.raw(j, mu, phi);
        }
        let sp = TERM_SIGNS[j].0;
        let rate = sp * self.nu / 2.0;
        let phi_s = phi - delta / rate;
        // exactly on the boundary the value from above is used
        let side = if phi < phi_s { -1.0 } else { 1.0 };
        self.raw(j, mu, phi_s + side * eps / rate.abs())
    }

    fn value(&self, mu: f64, eps: f64, phi: f64) -> f64 {
        (0..4)
            .map(|j| self.weights[j] * self.term(j, mu, eps, phi))
            .sum()
    }
}

/// `D(φ)` at the dimensionless distance `mu` (no range checks on `mu`).
pub(crate) fn coefficient_at(frame: &WedgeLocalFrame, mu: f64, eps_sing: f64, phi: f64) -> f64 {
    Terms::new(frame).value(mu, eps_sing, phi)
}

/// `D = D₁ + D₂ ± (D₃ + D₄)` with `k s` replaced by `μ̄`.
pub fn diffraction_coefficient(
    frame: &WedgeLocalFrame,
    params: &DiffractionParams,
    phi: f64,
) -> Result<f64> {
    if !(params.mu_bar > 0.0) || !params.mu_bar.is_finite() || !(params.eps_sing > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid diffraction parameters {params:?}"
        )));
    }
    let opening = frame.opening();
    if !(phi >= -EPS_ANGLE && phi <= opening + EPS_ANGLE) {
        return Err(Error::InvalidArgument(format!(
            "angle {phi} outside (0, {opening})"
        )));
    }
    Ok(coefficient_at(frame, params.mu_bar, params.eps_sing, phi))
}

/// The pair `(D₁ + D₂, D₃ + D₄)`.
pub fn coefficient_parts(
    frame: &WedgeLocalFrame,
    params: &DiffractionParams,
    phi: f64,
) -> (f64, f64) {
    let t = Terms::new(frame);
    let e = params.eps_sing;
    let mu = params.mu_bar;
    (
        t.term(0, mu, e, phi) + t.term(1, mu, e, phi),
        t.term(2, mu, e, phi) + t.term(3, mu, e, phi),
    )
}

/// Angles in `(0, 2π - α)` where `D` jumps, with their classification.
pub fn shadow_boundaries(frame: &WedgeLocalFrame) -> Vec<ShadowBoundary> {
    let t = Terms::new(frame);
    let w = t.opening;
    let tol = 1e-9;
    let mut cands: Vec<(f64, f64)> = Vec::new();
    for (j, &(sp, st)) in TERM_SIGNS.iter().enumerate() {
        // π + sp φ + st θ = 2 m w
        let lo = (PI + st * t.theta - w) / (2.0 * w);
        let hi = (PI + st * t.theta + w) / (2.0 * w);
        let mut m = lo.floor() as i64;
        while (m as f64) <= hi.ceil() {
            let phi = sp * (2.0 * m as f64 * w - PI - st * t.theta);
            m += 1;
            if !(phi > tol && phi < w - tol) {
                continue;
            }
            let (_, tilde) = t.angles(j, phi);
            if tilde.cos().abs() > 1e-6 {
                // a pole of the cotangent not cancelled by F: not a jump
                continue;
            }
            // D_j ≈ -sign(φ̂_j - mπ)/2 and φ̂_j increases with sp·φ
            cands.push((phi, -sp * t.weights[j]));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<ShadowBoundary> = Vec::new();
    let mut i = 0;
    while i < cands.len() {
        let phi = cands[i].0;
        let mut jump = 0.0;
        while i < cands.len() && cands[i].0 - phi <= tol {
            jump += cands[i].1;
            i += 1;
        }
        if jump.abs() < 0.5 {
            continue;
        }
        let isb = (phi - (t.theta + PI)).abs() <= tol || (phi - (t.theta - PI)).abs() <= tol;
        out.push(ShadowBoundary {
            phi,
            kind: if isb {
                BoundaryKind::Isb
            } else {
                BoundaryKind::Rsb
            },
            jump,
        });
    }
    out
}

/// Tabulated `D` over the wedge opening: uniform nodes plus a double node
/// at every shadow boundary; linear interpolation in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TableRepr", from = "TableRepr")]
pub struct DiffractionTable {
    pub frame: WedgeLocalFrame,
    pub mu_bar: f64,
    pub phi: Vec<f64>,
    pub values: Vec<f64>,
}

pub const TABLE_NODES: usize = 4096;

#[derive(Clone, Serialize, Deserialize)]
struct TableRepr {
    frame: WedgeLocalFrame,
    mu_bar: f64,
    /// `(φ, D)` pairs.
    samples: Vec<(f64, f64)>,
}

impl From<DiffractionTable> for TableRepr {
    fn from(t: DiffractionTable) -> Self {
        TableRepr {
            frame: t.frame,
            mu_bar: t.mu_bar,
            samples: t.phi.into_iter().zip(t.values).collect(),
        }
    }
}

impl From<TableRepr> for DiffractionTable {
    fn from(r: TableRepr) -> Self {
        let (phi, values) = r.samples.into_iter().unzip();
        DiffractionTable {
            frame: r.frame,
            mu_bar: r.mu_bar,
            phi,
            values,
        }
    }
}

impl DiffractionTable {
    pub fn build(frame: &WedgeLocalFrame, params: &DiffractionParams) -> Self {
        let w = frame.opening();
        let eps = params.eps_sing;
        let mut phi = Vec::with_capacity(TABLE_NODES + 8);
        let mut values = Vec::with_capacity(TABLE_NODES + 8);
        let bounds = shadow_boundaries(frame);
        let mut bi = 0;
        for i in 0..TABLE_NODES {
            let p = w * i as f64 / (TABLE_NODES - 1) as f64;
            while bi < bounds.len() && bounds[bi].phi <= p {
                let b = bounds[bi].phi;
                if b > *phi.last().unwrap_or(&-1.0) {
                    let off = 4.0 * eps / frame.nu;
                    phi.push(b);
                    values.push(coefficient_at(frame, params.mu_bar, eps, b - off));
                    phi.push(b);
                    values.push(coefficient_at(frame, params.mu_bar, eps, b + off));
                }
                bi += 1;
            }
            if p > *phi.last().unwrap_or(&-1.0) {
                phi.push(p);
                values.push(coefficient_at(frame, params.mu_bar, eps, p));
            }
        }
        DiffractionTable {
            frame: *frame,
            mu_bar: params.mu_bar,
            phi,
            values,
        }
    }

    /// Interpolated value; angles outside the opening clamp to the ends.
    /// At a double node the value from above is returned.
    pub fn eval(&self, phi: f64) -> f64 {
        let n = self.phi.len();
        if phi <= self.phi[0] {
            return self.values[0];
        }
        if phi >= self.phi[n - 1] {
            return self.values[n - 1];
        }
        let k = self.phi.partition_point(|&p| p <= phi);
        let (p0, p1) = (self.phi[k - 1], self.phi[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        if p1 == p0 {
            return v1;
        }
        v0 + (v1 - v0) * (phi - p0) / (p1 - p0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
