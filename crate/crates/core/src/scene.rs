//! TOML scene files: geometry, source and run parameters.

use std::f64::consts::PI;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCondition, Domain, Point2, Ring};
use crate::radial::{default_grid_size, Forcing, FreeSpaceGrid, Profile, SourceSpec};
use crate::surrogate::{BuildConfig, DEFAULT_MAX_COMPONENTS};
use crate::utd::DEFAULT_MU_BAR;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    #[serde(default)]
    name: Option<String>,
    geometry: GeometrySpec,
    source: SourceFile,
    run: RunFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySpec {
    wedge: Option<WedgeSpec>,
    outer: Option<Spanned<Vec<[f64; 2]>>>,
    bc: Option<BoundaryCondition>,
    bcs: Option<Spanned<Vec<BoundaryCondition>>>,
    /// Per-edge flag; `false` marks truncation edges of an open scene.
    physical: Option<Spanned<Vec<bool>>>,
    #[serde(default)]
    unbounded: bool,
    #[serde(default)]
    holes: Vec<HoleSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WedgeSpec {
    alpha_pi: f64,
    theta_pi: f64,
    #[serde(default = "default_distance")]
    distance: f64,
    bc: BoundaryCondition,
    half_width: Option<f64>,
}

fn default_distance() -> f64 {
    4.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoleSpec {
    points: Spanned<Vec<[f64; 2]>>,
    bc: Option<BoundaryCondition>,
    bcs: Option<Spanned<Vec<BoundaryCondition>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceFile {
    #[serde(rename = "type")]
    kind: Spanned<String>,
    radius: f64,
    sigma: Option<f64>,
    omega: Option<f64>,
    omega_pi: Option<f64>,
    sigma_g: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    t_max: f64,
    mu_bar: Option<f64>,
    tol: Option<f64>,
    max_components: Option<usize>,
    psi_n_rho: Option<usize>,
    psi_n_t: Option<usize>,
    reference_h: Option<f64>,
    #[serde(default)]
    probes: Vec<[f64; 2]>,
    #[serde(default)]
    snapshot_times: Vec<f64>,
    snapshot_h: Option<f64>,
    quad_h: Option<f64>,
}

/// Run parameters of a scene, with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct RunParams {
    pub name: String,
    pub t_max: f64,
    pub mu_bar: f64,
    pub tol: f64,
    pub max_components: usize,
    pub psi_n_rho: usize,
    pub psi_n_t: usize,
    pub reference_h: f64,
    pub probes: Vec<Point2>,
    pub snapshot_times: Vec<f64>,
    /// Spacing of snapshot sampling grids.
    pub snapshot_h: f64,
    /// Quadrature spacing of the relative L² error.
    pub quad_h: f64,
}

impl RunParams {
    pub fn build_config(&self, radius: f64) -> BuildConfig {
        let mut c = BuildConfig::new(self.t_max, radius)
            .with_tol(self.tol)
            .with_mu_bar(self.mu_bar);
        c.max_components = self.max_components;
        c
    }

    pub fn solve_psi(&self, src: &SourceSpec) -> Result<FreeSpaceGrid> {
        crate::radial::solve_radial(src, self.t_max, self.psi_n_rho, self.psi_n_t)
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub domain: Domain,
    pub source: SourceSpec,
    pub run: RunParams,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

fn points(v: &[[f64; 2]]) -> Vec<Point2> {
    v.iter().map(|p| Point2::new(p[0], p[1])).collect()
}

fn edge_bcs(
    text: &str,
    field: &str,
    n: usize,
    bc: Option<BoundaryCondition>,
    bcs: &Option<Spanned<Vec<BoundaryCondition>>>,
    at: Range<usize>,
) -> Result<Vec<BoundaryCondition>> {
    match (bc, bcs) {
        (Some(_), Some(list)) => Err(Error::Scene(format!(
            "line {}: `{field}.bc` and `{field}.bcs` are mutually exclusive",
            line_of(text, list.span())
        ))),
        (Some(b), None) => Ok(vec![b; n]),
        (None, Some(list)) if list.get_ref().len() == n => Ok(list.get_ref().clone()),
        (None, Some(list)) => Err(Error::Scene(format!(
            "line {}: `{field}.bcs` has {} entries but the polygon has {n} edges",
            line_of(text, list.span()),
            list.get_ref().len()
        ))),
        (None, None) => Err(Error::Scene(format!(
            "line {}: missing boundary condition for the edges of `{field}` (set `bc` or `bcs`)",
            line_of(text, at)
        ))),
    }
}

/// Parses a scene document.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let file: SceneFile = toml::from_str(text).map_err(|e| match e.span() {
        Some(s) => {
            let n = line_of(text, s);
            let src = text.lines().nth(n - 1).unwrap_or("").trim();
            Error::Scene(format!("line {n}: {} (`{src}`)", e.message()))
        }
        None => Error::Scene(e.message().to_string()),
    })?;
    let run = &file.run;
    if !(run.t_max > 0.0) {
        return Err(Error::Scene(format!(
            "`run.t_max` must be positive, found {}",
            run.t_max
        )));
    }

    let src = &file.source;
    let need = |v: Option<f64>, field: &str| {
        v.ok_or_else(|| {
            Error::Scene(format!(
                "line {}: `source.{field}` is required for a {} source",
                line_of(text, src.kind.span()),
                src.kind.get_ref()
            ))
        })
    };
    let source = match src.kind.get_ref().as_str() {
        "gaussian" => SourceSpec::gaussian(need(src.sigma, "sigma")?, src.radius),
        "ricker" => SourceSpec {
            eta0: Profile::Ricker {
                sigma: need(src.sigma, "sigma")?,
            },
            eta1: Profile::Zero,
            eta2: Forcing::Zero,
            radius: src.radius,
        },
        "harmonic" => {
            let omega = match (src.omega, src.omega_pi) {
                (Some(w), None) => w,
                (None, Some(w)) => w * PI,
                _ => {
                    return Err(Error::Scene(
                        "harmonic source needs exactly one of `omega`, `omega_pi`".into(),
                    ))
                }
            };
            SourceSpec::harmonic(omega, need(src.sigma_g, "sigma_g")?, src.radius)
        }
        other => {
            return Err(Error::Scene(format!(
                "line {}: unknown source type `{other}` (expected gaussian, ricker or harmonic)",
                line_of(text, src.kind.span())
            )))
        }
    };
    source.validate().map_err(|e| {
        Error::Scene(format!(
            "line {}: invalid `source`: {e}",
            line_of(text, src.kind.span())
        ))
    })?;

    let g = &file.geometry;
    let domain = match (&g.wedge, &g.outer) {
        (Some(w), None) => {
            if !g.holes.is_empty() {
                return Err(Error::Scene("wedge scenes cannot have holes".into()));
            }
            let half_width = w.half_width.unwrap_or(source.radius + run.t_max + 1.0);
            Domain::wedge(
                w.alpha_pi * PI,
                w.theta_pi * PI,
                w.distance,
                w.bc,
                half_width,
            )?
        }
        (None, Some(outer)) => {
            let pts = points(outer.get_ref());
            let n = pts.len();
            let bcs = edge_bcs(text, "geometry", n, g.bc, &g.bcs, outer.span())?;
            let physical = match &g.physical {
                None => vec![true; n],
                Some(p) if p.get_ref().len() == n => p.get_ref().clone(),
                Some(p) => {
                    return Err(Error::Scene(format!(
                        "line {}: `geometry.physical` has {} entries but the polygon has {n} edges",
                        line_of(text, p.span()),
                        p.get_ref().len()
                    )))
                }
            };
            let holes = g
                .holes
                .iter()
                .map(|h| {
                    let pts = points(h.points.get_ref());
                    let bcs = edge_bcs(
                        text,
                        "geometry.holes",
                        pts.len(),
                        h.bc,
                        &h.bcs,
                        h.points.span(),
                    )?;
                    Ok(Ring::new(pts, bcs))
                })
                .collect::<Result<Vec<_>>>()?;
            Domain::new(
                Ring {
                    points: pts,
                    bcs,
                    physical,
                },
                holes,
                g.unbounded,
            )?
        }
        _ => {
            return Err(Error::Scene(
                "`geometry` needs exactly one of `wedge` or `outer`".into(),
            ))
        }
    };
    if !domain.contains_interior(Point2::new(0.0, 0.0), source.radius) {
        return Err(Error::Scene(format!(
            "the source disk of radius {} must lie inside the domain",
            source.radius
        )));
    }

    let (n_rho, n_t) = default_grid_size(run.t_max, source.radius);
    let probes = points(&run.probes);
    if let Some(p) = probes.iter().find(|p| !domain.contains(**p)) {
        return Err(Error::Scene(format!("probe {p} lies outside the domain")));
    }
    if let Some(t) = run
        .snapshot_times
        .iter()
        .find(|t| !(**t >= 0.0 && **t <= run.t_max))
    {
        return Err(Error::Scene(format!(
            "snapshot time {t} outside [0, {}]",
            run.t_max
        )));
    }
    let reference_h = match run.reference_h {
        Some(h) => h,
        None => {
            // at least 400 cells across the scene
            let (lo, hi) = domain.bounding_box();
            (hi.x1 - lo.x1).max(hi.x2 - lo.x2) / 400.0
        }
    };
    let params = RunParams {
        name: file.name.clone().unwrap_or_else(|| "scene".into()),
        t_max: run.t_max,
        mu_bar: run.mu_bar.unwrap_or(DEFAULT_MU_BAR),
        tol: run.tol.unwrap_or(0.0),
        max_components: run.max_components.unwrap_or(DEFAULT_MAX_COMPONENTS),
        psi_n_rho: run.psi_n_rho.unwrap_or(n_rho),
        psi_n_t: run.psi_n_t.unwrap_or(n_t),
        reference_h,
        probes,
        snapshot_times: run.snapshot_times.clone(),
        snapshot_h: run.snapshot_h.unwrap_or(0.05),
        quad_h: run.quad_h.unwrap_or(0.02),
    };
    for (field, v) in [
        ("mu_bar", params.mu_bar - 1.0),
        ("reference_h", params.reference_h),
        ("snapshot_h", params.snapshot_h),
        ("quad_h", params.quad_h),
    ] {
        if !(v >= 0.0) || (field != "mu_bar" && v == 0.0) {
            return Err(Error::Scene(format!("`run.{field}` out of range")));
        }
    }
    if !(params.tol >= 0.0) {
        return Err(Error::Scene("`run.tol` must be nonnegative".into()));
    }
    Ok(Scene {
        domain,
        source,
        run: params,
    })
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_scene(&text).map_err(|e| match e {
        Error::Scene(m) => Error::Scene(format!("{}: {m}", path.display())),
        other => Error::Scene(format!("{}: {other}", path.display())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const WEDGE1: &str = r#"
name = "wedge1"
[geometry]
wedge = { alpha_pi = 1.5, theta_pi = 0.313, bc = "neumann" }
[source]
type = "gaussian"
sigma = 0.2
radius = 1.0
[run]
t_max = 5.0
"#;

    #[test]
    fn wedge_scene() {
        let s = parse_scene(WEDGE1).unwrap();
        assert_eq!(s.run.name, "wedge1");
        assert_eq!(s.run.mu_bar, 10.0);
        assert_eq!(s.run.tol, 0.0);
        assert_eq!((s.run.psi_n_rho, s.run.psi_n_t), (1001, 2000));
        let v = &s
            .domain
            .vertices
            .iter()
            .find(|v| s.domain.edges[v.adjacent_edges.0].physical)
            .unwrap();
        assert!((v.exterior_angle - 1.5 * PI).abs() < 1e-12);
        assert!((v.position.norm() - 4.0).abs() < 1e-12);
        assert_eq!(s.source, SourceSpec::gaussian(0.2, 1.0));
        assert!(s.run.reference_h <= 14.0 / 400.0 + 1e-12);
    }

    #[test]
    fn missing_bc_is_reported_with_line() {
        let text = r#"
[geometry]
outer = [[-2, -2], [2, -2], [2, 2], [-2, 2]]
[source]
type = "gaussian"
sigma = 0.2
radius = 1.0
[run]
t_max = 2.0
"#;
        let e = parse_scene(text).unwrap_err().to_string();
        assert!(
            e.contains("line 3") && e.contains("boundary condition"),
            "{e}"
        );
        let short = text.replace("[-2, 2]]", "[-2, 2]]\nbcs = [\"neumann\", \"neumann\"]");
        let e = parse_scene(&short).unwrap_err().to_string();
        assert!(e.contains("line 4") && e.contains("bcs"), "{e}");
    }

    #[test]
    fn schema_errors_name_field_and_line() {
        let e = parse_scene(&WEDGE1.replace("sigma = 0.2", "sigma = \"wide\""))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 7") && e.contains("sigma"), "{e}");
        let e = parse_scene(&WEDGE1.replace("t_max", "tmax"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("tmax") && e.contains("line"), "{e}");
    }

    #[test]
    fn hole_outside_outer_is_rejected() {
        let text = r#"
[geometry]
outer = [[-3, -3], [3, -3], [3, 3], [-3, 3]]
bc = "neumann"
[[geometry.holes]]
points = [[4, 0], [5, 0], [5, 1], [4, 1]]
bc = "dirichlet"
[source]
type = "gaussian"
sigma = 0.2
radius = 1.0
[run]
t_max = 2.0
"#;
        assert!(matches!(parse_scene(text), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn harmonic_source_in_units_of_pi() {
        let text = WEDGE1.replace(
            "type = \"gaussian\"\nsigma = 0.2",
            "type = \"harmonic\"\nomega_pi = 2.0\nsigma_g = 0.05",
        );
        let s = parse_scene(&text).unwrap();
        assert_eq!(s.source, SourceSpec::harmonic(2.0 * PI, 0.05, 1.0));
    }
}
