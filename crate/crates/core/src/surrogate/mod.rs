//! The surrogate `ũ(x, t) = Σ Ψ(‖x − ξₙ‖ + rₙ, t) · 1_{Ωₙ}(x) · ζₙ(x − ξₙ)`.

mod build;
mod estimate;
mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Domain, Point2, SupportDescriptor, SupportKind};
use crate::radial::{FreeSpaceGrid, SourceSpec};
use crate::utd::{DiffractionParams, DiffractionTable};

pub use build::{build, edge_time, spawn_diffraction, spawn_reflection, vertex_time, Timetable};
pub use estimate::{apriori_bound_at, apriori_diffraction_bound, default_k_grid, vertex_trace};
pub use io::SurrogateFile;

pub const DEFAULT_MAX_COMPONENTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub t_max: f64,
    pub radius: f64,
    pub diffraction: DiffractionParams,
    pub tol: f64,
    pub max_components: usize,
}

impl BuildConfig {
    pub fn new(t_max: f64, radius: f64) -> Self {
        BuildConfig {
            t_max,
            radius,
            diffraction: DiffractionParams::default(),
            tol: 0.0,
            max_components: DEFAULT_MAX_COMPONENTS,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_mu_bar(mut self, mu_bar: f64) -> Self {
        self.diffraction.mu_bar = mu_bar;
        self
    }
}

/// Base angular profile of a component before angle maps and sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AngularBase {
    Constant,
    Table(DiffractionTable),
}

/// `ζₙ`: depends on the direction of its argument only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularWeight {
    pub sign: f64,
    /// Incident amplitude folded into a diffraction coefficient.
    pub scale: f64,
    pub base: AngularBase,
    /// Reflection axes `β`; each maps a global angle `φ ↦ 2β − φ`. Listed
    /// in the order the reflections happened; evaluation applies the last
    /// one first.
    pub angle_maps: Vec<f64>,
}

impl AngularWeight {
    pub fn unit() -> Self {
        AngularWeight {
            sign: 1.0,
            scale: 1.0,
            base: AngularBase::Constant,
            angle_maps: Vec::new(),
        }
    }

    /// Global angle seen by the base profile for direction `y`.
    pub fn base_angle(&self, y: Point2) -> f64 {
        let mut a = y.angle();
        for beta in self.angle_maps.iter().rev() {
            a = 2.0 * beta - a;
        }
        wrap_angle(a)
    }

    pub fn eval(&self, y: Point2) -> f64 {
        let f = self.sign * self.scale;
        match &self.base {
            AngularBase::Constant => f,
            AngularBase::Table(t) => {
                let a = self.base_angle(y);
                f * t.eval(wrap_angle(a - t.frame.ref_angle))
            }
        }
    }

    pub fn table(&self) -> Option<&DiffractionTable> {
        match &self.base {
            AngularBase::Table(t) => Some(t),
            AngularBase::Constant => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Edge,
    Vertex,
}

/// A timetable entry that spawned a component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub feature: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldComponent {
    pub index: usize,
    pub kind: SupportKind,
    pub xi: Point2,
    pub r: f64,
    pub support: SupportDescriptor,
    pub zeta: AngularWeight,
    pub parent: Option<usize>,
    /// Chain of events from the source down to this component.
    pub provenance: Vec<Event>,
    pub birth_time: f64,
    pub magnitude_bound: f64,
    /// Diffracting vertex (diffraction components only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
    /// Some ancestor (or the component itself) is a diffraction.
    pub diffracted: bool,
}

impl FieldComponent {
    pub fn source(center: Point2) -> Self {
        FieldComponent {
            index: 0,
            kind: SupportKind::Source,
            xi: center,
            r: 0.0,
            support: SupportDescriptor::source(center),
            zeta: AngularWeight::unit(),
            parent: None,
            provenance: Vec::new(),
            birth_time: 0.0,
            magnitude_bound: 0.0,
            vertex: None,
            diffracted: false,
        }
    }
}

/// A component rejected by the magnitude test during the build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscardedComponent {
    pub provenance: Vec<Event>,
    pub birth_time: f64,
    pub magnitude_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Full,
    Go,
    Indicator,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(EvalMode::Full),
            "go" => Ok(EvalMode::Go),
            "indicator" => Ok(EvalMode::Indicator),
            _ => Err(Error::InvalidArgument(format!(
                "unknown mode `{s}` (expected full, go or indicator)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Surrogate {
    pub domain: Domain,
    pub source: SourceSpec,
    pub psi: FreeSpaceGrid,
    pub config: BuildConfig,
    pub components: Vec<FieldComponent>,
    pub discarded: Vec<DiscardedComponent>,
}

impl Surrogate {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn count(&self, kind: SupportKind) -> usize {
        self.components.iter().filter(|c| c.kind == kind).count()
    }

    fn check(&self, x: Point2, t: f64) -> Result<()> {
        let tol = 1e-12 * self.config.t_max.max(1.0);
        if !(t >= -tol && t <= self.config.t_max + tol) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.config.t_max,
            });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { x1: x.x1, x2: x.x2 });
        }
        Ok(())
    }

    /// Value of one component at `(x, t)`, without range checks.
    pub fn component_value(&self, c: &FieldComponent, x: Point2, t: f64) -> f64 {
        let y = x - c.xi;
        let rho = y.norm() + c.r;
        // causality: Ψ(ρ, t) vanishes for ρ > t + R
        if rho > t + self.config.radius + 5.0 * self.psi.dx {
            return 0.0;
        }
        let w = c.zeta.eval(y);
        if w == 0.0 || !self.domain.support_contains(&c.support, x) {
            return 0.0;
        }
        self.psi.sample_unchecked(rho, t.clamp(0.0, self.psi.t_max)) * w
    }

    fn sum(&self, x: Point2, t: f64, keep: impl Fn(&FieldComponent) -> bool) -> f64 {
        self.components
            .iter()
            .filter(|c| keep(c))
            .map(|c| self.component_value(c, x, t))
            .sum()
    }

    /// `ũ(x, t)`.
    pub fn evaluate(&self, x: Point2, t: f64) -> Result<f64> {
        self.check(x, t)?;
        Ok(self.sum(x, t, |_| true))
    }

    /// Geometrical-optics variant: components with a diffraction in their
    /// causal chain are dropped.
    pub fn evaluate_go(&self, x: Point2, t: f64) -> Result<f64> {
        self.check(x, t)?;
        Ok(self.sum(x, t, |c| !c.diffracted))
    }

    /// `|ũ_GO − ũ|`.
    pub fn error_indicator(&self, x: Point2, t: f64) -> Result<f64> {
        self.check(x, t)?;
        Ok(self.sum(x, t, |c| c.diffracted).abs())
    }

    pub fn evaluate_mode(&self, mode: EvalMode, x: Point2, t: f64) -> Result<f64> {
        match mode {
            EvalMode::Full => self.evaluate(x, t),
            EvalMode::Go => self.evaluate_go(x, t),
            EvalMode::Indicator => self.error_indicator(x, t),
        }
    }

    /// Same components with every diffraction table rebuilt at `mu_bar`.
    pub fn with_mu_bar(&self, mu_bar: f64) -> Result<Surrogate> {
        let params = DiffractionParams {
            mu_bar,
            ..self.config.diffraction
        };
        params.validate()?;
        let mut out = self.clone();
        out.config.diffraction = params;
        build::rederive_weights(&mut out)?;
        Ok(out)
    }
}
