//! Finite-volume reference solver on a Cartesian grid, and the relative L²
//! error metric.
//!
//! Cell-centred unknowns with a 5-point stencil and leapfrog in time. Cells
//! cut by a Neumann edge carry their exact volume fraction (floored at
//! [`MIN_VOLUME_FRACTION`]) and their faces the exact open length, which is
//! the no-flux condition. Cells touching a Dirichlet edge are held at zero.

use crate::error::{Error, Result};
use crate::geometry::{point_in_ring, point_segment_distance, BoundaryCondition, Domain, Point2};
use crate::radial::SourceSpec;
use crate::surrogate::Surrogate;

pub const DEFAULT_COURANT: f64 = 0.7;

/// Minimum number of cells across `2σ` of the narrowest source profile.
pub const MIN_CELLS_PER_WIDTH: f64 = 10.0;

/// Minimum number of cells along every physical edge.
pub const MIN_CELLS_PER_EDGE: f64 = 5.0;

/// Lower bound on the volume fraction of a cut cell.
pub const MIN_VOLUME_FRACTION: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Exterior,
    Interior,
    /// Cut by a Neumann edge.
    NeumannBoundary,
    /// Touches a Dirichlet edge; held at zero.
    DirichletBoundary,
    /// Inside the domain but beyond the causal radius; stays zero.
    Frozen,
}

impl CellKind {
    fn updated(self) -> bool {
        matches!(self, CellKind::Interior | CellKind::NeumannBoundary)
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ReferenceGrid {
    pub h: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub t_max: f64,
    /// Cells per row and per column (including one padding ring).
    pub nx: usize,
    pub ny: usize,
    /// Centre of cell `(0, 0)`.
    pub origin: Point2,
    pub kinds: Vec<CellKind>,
    /// Volume fraction of each cell inside the domain.
    pub volume: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub probes: Vec<Point2>,
    /// `traces[p][n]` is the value at probe `p` and time `n · dt`.
    pub traces: Vec<Vec<f64>>,
    /// Conserved discrete energy of each step (zero forcing only).
    pub energy: Vec<f64>,
}

struct Stencil {
    nx: usize,
    /// Open fraction of the face between `k` and `k + 1`.
    ax: Vec<f64>,
    /// Open fraction of the face between `k` and `k + nx`.
    ay: Vec<f64>,
    inv_v: Vec<f64>,
}

impl Stencil {
    #[inline]
    fn laplacian(&self, u: &[f64], k: usize) -> f64 {
        let nx = self.nx;
        let c = u[k];
        let s = self.ax[k - 1] * (u[k - 1] - c)
            + self.ax[k] * (u[k + 1] - c)
            + self.ay[k - nx] * (u[k - nx] - c)
            + self.ay[k] * (u[k + nx] - c);
        s * self.inv_v[k]
    }
}

fn strictly_inside(d: &Domain, p: Point2) -> bool {
    point_in_ring(p, &d.outer) && !d.holes.iter().any(|h| point_in_ring(p, h))
}

/// Area of a polygon clipped to the box `[lo, hi]`.
fn clipped_area(poly: &[Point2], lo: Point2, hi: Point2) -> f64 {
    // local coordinates keep the shoelace sum free of cancellation
    let c = lo.lerp(hi, 0.5);
    let (lo, hi) = (lo - c, hi - c);
    let mut pts: Vec<Point2> = poly.iter().map(|p| *p - c).collect();
    let planes: [(usize, f64, bool); 4] = [
        (0, lo.x1, true),
        (0, hi.x1, false),
        (1, lo.x2, true),
        (1, hi.x2, false),
    ];
    for (axis, v, keep_above) in planes {
        if pts.is_empty() {
            return 0.0;
        }
        let coord = |p: &Point2| if axis == 0 { p.x1 } else { p.x2 };
        let inside = |p: &Point2| {
            if keep_above {
                coord(p) >= v
            } else {
                coord(p) <= v
            }
        };
        let mut out = Vec::with_capacity(pts.len() + 4);
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            let (ia, ib) = (inside(&a), inside(&b));
            if ia {
                out.push(a);
            }
            if ia != ib {
                let s = (v - coord(&a)) / (coord(&b) - coord(&a));
                out.push(a.lerp(b, s));
            }
        }
        pts = out;
    }
    let n = pts.len();
    ((0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum::<f64>() / 2.0).abs()
}

/// Length of the part of segment `p q` inside the domain.
fn length_inside(d: &Domain, p: Point2, q: Point2) -> f64 {
    let r = q - p;
    let mut cuts = vec![0.0, 1.0];
    for e in &d.edges {
        let s = e.b - e.a;
        let denom = r.cross(s);
        if denom.abs() <= 1e-14 * r.norm() * s.norm() {
            continue;
        }
        let ap = e.a - p;
        let t = ap.cross(s) / denom;
        let u = ap.cross(r) / denom;
        if t > 0.0 && t < 1.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            cuts.push(t);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let len = r.norm();
    cuts.windows(2)
        .filter(|w| w[1] > w[0] && strictly_inside(d, p.lerp(q, 0.5 * (w[0] + w[1]))))
        .map(|w| (w[1] - w[0]) * len)
        .sum()
}

/// Whether segment `a b` meets the box `[lo, hi]` in more than a point.
fn segment_meets_box(a: Point2, b: Point2, lo: Point2, hi: Point2) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let r = b - a;
    for (p, q) in [
        (-r.x1, a.x1 - lo.x1),
        (r.x1, hi.x1 - a.x1),
        (-r.x2, a.x2 - lo.x2),
        (r.x2, hi.x2 - a.x2),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t1 - t0) * r.norm() > 1e-12 * (hi.x1 - lo.x1)
}

pub fn solve_reference(
    d: &Domain,
    src: &SourceSpec,
    t_max: f64,
    h: f64,
    probes: &[Point2],
    snapshot_times: &[f64],
) -> Result<ReferenceGrid> {
    solve_reference_with(d, src, t_max, h, probes, snapshot_times, DEFAULT_COURANT)
}

/// As [`solve_reference`] with time step `courant · h / √2`.
pub fn solve_reference_with(
    d: &Domain,
    src: &SourceSpec,
    t_max: f64,
    h: f64,
    probes: &[Point2],
    snapshot_times: &[f64],
    courant: f64,
) -> Result<ReferenceGrid> {
    src.validate()?;
    if let Some(w) = src.min_width() {
        if 2.0 * w / h < MIN_CELLS_PER_WIDTH {
            return Err(Error::UnderResolved(format!(
                "h = {h} gives {:.1} cells across the source width 2σ = {}",
                2.0 * w / h,
                2.0 * w
            )));
        }
    }
    let data = InitialData {
        u0: &|p: Point2| src.eta0.eval(p.norm()),
        u1: &|p: Point2| src.eta1.eval(p.norm()),
        forcing: if src.eta2.is_zero() {
            None
        } else {
            Some(&|p: Point2, t: f64| src.eta2.eval(p.norm(), t))
        },
        radius: src.radius,
    };
    run(d, &data, t_max, h, probes, snapshot_times, courant)
}

/// Initial state, velocity and forcing, all zero outside the disk of the
/// given radius around the origin.
pub struct InitialData<'a> {
    pub u0: &'a dyn Fn(Point2) -> f64,
    pub u1: &'a dyn Fn(Point2) -> f64,
    pub forcing: Option<&'a dyn Fn(Point2, f64) -> f64>,
    /// `f64::INFINITY` for data without compact support.
    pub radius: f64,
}

/// Reference solve from arbitrary initial data.
pub fn run(
    d: &Domain,
    data: &InitialData,
    t_max: f64,
    h: f64,
    probes: &[Point2],
    snapshot_times: &[f64],
    courant: f64,
) -> Result<ReferenceGrid> {
    if !(h > 0.0) || !(t_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need h > 0 and T > 0 (h = {h}, T = {t_max})"
        )));
    }
    if !(courant > 0.0 && courant <= 1.0) {
        return Err(Error::Cfl(format!("dt = {courant}·h/√2 exceeds h/√2")));
    }
    if let Some(e) = d
        .physical_edges()
        .find(|e| e.length() < MIN_CELLS_PER_EDGE * h)
    {
        return Err(Error::UnderResolved(format!(
            "edge {} spans fewer than 5 cells",
            e.index
        )));
    }
    if let Some(t) = snapshot_times
        .iter()
        .find(|t| !(**t >= 0.0 && **t <= t_max))
    {
        return Err(Error::TimeOutOfRange {
            t: *t,
            horizon: t_max,
        });
    }
    for p in probes {
        if !d.contains(*p) {
            return Err(Error::OutsideDomain { x1: p.x1, x2: p.x2 });
        }
    }

    // grid symmetric about the origin, which is a cell centre
    let (lo, hi) = d.bounding_box();
    let extent = lo
        .x1
        .abs()
        .max(lo.x2.abs())
        .max(hi.x1.abs())
        .max(hi.x2.abs());
    let m = (extent / h).ceil() as usize + 1;
    let nx = 2 * m + 1;
    let ny = nx;
    let origin = Point2::new(-(m as f64) * h, -(m as f64) * h);
    let mi = m as isize;
    let center = |k: usize| {
        Point2::new(
            ((k % nx) as isize - mi) as f64 * h,
            ((k / nx) as isize - mi) as f64 * h,
        )
    };
    let active_radius = t_max + data.radius + 10.0 * h;
    let half = Point2::new(0.5 * h, 0.5 * h);

    let n = nx * ny;
    let mut kinds = vec![CellKind::Exterior; n];
    let mut volume = vec![0.0; n];
    let mut near = vec![false; n];
    for k in 0..n {
        let (i, j) = (k % nx, k / nx);
        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
            continue;
        }
        let c = center(k);
        let dmin = d
            .edges
            .iter()
            .map(|e| point_segment_distance(c, e.a, e.b))
            .fold(f64::INFINITY, f64::min);
        if c.norm() > active_radius {
            if strictly_inside(d, c) {
                kinds[k] = CellKind::Frozen;
                volume[k] = 1.0;
            }
            continue;
        }
        if dmin > 0.75 * h {
            if strictly_inside(d, c) {
                kinds[k] = CellKind::Interior;
                volume[k] = 1.0;
            }
            continue;
        }
        near[k] = true;
        let (blo, bhi) = (c - half, c + half);
        let v = (clipped_area(&d.outer, blo, bhi)
            - d.holes
                .iter()
                .map(|hl| clipped_area(hl, blo, bhi))
                .sum::<f64>())
            / (h * h);
        if v <= 1e-12 {
            continue;
        }
        volume[k] = v.min(1.0);
        let dirichlet = d
            .physical_edges()
            .any(|e| e.bc == BoundaryCondition::Dirichlet && segment_meets_box(e.a, e.b, blo, bhi));
        kinds[k] = if dirichlet {
            CellKind::DirichletBoundary
        } else {
            CellKind::NeumannBoundary
        };
    }

    let mut ax = vec![0.0; n];
    let mut ay = vec![0.0; n];
    for k in 0..n {
        if kinds[k] == CellKind::Exterior {
            continue;
        }
        let c = center(k);
        for (nb, a, face) in [
            (
                k + 1,
                &mut ax,
                (
                    c + Point2::new(0.5 * h, -0.5 * h),
                    c + Point2::new(0.5 * h, 0.5 * h),
                ),
            ),
            (
                k + nx,
                &mut ay,
                (
                    c + Point2::new(-0.5 * h, 0.5 * h),
                    c + Point2::new(0.5 * h, 0.5 * h),
                ),
            ),
        ] {
            if nb >= n || kinds[nb] == CellKind::Exterior {
                continue;
            }
            a[k] = if near[k] || near[nb] {
                length_inside(d, face.0, face.1) / h
            } else {
                1.0
            };
        }
    }
    let inv_v: Vec<f64> = volume
        .iter()
        .map(|v| 1.0 / v.max(MIN_VOLUME_FRACTION))
        .collect();
    let stencil = Stencil { nx, ax, ay, inv_v };
    let updated: Vec<usize> = (0..n).filter(|&k| kinds[k].updated()).collect();

    let mut n_steps = (t_max / (courant * h / std::f64::consts::SQRT_2)).ceil() as usize;
    n_steps = n_steps.max(1);
    let dt = t_max / n_steps as f64;
    let c2 = (dt / h).powi(2);

    // Gershgorin bound on the spectrum of the symmetrised operator
    let vol = |k: usize| volume[k].max(MIN_VOLUME_FRACTION);
    let mut lambda: f64 = 0.0;
    for &k in &updated {
        let faces = [
            (k - 1, stencil.ax[k - 1]),
            (k + 1, stencil.ax[k]),
            (k - nx, stencil.ay[k - nx]),
            (k + nx, stencil.ay[k]),
        ];
        let mut g = 0.0;
        for (nb, a) in faces {
            g += a / vol(k);
            if kinds[nb].updated() {
                g += a / (vol(k) * vol(nb)).sqrt();
            }
        }
        lambda = lambda.max(g);
    }
    if c2 * lambda > 4.0 {
        return Err(Error::Cfl(format!(
            "dt = {dt} unstable on the cut-cell stencil (dt²λ/h² = {:.3})",
            c2 * lambda
        )));
    }

    let forced: Vec<(usize, Point2)> = match data.forcing {
        None => Vec::new(),
        Some(_) => updated
            .iter()
            .map(|&k| (k, center(k)))
            .filter(|(_, c)| c.norm() <= data.radius)
            .collect(),
    };
    let force = |c: Point2, t: f64| data.forcing.map_or(0.0, |f| f(c, t));

    let mut cur = vec![0.0; n];
    let mut prev = vec![0.0; n];
    for &k in &updated {
        let c = center(k);
        if c.norm() <= data.radius {
            cur[k] = (data.u0)(c);
            prev[k] = -dt * (data.u1)(c);
        }
    }
    for &k in &updated {
        prev[k] += cur[k] + 0.5 * c2 * stencil.laplacian(&cur, k);
    }
    for &(k, c) in &forced {
        prev[k] += 0.5 * dt * dt * force(c, 0.0);
    }
    let probe_weights: Vec<Vec<(usize, f64)>> = probes
        .iter()
        .map(|p| bilinear_weights(*p, origin, h, nx, ny, &kinds))
        .collect::<Result<_>>()?;
    let mut traces: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps + 1); probes.len()];
    let record = |u: &[f64], traces: &mut Vec<Vec<f64>>| {
        for (tr, w) in traces.iter_mut().zip(&probe_weights) {
            tr.push(w.iter().map(|(k, a)| a * u[*k]).sum());
        }
    };
    record(&cur, &mut traces);

    let mut order: Vec<(usize, f64)> = snapshot_times.iter().copied().enumerate().collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut snaps: Vec<Option<Snapshot>> = vec![None; snapshot_times.len()];
    let mut next_snap = 0;
    while next_snap < order.len() && order[next_snap].1 <= 0.0 {
        snaps[order[next_snap].0] = Some(Snapshot {
            t: order[next_snap].1,
            values: cur.clone(),
        });
        next_snap += 1;
    }

    let energy_of = |a: &[f64], b: &[f64]| -> f64 {
        let mut e = 0.0;
        for &k in &updated {
            let v = vol(k);
            e += v * (((b[k] - a[k]) / dt).powi(2) - b[k] * stencil.laplacian(a, k) / (h * h));
        }
        0.5 * e
    };
    let track_energy = data.forcing.is_none();
    let mut energy = Vec::new();

    let mut next = vec![0.0; n];
    for step in 0..n_steps {
        let t = step as f64 * dt;
        for &k in &updated {
            next[k] = 2.0 * cur[k] - prev[k] + c2 * stencil.laplacian(&cur, k);
        }
        for &(k, c) in &forced {
            next[k] += dt * dt * force(c, t);
        }
        if track_energy {
            energy.push(energy_of(&cur, &next));
        }
        let t_next = (step + 1) as f64 * dt;
        while next_snap < order.len() && order[next_snap].1 <= t_next + 1e-12 * t_max {
            let (idx, ts) = order[next_snap];
            let w = ((ts - t) / dt).clamp(0.0, 1.0);
            let values = cur
                .iter()
                .zip(&next)
                .map(|(a, b)| a + w * (b - a))
                .collect();
            snaps[idx] = Some(Snapshot { t: ts, values });
            next_snap += 1;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        record(&cur, &mut traces);
    }

    Ok(ReferenceGrid {
        h,
        dt,
        n_steps,
        t_max,
        nx,
        ny,
        origin,
        kinds,
        volume,
        snapshots: snaps
            .into_iter()
            .map(|s| s.expect("snapshot recorded"))
            .collect(),
        probes: probes.to_vec(),
        traces,
        energy,
    })
}

/// Bilinear weights over the four surrounding cell centres, restricted to
/// cells inside the domain and renormalised.
fn bilinear_weights(
    x: Point2,
    origin: Point2,
    h: f64,
    nx: usize,
    ny: usize,
    kinds: &[CellKind],
) -> Result<Vec<(usize, f64)>> {
    let outside = || Error::OutsideDomain { x1: x.x1, x2: x.x2 };
    let sx = (x.x1 - origin.x1) / h;
    let sy = (x.x2 - origin.x2) / h;
    if !(sx >= 0.0 && sy >= 0.0 && sx <= (nx - 1) as f64 && sy <= (ny - 1) as f64) {
        return Err(outside());
    }
    let i = (sx.floor() as usize).min(nx - 2);
    let j = (sy.floor() as usize).min(ny - 2);
    let (a, b) = (sx - i as f64, sy - j as f64);
    let mut w = Vec::with_capacity(4);
    for (di, dj, wt) in [
        (0, 0, (1.0 - a) * (1.0 - b)),
        (1, 0, a * (1.0 - b)),
        (0, 1, (1.0 - a) * b),
        (1, 1, a * b),
    ] {
        let k = (j + dj) * nx + i + di;
        if kinds[k] != CellKind::Exterior && wt > 0.0 {
            w.push((k, wt));
        }
    }
    let total: f64 = w.iter().map(|p| p.1).sum();
    if total <= 1e-9 {
        // no neighbouring centre in the domain: use the nearest one
        let k = (sy.round() as usize) * nx + sx.round() as usize;
        if kinds[k] != CellKind::Exterior {
            return Ok(vec![(k, 1.0)]);
        }
        return Err(outside());
    }
    for p in &mut w {
        p.1 /= total;
    }
    Ok(w)
}

impl ReferenceGrid {
    pub fn cell_center(&self, i: usize, j: usize) -> Point2 {
        let m = (self.nx / 2) as isize;
        Point2::new(
            (i as isize - m) as f64 * self.h,
            (j as isize - m) as f64 * self.h,
        )
    }

    /// Stored value at a cell centre for a snapshot.
    pub fn node_value(&self, snapshot: usize, i: usize, j: usize) -> f64 {
        self.snapshots[snapshot].values[j * self.nx + i]
    }

    fn snapshot_index(&self, t: f64) -> Option<usize> {
        self.snapshots
            .iter()
            .position(|s| (s.t - t).abs() <= 1e-12 * self.t_max.max(1.0))
    }

    /// Bilinear in space on a stored snapshot, or linear in time on a stored
    /// probe trace.
    pub fn sample(&self, x: Point2, t: f64) -> Result<f64> {
        if let Some(s) = self.snapshot_index(t) {
            let w = bilinear_weights(x, self.origin, self.h, self.nx, self.ny, &self.kinds)?;
            let v = &self.snapshots[s].values;
            return Ok(w.iter().map(|(k, a)| a * v[*k]).sum());
        }
        let tol = 1e-9 * self.h;
        if let Some(p) = self.probes.iter().position(|p| p.dist(x) <= tol) {
            return self.trace_value(p, t);
        }
        bilinear_weights(x, self.origin, self.h, self.nx, self.ny, &self.kinds)?;
        Err(Error::NoReferenceData(t))
    }

    pub fn trace_value(&self, probe: usize, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.t_max * (1.0 + 1e-12)) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.t_max,
            });
        }
        let tr = &self.traces[probe];
        let s = t / self.dt;
        let n = (s.floor() as usize).min(self.n_steps - 1);
        let a = (s - n as f64).clamp(0.0, 1.0);
        Ok(tr[n] + a * (tr[n + 1] - tr[n]))
    }

    pub fn trace_times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|n| n as f64 * self.dt).collect()
    }
}

/// A field that can be evaluated at space-time points.
pub trait FieldSampler {
    fn sample_at(&self, x: Point2, t: f64) -> Result<f64>;
}

impl FieldSampler for Surrogate {
    fn sample_at(&self, x: Point2, t: f64) -> Result<f64> {
        self.evaluate(x, t)
    }
}

impl FieldSampler for ReferenceGrid {
    fn sample_at(&self, x: Point2, t: f64) -> Result<f64> {
        self.sample(x, t)
    }
}

impl<F: Fn(Point2, f64) -> Result<f64>> FieldSampler for F {
    fn sample_at(&self, x: Point2, t: f64) -> Result<f64> {
        self(x, t)
    }
}

/// Midpoint-rule quadrature points of a `quad_h` grid inside the domain.
pub fn quadrature_points(d: &Domain, quad_h: f64) -> Vec<Point2> {
    let (lo, hi) = d.bounding_box();
    let nx = ((hi.x1 - lo.x1) / quad_h).ceil() as usize;
    let ny = ((hi.x2 - lo.x2) / quad_h).ceil() as usize;
    let mut pts = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = Point2::new(
                lo.x1 + (i as f64 + 0.5) * quad_h,
                lo.x2 + (j as f64 + 0.5) * quad_h,
            );
            if d.contains(p) {
                pts.push(p);
            }
        }
    }
    pts
}

/// `√(∫(a − b)² / ∫b²)` over the domain at time `t`.
pub fn relative_l2_error<A: FieldSampler + ?Sized, B: FieldSampler + ?Sized>(
    a: &A,
    b: &B,
    d: &Domain,
    t: f64,
    quad_h: f64,
) -> Result<f64> {
    if !(quad_h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quadrature spacing {quad_h} must be positive"
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for p in quadrature_points(d, quad_h) {
        let vb = b.sample_at(p, t)?;
        let va = a.sample_at(p, t)?;
        num += (va - vb).powi(2);
        den += vb * vb;
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "reference field vanishes identically".into(),
        ));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ring;
    use crate::radial::solve_radial;

    fn square(l: f64, bc: BoundaryCondition) -> Domain {
        let pts = vec![
            Point2::new(-l, -l),
            Point2::new(l, -l),
            Point2::new(l, l),
            Point2::new(-l, l),
        ];
        Domain::polygon(pts, vec![bc; 4]).unwrap()
    }

    #[test]
    fn constant_state_is_preserved() {
        let d = Domain::polygon(
            vec![
                Point2::new(-1.0, -0.9),
                Point2::new(1.1, -1.0),
                Point2::new(0.8, 1.0),
                Point2::new(-0.9, 0.7),
            ],
            vec![BoundaryCondition::Neumann; 4],
        )
        .unwrap();
        let data = InitialData {
            u0: &|_| 1.0,
            u1: &|_| 0.0,
            forcing: None,
            radius: f64::INFINITY,
        };
        let g = run(&d, &data, 1.0, 0.05, &[], &[1.0], DEFAULT_COURANT).unwrap();
        for (k, v) in g.snapshots[0].values.iter().enumerate() {
            if g.kinds[k].updated() {
                assert!((v - 1.0).abs() <= 1e-12, "cell {k}: {v}");
            }
        }
    }

    fn free_space_discrepancy(h: f64) -> f64 {
        let src = SourceSpec::gaussian(0.2, 1.0);
        let t_max = 2.0;
        let psi = solve_radial(&src, t_max, 2001, 4000).unwrap();
        let d = Domain::free_space(4.5).unwrap();
        let probes: Vec<Point2> = (0..10)
            .map(|i| Point2::from_polar(0.2 + 0.2 * i as f64, 0.37 + 0.61 * i as f64))
            .collect();
        let g = solve_reference(&d, &src, t_max, h, &probes, &[]).unwrap();
        let mut err: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for (p, x) in probes.iter().enumerate() {
            for (n, t) in g.trace_times().into_iter().enumerate() {
                let exact = psi.sample(x.norm(), t).unwrap();
                err = err.max((g.traces[p][n] - exact).abs());
                peak = peak.max(exact.abs());
            }
        }
        err / peak
    }

    #[test]
    fn free_space_matches_radial_solution() {
        let e1 = free_space_discrepancy(0.04);
        let e2 = free_space_discrepancy(0.02);
        assert!(e2 <= 0.02, "relative max-norm discrepancy {e2}");
        assert!(e2 <= 0.75 * e1, "h = 0.04: {e1}, h = 0.02: {e2}");
    }

    #[test]
    fn symmetric_scene_gives_symmetric_field() {
        let outer = Ring::uniform(
            vec![
                Point2::new(-3.0, -2.0),
                Point2::new(3.0, -2.0),
                Point2::new(2.0, 2.5),
                Point2::new(-2.0, 2.5),
            ],
            BoundaryCondition::Neumann,
        );
        let hole = Ring::uniform(
            vec![
                Point2::new(-0.5, 1.2),
                Point2::new(0.5, 1.2),
                Point2::new(0.5, 1.8),
                Point2::new(-0.5, 1.8),
            ],
            BoundaryCondition::Dirichlet,
        );
        let d = Domain::new(outer, vec![hole], false).unwrap();
        let g =
            solve_reference(&d, &SourceSpec::gaussian(0.2, 1.0), 3.0, 0.02, &[], &[3.0]).unwrap();
        let v = &g.snapshots[0].values;
        let mut max: f64 = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (a, b) = (v[j * g.nx + i], v[j * g.nx + g.nx - 1 - i]);
                assert!((a - b).abs() <= 1e-10, "({i}, {j}): {a} vs {b}");
                max = max.max(a.abs());
            }
        }
        assert!(max > 1e-3);
    }

    #[test]
    fn energy_drift_is_small() {
        let d = Domain::new(
            Ring::new(
                vec![
                    Point2::new(-2.0, -1.7),
                    Point2::new(2.3, -2.0),
                    Point2::new(1.9, 2.1),
                    Point2::new(-2.2, 1.8),
                ],
                vec![
                    BoundaryCondition::Neumann,
                    BoundaryCondition::Dirichlet,
                    BoundaryCondition::Neumann,
                    BoundaryCondition::Neumann,
                ],
            ),
            vec![],
            false,
        )
        .unwrap();
        let g = solve_reference(&d, &SourceSpec::gaussian(0.2, 1.0), 5.0, 0.02, &[], &[]).unwrap();
        let e0 = g.energy[0];
        let drift = g.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0;
        assert!(drift <= 1e-3, "drift {drift}");
    }

    #[test]
    fn sampling_contract() {
        let d = square(2.0, BoundaryCondition::Neumann);
        let probe = Point2::new(0.53, -0.27);
        let g = solve_reference(
            &d,
            &SourceSpec::gaussian(0.2, 1.0),
            1.0,
            0.04,
            &[probe],
            &[0.5],
        )
        .unwrap();
        let (i, j) = (g.nx / 2 + 3, g.ny / 2 - 5);
        let x = g.cell_center(i, j);
        assert_eq!(g.sample(x, 0.5).unwrap(), g.node_value(0, i, j));
        assert!(matches!(
            g.sample(Point2::new(2.5, 0.0), 0.5),
            Err(Error::OutsideDomain { .. })
        ));
        let n = g.n_steps / 3;
        let t = (n as f64 + 0.25) * g.dt;
        let expect = 0.75 * g.traces[0][n] + 0.25 * g.traces[0][n + 1];
        assert!((g.sample(probe, t).unwrap() - expect).abs() <= 1e-14);
        assert!(matches!(
            g.sample(Point2::new(0.1, 0.1), 0.3),
            Err(Error::NoReferenceData(_))
        ));
    }

    #[test]
    fn invalid_runs_are_rejected() {
        let d = square(2.0, BoundaryCondition::Neumann);
        let src = SourceSpec::gaussian(0.2, 1.0);
        assert!(matches!(
            solve_reference_with(&d, &src, 1.0, 0.04, &[], &[], 1.2),
            Err(Error::Cfl(_))
        ));
        assert!(matches!(
            solve_reference(&d, &src, 1.0, 0.05, &[], &[]),
            Err(Error::UnderResolved(_))
        ));
        assert!(matches!(
            solve_reference(&d, &src, 1.0, 0.04, &[], &[1.5]),
            Err(Error::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn relative_error_basics() {
        let d = square(1.0, BoundaryCondition::Neumann);
        let b = |x: Point2, _t: f64| -> Result<f64> { Ok((x.x1 * 3.0).sin() + 0.5) };
        let a2 = |x: Point2, t: f64| -> Result<f64> { Ok(2.0 * b(x, t)?) };
        assert_eq!(relative_l2_error(&b, &b, &d, 0.0, 0.05).unwrap(), 0.0);
        assert!((relative_l2_error(&a2, &b, &d, 0.0, 0.05).unwrap() - 1.0).abs() <= 1e-14);
        let zero = |_: Point2, _: f64| -> Result<f64> { Ok(0.0) };
        assert!(relative_l2_error(&b, &zero, &d, 0.0, 0.05).is_err());
    }
}
