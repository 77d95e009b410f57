//! Timetable-driven construction (Algorithm 1).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    AngularBase, AngularWeight, BuildConfig, DiscardedComponent, Event, EventKind, FieldComponent,
    Surrogate,
};
use crate::error::{Error, Result};
use crate::geometry::{
    reflect_point, wrap_angle, Domain, Point2, SupportDescriptor, SupportKind, VertexInfo,
};
use crate::radial::{FreeSpaceGrid, SourceSpec};
use crate::utd::{DiffractionParams, DiffractionTable};

/// Arrival times of every component at every edge (columns `0..n_e`) and
/// vertex (columns `n_e..n_e + n_v`). Explored entries are set to ∞.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timetable {
    pub n_edges: usize,
    pub rows: Vec<Vec<f64>>,
}

impl Timetable {
    fn column(&self, e: Event) -> usize {
        match e.kind {
            EventKind::Edge => e.feature,
            EventKind::Vertex => self.n_edges + e.feature,
        }
    }

    fn event(&self, col: usize) -> Event {
        if col < self.n_edges {
            Event {
                kind: EventKind::Edge,
                feature: col,
            }
        } else {
            Event {
                kind: EventKind::Vertex,
                feature: col - self.n_edges,
            }
        }
    }

    pub fn get(&self, comp: usize, e: Event) -> f64 {
        self.rows[comp][self.column(e)]
    }
}

/// `rₙ + inf { ‖x − ξₙ‖ : x ∈ γ ∩ Ω̄ₙ }`.
pub fn edge_time(c: &FieldComponent, edge: usize, d: &Domain) -> f64 {
    let e = &d.edges[edge];
    if !e.physical || c.support.edge == Some(edge) {
        return f64::INFINITY;
    }
    d.lit_intervals(&c.support, edge)
        .iter()
        .map(|iv| c.r + e.distance_to_piece(c.xi, iv.lo, iv.hi))
        .fold(f64::INFINITY, f64::min)
}

/// `rₙ + ‖y − ξₙ‖` if the vertex lies in the closed support.
///
/// A diffraction component never revisits its own vertex, and a reflected
/// wave does not diffract at the endpoints of its own reflecting edge.
pub fn vertex_time(c: &FieldComponent, v: &VertexInfo, d: &Domain) -> f64 {
    if c.vertex == Some(v.index) {
        return f64::INFINITY;
    }
    if let Some(e) = c.support.edge {
        if v.adjacent_edges.0 == e || v.adjacent_edges.1 == e {
            return f64::INFINITY;
        }
    }
    if d.vertex_in_support_closure(&c.support, v) {
        c.r + c.xi.dist(v.position)
    } else {
        f64::INFINITY
    }
}

fn reflected_weight(parent: &AngularWeight, d: &Domain, edge: usize) -> AngularWeight {
    let e = &d.edges[edge];
    let mut z = parent.clone();
    z.angle_maps.push(e.angle());
    z.sign *= e.bc.sign();
    z
}

/// Image-source child of `parent` across edge `edge`.
pub fn spawn_reflection(
    parent: &FieldComponent,
    edge: usize,
    d: &Domain,
) -> Result<FieldComponent> {
    let lit = d.lit_intervals(&parent.support, edge);
    if lit.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "edge {edge} is not lit by component {}",
            parent.index
        )));
    }
    let e = &d.edges[edge];
    let xi = reflect_point((e.a, e.b), parent.xi)?;
    let birth = lit
        .iter()
        .map(|iv| parent.r + e.distance_to_piece(parent.xi, iv.lo, iv.hi))
        .fold(f64::INFINITY, f64::min);
    let mut provenance = parent.provenance.clone();
    provenance.push(Event {
        kind: EventKind::Edge,
        feature: edge,
    });
    Ok(FieldComponent {
        index: 0,
        kind: SupportKind::Reflection,
        xi,
        r: parent.r,
        support: SupportDescriptor::reflection(xi, edge, lit),
        zeta: reflected_weight(&parent.zeta, d, edge),
        parent: Some(parent.index),
        provenance,
        birth_time: birth,
        magnitude_bound: 0.0,
        vertex: None,
        diffracted: parent.diffracted,
    })
}

fn diffracted_weight(
    parent: &FieldComponent,
    v: &VertexInfo,
    d: &Domain,
    p: &DiffractionParams,
) -> Result<Option<AngularWeight>> {
    let frame = d.local_wedge_frame(v, parent.xi)?;
    if frame.nu.fract() == 0.0 {
        return Ok(None);
    }
    let table = DiffractionTable::build(&frame, p);
    Ok(Some(AngularWeight {
        sign: 1.0,
        scale: parent.zeta.eval(v.position - parent.xi),
        base: AngularBase::Table(table),
        angle_maps: Vec::new(),
    }))
}

/// Diffraction child of `parent` at vertex `v`; `None` when the vertex does
/// not diffract (integer wedge index).
pub fn spawn_diffraction(
    parent: &FieldComponent,
    v: &VertexInfo,
    d: &Domain,
    p: &DiffractionParams,
) -> Result<Option<FieldComponent>> {
    if !d.vertex_in_support_closure(&parent.support, v) {
        return Err(Error::InvalidArgument(format!(
            "vertex {} is outside the support of component {}",
            v.index, parent.index
        )));
    }
    let Some(zeta) = diffracted_weight(parent, v, d, p)? else {
        return Ok(None);
    };
    let r = parent.r + parent.xi.dist(v.position);
    let mut provenance = parent.provenance.clone();
    provenance.push(Event {
        kind: EventKind::Vertex,
        feature: v.index,
    });
    Ok(Some(FieldComponent {
        index: 0,
        kind: SupportKind::Diffraction,
        xi: v.position,
        r,
        support: SupportDescriptor::diffraction(v.position),
        zeta,
        parent: Some(parent.index),
        provenance,
        birth_time: r,
        magnitude_bound: 0.0,
        vertex: Some(v.index),
        diffracted: true,
    }))
}

/// Upper bound of `sup |ũₙ|`: tail maximum of Ψ beyond the nearest point of
/// the support times the largest weight over the support's directions.
pub(crate) fn magnitude_bound(c: &FieldComponent, d: &Domain, psi: &FreeSpaceGrid) -> f64 {
    let dist = match c.kind {
        SupportKind::Reflection => {
            let e = &d.edges[c.support.edge.expect("reflection edge")];
            c.support
                .lit_intervals
                .iter()
                .map(|iv| e.distance_to_piece(c.xi, iv.lo, iv.hi))
                .fold(f64::INFINITY, f64::min)
        }
        _ => 0.0,
    };
    psi.max_abs_from(dist + c.r) * max_weight(c, d)
}

fn max_weight(c: &FieldComponent, d: &Domain) -> f64 {
    let z = &c.zeta;
    let amp = (z.sign * z.scale).abs();
    let AngularBase::Table(t) = &z.base else {
        return amp;
    };
    if c.kind != SupportKind::Reflection {
        return amp * t.max_abs();
    }
    let e = &d.edges[c.support.edge.expect("reflection edge")];
    let local = |p: Point2| wrap_angle(z.base_angle(p - c.xi) - t.frame.ref_angle);
    let mut m: f64 = 0.0;
    for iv in &c.support.lit_intervals {
        let (a, b) = (local(e.point_at(iv.lo)), local(e.point_at(iv.hi)));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi - lo > std::f64::consts::PI {
            return amp * t.max_abs();
        }
        m = m.max(t.eval(lo).abs()).max(t.eval(hi).abs());
        for (p, v) in t.phi.iter().zip(&t.values) {
            if *p >= lo && *p <= hi {
                m = m.max(v.abs());
            }
        }
    }
    amp * m
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    time: f64,
    event: Event,
    comp: usize,
}

impl Entry {
    fn key(&self) -> (EventKind, usize, usize) {
        (self.event.kind, self.event.feature, self.comp)
    }
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap pops the smallest time first
    fn cmp(&self, o: &Self) -> Ordering {
        o.time
            .total_cmp(&self.time)
            .then_with(|| o.key().cmp(&self.key()))
    }
}

struct Builder<'a> {
    d: &'a Domain,
    psi: &'a FreeSpaceGrid,
    cfg: &'a BuildConfig,
    table: Timetable,
    heap: BinaryHeap<Entry>,
    components: Vec<FieldComponent>,
    discarded: Vec<DiscardedComponent>,
}

impl Builder<'_> {
    fn add(&mut self, mut c: FieldComponent) -> Result<()> {
        c.magnitude_bound = magnitude_bound(&c, self.d, self.psi);
        if c.magnitude_bound < self.cfg.tol {
            self.discarded.push(DiscardedComponent {
                provenance: c.provenance,
                birth_time: c.birth_time,
                magnitude_bound: c.magnitude_bound,
            });
            return Ok(());
        }
        if self.components.len() >= self.cfg.max_components {
            return Err(Error::TooManyComponents(self.cfg.max_components));
        }
        c.index = self.components.len();
        let n_e = self.d.n_edges();
        let mut row = Vec::with_capacity(n_e + self.d.n_vertices());
        row.extend((0..n_e).map(|e| edge_time(&c, e, self.d)));
        row.extend(self.d.vertices.iter().map(|v| vertex_time(&c, v, self.d)));
        debug_assert!(
            row.iter()
                .all(|t| *t >= c.birth_time - 1e-9 * self.d.diameter().max(1.0)),
            "timetable entry earlier than the spawning event"
        );
        for (col, &time) in row.iter().enumerate() {
            if time.is_finite() {
                self.heap.push(Entry {
                    time,
                    event: self.table.event(col),
                    comp: c.index,
                });
            }
        }
        self.table.rows.push(row);
        self.components.push(c);
        Ok(())
    }

    /// Smallest unexplored entry; entries tied within the geometric
    /// tolerance are taken edges first, then by feature and row index.
    fn next(&mut self) -> Option<Entry> {
        let first = self.heap.pop()?;
        let mut ties = vec![first];
        while let Some(top) = self.heap.peek() {
            if top.time <= first.time + self.d.eps {
                ties.push(self.heap.pop().unwrap());
            } else {
                break;
            }
        }
        ties.sort_by_key(Entry::key);
        let chosen = ties[0];
        for e in ties.into_iter().skip(1) {
            self.heap.push(e);
        }
        Some(chosen)
    }

    fn run(&mut self) -> Result<()> {
        let horizon = self.cfg.t_max + self.cfg.radius;
        while let Some(entry) = self.next() {
            if entry.time > horizon {
                break;
            }
            let col = self.table.column(entry.event);
            self.table.rows[entry.comp][col] = f64::INFINITY;
            let parent = &self.components[entry.comp];
            let child = match entry.event.kind {
                EventKind::Edge => Some(spawn_reflection(parent, entry.event.feature, self.d)?),
                EventKind::Vertex => {
                    let v = &self.d.vertices[entry.event.feature];
                    spawn_diffraction(parent, v, self.d, &self.cfg.diffraction)?
                }
            };
            if let Some(c) = child {
                self.add(c)?;
            }
        }
        Ok(())
    }
}

/// Runs Algorithm 1 for a source centred at the origin.
pub fn build(
    d: &Domain,
    psi: &FreeSpaceGrid,
    source: &SourceSpec,
    cfg: &BuildConfig,
) -> Result<Surrogate> {
    source.validate()?;
    cfg.diffraction.validate()?;
    if !(cfg.t_max > 0.0) || !(cfg.tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid build configuration {cfg:?}"
        )));
    }
    if (cfg.radius - source.radius).abs() > 1e-12 * source.radius {
        return Err(Error::InvalidArgument(
            "configured R differs from the source radius".into(),
        ));
    }
    let slack = 1e-9 * cfg.t_max.max(1.0);
    if psi.t_max < cfg.t_max - slack || psi.rho_max < cfg.t_max + cfg.radius - slack {
        return Err(Error::InvalidArgument(format!(
            "Ψ grid covers [0, {}]×[0, {}], need [0, {}]×[0, {}]",
            psi.rho_max,
            psi.t_max,
            cfg.t_max + cfg.radius,
            cfg.t_max
        )));
    }
    let origin = Point2::ORIGIN;
    if !d.contains(origin)
        || d.physical_edges()
            .any(|e| e.distance_to_piece(origin, 0.0, 1.0) < cfg.radius)
    {
        return Err(Error::InvalidSource(format!(
            "the source disk of radius {} is not contained in the domain",
            cfg.radius
        )));
    }

    let mut b = Builder {
        d,
        psi,
        cfg,
        table: Timetable {
            n_edges: d.n_edges(),
            rows: Vec::new(),
        },
        heap: BinaryHeap::new(),
        components: Vec::new(),
        discarded: Vec::new(),
    };
    b.add(FieldComponent::source(origin))?;
    b.run()?;
    Ok(Surrogate {
        domain: d.clone(),
        source: *source,
        psi: psi.clone(),
        config: *cfg,
        components: b.components,
        discarded: b.discarded,
    })
}

/// Recomputes every angular weight (and magnitude bound) from the current
/// diffraction parameters, keeping the component set.
pub(crate) fn rederive_weights(s: &mut Surrogate) -> Result<()> {
    for i in 0..s.components.len() {
        let Some(p) = s.components[i].parent else {
            continue;
        };
        let parent = &s.components[p];
        let c = &s.components[i];
        let zeta = match c.kind {
            SupportKind::Reflection => reflected_weight(
                &parent.zeta,
                &s.domain,
                c.support.edge.expect("reflection edge"),
            ),
            SupportKind::Diffraction => {
                let v = &s.domain.vertices[c.vertex.expect("diffraction vertex")];
                diffracted_weight(parent, v, &s.domain, &s.config.diffraction)?.ok_or_else(
                    || Error::InvalidArgument("non-diffracting vertex in component list".into()),
                )?
            }
            SupportKind::Source => AngularWeight::unit(),
        };
        s.components[i].zeta = zeta;
        s.components[i].magnitude_bound = magnitude_bound(&s.components[i], &s.domain, &s.psi);
    }
    Ok(())
}
