#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use raywave::reference::{quadrature_points, solve_reference, CellKind, ReferenceGrid};
use raywave::surrogate::{apriori_bound_at, default_k_grid};
use raywave::{
    build, load_scene, relative_l2_error, EvalMode, Point2, Scene, SupportKind, Surrogate,
};

#[derive(Parser)]
#[command(
    name = "raywave",
    version,
    about = "Surrogate wave fields on polygonal domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a surrogate from a scene and print a component report.
    Build(BuildArgs),
    /// Evaluate a surrogate on snapshot grids and probe traces.
    Eval(EvalArgs),
    /// Run the grid reference solver for a scene.
    Reference(ReferenceArgs),
    /// Relative L² error of a surrogate against the reference solver.
    Compare(CompareArgs),
    /// Relative L² error as a function of the frozen distance μ̄.
    SweepMu(SweepArgs),
}

#[derive(Args)]
struct Overrides {
    /// Magnitude tolerance for discarding components.
    #[arg(long)]
    tol: Option<f64>,
    /// Frozen dimensionless distance of the diffraction coefficients.
    #[arg(long = "mu-bar")]
    mu_bar: Option<f64>,
    #[arg(long = "max-components")]
    max_components: Option<usize>,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Surrogate file to write (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Also write the component report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    surrogate: PathBuf,
    /// Scene supplying default probes, times and grid spacing.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    mode: EvalMode,
    /// Snapshot times, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    times: Option<Vec<f64>>,
    /// Probe points `x1,x2;x1,x2;...`.
    #[arg(long, allow_hyphen_values = true)]
    probes: Option<String>,
    /// Snapshot grid spacing.
    #[arg(long = "grid-h")]
    grid_h: Option<f64>,
    /// Trace sampling step (defaults to the Ψ time step).
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    times: Option<Vec<f64>>,
    /// Grid cell size.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Surrogate file; built from the scene when omitted.
    #[arg(long)]
    surrogate: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    mode: EvalMode,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    times: Option<Vec<f64>>,
    #[arg(long)]
    h: Option<f64>,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    surrogate: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    times: Option<Vec<f64>>,
    /// Values of μ̄, comma separated (default 1, 2, ..., 100).
    #[arg(long = "mu-bar", value_delimiter = ',')]
    mu_bar: Option<Vec<f64>>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-components")]
    max_components: Option<usize>,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Reference(a) => cmd_reference(a),
        Command::Compare(a) => cmd_compare(a),
        Command::SweepMu(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn scene_with(path: &Path, o: &Overrides) -> Result<Scene> {
    let mut scene = load_scene(path)?;
    if let Some(t) = o.tol {
        scene.run.tol = t;
    }
    if let Some(m) = o.mu_bar {
        scene.run.mu_bar = m;
    }
    if let Some(n) = o.max_components {
        scene.run.max_components = n;
    }
    Ok(scene)
}

fn build_scene(scene: &Scene) -> Result<Surrogate> {
    let psi = scene.run.solve_psi(&scene.source)?;
    let s = build(
        &scene.domain,
        &psi,
        &scene.source,
        &scene.run.build_config(scene.source.radius),
    )?;
    Ok(s)
}

fn load_surrogate(path: &Path) -> Result<Surrogate> {
    Surrogate::load(path).with_context(|| format!("reading surrogate {}", path.display()))
}

fn kind_name(k: SupportKind) -> &'static str {
    match k {
        SupportKind::Source => "source",
        SupportKind::Reflection => "reflection",
        SupportKind::Diffraction => "diffraction",
    }
}

fn report(name: &str, s: &Surrogate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# scene {name}");
    let _ = writeln!(
        out,
        "# N = {} (source {}, reflection {}, diffraction {}), discarded {}",
        s.len(),
        s.count(SupportKind::Source),
        s.count(SupportKind::Reflection),
        s.count(SupportKind::Diffraction),
        s.discarded.len()
    );
    out.push_str("index,kind,parent,event,birth_time,r,xi1,xi2,magnitude_bound\n");
    for c in &s.components {
        let parent = c.parent.map(|p| p.to_string()).unwrap_or_default();
        let event = match (c.kind, c.support.edge, c.vertex) {
            (SupportKind::Reflection, Some(e), _) => format!("edge {e}"),
            (SupportKind::Diffraction, _, Some(v)) => format!("vertex {v}"),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{parent},{event},{},{},{},{},{}",
            c.index,
            kind_name(c.kind),
            c.birth_time,
            c.r,
            c.xi.x1,
            c.xi.x2,
            c.magnitude_bound
        );
    }
    out
}

fn cmd_build(a: BuildArgs) -> Result<()> {
    let scene = scene_with(&a.scene, &a.overrides)?;
    let s = build_scene(&scene)?;
    s.save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let text = report(&scene.run.name, &s);
    print!("{text}");
    if let Some(p) = a.report {
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn parse_probes(text: &str) -> Result<Vec<Point2>> {
    text.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let v: Vec<&str> = p.split(',').map(str::trim).collect();
            if v.len() != 2 {
                bail!("probe `{p}` is not of the form x1,x2");
            }
            Ok(Point2::new(v[0].parse()?, v[1].parse()?))
        })
        .collect()
}

fn fmt_point(p: &Point2) -> String {
    format!("({}, {})", p.x1, p.x2)
}

fn check_targets(s: &Surrogate, points: &[Point2], times: &[f64]) -> Result<()> {
    let outside: Vec<String> = points
        .iter()
        .filter(|p| !s.domain.contains(**p))
        .map(fmt_point)
        .collect();
    if !outside.is_empty() {
        bail!("targets outside the domain: {}", outside.join(", "));
    }
    let late: Vec<String> = times
        .iter()
        .filter(|t| !(**t >= 0.0 && **t <= s.config.t_max))
        .map(|t| t.to_string())
        .collect();
    if !late.is_empty() {
        bail!("times outside [0, {}]: {}", s.config.t_max, late.join(", "));
    }
    Ok(())
}

/// Row-major grid over the bounding box, restricted to the domain.
fn snapshot_grid(s: &Surrogate, h: f64) -> Result<Vec<Point2>> {
    if !(h > 0.0) {
        bail!("grid spacing must be positive");
    }
    let (lo, hi) = s.domain.bounding_box();
    let nx = ((hi.x1 - lo.x1) / h).floor() as usize;
    let ny = ((hi.x2 - lo.x2) / h).floor() as usize;
    let mut pts = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let p = Point2::new(lo.x1 + i as f64 * h, lo.x2 + j as f64 * h);
            if s.domain.contains(p) {
                pts.push(p);
            }
        }
    }
    Ok(pts)
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        bail!("non-finite value in {what}")
    }
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn mode_name(m: EvalMode) -> &'static str {
    match m {
        EvalMode::Full => "full",
        EvalMode::Go => "go",
        EvalMode::Indicator => "indicator",
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let s = load_surrogate(&a.surrogate)?;
    let scene = a.scene.as_deref().map(load_scene).transpose()?;
    let times = a
        .times
        .or_else(|| scene.as_ref().map(|sc| sc.run.snapshot_times.clone()))
        .unwrap_or_default();
    let probes = match &a.probes {
        Some(p) => parse_probes(p)?,
        None => scene
            .as_ref()
            .map(|sc| sc.run.probes.clone())
            .unwrap_or_default(),
    };
    let grid_h = a
        .grid_h
        .or(scene.as_ref().map(|sc| sc.run.snapshot_h))
        .unwrap_or(0.05);
    if times.is_empty() && probes.is_empty() {
        bail!("nothing to evaluate: give --times and/or --probes");
    }
    check_targets(&s, &probes, &times)?;
    fs::create_dir_all(&a.out)?;
    let mode = a.mode;
    let name = mode_name(mode);

    let grid = if times.is_empty() {
        Vec::new()
    } else {
        snapshot_grid(&s, grid_h)?
    };
    for &t in &times {
        let values: Vec<f64> = grid
            .par_iter()
            .map(|p| s.evaluate_mode(mode, *p, t))
            .collect::<raywave::Result<_>>()?;
        let rows = grid
            .iter()
            .zip(&values)
            .map(|(p, v)| Ok(format!("{},{},{}", p.x1, p.x2, finite(*v, "snapshot")?)))
            .collect::<Result<Vec<_>>>()?;
        write_csv(
            &a.out.join(format!("snapshot_{name}_t{t}.csv")),
            "x1,x2,value",
            rows,
        )?;
    }

    let dt = a.dt.unwrap_or(s.psi.dt);
    if !(dt > 0.0) {
        bail!("--dt must be positive");
    }
    let n = (s.config.t_max / dt + 1e-9).floor() as usize;
    for (i, p) in probes.iter().enumerate() {
        let rows = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                Ok(format!(
                    "{t},{}",
                    finite(s.evaluate_mode(mode, *p, t)?, "trace")?
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        write_csv(
            &a.out.join(format!("trace_{name}_p{i}.csv")),
            "t,value",
            rows,
        )?;
    }
    Ok(())
}

fn run_reference(scene: &Scene, h: Option<f64>, times: &[f64]) -> Result<ReferenceGrid> {
    let h = h.unwrap_or(scene.run.reference_h);
    let g = solve_reference(
        &scene.domain,
        &scene.source,
        scene.run.t_max,
        h,
        &scene.run.probes,
        times,
    )?;
    Ok(g)
}

fn cmd_reference(a: ReferenceArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let times = a.times.unwrap_or_else(|| scene.run.snapshot_times.clone());
    let g = run_reference(&scene, a.h, &times)?;
    fs::create_dir_all(&a.out)?;
    for (s, snap) in g.snapshots.iter().enumerate() {
        let mut rows = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                if g.kinds[j * g.nx + i] != CellKind::Exterior {
                    let c = g.cell_center(i, j);
                    rows.push(format!(
                        "{},{},{}",
                        c.x1,
                        c.x2,
                        finite(g.node_value(s, i, j), "snapshot")?
                    ));
                }
            }
        }
        write_csv(
            &a.out.join(format!("snapshot_ref_t{}.csv", snap.t)),
            "x1,x2,value",
            rows,
        )?;
    }
    for (p, trace) in g.traces.iter().enumerate() {
        let rows = g
            .trace_times()
            .iter()
            .zip(trace)
            .map(|(t, v)| Ok(format!("{t},{}", finite(*v, "trace")?)))
            .collect::<Result<Vec<_>>>()?;
        write_csv(&a.out.join(format!("trace_ref_p{p}.csv")), "t,value", rows)?;
    }
    Ok(())
}

/// `relative_l2_error` with the surrogate side evaluated in parallel.
fn l2_error(s: &Surrogate, mode: EvalMode, g: &ReferenceGrid, t: f64, quad_h: f64) -> Result<f64> {
    let pts = quadrature_points(&s.domain, quad_h);
    let a: Vec<f64> = pts
        .par_iter()
        .map(|p| s.evaluate_mode(mode, *p, t))
        .collect::<raywave::Result<_>>()?;
    let b: Vec<f64> = pts
        .iter()
        .map(|p| g.sample(*p, t))
        .collect::<raywave::Result<_>>()?;
    let lookup =
        |x: Point2| pts.binary_search_by(|p| (p.x2, p.x1).partial_cmp(&(x.x2, x.x1)).unwrap());
    let sa = |x: Point2, _t: f64| Ok(a[lookup(x).expect("quadrature point")]);
    let sb = |x: Point2, _t: f64| Ok(b[lookup(x).expect("quadrature point")]);
    Ok(relative_l2_error(&sa, &sb, &s.domain, t, quad_h)?)
}

fn surrogate_for(scene: &Scene, path: Option<&Path>) -> Result<Surrogate> {
    match path {
        Some(p) => load_surrogate(p),
        None => build_scene(scene),
    }
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let scene = scene_with(&a.scene, &a.overrides)?;
    let s = surrogate_for(&scene, a.surrogate.as_deref())?;
    let times = a.times.unwrap_or_else(|| scene.run.snapshot_times.clone());
    if times.is_empty() && scene.run.probes.is_empty() {
        bail!("nothing to compare: give --times or scene probes");
    }
    check_targets(&s, &scene.run.probes, &times)?;
    let g = run_reference(&scene, a.h, &times)?;
    fs::create_dir_all(&a.out)?;
    let rows = times
        .iter()
        .map(|&t| {
            Ok(format!(
                "{t},{}",
                finite(l2_error(&s, a.mode, &g, t, scene.run.quad_h)?, "error")?
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(&a.out.join("errors.csv"), "t,rel_l2", rows)?;

    let k_grid = default_k_grid(&s, 256);
    for (i, p) in scene.run.probes.iter().enumerate() {
        let rows = g
            .trace_times()
            .iter()
            .zip(&g.traces[i])
            .filter(|(t, _)| **t <= s.config.t_max)
            .map(|(&t, &u_ref)| {
                let u = s.evaluate_mode(a.mode, *p, t)?;
                let ind = s.error_indicator(*p, t)?;
                let bound = apriori_bound_at(&s, *p, t, &k_grid)?;
                for v in [u, u_ref, ind, bound] {
                    finite(v, "probe comparison")?;
                }
                Ok(format!(
                    "{t},{u},{u_ref},{},{ind},{bound}",
                    (u - u_ref).abs()
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        write_csv(
            &a.out.join(format!("probe_p{i}.csv")),
            "t,surrogate,reference,abs_error,indicator,apriori_bound",
            rows,
        )?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let overrides = Overrides {
        tol: a.tol,
        mu_bar: None,
        max_components: a.max_components,
    };
    let scene = scene_with(&a.scene, &overrides)?;
    let s = surrogate_for(&scene, a.surrogate.as_deref())?;
    let times = a.times.unwrap_or_else(|| scene.run.snapshot_times.clone());
    if times.is_empty() {
        bail!("no times to sweep: give --times");
    }
    check_targets(&s, &[], &times)?;
    let mus = a
        .mu_bar
        .unwrap_or_else(|| (1..=100).map(f64::from).collect());
    let g = run_reference(&scene, a.h, &times)?;
    let mut rows = Vec::new();
    for &mu in &mus {
        let sm = s.with_mu_bar(mu)?;
        for &t in &times {
            let e = finite(
                l2_error(&sm, EvalMode::Full, &g, t, scene.run.quad_h)?,
                "error",
            )?;
            rows.push(format!("{mu},{t},{e}"));
        }
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(&a.out, "mu_bar,t,rel_l2", rows)
}
