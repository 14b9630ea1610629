//! The named pipelines behind `otlab run`.
//!
//! Each pipeline writes its CSV/JSON artifacts through an [`ArtifactWriter`]
//! and returns a JSON summary for the manifest. Solver parallelism never
//! changes results, so outputs depend on the config and seed only.

use otlab_core::geometry::{build_domain, DomainSpec};
use otlab_core::plt::{corner_obstruction_report, d11_at_origin, invert_plt, solve_plt_with, PltMap, PltOptions, ScalarGrid};
use otlab_core::probes::{
    boundary_report, displacement_jump, estimate_split_point, holder_fit, push_row, uniform_points, HolderFit, JumpProfile,
    TransportSamples, JUMP_THRESHOLD_SPACINGS, PROBE_OFFSET_SPACINGS, TUBE_WIDTH_SPACINGS,
};
use otlab_core::sdot::{sample_target, solve_dual_with_stats, SolveStats, SolverOptions};
use otlab_core::witnesses::{
    barrier_harmonicity, barrier_increment, barrier_sign_threshold, fit_approx_poly, regularity_exponent, LinearizedCoefficients,
    PolyApprox,
};
use otlab_core::{DensityField, Exec, LaguerreDiagram, Point, Polygon};
use serde_json::{json, Value};

use crate::artifacts::{ArtifactWriter, Manifest};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::render::{render, Renderable, SvgStyle};

/// Side of the evaluation grid used for displacement tables.
pub const DISPLACEMENT_GRID: usize = 50;
/// Resolution of the split scan along `(0, 2) x {0}`.
pub const SPLIT_RESOLUTION: usize = 401;
/// Samples along each jump probe.
pub const PROBE_SAMPLES: usize = 101;

/// Runs the experiment named in `config` and writes its manifest.
///
/// On failure the manifest is still written, flagged partial, and the error
/// is returned with the experiment name as context.
pub fn run(config: &ExperimentConfig) -> Result<Manifest, CliError> {
    let cfg = config.resolved()?;
    let e = cfg.experiment()?;
    let mut out = ArtifactWriter::new(&cfg.output_dir())?;
    out.write("config.json", &cfg.to_json())?;
    let exec = Exec::Parallel;
    let result = match e {
        Experiment::Identity => identity(&cfg, &mut out, exec),
        Experiment::Dumbbell => dumbbell(&cfg, &mut out, exec),
        Experiment::Notch => notch(&cfg, &mut out, exec),
        Experiment::SmoothedNotch => smoothed_notch(&cfg, &mut out, exec),
        Experiment::OpennessSweep => openness(&cfg, &mut out, exec),
        Experiment::PltSquare => plt_square(&cfg, &mut out, exec),
        Experiment::CornerObstruction => corner(&cfg, &mut out),
        Experiment::Barrier => barrier(&cfg, &mut out),
        Experiment::RegularityFit => regularity(&cfg, &mut out),
    };
    match result {
        Ok(summary) => out.finish(&cfg, Ok(summary)),
        Err(err) => {
            let err = err.context(e.name());
            out.finish(&cfg, Err(&err))?;
            Err(err)
        }
    }
}

/// A solved semi-discrete problem.
pub struct Transport {
    pub diagram: LaguerreDiagram,
    pub stats: SolveStats,
    /// `max_i |m_i - nu_i|`.
    pub mass_defect: f64,
}

/// Discretizes `(target, g)` with about `n` sites, rescales the masses to the
/// source mass and solves the dual problem.
pub fn solve_transport(
    source: &Polygon,
    f: &DensityField,
    target: &Polygon,
    g: &DensityField,
    n: usize,
    tol: f64,
    exec: Exec,
) -> Result<Transport, CliError> {
    let nu = sample_target(target, g, n)?;
    let nu = nu.rescaled(f.integrate_polygon(source) / nu.total_mass());
    let opts = SolverOptions {
        tol,
        exec,
        ..Default::default()
    };
    let (diagram, stats) = solve_dual_with_stats(source, f, &nu, &opts)?;
    let mass_defect = diagram.masses.iter().zip(&nu.masses).map(|(m, t)| (m - t).abs()).fold(0.0, f64::max);
    Ok(Transport {
        diagram,
        stats,
        mass_defect,
    })
}

fn domain(spec: DomainSpec) -> Result<Polygon, CliError> {
    Ok(build_domain(&spec)?)
}

/// Source box `(0, 4) x (-2, 2)` of the notch experiments.
pub fn notch_source() -> Result<Polygon, CliError> {
    domain(DomainSpec::Rectangle {
        x_range: [0.0, 4.0],
        y_range: [-2.0, 2.0],
    })
}

/// Probe segment straddling the expected tear.
pub const NOTCH_PROBE: [Point; 2] = [Point { x: 0.0, y: 0.0 }, Point { x: 0.5, y: 0.0 }];

fn solve_summary(t: &Transport) -> Value {
    json!({
        "sites": t.diagram.len(),
        "spacing": t.diagram.mean_spacing(),
        "iterations": t.stats.iterations,
        "gradient_fallbacks": t.stats.gradient_fallbacks,
        "mass_defect": t.mass_defect,
        "cell_area_error": (t.diagram.total_cell_area() - t.diagram.source.area()).abs(),
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(a), Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

fn write_diagram(out: &mut ArtifactWriter, d: &LaguerreDiagram, probes: Vec<[Point; 2]>) -> Result<(), CliError> {
    let r = Renderable::Diagram {
        diagram: d.clone(),
        probes,
    };
    out.write_json("diagram.json", &r)?;
    out.write("transport.svg", &render(&r, &SvgStyle::default()))
}

/// Counts pairs violating `(T(x) - T(x')) . (x - x') >= 0` among `pairs`
/// seeded random pairs of source points.
pub fn monotonicity_violations(d: &LaguerreDiagram, pairs: usize, seed: u64, exec: Exec) -> Result<usize, CliError> {
    let xs = uniform_points(d, 2 * pairs, seed)?;
    let ts = d.eval_many(&xs, exec)?;
    Ok((0..pairs)
        .filter(|&k| (ts[2 * k] - ts[2 * k + 1]).dot(xs[2 * k] - xs[2 * k + 1]) < 0.0)
        .count())
}

/// `max |T(x) - x|` over the cell centres of a `k x k` grid on the unit square.
pub fn max_displacement(map: impl Fn(Point) -> Result<Point, CliError>, k: usize, csv: Option<&mut String>) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    let mut rows = String::new();
    for j in 0..k {
        for i in 0..k {
            let x = Point::new((i as f64 + 0.5) / k as f64, (j as f64 + 0.5) / k as f64);
            let t = map(x)?;
            worst = worst.max(t.dist(x));
            push_row(&mut rows, &[x.x, x.y, t.x, t.y, t.dist(x)]);
        }
    }
    if let Some(c) = csv {
        c.push_str("x1,x2,t1,t2,displacement\n");
        c.push_str(&rows);
    }
    Ok(worst)
}

fn identity(cfg: &ExperimentConfig, out: &mut ArtifactWriter, exec: Exec) -> Result<Value, CliError> {
    let q = domain(DomainSpec::Square { side: 1.0 })?;
    let one = DensityField::constant(1.0);
    let t = solve_transport(&q, &one, &q, &one, cfg.sites.unwrap_or(2500), cfg.tol.unwrap_or(1e-6), exec)?;
    let d = &t.diagram;
    let mut csv = String::new();
    let worst = max_displacement(|x| Ok(d.eval_map(x)?), DISPLACEMENT_GRID, Some(&mut csv))?;
    out.write("displacement.csv", &csv)?;
    let pairs = cfg.samples.unwrap_or(10_000);
    let violations = monotonicity_violations(d, pairs, cfg.seed(), exec)?;
    write_diagram(out, d, vec![])?;
    Ok(merge(
        solve_summary(&t),
        json!({
            "max_displacement": worst,
            "max_displacement_spacings": worst / d.mean_spacing(),
            "monotonicity_pairs": pairs,
            "monotonicity_violations": violations,
        }),
    ))
}

/// Disc of radius 1 with the resolution used for the dumbbell runs.
pub fn unit_disc() -> Result<Polygon, CliError> {
    domain(DomainSpec::Disc {
        radius: 1.0,
        arc_vertices: 256,
    })
}

/// `|du|` of the tube around `{0} x (-1, 1)` for the disc-to-dumbbell map.
pub fn dumbbell_measure(eps: f64, sites: usize, tol: f64, exec: Exec) -> Result<(Transport, f64), CliError> {
    let x = unit_disc()?;
    let one = DensityField::constant(1.0);
    let y = domain(DomainSpec::Dumbbell { eps, arc_vertices: 128 })?;
    let t = solve_transport(&x, &one, &y, &one, sites, tol, exec)?;
    let w = TUBE_WIDTH_SPACINGS * t.diagram.mean_spacing();
    let m = otlab_core::probes::subdiff_measure(&t.diagram, Point::new(0.0, -1.0), Point::new(0.0, 1.0), w)?;
    Ok((t, m))
}

/// Same measure for the disc mapped to itself.
pub fn dumbbell_control(sites: usize, tol: f64, exec: Exec) -> Result<f64, CliError> {
    let x = unit_disc()?;
    let one = DensityField::constant(1.0);
    let t = solve_transport(&x, &one, &x, &one, sites, tol, exec)?;
    let w = TUBE_WIDTH_SPACINGS * t.diagram.mean_spacing();
    Ok(otlab_core::probes::subdiff_measure(&t.diagram, Point::new(0.0, -1.0), Point::new(0.0, 1.0), w)?)
}

fn dumbbell(cfg: &ExperimentConfig, out: &mut ArtifactWriter, exec: Exec) -> Result<Value, CliError> {
    let (sites, tol) = (cfg.sites.unwrap_or(2000), cfg.tol.unwrap_or(1e-6));
    let (t, measure) = dumbbell_measure(cfg.eps.unwrap_or(0.05), sites, tol, exec)?;
    let control = dumbbell_control(sites, tol, exec)?;
    let d = &t.diagram;
    let probe = [Point::new(0.0, -0.9), Point::new(0.0, 0.9)];
    let delta = PROBE_OFFSET_SPACINGS * d.mean_spacing();
    let prof = displacement_jump(d, probe[0], probe[1], delta, PROBE_SAMPLES)?;
    out.write("jump_profile.csv", &prof.to_csv())?;
    write_diagram(out, d, vec![probe])?;
    Ok(merge(
        solve_summary(&t),
        json!({
            "subdiff_measure": measure,
            "identity_control": control,
            "probe_delta": delta,
            "max_jump": prof.max_jump(),
        }),
    ))
}

/// Notched target and its solved transport.
pub fn notch_transport(eps: f64, sites: usize, tol: f64, f: &DensityField, exec: Exec) -> Result<Transport, CliError> {
    let x = notch_source()?;
    let y = domain(DomainSpec::NotchedRectangle { eps })?;
    solve_transport(&x, f, &y, &DensityField::constant(1.0), sites, tol, exec)
}

pub fn notch_profile(d: &LaguerreDiagram, delta: f64) -> Result<JumpProfile, CliError> {
    Ok(displacement_jump(d, NOTCH_PROBE[0], NOTCH_PROBE[1], delta, PROBE_SAMPLES)?)
}

fn notch(cfg: &ExperimentConfig, out: &mut ArtifactWriter, exec: Exec) -> Result<Value, CliError> {
    let one = DensityField::constant(1.0);
    let t = notch_transport(cfg.eps.unwrap_or(0.2), cfg.sites.unwrap_or(5000), cfg.tol.unwrap_or(1e-6), &one, exec)?;
    let d = &t.diagram;
    let delta = cfg.delta.unwrap_or(0.02);
    let prof = notch_profile(d, delta)?;
    out.write("jump_profile.csv", &prof.to_csv())?;
    let threshold = JUMP_THRESHOLD_SPACINGS * d.mean_spacing();
    let split = estimate_split_point(d, delta, SPLIT_RESOLUTION, threshold)?;
    out.write_json("split.json", &split)?;
    write_diagram(out, d, vec![NOTCH_PROBE])?;
    Ok(merge(
        solve_summary(&t),
        json!({
            "max_jump": prof.max_jump(),
            "threshold": threshold,
            "t_hat": split.t_hat,
            "no_split": split.no_split,
            "t_plus": split.t_plus,
            "t_minus": split.t_minus,
        }),
    ))
}

/// Mean `log |T(x) - T(x')|` per bin of `log |x - x'|`.
pub fn holder_bins(fit: &HolderFit, bins: usize) -> String {
    let [lo, hi] = [fit.window[0].ln(), fit.window[1].ln()];
    let mut sum = vec![(0.0f64, 0usize); bins];
    for &(x, y) in &fit.points {
        let k = (((x - lo) / (hi - lo)) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize;
        sum[k].0 += y;
        sum[k].1 += 1;
    }
    let mut csv = String::from("log_dx,mean_log_dt,pairs\n");
    for (k, &(s, c)) in sum.iter().enumerate() {
        if c > 0 {
            let centre = lo + (hi - lo) * (k as f64 + 0.5) / bins as f64;
            push_row(&mut csv, &[centre, s / c as f64, c as f64]);
        }
    }
    csv
}

fn smoothed_notch(cfg: &ExperimentConfig, out: &mut ArtifactWriter, exec: Exec) -> Result<Value, CliError> {
    let x = notch_source()?;
    let eps = cfg.eps.unwrap_or(0.01);
    let y = domain(DomainSpec::SmoothedNotch {
        eps,
        alpha: cfg.alpha.unwrap_or(0.5),
        smoothing_radius: cfg.smoothing_radius.unwrap_or(0.4 * eps),
    })?;
    let one = DensityField::constant(1.0);
    let t = solve_transport(&x, &one, &y, &one, cfg.sites.unwrap_or(5000), cfg.tol.unwrap_or(1e-6), exec)?;
    let d = &t.diagram;
    let samples = TransportSamples::from_diagram(d, cfg.samples.unwrap_or(2000), cfg.seed(), exec)?;
    out.write("samples.csv", &samples.to_csv())?;
    let fit = holder_fit(&samples)?;
    out.write("holder_bins.csv", &holder_bins(&fit, 40))?;
    let prof = notch_profile(d, cfg.delta.unwrap_or(0.02))?;
    out.write("jump_profile.csv", &prof.to_csv())?;
    let threshold = JUMP_THRESHOLD_SPACINGS * d.mean_spacing();
    write_diagram(out, d, vec![NOTCH_PROBE])?;
    Ok(merge(
        solve_summary(&t),
        json!({
            "holder_exponent": fit.exponent,
            "holder_log_constant": fit.log_constant,
            "holder_window": fit.window,
            "holder_pairs": fit.points.len(),
            "max_jump": prof.max_jump(),
            "threshold": threshold,
            "jump_detected": prof.max_jump() > threshold,
        }),
    ))
}

/// One member of the openness sweep: the source density and its label.
pub fn openness_variants(perturbation: f64) -> Vec<(&'static str, DensityField)> {
    // |x1 x2| <= 8 on the source box, so a = p / 8 is a relative
    // perturbation of size p that keeps the mass unchanged.
    let a = perturbation / 8.0;
    vec![
        ("base", DensityField::constant(1.0)),
        ("affine+", DensityField::affine_product(a)),
        ("affine-", DensityField::affine_product(-a)),
        ("scaled+", DensityField::constant(1.0).scaled(1.0 + perturbation)),
        ("scaled-", DensityField::constant(1.0).scaled(1.0 - perturbation)),
    ]
}

fn openness(cfg: &ExperimentConfig, out: &mut ArtifactWriter, exec: Exec) -> Result<Value, CliError> {
    let (eps, sites, tol, delta) = (
        cfg.eps.unwrap_or(0.2),
        cfg.sites.unwrap_or(5000),
        cfg.tol.unwrap_or(1e-6),
        cfg.delta.unwrap_or(0.02),
    );
    let mut csv = String::from("variant,max_jump,ratio\n");
    let mut rows = Vec::new();
    let mut base = f64::NAN;
    for (k, (name, f)) in openness_variants(cfg.perturbation.unwrap_or(0.02)).into_iter().enumerate() {
        let t = notch_transport(eps, sites, tol, &f, exec).map_err(|e| e.context(name))?;
        let prof = notch_profile(&t.diagram, delta)?;
        out.write(&format!("jump_{name}.csv"), &prof.to_csv())?;
        let j = prof.max_jump();
        if k == 0 {
            base = j;
        }
        let ratio = j / base;
        csv.push_str(name);
        csv.push(',');
        push_row(&mut csv, &[j, ratio]);
        rows.push(json!({ "variant": name, "max_jump": j, "ratio": ratio, "iterations": t.stats.iterations }));
    }
    out.write("openness.csv", &csv)?;
    let min_ratio = rows.iter().filter_map(|r| r["ratio"].as_f64()).fold(f64::INFINITY, f64::min);
    Ok(json!({
        "base_max_jump": base,
        "min_ratio": min_ratio,
        "preserved": min_ratio >= 0.5,
        "variants": rows,
    }))
}

/// `f = 1 + a x1 x2` and the constant `g` of equal mass on the unit square.
pub fn plt_densities(a: f64) -> (DensityField, DensityField) {
    (DensityField::affine_product(a), DensityField::constant(1.0 + a / 4.0))
}

fn plt_square(cfg: &ExperimentConfig, out: &mut ArtifactWriter, exec: Exec) -> Result<Value, CliError> {
    let (f, g) = plt_densities(cfg.a.unwrap_or(1.0));
    let opts = PltOptions {
        exec,
        ..PltOptions::new(cfg.grid.unwrap_or(129), cfg.tol.unwrap_or(1e-10))
    };
    let s = solve_plt_with(&f, &g, &opts)?;
    out.write("ustar.csv", &s.ustar.to_csv())?;
    let samples = invert_plt(&s.ustar)?;
    out.write("map.csv", &samples.to_csv())?;
    let map = PltMap::new(&s.ustar)?;
    let report = boundary_report(Point::new(0.0, 0.0), Point::new(1.0, 1.0), s.ustar.n, |x| map.eval(x));
    out.write_json("boundary.json", &report)?;
    let r = Renderable::Samples { samples, probes: vec![] };
    out.write_json("samples.json", &r)?;
    out.write("transport.svg", &render(&r, &SvgStyle::default()))?;
    Ok(json!({
        "n": s.ustar.n,
        "h": s.ustar.h,
        "iterations": s.iterations,
        "residual": s.residual,
        "linear_iterations": s.linear_iterations,
        "d11_origin": d11_at_origin(&s.ustar),
        "max_edge_distance": report.max_edge_distance(),
        "max_corner_displacement": report.max_corner_displacement(),
    }))
}

fn corner(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<Value, CliError> {
    let (f, g) = plt_densities(cfg.a.unwrap_or(1.0));
    let grids = cfg.grids.clone().unwrap_or_else(|| vec![65, 129, 257]);
    let r = corner_obstruction_report(&f, &g, &grids, cfg.tol.unwrap_or(1e-10))?;
    out.write_json("corner_report.json", &r)?;
    let mut csv = String::from("n,h,d11_origin,k,interior,mismatch\n");
    for gr in &r.grids {
        for (&(k, e), m) in gr.interior.iter().zip(&gr.mismatch) {
            push_row(&mut csv, &[gr.n as f64, gr.h, gr.d11_origin, k as f64, e, *m]);
        }
    }
    out.write("corner.csv", &csv)?;
    let finest = r.finest().expect("at least one grid");
    Ok(json!({
        "ratio": r.ratio,
        "equation_value": r.equation_value,
        "d11_origin": r.grids.iter().map(|g| g.d11_origin).collect::<Vec<_>>(),
        "finest_mismatch": finest.mismatch,
    }))
}

fn barrier(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<Value, CliError> {
    let eps = cfg.eps.unwrap_or(0.2);
    let t = barrier_sign_threshold(eps)?;
    let harm = barrier_harmonicity(eps, cfg.samples.unwrap_or(100), cfg.seed())?;
    let below = barrier_increment(eps, t.p_star / 10.0, 0.0)?;
    let mut csv = String::from("ln_p,increment\n");
    for k in 0..=80 {
        let lp = t.ln_p_star - 10.0 + 0.25 * k as f64;
        push_row(&mut csv, &[lp, barrier_increment(eps, lp.exp(), 0.0)?]);
    }
    out.write("barrier_profile.csv", &csv)?;
    out.write_json("threshold.json", &t)?;
    Ok(json!({
        "p_star": t.p_star,
        "ln_p_star": t.ln_p_star,
        "increment_at_tenth": below,
        "below_is_negative": below < 0.0,
        "harmonicity_residual": harm,
    }))
}

/// Smooth approximating polynomial used under the planted singular term.
pub const PLANTED_SMOOTH: PolyApprox = PolyApprox {
    p0: 0.1,
    p21: 0.3,
    p22: -0.24,
    p31: 0.0,
    p32: 0.0,
    approximating: true,
};

/// Coefficients the planted polynomial is approximating for.
pub fn planted_coefficients() -> LinearizedCoefficients {
    LinearizedCoefficients::constant(1.0, 1.25)
}

/// `PLANTED_SMOOTH + |x|^(3 + alpha)` on an `n x n` grid.
pub fn planted_field(alpha: f64, n: usize) -> Result<ScalarGrid, CliError> {
    Ok(ScalarGrid::from_fn(n, |p, x2| {
        PLANTED_SMOOTH.eval(p, x2) + (p * p + x2 * x2).powf(0.5 * (3.0 + alpha))
    })?)
}

/// Fit radii `1/2, 1/4, 1/8, 1/16`.
pub const FIT_RADII: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];

pub fn planted_exponent(alpha: f64, n: usize) -> Result<otlab_core::witnesses::RegularityFit, CliError> {
    let v = planted_field(alpha, n)?;
    let a = planted_coefficients();
    let table: Result<Vec<(f64, f64)>, CliError> = FIT_RADII
        .iter()
        .map(|&r| {
            let fit = fit_approx_poly(&v, &a, r, None)?;
            Ok((fit.radius, fit.residual))
        })
        .collect();
    Ok(regularity_exponent(&table?)?)
}

fn regularity(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Result<Value, CliError> {
    let alpha = cfg.alpha.unwrap_or(0.5);
    let fit = planted_exponent(alpha, cfg.grid.unwrap_or(257))?;
    out.write("regularity.csv", &fit.to_csv())?;
    out.write_json("regularity_fit.json", &fit)?;
    Ok(json!({
        "planted_alpha": alpha,
        "alpha": fit.alpha,
        "error": (fit.alpha - alpha).abs(),
        "max_log_deviation": fit.max_log_deviation,
    }))
}
