//! Subcommand bodies. Each returns its tables and a plain-text summary.

use crate::config::ExperimentConfig;
use crate::output::{num, short, Table};
use crate::parse;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wonderchar::acceptance;
use wonderchar::fixed_point::{find_fixed_points_eps, flat_trace, verify_fpf};
use wonderchar::group::GroupElement;
use wonderchar::symbol::{lacunarity_check, GridSpec, LacunarySymbolGrid};
use wonderchar::trace::trace_report;
use wonderchar::transform::{f_spher_parabolic, f_spher_toric};
use wonderchar::variety::Family;
use wonderchar::{Error, Result, C64};

/// Result of one subcommand.
#[derive(Debug, Clone)]
pub struct Report {
    pub name: String,
    pub tables: Vec<Table>,
    pub summary: String,
    /// False when a numerical check failed.
    pub passed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct TraceOptions {
    pub laurent: bool,
    pub chart_breakdown: bool,
}

fn indexed(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}_{i}")).collect()
}

/// Tensor grid on [-R, R]^d, axis 0 slowest.
fn xi_points(d: usize, grid: GridSpec) -> Vec<Vec<f64>> {
    let half = grid.half() as i64;
    let n = (2 * half + 1) as usize;
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                p[k] = ((idx % n) as i64 - half) as f64 * grid.step;
                idx /= n;
            }
            p
        })
        .collect()
}

fn product_points(axis: &[f64], d: usize) -> Vec<Vec<f64>> {
    let n = axis.len();
    (0..n.pow(d as u32))
        .map(|mut idx| {
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                p[k] = axis[idx % n];
                idx /= n;
            }
            p
        })
        .collect()
}

fn complex_row(xi: &[f64], v: C64, err: f64) -> Vec<String> {
    let mut row: Vec<String> = xi.iter().map(|&x| num(x)).collect();
    row.extend([num(v.re), num(v.im), num(v.norm()), num(err)]);
    row
}

pub fn transform(cfg: &ExperimentConfig) -> Result<Report> {
    let model = cfg.model()?;
    let f = cfg.function(&model)?;
    let d = model.dim();
    let x = cfg.base_point(&model);
    let mut header = indexed("xi", d);
    header.extend(["re", "im", "abs", "error"].map(String::from));
    let mut table = Table::with_header("transform", header);
    let (mut peak, mut at, mut worst) = (0.0_f64, vec![0.0; d], 0.0_f64);
    for xi in xi_points(d, cfg.xi_grid_for(&model, &f)?) {
        let est = match &model.family {
            Family::Toric(roots) => f_spher_toric(&f, roots, &xi, &cfg.quad)?,
            Family::Parabolic => f_spher_parabolic(&f, &x, &xi, &cfg.quad)?.estimate,
            _ => return Err(Error::Unsupported("transform is available for toric and parabolic models".into())),
        };
        if est.value.norm() > peak {
            peak = est.value.norm();
            at = xi.clone();
        }
        worst = worst.max(est.error);
        table.push(complex_row(&xi, est.value, est.error));
    }
    let summary = format!(
        "transform on {} ({} points)\npeak |F| = {} at ξ = {:?}\nlargest error estimate = {}\n",
        cfg.model,
        table.rows.len(),
        short(peak),
        at,
        short(worst)
    );
    Ok(Report { name: "transform".into(), tables: vec![table], summary, passed: true })
}

/// Times t < 0 at which the inverse transform must vanish.
fn lacunarity_times() -> Vec<f64> {
    (0..60).map(|k| -3.0 + 0.05 * k as f64).collect()
}

pub fn symbol(cfg: &ExperimentConfig) -> Result<Report> {
    let engine = cfg.engine()?;
    let d = engine.model.dim();
    let y = cfg.base_point(&engine.model);
    let mut header = indexed("xi", d);
    header.extend(["re", "im", "abs", "error"].map(String::from));
    let mut table = Table::with_header("symbol", header);
    let spec = cfg.xi_grid_for(&engine.model, &engine.f)?;
    let grid = LacunarySymbolGrid::from_fn(y.clone(), d, spec, |xi| {
        let est = engine.auxiliary_symbol(0, &y, xi)?;
        table.push(complex_row(xi, est.value, est.error));
        Ok(est.value)
    })?;
    let rep = lacunarity_check(&grid, &lacunarity_times(), cfg.tol.lac)?;
    let mut lac = Table::new("lacunarity", &["check", "worst_t", "axis", "magnitude", "tolerance"]);
    lac.push(vec![
        if rep.passed { "PASS" } else { "FAIL" }.into(),
        num(rep.worst_t),
        rep.worst_axis.to_string(),
        short(rep.worst),
        short(cfg.tol.lac),
    ]);
    let mut summary = format!(
        "auxiliary symbol on {} at y = {:?} ({} points, peak |q| = {})\n\nlacunarity (relative to peak {}{}):\n{}",
        cfg.model,
        y,
        table.rows.len(),
        short(grid.max_abs()),
        short(rep.peak),
        if rep.windowed { ", windowed" } else { "" },
        lac.render()
    );
    if rep.windowed {
        summary.push_str(&format!(
            "the grid edge still carries {} of the peak; widen --xi-grid for an unwindowed check\n",
            short(grid.edge_abs() / grid.max_abs())
        ));
    }
    Ok(Report { name: "symbol".into(), tables: vec![table], summary, passed: rep.passed })
}

pub fn kernel(cfg: &ExperimentConfig) -> Result<Report> {
    let engine = cfg.engine()?;
    let d = engine.model.dim();
    let pts = product_points(&cfg.y_grid.values(), d);
    let mut header = indexed("y", d);
    header.extend(indexed("y2", d));
    header.extend(["kernel", "error"].map(String::from));
    let mut table = Table::with_header("kernel", header);
    let (mut peak, mut worst) = (0.0_f64, 0.0_f64);
    for y in &pts {
        for y2 in &pts {
            let k = engine.kernel(0, y, y2)?;
            peak = peak.max(k.value.abs());
            worst = worst.max(k.error);
            let mut row: Vec<String> = y.iter().chain(y2).map(|&v| num(v)).collect();
            row.extend([num(k.value), num(k.error)]);
            table.push(row);
        }
    }
    let summary = format!(
        "kernel on {} ({} points)\npeak |K| = {}\nlargest error estimate = {}\n",
        cfg.model,
        table.rows.len(),
        short(peak),
        short(worst)
    );
    Ok(Report { name: "kernel".into(), tables: vec![table], summary, passed: true })
}

pub fn trace(cfg: &ExperimentConfig, opts: &TraceOptions) -> Result<Report> {
    let engine = cfg.engine()?;
    let zetas = cfg.zeta.values();
    let res = trace_report(&engine, &zetas)?;
    let labels: Vec<String> = res.per_chart.iter().map(|(l, _)| l.clone()).collect();
    let mut header: Vec<String> = ["zeta", "re", "im", "error"].map(String::from).to_vec();
    if opts.chart_breakdown {
        for l in &labels {
            header.push(format!("re_{l}"));
            header.push(format!("im_{l}"));
        }
    }
    let mut table = Table::with_header("trace", header);
    for e in &res.entries {
        let mut row = vec![num(e.zeta.re), num(e.value.re), num(e.value.im), num(e.error)];
        if opts.chart_breakdown {
            for (_, v) in &e.per_chart {
                row.extend([num(v.re), num(v.im)]);
            }
        }
        table.push(row);
    }
    let mut summary = format!("ζ-trace on {} with bundle {}\n{}\n", cfg.model, cfg.bundle, table.render());
    summary.push_str(&format!("regularized trace (finite part at ζ = -1): {}\n", num(res.tr_reg)));
    if opts.chart_breakdown {
        let mut per = Table::new("charts", &["chart", "finite_part"]);
        for (l, v) in &res.per_chart {
            per.push(vec![l.clone(), num(*v)]);
        }
        summary.push_str(&format!("\nper chart:\n{}", per.render()));
    }
    if opts.laurent {
        let mut lt = Table::new("laurent", &["power", "coefficient"]);
        for j in res.laurent.lowest..=res.laurent.highest() {
            lt.push(vec![j.to_string(), num(res.laurent.coeff(j))]);
        }
        summary.push_str(&format!("\nLaurent expansion about ζ = {}:\n{}", res.laurent.center, lt.render()));
    }
    Ok(Report { name: "trace".into(), tables: vec![table], summary, passed: true })
}

/// Largest flat-trace change under seeded random conjugations.
fn conjugation_spread(cfg: &ExperimentConfig, g: &GroupElement, base: f64) -> Result<(f64, usize)> {
    let model = cfg.model()?;
    let group = model.group();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut worst, mut used) = (0.0_f64, 0);
    for _ in 0..8 {
        let c: Vec<f64> = (0..group.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = group.from_coords(&c);
        let conj = h.mul(g)?.mul(&h.inv())?;
        if let Ok(t) = flat_trace(&model, &conj) {
            worst = worst.max((t - base).abs());
            used += 1;
        }
    }
    Ok((worst, used))
}

pub fn fixed_points(cfg: &ExperimentConfig) -> Result<Report> {
    let model = cfg.model()?;
    let g = parse::element(&cfg.g, model.group())?;
    let set = find_fixed_points_eps(&model, &g, cfg.tol.trans)?;
    let d = model.dim();
    let mut header: Vec<String> = ["index", "chart", "label"].map(String::from).to_vec();
    header.extend(indexed("y", d));
    header.extend(["det", "bundle_trace", "contribution", "error"].map(String::from));
    let mut table = Table::with_header("fixed_points", header);
    for (i, r) in set.records.iter().enumerate() {
        let moved = model.phi_map(&g, &r.point)?;
        let residual = model.point_distance(&moved, &r.point);
        let mut row = vec![i.to_string(), r.chart.to_string(), r.label.clone()];
        row.extend(r.y.iter().map(|&v| num(v)));
        row.extend([num(r.det), num(r.bundle_trace), num(r.bundle_trace / r.det.abs()), num(residual)]);
        table.push(row);
    }
    let mut summary = format!(
        "fixed points of {} on {} ({} records, transversal: {})\n{}",
        cfg.g,
        cfg.model,
        set.records.len(),
        set.transversal,
        table.render()
    );
    if let Some(note) = &set.note {
        summary.push_str(&format!("note: {note}\n"));
    }
    match set.flat_trace() {
        Ok(t) => {
            let (spread, used) = conjugation_spread(cfg, &g, t)?;
            summary.push_str(&format!("flat trace: {}\n", num(t)));
            summary.push_str(&format!(
                "conjugation check (seed {}): {} conjugates, largest change {}\n",
                cfg.seed,
                used,
                short(spread)
            ));
        }
        Err(e) => summary.push_str(&format!("flat trace undefined: {e}\n")),
    }
    Ok(Report { name: "fixed_points".into(), tables: vec![table], summary, passed: true })
}

pub fn verify(cfg: &ExperimentConfig) -> Result<Report> {
    let engine = cfg.engine()?;
    if !engine.model.is_projective() {
        return Err(Error::Unsupported(format!("the fixed-point comparison needs a compact model, not {}", cfg.model)));
    }
    let rep = verify_fpf(&engine, &cfg.zeta.values(), cfg.tol.gap)?;
    let mut table = Table::new("verify_fpf", &["zeta", "symbol_side", "fixed_point_side", "gap", "error"]);
    for r in rep.rows.iter().chain(std::iter::once(&rep.regularized)) {
        table.push(vec![
            num(r.zeta),
            num(r.symbol_side),
            num(r.fixed_point_side),
            num(r.gap),
            num((r.symbol_side - r.fixed_point_side).abs()),
        ]);
    }
    let summary = format!(
        "fixed-point formula on {} (relative gap tolerance {})\n{}{}\n",
        cfg.model,
        cfg.tol.gap,
        table.render(),
        if rep.passed { "PASS" } else { "FAIL" }
    );
    Ok(Report { name: "verify_fpf".into(), tables: vec![table], summary, passed: rep.passed })
}

pub fn selftest(only: &[String]) -> Result<Report> {
    let outcomes = if only.is_empty() {
        acceptance::run_all()
    } else {
        only.iter()
            .map(|id| acceptance::run(id).ok_or_else(|| Error::Config(format!("unknown criterion '{id}'; known: {:?}", acceptance::ids()))))
            .collect::<Result<Vec<_>>>()?
    };
    let mut table = Table::new("selftest", &["id", "passed", "seconds", "budget", "detail"]);
    let mut summary = String::new();
    for o in &outcomes {
        summary.push_str(&format!("{o}\n"));
        table.push(vec![o.id.into(), o.passed.to_string(), num(o.seconds), num(o.budget), o.detail.clone()]);
    }
    let passed = outcomes.iter().all(|o| o.passed);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    summary.push_str(&format!("{} of {} criteria passed\n", outcomes.len() - failed, outcomes.len()));
    Ok(Report { name: "selftest".into(), tables: vec![table], summary, passed })
}
