//! Runners for the acceptance criteria A1–A9. Each returns a pass flag, a
//! one-line detail and the elapsed time against its budget.

use crate::error::Result;
use crate::fixed_point::{flat_trace, verify_fpf};
use crate::group::{
    integrate_group, integration_by_parts, GroupElement, GroupKind, Mat2, ProfileKind, RapidDecayFunction,
    SphericalRootSystem,
};
use crate::quad::QuadSpec;
use crate::symbol::{mellin_oracle_r1, toric_grid_spec, toric_symbol_grid, InverseTransform, SymbolEngine};
use crate::trace::{laurent_at, scan_poles, zeta_pairing_1d, DiagonalProfile, SUBTRACTION_ORDER};
use crate::transform::{
    conjugation_invariance_residual, decay_certificate, f_spher_parabolic, f_spher_toric, shell_grid, DEFAULT_SHELLS,
};
use crate::variety::{build_partition_of_unity, ModelVariety};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::consts::EULER_MASCHERONI;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:<34} {:>8.2}s / {:>4.0}s  {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.seconds,
            self.budget,
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

pub const CRITERIA: [(&str, &str, f64, Check); 9] = [
    ("A1", "Mellin oracle", 10.0, a1_mellin),
    ("A2", "symbol decay certificate", 60.0, a2_decay),
    ("A3", "Gamma oracle for the pairing", 5.0, a3_gamma),
    ("A4", "flat-trace closed form", 5.0, a4_flat_trace),
    ("A5", "fixed-point formula", 600.0, a5_fixed_point_formula),
    ("A6", "kernel block support", 60.0, a6_kernel_support),
    ("A7", "integration by parts", 10.0, a7_integration_by_parts),
    ("A8", "pole structure", 60.0, a8_poles),
    ("A9", "conjugation invariance", 30.0, a9_conjugation),
];

pub fn ids() -> Vec<&'static str> {
    CRITERIA.iter().map(|c| c.0).collect()
}

/// Runs one criterion; a numerical error counts as a failure.
pub fn run(id: &str) -> Option<Outcome> {
    let &(id, title, budget, check) = CRITERIA.iter().find(|c| c.0.eq_ignore_ascii_case(id))?;
    let start = Instant::now();
    let (ok, detail) = match check() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let mut detail = detail;
    if seconds > budget {
        detail.push_str("; over the runtime budget");
    }
    Some(Outcome { id, title, passed: ok && seconds <= budget, detail, seconds, budget })
}

pub fn run_all() -> Vec<Outcome> {
    CRITERIA.iter().filter_map(|c| run(c.0)).collect()
}

fn torus_gauss(r: usize, width: f64) -> RapidDecayFunction {
    RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: r }, width)
}

fn borel_gauss() -> RapidDecayFunction {
    RapidDecayFunction::new(GroupKind::Borel, ProfileKind::GaussianLog, vec![0.0, 0.0], vec![0.3, 0.15])
        .expect("valid parameters")
}

fn toric_engine(r: usize, width: f64, w_max: f64) -> Result<SymbolEngine> {
    let m = ModelVariety::toric(SphericalRootSystem::standard(r));
    let p = build_partition_of_unity(&m, 0.5)?;
    Ok(SymbolEngine::new(m, torus_gauss(r, width), p, QuadSpec::default())?.with_toric_w_max(w_max))
}

pub fn a1_mellin() -> Result<(bool, String)> {
    let f = torus_gauss(1, 0.3);
    let roots = SphericalRootSystem::standard(1);
    let spec = QuadSpec::default();
    let grid = toric_symbol_grid(&f, &roots, toric_grid_spec(&f, &roots, 10.0, &spec)?, &spec)?;
    let t = InverseTransform::from_grid(&grid)?;
    let inside: Vec<f64> = (0..=390).map(|k| -3.0 + 0.01 * k as f64).collect();
    let outside: Vec<f64> = (0..=179).map(|k| 1.05 + 0.05 * k as f64).collect();
    let peak = inside.iter().map(|&v| mellin_oracle_r1(&f, v)).fold(0.0, f64::max);
    let mut worst_in = 0.0_f64;
    for &v in &inside {
        let got = 2.0 * PI * t.eval(&[v])?;
        worst_in = worst_in.max((got - mellin_oracle_r1(&f, v)).norm());
    }
    let mut worst_out = 0.0_f64;
    for &v in &outside {
        worst_out = worst_out.max((2.0 * PI * t.eval(&[v])?).norm());
    }
    let (a, b) = (worst_in / peak, worst_out / peak);
    Ok((a < 1e-4 && b < 1e-6, format!("profile error {a:.2e}·peak, lacunary tail {b:.2e}·peak")))
}

pub fn a2_decay() -> Result<(bool, String)> {
    let spec = QuadSpec::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for r in [1usize, 2] {
        let f = torus_gauss(r, 0.3);
        let roots = SphericalRootSystem::standard(r);
        let bases: [Vec<f64>; 3] = [vec![1.0; r], vec![2.0, -1.5][..r].to_vec(), vec![-1.5, 3.0][..r].to_vec()];
        for z in &bases {
            let mut samples = Vec::new();
            for xi in shell_grid(r, &DEFAULT_SHELLS) {
                let scaled: Vec<f64> = xi.iter().zip(z).map(|(a, b)| a * b).collect();
                samples.push((xi, f_spher_toric(&f, &roots, &scaled, &spec)?.value));
            }
            let cert = decay_certificate(&samples, 4);
            ok &= cert.passed();
            if !cert.passed() {
                notes.push(format!("toric r={r} z={z:?} fails at N={:?}", cert.first_failure()));
            }
        }
    }
    let f = borel_gauss();
    for x in [[0.0, 1.0], [0.5, -0.7], [-1.0, 2.0]] {
        let mut samples = Vec::new();
        for xi in shell_grid(2, &DEFAULT_SHELLS) {
            let v = f_spher_parabolic(&f, &x, &xi, &spec)?;
            ok &= v.in_z_star;
            samples.push((xi, v.estimate.value));
        }
        let cert = decay_certificate(&samples, 4);
        ok &= cert.passed();
        if !cert.passed() {
            notes.push(format!("parabolic x={x:?} fails at N={:?}", cert.first_failure()));
        }
    }
    let detail = if notes.is_empty() { "N=1..4 on 9 base points".to_string() } else { notes.join("; ") };
    Ok((ok, detail))
}

fn truncated_gaussian(u: f64) -> f64 {
    (-u * u).exp() * crate::cutoff::plateau(u.abs(), 5.0, 6.0)
}

pub fn a3_gamma() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for zeta in [1.0, 0.5, 0.0, -0.5, -0.9] {
        let got = zeta_pairing_1d(truncated_gaussian, C64::new(zeta, 0.0), SUBTRACTION_ORDER, 6.0)?;
        worst = worst.max((got - gamma((zeta + 1.0) / 2.0)).norm());
    }
    let l = laurent_at(truncated_gaussian, -1.0, 6.0, 2)?;
    let e1 = (l.coeff(-1) - 2.0).abs();
    let e0 = (l.finite_part() + EULER_MASCHERONI).abs();
    Ok((
        worst < 1e-8 && e1 < 1e-6 && e0 < 1e-6,
        format!("Γ error {worst:.1e}, S₋₁ error {e1:.1e}, S₀ error {e0:.1e}"),
    ))
}

pub fn a4_flat_trace() -> Result<(bool, String)> {
    let m = ModelVariety::projective_line();
    let t2 = flat_trace(&m, &GroupElement::diag(2.0, 1.0)?)?;
    let t4 = flat_trace(&m, &GroupElement::diag(4.0, 1.0)?)?;
    let rot = flat_trace(&m, &GroupElement::rotation(PI / 4.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    let mut checked = 0;
    while checked < 20 {
        let mut draw = || {
            GroupKind::Sl2.from_coords(&[rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0), rng.gen_range(-3.1..3.1)])
        };
        let (g, h) = (draw(), draw());
        let Ok(th) = flat_trace(&m, &h) else { continue };
        let c = g.mul(&h)?.mul(&g.inv())?;
        worst = worst.max((flat_trace(&m, &c)? - th).abs());
        checked += 1;
    }
    let ok = (t2 - 3.0).abs() < 1e-10 && (t4 - 5.0 / 3.0).abs() < 1e-10 && rot == 0.0 && worst < 1e-8;
    Ok((ok, format!("diag(2,1)→{t2:.12}, diag(4,1)→{t4:.12}, rotation→{}, conjugation {worst:.1e}", rot + 0.0)))
}

pub fn a5_fixed_point_formula() -> Result<(bool, String)> {
    let m = ModelVariety::projective_line();
    let bump =
        RapidDecayFunction::new(GroupKind::Sl2, ProfileKind::GaussianLogBump, vec![0.0, 0.5 * 2f64.ln(), 0.0], vec![0.05; 3])?;
    let spec = QuadSpec::default();
    let mass = integrate_group(&bump, &spec)?.value;
    let f = bump.with_amplitude(1.0 / mass);
    let p = build_partition_of_unity(&m, 0.5)?;
    let engine = SymbolEngine::new(m, f, p, spec)?;
    let rep = verify_fpf(&engine, &[0.0, -0.5], 0.02)?;
    let reg = rep.regularized.symbol_side;
    let conc = (reg - 3.0).abs() / 3.0;
    let rows: Vec<String> = rep
        .rows
        .iter()
        .chain(std::iter::once(&rep.regularized))
        .map(|r| format!("ζ={}: {:.6} vs {:.6} (gap {:.1e})", r.zeta, r.symbol_side, r.fixed_point_side, r.gap))
        .collect();
    Ok((rep.passed && conc < 0.03, format!("{}; Tr_reg vs 3 gap {:.2}%", rows.join(", "), 100.0 * conc)))
}

pub fn a6_kernel_support() -> Result<(bool, String)> {
    let e = toric_engine(2, 0.3, 24.0)?;
    let axis: Vec<f64> = (0..17).map(|k| -1.875 + 0.25 * k as f64).collect();
    let mut peak = 0.0_f64;
    let mut opposite = 0.0_f64;
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                for &d in &axis {
                    let k = e.kernel(0, &[a, b], &[c, d])?.value.abs();
                    peak = peak.max(k);
                    if a * c < 0.0 || b * d < 0.0 {
                        opposite = opposite.max(k);
                    }
                }
            }
        }
    }
    let rel = opposite / peak;
    Ok((rel < 1e-6, format!("max off-block |K| = {rel:.2e}·peak on 17⁴ points")))
}

/// Polynomial in the matrix entries, a partner of moderate growth.
fn entry_poly(g: &GroupElement) -> f64 {
    match g {
        GroupElement::Sl2(m) => m[(0, 0)] + 0.5 * m[(0, 1)] * m[(0, 1)] - m[(1, 0)] + 0.25 * m[(1, 1)],
        GroupElement::Torus(t) => t.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x + 1.0 / x).sum(),
        GroupElement::Pair(a, b) => a[(0, 1)] + b[(1, 0)] * b[(0, 0)],
    }
}

pub fn a7_integration_by_parts() -> Result<(bool, String)> {
    let cases = [
        (GroupKind::Torus { rank: 1 }, vec![0.3], 0.5, 24),
        (GroupKind::Torus { rank: 2 }, vec![0.3, -0.2], 0.5, 24),
        (GroupKind::Borel, vec![0.2, -0.1], 0.4, 24),
        (GroupKind::Sl2, vec![0.2, -0.1, 0.3], 0.4, 20),
    ];
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (kind, center, width, nodes) in cases {
        let f1 = RapidDecayFunction::new(kind, ProfileKind::GaussianLog, center, vec![width; kind.dim()])?;
        for x in kind.lie_basis() {
            let r = integration_by_parts(&f1, entry_poly, &x, nodes)?;
            worst = worst.max(r.residual.abs() / r.scale);
            count += 1;
        }
    }
    Ok((worst < 1e-6, format!("worst residual {worst:.1e}·scale over {count} directions")))
}

pub fn a8_poles() -> Result<(bool, String)> {
    let centers: Vec<f64> = (0..13).map(|k| -0.2 * k as f64).collect();
    let mut ok = true;
    let mut notes = Vec::new();
    let engines = [
        ("toric", toric_engine(1, 0.3, 16.0)?),
        ("parabolic", {
            let m = ModelVariety::parabolic();
            let p = build_partition_of_unity(&m, 0.5)?;
            SymbolEngine::new(m, borel_gauss(), p, QuadSpec::default())?
        }),
    ];
    for (name, e) in &engines {
        let profile = DiagonalProfile::build(e)?;
        let scan = scan_poles(&profile, &centers, 0.1, 1e-6)?;
        let found: Vec<f64> = scan.iter().filter(|s| s.singular).map(|s| s.center).collect();
        let at_minus_two = profile.tr_zeta(C64::new(-2.0, 0.0))?.value;
        ok &= found.len() == 1 && (found[0] + 1.0).abs() < 1e-9 && at_minus_two.re.is_finite();
        notes.push(format!("{name}: singular at {found:?}, Tr(-2) = {:.4}", at_minus_two.re));
    }
    Ok((ok, notes.join("; ")))
}

pub fn a9_conjugation() -> Result<(bool, String)> {
    let f = borel_gauss();
    let grid = shell_grid(2, &[1.0, 4.0]);
    let spec = QuadSpec::default();
    let mut worst = 0.0_f64;
    let mut moved = f64::INFINITY;
    for lambda in [2.0, 0.7, 1.5] {
        let s = GroupElement::Sl2(Mat2::new(lambda, 0.0, 0.0, 1.0 / lambda));
        for x in [[0.5, 1.0], [-0.3, -0.8]] {
            let rep = conjugation_invariance_residual(&f, &s, &x, &grid, &spec, None)?;
            worst = worst.max(rep.corrected);
            moved = moved.min(rep.literal / rep.scale);
        }
    }
    Ok((
        worst < 1e-8 && moved > 1e-3,
        format!("covariant residual {worst:.1e}, literal residual ≥ {moved:.1e}·scale"),
    ))
}
