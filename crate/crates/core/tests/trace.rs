use proptest::prelude::*;
use statrs::consts::EULER_MASCHERONI;
use statrs::function::gamma::gamma;
use wonderchar::cutoff::{plateau, smoothstep, Plateau};
use wonderchar::group::{GroupKind, RapidDecayFunction, SphericalRootSystem};
use wonderchar::quad::{composite_legendre, QuadSpec};
use wonderchar::symbol::SymbolEngine;
use wonderchar::trace::*;
use wonderchar::variety::{build_partition_of_unity, Bundle, ModelVariety, PartitionOfUnity};
use wonderchar::{Error, C64};

fn truncated_gaussian(u: f64) -> f64 {
    (-u * u).exp() * plateau(u.abs(), 5.0, 6.0)
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[test]
fn gamma_oracle_on_the_convergent_strip() {
    for zeta in [1.0, 0.5, 0.0, -0.5, -0.9] {
        let got = zeta_pairing_1d(truncated_gaussian, c(zeta), SUBTRACTION_ORDER, 6.0).unwrap();
        let want = gamma((zeta + 1.0) / 2.0);
        assert!((got.re - want).abs() < 1e-8, "ζ={zeta}: {} vs {want}", got.re);
        assert!(got.im.abs() < 1e-14);
    }
}

#[test]
fn gamma_oracle_past_the_first_pole() {
    for zeta in [-1.5, -2.0, -2.5, -3.5, -4.5] {
        let got = zeta_pairing_1d(truncated_gaussian, c(zeta), SUBTRACTION_ORDER, 6.0).unwrap();
        let want = gamma((zeta + 1.0) / 2.0);
        assert!((got.re - want).abs() < 1e-7 * want.abs().max(1.0), "ζ={zeta}: {} vs {want}", got.re);
    }
}

#[test]
fn poles_and_strip_are_reported() {
    for zeta in [-1.0, -3.0] {
        let r = zeta_pairing_1d(truncated_gaussian, c(zeta), SUBTRACTION_ORDER, 6.0);
        assert!(matches!(r, Err(Error::Pole(p)) if p == zeta), "{r:?}");
    }
    let r = zeta_pairing_1d(truncated_gaussian, c(-5.5), SUBTRACTION_ORDER, 6.0);
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn complex_zeta_matches_the_laurent_series_near_the_pole() {
    let l = laurent_at(truncated_gaussian, -1.0, 6.0, 6).unwrap();
    let z = C64::new(-1.05, 0.08);
    let direct = zeta_pairing_1d(truncated_gaussian, z, SUBTRACTION_ORDER, 6.0).unwrap();
    assert!((l.eval(z) - direct).norm() < 1e-8 * direct.norm());
}

#[test]
fn gaussian_laurent_coefficients() {
    let l = laurent_at(truncated_gaussian, -1.0, 6.0, 2).unwrap();
    assert_eq!(l.lowest, -1);
    assert!((l.coeff(-1) - 2.0).abs() < 1e-6);
    assert!((l.finite_part() + EULER_MASCHERONI).abs() < 1e-6);
    for zeta in [-0.9, -0.99] {
        let direct = zeta_pairing_1d(truncated_gaussian, c(zeta), SUBTRACTION_ORDER, 6.0).unwrap().re;
        assert!((l.eval(c(zeta)).re - direct).abs() < 1e-4 * direct.abs());
    }
}

#[test]
fn vanishing_density_has_no_pole() {
    let g = |u: f64| u * u * truncated_gaussian(u);
    let l = laurent_at(g, -1.0, 6.0, 2).unwrap();
    assert!(l.coeff(-1).abs() < 1e-8);
    // ⟨|u|^ζ, u² e^{-u²}⟩ = Γ((ζ+3)/2), regular at ζ = −1 with value 1.
    assert!((l.finite_part() - 1.0).abs() < 1e-6);
    let limit = zeta_pairing_1d(g, c(-1.0 + 1e-7), SUBTRACTION_ORDER, 6.0).unwrap().re;
    assert!((l.finite_part() - limit).abs() < 1e-6);
    let zero = laurent_at(|_| 0.0, -1.0, 6.0, 2).unwrap();
    assert!(zero.coeffs.iter().all(|c| *c == 0.0));
}

#[test]
fn finite_part_inverts_multiplication_by_abs_u() {
    let nodes = PairingNodes::new(6.0, &[0.5, 1.5]).unwrap();
    let phis: [fn(f64) -> f64; 3] = [
        |u| (-(u - 0.3) * (u - 0.3)).exp() * plateau(u.abs(), 5.0, 6.0),
        |u| (1.0 + u + u.powi(3)) * (-2.0 * u * u).exp(),
        |u| plateau(u.abs(), 0.5, 1.5),
    ];
    let fine = composite_legendre(&(0..=48).map(|k| -6.0 + 0.25 * k as f64).collect::<Vec<_>>(), 16);
    for phi in phis {
        // ⟨|u|^ζ, |u|φ⟩ = ⟨|u|^{ζ+1}, φ⟩: expand the latter about ζ + 1 = 0.
        let values: Vec<f64> = nodes.nodes.iter().map(|&u| phi(u)).collect();
        let l = nodes.laurent(&values, 0.0, SUBTRACTION_ORDER, 2).unwrap();
        let want: f64 = fine.nodes.iter().zip(&fine.weights).map(|(&u, &w)| w * phi(u)).sum();
        assert!(l.coeff(-1).abs() < 1e-12);
        assert!((l.finite_part() - want).abs() < 1e-8, "{} vs {want}", l.finite_part());
    }
}

/// ⟨|u|^ζ, α⟩ for a plateau α, continued via integration by parts:
/// −2/(ζ+1) ∫ u^{ζ+1} α'(u) du over the transition band.
fn plateau_pairing(p: Plateau, zeta: f64) -> f64 {
    let rule = composite_legendre(&[p.inner, 0.5 * (p.inner + p.outer), p.outer], 24);
    let h = p.outer - p.inner;
    let j: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&u, &w)| {
            let x = (u - p.inner) / h;
            let d = -30.0 * x * x * (1.0 - x) * (1.0 - x) / h;
            w * u.powf(zeta + 1.0) * d
        })
        .sum();
    -2.0 / (zeta + 1.0) * j
}

fn plateau_laurent(p: Plateau) -> (f64, f64) {
    let rule = composite_legendre(&[p.inner, 0.5 * (p.inner + p.outer), p.outer], 24);
    let h = p.outer - p.inner;
    let jp: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&u, &w)| {
            let x = (u - p.inner) / h;
            w * u.ln() * (-30.0 * x * x * (1.0 - x) * (1.0 - x) / h)
        })
        .sum();
    (2.0, -2.0 * jp)
}

fn toric_engine(r: usize, alpha: Plateau, f: RapidDecayFunction) -> SymbolEngine {
    let m = ModelVariety::toric(SphericalRootSystem::standard(r));
    let p = PartitionOfUnity::single(vec![alpha; r], 0.5);
    SymbolEngine::new(m, f, p, QuadSpec::default()).unwrap()
}

#[test]
fn plateau_oracle_is_consistent() {
    let p = Plateau::new(0.5, 1.5);
    assert!((plateau_pairing(p, 0.0) - p.mass()).abs() < 1e-12);
    assert!(smoothstep(0.5) == 0.5);
}

#[test]
fn toric_rank_one_trace() {
    let alpha = Plateau::new(0.5, 1.5);
    let f = RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: 1 }, 1.0);
    let fe = f.eval_coords(&[0.0]);
    let e = toric_engine(1, alpha, f);
    let profile = DiagonalProfile::build(&e).unwrap();
    let t0 = profile.tr_zeta(c(0.0)).unwrap();
    assert!((t0.value.re - 2.0 * fe).abs() < 1e-10, "{}", t0.value);
    for zeta in [-0.5, -2.0, -2.5, -3.5] {
        let t = profile.tr_zeta(c(zeta)).unwrap();
        let want = fe * plateau_pairing(alpha, zeta);
        assert!(t.value.re.is_finite());
        assert!((t.value.re - want).abs() < 1e-9 * want.abs().max(1.0), "ζ={zeta}: {} vs {want}", t.value.re);
    }
    let res = tr_reg(&e).unwrap();
    let (s_m1, s0) = plateau_laurent(alpha);
    assert!((res.laurent.coeff(-1) - fe * s_m1).abs() < 1e-8);
    assert!((res.tr_reg - fe * s0).abs() < 1e-8);
}

#[test]
fn toric_rank_two_trace_factorizes() {
    let alpha = Plateau::new(0.5, 1.5);
    let f = RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: 2 }, 0.5);
    let fe = f.eval_coords(&[0.0, 0.0]);
    let e = toric_engine(2, alpha, f);
    let profile = DiagonalProfile::build(&e).unwrap();
    for zeta in [0.0, -0.5, -2.0] {
        let want = fe * plateau_pairing(alpha, zeta).powi(2);
        let got = profile.tr_zeta(c(zeta)).unwrap().value.re;
        assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "ζ={zeta}: {got} vs {want}");
    }
    let (l, per) = profile.laurent(2).unwrap();
    let (a, b) = plateau_laurent(alpha);
    assert_eq!(l.lowest, -2);
    assert!((l.coeff(-2) - fe * a * a).abs() < 1e-8);
    assert!((l.coeff(-1) - fe * 2.0 * a * b).abs() < 1e-8);
    assert!((l.finite_part() - per.iter().map(|(_, s)| s.finite_part()).sum::<f64>()).abs() < 1e-10);
    for zeta in [-0.9, -0.99] {
        let direct = profile.tr_zeta(c(zeta)).unwrap().value.re;
        assert!((l.eval(c(zeta)).re - direct).abs() < 1e-4 * direct.abs());
    }
}

#[test]
fn zero_function_has_zero_trace() {
    let e = toric_engine(1, Plateau::new(0.5, 1.5), RapidDecayFunction::zero(GroupKind::Torus { rank: 1 }));
    let profile = DiagonalProfile::build(&e).unwrap();
    for zeta in [0.0, -0.5, -2.0] {
        assert_eq!(profile.tr_zeta(c(zeta)).unwrap().value, c(0.0));
    }
    let res = tr_reg(&e).unwrap();
    assert_eq!(res.tr_reg, 0.0);
    assert!(res.laurent.coeffs.iter().all(|c| *c == 0.0));
}

#[test]
fn parabolic_trace_is_product_of_cutoff_masses() {
    let m = ModelVariety::parabolic();
    let p = build_partition_of_unity(&m, 0.5).unwrap();
    let f = RapidDecayFunction::gaussian_log(GroupKind::Borel, 0.3);
    let fe = f.eval_coords(&[0.0, 0.0]);
    let alpha = p.pieces[0].alpha.clone();
    let e = SymbolEngine::new(m, f, p, QuadSpec::default()).unwrap();
    let profile = DiagonalProfile::build(&e).unwrap();
    for zeta in [0.0, -0.5, -2.0] {
        let want = fe / 2.0 * alpha[0].mass() * plateau_pairing(alpha[1], zeta);
        let got = profile.tr_zeta(c(zeta)).unwrap().value.re;
        assert!((got - want).abs() < 1e-9 * want.abs(), "ζ={zeta}: {got} vs {want}");
    }
}

#[test]
fn per_chart_contributions_sum_to_total() {
    let m = ModelVariety::projective_line().with_bundle(Bundle::Trivial { d: 2 });
    let p = build_partition_of_unity(&m, 0.5).unwrap();
    let f = RapidDecayFunction::gaussian_log(GroupKind::Sl2, 0.2);
    let e = SymbolEngine::new(m, f, p, QuadSpec::default()).unwrap();
    let profile = DiagonalProfile::build(&e).unwrap();
    assert_eq!(profile.shift, 1);
    let t = profile.tr_zeta(c(-0.5)).unwrap();
    assert_eq!(t.per_chart.len(), 2);
    let sum: C64 = t.per_chart.iter().map(|(_, v)| v).sum();
    assert!((sum - t.value).norm() < 1e-10 * t.value.norm().max(1.0));
    let (l, per) = profile.laurent(2).unwrap();
    let s: f64 = per.iter().map(|(_, s)| s.finite_part()).sum();
    assert!((s - l.finite_part()).abs() < 1e-10);
}

#[test]
fn toric_poles_only_at_minus_one() {
    let e = toric_engine(
        1,
        Plateau::new(0.5, 1.5),
        RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: 1 }, 1.0),
    );
    let profile = DiagonalProfile::build(&e).unwrap();
    let centers: Vec<f64> = (0..12).map(|k| -2.75 + 0.25 * k as f64).collect();
    let scan = scan_poles(&profile, &centers, 0.1, 1e-6).unwrap();
    for s in &scan {
        assert_eq!(s.singular, (s.center + 1.0).abs() < 1e-12, "{s:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pole_datum_is_twice_the_value_at_zero(a in -1.0f64..1.0, b in -1.0f64..1.0, shift in -0.5f64..0.5) {
        let g = move |u: f64| (a + b * u + u * u) * (-(u - shift) * (u - shift)).exp() * plateau(u.abs(), 5.0, 6.0);
        let l = laurent_at(g, -1.0, 6.0, 1).unwrap();
        prop_assert!((l.coeff(-1) - 2.0 * g(0.0)).abs() < 1e-8);
    }

    #[test]
    fn pairing_is_linear(a in -2.0f64..2.0, zeta in -2.8f64..0.8) {
        prop_assume!((zeta + 1.0).abs() > 1e-3);
        let g1 = |u: f64| truncated_gaussian(u);
        let g2 = |u: f64| u * u * truncated_gaussian(u) * (1.0 + u).cos();
        let lhs = zeta_pairing_1d(|u| g1(u) + a * g2(u), c(zeta), SUBTRACTION_ORDER, 6.0).unwrap();
        let rhs = zeta_pairing_1d(g1, c(zeta), SUBTRACTION_ORDER, 6.0).unwrap()
            + zeta_pairing_1d(g2, c(zeta), SUBTRACTION_ORDER, 6.0).unwrap() * a;
        prop_assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
    }
}
