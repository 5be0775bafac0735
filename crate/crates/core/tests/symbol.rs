use std::f64::consts::PI;
use wonderchar::group::{GroupKind, ProfileKind, RapidDecayFunction, SphericalRootSystem};
use wonderchar::quad::{gauss_legendre, QuadSpec};
use wonderchar::symbol::*;
use wonderchar::variety::{build_partition_of_unity, Bundle, ModelVariety};
use wonderchar::{Error, C64};

fn toric_engine(r: usize, width: f64, w_max: f64) -> SymbolEngine {
    let m = ModelVariety::toric(SphericalRootSystem::standard(r));
    let f = RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: r }, width);
    let p = build_partition_of_unity(&m, 0.5).unwrap();
    SymbolEngine::new(m, f, p, QuadSpec::default()).unwrap().with_toric_w_max(w_max)
}

fn parabolic_engine() -> SymbolEngine {
    let m = ModelVariety::parabolic();
    let f = RapidDecayFunction::new(GroupKind::Borel, ProfileKind::GaussianLog, vec![0.0, 0.0], vec![0.3, 0.15]).unwrap();
    let p = build_partition_of_unity(&m, 0.5).unwrap();
    SymbolEngine::new(m, f, p, QuadSpec::with_nodes(vec![64])).unwrap()
}

fn p1_engine(bundle: Bundle, width: f64) -> SymbolEngine {
    let m = ModelVariety::projective_line().with_bundle(bundle);
    let f = RapidDecayFunction::new(
        GroupKind::Sl2,
        ProfileKind::GaussianLogBump,
        vec![0.1, 0.5 * 2f64.ln(), 0.05],
        vec![width; 3],
    )
    .unwrap();
    let p = build_partition_of_unity(&m, 0.5).unwrap();
    SymbolEngine::new(m, f, p, QuadSpec::with_nodes(vec![16])).unwrap()
}

#[test]
fn toric_inverse_transform_matches_mellin_profile() {
    let e = toric_engine(1, 0.3, 10.0);
    let crate_roots = SphericalRootSystem::standard(1);
    let spec = toric_grid_spec(&e.f, &crate_roots, 10.0, &e.spec).unwrap();
    let grid = toric_symbol_grid(&e.f, &crate_roots, spec, &e.spec).unwrap();
    let t = InverseTransform::from_grid(&grid).unwrap();
    let vs: Vec<f64> = (0..=390).map(|k| -3.0 + 0.01 * k as f64).chain((0..=179).map(|k| 1.05 + 0.05 * k as f64)).collect();
    let peak = vs.iter().map(|&v| mellin_oracle_r1(&e.f, v)).fold(0.0, f64::max);
    let mut worst = 0.0_f64;
    for &v in &vs {
        let got = 2.0 * PI * t.eval(&[v]).unwrap();
        worst = worst.max((got - mellin_oracle_r1(&e.f, v)).norm());
    }
    assert!(worst < 1e-4 * peak, "worst {worst} vs peak {peak}");
}

#[test]
fn toric_routes_agree_on_the_diagonal() {
    for r in [1, 2] {
        let e = toric_engine(r, 0.3, 10.0);
        let y = vec![0.7; r];
        let fft = e.inverse_auxiliary(0, &y, &vec![0.0; r]).unwrap().value;
        let exact = e.regular_profile(0, &y).unwrap().value;
        assert!((fft - 1.0).abs() < 1e-6, "r={r} fft {fft}");
        assert_eq!(exact, 1.0);
    }
}

#[test]
fn toric_kernel_matches_direct_formula() {
    let e = toric_engine(1, 0.3, 24.0);
    for (z, z2) in [(1.0, 0.8), (0.5, 0.6), (-1.5, -1.2), (2.0, 2.9)] {
        let got = e.kernel(0, &[z], &[z2]).unwrap().value;
        let want = e.f.eval_coords(&[(z / z2).ln()]) / f64::abs(z2);
        assert!((got - want).abs() < 1e-6, "K({z},{z2}) = {got}, want {want}");
    }
    let opposite = e.kernel(0, &[1.0], &[-1.0]).unwrap().value;
    assert!(opposite.abs() < 1e-7);
    assert!(matches!(e.kernel(0, &[0.0], &[1.0]), Err(Error::SingularLocus(_))));
}

#[test]
fn parabolic_band_limited_diagonal_is_half_the_identity_value() {
    let e = parabolic_engine();
    let want = e.f.eval_coords(&[0.0, 0.0]) / 2.0;
    for p in [0.0, 0.7, -1.3] {
        let got = e.inverse_auxiliary(0, &[p, 2.0], &[0.0, 0.0]).unwrap();
        assert!((got.value - want).abs() < 1e-4 * want, "p={p}: {} vs {want} (err {})", got.value, got.error);
        assert_eq!(e.regular_profile(0, &[p, 2.0]).unwrap().value, want);
    }
    let d = e.diagonal_density(0, &[0.3, -0.5]).unwrap();
    assert!((d[0].value - want / 0.5).abs() < 1e-14);
}

#[test]
fn parabolic_auxiliary_symbol_is_z_independent() {
    let e = parabolic_engine();
    let xi = [1.5, -2.0];
    let a = e.auxiliary_symbol(0, &[0.4, 1.0], &xi).unwrap().value;
    let b = e.auxiliary_symbol(0, &[0.4, 0.0], &xi).unwrap().value;
    let c = e.pushforward(0, &[0.4, -3.0], 2, true).unwrap().fourier(&xi);
    assert!((a - b).norm() < 1e-14);
    assert!((a - c).norm() < 1e-8, "{a} vs {c}");
}

#[test]
fn projective_line_routes_agree() {
    for bundle in [Bundle::Trivial { d: 1 }, Bundle::Line { k: -2 }, Bundle::Line { k: 1 }] {
        let e = p1_engine(bundle, 0.2);
        for piece in 0..2 {
            for y in [0.0, 0.15, -0.4, 0.9] {
                let exact = e.regular_profile(piece, &[y]).unwrap();
                let bl = e.band_limited(piece, &[y], &[y], false).unwrap();
                let tol = 5e-3 * exact.value.abs().max(1e-3);
                assert!(
                    (exact.value - bl.value).abs() < tol,
                    "{bundle:?} piece {piece} y={y}: fixed-set {} vs band-limited {} ± {}",
                    exact.value,
                    bl.value,
                    bl.error
                );
            }
        }
    }
}

#[test]
fn projective_line_symbol_needs_nonzero_boundary_for_tilde() {
    let e = p1_engine(Bundle::Trivial { d: 1 }, 0.2);
    assert!(matches!(e.auxiliary_symbol(0, &[0.0], &[1.0]), Err(Error::UndefinedRatio(0))));
    let q = e.symbol(0, &[0.3], &[0.0]).unwrap().value;
    let mass: f64 = e.pushforward(0, &[0.3], 2, false).unwrap().weights.iter().sum();
    assert!((q.re - mass).abs() < 1e-8);
}

#[test]
fn band_limited_density_is_the_truncated_xi_integral() {
    let pf = PushForward { dim: 1, points: vec![-0.3, 0.1, 0.45], weights: vec![0.5, -1.2, 2.0] };
    let r = 7.0;
    let a = 0.2;
    let rule = gauss_legendre(200);
    let mut acc = C64::new(0.0, 0.0);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let xi = r * x;
        acc += pf.fourier(&[xi]) * C64::from_polar(1.0, -a * xi) * (w * r);
    }
    let want = acc.re / (2.0 * PI);
    assert!((pf.density(&[a], &[r]) - want).abs() < 1e-12);
    assert!(acc.im.abs() < 1e-10);
}

#[test]
fn lacunarity_of_pure_exponentials() {
    let spec = GridSpec::new(40.0, 0.1).unwrap();
    let t_grid: Vec<f64> = (0..60).map(|k| -3.0 + 0.05 * k as f64).collect();
    let plus = LacunarySymbolGrid::from_fn(vec![1.0], 1, spec, |xi| Ok(C64::from_polar(1.0, 2.0 * xi[0]))).unwrap();
    let minus = LacunarySymbolGrid::from_fn(vec![1.0], 1, spec, |xi| Ok(C64::from_polar(1.0, -2.0 * xi[0]))).unwrap();
    let rp = lacunarity_check(&plus, &t_grid, 1e-6).unwrap();
    let rm = lacunarity_check(&minus, &t_grid, 1e-6).unwrap();
    assert!(rp.windowed && rm.windowed);
    assert!(rp.passed, "{rp:?}");
    assert!(!rm.passed, "{rm:?}");
    assert!((rm.worst_t + 1.0).abs() < 0.06, "{rm:?}");
}

#[test]
fn lacunarity_of_toric_symbol_and_aliasing_guard() {
    let e = toric_engine(2, 0.3, 10.0);
    let roots = SphericalRootSystem::standard(2);
    let spec = toric_grid_spec(&e.f, &roots, 10.0, &e.spec).unwrap();
    let grid = toric_symbol_grid(&e.f, &roots, spec, &e.spec).unwrap();
    let t_grid: Vec<f64> = (0..60).map(|k| -3.0 + 0.049 * k as f64).collect();
    let rep = lacunarity_check(&grid, &t_grid, 1e-6).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(!rep.windowed);
    let coarse = LacunarySymbolGrid::from_fn(vec![1.0], 1, GridSpec::new(40.0, 1.0).unwrap(), |_| Ok(C64::new(1.0, 0.0))).unwrap();
    assert!(matches!(lacunarity_check(&coarse, &t_grid, 1e-6), Err(Error::Aliasing(_))));
}

#[test]
fn decay_certificate_on_grid() {
    let e = toric_engine(1, 0.3, 10.0);
    let roots = SphericalRootSystem::standard(1);
    let spec = toric_grid_spec(&e.f, &roots, 10.0, &e.spec).unwrap();
    let mut grid = toric_symbol_grid(&e.f, &roots, spec, &e.spec).unwrap();
    grid.certify(4);
    assert!(grid.certificate.as_ref().unwrap().passed());
}
