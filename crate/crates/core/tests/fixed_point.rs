use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wonderchar::fixed_point::*;
use wonderchar::group::{integrate_group, rot, GroupElement, GroupKind, Mat2, ProfileKind, RapidDecayFunction, SphericalRootSystem};
use wonderchar::quad::QuadSpec;
use wonderchar::variety::{build_partition_of_unity, Bundle, ModelVariety, Point};
use wonderchar::Error;

fn diag(a: f64, d: f64) -> GroupElement {
    GroupElement::diag(a, d).unwrap()
}

fn random_sl2(rng: &mut ChaCha8Rng) -> GroupElement {
    let kind = GroupKind::Sl2;
    let x = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0), rng.gen_range(-3.1..3.1)];
    kind.from_coords(&x)
}

#[test]
fn projective_line_diagonal_elements() {
    let m = ModelVariety::projective_line();
    let set = find_fixed_points(&m, &diag(2.0, 1.0)).unwrap();
    assert_eq!(set.records.len(), 2);
    let mut labels: Vec<&str> = set.records.iter().map(|r| r.label.as_str()).collect();
    labels.sort();
    assert_eq!(labels, ["w", "z"]);
    for r in &set.records {
        assert!(r.y[0].abs() < 1e-12, "{r:?}");
        let want = if r.label == "z" { 0.5 } else { 2.0 };
        assert!((r.dphi[(0, 0)] - want).abs() < 1e-12);
    }
    let t = is_transversal(&m, &diag(2.0, 1.0), TRANSVERSALITY_EPS).unwrap();
    assert!(t.transversal);
    assert!((t.margin.unwrap() - 0.5).abs() < 1e-12);
    assert!((flat_trace(&m, &diag(2.0, 1.0)).unwrap() - 3.0).abs() < 1e-10);
    assert!((flat_trace(&m, &diag(4.0, 1.0)).unwrap() - 5.0 / 3.0).abs() < 1e-10);
    assert!((set.flat_trace().unwrap() - 3.0).abs() < 1e-10);
}

#[test]
fn identity_and_rotation() {
    let m = ModelVariety::projective_line();
    let id = GroupKind::Sl2.identity();
    assert!(!is_transversal(&m, &id, TRANSVERSALITY_EPS).unwrap().transversal);
    assert!(matches!(flat_trace(&m, &id), Err(Error::Precondition(_))));
    let rot = GroupElement::rotation(std::f64::consts::FRAC_PI_4);
    let set = find_fixed_points(&m, &rot).unwrap();
    assert!(set.records.is_empty() && set.transversal);
    assert_eq!(set.note.as_deref(), Some("no fixed points"));
    assert_eq!(flat_trace(&m, &rot).unwrap(), 0.0);
}

#[test]
fn parabolic_element_is_not_transversal() {
    let m = ModelVariety::projective_line();
    let g = GroupElement::Sl2(Mat2::new(1.0, 1.0, 0.0, 1.0));
    assert!(!is_transversal(&m, &g, TRANSVERSALITY_EPS).unwrap().transversal);
}

#[test]
fn line_bundle_traces() {
    for k in [-2, -1, 1, 3] {
        let m = ModelVariety::projective_line().with_bundle(Bundle::Line { k });
        // dΦ = 1/2 at [0:1] and 2 at [1:0]; the fibre map is dΦ^k.
        let want = 0.5f64.powi(k) / 0.5 + 2f64.powi(k) / 1.0;
        assert!((flat_trace(&m, &diag(2.0, 1.0)).unwrap() - want).abs() < 1e-10 * want);
        let set = find_fixed_points(&m, &diag(2.0, 1.0)).unwrap();
        assert!((set.flat_trace().unwrap() - want).abs() < 1e-10 * want);
    }
}

#[test]
fn projective_three_space() {
    let m = ModelVariety::pgl2();
    let g = GroupElement::pair_from_gl(Mat2::new(2.0, 0.0, 0.0, 1.0), Mat2::new(3.0, 0.0, 0.0, 1.0)).unwrap();
    let set = find_fixed_points(&m, &g).unwrap();
    assert_eq!(set.records.len(), 4);
    // m ↦ g₁ m g₂⁻¹ scales the entry (i, j) by λ_i/μ_j.
    let eig = [2.0 / 3.0, 2.0, 1.0 / 3.0, 1.0];
    for rec in &set.records {
        let v = &rec.point.0;
        let k = (0..4).max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap()).unwrap();
        assert!((v[k].abs() - 1.0).abs() < 1e-10, "{v:?}");
        let want: f64 = (0..4).filter(|&j| j != k).map(|j| 1.0 - eig[k] / eig[j]).product();
        assert!((rec.det - want).abs() < 1e-8 * want.abs().max(1.0), "{} vs {want}", rec.det);
        let mut ev: Vec<f64> = rec.dphi.clone().eigenvalues().unwrap().iter().copied().collect();
        let mut ratios: Vec<f64> = (0..4).filter(|&j| j != k).map(|j| eig[k] / eig[j]).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip(&ratios) {
            assert!((a - b).abs() < 1e-8);
        }
    }
    assert!(set.transversal);
}

#[test]
fn toric_and_parabolic_fixed_points() {
    let m = ModelVariety::toric(SphericalRootSystem::standard(2));
    let g = GroupElement::Torus(vec![2.0, 0.25]);
    let set = find_fixed_points(&m, &g).unwrap();
    assert_eq!(set.records.len(), 1);
    let want = 1.0 / ((1.0 - 0.5) * (1.0 - 4.0f64)).abs();
    assert!((set.flat_trace().unwrap() - want).abs() < 1e-12);
    assert!(!find_fixed_points(&m, &GroupElement::Torus(vec![1.0, 3.0])).unwrap().transversal);

    let m = ModelVariety::parabolic();
    let (a, b) = (1.5, 0.7);
    let g = GroupElement::Sl2(Mat2::new(a, b, 0.0, 1.0 / a));
    let set = find_fixed_points(&m, &g).unwrap();
    assert_eq!(set.records.len(), 1);
    let p = b / (1.0 / a - a);
    assert!((set.records[0].y[0] - p).abs() < 1e-10 && set.records[0].y[1].abs() < 1e-12);
    let c = 1.0 / (a * a);
    assert!((set.flat_trace().unwrap() - 1.0 / ((1.0 - c) * (1.0 - c))).abs() < 1e-10);
    let shear = GroupElement::Sl2(Mat2::new(1.0, 0.4, 0.0, 1.0));
    assert!(find_fixed_points(&m, &shear).unwrap().records.is_empty());
}

#[test]
fn conjugation_covariance() {
    let m = ModelVariety::projective_line();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 20 {
        let g = random_sl2(&mut rng);
        let h = random_sl2(&mut rng);
        let Ok(th) = flat_trace(&m, &h) else { continue };
        let c = g.inv().mul(&h).unwrap().mul(&g).unwrap();
        assert!((flat_trace(&m, &c).unwrap() - th).abs() < 1e-8);
        // g·x ∈ Fix(h) ⟺ x ∈ Fix(g⁻¹hg)
        let fh = find_fixed_points(&m, &h).unwrap();
        let fc = find_fixed_points(&m, &c).unwrap();
        assert_eq!(fh.records.len(), fc.records.len());
        for r in &fc.records {
            let gx = m.act(&g, &r.point).unwrap();
            assert!(fh.records.iter().any(|s| m.point_distance(&s.point, &gx) < 1e-8));
        }
        checked += 1;
    }
}

#[test]
fn margin_is_chart_independent() {
    let m = ModelVariety::projective_line();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 10 {
        let h = random_sl2(&mut rng);
        let set = find_fixed_points(&m, &h).unwrap();
        for r in &set.records {
            let y0 = m.phi_inv(0, &r.point).unwrap();
            let y1 = m.phi_inv(1, &r.point).unwrap();
            if let (Some(a), Some(b)) = (y0, y1) {
                let d0 = 1.0 - m.dphi_chart(&h, 0, &a).unwrap()[(0, 0)];
                let d1 = 1.0 - m.dphi_chart(&h, 1, &b).unwrap()[(0, 0)];
                assert!((d0.abs() - d1.abs()).abs() < 1e-8 * d0.abs().max(1.0));
                checked += 1;
            }
        }
    }
}

fn normalized_bump(center: Vec<f64>, width: f64) -> RapidDecayFunction {
    let f = RapidDecayFunction::new(GroupKind::Sl2, ProfileKind::GaussianLogBump, center, vec![width; 3]).unwrap();
    let mass = integrate_group(&f, &QuadSpec::default()).unwrap().value;
    f.with_amplitude(1.0 / mass)
}

#[test]
fn fixed_point_side_at_minus_one() {
    let m = ModelVariety::projective_line();
    let f = normalized_bump(vec![0.0, 0.5 * 2f64.ln(), 0.0], 0.05);
    let p1 = build_partition_of_unity(&m, 0.5).unwrap();
    let p2 = build_partition_of_unity(&m, 0.3).unwrap();
    let spec = QuadSpec::default();
    let a = tr_zeta_fixed_point(&m, &f, -1.0, &p1, &spec).unwrap().value;
    let b = tr_zeta_fixed_point(&m, &f, -1.0, &p2, &spec).unwrap().value;
    assert!((a - b).abs() < 1e-8 * a.abs(), "{a} vs {b}");
    assert!((a - 3.0).abs() < 0.03 * 3.0, "{a}");
    // At ζ = -1 the weight is 1, leaving ∫ f·Tr♭ with Tr♭(h) = |tr h|/√(tr²h − 4)
    // on hyperbolic h and 0 on elliptic h.
    let flat = |g: &GroupElement| {
        let GroupElement::Sl2(m) = g else { unreachable!() };
        let t = m.trace();
        if t.abs() > 2.0 { t.abs() / (t * t - 4.0).sqrt() } else { 0.0 }
    };
    let direct: f64 = f.nodes(&[48]).iter().map(|n| n.weight * n.f * flat(&n.g)).sum();
    assert!((a - direct).abs() < 1e-8 * a.abs());
}

#[test]
fn fixed_point_side_gates() {
    let m = ModelVariety::projective_line();
    let p = build_partition_of_unity(&m, 0.5).unwrap();
    let zero = RapidDecayFunction::zero(GroupKind::Sl2);
    assert_eq!(tr_zeta_fixed_point(&m, &zero, 0.0, &p, &QuadSpec::default()).unwrap().value, 0.0);
    let at_identity = RapidDecayFunction::gaussian_log(GroupKind::Sl2, 0.2);
    let r = tr_zeta_fixed_point(&m, &at_identity, 0.0, &p, &QuadSpec::with_nodes(vec![25]));
    assert!(matches!(r, Err(Error::Precondition(_))), "{r:?}");
    let f = normalized_bump(vec![0.0, 0.5 * 2f64.ln(), 0.0], 0.05);
    assert!(matches!(tr_zeta_fixed_point(&m, &f, -1.5, &p, &QuadSpec::default()), Err(Error::Precondition(_))));
}

#[test]
fn newton_route_records_points_in_chart_domain() {
    let m = ModelVariety::projective_line();
    let g = GroupElement::sl2_from_gl(Mat2::new(3.0, 1.0, 1.0, 1.0)).unwrap();
    let set = find_fixed_points(&m, &g).unwrap();
    assert_eq!(set.records.len(), 2);
    for r in &set.records {
        let back = m.phi(r.chart, &r.y).unwrap();
        let moved = m.phi_map(&g, &back).unwrap();
        assert!(m.point_distance(&moved, &Point(back.0.clone())) < 1e-10);
    }
}

#[test]
fn fixed_point_coordinates_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let a: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let b: f64 = (a + rng.gen_range(0.2..2.9)).rem_euclid(std::f64::consts::PI);
        let s: f64 = rng.gen_range(0.05..2.0);
        let m = weyl_element(sign, a, b, s);
        assert!((m.determinant() - 1.0).abs() < 1e-12);
        let (sg, a2, b2, s2) = weyl_coords(&m).unwrap();
        let ang = |x: f64, y: f64| {
            let d = (x - y).rem_euclid(std::f64::consts::PI);
            d.min(std::f64::consts::PI - d)
        };
        assert_eq!(sg, sign);
        assert!(ang(a, a2) < 1e-9 && ang(b, b2) < 1e-9 && (s - s2).abs() < 1e-10);
    }
    assert!(weyl_coords(&rot(0.3)).is_none());
}

#[test]
fn fixed_point_coordinate_density_matches_jacobian() {
    // |∂(u, t, θ)/∂(a, b, s)| times the Haar density in group coordinates.
    let kind = GroupKind::Sl2;
    let coords = |p: [f64; 3]| kind.coords(&GroupElement::Sl2(weyl_element(1.0, p[0], p[1], p[2]))).unwrap();
    for p in [[0.1, 1.4, 0.4], [0.7, 2.9, 1.1], [2.0, 0.3, 0.25]] {
        let h = 1e-6;
        let mut jac = nalgebra::Matrix3::zeros();
        for c in 0..3 {
            let (mut pp, mut pm) = (p, p);
            pp[c] += h;
            pm[c] -= h;
            let (xp, xm) = (coords(pp), coords(pm));
            for r in 0..3 {
                let mut d = xp[r] - xm[r];
                if r == 2 {
                    d = (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
                }
                jac[(r, c)] = d / (2.0 * h);
            }
        }
        let fd = jac.determinant().abs() * kind.haar_density(&coords(p));
        let want = weyl_density(p[0], p[1], p[2]);
        assert!((fd - want).abs() < 1e-7 * want, "{fd} vs {want}");
    }
}

#[test]
fn fixed_point_routes_agree_at_minus_one() {
    let f = normalized_bump(vec![0.3, 1.0, 0.1], 0.05);
    for bundle in [Bundle::Trivial { d: 1 }, Bundle::Line { k: 1 }, Bundle::Line { k: -2 }] {
        let m = ModelVariety::projective_line().with_bundle(bundle);
        let p = build_partition_of_unity(&m, 0.5).unwrap();
        let spec = QuadSpec::default();
        let a = tr_zeta_fixed_point_weyl(&m, &f, -1.0, &p, &spec).unwrap().value;
        let b = tr_zeta_fixed_point_haar(&m, &f, -1.0, &p, &spec).unwrap().value;
        assert!((a - b).abs() < 1e-8 * a.abs(), "{bundle:?}: {a} vs {b}");
    }
}

#[test]
fn haar_route_drifts_toward_the_fixed_point_coordinate_value() {
    let m = ModelVariety::projective_line();
    let f = normalized_bump(vec![0.0, 0.5 * 2f64.ln(), 0.0], 0.05);
    let p = build_partition_of_unity(&m, 0.5).unwrap();
    let exact = tr_zeta_fixed_point_weyl(&m, &f, -0.5, &p, &QuadSpec::default()).unwrap().value;
    let mut prev = f64::INFINITY;
    for n in [16, 32, 64] {
        let spec = QuadSpec { nodes: vec![n], max_refinements: 1, tol: 1e9, abs_floor: 1.0 };
        let v = tr_zeta_fixed_point_haar(&m, &f, -0.5, &p, &spec).unwrap().value;
        let gap = (v - exact).abs();
        assert!(gap < prev, "n={n}: gap {gap}");
        prev = gap;
    }
    assert!(prev < 5e-3 * exact);
}
