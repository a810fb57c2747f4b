use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use hsrecon_core::fixtures::Gaussian;
use hsrecon_core::inversion::{invert, laplacian_apply};
use hsrecon_core::potential::{potential_grid_direct, PotentialField, Provenance};
use hsrecon_core::*;

fn unit(v: Vec<f64>) -> Option<Vector> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    (n > 1e-3).then(|| Vector::new(v.iter().map(|c| c / n).collect()))
}

fn arb_unit(n: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-1.0f64..1.0, n).prop_filter_map("zero", unit)
}

fn arb_measure(n: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::collection::vec(-3.0f64..3.0, n), 0.0f64..2.0), 1..8).prop_map(move |atoms| {
        let (pts, ws): (Vec<_>, Vec<_>) = atoms.into_iter().map(|(p, w)| (Vector::new(p), w)).unzip();
        DiscreteMeasure::new(pts, ws).unwrap()
    })
}

/// Random rotation from Gram–Schmidt on Gaussian columns.
fn rotation(n: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len > 1e-6 {
            q.push(v.into_iter().map(|c| c / len).collect());
        }
    }
    q
}

fn apply(q: &[Vec<f64>], x: &Vector) -> Vector {
    Vector::new(q.iter().map(|row| row.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum()).collect())
}

proptest! {
    #[test]
    fn containment_monotone_in_offset(omega in arb_unit(3), x in prop::collection::vec(-5.0f64..5.0, 3),
                                      p1 in -5.0f64..5.0, dp in 0.0f64..3.0) {
        let x = Vector::new(x);
        let hi = HalfSpace::new(omega.clone(), p1 + dp).unwrap();
        let lo = HalfSpace::new(omega, p1).unwrap();
        if hi.contains(&x).unwrap() {
            prop_assert!(lo.contains(&x).unwrap());
        }
    }

    #[test]
    fn halfspace_mass_monotone_limits_complement(mu in arb_measure(2), omega in arb_unit(2),
                                                 p1 in -4.0f64..4.0, dp in 0.0f64..2.0) {
        let m = |p: f64| mu.halfspace_mass_unit(omega.as_slice(), p);
        prop_assert!(m(p1) >= m(p1 + dp));
        let r = mu.support_radius();
        prop_assert_eq!(m(-r - 1.5), mu.total_mass());
        prop_assert_eq!(m(r + 1.5), 0.0);
        let flip: Vec<f64> = omega.as_slice().iter().map(|c| -c).collect();
        let on_plane: f64 = mu.points().iter().zip(mu.weights())
            .filter(|(x, _)| x.dot(&omega).unwrap() == p1).map(|(_, w)| w).sum();
        let sum = m(p1) + mu.halfspace_mass_unit(&flip, -p1) - on_plane;
        prop_assert!((sum - mu.total_mass()).abs() <= 1e-12 * mu.total_mass().max(1.0));
    }

    #[test]
    fn grid_complement_off_nodes(omega in arb_unit(2), p in -2.0f64..2.0) {
        let g = Gaussian::standard(2).grid(GridSpec::cells(2, -4.0, 4.0, 0.25).unwrap());
        let flip: Vec<f64> = omega.as_slice().iter().map(|c| -c).collect();
        let on_plane = (0..g.spec().len()).any(|i| g.spec().node(i).dot(&omega).unwrap() == p);
        prop_assume!(!on_plane);
        let sum = g.halfspace_mass_unit(omega.as_slice(), p) + g.halfspace_mass_unit(&flip, -p);
        prop_assert!((sum - g.total_mass()).abs() <= 1e-12);
    }

    #[test]
    fn crofton_exactly_linear_along_directions(x in prop::collection::vec(-2.0f64..2.0, 3), c in 0.0f64..5.0) {
        let s = CroftonSampler::new(3, 64, 4).unwrap();
        let x = Vector::new(x);
        let a = crofton_distance(&s, &Vector::zeros(3), &x).unwrap().value;
        let b = crofton_distance(&s, &Vector::zeros(3), &x.scaled(c)).unwrap().value;
        prop_assert!((b - c * a).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn potential_direct_is_linear_and_lipschitz(mu in arb_measure(3), nu in arb_measure(3),
                                                a in 0.0f64..3.0, b in 0.0f64..3.0,
                                                y1 in prop::collection::vec(-4.0f64..4.0, 3),
                                                y2 in prop::collection::vec(-4.0f64..4.0, 3)) {
        let (y1, y2) = (Vector::new(y1), Vector::new(y2));
        let mut pts = mu.points().to_vec();
        pts.extend_from_slice(nu.points());
        let mut ws: Vec<f64> = mu.weights().iter().map(|w| a * w).collect();
        ws.extend(nu.weights().iter().map(|w| b * w));
        let mix = DiscreteMeasure::new(pts, ws).unwrap();
        let lhs = potential_direct(&mix, &y1).unwrap();
        let rhs = a * potential_direct(&mu, &y1).unwrap() + b * potential_direct(&nu, &y1).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        let gap = (potential_direct(&mu, &y1).unwrap() - potential_direct(&mu, &y2).unwrap()).abs();
        prop_assert!(gap <= mu.total_mass() * y1.distance(&y2).unwrap() + 1e-12);
    }

    #[test]
    fn line_potential_is_exact_for_discrete(mu in arb_measure(1), y in -5.0f64..5.0) {
        let line = CroftonSampler::new(1, 1, 0).unwrap();
        let y = Vector::new(vec![y]);
        let hs = potential_from_halfspaces(&make_query(mu.clone()), mu.total_mass(), &y, &line).unwrap();
        prop_assert!((hs.value - potential_direct(&mu, &y).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn sinogram_is_rotation_equivariant(vals in prop::collection::vec(0.0f64..1.0, 81),
                                        omega in arb_unit(2)) {
        // Quarter turn (x, y) -> (-y, x) maps the symmetric lattice to itself.
        let spec = GridSpec::cube(2, -2.0, 2.0, 0.5).unwrap();
        let f = GridDensity::new(spec.clone(), vals.clone()).unwrap();
        let mut turned = vec![0.0; 81];
        for i in 0..9 {
            for j in 0..9 {
                // Node (i, j) at (x, y) goes to (-y, x), i.e. index (8 - j, i).
                turned[spec.flat_index(&[8 - j, i])] = vals[spec.flat_index(&[i, j])];
            }
        }
        let g = GridDensity::new(spec.clone(), turned).unwrap();
        let rot = Vector::new(vec![-omega[1], omega[0]]);
        let pg = PGrid::symmetric(3.0, 0.25).unwrap();
        let a = radon_forward(&f, &[omega], &pg).unwrap();
        let b = radon_forward(&g, &[rot], &pg).unwrap();
        for (u, v) in a.values().iter().zip(b.values()) {
            prop_assert!((u - v).abs() <= 1e-9);
        }
    }
}

/// CDF of one coordinate of a uniform point on S^{n-1}.
fn marginal_cdf(n: usize, t: f64) -> f64 {
    match n {
        2 => 0.5 + t.asin() / PI,
        3 => 0.5 * (t + 1.0),
        5 => 0.5 + 0.75 * t - 0.25 * t.powi(3),
        _ => unreachable!(),
    }
}

#[test]
fn sphere_marginal_kolmogorov_smirnov() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    for n in [2usize, 3, 5] {
        let u = unit((0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
        let pts = sample_sphere(n, 100_000, 40 + n as u64).unwrap();
        let mut t: Vec<f64> = pts.iter().map(|w| w.dot(&u).unwrap()).collect();
        t.sort_by(f64::total_cmp);
        let m = t.len() as f64;
        let ks = t
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let c = marginal_cdf(n, *v);
                (c - i as f64 / m).abs().max((c - (i + 1) as f64 / m).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.01, "n={n}: KS {ks}");
    }
}

#[test]
fn crofton_isometry_and_homogeneity() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for n in [2usize, 3] {
        let s = CroftonSampler::new(n, 200_000, 8).unwrap();
        let s2 = s.with_seed(9);
        for _ in 0..5 {
            let x = Vector::new((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
            let y = Vector::new((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
            let t = Vector::new((0..n).map(|_| 3.0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect::<Vec<f64>>());
            let q = rotation(n, &mut rng);
            let a = crofton_distance(&s, &x, &y).unwrap();
            let b = crofton_distance(&s2, &(&apply(&q, &x) + &t), &(&apply(&q, &y) + &t)).unwrap();
            let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            assert!((a.value - b.value).abs() <= 3.0 * se, "{a:?} {b:?}");
        }
        let x = Vector::unit(n, 0);
        let base = crofton_distance(&s, &Vector::zeros(n), &x).unwrap();
        for c in [0.5, 2.0, -3.0] {
            let e = crofton_distance(&s2, &Vector::zeros(n), &x.scaled(c)).unwrap();
            let ratio = e.value / base.value;
            let rel = (e.std_error / e.value).hypot(base.std_error / base.value);
            assert!((ratio - f64::abs(c)).abs() <= 3.0 * rel * ratio, "c={c}: {ratio}");
        }
    }
}

#[test]
fn potential_agreement_failure_rate() {
    // Pointwise estimates with independent seeds; at most 2% of nodes may
    // fall outside 3 reported standard errors.
    let e1 = Vector::unit(3, 0);
    let gauss = Gaussian::standard(3).grid(GridSpec::cells(3, -4.5, 4.5, 1.0).unwrap());
    let gauss = DiscreteMeasure::new(
        (0..gauss.spec().len()).map(|i| gauss.spec().node(i)).collect(),
        gauss.values().iter().map(|v| v * gauss.spec().cell_volume()).collect(),
    )
    .unwrap();
    let cases: Vec<(&str, DiscreteMeasure, usize)> = vec![
        ("delta", DiscreteMeasure::dirac(Vector::zeros(3), 1.0).unwrap(), 4000),
        ("two-point", DiscreteMeasure::new(vec![e1.clone(), e1.scaled(-1.0)], vec![0.5, 0.5]).unwrap(), 4000),
        ("gaussian-grid", gauss, 300),
    ];
    let spec = GridSpec::cube(3, -2.0, 2.0, 1.0).unwrap();
    for (name, mu, samples) in cases {
        let q = make_query(mu.clone());
        let total = mu.total_mass();
        let mut bad = 0;
        for i in 0..spec.len() {
            let y = spec.node(i);
            let s = CroftonSampler::new(3, samples, 1000 + i as u64).unwrap();
            let e = potential_from_halfspaces(&q, total, &y, &s).unwrap();
            let d = potential_direct(&mu, &y).unwrap();
            bad += ((e.value - d).abs() > 3.0 * e.std_error + 1e-12) as usize;
        }
        assert!(bad as f64 <= 0.02 * spec.len() as f64, "{name}: {bad} of {}", spec.len());
    }
}

#[test]
fn potential_direct_lipschitz_on_grid_pairs() {
    let spec = GridSpec::cube(2, -2.0, 2.0, 0.5).unwrap();
    let mu = DiscreteMeasure::new(
        vec![Vector::new(vec![0.3, -1.2]), Vector::new(vec![1.5, 0.4])],
        vec![0.4, 1.1],
    )
    .unwrap();
    let f = potential_grid_direct(&mu, &spec).unwrap();
    for i in 0..spec.len() {
        for j in 0..spec.len() {
            let gap = (f.grid.values()[i] - f.grid.values()[j]).abs();
            assert!(gap <= 1.5 * spec.node(i).distance(&spec.node(j)).unwrap() + 1e-12);
        }
    }
}

/// Exact potential of the standard Gaussian in R^3.
fn gaussian_potential_3d(y: &[f64]) -> f64 {
    let r = y.iter().map(|c| c * c).sum::<f64>().sqrt();
    let c = (2.0 / PI).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    (r + 1.0 / r) * libm::erf(r / 2f64.sqrt()) + c * (-0.5 * r * r).exp() - 2.0 * c
}

#[test]
fn gaussian_potential_closed_form_agrees_with_estimator() {
    let s = CroftonSampler::new(3, 100_000, 2).unwrap();
    let q = Gaussian::standard(3).query();
    for y in [vec![1.0, 0.0, 0.0], vec![0.5, -1.5, 2.0]] {
        let e = potential_from_halfspaces(&q, 1.0, &Vector::new(y.clone()), &s).unwrap();
        assert!((e.value - gaussian_potential_3d(&y)).abs() <= 3.0 * e.std_error);
    }
}

fn exact_field(spec: &GridSpec) -> PotentialField {
    PotentialField {
        grid: GridDensity::from_fn(spec.clone(), gaussian_potential_3d),
        provenance: Provenance::Direct,
        mc_error: None,
    }
}

#[test]
fn noise_halves_in_variance_when_samples_double() {
    // Error measured against the inversion of the exact potential, so only
    // the Monte Carlo part remains.
    let spec = GridSpec::cube(3, -6.0, 6.0, 0.5).unwrap();
    let exact = invert(&exact_field(&spec), 2, None).unwrap().density;
    let q = Gaussian::standard(3).query();
    let l2 = |samples: usize, seed: u64| {
        let s = CroftonSampler::new(3, samples, seed).unwrap();
        let r = reconstruct(&q, 1.0, &spec, &s, 2, None).unwrap();
        r.density.values().iter().zip(exact.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };
    let (mut coarse, mut fine) = (0.0, 0.0);
    for seed in 1..=5u64 {
        coarse += l2(1000, seed).powi(2);
        fine += l2(2000, 100 + seed).powi(2);
    }
    let ratio = (fine / coarse).sqrt();
    let target = 0.5f64.sqrt();
    assert!((ratio - target).abs() <= 0.15, "{ratio}");
}

#[test]
fn biharmonic_integral_is_boundary_flux() {
    // Support well inside: the discrete integral of Delta^2 f is c_2 times the mass.
    let spec = GridSpec::cube(3, -6.0, 6.0, 0.25).unwrap();
    let st = LaplacianStencil::for_grid(&spec);
    let f = GridDensity::from_fn(spec.clone(), gaussian_potential_3d);
    let lap2 = laplacian_apply(&laplacian_apply(&f, &st).unwrap(), &st).unwrap();
    let integral: f64 = lap2.values().iter().sum::<f64>() * spec.cell_volume();
    let c2 = c_const(2).unwrap();
    assert!((integral - c2).abs() <= 1e-3 * c2.abs(), "{integral}");
}

#[test]
fn reconstructed_mass_matches_query_total() {
    let spec = GridSpec::cube(3, -4.0, 4.0, 0.25).unwrap();
    let q = Gaussian::standard(3).query();
    let total = q.total_mass();
    let r = reconstruct(&q, total, &spec, &CroftonSampler::new(3, 2000, 1).unwrap(), 2, Some(1.0)).unwrap();
    assert!((r.total_mass / total - 1.0).abs() <= 0.02, "{}", r.total_mass);
    let line = GridSpec::cube(1, -6.0, 6.0, 0.05).unwrap();
    let q1 = Gaussian::standard(1).query();
    let r = reconstruct(&q1, 1.0, &line, &CroftonSampler::new(1, 1, 0).unwrap(), 1, None).unwrap();
    assert!((r.total_mass - 1.0).abs() <= 0.02);
}
