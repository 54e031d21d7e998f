mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force, case_strain, fixtures, random_spec, sample_strain, signed_permutation};
use ruc_core::admissibility::{check_admissibility, Admissibility, DEFAULT_TOL};
use ruc_core::constraints::{build_constraints, build_constraints_with_gammas};
use ruc_core::equivalence::{Dim, EquivalenceRelation, Gamma, Point, SymTensor};
use ruc_core::fixtures::{Checkerboard, Woven};
use ruc_core::microfem::{homogenize, solve_ruc, SolveOptions};
use ruc_core::pairing::pair_mesh;
use ruc_core::voigt;

fn dim_of(three: bool) -> Dim {
    if three {
        Dim::Three
    } else {
        Dim::Two
    }
}

fn mandel_norm(e: &SymTensor) -> f64 {
    voigt::strain_to_mandel(e.dim(), &e.to_voigt_strain())
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn signed_permutations_are_isometries(seed in any::<u64>(), three in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = dim_of(three);
        let t = signed_permutation(dim, &mut rng);
        prop_assert!(t.is_orthogonal(1e-15));
        prop_assert!((t.det().abs() - 1.0).abs() < 1e-15);
        let rel = EquivalenceRelation {
            label: "E".into(),
            transform: t,
            offset: Point::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0),
            source: ruc_core::equivalence::BoundaryRegion::new(Vec::new()),
        };
        let p = |rng: &mut ChaCha8Rng| {
            let mut x = Point::zeros();
            for a in 0..dim.n() {
                x[a] = rng.random_range(-3.0..3.0);
            }
            x
        };
        let (x, y) = (p(&mut rng), p(&mut rng));
        let d0 = (x - y).norm();
        let d1 = (rel.map_point(&x) - rel.map_point(&y)).norm();
        prop_assert!((d0 - d1).abs() <= 1e-12 * d0.max(1.0));
        prop_assert!((rel.inverse_map(&rel.map_point(&x)) - x).amax() < 1e-12);
        let v: Vec<f64> = (0..dim.voigt_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = SymTensor::from_voigt_strain(dim, &v).unwrap();
        let te = rel.transform_strain(Gamma::Plus, &e);
        prop_assert!((mandel_norm(&te) - mandel_norm(&e)).abs() < 1e-12);
    }

    #[test]
    fn load_reversal_is_a_sign(seed in any::<u64>(), three in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = dim_of(three);
        let spec = random_spec(dim, 1, &mut rng);
        let rel = &spec.relations[0];
        let v: Vec<f64> = (0..dim.voigt_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = SymTensor::from_voigt_strain(dim, &v).unwrap();
        let plus = rel.transform_strain(Gamma::Plus, &e);
        let minus = rel.transform_strain(Gamma::Minus, &e);
        prop_assert!(plus.add(&minus).norm_inf() == 0.0);
        for g in [Gamma::Plus, Gamma::Minus] {
            prop_assert_eq!(g.flip().flip(), g);
            prop_assert_eq!(g.times(g), Gamma::Plus);
        }
    }

    #[test]
    fn admissibility_matches_exhaustive_search(seed in any::<u64>(), three in any::<bool>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(dim_of(three), n, &mut rng);
        for _ in 0..20 {
            let eps = sample_strain(&spec, &mut rng);
            let fast = check_admissibility(&spec, &eps, DEFAULT_TOL).unwrap();
            let slow = brute_force(&spec, &eps, DEFAULT_TOL);
            match (fast, slow) {
                (Admissibility::Admissible(a), Some(signs)) => {
                    for (g, s) in a.gammas.iter().zip(&signs) {
                        if let Some(s) = s {
                            prop_assert_eq!(g, s);
                        }
                    }
                }
                (Admissibility::Inadmissible(_), None) => {}
                (f, s) => prop_assert!(false, "verdicts differ: {:?} vs {:?}", f, s),
            }
        }
    }

    #[test]
    fn constraint_rhs_is_linear_in_strain(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let woven = Woven::default();
        let spec = woven.spec();
        let mesh = woven.mesh([2, 4, 1]);
        let pairs = pair_mesh(&mesh, &spec, None).unwrap();
        let gammas: Vec<Gamma> = (0..spec.relations.len())
            .map(|_| if rng.random_bool(0.5) { Gamma::Plus } else { Gamma::Minus })
            .collect();
        let rand_eps = |rng: &mut ChaCha8Rng| {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            SymTensor::from_voigt_strain(Dim::Three, &v).unwrap()
        };
        let (e1, e2) = (rand_eps(&mut rng), rand_eps(&mut rng));
        let mix = e1.scaled(a).add(&e2.scaled(b));
        let c1 = build_constraints_with_gammas(&pairs, &spec, &gammas, &e1).unwrap();
        let c2 = build_constraints_with_gammas(&pairs, &spec, &gammas, &e2).unwrap();
        let cm = build_constraints_with_gammas(&pairs, &spec, &gammas, &mix).unwrap();
        for ((x, y), z) in c1.iter().zip(&c2).zip(&cm) {
            prop_assert_eq!(x.coeff, z.coeff);
            prop_assert!((x.rhs * a + y.rhs * b - z.rhs).amax() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Constraint satisfaction and the fluctuation relation on every fixture.
    #[test]
    fn solutions_satisfy_constraints_and_fluctuation_relation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in fixtures() {
            let cases = ruc_core::admissibility::enumerate_load_cases(&f.spec).unwrap();
            let case = rng.random_range(0..cases.len());
            let eps = case_strain(&f.spec, case, &mut rng);
            let sol = solve_ruc(&f.mesh, &f.spec, &f.materials, &eps, &SolveOptions::default()).unwrap();
            let pairs = pair_mesh(&f.mesh, &f.spec, None).unwrap();
            let eqs = build_constraints(&pairs, &f.spec, &eps).unwrap();
            let u = sol.flat_u();
            let scale = eps.norm_inf() * f.spec.bbox.diagonal();
            for eq in &eqs {
                prop_assert!(eq.residual(&u) <= 1e-9 * scale, "{}: {}", f.name, eq.residual(&u));
            }
            let fl: Vec<Point> = sol.u.iter().zip(&f.mesh.nodes).map(|(u, x)| u - eps.apply(x)).collect();
            for eq in eqs.iter().filter(|e| !e.self_pair) {
                let r = fl[eq.slave] - eq.coeff * fl[eq.master];
                prop_assert!(r.amax() <= 1e-9 * scale, "{}: fluctuation mismatch {}", f.name, r.amax());
            }
        }
    }
}

/// Hill–Mandel equality and the uniform-strain upper bound.
#[test]
fn energy_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for f in fixtures() {
        let cases = ruc_core::admissibility::enumerate_load_cases(&f.spec).unwrap();
        for case in 0..cases.len() {
            let eps = case_strain(&f.spec, case, &mut rng);
            let sol = solve_ruc(&f.mesh, &f.spec, &f.materials, &eps, &SolveOptions::default()).unwrap();
            let macro_work = sol.mean_stress.contract(&eps);
            let affine = ruc_core::microfem::Model::new(&f.mesh, &f.spec.bbox, &f.materials, Default::default())
                .unwrap()
                .uniform_strain_energy(&eps);
            // the plate's transverse shear case is a rigid rotation: zero energy
            assert!(
                (macro_work - sol.energy_density).abs() <= 1e-9 * affine,
                "{}: {macro_work} vs {}",
                f.name,
                sol.energy_density
            );
            assert!(macro_work <= affine * (1.0 + 1e-9), "{}: {macro_work} > {affine}", f.name);
        }
    }
}

/// Nested refinement can only lower the effective stiffness in energy.
#[test]
fn refinement_is_monotone() {
    let cb = Checkerboard::default();
    let mats = common::fixtures().remove(0).materials;
    let energies: Vec<Vec<f64>> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let h = homogenize(&cb.mesh(n), &cb.spec(), &mats, &SolveOptions::default()).unwrap();
            let c = h.matrix();
            let probes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.4, -0.7, 0.2]];
            probes
                .iter()
                .map(|p| {
                    let v = nalgebra::Vector3::from_row_slice(p);
                    v.dot(&(&c * v))
                })
                .collect()
        })
        .collect();
    for w in energies.windows(2) {
        for (coarse, fine) in w[0].iter().zip(&w[1]) {
            assert!(fine - coarse <= 1e-10 * coarse.abs(), "{coarse} -> {fine}");
        }
    }
}
