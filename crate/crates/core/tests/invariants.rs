use monoscale_core::geometry::norm_sq;
use monoscale_core::{
    build_cell_mesh, solve_cell, solve_oscillatory, BoxDomain, CellProfile, CellSite, Family, Load,
    Mesh, MonotoneMapSpec, SolveOptions,
};
use proptest::prelude::*;

fn opts(affine: bool) -> SolveOptions {
    SolveOptions {
        max_outer: 20_000,
        affine_shortcut: affine,
        ..SolveOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cell_corrector_has_zero_mean_and_bounded_energy(
        lo in 0.5..2.0f64,
        hi in 2.0..6.0f64,
        xi in -8.0..8.0f64,
        nonlinear in any::<bool>(),
    ) {
        let family = if nonlinear { Family::NonlinearIsotropic } else { Family::linear() };
        let spec = MonotoneMapSpec::new(1, family, CellProfile::two_phase(lo, hi));
        let mesh = build_cell_mesh(1, 32).unwrap();
        let s = solve_cell(&spec, CellSite::Part(0), [xi, 0.0], &mesh, &opts(true)).unwrap();
        prop_assert!(s.corrector.mean().abs() <= 1e-10);
        let k = spec.beta / spec.alpha;
        prop_assert!(s.energy() <= k * k * norm_sq(s.xi) + 1e-10);
        let first = s.corrector.coeffs[0];
        prop_assert_eq!(first.to_bits(), s.corrector.value_at([1.0, 0.0]).to_bits());
    }

    #[test]
    fn periodic_pairs_are_equal_in_2d(xi0 in -3.0..3.0f64, xi1 in -3.0..3.0f64) {
        let spec = MonotoneMapSpec::new(
            2,
            Family::linear(),
            CellProfile::Checkerboard { low: 1.0, high: 3.0 },
        );
        let mesh = build_cell_mesh(2, 8).unwrap();
        let s = solve_cell(&spec, CellSite::Part(0), [xi0, xi1], &mesh, &opts(true)).unwrap();
        for t in [0.0, 0.25, 0.5] {
            prop_assert_eq!(s.corrector.value_at([0.0, t]), s.corrector.value_at([1.0, t]));
            prop_assert_eq!(s.corrector.value_at([t, 0.0]), s.corrector.value_at([t, 1.0]));
        }
    }
}

#[test]
fn fine_solution_is_zero_on_the_boundary() {
    let domain = BoxDomain::rect([0.0, 0.0], [1.0, 1.0]);
    let spec = MonotoneMapSpec::new(
        2,
        Family::NonlinearIsotropic,
        CellProfile::Checkerboard {
            low: 1.0,
            high: 2.0,
        },
    )
    .with_domain(domain);
    let mesh = Mesh::macro_mesh(domain, 32).unwrap();
    let (u, _) = solve_oscillatory(
        &spec,
        0.25,
        &mesh,
        &Load::Constant { value: 1.0 },
        &opts(true),
        8,
    )
    .unwrap();
    for n in 0..mesh.num_nodes() {
        if mesh.is_constrained(n) {
            assert_eq!(u.coeffs[n], 0.0);
        }
    }
    assert!(u.gradient_l2_norm() > 0.0);
}

#[test]
fn affine_shortcut_matches_the_monotone_iteration() {
    let spec = MonotoneMapSpec::new(1, Family::linear(), CellProfile::two_phase(1.0, 3.0));
    let mesh = Mesh::macro_mesh(BoxDomain::unit(1), 128).unwrap();
    let load = Load::SineProduct {
        amplitude: 2.0,
        frequency: 1.0,
    };
    let (a, sa) = solve_oscillatory(&spec, 0.125, &mesh, &load, &opts(true), 8).unwrap();
    let (b, sb) = solve_oscillatory(&spec, 0.125, &mesh, &load, &opts(false), 8).unwrap();
    let d = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(d <= 1e-9, "{d}");
    assert!(sa.history.len() <= 2 && sb.iterations > 10);
    assert!(sb.is_contracting(1e-3));
}
