mod support;

use nalgebra::{DMatrix, DVector};
use support::naive::*;
use tracestokes::assembly::{
    assemble_a, assemble_b, assemble_c, assemble_mass, FormParameters, FormVariant, Stabilization,
};
use tracestokes::par::ExecMode;

#[test]
fn forms_match_naive_quadrature_on_five_tets() {
    let worst = oracle_mismatch();
    assert!(worst <= 1e-12, "{worst:e}");
}

#[test]
fn each_form_matches_on_its_own() {
    for m in [1, 2] {
        let t = tiny_band(m);
        assert!(t.band.len() <= 5 && t.cut.triangle_count() > 0);
        let ctx = tiny_context(&t, ExecMode::Sequential);
        let h = t.band.h();
        for variant in [FormVariant::Inconsistent, FormVariant::Consistent] {
            let params = FormParameters::scaled(h, 1.0, 1.0, -1, 1.0, variant);
            let a = assemble_a(&ctx, &params).unwrap();
            assert_matches("A", &a, &naive_a(&t.band, &t.cut, &t.vel, &params));
        }
        let b = assemble_b(&ctx).unwrap();
        assert_matches("B", &b, &naive_b(&t.band, &t.cut, &t.vel, &t.pres));
        let rho_p = h;
        for s in [Stabilization::Normal, Stabilization::Full] {
            let c = assemble_c(&ctx, s, rho_p).unwrap();
            assert_matches(
                s.label(),
                &c,
                &naive_pressure(&t.band, &t.cut, &t.pres, Some(s), rho_p),
            );
        }
        let zero = assemble_c(&ctx, Stabilization::None, rho_p).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let m0 = assemble_mass(&ctx).unwrap();
        assert_matches(
            "M0",
            &m0,
            &naive_pressure(&t.band, &t.cut, &t.pres, None, rho_p),
        );
    }
}

#[test]
fn sequential_and_parallel_assembly_agree() {
    let t = tiny_band(2);
    let params = FormParameters::scaled(t.band.h(), 1.0, 1.0, -1, 1.0, FormVariant::Consistent);
    let a = assemble_a(&tiny_context(&t, ExecMode::Sequential), &params).unwrap();
    let b = assemble_a(&tiny_context(&t, ExecMode::Parallel), &params).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn consistent_and_plain_forms_are_equivalent() {
    let (lo, hi) = equivalence_ratios(3, 50);
    assert!(0.5 <= lo && hi <= 2.0, "ratios in [{lo}, {hi}]");
}

#[test]
fn rotations_lie_in_the_strain_kernel() {
    let e = killing_energy(2);
    assert!(e <= 1e-10, "{e:e}");
}

#[test]
fn velocity_form_is_symmetric_positive() {
    let t = tiny_band(1);
    let ctx = tiny_context(&t, ExecMode::Sequential);
    let a = assemble_a(
        &ctx,
        &FormParameters::scaled(t.band.h(), 1.0, 1.0, -1, 1.0, FormVariant::Consistent),
    )
    .unwrap();
    assert!(a.symmetry_defect() <= 1e-13 * a.max_abs());
    let dense = DMatrix::from_fn(a.nrows, a.ncols, |r, c| a.get(r, c));
    let ev: DVector<f64> = dense.symmetric_eigen().eigenvalues;
    assert!(ev.min() > 0.0);
}
