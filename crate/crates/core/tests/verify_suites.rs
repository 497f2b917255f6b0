use epdiff_blowup::kernels::KernelSpec;
use epdiff_blowup::verify::{run_suite, Suite};

#[test]
fn all_suites_pass_on_a_correct_build() {
    let rows = run_suite(Suite::All, &|s| s).unwrap();
    let failed: Vec<_> = rows.iter().filter(|r| !r.passed).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    for suite in ["hypergeom", "kernels", "radialops"] {
        assert!(rows.iter().any(|r| r.suite == suite));
    }
}

#[test]
fn sign_flip_in_coefficients_is_caught() {
    let flip = |s: KernelSpec| s.with_modified_coeffs(|d| d[0] = -d[0]);
    let rows = run_suite(Suite::Kernels, &flip).unwrap();
    assert!(rows.iter().any(|r| !r.passed));
    let roundtrip = rows.iter().filter(|r| r.name.starts_with("Green roundtrip"));
    assert!(roundtrip.clone().count() == 3 && roundtrip.clone().all(|r| !r.passed));

    // a flip in a higher coefficient only exists for k ≥ 2
    let flip_last = |s: KernelSpec| s.with_modified_coeffs(|d| {
        let j = d.len() - 1;
        d[j] = -d[j];
    });
    let rows = run_suite(Suite::Kernels, &flip_last).unwrap();
    assert!(rows.iter().filter(|r| r.name.contains("(2,")).all(|r| !r.passed));
}

#[test]
fn hypergeom_suite_is_independent_of_the_hook() {
    let flip = |s: KernelSpec| s.with_modified_coeffs(|d| d[0] = -d[0]);
    assert!(run_suite(Suite::Hypergeom, &flip).unwrap().iter().all(|r| r.passed));
}
