use std::collections::BTreeMap;

use qtlab::suite::{run_identity_suite, IdentityRow, SuiteConfig};

fn worst_by_identity(rows: &[IdentityRow]) -> BTreeMap<String, (f64, f64, usize)> {
    let mut m: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = m.entry(r.identity.clone()).or_insert((0.0, r.threshold, 0));
        e.0 = e.0.max(if r.residual.is_nan() { f64::INFINITY } else { r.residual });
        e.2 += 1;
    }
    m
}

#[test]
fn every_identity_holds_on_its_grid() {
    let rows = run_identity_suite(&SuiteConfig::default());
    let worst = worst_by_identity(&rows);
    for (name, (w, t, n)) in &worst {
        println!("{name:28} n={n:4} worst={w:.3e} threshold={t:.0e}");
    }
    let failing: Vec<_> = rows.iter().filter(|r| !r.pass()).collect();
    assert!(failing.is_empty(), "failing rows: {failing:#?}");
    for (name, (_, _, n)) in &worst {
        // the Γ_b(Q/2) = 1 check is one point per b
        if name != "gamma_b_half_q" {
            assert!(*n >= 20, "{name} has only {n} grid points");
        }
    }
}

#[test]
fn suite_is_deterministic_for_a_seed() {
    let cfg = SuiteConfig { grid_size: 4, ..Default::default() };
    assert_eq!(run_identity_suite(&cfg), run_identity_suite(&cfg));
}

#[test]
fn perturbing_the_double_gamma_breaks_shift_equations() {
    let cfg = SuiteConfig { grid_size: 4, perturbation: 1e-3, ..Default::default() };
    let rows = run_identity_suite(&cfg);
    assert!(rows.iter().filter(|r| r.identity.starts_with("gamma_b_shift")).any(|r| !r.pass()));
}
