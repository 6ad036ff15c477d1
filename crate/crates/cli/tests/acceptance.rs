//! End-to-end acceptance run: nine criteria, one PASS/FAIL line each.
//!
//! This target has no test harness so the summary always prints. It exits
//! non-zero when any criterion fails. Set `QTLAB_ACCEPTANCE_SEED` to rerun
//! with another master seed.

use std::process::{Command, ExitCode};
use std::time::Instant;

use qtlab::campaign::{
    divergence_campaign, gmc_campaign, length_law_campaign, radius_campaign, reversal_campaign, surfaces_campaign, DivergenceConfig,
    GmcConfig, LengthLawConfig, Outcome, RadiusConfig, ReversalConfig, SurfacesConfig,
};
use qtlab::params::RhoTriple;
use qtlab::rng::derive_seed;
use qtlab::suite::{run_identity_suite, IdentityRow, SuiteConfig};

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
    seconds: f64,
}

fn outcome_detail(o: &Outcome) -> String {
    let failed = o.failed_gates();
    let mut parts: Vec<String> = o
        .results
        .iter()
        .filter(|r| r.z.is_some() || ["moment", "slope", "exponent", "tail_index"].iter().any(|k| r.name.contains(k)))
        .map(|r| match r.z {
            Some(z) => format!("{}={:.6} (se {:.2e}, z {:+.2})", r.name, r.estimate, r.stderr, z),
            None => format!("{}={:.4}", r.name, r.estimate),
        })
        .collect();
    if !failed.is_empty() {
        parts.push(format!("failed gates: {}", failed.join(", ")));
    }
    parts.join("; ")
}

fn campaign(label: &str, r: qtlab::Result<Outcome>) -> (bool, String) {
    match r {
        Ok(o) => (o.pass(), format!("[{label}] {}", outcome_detail(&o))),
        Err(e) => (false, format!("[{label}] error: {e}")),
    }
}

fn combine(parts: Vec<(bool, String)>) -> (bool, String) {
    let pass = parts.iter().all(|p| p.0);
    (pass, parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join(" | "))
}

fn worst(rows: &[IdentityRow], names: &[&str]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        let group: Vec<&IdentityRow> = rows.iter().filter(|r| r.identity == *name).collect();
        let w = group.iter().map(|r| r.residual).fold(0.0f64, f64::max);
        let ok = !group.is_empty() && group.iter().all(|r| r.pass());
        pass &= ok;
        parts.push(format!("{name}: max {w:.1e} over {} pts{}", group.len(), if ok { "" } else { " FAIL" }));
    }
    (pass, parts.join(", "))
}

fn qtlab_report(args: &[&str], workers: usize) -> Result<Vec<u8>, String> {
    let path = std::env::temp_dir().join(format!("qtlab-acceptance-{}-{workers}.json", std::process::id()));
    let status = Command::new(env!("CARGO_BIN_EXE_qtlab"))
        .args(["--workers", &workers.to_string(), "--output", path.to_str().unwrap()])
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.code() != Some(0) {
        return Err(format!("exit status {status}"));
    }
    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_file(&path);
    Ok(bytes)
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are harness conventions; honour the
    // listing request so tooling does not run the whole campaign.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let seed: u64 = std::env::var("QTLAB_ACCEPTANCE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(20240601);
    let mut lines: Vec<Line> = Vec::new();
    let mut run = |id: usize, title: &'static str, f: &dyn Fn() -> (bool, String)| {
        let t0 = Instant::now();
        let (pass, detail) = f();
        let seconds = t0.elapsed().as_secs_f64();
        println!("criterion {id}: {} ({seconds:.1} s) {title}\n    {detail}", if pass { "PASS" } else { "FAIL" });
        lines.push(Line { id, title, pass, detail, seconds });
    };

    let suite = run_identity_suite(&SuiteConfig { seed, ..SuiteConfig::default() });

    run(1, "double gamma shift equations, Q/2 normalisation, b <-> 1/b", &|| {
        worst(&suite, &["gamma_b_shift_b", "gamma_b_shift_inv_b", "gamma_b_half_q", "gamma_b_inverse_symmetry"])
    });

    run(2, "special-function identity suite", &|| {
        worst(
            &suite,
            &[
                "r_bar_reflection",
                "h_bar_reflection",
                "m_shift_two_over_gamma",
                "m_shift_gamma_over_two",
                "m_multiplicative",
                "two_root_invariance",
                "reversal_consistency",
                "moment_at_zero_exponent",
                "m_gamma_closed_form",
                "m_q_closed_form",
            ],
        )
    });

    run(3, "conformal-radius moments by Monte Carlo (n = 1e4, dt and T gates)", &|| {
        let sets = [(2.0, [0.0, 0.0, 0.0], -1.0), (3.0, [1.0, 1.0, 1.0], -0.5), (2.0, [0.5, 0.5, 1.0], -0.3)];
        combine(
            sets.iter()
                .map(|&(k, r, a)| {
                    let cfg = RadiusConfig::new(k, RhoTriple::new(r[0], r[1], r[2]), a, derive_seed(seed, &format!("radius-{k}-{r:?}")));
                    campaign(&format!("kappa={k} rho={r:?} alpha={a}"), radius_campaign(&cfg))
                })
                .collect(),
        )
    });

    run(4, "divergence above alpha0 for (kappa, rho) = (2; 0, 1)", &|| {
        let cfg = DivergenceConfig::new(2.0, RhoTriple::new(0.0, 0.0, 1.0), derive_seed(seed, "divergence"));
        campaign("n=1e5", divergence_campaign(&cfg))
    });

    run(5, "boundary GMC moments at N = 2^13, n = 2e4, N/2 -> N gate", &|| {
        let sets = [[0.5, 0.5, 2.0], [0.3, 0.7, 2.5]];
        combine(
            sets.iter()
                .map(|b| campaign(&format!("beta={b:?}"), gmc_campaign(&GmcConfig::new(1.0, *b, derive_seed(seed, &format!("gmc-{b:?}"))))))
                .collect(),
        )
    });

    run(6, "triangle length law at l = 0.5, 1, 2 and its exponent", &|| {
        campaign("W=(2.5,2.5,0.6)", length_law_campaign(&LengthLawConfig::new(1.0, [2.5, 2.5, 0.6], derive_seed(seed, "length-law"))))
    });

    run(7, "radial process laws (sup law, decomposition at the max, Bessel part)", &|| {
        campaign("gamma=1", surfaces_campaign(&SurfacesConfig::new(1.0, derive_seed(seed, "surfaces"))))
    });

    run(8, "statistical reversibility with rho1 = 0 control", &|| {
        let cfg = ReversalConfig::new(2.0, RhoTriple::new(0.5, 0.5, 1.0), -0.3, derive_seed(seed, "reversal"));
        campaign("kappa=2 rho=(0.5;0.5,1)", reversal_campaign(&cfg))
    });

    run(9, "byte-identical reports across worker counts", &|| {
        let s = seed.to_string();
        let commands: [Vec<&str>; 3] = [
            vec!["verify-radius", "--kappa", "2", "--rho1", "1", "--alpha", "-0.5", "--n-samples", "200", "--t-max", "500", "--seed", &s],
            vec!["verify-gmc", "--gamma", "1", "--beta1", "0.5", "--beta2", "0.5", "--beta3", "2", "--n-grid", "1024", "--n-samples", "2000", "--seed", &s],
            vec!["verify-surfaces", "--gamma", "1", "--n-samples", "2000", "--seed", &s],
        ];
        let mut parts = Vec::new();
        let mut pass = true;
        for c in &commands {
            let one = qtlab_report(c, 1);
            let four = qtlab_report(c, 4);
            let ok = matches!((&one, &four), (Ok(a), Ok(b)) if a == b);
            pass &= ok;
            parts.push(match (one, four) {
                (Ok(a), Ok(_)) => format!("{}: {} bytes {}", c[0], a.len(), if ok { "identical" } else { "DIFFER" }),
                (Err(e), _) | (_, Err(e)) => format!("{}: {e}", c[0]),
            });
        }
        (pass, parts.join(", "))
    });

    println!("\nsummary");
    for l in &lines {
        println!("  criterion {}: {} {:>7.1} s  {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.seconds, l.title);
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", lines.len());
        ExitCode::SUCCESS
    } else {
        for l in lines.iter().filter(|l| !l.pass) {
            eprintln!("criterion {} failed: {}", l.id, l.detail);
        }
        ExitCode::FAILURE
    }
}
