//! Acceptance run: every criterion at its stated tolerance, one line each.
//!
//! `NELSON_ACCEPTANCE=2,5` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::time::Instant;

use nelson_core::config::RunConfig;
use nelson_core::experiments::{self, Outcome};
use nelson_core::Result;

type Driver = fn(&RunConfig) -> Result<Outcome>;

const CRITERIA: [(u32, &str, Driver, f64); 11] = [
    (1, "eigensolver oracles", experiments::eig_bench, 300.0),
    (2, "aKG energy conservation", experiments::akg, 600.0),
    (3, "Picard vs stepper", experiments::picard_crosscheck, 600.0),
    (4, "SKG conservation", experiments::skg, 900.0),
    (5, "SKG to aKG convergence", experiments::compare, 1800.0),
    (6, "counterterm slope", experiments::counterterm, 1200.0),
    (7, "dressing scalar identity", experiments::dressing_check, 1.0),
    (8, "kernel renormalization identity", experiments::kernel_identity, 1200.0),
    (9, "Bogoliubov frame invariants", experiments::fluct, 120.0),
    (10, "adiabatic consistency", experiments::adiabatic, 600.0),
    (11, "near-minimizer gap persistence", experiments::gap, 1200.0),
];

fn selected() -> Option<Vec<u32>> {
    let raw = std::env::var("NELSON_ACCEPTANCE").ok()?;
    Some(raw.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn main() -> ExitCode {
    let filter = selected();
    let cfg = RunConfig::default();
    let mut failed = 0;
    for (id, name, driver, budget) in CRITERIA {
        if filter.as_ref().is_some_and(|f| !f.contains(&id)) {
            continue;
        }
        let clock = Instant::now();
        let outcome = driver(&cfg);
        let wall = clock.elapsed().as_secs_f64();
        let (ok, detail) = match &outcome {
            Ok(o) => {
                let detail = o
                    .assertions
                    .iter()
                    .map(|a| format!("{}={:.4e}{}{:.1e}", a.name, a.value, if a.pass { " ok " } else { " FAILS " }, a.bound))
                    .collect::<Vec<_>>()
                    .join("; ");
                (o.passed() && o.gap_collapse.is_none(), detail)
            }
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = if wall <= budget { "" } else { " (over runtime budget)" };
        println!(
            "criterion {id:>2} {} {name} [{wall:.1}s / {budget:.0}s{timing}]: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
