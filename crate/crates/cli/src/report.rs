//! Runs one experiment and writes its artifacts and `summary.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nelson_core::config::RunConfig;
use nelson_core::experiments::{run_command, Assertion, Outcome, Table};
use nelson_core::fgrid;
use nelson_core::fluctuations::write_kernel_dump;
use nelson_core::NelsonError;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_GAP_COLLAPSE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    config_hash: &'a str,
    version: &'a str,
    wall_seconds: f64,
    assertions: &'a [Assertion],
    metrics: &'a std::collections::BTreeMap<String, f64>,
    gap_collapse: Option<f64>,
    artifacts: &'a [String],
    error: Option<String>,
    config: &'a RunConfig,
}

fn exit_code(e: &NelsonError) -> i32 {
    match e {
        NelsonError::Config(_) | NelsonError::GridMismatch { .. } | NelsonError::StepTooLarge { .. } => EXIT_CONFIG,
        NelsonError::GapTooSmall { .. } | NelsonError::Stopped(_) => EXIT_GAP_COLLAPSE,
        NelsonError::Invariant(_) => EXIT_ASSERTION,
        _ => EXIT_NOT_CONVERGED,
    }
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Table body with 17 significant digits, prefixed by the config hash.
pub fn render_csv(table: &Table, hash: &str) -> String {
    let mut s = format!("# config_hash={hash}\n{}\n", table.header);
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn write_artifacts(dir: &Path, out: &Outcome, hash: &str) -> nelson_core::Result<Vec<String>> {
    let mut names = Vec::new();
    for t in &out.tables {
        let name = format!("{}.csv", t.name);
        fs::write(dir.join(&name), render_csv(t, hash))?;
        names.push(name);
    }
    for (n, psi) in &out.waves {
        let name = format!("{n}.fgrid");
        fgrid::save_wave(dir.join(&name), psi)?;
        names.push(name);
    }
    for (n, phi) in &out.fields {
        let name = format!("{n}.fgrid");
        fgrid::save_field(dir.join(&name), phi)?;
        names.push(name);
    }
    for k in &out.kernels {
        let name = format!("{}.bin", k.name);
        write_kernel_dump(&dir.join(&name), &k.modes, &k.kernel, k.k, k.lambda, &k.tolerances)?;
        names.push(name);
    }
    Ok(names)
}

fn load_config(path: Option<&Path>, output_dir: Option<PathBuf>) -> nelson_core::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    Ok(cfg)
}

pub fn run(command: &str, config: Option<&Path>, output_dir: Option<PathBuf>) -> i32 {
    let cfg = match load_config(config, output_dir) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return EXIT_CONFIG;
        }
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            log::warn!("worker pool: {e}");
        }
    }
    let dir = cfg.output_dir.join(command);
    if let Err(e) = fs::create_dir_all(&dir) {
        log::error!("cannot create {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    let hash = config_hash(&cfg);
    log::info!("{command}: config {hash}, output {}", dir.display());
    let clock = Instant::now();
    let result = run_command(command, &cfg);
    let wall = clock.elapsed().as_secs_f64();
    let (outcome, error, mut code) = match result {
        Ok(o) => {
            let code = if o.gap_collapse.is_some() {
                EXIT_GAP_COLLAPSE
            } else if o.passed() {
                EXIT_OK
            } else {
                EXIT_ASSERTION
            };
            (o, None, code)
        }
        Err(e) => {
            log::error!("{e}");
            let code = exit_code(&e);
            (Outcome::default(), Some(e.to_string()), code)
        }
    };
    for a in &outcome.assertions {
        let verdict = if a.pass { "pass" } else { "FAIL" };
        log::info!("{verdict} {} = {:.6e} (bound {:.3e})", a.name, a.value, a.bound);
    }
    if let Some(t) = outcome.gap_collapse {
        log::warn!("gap collapsed at t = {t}; artifacts are partial");
    }
    let artifacts = match write_artifacts(&dir, &outcome, &hash) {
        Ok(a) => a,
        Err(e) => {
            log::error!("writing artifacts: {e}");
            code = code.max(EXIT_CONFIG);
            Vec::new()
        }
    };
    let summary = Summary {
        command,
        config_hash: &hash,
        version: env!("NELSON_VERSION"),
        wall_seconds: wall,
        assertions: &outcome.assertions,
        metrics: &outcome.metrics,
        gap_collapse: outcome.gap_collapse,
        artifacts: &artifacts,
        error,
        config: &cfg,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    if let Err(e) = fs::write(dir.join("summary.json"), json) {
        log::error!("writing summary: {e}");
        return EXIT_CONFIG;
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_round_trip_precision() {
        let mut t = Table::new("x", "a,b");
        t.rows.push(vec![0.1, 1.0 / 3.0]);
        let s = render_csv(&t, "abc");
        let body: Vec<&str> = s.lines().collect();
        assert_eq!(body[0], "# config_hash=abc");
        assert_eq!(body[1], "a,b");
        let parsed: Vec<f64> = body[2].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.1, 1.0 / 3.0]);
    }

    #[test]
    fn hash_depends_on_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.seed += 1;
        assert_eq!(config_hash(&a), config_hash(&RunConfig::default()));
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&NelsonError::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&NelsonError::GapTooSmall { gap: 0.0, floor: 1e-6 }), EXIT_GAP_COLLAPSE);
        let nc = NelsonError::NotConverged { solver: "x".into(), iterations: 1, residual: 1.0 };
        assert_eq!(exit_code(&nc), EXIT_NOT_CONVERGED);
    }
}
