//! Field and particle dynamics on small grids: conservation, cross-validation and the
//! experiment drivers' plumbing.

use nelson_core::akg::{akg_init, akg_picard_solve, run_akg, AkgOptions, PicardOptions};
use nelson_core::config::{RunConfig, Tolerances};
use nelson_core::experiments;
use nelson_core::pekar::{gaussian_seed, slaved_field};
use nelson_core::skg::{run_skg, skg_init, SkgOptions};
use nelson_core::{FieldK, GridSpec, NelsonError, SpectralGrid};

fn setup() -> (SpectralGrid, FieldK) {
    let sg = SpectralGrid::new(GridSpec::new(4.0, 16).unwrap()).unwrap();
    let seed = gaussian_seed(&sg, 0.4, [0.0; 3]).unwrap();
    let phi = slaved_field(&sg, &seed).unwrap();
    (sg, phi)
}

#[test]
fn akg_conserves_the_field_energy() {
    let (sg, phi) = setup();
    let tol = Tolerances::default();
    let start = akg_init(&sg, &phi, &tol).unwrap();
    let run = run_akg(&sg, start, 0.05, 1e-3, 10, false, &AkgOptions::default(), &tol).unwrap();
    assert_eq!(run.record.rows.len(), 6);
    assert!(run.record.energy_drift() < 1e-7, "{}", run.record.energy_drift());
    assert!(run.record.collapse_time.is_none());
}

#[test]
fn picard_and_stepper_agree() {
    let (sg, phi) = setup();
    let tol = Tolerances::default();
    let start = akg_init(&sg, &phi, &tol).unwrap();
    let run = run_akg(&sg, start, 0.02, 5e-4, 1, true, &AkgOptions::default(), &tol).unwrap();
    let p = akg_picard_solve(&sg, &phi, 0.02, &PicardOptions::default(), &tol).unwrap();
    let mut matched = 0;
    for (t, f) in p.times.iter().zip(&p.fields) {
        if let Some(s) = run.snapshots.iter().find(|s| (s.t - t).abs() < 1e-9) {
            assert!(s.phi.sub(f).norm_l2() < 1e-6, "t = {t}");
            matched += 1;
        }
    }
    assert!(matched >= 10);
}

#[test]
fn skg_conserves_mass_and_semiclassical_energy() {
    let (sg, phi) = setup();
    let tol = Tolerances::default();
    let psi = akg_init(&sg, &phi, &tol).unwrap().bundle.psi;
    let opts = SkgOptions::default();
    let eps = 0.5;
    let ds = eps * eps * opts.micro_dt_max;
    let start = skg_init(&sg, &psi, &phi, eps, &opts, &tol).unwrap();
    let run = run_skg(&sg, start, 40.0 * ds, ds, 10, false, &opts, &tol).unwrap();
    assert!(run.mass_drift() < 1e-10, "{}", run.mass_drift());
    assert!(run.energy_drift() < 1e-5, "{}", run.energy_drift());
}

#[test]
fn drivers_report_assertions() {
    let mut cfg = RunConfig::default();
    cfg.grid.points = 16;
    let out = experiments::selfcheck(&cfg).unwrap();
    assert!(out.passed(), "{:?}", out.assertions);
    assert_eq!(out.assertions.len(), 5);
    let out = experiments::dressing_check(&cfg).unwrap();
    assert!(out.passed());
    assert_eq!(out.tables[0].rows.len(), cfg.dressing.pairs.len());
    assert!(matches!(experiments::run_command("nope", &cfg), Err(NelsonError::Config(_))));
}

#[test]
fn free_field_flag_rotates_the_field() {
    let mut cfg = RunConfig::default();
    cfg.grid.points = 16;
    cfg.akg.t_end = 0.02;
    cfg.akg.force_free_field = true;
    let out = experiments::akg(&cfg).unwrap();
    assert!(out.passed(), "{:?}", out.assertions);
    assert_eq!(out.assertions[0].name, "free_field_norm_drift");
}

#[test]
fn coulomb_cell_average_at_the_origin() {
    let g = GridSpec::new(12.0, 24).unwrap();
    let v = experiments::coulomb_potential(&g, 2.0);
    let origin = (0..g.len()).find(|&i| g.position(i) == [0.0; 3]).unwrap();
    assert!((v[origin] + 2.0 * 2.3800773639795536 / g.dx()).abs() < 1e-12);
    assert!(v.iter().all(|x| *x < 0.0));
}
