//! CSV learning curves and key=value metadata files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mtdiff_core::engine::to_db;

use crate::runner::{CaseResult, ResultBundle, ScenarioError};

/// Formats `x` with 9 significant digits, trailing zeros removed.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can carry into the next decade
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    let exp = exp.max(rounded.abs().log10().floor() as i32);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{rounded:.decimals$}");
        trim_zeros(&s)
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        format!("{}e{}", trim_zeros(mantissa), e)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn db_or_nan(v: Option<f64>) -> String {
    v.map(|x| sig9(to_db(x))).unwrap_or_else(|| "nan".into())
}

/// Learning-curve table for one case.
pub fn case_csv(bundle: &ResultBundle, case: &CaseResult) -> String {
    let per_cluster = bundle.per_cluster() && case.simulated.is_some();
    let mut out = String::from("iteration,msd_sim_db,msd_theory_db");
    if per_cluster {
        for q in 1..=bundle.clusters {
            let _ = write!(out, ",msd_sim_c{q}_db");
        }
    }
    out.push('\n');
    for i in 0..=bundle.run.horizon {
        let sim = case.simulated.as_ref().map(|c| c.network[i]);
        let theory = case.theory.as_ref().map(|t| t[i]);
        let _ = write!(out, "{i},{},{}", db_or_nan(sim), db_or_nan(theory));
        if per_cluster {
            let curve = case.simulated.as_ref().expect("per-cluster columns need a simulation");
            for q in 0..bundle.clusters {
                let _ = write!(out, ",{}", sig9(to_db(curve.clusters[q][i])));
            }
        }
        out.push('\n');
    }
    out
}

/// Steady-state and stability report for one case.
pub fn case_metadata(bundle: &ResultBundle, case: &CaseResult) -> String {
    let s = &case.stability;
    let window = bundle.run.steady_window;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("rho_B", sig9(s.rho_b));
    kv("rho_F", sig9(s.rho_f));
    kv("bound_mean", sig9(s.bound_mean));
    kv("bound_ms", sig9(s.bound_ms));
    kv("zeta_star_db", db_or_nan(case.steady_state));
    kv("seed", bundle.run.seed.to_string());
    kv("runs", bundle.run.runs.to_string());
    kv("eta", sig9(case.eta));
    kv("case", case.label.clone());
    kv("horizon", bundle.run.horizon.to_string());
    kv("msd_sim_steady_db", db_or_nan(case.simulated_steady_state(window)));
    out
}

/// Reconstructed spectra of the reported users next to the true spectrum.
pub fn psd_csv(bundle: &ResultBundle, case: &CaseResult) -> Option<String> {
    let (grid, truth) = bundle.spectrum_truth.as_ref()?;
    if case.psd.is_empty() {
        return None;
    }
    let mut out = String::from("frequency,psd_true");
    for (u, _) in &case.psd {
        let _ = write!(out, ",psd_user{}", u + 1);
    }
    out.push('\n');
    for (j, f) in grid.iter().enumerate() {
        let _ = write!(out, "{},{}", sig9(*f), sig9(truth[j]));
        for (_, psd) in &case.psd {
            let _ = write!(out, ",{}", sig9(psd[j]));
        }
        out.push('\n');
    }
    Some(out)
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, ScenarioError> {
    fs::write(&path, text).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// Writes `<name>_<case>.csv`, `<name>_<case>.meta` and, for spectrum
/// scenarios, `<name>_<case>_psd.csv` into `dir`. Returns the written paths.
pub fn emit_csv(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
    fs::create_dir_all(dir).map_err(|source| ScenarioError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    for case in &bundle.cases {
        let stem = format!("{}_{}", bundle.name, case.label);
        written.push(write(dir.join(format!("{stem}.csv")), &case_csv(bundle, case))?);
        written.push(write(dir.join(format!("{stem}.meta")), &case_metadata(bundle, case))?);
        if let Some(psd) = psd_csv(bundle, case) {
            written.push(write(dir.join(format!("{stem}_psd.csv")), &psd)?);
        }
    }
    Ok(written)
}
