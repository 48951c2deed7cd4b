//! CSV and summary serialization for finished runs.
//!
//! Amplitude engines (dde, oracle) and the density-matrix engine carry
//! different extra columns, so each engine gets its own CSV. The summary
//! JSON holds the effective config (round-trippable), the derived scales,
//! the sanity checks, and the list of written files.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::scenario::{Config, DerivedSummary, Engine, EngineRun, RunOutput, SanityCheck};

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Render one engine run as CSV. When the scenario has a retardation time,
/// `t_over_tau1` is inserted after `t`.
pub fn engine_csv(run: &EngineRun, tau1: Option<f64>) -> String {
    let samples = run.t.len();
    let mut s = String::with_capacity(samples * 160);
    let tau_col = tau1.is_some();
    match run.engine {
        Engine::Dde | Engine::Oracle => {
            s.push_str(if tau_col {
                "t,t_over_tau1,p1,p2,re_b1,im_b1,re_b2,im_b2\n"
            } else {
                "t,p1,p2,re_b1,im_b1,re_b2,im_b2\n"
            });
            let amps = run
                .amplitudes
                .as_ref()
                .expect("amplitude engines carry amplitudes");
            for i in 0..samples {
                s.push_str(&fmt(run.t[i]));
                if let Some(tau) = tau1 {
                    s.push(',');
                    s.push_str(&fmt(run.t[i] / tau));
                }
                for col in [
                    run.populations[i][0],
                    run.populations[i][1],
                    amps[i][0].re,
                    amps[i][0].im,
                    amps[i][1].re,
                    amps[i][1].im,
                ] {
                    s.push(',');
                    s.push_str(&fmt(col));
                }
                s.push('\n');
            }
        }
        Engine::Me => {
            s.push_str(if tau_col {
                "t,t_over_tau1,p1,p2,trace,min_eig\n"
            } else {
                "t,p1,p2,trace,min_eig\n"
            });
            let trace = run.trace.as_ref().expect("me runs carry traces");
            let min_eig = run.min_eig.as_ref().expect("me runs carry eigenvalues");
            for i in 0..samples {
                s.push_str(&fmt(run.t[i]));
                if let Some(tau) = tau1 {
                    s.push(',');
                    s.push_str(&fmt(run.t[i] / tau));
                }
                for col in [
                    run.populations[i][0],
                    run.populations[i][1],
                    trace[i],
                    min_eig[i],
                ] {
                    s.push(',');
                    s.push_str(&fmt(col));
                }
                s.push('\n');
            }
        }
    }
    s
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a Config,
    derived: &'a DerivedSummary,
    checks: &'a [SanityCheck],
    outputs: Vec<String>,
}

/// The summary document for a finished run. `files` lists the CSVs already
/// written; only their basenames are recorded.
pub fn summary_json(out: &RunOutput, files: &[PathBuf]) -> String {
    let summary = Summary {
        config: &out.system.config,
        derived: &out.system.derived,
        checks: &out.checks,
        outputs: files
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect(),
    };
    let mut text =
        serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    text.push('\n');
    text
}

/// Write `{prefix}_{engine}.csv` per run plus `{prefix}_summary.json` into
/// `dir`, creating it if needed. Returns every path written, summary last.
pub fn write_all(out: &RunOutput, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let tau1 = out.system.derived.tau1;
    let mut written = Vec::new();
    for run in &out.runs {
        let path = dir.join(format!("{prefix}_{}.csv", run.engine.name()));
        std::fs::write(&path, engine_csv(run, tau1))?;
        written.push(path);
    }
    let summary = summary_json(out, &written);
    let path = dir.join(format!("{prefix}_summary.json"));
    std::fs::write(&path, summary)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{self, Config};
    use std::sync::atomic::{AtomicU64, Ordering};

    fn unique_dir() -> PathBuf {
        static SEQ: AtomicU64 = AtomicU64::new(0);
        std::env::temp_dir().join(format!(
            "wgsim-output-test-{}-{}",
            std::process::id(),
            SEQ.fetch_add(1, Ordering::Relaxed)
        ))
    }

    fn delayed_run() -> scenario::RunOutput {
        let text = r#"{
            "coupling": {"explicit_rates": {"gamma11": 1.0, "tau1": 0.3, "k10_d": 0.0}},
            "initial_state": "excited-1",
            "engines": ["dde", "me"],
            "time": {"t_end": 1.0, "samples": 20}
        }"#;
        scenario::run(Config::from_json(text).unwrap()).unwrap()
    }

    fn instantaneous_run() -> scenario::RunOutput {
        let text = r#"{
            "coupling": {"explicit_rates": {"gamma11": 1.0, "tau1": 0.0, "k10_d": 0.0}},
            "initial_state": "excited-1",
            "engines": ["dde", "me"],
            "time": {"t_end": 1.0, "samples": 20}
        }"#;
        scenario::run(Config::from_json(text).unwrap()).unwrap()
    }

    #[test]
    fn headers_follow_the_engine_and_the_delay() {
        let out = delayed_run();
        let dde = engine_csv(&out.runs[0], out.system.derived.tau1);
        let me = engine_csv(&out.runs[1], out.system.derived.tau1);
        assert!(dde.starts_with("t,t_over_tau1,p1,p2,re_b1,im_b1,re_b2,im_b2\n"));
        assert!(me.starts_with("t,t_over_tau1,p1,p2,trace,min_eig\n"));

        let out = instantaneous_run();
        let dde = engine_csv(&out.runs[0], out.system.derived.tau1);
        let me = engine_csv(&out.runs[1], out.system.derived.tau1);
        assert!(dde.starts_with("t,p1,p2,re_b1,im_b1,re_b2,im_b2\n"));
        assert!(me.starts_with("t,p1,p2,trace,min_eig\n"));
    }

    #[test]
    fn every_sample_becomes_one_row_and_round_trips_exactly() {
        // fields are written with enough digits to reproduce the f64 bits
        let out = delayed_run();
        let tau1 = out.system.derived.tau1;
        let csv = engine_csv(&out.runs[0], tau1);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 21);
        for (i, line) in lines[1..].iter().enumerate() {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols.len(), 8);
            assert_eq!(cols[0].to_bits(), out.runs[0].t[i].to_bits());
            assert_eq!(
                cols[1].to_bits(),
                (out.runs[0].t[i] / tau1.unwrap()).to_bits()
            );
            assert_eq!(cols[2].to_bits(), out.runs[0].populations[i][0].to_bits());
            let b = out.runs[0].amplitudes.as_ref().unwrap()[i];
            assert_eq!(cols[4].to_bits(), b[0].re.to_bits());
            assert_eq!(cols[7].to_bits(), b[1].im.to_bits());
        }
    }

    #[test]
    fn write_all_produces_the_expected_files() {
        let out = delayed_run();
        let dir = unique_dir();
        let files = write_all(&out, &dir, "demo").unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["demo_dde.csv", "demo_me.csv", "demo_summary.json"]);
        for f in &files {
            assert!(f.exists(), "{f:?} missing");
        }

        let text = std::fs::read_to_string(&files[2]).unwrap();
        let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(
            summary["outputs"],
            serde_json::json!(["demo_dde.csv", "demo_me.csv"])
        );
        assert!(summary["checks"].as_array().unwrap().len() >= 3);
        let back: Config =
            serde_json::from_value(summary["config"].clone()).unwrap();
        assert_eq!(back, out.system.config);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
