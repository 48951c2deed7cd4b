//! The release checklist: nine physics and numerics criteria the simulator
//! is judged against, each self-contained and reporting its measured values.
//!
//! Every criterion builds its scenario from presets or explicit rates, runs
//! the engines through the public pipeline, and compares against analytic
//! expectations or an independent route. Bounds are fixed here, not tuned:
//! a criterion that the underlying approximation cannot meet stays red and
//! says why in its details.

use std::time::Instant;

use crate::analysis;
use crate::error::Error;
use crate::modes;
use crate::scenario::{
    self, Config, CouplingSpec, Engine, EngineRun, ExplicitRates, InitialState, NamedState,
    OracleGrid, TimeSpec, PRESET_NAMES,
};

#[derive(Debug, Clone)]
pub struct Criterion {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

fn fail(name: &'static str, err: Error) -> Criterion {
    Criterion {
        name,
        passed: false,
        details: format!("execution failed: {err}"),
    }
}

/// Largest pointwise gap between two runs over both populations. The runs
/// must share their grid.
fn population_distance(a: &EngineRun, b: &EngineRun) -> f64 {
    assert_eq!(a.t, b.t, "engine grids must agree");
    a.populations
        .iter()
        .zip(&b.populations)
        .map(|(p, q)| (p[0] - q[0]).abs().max((p[1] - q[1]).abs()))
        .fold(0.0, f64::max)
}

fn p1_distance(a: &EngineRun, b: &EngineRun) -> f64 {
    assert_eq!(a.t, b.t, "engine grids must agree");
    a.populations
        .iter()
        .zip(&b.populations)
        .map(|(p, q)| (p[0] - q[0]).abs())
        .fold(0.0, f64::max)
}

fn p1_of(run: &EngineRun) -> Vec<f64> {
    run.populations.iter().map(|p| p[0]).collect()
}

fn max_p2(run: &EngineRun) -> f64 {
    run.populations.iter().map(|p| p[1]).fold(0.0, f64::max)
}

/// Before the first photon round trip the second atom must stay in the
/// ground state exactly, and the first must decay at the bare exponential.
pub fn causality() -> Criterion {
    let name = "causality";
    let body = || {
        let mut config = scenario::preset("centered-12")?;
        config.engines = vec![Engine::Dde];
        let clock = Instant::now();
        let out = scenario::run(config)?;
        let elapsed = clock.elapsed().as_secs_f64();
        let tau1 = out.system.derived.tau1.expect("centered preset is retarded");
        let gamma11 = out.system.derived.self_rates[0];
        let run = &out.runs[0];
        let mut p2_early: f64 = 0.0;
        let mut p1_dev: f64 = 0.0;
        for (i, &t) in run.t.iter().enumerate() {
            if t <= tau1 {
                p2_early = p2_early.max(run.populations[i][1]);
            }
            if t <= 2.0 * tau1 {
                p1_dev = p1_dev.max((run.populations[i][0] - (-2.0 * gamma11 * t).exp()).abs());
            }
        }
        let passed = p2_early <= 1e-12 && p1_dev <= 1e-8 && elapsed < 1.0;
        Ok(Criterion {
            name,
            passed,
            details: format!(
                "max P2 before the light cone {p2_early:.3e} (need <= 1e-12), \
                 max |P1 - exp(-2*gamma11*t)| before the first echo {p1_dev:.3e} \
                 (need <= 1e-8), runtime {elapsed:.2} s (need < 1 s)"
            ),
        })
    };
    body().unwrap_or_else(|e| fail(name, e))
}

/// At gamma11*tau1 = 1 the retarded feedback carves a dip and a rebound
/// into P1 within the first two echo windows, and everything still decays.
pub fn revival_structure() -> Criterion {
    let name = "revival-structure";
    let body = || {
        let config = Config {
            cross_section: None,
            omega_a: None,
            modes: None,
            geometry: None,
            coupling: CouplingSpec {
                scale: None,
                explicit_rates: Some(ExplicitRates {
                    gamma11: 1.0,
                    tau1: 1.0,
                    k10_d: std::f64::consts::FRAC_PI_2,
                }),
            },
            initial_state: InitialState::Named(NamedState::Symmetric),
            engines: vec![Engine::Dde, Engine::Me],
            time: TimeSpec { t_end: 30.0, samples: 3001 },
            oracle: None,
            zero_gamma212: false,
            output: None,
        };
        let out = scenario::run(config)?;
        let p1 = p1_of(&out.runs[0]);
        let minima = analysis::local_minima(&out.runs[0].t, &p1);
        let maxima = analysis::local_maxima(&out.runs[0].t, &p1);
        let dip = minima.iter().find(|e| e.t > 1.0 && e.t < 2.0);
        let rebound = dip.and_then(|d| maxima.iter().find(|e| e.t > d.t && e.t < 3.0));
        let tail = |run: &EngineRun| {
            let p = run.populations.last().expect("runs are nonempty");
            p[0] + p[1]
        };
        let tail_dde = tail(&out.runs[0]);
        let tail_me = tail(&out.runs[1]);
        let passed =
            dip.is_some() && rebound.is_some() && tail_dde <= 1e-4 && tail_me <= 1e-4;
        let shape = match (dip, rebound) {
            (Some(d), Some(r)) => format!(
                "P1 dips at t = {:.4} (P1 = {:.6}) and rebounds at t = {:.4} (P1 = {:.6})",
                d.t, d.value, r.t, r.value
            ),
            (Some(d), None) => format!("P1 dips at t = {:.4} but never rebounds before 3*tau1", d.t),
            _ => "P1 has no local minimum inside (tau1, 2*tau1)".into(),
        };
        Ok(Criterion {
            name,
            passed,
            details: format!(
                "{shape}; P1+P2 at t = 30/gamma11: dde {tail_dde:.3e}, me {tail_me:.3e} \
                 (need <= 1e-4)"
            ),
        })
    };
    body().unwrap_or_else(|e| fail(name, e))
}

/// The discretized-continuum model and the retarded amplitude equations
/// must tell the same story at the default coupling, and the residual must
/// shrink when the continuum grid is refined and widened.
pub fn oracle_equivalence() -> Criterion {
    let name = "oracle-equivalence";
    let body = || {
        let mut config = scenario::preset("centered-12")?;
        config.engines = vec![Engine::Dde, Engine::Oracle];
        let clock = Instant::now();
        let out = scenario::run(config.clone())?;
        let elapsed = clock.elapsed().as_secs_f64();
        let sup = population_distance(&out.runs[0], &out.runs[1]);

        config.engines = vec![Engine::Oracle];
        config.oracle = Some(OracleGrid {
            n: 8001,
            linewidths: Some(2.0 * scenario::DEFAULT_ORACLE_LINEWIDTHS),
            k_max: None,
        });
        let refined = scenario::run(config)?;
        let sup_refined = population_distance(&out.runs[0], &refined.runs[0]);

        let passed = sup <= 5e-2 && sup_refined <= 0.5 * sup && elapsed < 60.0;
        Ok(Criterion {
            name,
            passed,
            details: format!(
                "sup population distance {sup:.4e} at defaults (need <= 5e-2), \
                 {sup_refined:.4e} with the grid and window doubled \
                 (need <= half, ratio {:.3}), runtime {elapsed:.1} s (need < 60 s)",
                sup_refined / sup
            ),
        })
    };
    body().unwrap_or_else(|e| fail(name, e))
}

/// With the second branch draining atom 2, the master equation must track
/// the retarded dynamics, and P2 must stay far below its single-branch peak.
pub fn markovian_recovery() -> Criterion {
    let name = "markovian-recovery";
    let body = || {
        let config = scenario::preset("offcenter-x")?;
        let out = scenario::run(config.clone())?;
        let sup_p1 = p1_distance(&out.runs[0], &out.runs[1]);

        let mut reference = config;
        reference.zero_gamma212 = true;
        let base = scenario::run(reference)?;
        let ratio_dde = max_p2(&out.runs[0]) / max_p2(&base.runs[0]);
        let ratio_me = max_p2(&out.runs[1]) / max_p2(&base.runs[1]);

        let passed = sup_p1 <= 0.05 && ratio_dde <= 0.05 && ratio_me <= 0.05;
        Ok(Criterion {
            name,
            passed,
            details: format!(
                "sup |P1_dde - P1_me| = {sup_p1:.4e} (need <= 0.05); \
                 max P2 relative to the single-branch run: dde {ratio_dde:.4}, \
                 me {ratio_me:.4} (need <= 0.05 each)"
            ),
        })
    };
    body().unwrap_or_else(|e| fail(name, e))
}

/// Removing the second branch restores the revival; keeping it must kill
/// the revival outright, leaving P1 monotone to within 1e-10.
pub fn revival_suppression() -> Criterion {
    let name = "revival-suppression";
    let body = || {
        let mut damped = scenario::preset("offcenter-x")?;
        damped.engines = vec![Engine::Dde];
        let mut bare = damped.clone();
        bare.zero_gamma212 = true;

        let out_bare = scenario::run(bare)?;
        let p1_bare = p1_of(&out_bare.runs[0]);
        let minima = analysis::local_minima(&out_bare.runs[0].t, &p1_bare);
        let maxima = analysis::local_maxima(&out_bare.runs[0].t, &p1_bare);
        let revival = minima
            .first()
            .and_then(|mn| maxima.iter().find(|mx| mx.t > mn.t));

        let out_damped = scenario::run(damped)?;
        let p1_damped = p1_of(&out_damped.runs[0]);
        let rise = analysis::max_increase(&p1_damped);

        let passed = revival.is_some() && rise <= 1e-10;
        let shape = match revival {
            Some(r) => format!(
                "single-branch run revives at t = {:.4} (P1 = {:.5})",
                r.t, r.value
            ),
            None => "single-branch run shows no revival".into(),
        };
        Ok(Criterion {
            name,
            passed,
            details: format!(
                "{shape}; with the second branch active the largest forward increase \
                 of P1 is {rise:.3e} (need <= 1e-10 for strict decrease)"
            ),
        })
    };
    body().unwrap_or_else(|e| fail(name, e))
}

/// Side-by-side atoms share a dark state; the trapped populations must land
/// on the analytic stationary values across a transverse-offset sweep.
pub fn dark_state_trapping() -> Criterion {
    let name = "dark-state-trapping";
    let body = || {
        let clock = Instant::now();
        let b = 0.5;
        let mut worst_abs: f64 = 0.0;
        let mut worst_ratio: f64 = 0.0;
        let mut quarter_case = String::new();
        for dy in [b / 8.0, b / 4.0, 3.0 * b / 8.0] {
            let mut config = scenario::preset("perp-y")?;
            config.geometry.as_mut().expect("preset has geometry").positions[1].y =
                0.25 + dy;
            let probe = scenario::assemble(config.clone())?;
            config.time.t_end = probe.me.settle_time()?;
            config.time.samples = 200;
            let expected = probe
                .derived
                .dark_state
                .expect("side-by-side scenario has a dark state")
                .stationary;
            let out = scenario::run(config)?;
            let ratio_expected = (std::f64::consts::PI * dy / b).cos().powi(2);
            for run in &out.runs {
                let p = run.populations.last().expect("runs are nonempty");
                let abs_err = (p[0] - expected[0]).abs().max((p[1] - expected[1]).abs());
                let ratio_err = (p[0] / p[1] - ratio_expected).abs();
                worst_abs = worst_abs.max(abs_err);
                worst_ratio = worst_ratio.max(ratio_err);
                if dy == b / 4.0 && run.engine == Engine::Dde {
                    quarter_case = format!(
                        "at dy = b/4 the dde settles to ({:.6}, {:.6}) vs (1/9, 2/9)",
                        p[0], p[1]
                    );
                    let exact = (p[0] - 1.0 / 9.0).abs().max((p[1] - 2.0 / 9.0).abs());
                    worst_abs = worst_abs.max(exact);
                }
            }
        }
        let elapsed = clock.elapsed().as_secs_f64();
        let passed = worst_abs <= 1e-3 && worst_ratio <= 1e-3 && elapsed < 5.0;
        Ok(Criterion {
            name,
            passed,
            details: format!(
                "{quarter_case}; worst stationary-population error {worst_abs:.3e} and \
                 worst P1/P2 ratio error {worst_ratio:.3e} over dy in {{b/8, b/4, 3b/8}} \
                 (need <= 1e-3), runtime {elapsed:.2} s (need < 5 s)"
            ),
        })
    };
    body().unwrap_or_else(|e| fail(name, e))
}

/// Atoms offset along x sit in an exactly Markovian spot: the two engines
/// must coincide and the second atom must barely light up.
pub fn perpendicular_freezing() -> Criterion {
    let name = "perpendicular-freezing";
    let body = || {
        let out = scenario::run(scenario::preset("perp-x")?)?;
        let sup = population_distance(&out.runs[0], &out.runs[1]);
        let peak = max_p2(&out.runs[0]).max(max_p2(&out.runs[1]));
        let passed = sup <= 1e-6 && peak <= 0.02;
        Ok(Criterion {
            name,
            passed,
            details: format!(
                "sup engine distance {sup:.3e} (need <= 1e-6), \
                 max P2 {peak:.4} (need <= 0.02)"
            ),
        })
    };
    body().unwrap_or_else(|e| fail(name, e))
}

/// Density-matrix hygiene across every preset: unit trace, positive
/// spectrum, and an empty doubly excited state.
pub fn lindblad_sanity() -> Criterion {
    let name = "lindblad-sanity";
    let body = || {
        let mut worst_trace: f64 = 0.0;
        let mut worst_eig: f64 = f64::INFINITY;
        let mut worst_leak: f64 = 0.0;
        let mut all_passed = true;
        for preset in PRESET_NAMES {
            let out = scenario::run(scenario::preset(preset)?)?;
            for check in &out.checks {
                if check.engine != "me" {
                    continue;
                }
                all_passed &= check.passed;
                match check.name {
                    "trace_drift" => worst_trace = worst_trace.max(check.value),
                    "min_eigenvalue" => worst_eig = worst_eig.min(check.value),
                    "double_excitation" => worst_leak = worst_leak.max(check.value),
                    _ => {}
                }
            }
        }
        Ok(Criterion {
            name,
            passed: all_passed,
            details: format!(
                "across all presets: trace drift {worst_trace:.3e} (need <= 1e-10), \
                 min eigenvalue {worst_eig:.3e} (need >= -1e-10), \
                 double-excitation leakage {worst_leak:.3e} (need <= 1e-12)"
            ),
        })
    };
    body().unwrap_or_else(|e| fail(name, e))
}

/// The cross rate must satisfy its product identity bit-for-bit, and the
/// collective rates must match an independent complex-phase evaluation.
pub fn rate_algebra() -> Criterion {
    let name = "rate-algebra";
    let body = || {
        let off = scenario::assemble(scenario::preset("offcenter-x")?)?;
        let rates = off.derived.channel_rates.expect("geometric scenario has rates");
        let product_exact = rates.gamma12 * rates.gamma12 == rates.gamma11 * rates.gamma22;

        let sys = scenario::assemble(scenario::preset("centered-12")?)?;
        let low = sys.derived.branches[0];
        let geometry = sys.config.geometry.as_ref().expect("preset has geometry");
        let z = [geometry.positions[0].z, geometry.positions[1].z];
        let a = modes::collective_rates(low.g_renorm, low.k0, z, low.v);
        let mut dev: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                dev = dev.max((sys.me.gamma[i][j] - 2.0 * a[i][j].re).abs());
            }
        }
        dev = dev.max((sys.me.exchange - 2.0 * a[0][1].im).abs());

        let passed = product_exact && dev <= 1e-12;
        Ok(Criterion {
            name,
            passed,
            details: format!(
                "gamma12^2 == gamma11*gamma22 exactly: {product_exact}; \
                 collective rates vs the complex-phase route differ by {dev:.3e} \
                 (need <= 1e-12), Gamma12 = {:.16}, U12 = {:.16}",
                sys.me.gamma[0][1], sys.me.exchange
            ),
        })
    };
    body().unwrap_or_else(|e| fail(name, e))
}

/// Every criterion in order.
pub fn run_all() -> Vec<Criterion> {
    vec![
        causality(),
        revival_structure(),
        oracle_equivalence(),
        markovian_recovery(),
        revival_suppression(),
        dark_state_trapping(),
        perpendicular_freezing(),
        lindblad_sanity(),
        rate_algebra(),
    ]
}
