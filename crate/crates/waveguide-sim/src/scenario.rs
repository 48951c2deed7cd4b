//! Run descriptions and their reduction to engine inputs.
//!
//! A [`Config`] is a JSON-serializable description of one simulation: the
//! waveguide geometry and couplings (or explicitly given rates), the initial
//! state, the horizon, and which engines to run. [`assemble`] validates it
//! and derives everything the engines need; [`run`] executes the requested
//! engines on a shared output grid and attaches per-engine sanity checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::lindblad::{self, MasterEquation};
use crate::modes::{
    channel_rates, coupling_strength, group_velocity, midpoint_frequency, propagating_modes,
    resonant_wavevector, AtomPosition, ChannelRates, CrossSection, TmMode, PI,
};
use crate::oracle::{Branch, ContinuumModel, OracleSolution, GOLDEN_RULE_CALIBRATION};
use crate::retarded::{self, Channel, DdeSystem};

pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_ORACLE_MODES: usize = 4001;
pub const DEFAULT_ORACLE_LINEWIDTHS: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Waveguide cross section; required unless rates are given explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_section: Option<CrossSection>,
    /// Atomic transition frequency; "midpoint" picks the mean of the first
    /// and third candidate cutoffs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_a: Option<OmegaSpec>,
    /// Candidate TM modes as [m, n] pairs; only those whose cutoff lies
    /// below omega_a become branches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<[u32; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
    pub coupling: CouplingSpec,
    pub initial_state: InitialState,
    pub engines: Vec<Engine>,
    pub time: TimeSpec,
    /// Discretization of the continuum validator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleGrid>,
    /// Drop every branch above the lowest one, turning off the extra decay
    /// channel the second branch opens for atom 2.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero_gamma212: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Rule(OmegaRule),
    Explicit { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OmegaRule {
    #[serde(rename = "midpoint")]
    Midpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub positions: [AtomPosition; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    /// Renormalized coupling of a centered atom to a branch, divided by the
    /// branch cutoff; the single overall coupling knob.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Bypass the geometry and hand the symmetric two-atom system its rates
    /// directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_rates: Option<ExplicitRates>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRates {
    pub gamma11: f64,
    pub tau1: f64,
    pub k10_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(NamedState),
    Amplitudes { amplitudes: [[f64; 2]; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedState {
    #[serde(rename = "excited-1")]
    Excited1,
    #[serde(rename = "excited-2")]
    Excited2,
    #[serde(rename = "symmetric")]
    Symmetric,
    #[serde(rename = "antisymmetric")]
    Antisymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Dde,
    Me,
    Oracle,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Dde => "dde",
            Engine::Me => "me",
            Engine::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleGrid {
    /// k-grid points per branch; odd.
    #[serde(default = "default_oracle_n")]
    pub n: usize,
    /// Half-width of the k window, in linewidths of the branch's strongest
    /// self rate above resonance. Mutually exclusive with `k_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidths: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
}

fn default_oracle_n() -> usize {
    DEFAULT_ORACLE_MODES
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid { n: DEFAULT_ORACLE_MODES, linewidths: None, k_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_prefix() -> String {
    "run".into()
}

/// One propagating branch, fully resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeSummary {
    pub m: u32,
    pub n: u32,
    pub cutoff: f64,
    pub k0: f64,
    pub v: f64,
    /// Renormalized couplings of the two atoms (signed).
    pub g_renorm: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollectiveSummary {
    /// Damping matrix of the lowest branch at the actual separation.
    pub gamma: [[f64; 2]; 2],
    /// Coherent exchange through the lowest branch.
    pub u12: f64,
    /// Extra decay of atom 2 through the branches above the lowest.
    pub extra_damping_2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DarkSummary {
    pub c: [f64; 2],
    pub stationary: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivedSummary {
    pub omega_a: f64,
    pub branches: Vec<ModeSummary>,
    pub self_rates: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_rates: Option<ChannelRates>,
    pub collective: CollectiveSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dark_state: Option<DarkSummary>,
}

/// A validated scenario with every engine input derived.
#[derive(Debug, Clone)]
pub struct System {
    pub config: Config,
    pub derived: DerivedSummary,
    pub psi0: [Complex64; 2],
    pub dde: DdeSystem,
    pub me: MasterEquation,
    pub continuum: Option<ContinuumModel>,
}

fn initial_amplitudes(state: &InitialState) -> Result<[Complex64; 2]> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = match state {
        InitialState::Named(NamedState::Excited1) => {
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        }
        InitialState::Named(NamedState::Excited2) => {
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
        }
        InitialState::Named(NamedState::Symmetric) => {
            [Complex64::new(s, 0.0), Complex64::new(s, 0.0)]
        }
        InitialState::Named(NamedState::Antisymmetric) => {
            [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)]
        }
        InitialState::Amplitudes { amplitudes } => [
            Complex64::new(amplitudes[0][0], amplitudes[0][1]),
            Complex64::new(amplitudes[1][0], amplitudes[1][1]),
        ],
    };
    let norm = psi[0].norm_sqr() + psi[1].norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "initial amplitudes must be normalized, got |psi|^2 = {norm}"
        )));
    }
    Ok(psi)
}

fn validate_time(time: &TimeSpec) -> Result<()> {
    if !(time.t_end.is_finite() && time.t_end > 0.0) {
        return Err(Error::Config(format!(
            "time.t_end must be positive, got {}",
            time.t_end
        )));
    }
    if time.samples < 2 {
        return Err(Error::Config(format!(
            "time.samples must be at least 2, got {}",
            time.samples
        )));
    }
    Ok(())
}

fn validate_engines(engines: &[Engine]) -> Result<()> {
    if engines.is_empty() {
        return Err(Error::Config("engines must name at least one engine".into()));
    }
    for (i, e) in engines.iter().enumerate() {
        if engines[..i].contains(e) {
            return Err(Error::Config(format!("engine '{}' listed twice", e.name())));
        }
    }
    Ok(())
}

pub fn assemble(config: Config) -> Result<System> {
    validate_time(&config.time)?;
    validate_engines(&config.engines)?;
    let psi0 = initial_amplitudes(&config.initial_state)?;

    match (config.coupling.scale, config.coupling.explicit_rates) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "coupling takes either a scale or explicit rates, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Config(
                "coupling needs either a scale or explicit rates".into(),
            ))
        }
        (Some(_), None) => assemble_geometric(config, psi0),
        (None, Some(rates)) => {
            // Geometric fields have no meaning when rates are set directly.
            for (given, field) in [
                (config.cross_section.is_some(), "cross_section"),
                (config.omega_a.is_some(), "omega_a"),
                (config.modes.is_some(), "modes"),
                (config.geometry.is_some(), "geometry"),
                (config.oracle.is_some(), "oracle"),
                (config.zero_gamma212, "zero_gamma212"),
            ] {
                if given {
                    return Err(Error::Config(format!(
                        "{field} cannot be combined with coupling.explicit_rates"
                    )));
                }
            }
            if config.engines.contains(&Engine::Oracle) {
                return Err(Error::Config(
                    "the oracle engine needs waveguide geometry, not explicit rates".into(),
                ));
            }
            assemble_explicit(config, rates, psi0)
        }
    }
    .map(|mut sys| {
        // Freeze defaults into the stored config so the summary round-trips.
        if sys.config.coupling.scale.is_some() {
            sys.config
                .modes
                .get_or_insert_with(default_candidate_modes);
            sys.config.oracle.get_or_insert_with(OracleGrid::default);
        }
        sys
    })
}

pub fn default_candidate_modes() -> Vec<[u32; 2]> {
    vec![[1, 1], [2, 1], [3, 1]]
}

fn assemble_geometric(config: Config, psi0: [Complex64; 2]) -> Result<System> {
    let cs = config
        .cross_section
        .ok_or_else(|| Error::Config("cross_section is required with coupling.scale".into()))?;
    cs.validate()?;
    let scale = config.coupling.scale.unwrap();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Config(format!(
            "coupling.scale must be positive, got {scale}"
        )));
    }

    let mode_list = config
        .modes
        .clone()
        .unwrap_or_else(default_candidate_modes);
    if mode_list.is_empty() {
        return Err(Error::Config("modes must list at least one candidate".into()));
    }
    let mut candidates = Vec::with_capacity(mode_list.len());
    for [m, n] in &mode_list {
        let mode = TmMode::new(*m, *n);
        mode.validate()?;
        if candidates.contains(&mode) {
            return Err(Error::Config(format!("mode [{m}, {n}] listed twice")));
        }
        candidates.push(mode);
    }

    let omega_a = match config
        .omega_a
        .ok_or_else(|| Error::Config("omega_a is required with coupling.scale".into()))?
    {
        OmegaSpec::Rule(OmegaRule::Midpoint) => midpoint_frequency(&candidates, &cs)?,
        OmegaSpec::Explicit { value } => {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "omega_a.value must be positive, got {value}"
                )));
            }
            value
        }
    };

    let geometry = config
        .geometry
        .clone()
        .ok_or_else(|| Error::Config("geometry is required with coupling.scale".into()))?;
    for p in &geometry.positions {
        p.validate(&cs)?;
    }
    let z = [geometry.positions[0].z, geometry.positions[1].z];
    let d = (z[0] - z[1]).abs();

    let mut propagating = propagating_modes(&candidates, &cs, omega_a);
    if propagating.is_empty() {
        return Err(Error::Config(format!(
            "no candidate mode propagates at omega_a = {omega_a}"
        )));
    }
    if config.zero_gamma212 {
        propagating.truncate(1);
    }

    struct BranchData {
        mode: TmMode,
        k0: f64,
        v: f64,
        g_renorm: [f64; 2],
        g_raw: [f64; 2],
    }
    let branches: Vec<BranchData> = propagating
        .iter()
        .map(|mode| {
            let cutoff = mode.cutoff(&cs);
            let k0 = resonant_wavevector(cutoff, omega_a).expect("propagating branch");
            let v = group_velocity(cutoff, omega_a).expect("propagating branch");
            let g = [
                coupling_strength(mode, &cs, &geometry.positions[0], scale, omega_a),
                coupling_strength(mode, &cs, &geometry.positions[1], scale, omega_a),
            ];
            BranchData {
                mode: *mode,
                k0,
                v,
                g_renorm: [g[0].g_renorm, g[1].g_renorm],
                g_raw: [g[0].g_raw, g[1].g_raw],
            }
        })
        .collect();

    let mut self_rates = [0.0f64; 2];
    let mut channels = Vec::new();
    for br in &branches {
        for l in 0..2 {
            self_rates[l] += PI * br.g_renorm[l] * br.g_renorm[l] / br.v;
        }
        let kappa = PI * br.g_renorm[0] * br.g_renorm[1] / br.v;
        if kappa != 0.0 {
            let (delay, phase) = if d > 0.0 { (d / br.v, br.k0 * d) } else { (0.0, 0.0) };
            channels.push(Channel { target: 0, source: 1, strength: kappa, delay, phase });
            channels.push(Channel { target: 1, source: 0, strength: kappa, delay, phase });
        }
    }
    let dde = DdeSystem { self_rates, channels };

    // Markovian reduction: collective damping through the lowest branch,
    // private damping of atom 2 through the rest. A geometry that couples
    // atom 1 to an upper branch has no such reduction here.
    let low = &branches[0];
    let g11 = low.g_renorm[0];
    let g12 = low.g_renorm[1];
    let gamma11 = PI * g11 * g11 / low.v;
    let gamma12 = PI * g11 * g12 / low.v;
    let gamma22 = PI * g12 * g12 / low.v;
    let phi = low.k0 * d;
    let mut extra2 = 0.0;
    let mut me_obstruction = None;
    for br in &branches[1..] {
        if br.g_renorm[0] != 0.0 {
            me_obstruction = Some(format!(
                "atom 1 couples to branch TM{}{}; the Markovian engine only \
                 supports upper-branch damping on atom 2",
                br.mode.m, br.mode.n
            ));
        }
        extra2 += PI * br.g_renorm[1] * br.g_renorm[1] / br.v;
    }
    if config.engines.contains(&Engine::Me) {
        if let Some(reason) = &me_obstruction {
            return Err(Error::Config(reason.clone()));
        }
    }
    let me = MasterEquation {
        omega_a,
        gamma: [
            [2.0 * gamma11, 2.0 * gamma12 * phi.cos()],
            [2.0 * gamma12 * phi.cos(), 2.0 * gamma22],
        ],
        exchange: 2.0 * gamma12 * phi.sin(),
        extra_damping_2: extra2,
    };

    let grid = config.oracle.clone().unwrap_or_default();
    if grid.n < 3 || grid.n % 2 == 0 {
        return Err(Error::Config(format!(
            "oracle.n must be odd and >= 3, got {}",
            grid.n
        )));
    }
    if grid.linewidths.is_some() && grid.k_max.is_some() {
        return Err(Error::Config(
            "oracle takes either linewidths or k_max, not both".into(),
        ));
    }
    if let Some(nlw) = grid.linewidths {
        if !(nlw.is_finite() && nlw > 0.0) {
            return Err(Error::Config(format!(
                "oracle.linewidths must be positive, got {nlw}"
            )));
        }
    }
    if let Some(k_max) = grid.k_max {
        if !(k_max.is_finite() && k_max > 0.0) {
            return Err(Error::Config(format!(
                "oracle.k_max must be positive, got {k_max}"
            )));
        }
    }
    let mut cont_branches = Vec::new();
    for br in &branches {
        if br.g_raw[0] == 0.0 && br.g_raw[1] == 0.0 {
            continue;
        }
        let k_max = match grid.k_max {
            Some(k) => k,
            None => {
                let gref = (PI * br.g_renorm[0] * br.g_renorm[0] / br.v)
                    .max(PI * br.g_renorm[1] * br.g_renorm[1] / br.v);
                let w_max =
                    omega_a + grid.linewidths.unwrap_or(DEFAULT_ORACLE_LINEWIDTHS) * gref;
                resonant_wavevector(br.mode.cutoff(&cs), w_max).expect("window above cutoff")
            }
        };
        cont_branches.push(Branch {
            cutoff: br.mode.cutoff(&cs),
            g_raw: br.g_raw,
            n_modes: grid.n,
            k_max,
        });
    }
    let continuum = if cont_branches.is_empty() {
        None
    } else {
        Some(ContinuumModel {
            omega_a,
            z,
            branches: cont_branches,
            calibration: GOLDEN_RULE_CALIBRATION,
        })
    };
    if config.engines.contains(&Engine::Oracle) && continuum.is_none() {
        return Err(Error::Config(
            "the oracle engine needs at least one coupled branch".into(),
        ));
    }

    let tau1 = if d > 0.0 { Some(d / low.v) } else { None };
    let dark_state = if tau1.is_none() && extra2 == 0.0 {
        analysis::dark_state([g11, g12]).map(|ds| DarkSummary {
            c: ds.c,
            stationary: analysis::stationary_populations(&ds, psi0),
        })
    } else {
        None
    };

    let derived = DerivedSummary {
        omega_a,
        branches: branches
            .iter()
            .map(|br| ModeSummary {
                m: br.mode.m,
                n: br.mode.n,
                cutoff: br.mode.cutoff(&cs),
                k0: br.k0,
                v: br.v,
                g_renorm: br.g_renorm,
            })
            .collect(),
        self_rates,
        channel_rates: Some(channel_rates(
            g11,
            g12,
            branches.get(1).map_or(0.0, |br| br.g_renorm[1]),
            low.v,
            branches.get(1).map_or(1.0, |br| br.v),
        )),
        collective: CollectiveSummary {
            gamma: me.gamma,
            u12: me.exchange,
            extra_damping_2: extra2,
        },
        tau1,
        separation: Some(d),
        dark_state,
    };

    Ok(System { config, derived, psi0, dde, me, continuum })
}

fn assemble_explicit(config: Config, rates: ExplicitRates, psi0: [Complex64; 2]) -> Result<System> {
    let ExplicitRates { gamma11, tau1, k10_d } = rates;
    if !(gamma11.is_finite() && gamma11 > 0.0) {
        return Err(Error::Config(format!(
            "explicit_rates.gamma11 must be positive, got {gamma11}"
        )));
    }
    if !(tau1.is_finite() && tau1 >= 0.0) {
        return Err(Error::Config(format!(
            "explicit_rates.tau1 must be >= 0, got {tau1}"
        )));
    }
    if !k10_d.is_finite() {
        return Err(Error::Config("explicit_rates.k10_d must be finite".into()));
    }

    let dde = DdeSystem {
        self_rates: [gamma11, gamma11],
        channels: vec![
            Channel { target: 0, source: 1, strength: gamma11, delay: tau1, phase: k10_d },
            Channel { target: 1, source: 0, strength: gamma11, delay: tau1, phase: k10_d },
        ],
    };
    let me = MasterEquation {
        omega_a: 0.0,
        gamma: [
            [2.0 * gamma11, 2.0 * gamma11 * k10_d.cos()],
            [2.0 * gamma11 * k10_d.cos(), 2.0 * gamma11],
        ],
        exchange: 2.0 * gamma11 * k10_d.sin(),
        extra_damping_2: 0.0,
    };

    let tau = if tau1 > 0.0 { Some(tau1) } else { None };
    let dark_state = if tau.is_none() && (k10_d.cos().abs() - 1.0).abs() < 1e-12 {
        let sign = if k10_d.cos() >= 0.0 { 1.0 } else { -1.0 };
        analysis::dark_state([1.0, sign]).map(|ds| DarkSummary {
            c: ds.c,
            stationary: analysis::stationary_populations(&ds, psi0),
        })
    } else {
        None
    };

    let derived = DerivedSummary {
        omega_a: 0.0,
        branches: vec![],
        self_rates: [gamma11, gamma11],
        channel_rates: Some(ChannelRates {
            gamma11,
            gamma12: gamma11,
            gamma22: gamma11,
            gamma212: 0.0,
        }),
        collective: CollectiveSummary {
            gamma: me.gamma,
            u12: me.exchange,
            extra_damping_2: 0.0,
        },
        tau1: tau,
        separation: None,
        dark_state,
    };

    Ok(System { config, derived, psi0, dde, me, continuum: None })
}

/// One engine's populations on the shared output grid, plus whatever extra
/// signal that engine produces.
#[derive(Debug, Clone)]
pub struct EngineRun {
    pub engine: Engine,
    pub t: Vec<f64>,
    pub populations: Vec<[f64; 2]>,
    pub amplitudes: Option<Vec<[Complex64; 2]>>,
    pub trace: Option<Vec<f64>>,
    pub min_eig: Option<Vec<f64>>,
    /// Population of the doubly excited state; the dynamics never feeds it
    /// from the single-excitation sector.
    pub double_excitation: Option<Vec<f64>>,
    pub norm_drift: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SanityCheck {
    pub engine: &'static str,
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug)]
pub struct RunOutput {
    pub system: System,
    pub runs: Vec<EngineRun>,
    pub checks: Vec<SanityCheck>,
}

fn run_dde(sys: &System) -> Result<EngineRun> {
    let sol = retarded::integrate(
        &sys.dde,
        sys.psi0,
        sys.config.time.t_end,
        sys.config.time.samples,
    )?;
    Ok(EngineRun {
        engine: Engine::Dde,
        populations: sol.populations(),
        t: sol.t,
        amplitudes: Some(sol.b),
        trace: None,
        min_eig: None,
        double_excitation: None,
        norm_drift: None,
    })
}

fn run_me(sys: &System) -> Result<EngineRun> {
    let n = sys.config.time.samples;
    let ts: Vec<f64> = (0..n)
        .map(|i| sys.config.time.t_end * i as f64 / (n - 1) as f64)
        .collect();
    let rho0 = lindblad::pure_state(lindblad::single_excitation(sys.psi0));
    let rhos = sys.me.propagate(&rho0, &ts)?;
    let mut populations = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    let mut min_eig = Vec::with_capacity(n);
    let mut double_excitation = Vec::with_capacity(n);
    for rho in &rhos {
        populations.push(lindblad::populations(rho));
        trace.push(lindblad::trace(rho).re);
        min_eig.push(lindblad::min_eigenvalue(rho));
        double_excitation.push(rho[(3, 3)].re);
    }
    Ok(EngineRun {
        engine: Engine::Me,
        t: ts,
        populations,
        amplitudes: None,
        trace: Some(trace),
        min_eig: Some(min_eig),
        double_excitation: Some(double_excitation),
        norm_drift: None,
    })
}

fn run_oracle(sys: &System) -> Result<EngineRun> {
    let model = sys.continuum.as_ref().ok_or_else(|| {
        Error::Config("this scenario has no continuum model for the oracle engine".into())
    })?;
    let sol: OracleSolution = crate::oracle::simulate(
        model,
        sys.psi0,
        sys.config.time.t_end,
        sys.config.time.samples,
    )?;
    Ok(EngineRun {
        engine: Engine::Oracle,
        populations: sol.populations(),
        t: sol.t,
        amplitudes: Some(sol.b),
        trace: None,
        min_eig: None,
        double_excitation: None,
        norm_drift: Some(sol.norm_drift),
    })
}

fn sanity_checks(run: &EngineRun) -> Vec<SanityCheck> {
    let mut checks = Vec::new();
    match run.engine {
        Engine::Dde | Engine::Oracle => {
            let max_total = run
                .populations
                .iter()
                .map(|p| p[0] + p[1])
                .fold(0.0, f64::max);
            checks.push(SanityCheck {
                engine: run.engine.name(),
                name: "population_bounded",
                value: max_total,
                bound: 1.0 + 1e-9,
                passed: max_total <= 1.0 + 1e-9,
            });
            if let Some(drift) = run.norm_drift {
                checks.push(SanityCheck {
                    engine: run.engine.name(),
                    name: "norm_drift",
                    value: drift,
                    bound: 1e-6,
                    passed: drift <= 1e-6,
                });
            }
        }
        Engine::Me => {
            let trace = run.trace.as_ref().expect("me run carries traces");
            let min_eig = run.min_eig.as_ref().expect("me run carries eigenvalues");
            let ee = run
                .double_excitation
                .as_ref()
                .expect("me run carries the doubly excited population");
            let drift = trace.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
            let worst_eig = min_eig.iter().copied().fold(f64::INFINITY, f64::min);
            let leak = ee.iter().map(|p| p.abs()).fold(0.0, f64::max);
            checks.push(SanityCheck {
                engine: "me",
                name: "trace_drift",
                value: drift,
                bound: 1e-10,
                passed: drift <= 1e-10,
            });
            checks.push(SanityCheck {
                engine: "me",
                name: "min_eigenvalue",
                value: worst_eig,
                bound: -1e-10,
                passed: worst_eig >= -1e-10,
            });
            checks.push(SanityCheck {
                engine: "me",
                name: "double_excitation",
                value: leak,
                bound: 1e-12,
                passed: leak <= 1e-12,
            });
        }
    }
    checks
}

/// Assemble and execute every requested engine.
pub fn run(config: Config) -> Result<RunOutput> {
    let system = assemble(config)?;
    let mut runs = Vec::new();
    let mut checks = Vec::new();
    for engine in &system.config.engines {
        let run = match engine {
            Engine::Dde => run_dde(&system)?,
            Engine::Me => run_me(&system)?,
            Engine::Oracle => run_oracle(&system)?,
        };
        checks.extend(sanity_checks(&run));
        runs.push(run);
    }
    Ok(RunOutput { system, runs, checks })
}

/// Set `path` (dot-separated, array indices numeric) inside a JSON tree to
/// `raw` parsed as JSON, falling back to a plain string.
pub fn apply_override(tree: &mut serde_json::Value, path: &str, raw: &str) -> Result<()> {
    let leaf: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = tree;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("override path '{path}' has an empty segment")));
    }
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = node.as_array_mut().ok_or_else(|| {
                Error::Config(format!("override path '{path}': '{seg}' indexes a non-array"))
            })?;
            if idx >= arr.len() {
                return Err(Error::Config(format!(
                    "override path '{path}': index {idx} out of range (len {})",
                    arr.len()
                )));
            }
            if last {
                arr[idx] = leaf;
                return Ok(());
            }
            node = &mut arr[idx];
        } else {
            if node.is_null() {
                *node = serde_json::Value::Object(serde_json::Map::new());
            }
            let obj = node.as_object_mut().ok_or_else(|| {
                Error::Config(format!(
                    "override path '{path}': '{seg}' selects a field of a non-object"
                ))
            })?;
            if last {
                obj.insert(seg.to_string(), leaf);
                return Ok(());
            }
            node = obj
                .entry(seg.to_string())
                .or_insert(serde_json::Value::Null);
        }
    }
    unreachable!("loop returns on the last segment");
}

/// Apply `key=value` overrides to a config and re-validate the result.
pub fn override_config(config: &Config, overrides: &[String]) -> Result<Config> {
    let mut tree = serde_json::to_value(config)
        .map_err(|e| Error::Config(format!("config serialization failed: {e}")))?;
    for item in overrides {
        let (path, raw) = item.split_once('=').ok_or_else(|| {
            Error::Config(format!("override '{item}' is not of the form path=value"))
        })?;
        apply_override(&mut tree, path.trim(), raw)?;
    }
    serde_json::from_value(tree).map_err(|e| Error::Config(format!("invalid config after overrides: {e}")))
}

pub const PRESET_NAMES: [&str; 5] = [
    "centered-12",
    "centered-24",
    "offcenter-x",
    "perp-x",
    "perp-y",
];

/// Built-in scenarios. Separations written as n/k10 place the atoms n phase
/// units apart along the lowest branch.
pub fn preset(name: &str) -> Result<Config> {
    let cs = CrossSection { a: 1.0, b: 0.5 };
    let candidates: Vec<TmMode> = default_candidate_modes()
        .iter()
        .map(|[m, n]| TmMode::new(*m, *n))
        .collect();
    let omega_a = midpoint_frequency(&candidates, &cs)?;
    let lowest = candidates[0].cutoff(&cs);
    let k10 = resonant_wavevector(lowest, omega_a).expect("lowest branch propagates");
    let v1 = group_velocity(lowest, omega_a).expect("lowest branch propagates");
    let center = AtomPosition { x: 0.5, y: 0.25, z: 0.0 };

    let mut config = Config {
        cross_section: Some(cs),
        omega_a: Some(OmegaSpec::Rule(OmegaRule::Midpoint)),
        modes: None,
        geometry: None,
        coupling: CouplingSpec { scale: Some(0.08), explicit_rates: None },
        initial_state: InitialState::Named(NamedState::Excited1),
        engines: vec![Engine::Dde, Engine::Me],
        time: TimeSpec { t_end: 1.0, samples: DEFAULT_SAMPLES },
        oracle: None,
        zero_gamma212: false,
        output: None,
    };

    match name {
        "centered-12" | "centered-24" => {
            let d = if name == "centered-12" { 12.0 / k10 } else { 24.0 / k10 };
            config.geometry = Some(Geometry {
                positions: [center, AtomPosition { z: d, ..center }],
            });
            config.time.t_end = 5.0 * d / v1;
        }
        "offcenter-x" => {
            let d = 12.0 / k10;
            config.geometry = Some(Geometry {
                positions: [center, AtomPosition { x: 0.75, y: 0.25, z: d }],
            });
            config.time.t_end = 5.0 * d / v1;
        }
        "perp-x" => {
            config.geometry = Some(Geometry {
                positions: [center, AtomPosition { x: 0.75, y: 0.25, z: 0.0 }],
            });
            config.time.t_end = 8.0;
        }
        "perp-y" => {
            config.geometry = Some(Geometry {
                positions: [center, AtomPosition { x: 0.5, y: 0.375, z: 0.0 }],
            });
            config.time.t_end = 12.0;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}'; available: {}",
                PRESET_NAMES.join(", ")
            )));
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const GAM11: f64 = 1.5422190509776623;
    const GAM12X: f64 = 1.0905135490213869;
    const GAM22X: f64 = 0.7711095254888312;
    const GAM212: f64 = 6.3624279075364765;
    const TAU1: f64 = 3.159519619608202;

    #[test]
    fn centered_preset_reduces_to_the_symmetric_pair() {
        let sys = assemble(preset("centered-12").unwrap()).unwrap();
        assert_relative_eq!(sys.dde.self_rates[0], GAM11, max_relative = 1e-13);
        assert_relative_eq!(sys.dde.self_rates[1], GAM11, max_relative = 1e-13);
        // Both atoms sit on the TM21 nodal plane, so only one branch remains
        // and both cross channels run through it.
        assert_eq!(sys.dde.channels.len(), 2);
        let ch = &sys.dde.channels[0];
        assert_relative_eq!(ch.strength, GAM11, max_relative = 1e-13);
        assert_relative_eq!(ch.delay, TAU1, max_relative = 1e-13);
        assert_relative_eq!(ch.phase, 12.0, max_relative = 1e-13);
        assert_eq!(sys.derived.branches.len(), 2);
        assert_eq!(sys.derived.branches[1].g_renorm, [0.0, 0.0]);
        assert_eq!(sys.me.extra_damping_2, 0.0);
        assert_relative_eq!(
            sys.me.gamma[0][1],
            2.0 * GAM11 * 12.0f64.cos(),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            sys.me.exchange,
            2.0 * GAM11 * 12.0f64.sin(),
            max_relative = 1e-13
        );
        // One continuum branch: the TM21 couplings vanish identically.
        assert_eq!(sys.continuum.as_ref().unwrap().branches.len(), 1);
        assert_eq!(sys.derived.dark_state, None);
        assert_relative_eq!(sys.derived.tau1.unwrap(), TAU1, max_relative = 1e-13);
    }

    #[test]
    fn offcenter_preset_rates() {
        let sys = assemble(preset("offcenter-x").unwrap()).unwrap();
        let rates = sys.derived.channel_rates.unwrap();
        assert_relative_eq!(rates.gamma11, GAM11, max_relative = 1e-13);
        assert_relative_eq!(rates.gamma12, GAM12X, max_relative = 1e-13);
        assert_relative_eq!(rates.gamma22, GAM22X, max_relative = 1e-13);
        assert_relative_eq!(rates.gamma212, GAM212, max_relative = 1e-13);
        // The cross rate is tied to the self rates by the shared overlap.
        assert_eq!(rates.gamma12 * rates.gamma12, rates.gamma11 * rates.gamma22);
        assert_relative_eq!(sys.me.extra_damping_2, GAM212, max_relative = 1e-13);
        assert_relative_eq!(
            sys.dde.self_rates[1],
            GAM22X + GAM212,
            max_relative = 1e-13
        );
        // Atom 1 is nodal on TM21, so the upper branch carries no channel.
        assert_eq!(sys.dde.channels.len(), 2);
    }

    #[test]
    fn zero_gamma212_drops_the_upper_branch() {
        let mut config = preset("offcenter-x").unwrap();
        config.zero_gamma212 = true;
        let sys = assemble(config).unwrap();
        assert_eq!(sys.me.extra_damping_2, 0.0);
        assert_relative_eq!(sys.dde.self_rates[1], GAM22X, max_relative = 1e-13);
        assert_eq!(sys.derived.branches.len(), 1);
        assert_eq!(sys.continuum.as_ref().unwrap().branches.len(), 1);
    }

    #[test]
    fn perp_y_preset_predicts_the_trapped_populations() {
        let sys = assemble(preset("perp-y").unwrap()).unwrap();
        assert_eq!(sys.derived.tau1, None);
        assert_eq!(sys.me.extra_damping_2, 0.0);
        assert_eq!(sys.me.exchange, 0.0);
        let dark = sys.derived.dark_state.unwrap();
        assert_relative_eq!(dark.stationary[0], 1.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(dark.stationary[1], 2.0 / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn explicit_rates_build_the_symmetric_system() {
        let text = r#"{
            "coupling": {"explicit_rates": {"gamma11": 1.0, "tau1": 1.0, "k10_d": 1.5707963267948966}},
            "initial_state": "symmetric",
            "engines": ["dde", "me"],
            "time": {"t_end": 30.0}
        }"#;
        let sys = assemble(Config::from_json(text).unwrap()).unwrap();
        assert_eq!(sys.dde.self_rates, [1.0, 1.0]);
        assert_eq!(sys.dde.channels[0].delay, 1.0);
        assert_eq!(sys.config.time.samples, DEFAULT_SAMPLES);
        assert!((sys.me.exchange - 2.0).abs() < 1e-12);
        assert!(sys.me.gamma[0][1].abs() < 1e-12);
        assert!(sys.continuum.is_none());
    }

    #[test]
    fn explicit_rates_reject_geometric_fields_and_oracle() {
        let with_gealong = r#"{
            "cross_section": {"a": 1.0, "b": 0.5},
            "coupling": {"explicit_rates": {"gamma11": 1.0, "tau1": 1.0, "k10_d": 0.0}},
            "initial_state": "excited-1",
            "engines": ["dde"],
            "time": {"t_end": 1.0}
        }"#;
        assert!(assemble(Config::from_json(with_gealong).unwrap()).is_err());
        let with_oracle = r#"{
            "coupling": {"explicit_rates": {"gamma11": 1.0, "tau1": 1.0, "k10_d": 0.0}},
            "initial_state": "excited-1",
            "engines": ["oracle"],
            "time": {"t_end": 1.0}
        }"#;
        assert!(assemble(Config::from_json(with_oracle).unwrap()).is_err());
    }

    #[test]
    fn config_validation_rejects_malformed_input() {
        let base = preset("centered-12").unwrap();

        let mut c = base.clone();
        c.engines = vec![];
        assert!(assemble(c).is_err());

        let mut c = base.clone();
        c.engines = vec![Engine::Dde, Engine::Dde];
        assert!(assemble(c).is_err());

        let mut c = base.clone();
        c.time.t_end = -1.0;
        assert!(assemble(c).is_err());

        let mut c = base.clone();
        c.time.samples = 1;
        assert!(assemble(c).is_err());

        let mut c = base.clone();
        c.coupling.scale = Some(-0.08);
        assert!(assemble(c).is_err());

        let mut c = base.clone();
        c.geometry.as_mut().unwrap().positions[1].x = 2.0;
        assert!(assemble(c).is_err());

        let mut c = base.clone();
        c.modes = Some(vec![[1, 1], [1, 1]]);
        assert!(assemble(c).is_err());

        let mut c = base.clone();
        c.modes = Some(vec![[0, 1]]);
        assert!(assemble(c).is_err());

        let mut c = base.clone();
        c.oracle = Some(OracleGrid { n: 4000, linewidths: None, k_max: None });
        assert!(assemble(c).is_err());

        let mut c = base.clone();
        c.oracle = Some(OracleGrid { n: 41, linewidths: Some(10.0), k_max: Some(3.0) });
        assert!(assemble(c).is_err());

        let mut c = base;
        c.initial_state = InitialState::Amplitudes { amplitudes: [[1.0, 0.0], [1.0, 0.0]] };
        assert!(assemble(c).is_err());
    }

    #[test]
    fn unknown_fields_and_unknown_presets_are_rejected() {
        let text = r#"{
            "coupling": {"explicit_rates": {"gamma11": 1.0, "tau1": 1.0, "k10_d": 0.0}},
            "initial_state": "excited-1",
            "engines": ["dde"],
            "time": {"t_end": 1.0},
            "surprise": 1
        }"#;
        assert!(Config::from_json(text).is_err());
        assert!(preset("centered-13").is_err());
    }

    #[test]
    fn overrides_patch_nested_fields() {
        let config = preset("centered-12").unwrap();
        let patched = override_config(
            &config,
            &[
                "time.t_end=2.5".to_string(),
                "zero_gamma212=true".to_string(),
                "geometry.positions.1.x=0.75".to_string(),
                "output.dir=/tmp/x".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(patched.time.t_end, 2.5);
        assert!(patched.zero_gamma212);
        assert_eq!(patched.geometry.as_ref().unwrap().positions[1].x, 0.75);
        assert_eq!(patched.output.as_ref().unwrap().dir, "/tmp/x");

        assert!(override_config(&config, &["time.t_end".to_string()]).is_err());
        assert!(override_config(&config, &["engines.7=\"me\"".to_string()]).is_err());
        assert!(override_config(&config, &["time.t_end.x=1".to_string()]).is_err());
        assert!(override_config(&config, &["time.bogus=1".to_string()]).is_err());
    }

    #[test]
    fn run_produces_aligned_grids_and_sane_checks() {
        let mut config = preset("perp-x").unwrap();
        config.time.samples = 200;
        config.time.t_end = 2.0;
        let out = run(config).unwrap();
        assert_eq!(out.runs.len(), 2);
        assert_eq!(out.runs[0].t, out.runs[1].t);
        assert!(out.checks.iter().all(|c| c.passed), "{:?}", out.checks);
        // The two engines describe the same zero-delay physics.
        let d: f64 = out.runs[0]
            .populations
            .iter()
            .zip(&out.runs[1].populations)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max);
        assert!(d < 1e-6, "dde vs me distance {d:.2e}");
    }

    #[test]
    fn amplitude_initial_states_round_trip() {
        let text = r#"{
            "coupling": {"explicit_rates": {"gamma11": 1.0, "tau1": 0.0, "k10_d": 0.0}},
            "initial_state": {"amplitudes": [[0.6, 0.0], [0.0, 0.8]]},
            "engines": ["dde"],
            "time": {"t_end": 1.0, "samples": 50}
        }"#;
        let sys = assemble(Config::from_json(text).unwrap()).unwrap();
        assert_eq!(sys.psi0[0], Complex64::new(0.6, 0.0));
        assert_eq!(sys.psi0[1], Complex64::new(0.0, 0.8));
        // Zero delay with full constructive overlap: rank-1 damping, so the
        // dark component is trapped.
        assert!(sys.derived.dark_state.is_some());
        let json = sys.config.to_json_pretty();
        let back = Config::from_json(&json).unwrap();
        assert_eq!(back, sys.config);
    }
}
