//! TM-mode geometry of a rectangular waveguide and the atom-field coupling
//! constants derived from it.
//!
//! Everything is expressed in natural units (hbar = c = eps0 = 1) with the
//! wide cross-section dimension `a` as the unit of length, so frequencies
//! carry units of c*pi/a. Only TM modes couple to z-oriented dipoles; TE
//! modes and evanescent (below-cutoff) modes are out of scope.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSection {
    pub a: f64,
    pub b: f64,
}

impl CrossSection {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a > 0.0 && self.b > 0.0) {
            return Err(Error::Geometry(format!(
                "cross section must have positive finite sides, got a={}, b={}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// TM_mn mode indices. m counts half-wavelengths along x (dimension a),
/// n along y (dimension b); both must be >= 1 for a TM mode to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TmMode {
    pub m: u32,
    pub n: u32,
}

impl TmMode {
    pub fn new(m: u32, n: u32) -> Self {
        TmMode { m, n }
    }

    /// Cutoff frequency Omega_mn = pi * sqrt((m/a)^2 + (n/b)^2).
    pub fn cutoff(&self, cs: &CrossSection) -> f64 {
        let fx = self.m as f64 / cs.a;
        let fy = self.n as f64 / cs.b;
        PI * (fx * fx + fy * fy).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::Geometry(format!(
                "TM mode indices must be >= 1, got ({}, {})",
                self.m, self.n
            )));
        }
        Ok(())
    }
}

/// Dispersion relation omega(k) = sqrt(cutoff^2 + k^2).
pub fn dispersion(cutoff: f64, k: f64) -> f64 {
    (cutoff * cutoff + k * k).sqrt()
}

/// Wavevector at which the mode is resonant with `omega`:
/// k0 = sqrt(omega^2 - cutoff^2). None below cutoff.
pub fn resonant_wavevector(cutoff: f64, omega: f64) -> Option<f64> {
    let d = omega * omega - cutoff * cutoff;
    if d > 0.0 {
        Some(d.sqrt())
    } else {
        None
    }
}

/// Group velocity at frequency `omega`: v = d(omega)/dk = k0/omega.
/// Satisfies v * omega = k0 exactly in these units.
pub fn group_velocity(cutoff: f64, omega: f64) -> Option<f64> {
    resonant_wavevector(cutoff, omega).map(|k0| k0 / omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AtomPosition {
    pub fn validate(&self, cs: &CrossSection) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::Geometry("atom position must be finite".into()));
        }
        if self.x < 0.0 || self.x > cs.a || self.y < 0.0 || self.y > cs.b {
            return Err(Error::Geometry(format!(
                "atom at (x={}, y={}) lies outside the {} x {} cross section",
                self.x, self.y, cs.a, cs.b
            )));
        }
        Ok(())
    }
}

/// Transverse mode profile sin(m pi x / a) * sin(n pi y / b), sign included.
///
/// Positions that land on a nodal plane with an exactly representable
/// m*x/a (or n*y/b) yield exactly 0.0, so that couplings vanish identically
/// there rather than at the ~1e-16 level.
pub fn mode_profile(mode: &TmMode, cs: &CrossSection, x: f64, y: f64) -> f64 {
    exact_sin_pi(mode.m as f64 * x / cs.a) * exact_sin_pi(mode.n as f64 * y / cs.b)
}

/// sin(pi * s) with exact zeros at integer s.
fn exact_sin_pi(s: f64) -> f64 {
    if s == s.round() {
        0.0
    } else {
        (PI * s).sin()
    }
}

/// Atom-field coupling of one atom to one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coupling {
    /// Bare coupling entering the interaction Hamiltonian as g_raw / sqrt(omega_k).
    pub g_raw: f64,
    /// Renormalized coupling g' = g_raw / sqrt(omega_a); the quantity all
    /// decay rates are built from.
    pub g_renorm: f64,
}

/// Coupling of `atom` to `mode`, parametrized by the single overall scale
/// (the renormalized coupling of a centered atom to the lowest mode divided
/// by that mode's cutoff). Sign of the transverse profile is preserved.
pub fn coupling_strength(
    mode: &TmMode,
    cs: &CrossSection,
    atom: &AtomPosition,
    scale: f64,
    omega_a: f64,
) -> Coupling {
    let g_renorm = scale * mode.cutoff(cs) * mode_profile(mode, cs, atom.x, atom.y);
    Coupling {
        g_raw: g_renorm * omega_a.sqrt(),
        g_renorm,
    }
}

/// Candidate modes that actually propagate at `omega_a` (cutoff strictly
/// below), sorted by cutoff.
pub fn propagating_modes(candidates: &[TmMode], cs: &CrossSection, omega_a: f64) -> Vec<TmMode> {
    let mut out: Vec<TmMode> = candidates
        .iter()
        .copied()
        .filter(|m| m.cutoff(cs) < omega_a)
        .collect();
    out.sort_by(|p, q| p.cutoff(cs).total_cmp(&q.cutoff(cs)));
    out
}

/// The four decay channels of the two-atom system in the standard geometry:
/// both atoms exchange through the lowest propagating mode (rates gamma11,
/// gamma12, gamma22) and atom 2 additionally damps through the second
/// propagating mode (gamma212).
///
/// gamma12 carries the sign of the coupling product g'11 * g'12; the identity
/// gamma12^2 = gamma11 * gamma22 holds because all three share the same
/// overlap product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelRates {
    pub gamma11: f64,
    pub gamma12: f64,
    pub gamma22: f64,
    pub gamma212: f64,
}

/// Assemble the channel rates from renormalized couplings and group
/// velocities. `g11`, `g12` couple atoms 1 and 2 to the lowest mode with
/// velocity `v1`; `g22` couples atom 2 to the second mode with velocity `v2`
/// (pass 0 coupling or any velocity when that mode is absent).
pub fn channel_rates(g11: f64, g12: f64, g22: f64, v1: f64, v2: f64) -> ChannelRates {
    ChannelRates {
        gamma11: g11 * g11 * PI / v1,
        gamma12: g11 * g12 * PI / v1,
        gamma22: g12 * g12 * PI / v1,
        gamma212: if g22 == 0.0 { 0.0 } else { g22 * g22 * PI / v2 },
    }
}

/// Complex collective-rate matrix A_ij = pi * g'_i * g'_j * e^{i k0 |z_i - z_j|} / v
/// for one propagating mode. Dissipative part Gamma_ij = 2 Re A_ij, coherent
/// exchange U_ij = 2 Im A_ij. Diagonal entries are real (the channel rates),
/// so U_ii = 0.
pub fn collective_rates(
    g: [f64; 2],
    k0: f64,
    z: [f64; 2],
    v: f64,
) -> [[Complex64; 2]; 2] {
    let mut a = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, gi) in g.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            let d = (z[i] - z[j]).abs();
            let phase = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, k0 * d).exp()
            };
            a[i][j] = phase * (gi * gj * PI / v);
        }
    }
    a
}

/// Working frequency rule: midpoint of the first and third candidate cutoffs.
pub fn midpoint_frequency(candidates: &[TmMode], cs: &CrossSection) -> Result<f64> {
    if candidates.len() < 3 {
        return Err(Error::Config(format!(
            "the midpoint frequency rule needs at least 3 candidate modes, got {}",
            candidates.len()
        )));
    }
    Ok((candidates[0].cutoff(cs) + candidates[2].cutoff(cs)) / 2.0)
}
