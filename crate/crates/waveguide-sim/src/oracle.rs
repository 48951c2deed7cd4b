//! Validation route that skips the retarded/Markovian reductions entirely:
//! the waveguide continuum of each propagating branch is discretized into a
//! finite uniform k-grid and the resulting closed Schrodinger equation for
//! {atom amplitudes, one-photon mode amplitudes} is integrated directly in
//! the interaction picture.
//!
//!   dB_l/dt = -sum_p conj(q_lp) C_p e^{-i (w_p - w_a) t}
//!   dC_p/dt = +sum_l q_lp B_l e^{+i (w_p - w_a) t}
//!
//! with q_lp = cal * g_raw_l * sqrt(dk / w_p) * e^{i k_p z_l}. The grid spans
//! [-k_max, +k_max] so both propagation directions are present. The model is
//! norm-conserving, so the reported norm drift is a direct error measure.
//!
//! A finite grid is periodic in time: after t_rev = 2 pi / (dk * v) the
//! discretization echoes spuriously, so horizons beyond the smallest revival
//! time of any branch are rejected.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modes::dispersion;

/// Normalization of the discretized coupling. The golden-rule population
/// decay rate of one atom on this grid, summed over the two resonant
/// k-points, is 4 pi cal^2 g'^2 / v; cal = 1/sqrt(2) makes that equal to
/// the population rate 2 gamma = 2 pi g'^2 / v of the amplitude equations.
pub const GOLDEN_RULE_CALIBRATION: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// One discretized propagating branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub cutoff: f64,
    /// Bare couplings of the two atoms to this branch (signed).
    pub g_raw: [f64; 2],
    /// Number of k-grid points; odd so that k = 0 is on the grid.
    pub n_modes: usize,
    pub k_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumModel {
    pub omega_a: f64,
    pub z: [f64; 2],
    pub branches: Vec<Branch>,
    pub calibration: f64,
}

impl ContinuumModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_a.is_finite() && self.omega_a > 0.0) {
            return Err(Error::Config(format!(
                "atomic frequency must be positive, got {}",
                self.omega_a
            )));
        }
        if self.branches.is_empty() {
            return Err(Error::Config("continuum model needs at least one branch".into()));
        }
        for br in &self.branches {
            if br.n_modes < 3 || br.n_modes % 2 == 0 {
                return Err(Error::Config(format!(
                    "branch mode count must be odd and >= 3, got {}",
                    br.n_modes
                )));
            }
            if !(br.k_max.is_finite() && br.k_max > 0.0) {
                return Err(Error::Config(format!(
                    "branch k_max must be positive, got {}",
                    br.k_max
                )));
            }
            if !(br.cutoff.is_finite() && br.cutoff > 0.0) {
                return Err(Error::Config(format!(
                    "branch cutoff must be positive, got {}",
                    br.cutoff
                )));
            }
            if !(br.g_raw[0].is_finite() && br.g_raw[1].is_finite()) {
                return Err(Error::Config("branch couplings must be finite".into()));
            }
        }
        if !(self.calibration.is_finite() && self.calibration > 0.0) {
            return Err(Error::Config("calibration must be positive".into()));
        }
        Ok(())
    }

    /// Earliest spurious recurrence over all branches, 2 pi / (dk * v) with
    /// v the fastest group velocity on the branch grid.
    pub fn revival_time(&self) -> f64 {
        let mut t_rev = f64::INFINITY;
        for br in &self.branches {
            let dk = 2.0 * br.k_max / (br.n_modes - 1) as f64;
            let v_max = br.k_max / dispersion(br.cutoff, br.k_max);
            t_rev = t_rev.min(2.0 * std::f64::consts::PI / (dk * v_max));
        }
        t_rev
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub t: Vec<f64>,
    pub b: Vec<[Complex64; 2]>,
    /// max_t |norm^2(t) - norm^2(0)| of the full atom+field state.
    pub norm_drift: f64,
}

impl OracleSolution {
    pub fn populations(&self) -> Vec<[f64; 2]> {
        self.b
            .iter()
            .map(|b| [b[0].norm_sqr(), b[1].norm_sqr()])
            .collect()
    }
}

struct Rhs {
    /// Detuning w_p - w_a per mode.
    detune: Vec<f64>,
    /// q_lp per atom, concatenated over branches.
    q: [Vec<Complex64>; 2],
}

impl Rhs {
    // State layout: y[0..2] = B, y[2..] = C (one entry per mode).
    fn eval(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let m = self.detune.len();
        let (b, c) = y.split_at(2);
        let mut db = [Complex64::new(0.0, 0.0); 2];
        for p in 0..m {
            let ph = Complex64::new(0.0, -self.detune[p] * t).exp();
            let cp = c[p] * ph;
            db[0] -= self.q[0][p].conj() * cp;
            db[1] -= self.q[1][p].conj() * cp;
            dy[2 + p] = ph.conj() * (self.q[0][p] * b[0] + self.q[1][p] * b[1]);
        }
        dy[0] = db[0];
        dy[1] = db[1];
    }
}

/// Integrate the discretized model from the atomic amplitudes `b0` (field in
/// vacuum) and resample onto `samples` uniform output times on [0, t_end].
pub fn simulate(
    model: &ContinuumModel,
    b0: [Complex64; 2],
    t_end: f64,
    samples: usize,
) -> Result<OracleSolution> {
    model.validate()?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Config(format!(
            "integration horizon must be positive, got {t_end}"
        )));
    }
    if samples < 2 {
        return Err(Error::Config(format!(
            "need at least 2 output samples, got {samples}"
        )));
    }
    let t_rev = model.revival_time();
    if t_end >= t_rev {
        return Err(Error::Config(format!(
            "horizon {t_end} reaches the discretization revival time {t_rev}; \
             increase the mode count or narrow the k window"
        )));
    }

    let mut detune = Vec::new();
    let mut q: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
    for br in &model.branches {
        let n = br.n_modes;
        let dk = 2.0 * br.k_max / (n - 1) as f64;
        for p in 0..n {
            let k = -br.k_max + dk * p as f64;
            let w = dispersion(br.cutoff, k);
            detune.push(w - model.omega_a);
            let amp = model.calibration * (dk / w).sqrt();
            for l in 0..2 {
                let g = br.g_raw[l] * amp;
                q[l].push(Complex64::new(0.0, k * model.z[l]).exp() * g);
            }
        }
    }
    let rhs = Rhs { detune, q };

    let m = rhs.detune.len();
    let mut y0 = vec![Complex64::new(0.0, 0.0); 2 + m];
    y0[0] = b0[0];
    y0[1] = b0[1];

    let ts: Vec<f64> = (0..samples)
        .map(|i| t_end * i as f64 / (samples - 1) as f64)
        .collect();
    let states = dp5_integrate(&rhs, y0, &ts, 1e-8, 1e-12)?;

    let norm0: f64 = states[0].iter().map(|x| x.norm_sqr()).sum();
    let mut norm_drift: f64 = 0.0;
    let mut b = Vec::with_capacity(samples);
    for s in &states {
        let n: f64 = s.iter().map(|x| x.norm_sqr()).sum();
        norm_drift = norm_drift.max((n - norm0).abs());
        b.push([s[0], s[1]]);
    }
    Ok(OracleSolution { t: ts, b, norm_drift })
}

// Dormand-Prince 5(4) coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn combine(out: &mut [Complex64], y: &[Complex64], h: f64, ks: &[&[Complex64]], w: &[f64]) {
    for i in 0..y.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, wk) in ks.iter().zip(w) {
            acc += k[i] * *wk;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Adaptive 5th-order integration to each requested output time. Steps are
/// clamped to land exactly on the output nodes; the first same-as-last stage
/// is reused across accepted steps.
fn dp5_integrate(
    rhs: &Rhs,
    y0: Vec<Complex64>,
    ts: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<Vec<Complex64>>> {
    let n = y0.len();
    let mut y = y0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(ts.len());
    if !ts.is_empty() && ts[0] == 0.0 {
        out.push(y.clone());
    }

    let t_final = *ts.last().unwrap();
    let mut k: Vec<Vec<Complex64>> = (0..7).map(|_| vec![Complex64::new(0.0, 0.0); n]).collect();
    let mut ytmp = vec![Complex64::new(0.0, 0.0); n];
    let mut ynew = vec![Complex64::new(0.0, 0.0); n];
    let mut h = (t_final / 1e4).min(ts.iter().find(|&&x| x > 0.0).copied().unwrap_or(t_final));
    let mut fsal_valid = false;
    let mut work: u64 = 0;
    const MAX_WORK: u64 = 4_000_000_000; // component evaluations

    for &t_target in ts.iter().skip_while(|&&x| x == 0.0) {
        while t < t_target {
            if work > MAX_WORK {
                return Err(Error::Numeric(
                    "work limit exceeded in the continuum integrator".into(),
                ));
            }
            let mut h_try = h.min(t_target - t);
            if h_try <= f64::EPSILON * t_target.abs().max(1.0) {
                t = t_target;
                break;
            }
            loop {
                if !fsal_valid {
                    rhs.eval(t, &y, &mut k[0]);
                    work += n as u64;
                    fsal_valid = true;
                }
                {
                    let (done, rest) = k.split_at_mut(1);
                    combine(&mut ytmp, &y, h_try, &[&done[0]], &A2);
                    rhs.eval(t + C[1] * h_try, &ytmp, &mut rest[0]);
                }
                {
                    let (done, rest) = k.split_at_mut(2);
                    combine(&mut ytmp, &y, h_try, &[&done[0], &done[1]], &A3);
                    rhs.eval(t + C[2] * h_try, &ytmp, &mut rest[0]);
                }
                {
                    let (done, rest) = k.split_at_mut(3);
                    combine(&mut ytmp, &y, h_try, &[&done[0], &done[1], &done[2]], &A4);
                    rhs.eval(t + C[3] * h_try, &ytmp, &mut rest[0]);
                }
                {
                    let (done, rest) = k.split_at_mut(4);
                    combine(
                        &mut ytmp,
                        &y,
                        h_try,
                        &[&done[0], &done[1], &done[2], &done[3]],
                        &A5,
                    );
                    rhs.eval(t + C[4] * h_try, &ytmp, &mut rest[0]);
                }
                {
                    let (done, rest) = k.split_at_mut(5);
                    combine(
                        &mut ytmp,
                        &y,
                        h_try,
                        &[&done[0], &done[1], &done[2], &done[3], &done[4]],
                        &A6,
                    );
                    rhs.eval(t + C[5] * h_try, &ytmp, &mut rest[0]);
                }
                {
                    let (done, rest) = k.split_at_mut(6);
                    combine(
                        &mut ynew,
                        &y,
                        h_try,
                        &[&done[0], &done[1], &done[2], &done[3], &done[4], &done[5]],
                        &B5,
                    );
                    rhs.eval(t + h_try, &ynew, &mut rest[0]);
                }
                work += 6 * n as u64;

                // Scaled RMS error over the real components.
                let mut acc = 0.0;
                for i in 0..n {
                    let mut e = Complex64::new(0.0, 0.0);
                    for s in 0..7 {
                        e += k[s][i] * ERR[s];
                    }
                    let sc_re = atol + rtol * y[i].re.abs().max(ynew[i].re.abs());
                    let sc_im = atol + rtol * y[i].im.abs().max(ynew[i].im.abs());
                    let er = e.re * h_try / sc_re;
                    let ei = e.im * h_try / sc_im;
                    acc += er * er + ei * ei;
                }
                let errn = (acc / (2.0 * n as f64)).sqrt();

                let factor = if errn > 0.0 {
                    0.9 * errn.powf(-0.2)
                } else {
                    5.0
                };
                let factor = factor.clamp(0.2, 5.0);
                if errn <= 1.0 {
                    t += h_try;
                    std::mem::swap(&mut y, &mut ynew);
                    k.swap(0, 6); // FSAL: last stage is the next first stage
                    h = h_try * factor;
                    break;
                }
                h_try *= factor;
                fsal_valid = true; // k1 unchanged by the rejected attempt
                if h_try < 1e-14 * t_final {
                    return Err(Error::Numeric(format!(
                        "continuum integrator step collapsed near t={t}"
                    )));
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
