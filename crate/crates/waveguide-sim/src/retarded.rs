//! Retarded amplitude equations for two atoms exchanging excitation through
//! a waveguide.
//!
//! In a frame rotating at the atomic frequency the excited-state amplitudes
//! obey
//!
//!   dB_i/dt = -gamma_i B_i(t) - sum_c kappa_c e^{i phi_c} B_{src(c)}(t - tau_c)
//!
//! where gamma_i collects every decay channel of atom i and each cross
//! channel c carries a coupling kappa_c (signed, real), a propagation delay
//! tau_c and a propagation phase phi_c. Channels with tau_c = 0 are folded
//! into the instantaneous right-hand side; a delayed channel contributes
//! nothing before t = tau_c, so an initially unexcited partner stays exactly
//! dark until the first retarded signal arrives.
//!
//! Integration uses the method of steps with classical RK4 on a uniform grid
//! commensurate with every delay, so the derivative jumps that enter at
//! multiples of the delays always sit on grid nodes. Dense output comes from
//! cubic Hermite interpolation with one-sided derivatives at the nodes.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO2: [Complex64; 2] = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];

/// One retarded exchange channel: `target` is driven by `source`'s amplitude
/// a time `delay` in the past, with weight `-strength * e^{i phase}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub target: usize,
    pub source: usize,
    pub strength: f64,
    pub delay: f64,
    pub phase: f64,
}

/// The full two-amplitude system: per-atom total decay rates plus exchange
/// channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DdeSystem {
    pub self_rates: [f64; 2],
    pub channels: Vec<Channel>,
}

impl DdeSystem {
    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.self_rates.iter().enumerate() {
            if !g.is_finite() || *g < 0.0 {
                return Err(Error::Config(format!(
                    "self rate of atom {} must be finite and >= 0, got {g}",
                    i + 1
                )));
            }
        }
        for c in &self.channels {
            if c.target >= 2 || c.source >= 2 {
                return Err(Error::Config(format!(
                    "channel indices must be 0 or 1, got target={} source={}",
                    c.target, c.source
                )));
            }
            if !c.strength.is_finite() || !c.phase.is_finite() {
                return Err(Error::Config(
                    "channel strength and phase must be finite".into(),
                ));
            }
            if !c.delay.is_finite() || c.delay < 0.0 {
                return Err(Error::Config(format!(
                    "channel delay must be finite and >= 0, got {}",
                    c.delay
                )));
            }
        }
        Ok(())
    }
}

/// Piecewise cubic Hermite record of the solution on the internal grid.
///
/// Node i sits at t = i*h. Each segment [i, i+1] interpolates with the
/// right-sided derivative at node i and the left-sided derivative at node
/// i+1, so the kinks that delayed channels switch on at grid nodes are
/// represented exactly.
#[derive(Debug, Clone)]
pub struct History {
    h: f64,
    ys: Vec<[Complex64; 2]>,
    fs_r: Vec<[Complex64; 2]>,
    fs_l: Vec<[Complex64; 2]>,
}

impl History {
    fn with_capacity(h: f64, nsteps: usize) -> Self {
        let mut ys = Vec::with_capacity(nsteps + 1);
        ys.push(ZERO2);
        History {
            h,
            ys,
            fs_r: vec![ZERO2; 1],
            fs_l: vec![ZERO2; 1],
        }
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn front_index(&self) -> usize {
        self.ys.len() - 1
    }

    pub fn front_time(&self) -> f64 {
        self.front_index() as f64 * self.h
    }

    /// Evaluate with the front limited to node `front` (used while the
    /// solution is still being extended). Times below zero are the dark
    /// pre-history, except that a rounding-level undershoot of zero returns
    /// the initial value: an activation test may place a node one ulp before
    /// its delay, and the smooth piece being integrated starts at the
    /// one-sided limit B(0).
    fn eval_upto(&self, front: usize, tq: f64) -> [Complex64; 2] {
        let clamp = 1e-11 * self.h.max(self.front_time());
        if tq < -clamp {
            return ZERO2;
        }
        if tq < 0.0 {
            return self.ys[0];
        }
        let i = ((tq / self.h + 1e-12).floor() as usize).min(front);
        if i >= front {
            return self.ys[front];
        }
        let s = (tq - i as f64 * self.h) / self.h;
        let y0 = self.ys[i];
        let y1 = self.ys[i + 1];
        let f0 = self.fs_r[i];
        let f1 = self.fs_l[i + 1];
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut out = ZERO2;
        for a in 0..2 {
            out[a] = y0[a] * h00 + f0[a] * (h10 * self.h) + y1[a] * h01 + f1[a] * (h11 * self.h);
        }
        out
    }

    /// Interpolated amplitudes at time `t`. Negative times return zeros;
    /// times beyond the computed front are rejected (up to a rounding slack
    /// at the front itself).
    pub fn sample(&self, t: f64) -> Result<[Complex64; 2]> {
        if t < 0.0 {
            return Ok(ZERO2);
        }
        let slack = 1e-9 * self.h.max(self.front_time().abs());
        if t > self.front_time() + slack {
            return Err(Error::Numeric(format!(
                "history queried at t={t} beyond computed front t={}",
                self.front_time()
            )));
        }
        Ok(self.eval_upto(self.front_index(), t))
    }
}

/// Solution on a uniform output grid, with the full internal history kept
/// for off-grid queries.
#[derive(Debug, Clone)]
pub struct DdeSolution {
    pub t: Vec<f64>,
    pub b: Vec<[Complex64; 2]>,
    pub history: History,
}

impl DdeSolution {
    pub fn populations(&self) -> Vec<[f64; 2]> {
        self.b
            .iter()
            .map(|b| [b[0].norm_sqr(), b[1].norm_sqr()])
            .collect()
    }
}

fn add_scaled(y: &[Complex64; 2], k: &[Complex64; 2], w: f64) -> [Complex64; 2] {
    [y[0] + k[0] * w, y[1] + k[1] * w]
}

struct Stepper<'a> {
    sys: &'a DdeSystem,
    phases: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn rhs(
        &self,
        hist: &History,
        front: usize,
        t: f64,
        y: &[Complex64; 2],
        active: &[usize],
    ) -> [Complex64; 2] {
        let mut d = [
            y[0] * (-self.sys.self_rates[0]),
            y[1] * (-self.sys.self_rates[1]),
        ];
        for (ci, c) in self.sys.channels.iter().enumerate() {
            if c.delay == 0.0 {
                d[c.target] -= self.phases[ci] * c.strength * y[c.source];
            }
        }
        for &ci in active {
            let c = &self.sys.channels[ci];
            let yd = hist.eval_upto(front, t - c.delay);
            d[c.target] -= self.phases[ci] * c.strength * yd[c.source];
        }
        d
    }
}

/// Integrate from `b0` to `t_end` and resample onto `samples` equally spaced
/// output times covering [0, t_end]. `n_sub` is the minimum number of
/// internal steps per shortest delay (or per full run when no channel is
/// delayed); the step also respects h <= 0.01 / max_rate.
pub fn integrate_with_substeps(
    sys: &DdeSystem,
    b0: [Complex64; 2],
    t_end: f64,
    samples: usize,
    n_sub: usize,
) -> Result<DdeSolution> {
    sys.validate()?;
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(Error::Config(format!(
            "integration horizon must be positive, got {t_end}"
        )));
    }
    if samples < 2 {
        return Err(Error::Config(format!(
            "need at least 2 output samples, got {samples}"
        )));
    }
    if n_sub < 2 {
        return Err(Error::Config(format!(
            "need at least 2 substeps per delay, got {n_sub}"
        )));
    }

    let mut gmax = self_rate_scale(sys);
    if gmax <= 0.0 {
        gmax = f64::MIN_POSITIVE; // uncapped step for a free system
    }
    let tau_min = sys
        .channels
        .iter()
        .filter(|c| c.delay > 0.0)
        .map(|c| c.delay)
        .fold(f64::INFINITY, f64::min);
    let base = if tau_min.is_finite() { tau_min } else { t_end };
    let mut h = base / n_sub as f64;
    let cap = 0.01 / gmax;
    if h > cap {
        h = base / (base / cap).ceil();
    }
    let nsteps = (t_end / h - 1e-12).ceil() as usize;

    // Every delay must land on the step grid; otherwise the derivative
    // discontinuities would drift off the nodes and RK4 would lose its order.
    for c in &sys.channels {
        if c.delay > 0.0 {
            let m = (c.delay / h).round();
            if m < 1.0 || (c.delay - m * h).abs() > 1e-9 * c.delay {
                return Err(Error::Config(format!(
                    "channel delay {} is not commensurate with the step grid \
                     (step {h}, nearest multiple {})",
                    c.delay,
                    m * h
                )));
            }
        }
    }

    let stepper = Stepper {
        sys,
        phases: sys
            .channels
            .iter()
            .map(|c| Complex64::new(0.0, c.phase).exp())
            .collect(),
    };

    let mut hist = History::with_capacity(h, nsteps);
    hist.ys[0] = b0;
    hist.fs_r.reserve(nsteps);
    hist.fs_l.reserve(nsteps);

    let mut active: Vec<usize> = Vec::with_capacity(sys.channels.len());
    for q in 0..nsteps {
        let t0 = q as f64 * h;
        active.clear();
        for (ci, c) in sys.channels.iter().enumerate() {
            if c.delay > 0.0 && t0 >= c.delay - 1e-12 * c.delay {
                active.push(ci);
            }
        }
        let y0 = hist.ys[q];
        let k1 = stepper.rhs(&hist, q, t0, &y0, &active);
        let k2 = stepper.rhs(&hist, q, t0 + h / 2.0, &add_scaled(&y0, &k1, h / 2.0), &active);
        let k3 = stepper.rhs(&hist, q, t0 + h / 2.0, &add_scaled(&y0, &k2, h / 2.0), &active);
        let k4 = stepper.rhs(&hist, q, t0 + h, &add_scaled(&y0, &k3, h), &active);
        let mut y1 = y0;
        for a in 0..2 {
            y1[a] += (k1[a] + (k2[a] + k3[a]) * 2.0 + k4[a]) * (h / 6.0);
        }
        // Left derivative at the new node under this step's activation set,
        // so the segment's Hermite data stays one-sided.
        let fl = stepper.rhs(&hist, q, t0 + h, &y1, &active);
        hist.fs_r[q] = k1;
        hist.ys.push(y1);
        hist.fs_r.push(ZERO2);
        hist.fs_l.push(fl);
    }

    let front = hist.front_index();
    let mut t = Vec::with_capacity(samples);
    let mut b = Vec::with_capacity(samples);
    for i in 0..samples {
        let ti = t_end * i as f64 / (samples - 1) as f64;
        t.push(ti);
        b.push(hist.eval_upto(front, ti));
    }
    Ok(DdeSolution { t, b, history: hist })
}

/// [`integrate_with_substeps`] with the default resolution of 200 steps per
/// shortest delay.
pub fn integrate(
    sys: &DdeSystem,
    b0: [Complex64; 2],
    t_end: f64,
    samples: usize,
) -> Result<DdeSolution> {
    integrate_with_substeps(sys, b0, t_end, samples, 200)
}

fn self_rate_scale(sys: &DdeSystem) -> f64 {
    let mut g: f64 = sys.self_rates[0].max(sys.self_rates[1]);
    for c in &sys.channels {
        g = g.max(c.strength.abs());
    }
    g
}
