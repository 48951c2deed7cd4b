//! Grid-level diagnostics for population curves: sup-norm distances, local
//! extremum detection, monotonicity, and the stationary populations left in
//! a collectively damped pair.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest pointwise distance between two curves on the same grid.
pub fn sup_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Numeric(format!(
            "curves have different lengths: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub index: usize,
    pub t: f64,
    pub value: f64,
}

fn extrema(t: &[f64], y: &[f64], minima: bool) -> Vec<Extremum> {
    assert_eq!(t.len(), y.len());
    let mut out = Vec::new();
    if y.len() < 3 {
        return out;
    }
    for i in 1..y.len() - 1 {
        let dl = y[i] - y[i - 1];
        let dr = y[i + 1] - y[i];
        let hit = if minima { dl < 0.0 && dr > 0.0 } else { dl > 0.0 && dr < 0.0 };
        if hit {
            out.push(Extremum { index: i, t: t[i], value: y[i] });
        }
    }
    out
}

/// Interior sample points strictly below both neighbours.
pub fn local_minima(t: &[f64], y: &[f64]) -> Vec<Extremum> {
    extrema(t, y, true)
}

/// Interior sample points strictly above both neighbours.
pub fn local_maxima(t: &[f64], y: &[f64]) -> Vec<Extremum> {
    extrema(t, y, false)
}

/// Largest forward increment; <= 0 means the curve never rises on the grid.
pub fn max_increase(y: &[f64]) -> f64 {
    y.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

pub fn strictly_decreasing(y: &[f64], tol: f64) -> bool {
    max_increase(y) <= tol
}

/// Combination of the two atomic amplitudes that the common channel cannot
/// see: orthogonal to the coupling vector, so it never decays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkState {
    pub c: [f64; 2],
}

/// Dark combination for channel couplings (g1, g2). None when both vanish.
pub fn dark_state(g: [f64; 2]) -> Option<DarkState> {
    let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
    if n == 0.0 {
        return None;
    }
    Some(DarkState { c: [g[1] / n, -g[0] / n] })
}

/// Long-time excited-state populations when everything outside the dark
/// combination has decayed: P_i = |<D|psi0>|^2 |c_i|^2.
pub fn stationary_populations(dark: &DarkState, psi0: [Complex64; 2]) -> [f64; 2] {
    let overlap = psi0[0] * dark.c[0] + psi0[1] * dark.c[1];
    let w = overlap.norm_sqr();
    [w * dark.c[0] * dark.c[0], w * dark.c[1] * dark.c[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sup_distance_measures_the_worst_point() {
        let a = [0.0, 1.0, 2.0, 3.0];
        let b = [0.0, 1.5, 1.9, 3.0];
        assert_eq!(sup_distance(&a, &b).unwrap(), 0.5);
        assert!(sup_distance(&a, &b[..3]).is_err());
    }

    #[test]
    fn extremum_detection_on_a_sine() {
        let t: Vec<f64> = (0..1000).map(|i| 0.01 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| t.sin()).collect();
        let maxs = local_maxima(&t, &y);
        let mins = local_minima(&t, &y);
        assert_eq!(maxs.len(), 2); // pi/2, pi/2 + 2 pi within [0, 10)
        assert_eq!(mins.len(), 1); // 3 pi / 2
        assert!((maxs[0].t - std::f64::consts::FRAC_PI_2).abs() < 0.011);
        assert!((mins[0].t - 3.0 * std::f64::consts::FRAC_PI_2).abs() < 0.011);
        assert!((mins[0].value + 1.0).abs() < 1e-4);
    }

    #[test]
    fn monotone_curves_have_no_extrema() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| (-0.1 * t).exp()).collect();
        assert!(local_minima(&t, &y).is_empty());
        assert!(local_maxima(&t, &y).is_empty());
        assert!(strictly_decreasing(&y, 0.0));
        assert!(max_increase(&y) < 0.0);
    }

    #[test]
    fn dark_state_populations_from_first_atom_excited() {
        // Couplings (g, g sqrt(r)) leave P1 = r^2/(1+r)^2, P2 = r/(1+r)^2
        // when only atom 1 starts excited.
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        for r in [0.8535533905932737f64, 0.5000000000000001, 0.1464466094067263] {
            let g = 0.5619851784832581;
            let dark = dark_state([g, g * r.sqrt()]).unwrap();
            let p = stationary_populations(&dark, [one, zero]);
            let denom = (1.0 + r) * (1.0 + r);
            assert!((p[0] - r * r / denom).abs() < 1e-15, "r={r}");
            assert!((p[1] - r / denom).abs() < 1e-15, "r={r}");
        }
    }

    #[test]
    fn fully_antisymmetric_overlap_is_trapped_completely() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dark = dark_state([1.0, 1.0]).unwrap();
        let psi = [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)];
        let p = stationary_populations(&dark, psi);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
        assert!(dark_state([0.0, 0.0]).is_none());
    }

    proptest! {
        // The trapped populations depend only on the coupling direction,
        // not its magnitude.
        #[test]
        fn stationary_populations_are_scale_free(
            g1 in 0.1f64..3.0,
            g2 in -3.0f64..3.0,
            s in 0.1f64..50.0,
        ) {
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            let d1 = dark_state([g1, g2]).unwrap();
            let d2 = dark_state([s * g1, s * g2]).unwrap();
            let p1 = stationary_populations(&d1, [one, zero]);
            let p2 = stationary_populations(&d2, [one, zero]);
            prop_assert!((p1[0] - p2[0]).abs() <= 1e-12);
            prop_assert!((p1[1] - p2[1]).abs() <= 1e-12);
        }
    }
}
