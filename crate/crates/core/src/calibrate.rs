//! Runtime calibration of the symbolic constants: the prefactor `c1` is
//! fitted as the smallest value for which every computed large eigenvalue
//! lies inside the localization neighborhood of its nearest unperturbed
//! branch, and the index thresholds are the first points from which the
//! respective closed-form predicates hold and persist.

use serde::Serialize;

use crate::bloch::{self, SolverConfig};
use crate::error::{Error, Result};
use crate::potential::{FourierTail, MatrixPotential, MeanSpectrum};
use crate::unperturbed::{
    self, epsilon_k, safe_intervals_unchecked, AsymptoticParams,
};

const PI: f64 = std::f64::consts::PI;

/// A predicate must hold from the reported index for this many
/// consecutive indices before the scan accepts it.
const PERSIST: u32 = 5;

/// Floor for the fitted prefactor: an exactly solvable potential would
/// otherwise produce degenerate zero-radius windows.
const C1_FLOOR: f64 = 1e-8;

/// How the localization prefactor is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum C1Mode {
    Fixed(f64),
    Fit,
}

/// Effective parameters together with how they were obtained.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub c1_mode: C1Mode,
    pub fitted_c1: Option<f64>,
    /// `(lambda, t, k, j)` attaining the fitted ratio.
    pub c1_witness: Option<(f64, f64, i64, usize)>,
    pub fit_k_range: Option<(u32, u32)>,
    pub n: u32,
    pub n1: u32,
    pub n2: u32,
    pub n3: u32,
}

/// Fits the smallest `c1` such that every computed eigenvalue in the
/// calibration shell lies within `epsilon_k` of some unperturbed branch:
/// the maximum over eigenvalues of the minimal ratio
/// `|lambda - mu_kj(t)| / (ln|k|/|k| + q_k)`.
pub fn fit_c1(
    potential: &MatrixPotential,
    spectrum: &MeanSpectrum,
    k_lo: u32,
    k_hi: u32,
    t_count: usize,
) -> Result<(f64, Option<(f64, f64, i64, usize)>)> {
    if k_lo < 2 || k_hi < k_lo {
        return Err(Error::InvalidParameter(format!(
            "c1 fit needs 2 <= k_lo <= k_hi, got {k_lo}..{k_hi}"
        )));
    }
    let m = potential.dimension();
    let (mu1, mup) = spectrum.value_range();
    let config = SolverConfig {
        t_samples: t_count,
        convergence_tol: 1e-9,
        ..SolverConfig::for_bands(potential, m * (2 * k_hi as usize + 4), t_count)
    };
    let e_lo = (2.0 * PI * k_lo as f64 - PI).powi(2) + mu1;
    let e_hi = (2.0 * PI * k_hi as f64 + PI).powi(2) + mup;

    let mut c1: f64 = 0.0;
    let mut witness = None;
    for &t in &bloch::quasimomentum_grid(t_count) {
        let values = bloch::eigen_sorted(potential, t, &config)?;
        for &lambda in values.iter().filter(|v| (e_lo..=e_hi).contains(v)) {
            // minimal required prefactor over candidate branches
            let mut required = f64::INFINITY;
            let mut at = (0i64, 0usize);
            for ka in 2..=(k_hi + 2) {
                let denom = (ka as f64).ln() / ka as f64 + potential.q_tail(ka);
                for k in [ka as i64, -(ka as i64)] {
                    for j in 0..spectrum.p() {
                        let ratio = (lambda
                            - unperturbed::mu_value(k, spectrum.value(j), t))
                        .abs()
                            / denom;
                        if ratio < required {
                            required = ratio;
                            at = (k, j);
                        }
                    }
                }
            }
            if required > c1 {
                c1 = required;
                witness = Some((lambda, t, at.0, at.1));
            }
        }
    }
    Ok((c1.max(C1_FLOOR), witness))
}

/// First index `s >= 5` from which the overlap interval `I(s)` is
/// non-empty and stays non-empty.
pub fn fit_n1(
    spectrum: &MeanSpectrum,
    q: &dyn FourierTail,
    params: &AsymptoticParams,
) -> Result<u32> {
    let (mu1, mup) = spectrum.value_range();
    let nonempty = |s: u32| -> Result<bool> {
        let eps = unperturbed::epsilon_of_s(s, q, params)?;
        Ok(2.0 * eps <= PI * PI * (2.0 * s as f64 + 1.0) + mu1 - mup)
    };
    'scan: for s in 5u32..1000 {
        for probe in s..s + PERSIST {
            if !nonempty(probe)? {
                continue 'scan;
            }
        }
        return Ok(s);
    }
    Err(Error::InvalidParameter(
        "no overlap index found below 1000; the mean spectrum spread is too large".into(),
    ))
}

/// Branch-separation predicate behind the safe-interval threshold: for
/// both signs of `k` and every branch, the safe intervals are non-empty,
/// the localization neighborhoods around distinct nearby branches stay
/// disjoint at the interval endpoints and midpoints, and no discarded
/// exceptional point grazes `[0, pi]` from outside.
fn n2_predicate(
    k: u32,
    spectrum: &MeanSpectrum,
    q: &dyn FourierTail,
    params: &AsymptoticParams,
) -> Result<bool> {
    for k_signed in [k as i64, -(k as i64)] {
        let delta = unperturbed::delta_k(k_signed, q, params)?;
        let eps_k = epsilon_k(k_signed, q.q_tail(k), params)?;
        for j in 0..spectrum.p() {
            let set = safe_intervals_unchecked(k_signed, j, spectrum, q, params)?;
            if set.is_empty() {
                return Ok(false);
            }
            // grazing check against the raw collision solutions
            let mu_j = spectrum.value(j);
            for i in 0..spectrum.p() {
                let diff = spectrum.value(i) - mu_j;
                let t_even = diff / (4.0 * PI * (2 * k_signed) as f64);
                let t_odd = PI + diff / (4.0 * PI * (2 * k_signed + 1) as f64);
                for t_star in [t_even, t_odd] {
                    let dist = if t_star < 0.0 {
                        -t_star
                    } else if t_star > PI {
                        t_star - PI
                    } else {
                        continue;
                    };
                    if dist < delta {
                        return Ok(false);
                    }
                }
            }
            for &(a, b) in &set.intervals {
                for t in [a, 0.5 * (a + b), b] {
                    let center = unperturbed::mu_value(k_signed, mu_j, t);
                    for na in 2..=(k + 3) {
                        let eps_n = epsilon_k(na as i64, q.q_tail(na), params)?;
                        for n in [na as i64, -(na as i64)] {
                            for i in 0..spectrum.p() {
                                if (n, i) == (k_signed, j) {
                                    continue;
                                }
                                let other = unperturbed::mu_value(n, spectrum.value(i), t);
                                if (center - other).abs() <= eps_k + eps_n {
                                    return Ok(false);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

/// First index from which the branch-separation predicate holds and
/// persists.
pub fn fit_n2(
    spectrum: &MeanSpectrum,
    q: &dyn FourierTail,
    params: &AsymptoticParams,
) -> Result<u32> {
    'scan: for k in 3u32..300 {
        for probe in k..k + PERSIST {
            if !n2_predicate(probe, spectrum, q, params)? {
                continue 'scan;
            }
        }
        return Ok(k);
    }
    Err(Error::InvalidParameter(
        "branch separation not reached below index 300; c1 is too large for this spectrum"
            .into(),
    ))
}

/// Resolves the effective parameters: fits or fixes `c1`, scans the
/// thresholds, and validates the result.
pub fn resolve_params(
    potential: &MatrixPotential,
    spectrum: &MeanSpectrum,
    c1_mode: C1Mode,
    fit_k_range: (u32, u32),
    tol: f64,
) -> Result<(AsymptoticParams, CalibrationReport)> {
    let (c1, fitted, witness) = match c1_mode {
        C1Mode::Fixed(v) => {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "c1 must be positive, got {v}"
                )));
            }
            (v, None, None)
        }
        C1Mode::Fit => {
            let (v, w) = fit_c1(potential, spectrum, fit_k_range.0, fit_k_range.1, 9)?;
            (v, Some(v), w)
        }
    };
    let mut params = AsymptoticParams {
        c1,
        tol,
        ..AsymptoticParams::default()
    };
    params.n = fit_k_range.0.max(2);
    params.n1 = fit_n1(spectrum, potential, &params)?.max(params.n);
    params.n2 = fit_n2(spectrum, potential, &params)?.max(params.n1);
    params.n3 = params.n.max(params.n1).max(params.n2) + 1;
    params.validate()?;
    let report = CalibrationReport {
        c1_mode,
        fitted_c1: fitted,
        c1_witness: witness,
        fit_k_range: matches!(c1_mode, C1Mode::Fit).then_some(fit_k_range),
        n: params.n,
        n1: params.n1,
        n2: params.n2,
        n3: params.n3,
    };
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{mean_spectrum, ZeroTail};

    #[test]
    fn fit_c1_free_potential_hits_floor() {
        let p = MatrixPotential::new(1, vec![]).unwrap();
        let s = mean_spectrum(&p.mean_matrix(), 1e-10).unwrap();
        let (c1, _) = fit_c1(&p, &s, 3, 6, 5).unwrap();
        assert_eq!(c1, C1_FLOOR);
    }

    #[test]
    fn fit_c1_bounds_observed_deviations() {
        // scalar cosine potential: deviations exist, c1 stays moderate
        let p = MatrixPotential::from_document_str(
            "m = 1\n[[modes]]\nn = 1\nre = [[1.0]]\nim = [[0.0]]\n",
        )
        .unwrap();
        let s = mean_spectrum(&p.mean_matrix(), 1e-10).unwrap();
        let (c1, witness) = fit_c1(&p, &s, 3, 8, 5).unwrap();
        assert!(c1 > C1_FLOOR && c1 < 10.0, "fitted c1 = {c1}");
        assert!(witness.is_some());
    }

    #[test]
    fn n1_scan_single_eigenvalue() {
        let s = MeanSpectrum::from_values(&[0.0], &[1]).unwrap();
        let params = AsymptoticParams::default();
        assert_eq!(fit_n1(&s, &ZeroTail, &params).unwrap(), 5);
    }

    #[test]
    fn n2_scan_separated_spectrum() {
        let s = MeanSpectrum::from_values(&[-1.0, 0.5, 2.0], &[1, 1, 1]).unwrap();
        let params = AsymptoticParams::default();
        let n2 = fit_n2(&s, &ZeroTail, &params).unwrap();
        assert!(n2 >= 3 && n2 < 50, "n2 = {n2}");
        assert!(n2_predicate(n2, &s, &ZeroTail, &params).unwrap());
    }

    #[test]
    fn resolve_params_monotone_thresholds() {
        let p = MatrixPotential::from_document_str(
            r#"
            m = 2
            [[modes]]
            n = 0
            re = [[0.0, 0.5], [0.5, 0.0]]
            im = [[0.0, 0.0], [0.0, 0.0]]
            [[modes]]
            n = 1
            re = [[0.3, 0.0], [0.0, -0.2]]
            im = [[0.0, 0.0], [0.0, 0.0]]
            "#,
        )
        .unwrap();
        let s = mean_spectrum(&p.mean_matrix(), 1e-10).unwrap();
        let (params, report) = resolve_params(&p, &s, C1Mode::Fit, (3, 8), 1e-9).unwrap();
        assert!(params.n <= params.n1 && params.n1 <= params.n2 && params.n2 < params.n3);
        assert_eq!(report.fitted_c1, Some(params.c1));
    }
}
