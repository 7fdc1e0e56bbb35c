//! Closed-form spectral data of the free and constant-coefficient operators
//! and the asymptotic machinery built on them: exceptional quasimomenta,
//! the radii `epsilon_k`, `delta_k`, `gamma_k`, safe-interval partitions of
//! `[0, pi]`, gap windows, and the triple-separation condition that forces
//! a finite number of gaps.
//!
//! Everything here is arithmetic over the mean-matrix spectrum; no
//! discretization is involved, which is what makes these quantities usable
//! as independent references for the Galerkin solver.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{FourierTail, MeanSpectrum};

const PI: f64 = std::f64::consts::PI;

/// The constants the asymptotic statements leave symbolic: the prefactor
/// `c1` of `epsilon_k` and the index thresholds from which each statement
/// is enforced.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsymptoticParams {
    /// Prefactor in `epsilon_k = c1 (ln|k|/|k| + q_k)`.
    pub c1: f64,
    /// Localization threshold: all eigenvalues with index `|k| >= n` are
    /// expected inside their `epsilon_k` neighborhoods.
    pub n: u32,
    /// Band-overlap threshold for the intervals `I(s)` and windows `U(s)`.
    pub n1: u32,
    /// Safe-interval threshold (branch separation).
    pub n2: u32,
    /// Window-intersection threshold, `n3 > max(n, n1, n2)`.
    pub n3: u32,
    /// Comparison tolerance for the checkers.
    pub tol: f64,
}

impl AsymptoticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c1 must be positive, got {}",
                self.c1
            )));
        }
        if !(self.n <= self.n1 && self.n1 <= self.n2 && self.n2 <= self.n3) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must satisfy n <= n1 <= n2 <= n3, got {} {} {} {}",
                self.n, self.n1, self.n2, self.n3
            )));
        }
        Ok(())
    }
}

impl Default for AsymptoticParams {
    fn default() -> Self {
        Self {
            c1: 1.0,
            n: 3,
            n1: 5,
            n2: 5,
            n3: 6,
            tol: 1e-9,
        }
    }
}

/// Eigenvalue `mu_{k,j}(t) = (2 pi k + t)^2 + mu_j` of the constant
/// operator, carrying its multiplicity `m_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnperturbedEigenvalue {
    pub k: i64,
    /// 0-based distinct-eigenvalue index.
    pub j: usize,
    pub t: f64,
    pub value: f64,
    pub multiplicity: usize,
}

/// Quasimomentum in `[0, pi]` at which two unperturbed branches collide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceptionalPoint {
    /// `2k` for a collision with the branch `-k`, `2k + 1` for `-k - 1`.
    pub parity_index: i64,
    pub j: usize,
    pub i: usize,
    pub t_star: f64,
}

/// The part of `[0, pi]` that survives deleting `delta_k` balls around
/// every exceptional point of the branch `(k, j)`.
#[derive(Debug, Clone)]
pub struct SafeIntervalSet {
    pub k: i64,
    pub j: usize,
    pub delta_k: f64,
    /// Ordered, pairwise disjoint closed intervals `[a, b]` with `a < b`.
    pub intervals: Vec<(f64, f64)>,
}

impl SafeIntervalSet {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// An energy window predicted to contain every sufficiently high gap.
#[derive(Debug, Clone, Serialize)]
pub struct GapWindow {
    pub s: u32,
    pub lower: f64,
    pub upper: f64,
    pub kind: GapWindowKind,
}

#[derive(Debug, Clone, Serialize)]
pub enum GapWindowKind {
    /// `U(s) = ((pi s)^2 + mu_1 - eps(s-1), (pi s)^2 + mu_p + eps(s))`.
    U,
    /// `S(j, s)`: union of `gamma`-balls around `(pi s)^2 + (mu_i + mu_j)/2`.
    S {
        j: usize,
        gamma: f64,
        subintervals: Vec<(f64, f64)>,
    },
}

/// Result of the triple-separation check on the distinct eigenvalues of
/// the mean matrix. `d > 0` for some triple forces the three associated
/// window families to have empty common intersection at high energy.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionOneReport {
    /// The check needs at least three distinct eigenvalues.
    pub applicable: bool,
    /// 0-based maximizing triple `j1 < j2 < j3`.
    pub best_triple: Option<[usize; 3]>,
    pub d: f64,
    pub satisfied: bool,
    pub per_triple: Vec<([usize; 3], f64)>,
}

/// `mu_{k,j}(t) = (2 pi k + t)^2 + mu_j`.
pub fn mu_kj(
    k: i64,
    j: usize,
    t: f64,
    spectrum: &MeanSpectrum,
) -> Result<UnperturbedEigenvalue> {
    if j >= spectrum.p() {
        return Err(Error::IndexOutOfRange(format!(
            "j = {j} out of range (p = {})",
            spectrum.p()
        )));
    }
    if !(-PI..=PI).contains(&t) {
        return Err(Error::IndexOutOfRange(format!(
            "quasimomentum t = {t} outside [-pi, pi]"
        )));
    }
    let base = 2.0 * PI * k as f64 + t;
    Ok(UnperturbedEigenvalue {
        k,
        j,
        t,
        value: base * base + spectrum.value(j),
        multiplicity: spectrum.multiplicity(j),
    })
}

/// Raw branch value without range checks, for inner loops.
pub(crate) fn mu_value(k: i64, mu_j: f64, t: f64) -> f64 {
    let base = 2.0 * PI * k as f64 + t;
    base * base + mu_j
}

/// Multiplicity of the free Bloch eigenvalue `(2 pi k + t)^2`: it doubles
/// exactly at the collisions `t = 0` (for `k != 0`) and `t = +/- pi`.
pub fn free_multiplicity(k: i64, t: f64, m: usize) -> usize {
    if (t == 0.0 && k != 0) || t == PI || t == -PI {
        2 * m
    } else {
        m
    }
}

/// Solutions in `[0, pi]` of the branch-collision equations for `(k, j)`:
/// `8 pi k t + mu_j - mu_i = 0` (collision with branch `-k`) and
/// `4 pi (2k + 1)(t - pi) + mu_j - mu_i = 0` (collision with `-k - 1`).
pub fn exceptional_points(k: i64, j: usize, spectrum: &MeanSpectrum) -> Vec<ExceptionalPoint> {
    assert!(k != 0, "exceptional points need |k| >= 1");
    let mu_j = spectrum.value(j);
    let mut out = Vec::new();
    for i in 0..spectrum.p() {
        let diff = spectrum.value(i) - mu_j;
        let t_even = diff / (4.0 * PI * (2 * k) as f64);
        if (0.0..=PI).contains(&t_even) {
            out.push(ExceptionalPoint {
                parity_index: 2 * k,
                j,
                i,
                t_star: t_even,
            });
        }
        let t_odd = PI + diff / (4.0 * PI * (2 * k + 1) as f64);
        if (0.0..=PI).contains(&t_odd) {
            out.push(ExceptionalPoint {
                parity_index: 2 * k + 1,
                j,
                i,
                t_star: t_odd,
            });
        }
    }
    out
}

/// Localization radius `epsilon_k = c1 (ln|k|/|k| + q_k)`, defined for
/// `|k| >= 2` so the logarithm is positive.
pub fn epsilon_k(k: i64, q_k: f64, params: &AsymptoticParams) -> Result<f64> {
    let ka = k.unsigned_abs();
    if ka < 2 {
        return Err(Error::IndexOutOfRange(format!(
            "epsilon_k requires |k| >= 2, got {k}"
        )));
    }
    Ok(params.c1 * ((ka as f64).ln() / ka as f64 + q_k))
}

fn epsilon_abs(ka: u32, q: &dyn FourierTail, params: &AsymptoticParams) -> Result<f64> {
    epsilon_k(ka as i64, q.q_tail(ka), params)
}

/// Deleted-ball radius from `4 pi (2|k| - 2) delta_k =
/// 2 max(eps_k, eps_{-k}, eps_{-k-1})`. The radii depend on the absolute
/// index only, so the maximum runs over `|k|` and `|k + 1|` (absolute
/// indices below 2, where `epsilon` is undefined, are skipped).
pub fn delta_k(k: i64, q: &dyn FourierTail, params: &AsymptoticParams) -> Result<f64> {
    let ka = k.unsigned_abs() as u32;
    if ka < 2 {
        return Err(Error::IndexOutOfRange(format!(
            "delta_k requires |k| >= 2, got {k}"
        )));
    }
    let partner = (-k - 1).unsigned_abs() as u32;
    let mut top = epsilon_abs(ka, q, params)?;
    if partner >= 2 {
        top = top.max(epsilon_abs(partner, q, params)?);
    }
    Ok(2.0 * top / (4.0 * PI * (2.0 * ka as f64 - 2.0)))
}

/// Window radius `epsilon(s) = epsilon_k` for `s in {2k, 2k+1}`;
/// needs `s >= 4`.
pub fn epsilon_of_s(s: u32, q: &dyn FourierTail, params: &AsymptoticParams) -> Result<f64> {
    epsilon_abs(s / 2, q, params)
}

/// Safe intervals for the branch `(k, j)`: `[0, pi]` minus the open
/// `delta_k` balls around every exceptional point, merged and clipped.
/// An empty remnant is a valid outcome.
pub fn safe_intervals(
    k: i64,
    j: usize,
    spectrum: &MeanSpectrum,
    q: &dyn FourierTail,
    params: &AsymptoticParams,
) -> Result<SafeIntervalSet> {
    let ka = k.unsigned_abs();
    if ka < 2.max(params.n2 as u64) {
        return Err(Error::IndexOutOfRange(format!(
            "safe_intervals requires |k| >= max(2, n2 = {}), got {k}",
            params.n2
        )));
    }
    safe_intervals_unchecked(k, j, spectrum, q, params)
}

pub(crate) fn safe_intervals_unchecked(
    k: i64,
    j: usize,
    spectrum: &MeanSpectrum,
    q: &dyn FourierTail,
    params: &AsymptoticParams,
) -> Result<SafeIntervalSet> {
    let delta = delta_k(k, q, params)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta_k must be positive, got {delta}"
        )));
    }
    let mut deleted: Vec<(f64, f64)> = exceptional_points(k, j, spectrum)
        .iter()
        .map(|e| ((e.t_star - delta).max(0.0), (e.t_star + delta).min(PI)))
        .collect();
    deleted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Merge overlapping or touching deleted balls.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for d in deleted {
        match merged.last_mut() {
            Some(last) if d.0 <= last.1 => last.1 = last.1.max(d.1),
            _ => merged.push(d),
        }
    }

    let mut intervals = Vec::new();
    let mut cursor = 0.0;
    for (a, b) in &merged {
        if *a > cursor {
            intervals.push((cursor, *a));
        }
        cursor = cursor.max(*b);
    }
    if cursor < PI {
        intervals.push((cursor, PI));
    }
    intervals.retain(|(a, b)| b > a);
    Ok(SafeIntervalSet {
        k,
        j,
        delta_k: delta,
        intervals,
    })
}

/// Gap window `U(s) = ((pi s)^2 + mu_1 - eps(s-1), (pi s)^2 + mu_p + eps(s))`.
pub fn window_u(
    s: u32,
    spectrum: &MeanSpectrum,
    q: &dyn FourierTail,
    params: &AsymptoticParams,
) -> Result<GapWindow> {
    if s <= params.n1 || s < 5 {
        return Err(Error::IndexOutOfRange(format!(
            "window U(s) requires s > max(n1 = {}, 4), got {s}",
            params.n1
        )));
    }
    let (mu1, mup) = spectrum.value_range();
    let center = (PI * s as f64).powi(2);
    Ok(GapWindow {
        s,
        lower: center + mu1 - epsilon_of_s(s - 1, q, params)?,
        upper: center + mup + epsilon_of_s(s, q, params)?,
        kind: GapWindowKind::U,
    })
}

/// The explicit bound used for the vanishing window radii: the image
/// half-width of a deleted ball under the branch map plus the
/// localization radius plus the quadratic center offset.
pub fn gamma_from_parts(k_abs: u32, delta: f64, epsilon: f64, mu_spread: f64) -> f64 {
    let ka = k_abs as f64;
    2.0 * (2.0 * PI * ka + PI) * delta
        + epsilon
        + (mu_spread / (4.0 * PI * (2.0 * ka - 1.0))).powi(2)
}

/// `gamma_k` for the branch index `|k| >= 2`, tending to zero.
pub fn gamma_k(
    k: i64,
    spectrum: &MeanSpectrum,
    q: &dyn FourierTail,
    params: &AsymptoticParams,
) -> Result<f64> {
    let ka = k.unsigned_abs() as u32;
    let delta = delta_k(k, q, params)?;
    let eps = epsilon_abs(ka, q, params)?;
    let (mu1, mup) = spectrum.value_range();
    Ok(gamma_from_parts(ka, delta, eps, mup - mu1))
}

/// Window radius `gamma(s) = gamma_k` for `s in {2k, 2k+1}`, mirroring
/// the `epsilon(s)` convention.
pub fn gamma_of_s(
    s: u32,
    spectrum: &MeanSpectrum,
    q: &dyn FourierTail,
    params: &AsymptoticParams,
) -> Result<f64> {
    gamma_k((s / 2) as i64, spectrum, q, params)
}

/// `S(j, s)`: the union over `i` of open `gamma`-balls around
/// `(pi s)^2 + (mu_i + mu_j)/2`.
pub fn window_s(
    s: u32,
    j: usize,
    spectrum: &MeanSpectrum,
    q: &dyn FourierTail,
    params: &AsymptoticParams,
) -> Result<GapWindow> {
    if s <= params.n3 {
        return Err(Error::IndexOutOfRange(format!(
            "window S(j, s) requires s > n3 = {}, got {s}",
            params.n3
        )));
    }
    let gamma = gamma_of_s(s, spectrum, q, params)?;
    Ok(window_s_with_gamma(s, j, spectrum, gamma))
}

pub(crate) fn window_s_with_gamma(
    s: u32,
    j: usize,
    spectrum: &MeanSpectrum,
    gamma: f64,
) -> GapWindow {
    let center0 = (PI * s as f64).powi(2);
    let mu_j = spectrum.value(j);
    let subintervals: Vec<(f64, f64)> = (0..spectrum.p())
        .map(|i| {
            let c = center0 + 0.5 * (spectrum.value(i) + mu_j);
            (c - gamma, c + gamma)
        })
        .collect();
    let lower = subintervals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let upper = subintervals
        .iter()
        .map(|v| v.1)
        .fold(f64::NEG_INFINITY, f64::max);
    GapWindow {
        s,
        lower,
        upper,
        kind: GapWindowKind::S {
            j,
            gamma,
            subintervals,
        },
    }
}

impl GapWindow {
    /// Whether `[lo, hi]` is contained in the window. For an S window the
    /// containment is against the union of its subintervals (merged first,
    /// since neighboring balls may overlap).
    pub fn contains_interval(&self, lo: f64, hi: f64) -> bool {
        match &self.kind {
            GapWindowKind::U => self.lower < lo && hi < self.upper,
            GapWindowKind::S { subintervals, .. } => {
                let mut parts = subintervals.clone();
                parts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut merged: Vec<(f64, f64)> = Vec::new();
                for p in parts {
                    match merged.last_mut() {
                        Some(last) if p.0 <= last.1 => last.1 = last.1.max(p.1),
                        _ => merged.push(p),
                    }
                }
                merged.iter().any(|(a, b)| *a < lo && hi < *b)
            }
        }
    }
}

fn diameter3(a: f64, b: f64, c: f64) -> f64 {
    let hi = a.max(b).max(c);
    let lo = a.min(b).min(c);
    hi - lo
}

/// Exhaustive triple-separation check over the distinct eigenvalues:
/// for every triple `j1 < j2 < j3` minimizes the diameter of
/// `{mu_j1 + mu_i1, mu_j2 + mu_i2, mu_j3 + mu_i3}` over all index triples
/// `(i1, i2, i3)`, and reports the triple maximizing that minimum.
pub fn condition_one(spectrum: &MeanSpectrum, tol: f64) -> ConditionOneReport {
    let p = spectrum.p();
    if p < 3 {
        return ConditionOneReport {
            applicable: false,
            best_triple: None,
            d: 0.0,
            satisfied: false,
            per_triple: Vec::new(),
        };
    }
    let mu = spectrum.values();
    let mut per_triple = Vec::new();
    let mut best: Option<([usize; 3], f64)> = None;
    for j1 in 0..p {
        for j2 in (j1 + 1)..p {
            for j3 in (j2 + 1)..p {
                let mut min_diam = f64::INFINITY;
                for i1 in 0..p {
                    for i2 in 0..p {
                        for i3 in 0..p {
                            let diam =
                                diameter3(mu[j1] + mu[i1], mu[j2] + mu[i2], mu[j3] + mu[i3]);
                            min_diam = min_diam.min(diam);
                        }
                    }
                }
                let triple = [j1, j2, j3];
                per_triple.push((triple, min_diam));
                if best.map_or(true, |(_, d)| min_diam > d) {
                    best = Some((triple, min_diam));
                }
            }
        }
    }
    let (triple, d) = best.unwrap();
    ConditionOneReport {
        applicable: true,
        best_triple: Some(triple),
        d,
        satisfied: d > tol,
        per_triple,
    }
}
