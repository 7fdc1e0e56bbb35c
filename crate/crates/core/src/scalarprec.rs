//! Extended-precision gap prober for scalar one-mode potentials.
//!
//! High-index gaps of an analytic potential shrink super-exponentially:
//! for `q = 2 cos 2 pi x` the width of gap `s` is of order
//! `8 pi^2 (4 pi^2)^{-s} / ((s-1)!)^2`, which drops below the `f64`
//! resolution of the surrounding eigenvalues (~1e-12 absolute) already
//! near `s = 7` and reaches ~1e-40 at `s = 14`. Double-precision solvers
//! therefore cannot distinguish such a gap from a band touch.
//!
//! For a scalar potential with Fourier modes `{0, 1}` the Galerkin matrix
//! is Hermitian tridiagonal, and the classic pivot-sign count of
//! `T - sigma I` gives the exact number of eigenvalues below `sigma`.
//! Running that count in multiprecision arithmetic and bisecting pins the
//! band edges to arbitrary accuracy: gap `s` of the one-dimensional
//! operator is the interval between eigenvalues `s` and `s + 1` of the
//! periodic problem (`t = 0`) for even `s` and of the antiperiodic
//! problem (`t = pi`) for odd `s`.
//!
//! The prober accepts any matrix potential that is a scalar multiple of
//! the identity: its bands are `m`-fold copies of the scalar bands, so
//! the scalar gaps are exactly the gaps of the matrix operator.

use astro_float::{BigFloat, Consts, RoundingMode};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::MatrixPotential;

const RM: RoundingMode = RoundingMode::ToEven;

/// One probed gap with edges pinned far below `f64` resolution.
#[derive(Debug, Clone)]
pub struct ScalarGapProbe {
    pub s: u32,
    /// Gap edges rounded to `f64`.
    pub lower: f64,
    pub upper: f64,
    /// Gap width computed in extended precision, rounded to `f64`.
    pub width: f64,
    /// `log10` of the width; `-inf` for a closed gap.
    pub width_log10: f64,
}

struct Workspace {
    precision: usize,
    pi2: BigFloat,
    q0: BigFloat,
    /// `|q_hat_1|^2`.
    off2: BigFloat,
    tiny: BigFloat,
}

impl Workspace {
    fn new(q0: f64, q1: Complex64, precision: usize) -> Self {
        let mut consts = Consts::new().expect("constants cache");
        let pi = consts.pi(precision, RM);
        let pi2 = pi.mul(&pi, precision, RM);
        let re = BigFloat::from_f64(q1.re, precision);
        let im = BigFloat::from_f64(q1.im, precision);
        let off2 = re
            .mul(&re, precision, RM)
            .add(&im.mul(&im, precision, RM), precision, RM);
        // far below any honest pivot, used only to sidestep exact zeros
        let small = BigFloat::from_f64(1e-250, precision);
        let tiny = small.mul(&small, precision, RM);
        Self {
            precision,
            pi2,
            q0: BigFloat::from_f64(q0, precision),
            off2,
            tiny,
        }
    }

    /// Diagonal entries `(2 pi n + t)^2 + q0` for `t = 0` or `pi`:
    /// `pi^2 a_n + q0` with the exact integer `a_n = (2n)^2` or `(2n + 1)^2`.
    fn diagonal(&self, truncation: i64, antiperiodic: bool) -> Vec<BigFloat> {
        (-truncation..=truncation)
            .map(|n| {
                let a = if antiperiodic { 2 * n + 1 } else { 2 * n };
                let a2 = BigFloat::from_i64(a * a, self.precision);
                self.pi2
                    .mul(&a2, self.precision, RM)
                    .add(&self.q0, self.precision, RM)
            })
            .collect()
    }

    /// Number of eigenvalues of the tridiagonal matrix below `sigma`.
    fn count_below(&self, diag: &[BigFloat], sigma: &BigFloat) -> usize {
        let p = self.precision;
        let mut count = 0;
        let mut prev: Option<BigFloat> = None;
        for d in diag {
            let mut pivot = d.sub(sigma, p, RM);
            if let Some(q) = &prev {
                pivot = pivot.sub(&self.off2.div(q, p, RM), p, RM);
            }
            if pivot.is_zero() {
                pivot = self.tiny.clone();
            }
            if pivot.is_negative() {
                count += 1;
            }
            prev = Some(pivot);
        }
        count
    }

    /// Bisects for the `r`-th smallest eigenvalue (1-based).
    fn eigenvalue(&self, diag: &[BigFloat], r: usize, lo: f64, hi: f64, iters: usize) -> BigFloat {
        let p = self.precision;
        let mut lo = BigFloat::from_f64(lo, p);
        let mut hi = BigFloat::from_f64(hi, p);
        debug_assert!(self.count_below(diag, &lo) < r);
        debug_assert!(self.count_below(diag, &hi) >= r);
        let half = BigFloat::from_f64(0.5, p);
        for _ in 0..iters {
            let mid = lo.add(&hi, p, RM).mul(&half, p, RM);
            if self.count_below(diag, &mid) >= r {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo.add(&hi, p, RM).mul(&half, p, RM)
    }
}

fn to_f64(x: &BigFloat) -> f64 {
    format!("{x}").parse().unwrap_or(f64::NAN)
}

/// Probes the gaps `s_lo ..= s_hi` of a scalar-reducible potential with
/// Fourier modes `{0, 1}`. Edges are validated against a deeper
/// truncation before being reported.
pub fn probe_gaps(
    potential: &MatrixPotential,
    s_lo: u32,
    s_hi: u32,
    precision_bits: usize,
) -> Result<Vec<ScalarGapProbe>> {
    if s_lo < 1 || s_hi < s_lo {
        return Err(Error::InvalidParameter(format!(
            "gap index range must satisfy 1 <= s_lo <= s_hi, got {s_lo}..{s_hi}"
        )));
    }
    let modes = potential.scalar_modes().ok_or_else(|| {
        Error::InvalidParameter(
            "the extended-precision prober needs a scalar multiple of the identity".into(),
        )
    })?;
    let mut q0 = 0.0;
    let mut q1 = Complex64::new(0.0, 0.0);
    for (n, value) in modes {
        match n {
            0 => q0 = value.re,
            1 => q1 = value,
            _ if value.norm() == 0.0 => {}
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "the extended-precision prober supports modes 0 and 1 only, found {n}"
                )))
            }
        }
    }
    let precision = precision_bits.max(192);
    let ws = Workspace::new(q0, q1, precision);
    let iters = precision / 2 + 64;

    let mut out = Vec::new();
    for s in s_lo..=s_hi {
        let antiperiodic = s % 2 == 1;
        let truncation = (s as i64) / 2 + 40;
        let diag = ws.diagonal(truncation, antiperiodic);
        let deeper = ws.diagonal(truncation + 8, antiperiodic);

        // f64 bracket from Gershgorin bounds around the target cluster
        let margin = 2.0 * q1.norm() + q0.abs() + 10.0;
        let lo = -margin;
        let hi = (std::f64::consts::PI * (s as f64 + 2.0)).powi(2) + margin;

        let e_lo = ws.eigenvalue(&diag, s as usize, lo, hi, iters);
        let e_hi = ws.eigenvalue(&diag, s as usize + 1, lo, hi, iters);
        let e_lo_check = ws.eigenvalue(&deeper, s as usize, lo, hi, iters);
        let e_hi_check = ws.eigenvalue(&deeper, s as usize + 1, lo, hi, iters);

        let width = e_hi.sub(&e_lo, precision, RM);
        let width_check = e_hi_check.sub(&e_lo_check, precision, RM);
        let w = to_f64(&width).max(0.0);
        let w_check = to_f64(&width_check).max(0.0);
        let agree = if w == 0.0 && w_check == 0.0 {
            true
        } else {
            let denom = w.max(w_check);
            (w - w_check).abs() <= 1e-6 * denom
        };
        if !agree {
            return Err(Error::IntegrationTolerance {
                defect: (w - w_check).abs(),
                tol: 1e-6 * w.max(w_check),
                steps: truncation as usize,
            });
        }
        out.push(ScalarGapProbe {
            s,
            lower: to_f64(&e_lo),
            upper: to_f64(&e_hi),
            width: w,
            width_log10: if w > 0.0 {
                w.log10()
            } else {
                f64::NEG_INFINITY
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_cos() -> MatrixPotential {
        MatrixPotential::from_document_str(
            "m = 1\n[[modes]]\nn = 1\nre = [[1.0]]\nim = [[0.0]]\n",
        )
        .unwrap()
    }

    #[test]
    fn free_potential_gaps_are_closed() {
        let p = MatrixPotential::new(1, vec![]).unwrap();
        let probes = probe_gaps(&p, 1, 4, 256).unwrap();
        for probe in probes {
            assert_eq!(probe.width, 0.0, "gap {} should be closed", probe.s);
            assert_eq!(probe.width_log10, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn cosine_gaps_match_f64_pipeline_at_low_index() {
        // cross-check against the Galerkin band edges where f64 resolves them
        let p = scalar_cos();
        let probes = probe_gaps(&p, 1, 2, 320).unwrap();
        let cfg = crate::bloch::SolverConfig {
            truncation: 24,
            t_samples: 2,
            n_bands: 4,
            convergence_tol: 1e-12,
            max_truncation: 64,
        };
        let anti = crate::bloch::eigen_sorted(&p, std::f64::consts::PI, &cfg).unwrap();
        let peri = crate::bloch::eigen_sorted(&p, 0.0, &cfg).unwrap();
        assert!((probes[0].lower - anti[0]).abs() < 1e-8);
        assert!((probes[0].upper - anti[1]).abs() < 1e-8);
        assert!((probes[1].lower - peri[1]).abs() < 1e-8);
        assert!((probes[1].upper - peri[2]).abs() < 1e-8);
    }

    #[test]
    fn cosine_gap_widths_decay_superexponentially_but_stay_open() {
        let p = scalar_cos();
        let probes = probe_gaps(&p, 3, 9, 512).unwrap();
        for w in probes.windows(2) {
            assert!(w[0].width > 0.0);
            assert!(w[1].width > 0.0, "gap {} closed", w[1].s);
            // each successive gap is at least 100x thinner
            assert!(w[1].width < 1e-2 * w[0].width);
        }
    }

    #[test]
    fn rejects_matrix_potentials_and_high_modes() {
        let matrix = MatrixPotential::from_document_str(
            r#"
            m = 2
            [[modes]]
            n = 0
            re = [[0.0, 1.0], [1.0, 0.0]]
            im = [[0.0, 0.0], [0.0, 0.0]]
            "#,
        )
        .unwrap();
        assert!(probe_gaps(&matrix, 1, 2, 256).is_err());

        let high = MatrixPotential::from_document_str(
            "m = 1\n[[modes]]\nn = 2\nre = [[0.4]]\nim = [[0.0]]\n",
        )
        .unwrap();
        assert!(probe_gaps(&high, 1, 2, 256).is_err());
    }
}
