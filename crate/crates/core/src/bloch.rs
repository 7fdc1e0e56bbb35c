//! Plane-wave Galerkin discretization of the quasiperiodic operator family.
//!
//! In the basis `e^{i (2 pi n + t) x} e_s`, `n = -K..K`, `s = 1..m`, the
//! operator `-y'' + Q y` under `y(1) = e^{it} y(0)` becomes the Hermitian
//! block matrix with diagonal blocks `(2 pi n + t)^2 I + Q_hat_0` and
//! off-diagonal blocks `Q_hat_{n - n'}`. Its lowest eigenvalues converge to
//! the Bloch eigenvalues from above as the truncation grows, which gives a
//! cheap convergence certificate: re-solve at `K + 4` and compare.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::{hermitian_eigenvalues_sorted, MatrixPotential};
use crate::CMatrix;

const PI: f64 = std::f64::consts::PI;

/// Discretization and sampling parameters for the Galerkin solver.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Fourier truncation `K`: indices `-K..K` enter the basis.
    pub truncation: usize,
    /// Number of quasimomentum samples; the grid spans `[-pi, pi]` with
    /// both endpoints and, for an odd count, `t = 0` on the grid exactly.
    pub t_samples: usize,
    /// Number of band functions to report.
    pub n_bands: usize,
    /// Acceptance threshold for the truncation certificate.
    pub convergence_tol: f64,
    /// Hard cap for truncation doubling.
    pub max_truncation: usize,
}

impl SolverConfig {
    /// Default truncation sized for `n_bands` bands of an `m`-dimensional
    /// potential with top mode index `r`.
    pub fn for_bands(potential: &MatrixPotential, n_bands: usize, t_samples: usize) -> Self {
        let m = potential.dimension();
        let r = potential.max_mode_index() as usize;
        let k = (2 * n_bands.div_ceil(m) + r + 4).max(8);
        Self {
            truncation: k,
            t_samples,
            n_bands,
            convergence_tol: 1e-10,
            max_truncation: 512,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.truncation < 1 {
            return Err(Error::InvalidParameter("truncation must be >= 1".into()));
        }
        if self.t_samples < 2 {
            return Err(Error::InvalidParameter("t_samples must be >= 2".into()));
        }
        if self.n_bands < 1 {
            return Err(Error::InvalidParameter("n_bands must be >= 1".into()));
        }
        // the top 2m discrete eigenvalues are discarded as unconverged
        let dim = (2 * self.truncation + 1) * m;
        if self.n_bands + 2 * m > dim {
            return Err(Error::InvalidParameter(format!(
                "n_bands = {} exceeds usable eigenvalues {} at truncation {}",
                self.n_bands,
                dim - 2 * m,
                self.truncation
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "convergence_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Band functions sampled over the quasimomentum grid.
#[derive(Debug, Clone)]
pub struct BandGrid {
    t_values: Vec<f64>,
    /// `values[i][n]`: the `n`-th lowest eigenvalue at `t_values[i]`.
    values: Vec<Vec<f64>>,
}

impl BandGrid {
    pub fn new(t_values: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if t_values.len() != values.len() || t_values.is_empty() {
            return Err(Error::InvalidParameter(
                "band grid needs one eigenvalue column per grid point".into(),
            ));
        }
        let n = values[0].len();
        if values.iter().any(|col| col.len() != n) {
            return Err(Error::InvalidParameter(
                "band grid columns must have equal length".into(),
            ));
        }
        if values
            .iter()
            .any(|col| col.windows(2).any(|w| w[0] > w[1]))
        {
            return Err(Error::InvalidParameter(
                "band grid columns must be sorted non-decreasingly".into(),
            ));
        }
        Ok(Self { t_values, values })
    }

    pub fn t_values(&self) -> &[f64] {
        &self.t_values
    }

    pub fn t_count(&self) -> usize {
        self.t_values.len()
    }

    pub fn n_bands(&self) -> usize {
        self.values[0].len()
    }

    /// Eigenvalue `lambda_{n+1}(t_i)` (0-based band index).
    pub fn value(&self, i: usize, n: usize) -> f64 {
        self.values[i][n]
    }

    pub fn band(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |col| col[n])
    }

    /// Largest jump between adjacent samples of band `n`.
    pub fn max_adjacent_jump(&self, n: usize) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1][n] - w[0][n]).abs())
            .fold(0.0, f64::max)
    }

    /// Too few samples to trust extrema or continuity estimates.
    pub fn is_coarse(&self) -> bool {
        self.t_count() < 9
    }
}

/// Uniform grid over `[-pi, pi]` with exact endpoints; an odd count puts
/// `t = 0` on the grid exactly. The first point duplicates `t = pi` up to
/// the period of the Floquet family.
pub fn quasimomentum_grid(t_samples: usize) -> Vec<f64> {
    assert!(t_samples >= 2);
    let last = (t_samples - 1) as f64;
    (0..t_samples)
        .map(|i| PI * (2.0 * i as f64 - last) / last)
        .collect()
}

/// Assembles the Galerkin matrix at quasimomentum `t` and truncation `K`.
/// The result is Hermitian by construction.
pub fn assemble(potential: &MatrixPotential, t: f64, truncation: usize) -> CMatrix {
    let m = potential.dimension();
    let k = truncation as i64;
    let dim = (2 * truncation + 1) * m;
    let mut a = CMatrix::zeros(dim, dim);

    fn place(a: &mut CMatrix, d: i64, coeff: &CMatrix, k: i64, m: usize) {
        for row in -k..=k {
            let col = row - d;
            if col < -k || col > k {
                continue;
            }
            let r0 = ((row + k) as usize) * m;
            let c0 = ((col + k) as usize) * m;
            a.view_mut((r0, c0), (m, m)).copy_from(coeff);
        }
    }

    // potential blocks: block (r, c) holds Q_hat_{n_r - n_c}
    for n in potential.mode_indices().collect::<Vec<_>>() {
        let coeff = potential.mode(n).unwrap().clone();
        place(&mut a, n as i64, &coeff, k, m);
        if n != 0 {
            place(&mut a, -(n as i64), &coeff.adjoint(), k, m);
        }
    }

    // kinetic diagonal
    for n in -k..=k {
        let shift = 2.0 * PI * n as f64 + t;
        let kinetic = Complex64::new(shift * shift, 0.0);
        let base = ((n + k) as usize) * m;
        for s in 0..m {
            a[(base + s, base + s)] += kinetic;
        }
    }
    a
}

/// Lowest `n_bands` eigenvalues at one truncation, sorted ascending.
pub fn eigen_at_truncation(
    potential: &MatrixPotential,
    t: f64,
    truncation: usize,
    n_bands: usize,
) -> Vec<f64> {
    let a = assemble(potential, t, truncation);
    let mut values = hermitian_eigenvalues_sorted(&a);
    values.truncate(n_bands);
    values
}

/// Lowest `n_bands` Bloch eigenvalues at quasimomentum `t`, certified by
/// re-solving at truncation `K + 4`: the truncation doubles until the two
/// solves agree to `convergence_tol`.
pub fn eigen_sorted(
    potential: &MatrixPotential,
    t: f64,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    config.validate(potential.dimension())?;
    let mut truncation = config.truncation;
    loop {
        let coarse = eigen_at_truncation(potential, t, truncation, config.n_bands);
        let fine = eigen_at_truncation(potential, t, truncation + 4, config.n_bands);
        let residual = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual <= config.convergence_tol {
            return Ok(fine);
        }
        if 2 * truncation > config.max_truncation {
            return Err(Error::Unconverged {
                residual,
                tol: config.convergence_tol,
                truncation,
            });
        }
        truncation *= 2;
    }
}

/// Samples the band functions over the quasimomentum grid. Solves for
/// distinct `t` run in parallel; the assembly of the grid is an ordered,
/// deterministic reduction.
pub fn sample_bands(potential: &MatrixPotential, config: &SolverConfig) -> Result<BandGrid> {
    config.validate(potential.dimension())?;
    let ts = quasimomentum_grid(config.t_samples);
    let columns: Result<Vec<Vec<f64>>> = ts
        .par_iter()
        .map(|&t| eigen_sorted(potential, t, config))
        .collect();
    BandGrid::new(ts, columns?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn free_potential(m: usize) -> MatrixPotential {
        MatrixPotential::new(m, vec![]).unwrap()
    }

    fn scalar_cos() -> MatrixPotential {
        MatrixPotential::from_document_str(
            "m = 1\n[[modes]]\nn = 1\nre = [[1.0]]\nim = [[0.0]]\n",
        )
        .unwrap()
    }

    fn constant_offdiag() -> MatrixPotential {
        MatrixPotential::from_document_str(
            r#"
            m = 2
            [[modes]]
            n = 0
            re = [[0.0, 1.0], [1.0, 0.0]]
            im = [[0.0, 0.0], [0.0, 0.0]]
            "#,
        )
        .unwrap()
    }

    /// Sorted free eigenvalues {(2 pi k + t)^2} with multiplicity m.
    fn free_levels(t: f64, truncation: i64, m: usize, n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (-truncation..=truncation)
            .flat_map(|k| {
                let x = 2.0 * PI * k as f64 + t;
                std::iter::repeat(x * x).take(m)
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v.truncate(n);
        v
    }

    #[test]
    fn assemble_free_diagonal() {
        let a = assemble(&free_potential(1), 0.0, 1);
        let tau2 = (2.0 * PI) * (2.0 * PI);
        assert_abs_diff_eq!(a[(0, 0)].re, tau2, epsilon = 1e-12);
        assert_abs_diff_eq!(a[(1, 1)].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[(2, 2)].re, tau2, epsilon = 1e-12);
        assert_eq!(a[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn assemble_mathieu_tridiagonal() {
        let a = assemble(&scalar_cos(), 0.0, 1);
        for (r, c) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert_eq!(a[(r, c)], Complex64::new(1.0, 0.0));
        }
        assert_eq!(a[(0, 2)], Complex64::new(0.0, 0.0));
        assert_eq!(a[(2, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn assemble_exactly_hermitian() {
        let p = MatrixPotential::from_document_str(
            r#"
            m = 2
            [[modes]]
            n = 0
            re = [[0.1, 0.4], [0.4, -0.3]]
            im = [[0.0, 0.2], [-0.2, 0.0]]
            [[modes]]
            n = 2
            re = [[0.5, -0.1], [0.3, 0.7]]
            im = [[0.2, 0.6], [-0.4, 0.1]]
            "#,
        )
        .unwrap();
        let a = assemble(&p, 0.37, 5);
        let defect = (&a - a.adjoint()).map(|z| z.norm()).max();
        assert_eq!(defect, 0.0);
    }

    #[test]
    fn constant_potential_block_diagonal_eigenvalues() {
        // eigenvalues exactly (2 pi n + t)^2 +/- 1
        let t = 0.3;
        let config = SolverConfig {
            truncation: 8,
            t_samples: 2,
            n_bands: 10,
            convergence_tol: 1e-9,
            max_truncation: 64,
        };
        let got = eigen_sorted(&constant_offdiag(), t, &config).unwrap();
        let mut expect: Vec<f64> = (-9i64..=9)
            .flat_map(|k| {
                let x = 2.0 * PI * k as f64 + t;
                [x * x - 1.0, x * x + 1.0]
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expect) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn free_operator_levels() {
        let t = 0.3;
        for m in [1usize, 2] {
            let config = SolverConfig {
                truncation: 8,
                t_samples: 2,
                n_bands: 8,
                convergence_tol: 1e-10,
                max_truncation: 64,
            };
            let got = eigen_sorted(&free_potential(m), t, &config).unwrap();
            let expect = free_levels(t, 12, m, 8);
            for (g, e) in got.iter().zip(&expect) {
                assert_abs_diff_eq!(g, e, epsilon = 1e-10 * e.max(1.0));
            }
        }
    }

    #[test]
    fn galerkin_eigenvalues_decrease_with_truncation() {
        let p = scalar_cos();
        for t in [0.0, 1.1, PI] {
            let coarse = eigen_at_truncation(&p, t, 6, 8);
            let fine = eigen_at_truncation(&p, t, 10, 8);
            for (c, f) in coarse.iter().zip(&fine) {
                // slack covers eigensolver noise at the matrix scale
                assert!(*f <= *c + 1e-8 * c.abs().max(1.0), "t={t}: {f} > {c}");
            }
        }
    }

    #[test]
    fn grid_contains_exact_anchors() {
        let g = quasimomentum_grid(101);
        assert_eq!(g[0], -PI);
        assert_eq!(g[50], 0.0);
        assert_eq!(g[100], PI);
        let g = quasimomentum_grid(2);
        assert_eq!(g, vec![-PI, PI]);
    }

    #[test]
    fn sample_bands_free_ranges() {
        let config = SolverConfig {
            truncation: 8,
            t_samples: 41,
            n_bands: 4,
            convergence_tol: 1e-9,
            max_truncation: 64,
        };
        let grid = sample_bands(&free_potential(1), &config).unwrap();
        assert!(!grid.is_coarse());
        // band n covers [ (n-1)^2 pi^2, n^2 pi^2 ]
        for n in 0..4usize {
            let lo = grid.band(n).fold(f64::INFINITY, f64::min);
            let hi = grid.band(n).fold(f64::NEG_INFINITY, f64::max);
            let expect_lo = (n as f64 * PI).powi(2);
            let expect_hi = ((n + 1) as f64 * PI).powi(2);
            assert_abs_diff_eq!(lo, expect_lo, epsilon = 1e-8);
            assert_abs_diff_eq!(hi, expect_hi, epsilon = 1e-8);
        }
    }

    #[test]
    fn coarse_grid_flagged() {
        let config = SolverConfig {
            truncation: 4,
            t_samples: 2,
            n_bands: 2,
            convergence_tol: 1e-8,
            max_truncation: 64,
        };
        let grid = sample_bands(&free_potential(1), &config).unwrap();
        assert_eq!(grid.t_count(), 2);
        assert!(grid.is_coarse());
    }

    #[test]
    fn unconverged_reports_residual() {
        // max_truncation below what the tolerance needs
        let config = SolverConfig {
            truncation: 1,
            t_samples: 2,
            n_bands: 1,
            convergence_tol: 1e-300,
            max_truncation: 2,
        };
        let err = eigen_sorted(&scalar_cos(), 0.5, &config).unwrap_err();
        assert!(matches!(err, Error::Unconverged { .. }));
    }
}
