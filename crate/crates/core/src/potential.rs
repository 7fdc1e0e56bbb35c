//! Periodic Hermitian matrix potentials given by a finite list of Fourier
//! modes, their mean matrix `C` and its clustered spectral decomposition.
//!
//! A potential is stored as the modes `Q_hat_n` for `n >= 0` only; the
//! negative modes are implied by Hermiticity, `Q_hat_{-n} = Q_hat_n^H`, so
//! the reconstruction
//!
//! ```text
//! Q(x) = Q_hat_0 + sum_{n>=1} ( Q_hat_n e^{i 2 pi n x} + Q_hat_n^H e^{-i 2 pi n x} )
//! ```
//!
//! is Hermitian for every `x` by construction and has period one.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// One Fourier mode `Q_hat_n` of the potential, `n >= 0`.
#[derive(Debug, Clone)]
pub struct FourierMode {
    pub index: u32,
    pub coefficient: CMatrix,
}

/// Period-one Hermitian `m x m` matrix potential with finitely many modes.
#[derive(Debug, Clone)]
pub struct MatrixPotential {
    dimension: usize,
    /// Modes keyed by index; the zero mode is Hermitian.
    modes: BTreeMap<u32, CMatrix>,
}

#[derive(Debug, Deserialize)]
struct PotentialDoc {
    m: i64,
    #[serde(default)]
    modes: Vec<ModeDoc>,
}

#[derive(Debug, Deserialize)]
struct ModeDoc {
    n: i64,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl MatrixPotential {
    /// Builds a potential from validated parts.
    pub fn new(dimension: usize, modes: Vec<FourierMode>) -> Result<Self> {
        if dimension < 1 {
            return Err(Error::InvalidPotential(format!(
                "dimension m must be >= 1, got {dimension}"
            )));
        }
        let mut map = BTreeMap::new();
        for mode in modes {
            let c = &mode.coefficient;
            if c.nrows() != dimension || c.ncols() != dimension {
                return Err(Error::InvalidPotential(format!(
                    "mode n={} has shape {}x{}, expected {dimension}x{dimension}",
                    mode.index,
                    c.nrows(),
                    c.ncols()
                )));
            }
            if mode.index == 0 && *c != c.adjoint() {
                return Err(Error::InvalidPotential(
                    "zero mode must be Hermitian".into(),
                ));
            }
            if map.insert(mode.index, mode.coefficient).is_some() {
                return Err(Error::InvalidPotential(format!(
                    "duplicate mode index n={}",
                    mode.index
                )));
            }
        }
        Ok(Self {
            dimension,
            modes: map,
        })
    }

    /// Parses a potential-definition document.
    ///
    /// The document is structured text with top-level keys `m` (integer) and
    /// `modes` (list). Each mode carries `n >= 0` and row-major real
    /// matrices `re` and `im` of shape `m x m`. The zero mode must have `re`
    /// symmetric and `im` antisymmetric so that `Q_hat_0` is Hermitian.
    pub fn from_document_str(text: &str) -> Result<Self> {
        let doc: PotentialDoc = toml::from_str(text)?;
        if doc.m < 1 {
            return Err(Error::InvalidPotential(format!(
                "key `m` must be >= 1, got {}",
                doc.m
            )));
        }
        let m = doc.m as usize;
        let mut modes = Vec::with_capacity(doc.modes.len());
        for mode in &doc.modes {
            if mode.n < 0 {
                return Err(Error::InvalidPotential(format!(
                    "mode index n must be >= 0, got {}",
                    mode.n
                )));
            }
            let re = read_rows(&mode.re, m, mode.n, "re")?;
            let im = read_rows(&mode.im, m, mode.n, "im")?;
            if mode.n == 0 {
                for r in 0..m {
                    for c in 0..m {
                        if re[(r, c)] != re[(c, r)] || im[(r, c)] != -im[(c, r)] {
                            return Err(Error::InvalidPotential(
                                "zero mode must have `re` symmetric and `im` antisymmetric"
                                    .into(),
                            ));
                        }
                    }
                }
            }
            let coefficient =
                CMatrix::from_fn(m, m, |r, c| Complex64::new(re[(r, c)], im[(r, c)]));
            modes.push(FourierMode {
                index: mode.n as u32,
                coefficient,
            });
        }
        Self::new(m, modes)
    }

    /// Reads and parses a potential document from disk.
    pub fn from_document_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_document_str(&text)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Coefficient matrix `Q_hat_n` for `n >= 0`, zero if the mode is absent.
    pub fn mode(&self, n: u32) -> Option<&CMatrix> {
        self.modes.get(&n)
    }

    pub fn mode_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.modes.keys().copied()
    }

    /// Largest stored mode index (0 for a constant or empty potential).
    pub fn max_mode_index(&self) -> u32 {
        self.modes.keys().next_back().copied().unwrap_or(0)
    }

    /// Signed-mode lookup: `Q_hat_n` for any integer `n`, using
    /// `Q_hat_{-n} = Q_hat_n^H`.
    pub fn mode_signed(&self, n: i64) -> CMatrix {
        let zero = CMatrix::zeros(self.dimension, self.dimension);
        if n >= 0 {
            self.modes.get(&(n as u32)).cloned().unwrap_or(zero)
        } else {
            self.modes
                .get(&((-n) as u32))
                .map(|m| m.adjoint())
                .unwrap_or(zero)
        }
    }

    /// Evaluates `Q(x)`. The argument is reduced modulo the period first, so
    /// periodicity holds exactly whenever `x + 1` is exactly representable.
    /// Each mode contribution is symmetrized entrywise, which keeps the
    /// result Hermitian to the last bit.
    pub fn evaluate(&self, x: f64) -> CMatrix {
        let x = x - x.floor();
        let m = self.dimension;
        let mut q = CMatrix::zeros(m, m);
        for (&n, coeff) in &self.modes {
            if n == 0 {
                q += coeff;
                continue;
            }
            let phase = Complex64::from_polar(1.0, TAU * n as f64 * x);
            let term = coeff * phase;
            for r in 0..m {
                for c in r..m {
                    let v = term[(r, c)] + term[(c, r)].conj();
                    q[(r, c)] += v;
                    if c != r {
                        q[(c, r)] += v.conj();
                    }
                }
            }
        }
        q
    }

    /// Mean matrix `C`: the average of `Q` over one period, which for a
    /// Fourier-specified potential is exactly the zero mode.
    pub fn mean_matrix(&self) -> CMatrix {
        self.modes
            .get(&0)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(self.dimension, self.dimension))
    }

    /// Reinterprets the potential as a scalar one when every mode is a
    /// scalar multiple of the identity, returning the scalar modes.
    pub fn scalar_modes(&self) -> Option<Vec<(u32, Complex64)>> {
        let mut out = Vec::with_capacity(self.modes.len());
        for (&n, coeff) in &self.modes {
            let d = coeff[(0, 0)];
            for r in 0..self.dimension {
                for c in 0..self.dimension {
                    let expected = if r == c { d } else { Complex64::new(0.0, 0.0) };
                    if coeff[(r, c)] != expected {
                        return None;
                    }
                }
            }
            out.push((n, d));
        }
        Some(out)
    }
}

/// Source of the Fourier-tail quantity `q_k`.
pub trait FourierTail {
    /// `q_k`: the maximal entrywise modulus of the modes with index
    /// `2k` and `2k + 1` (their negatives give identical moduli).
    fn q_tail(&self, k: u32) -> f64;
}

impl FourierTail for MatrixPotential {
    fn q_tail(&self, k: u32) -> f64 {
        assert!(k >= 1, "q_k requires k >= 1");
        [2 * k, 2 * k + 1]
            .iter()
            .filter_map(|n| self.modes.get(n))
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Identically vanishing Fourier tail, for closed-form experiments.
pub struct ZeroTail;

impl FourierTail for ZeroTail {
    fn q_tail(&self, _k: u32) -> f64 {
        0.0
    }
}

fn read_rows(rows: &[Vec<f64>], m: usize, n: i64, key: &str) -> Result<DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidPotential(format!(
            "mode n={n}: key `{key}` must be an {m}x{m} row-major matrix"
        )));
    }
    Ok(DMatrix::from_fn(m, m, |r, c| rows[r][c]))
}

/// Distinct eigenvalues `mu_1 < ... < mu_p` of the mean matrix together with
/// multiplicities and per-cluster orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct MeanSpectrum {
    values: Vec<f64>,
    multiplicities: Vec<usize>,
    /// `eigenvectors[j]` is `m x m_j`, columns orthonormal.
    eigenvectors: Vec<CMatrix>,
}

impl MeanSpectrum {
    /// Builds a spectrum directly from distinct values and multiplicities,
    /// without eigenvector data (columns of the identity are substituted).
    /// Intended for closed-form experiments on diagonal mean matrices.
    pub fn from_values(values: &[f64], multiplicities: &[usize]) -> Result<Self> {
        if values.len() != multiplicities.len() || values.is_empty() {
            return Err(Error::InvalidParameter(
                "values and multiplicities must be non-empty and of equal length".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "distinct eigenvalues must be strictly increasing".into(),
            ));
        }
        let m: usize = multiplicities.iter().sum();
        let mut eigenvectors = Vec::new();
        let mut offset = 0;
        for &mj in multiplicities {
            let mut basis = CMatrix::zeros(m, mj);
            for s in 0..mj {
                basis[(offset + s, s)] = Complex64::new(1.0, 0.0);
            }
            eigenvectors.push(basis);
            offset += mj;
        }
        Ok(Self {
            values: values.to_vec(),
            multiplicities: multiplicities.to_vec(),
            eigenvectors,
        })
    }

    /// Number of distinct eigenvalues `p`.
    pub fn p(&self) -> usize {
        self.values.len()
    }

    /// Total dimension `m = sum_j m_j`.
    pub fn total_dimension(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Distinct eigenvalue `mu_j` (0-based `j`).
    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn multiplicity(&self, j: usize) -> usize {
        self.multiplicities[j]
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn eigenvectors(&self, j: usize) -> &CMatrix {
        &self.eigenvectors[j]
    }

    /// `(mu_1, mu_p)`.
    pub fn value_range(&self) -> (f64, f64) {
        (self.values[0], *self.values.last().unwrap())
    }
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted
/// ascending and eigenvectors permuted accordingly.
pub(crate) fn hermitian_eigen_sorted(mat: &CMatrix) -> (Vec<f64>, CMatrix) {
    let se = mat.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(mat.nrows(), mat.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Sorted eigenvalues of a Hermitian matrix, without eigenvectors.
pub(crate) fn hermitian_eigenvalues_sorted(mat: &CMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = mat.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Default clustering tolerance for distinct-eigenvalue detection,
/// `1e-9 * max(1, ||C||)`, robust to eigensolver noise.
pub fn default_cluster_tol(c: &CMatrix) -> f64 {
    1e-9 * c.norm().max(1.0)
}

/// Groups the raw eigenvalues of the Hermitian matrix `c` into distinct
/// values: two raw eigenvalues share one `mu_j` iff their distance is at
/// most `cluster_tol`. Each cluster value is the mean of its members and
/// its eigenvector family is re-orthonormalized.
pub fn mean_spectrum(c: &CMatrix, cluster_tol: f64) -> Result<MeanSpectrum> {
    if cluster_tol < 0.0 {
        return Err(Error::InvalidParameter("cluster_tol must be >= 0".into()));
    }
    if *c != c.adjoint() {
        return Err(Error::InvalidParameter(
            "mean_spectrum requires a Hermitian matrix".into(),
        ));
    }
    let m = c.nrows();
    let (raw, vectors) = hermitian_eigen_sorted(c);

    let mut values = Vec::new();
    let mut multiplicities = Vec::new();
    let mut eigenvectors = Vec::new();
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && raw[end] - raw[end - 1] <= cluster_tol {
            end += 1;
        }
        let cluster = &raw[start..end];
        values.push(cluster.iter().sum::<f64>() / cluster.len() as f64);
        multiplicities.push(end - start);
        let block = vectors.columns(start, end - start).into_owned();
        eigenvectors.push(orthonormalize(block));
        start = end;
    }
    Ok(MeanSpectrum {
        values,
        multiplicities,
        eigenvectors,
    })
}

/// Modified Gram-Schmidt on the columns.
fn orthonormalize(mut block: CMatrix) -> CMatrix {
    let cols = block.ncols();
    for i in 0..cols {
        for j in 0..i {
            let proj: Complex64 = block.column(j).dotc(&block.column(i));
            let correction: CVector = block.column(j).into_owned() * proj;
            let mut ci = block.column_mut(i);
            ci -= correction;
        }
        let norm = block.column(i).norm();
        if norm > 0.0 {
            block.column_mut(i).unscale_mut(norm);
        }
    }
    block
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_cos_potential() -> MatrixPotential {
        // q(x) = 2 cos 2 pi x
        MatrixPotential::from_document_str(
            r#"
            m = 1
            [[modes]]
            n = 1
            re = [[1.0]]
            im = [[0.0]]
            "#,
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

    #[test]
    fn load_scalar_cos() {
        let p = scalar_cos_potential();
        assert_eq!(p.dimension(), 1);
        assert_abs_diff_eq!(p.evaluate(0.0)[(0, 0)].re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.evaluate(0.25)[(0, 0)].re, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn load_constant_potential() {
        let p = constant_offdiag();
        let q = p.evaluate(0.371);
        assert_eq!(q[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(q[(1, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(q[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn reject_non_hermitian_zero_mode() {
        let err = MatrixPotential::from_document_str(
            r#"
            m = 2
            [[modes]]
            n = 0
            re = [[0.0, 0.0], [0.0, 0.0]]
            im = [[0.0, 1.0], [0.0, 0.0]]
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidPotential(_)));
    }

    #[test]
    fn reject_duplicate_mode_and_bad_m() {
        let err = MatrixPotential::from_document_str(
            r#"
            m = 1
            [[modes]]
            n = 1
            re = [[1.0]]
            im = [[0.0]]
            [[modes]]
            n = 1
            re = [[2.0]]
            im = [[0.0]]
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidPotential(_)));

        let err = MatrixPotential::from_document_str("m = 0\nmodes = []\n").unwrap_err();
        assert!(matches!(err, Error::InvalidPotential(_)));
    }

    #[test]
    fn evaluation_is_exactly_hermitian() {
        let p = MatrixPotential::from_document_str(
            r#"
            m = 2
            [[modes]]
            n = 0
            re = [[0.3, 0.1], [0.1, -0.7]]
            im = [[0.0, 0.4], [-0.4, 0.0]]
            [[modes]]
            n = 1
            re = [[0.2, -0.5], [0.9, 0.1]]
            im = [[0.6, 0.3], [-0.2, 0.8]]
            [[modes]]
            n = 3
            re = [[0.05, 0.0], [0.11, -0.02]]
            im = [[0.01, 0.07], [0.0, 0.3]]
            "#,
        )
        .unwrap();
        for i in 0..100 {
            let x = i as f64 / 100.0 + 0.0037;
            let q = p.evaluate(x);
            let defect = (&q - q.adjoint()).map(|z| z.norm()).max();
            assert_eq!(defect, 0.0, "x = {x}");
        }
    }

    #[test]
    fn periodicity_exact_on_dyadic_points() {
        let p = scalar_cos_potential();
        for i in 0..64 {
            let x = i as f64 / 64.0;
            assert_eq!(p.evaluate(x), p.evaluate(x + 1.0));
        }
    }

    #[test]
    fn mean_matrix_examples() {
        // Q = [[2cos 2 pi x, 1], [1, 0]] -> mean [[0,1],[1,0]]
        let p = MatrixPotential::from_document_str(
            r#"
            m = 2
            [[modes]]
            n = 0
            re = [[0.0, 1.0], [1.0, 0.0]]
            im = [[0.0, 0.0], [0.0, 0.0]]
            [[modes]]
            n = 1
            re = [[1.0, 0.0], [0.0, 0.0]]
            im = [[0.0, 0.0], [0.0, 0.0]]
            "#,
        )
        .unwrap();
        let c = p.mean_matrix();
        assert_eq!(c[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(c[(0, 0)], Complex64::new(0.0, 0.0));

        // constant potential: mean is the constant
        let c0 = constant_offdiag().mean_matrix();
        assert_eq!(c0[(1, 0)], Complex64::new(1.0, 0.0));

        // zero-mean scalar potential
        let z = scalar_cos_potential().mean_matrix();
        assert_eq!(z[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn mean_matrix_matches_midpoint_quadrature() {
        let p = MatrixPotential::from_document_str(
            r#"
            m = 2
            [[modes]]
            n = 0
            re = [[0.3, 0.1], [0.1, -0.7]]
            im = [[0.0, 0.4], [-0.4, 0.0]]
            [[modes]]
            n = 2
            re = [[0.2, -0.5], [0.9, 0.1]]
            im = [[0.6, 0.3], [-0.2, 0.8]]
            "#,
        )
        .unwrap();
        let nodes = 2048;
        let mut acc = CMatrix::zeros(2, 2);
        for i in 0..nodes {
            let x = (i as f64 + 0.5) / nodes as f64;
            acc += p.evaluate(x);
        }
        acc.unscale_mut(nodes as f64);
        let defect = (&acc - p.mean_matrix()).map(|z| z.norm()).max();
        assert!(defect < 1e-10, "quadrature defect {defect}");
    }

    #[test]
    fn mean_spectrum_examples() {
        let tol = 1e-10;

        let s = mean_spectrum(&constant_offdiag().mean_matrix(), tol).unwrap();
        assert_eq!(s.p(), 2);
        assert_abs_diff_eq!(s.value(0), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.value(1), 1.0, epsilon = 1e-12);
        assert_eq!(s.multiplicities(), &[1, 1]);

        let identity = CMatrix::identity(2, 2);
        let s = mean_spectrum(&identity, tol).unwrap();
        assert_eq!(s.p(), 1);
        assert_eq!(s.multiplicity(0), 2);
        assert_abs_diff_eq!(s.value(0), 1.0, epsilon = 1e-14);

        let diag = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
        ]));
        let s = mean_spectrum(&diag, tol).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0, 3.0]);
        assert_eq!(s.multiplicities(), &[1, 1, 1]);
    }

    #[test]
    fn mean_spectrum_residual_and_orthonormality() {
        let p = MatrixPotential::from_document_str(
            r#"
            m = 3
            [[modes]]
            n = 0
            re = [[1.0, 0.2, 0.0], [0.2, 1.0, -0.1], [0.0, -0.1, 4.0]]
            im = [[0.0, 0.5, 0.0], [-0.5, 0.0, 0.0], [0.0, 0.0, 0.0]]
            "#,
        )
        .unwrap();
        let c = p.mean_matrix();
        let s = mean_spectrum(&c, default_cluster_tol(&c)).unwrap();
        assert_eq!(s.total_dimension(), 3);
        let scale = c.norm();
        let mut all: Vec<CVector> = Vec::new();
        for j in 0..s.p() {
            let basis = s.eigenvectors(j);
            for col in 0..basis.ncols() {
                let u = basis.column(col).into_owned();
                let residual = (&c * &u - &u * Complex64::new(s.value(j), 0.0)).norm();
                assert!(residual <= 1e-9 * scale, "residual {residual}");
                all.push(u);
            }
        }
        for a in 0..all.len() {
            for b in 0..all.len() {
                let dot = all[a].dotc(&all[b]).norm();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn fourier_tail_examples() {
        let p = scalar_cos_potential();
        assert_eq!(p.q_tail(1), 0.0);

        let p2 = MatrixPotential::from_document_str(
            r#"
            m = 1
            [[modes]]
            n = 2
            re = [[0.3]]
            im = [[0.0]]
            "#,
        )
        .unwrap();
        assert_eq!(p2.q_tail(1), 0.3);
        assert_eq!(p2.q_tail(2), 0.0);

        // zero beyond half the top mode index
        let top = p2.max_mode_index();
        for k in (top / 2 + 1)..(top / 2 + 5) {
            assert_eq!(p2.q_tail(k), 0.0);
        }
    }

    #[test]
    fn scalar_modes_detection() {
        let p = scalar_cos_potential();
        let modes = p.scalar_modes().unwrap();
        assert_eq!(modes, vec![(1, Complex64::new(1.0, 0.0))]);
        assert!(constant_offdiag().scalar_modes().is_none());
    }
}
