//! Serializable run artifacts: the band-sample table, the gap report,
//! the verification report, and the reproducibility manifest. Identical
//! inputs produce byte-identical files.

use std::io::Write;

use serde::Serialize;

use crate::analysis::{
    Corollary2Verdict, Gap, GapDetection, GapWindowVerdict, Theorem1Verdict, Theorem3Verdict,
    Theorem4Verdict, VerdictStatus,
};
use crate::bloch::{BandGrid, SolverConfig};
use crate::calibrate::CalibrationReport;
use crate::error::Result;

/// Band table rows `t,n,lambda` with one row per grid point and band,
/// full floating precision (17 significant digits).
pub fn write_band_csv<W: Write>(grid: &BandGrid, mut w: W) -> Result<()> {
    writeln!(w, "t,n,lambda")?;
    for (i, t) in grid.t_values().iter().enumerate() {
        for n in 0..grid.n_bands() {
            writeln!(w, "{t:.16e},{},{:.16e}", n + 1, grid.value(i, n))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct BandsJson<'a> {
    t: &'a [f64],
    /// `lambda[i][n]` for grid point `i` and band `n + 1`.
    lambda: Vec<Vec<f64>>,
}

/// Structured alternative to the CSV band table.
pub fn write_band_json<W: Write>(grid: &BandGrid, w: W) -> Result<()> {
    let doc = BandsJson {
        t: grid.t_values(),
        lambda: (0..grid.t_count())
            .map(|i| (0..grid.n_bands()).map(|n| grid.value(i, n)).collect())
            .collect(),
    };
    serde_json::to_writer_pretty(w, &doc).map_err(std::io::Error::other)?;
    Ok(())
}

#[derive(Serialize)]
struct GapsJson<'a> {
    gaps: &'a [Gap],
}

pub fn write_gap_json<W: Write>(gaps: &[Gap], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, &GapsJson { gaps }).map_err(std::io::Error::other)?;
    Ok(())
}

/// Machine-readable pass/fail summary per statement.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem1: Option<VerdictStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary1: Option<VerdictStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<VerdictStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem3: Option<VerdictStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary2: Option<VerdictStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem4: Option<Theorem4Summary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem4Summary {
    pub status: VerdictStatus,
    pub applicable: bool,
    pub d: f64,
    /// 1-based triple of distinct-eigenvalue indices.
    pub triple: Option<[usize; 3]>,
    #[serde(rename = "H")]
    pub h: Option<f64>,
}

impl Theorem4Summary {
    pub fn from_verdict(v: &Theorem4Verdict) -> Self {
        Self {
            status: v.status,
            applicable: v.condition.applicable && v.condition.satisfied,
            d: v.condition.d,
            triple: v.condition.best_triple.map(|t| t.map(|j| j + 1)),
            h: v.h,
        }
    }
}

/// Full verification report: the shared prefactor, the effective
/// thresholds, the summary, and the per-statement witness details.
#[derive(Serialize)]
pub struct VerificationReport {
    pub c1: f64,
    pub fitted_c1: Option<f64>,
    pub thresholds: Thresholds,
    pub verdicts: VerdictSummary,
    pub details: VerdictDetails,
}

#[derive(Serialize)]
pub struct Thresholds {
    pub n: u32,
    pub n1: u32,
    pub n2: u32,
    pub n3: u32,
}

#[derive(Default, Serialize)]
pub struct VerdictDetails {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem1: Option<Theorem1Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_windows: Option<GapWindowVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem3: Option<Theorem3Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary2: Option<Corollary2Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem4: Option<Theorem4Verdict>,
}

impl VerificationReport {
    pub fn any_failure(&self) -> bool {
        let v = &self.verdicts;
        [v.theorem1, v.corollary1, v.theorem2, v.theorem3, v.corollary2]
            .iter()
            .flatten()
            .any(|s| s.is_fail())
            || v.theorem4.as_ref().is_some_and(|t| t.status.is_fail())
    }
}

pub fn write_verification_json<W: Write>(report: &VerificationReport, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, report).map_err(std::io::Error::other)?;
    Ok(())
}

/// Everything that affects any number in the outputs.
#[derive(Serialize)]
pub struct Manifest {
    pub tool: ToolInfo,
    pub potential: PotentialInfo,
    pub solver: SolverInfo,
    pub cluster_tol: f64,
    pub calibration: CalibrationReport,
    pub gap_detection: GapDetection,
    pub theorem3_k_values: Vec<i64>,
    pub theorem4_span: f64,
    pub verify: Vec<String>,
    pub format: String,
}

#[derive(Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Serialize)]
pub struct PotentialInfo {
    pub path: String,
    pub sha256: String,
    pub m: usize,
    pub mode_indices: Vec<u32>,
}

#[derive(Serialize)]
pub struct SolverInfo {
    pub truncation: usize,
    pub t_samples: usize,
    pub n_bands: usize,
    pub convergence_tol: f64,
    pub max_truncation: usize,
}

impl From<&SolverConfig> for SolverInfo {
    fn from(c: &SolverConfig) -> Self {
        Self {
            truncation: c.truncation,
            t_samples: c.t_samples,
            n_bands: c.n_bands,
            convergence_tol: c.convergence_tol,
            max_truncation: c.max_truncation,
        }
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(data);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_manifest_json<W: Write>(manifest: &Manifest, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, manifest).map_err(std::io::Error::other)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::BandGrid;

    #[test]
    fn band_csv_layout() {
        let grid = BandGrid::new(
            vec![0.0, 1.0],
            vec![vec![1.0, 2.0], vec![1.5, 2.5]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_band_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,n,lambda");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0.0000000000000000e0,1,"));
        assert!(lines[2].contains(",2,"));
    }

    #[test]
    fn sha256_of_empty() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
