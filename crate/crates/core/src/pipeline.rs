//! End-to-end run: load and validate the potential, resolve the
//! asymptotic parameters, sample the bands, detect gaps, run the selected
//! verifications, and write the artifacts. Per-quasimomentum solves run
//! in parallel; all file writes happen at the end from a single writer,
//! and identical configurations produce byte-identical outputs.

use std::fs;
use std::path::PathBuf;

use crate::analysis::{self, GapDetection};
use crate::bloch::{self, SolverConfig};
use crate::calibrate::{self, C1Mode};
use crate::error::{Error, Result};
use crate::potential::{mean_spectrum, default_cluster_tol, MatrixPotential};
use crate::report::{
    self, Manifest, PotentialInfo, Theorem4Summary, Thresholds, ToolInfo, VerdictDetails,
    VerdictSummary, VerificationReport,
};

/// Which statements to verify.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifySelection {
    All,
    None,
    List(Vec<TheoremId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremId {
    Theorem1,
    Corollary1,
    Theorem2,
    Theorem3,
    Corollary2,
    Theorem4,
}

impl TheoremId {
    pub fn parse(name: &str) -> Option<Self> {
        match name.trim() {
            "theorem1" => Some(Self::Theorem1),
            "corollary1" => Some(Self::Corollary1),
            "theorem2" => Some(Self::Theorem2),
            "theorem3" => Some(Self::Theorem3),
            "corollary2" => Some(Self::Corollary2),
            "theorem4" => Some(Self::Theorem4),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Theorem1 => "theorem1",
            Self::Corollary1 => "corollary1",
            Self::Theorem2 => "theorem2",
            Self::Theorem3 => "theorem3",
            Self::Corollary2 => "corollary2",
            Self::Theorem4 => "theorem4",
        }
    }
}

impl VerifySelection {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "all" => Ok(Self::All),
            "none" => Ok(Self::None),
            list => {
                let ids: Option<Vec<TheoremId>> =
                    list.split(',').map(TheoremId::parse).collect();
                match ids {
                    Some(ids) if !ids.is_empty() => Ok(Self::List(ids)),
                    _ => Err(Error::InvalidParameter(format!(
                        "unknown verification selection `{text}`"
                    ))),
                }
            }
        }
    }

    pub fn requested(&self, id: TheoremId) -> bool {
        match self {
            Self::All => true,
            Self::None => false,
            Self::List(ids) => ids.contains(&id),
        }
    }

    pub fn any(&self) -> bool {
        !matches!(self, Self::None)
    }

    fn names(&self) -> Vec<String> {
        use TheoremId::*;
        [Theorem1, Corollary1, Theorem2, Theorem3, Corollary2, Theorem4]
            .iter()
            .filter(|id| self.requested(**id))
            .map(|id| id.name().to_string())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Structured,
}

impl OutputFormat {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "csv" => Ok(Self::Csv),
            "structured" => Ok(Self::Structured),
            other => Err(Error::InvalidParameter(format!(
                "unknown output format `{other}`"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Structured => "structured",
        }
    }
}

/// Complete run configuration. Unset options fall back to defaults
/// derived from the potential and the verification selection.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub potential_path: PathBuf,
    pub truncation: Option<usize>,
    pub t_samples: usize,
    pub n_bands: Option<usize>,
    pub c1: C1Mode,
    pub verify: VerifySelection,
    pub oracle: bool,
    pub convergence_tol: f64,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    /// Branch indices for the counting verification; both signs of the
    /// first window above the separation threshold when unset.
    pub theorem3_k_values: Option<Vec<i64>>,
    /// Energy span scanned above the finite-gap threshold.
    pub theorem4_span: f64,
}

impl RunConfig {
    pub fn new(potential_path: impl Into<PathBuf>) -> Self {
        Self {
            potential_path: potential_path.into(),
            truncation: None,
            t_samples: 101,
            n_bands: None,
            c1: C1Mode::Fit,
            verify: VerifySelection::All,
            oracle: false,
            convergence_tol: 1e-10,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            theorem3_k_values: None,
            theorem4_span: 200.0,
        }
    }
}

/// Paths written by a run plus the verification outcome.
#[derive(Debug)]
pub struct RunOutcome {
    pub band_table: PathBuf,
    pub gap_report: PathBuf,
    pub verification_report: Option<PathBuf>,
    pub manifest: PathBuf,
    pub verification_failed: bool,
}

pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let document = fs::read(&config.potential_path)?;
    let potential = MatrixPotential::from_document_str(std::str::from_utf8(&document)
        .map_err(|e| Error::InvalidPotential(format!("document is not utf-8: {e}")))?)?;
    let m = potential.dimension();
    let mean = potential.mean_matrix();
    let cluster_tol = default_cluster_tol(&mean);
    let spectrum = mean_spectrum(&mean, cluster_tol)?;

    let (params, calibration) =
        calibrate::resolve_params(&potential, &spectrum, config.c1, (3, 12), 1e-9)?;

    let n_bands = config.n_bands.unwrap_or(if config.verify.any() {
        24 * m
    } else {
        16 * m
    });
    let mut solver = SolverConfig::for_bands(&potential, n_bands, config.t_samples);
    solver.convergence_tol = config.convergence_tol;
    if let Some(k) = config.truncation {
        solver.truncation = k;
        solver.max_truncation = solver.max_truncation.max(4 * k);
    }
    solver.validate(m)?;

    let grid = bloch::sample_bands(&potential, &solver)?;
    let detection = GapDetection {
        oracle: config.oracle,
        ..GapDetection::default()
    };
    let mut gaps = analysis::detect_gaps(&potential, &grid, &solver, &detection)?;
    analysis::assign_windows(&mut gaps, &spectrum, &potential, &params);

    // verifications
    let mut summary = VerdictSummary {
        theorem1: None,
        corollary1: None,
        theorem2: None,
        theorem3: None,
        corollary2: None,
        theorem4: None,
    };
    let mut details = VerdictDetails::default();
    use TheoremId::*;
    if config.verify.requested(Theorem1) {
        let v = analysis::verify_theorem1(&grid, &spectrum, &potential, &params)?;
        summary.theorem1 = Some(v.status);
        details.theorem1 = Some(v);
    }
    if config.verify.requested(Corollary1) || config.verify.requested(Theorem2) {
        let v = analysis::verify_corollary1_theorem2(&gaps, &spectrum, &potential, &params)?;
        if config.verify.requested(Corollary1) {
            summary.corollary1 = Some(v.corollary1);
        }
        if config.verify.requested(Theorem2) {
            summary.theorem2 = Some(v.theorem2);
        }
        details.gap_windows = Some(v);
    }
    let theorem3_k_values: Vec<i64> = config.theorem3_k_values.clone().unwrap_or_else(|| {
        let base = params.n2.max(6) as i64;
        vec![base, base + 1, -base, -(base + 1)]
    });
    if config.verify.requested(Theorem3) {
        let bands = analysis::extract_bands(&grid);
        let v = analysis::verify_theorem3(
            &potential,
            &spectrum,
            &params,
            &theorem3_k_values,
            Some(&bands),
            9,
        )?;
        summary.theorem3 = Some(v.status);
        details.theorem3 = Some(v);
    }
    if config.verify.requested(Corollary2) {
        let v = analysis::verify_corollary2(&gaps, &spectrum, &potential, &params)?;
        summary.corollary2 = Some(v.status);
        details.corollary2 = Some(v);
    }
    if config.verify.requested(Theorem4) {
        let v = analysis::verify_theorem4(
            &potential,
            &spectrum,
            &params,
            config.theorem4_span,
            51,
        )?;
        summary.theorem4 = Some(Theorem4Summary::from_verdict(&v));
        details.theorem4 = Some(v);
    }

    let verification = config.verify.any().then(|| VerificationReport {
        c1: params.c1,
        fitted_c1: calibration.fitted_c1,
        thresholds: Thresholds {
            n: params.n,
            n1: params.n1,
            n2: params.n2,
            n3: params.n3,
        },
        verdicts: summary,
        details,
    });
    let verification_failed = verification.as_ref().is_some_and(|v| v.any_failure());

    // single-writer artifact phase
    fs::create_dir_all(&config.out_dir)?;
    let band_table = match config.format {
        OutputFormat::Csv => {
            let path = config.out_dir.join("bands.csv");
            report::write_band_csv(&grid, fs::File::create(&path)?)?;
            path
        }
        OutputFormat::Structured => {
            let path = config.out_dir.join("bands.json");
            report::write_band_json(&grid, fs::File::create(&path)?)?;
            path
        }
    };
    let gap_report = config.out_dir.join("gaps.json");
    report::write_gap_json(&gaps, fs::File::create(&gap_report)?)?;

    let verification_report = match &verification {
        Some(v) => {
            let path = config.out_dir.join("verification.json");
            report::write_verification_json(v, fs::File::create(&path)?)?;
            Some(path)
        }
        None => None,
    };

    let manifest = Manifest {
        tool: ToolInfo::default(),
        potential: PotentialInfo {
            path: config.potential_path.display().to_string(),
            sha256: report::sha256_hex(&document),
            m,
            mode_indices: potential.mode_indices().collect(),
        },
        solver: (&solver).into(),
        cluster_tol,
        calibration,
        gap_detection: detection,
        theorem3_k_values,
        theorem4_span: config.theorem4_span,
        verify: config.verify.names(),
        format: config.format.name().to_string(),
    };
    let manifest_path = config.out_dir.join("manifest.json");
    report::write_manifest_json(&manifest, fs::File::create(&manifest_path)?)?;

    Ok(RunOutcome {
        band_table,
        gap_report,
        verification_report,
        manifest: manifest_path,
        verification_failed,
    })
}

/// Exit status mapping: invalid input 1, non-convergence 2,
/// verification failure 3.
pub fn exit_code(outcome: &Result<RunOutcome>) -> i32 {
    match outcome {
        Ok(o) if o.verification_failed => 3,
        Ok(_) => 0,
        Err(Error::Unconverged { .. }) | Err(Error::IntegrationTolerance { .. }) => 2,
        Err(_) => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_parsing() {
        assert_eq!(VerifySelection::parse("all").unwrap(), VerifySelection::All);
        assert_eq!(
            VerifySelection::parse("none").unwrap(),
            VerifySelection::None
        );
        let list = VerifySelection::parse("theorem1,corollary2").unwrap();
        assert!(list.requested(TheoremId::Theorem1));
        assert!(list.requested(TheoremId::Corollary2));
        assert!(!list.requested(TheoremId::Theorem3));
        assert!(VerifySelection::parse("theorem9").is_err());
        assert!(VerifySelection::parse("").is_err());
    }

    #[test]
    fn format_parsing() {
        assert_eq!(OutputFormat::parse("csv").unwrap(), OutputFormat::Csv);
        assert_eq!(
            OutputFormat::parse("structured").unwrap(),
            OutputFormat::Structured
        );
        assert!(OutputFormat::parse("yaml").is_err());
    }
}
