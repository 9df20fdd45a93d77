//! The five pipeline stages behind the subcommands: theory curves, click
//! simulation, POVM reconstruction, evaluation, and the repetition sweep.
//!
//! Every artifact embeds the effective configuration (TOML echo in JSON
//! documents, `#`-commented lines in CSVs), so any output can be traced
//! to, and regenerated from, the exact run that produced it.

use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use dpc_core::detector::{
    default_probe_ensemble, read_frequency_csv, simulate_frequency_table, write_frequency_csv,
    DetectorModel, FrequencyTable, ProbeEnsemble,
};
use dpc_core::metrics::{
    discrimination_error, povm_fidelity, theory_curves, write_curve_csv, DiscriminationReport,
    FidelityReport, PovmSource,
};
use dpc_core::receivers::{kennedy_povm, KennedyParams};
use dpc_core::tomography::{
    ml_reconstruct, truncate_povm, MlConfig, MlReport, PovmDocument, PovmSet,
};

use crate::config::EffectiveConfig;

/// A POVM on disk: the matrix document plus the configuration and
/// provenance of the run that produced it. `config` and `source` are
/// optional on input so externally produced documents (for example an
/// analytic reference) stay readable.
#[derive(Debug, Serialize, Deserialize)]
pub struct PovmArtifact {
    #[serde(default)]
    pub config: Option<EffectiveConfig>,
    #[serde(default = "analytic_source")]
    pub source: PovmSource,
    pub document: PovmDocument,
}

fn analytic_source() -> PovmSource {
    PovmSource::Analytic
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MlReportArtifact {
    pub config: EffectiveConfig,
    pub input: PathBuf,
    pub report: MlReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub config: EffectiveConfig,
    /// Displacement of the analytic reference the fidelities compare to.
    pub reference_beta: f64,
    pub discrimination: DiscriminationReport,
    pub fidelity: FidelityReport,
}

pub struct ReconstructArtifacts {
    pub povm: PathBuf,
    pub povm_qubit: PathBuf,
    pub report: PathBuf,
    pub converged: bool,
}

pub struct SweepOutcome {
    pub csv: PathBuf,
    /// One line per failed (beta, repetition) cell; empty on full success.
    pub failures: Vec<String>,
}

/// One aggregated sweep row. Mean fields are empty when every repetition
/// failed; the standard deviation needs at least two.
#[derive(Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub reps_ok: u32,
    pub reps_converged: u32,
    pub pe_mean: Option<f64>,
    pub pe_std: Option<f64>,
    pub f_plus_mean: Option<f64>,
    pub f_minus_mean: Option<f64>,
    pub pe_ideal: f64,
    pub pe_imperfect: f64,
    pub pe_homodyne: f64,
}

fn model_for(cfg: &EffectiveConfig, beta: f64) -> Result<DetectorModel> {
    Ok(DetectorModel::new(C64::new(beta, 0.0), cfg.visibility, cfg.dark_prob, 1.0)?)
}

fn ensemble_for(cfg: &EffectiveConfig, seed: u64) -> Result<ProbeEnsemble> {
    Ok(default_probe_ensemble(cfg.dim)?.with_shots(cfg.shots)?.with_seed(seed))
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Closed-form error-rate curves on a uniform displacement grid.
pub fn run_theory(cfg: &EffectiveConfig) -> Result<PathBuf> {
    ensure_out_dir(&cfg.out)?;
    let n = cfg.grid_points;
    let step = (cfg.grid_max - cfg.grid_min) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| cfg.grid_min + step * i as f64).collect();
    let model = model_for(cfg, cfg.beta)?;
    let points = theory_curves(&grid, &model)?;

    let path = cfg.out.join("theory.csv");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_curve_csv(file, &points, &cfg.comment_lines())?;
    Ok(path)
}

/// Monte Carlo click counts for the probe ensemble, plus a config sidecar.
pub fn run_simulate(cfg: &EffectiveConfig) -> Result<PathBuf> {
    ensure_out_dir(&cfg.out)?;
    let path = cfg.out.join("frequencies.csv");
    simulate_to(cfg, cfg.beta, cfg.seed, &path)?;
    let sidecar = cfg.out.join("frequencies.config.toml");
    fs::write(&sidecar, cfg.to_toml())
        .with_context(|| format!("writing {}", sidecar.display()))?;
    Ok(path)
}

fn simulate_to(cfg: &EffectiveConfig, beta: f64, seed: u64, path: &Path) -> Result<FrequencyTable> {
    let model = model_for(cfg, beta)?;
    let ensemble = ensemble_for(cfg, seed)?;
    let table = simulate_frequency_table(&model, &ensemble)?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut comments = cfg.comment_lines();
    comments.push(format!("cell: beta = {beta}, seed = {seed}"));
    write_frequency_csv(file, &ensemble, &table, &comments)?;
    Ok(table)
}

/// Maximum-likelihood reconstruction from a frequency CSV. Writes the
/// full-dimension POVM, its qubit-block truncation, and the run report;
/// all three are written even when the iteration hits the cap without
/// converging, so the caller can inspect the partial result.
pub fn run_reconstruct(cfg: &EffectiveConfig, input: &Path) -> Result<ReconstructArtifacts> {
    ensure_out_dir(&cfg.out)?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let (probes, table) = read_frequency_csv(file)
        .with_context(|| format!("parsing frequency CSV {}", input.display()))?;
    let (povm, report) = reconstruct_table(cfg, probes, &table)?;

    let artifacts = ReconstructArtifacts {
        povm: cfg.out.join("povm.json"),
        povm_qubit: cfg.out.join("povm_qubit.json"),
        report: cfg.out.join("ml_report.json"),
        converged: report.converged,
    };
    let wrap = |set: &PovmSet| PovmArtifact {
        config: Some(cfg.clone()),
        source: PovmSource::Reconstructed,
        document: set.to_document(),
    };
    write_json(&artifacts.povm, &wrap(&povm))?;
    write_json(&artifacts.povm_qubit, &wrap(&truncate_povm(&povm, 2)?))?;
    write_json(
        &artifacts.report,
        &MlReportArtifact { config: cfg.clone(), input: input.to_path_buf(), report },
    )?;
    Ok(artifacts)
}

fn reconstruct_table(
    cfg: &EffectiveConfig,
    probes: Vec<C64>,
    table: &FrequencyTable,
) -> Result<(PovmSet, MlReport)> {
    let shots = table.shots(0);
    let ensemble = ProbeEnsemble::new(probes, shots, cfg.dim, cfg.seed)?;
    Ok(ml_reconstruct(&ensemble, table, &MlConfig::default())?)
}

/// Discrimination error of a stored POVM and its fidelity against the
/// analytic receiver at the reference displacement.
///
/// The reference displacement is `--beta` when given, otherwise the beta
/// recorded in the artifact, otherwise the default.
pub fn run_evaluate(cfg: &EffectiveConfig, input: &Path) -> Result<PathBuf> {
    ensure_out_dir(&cfg.out)?;
    let artifact: PovmArtifact = read_json(input)?;
    let set = PovmSet::from_document(&artifact.document)
        .with_context(|| format!("validating POVM from {}", input.display()))?;
    let qubit_block = if set.dim() > 2 { truncate_povm(&set, 2)? } else { set };

    let reference_beta = if cfg.beta_explicit {
        cfg.beta
    } else {
        artifact.config.as_ref().map_or(cfg.beta, |c| c.beta)
    };
    let reference = kennedy_povm(&KennedyParams::real(reference_beta)?, 2)?;

    let evaluation = EvaluationArtifact {
        config: cfg.clone(),
        reference_beta,
        discrimination: discrimination_error(
            &qubit_block,
            C64::new(reference_beta, 0.0),
            artifact.source,
        )?,
        fidelity: povm_fidelity(&qubit_block, &reference)?,
    };
    let path = cfg.out.join("evaluation.json");
    write_json(&path, &evaluation)?;
    Ok(path)
}

/// Simulate → reconstruct → evaluate for every (beta, repetition) cell,
/// then aggregate. Repetition `r` uses seed `master + r`. A cell that
/// errors is recorded and skipped; a cell whose reconstruction merely
/// fails to converge still contributes (its POVM is the iterate at the
/// cap) and is counted in `reps_converged`.
pub fn run_sweep(cfg: &EffectiveConfig) -> Result<SweepOutcome> {
    let cell_dir = cfg.out.join("sweep_cells");
    ensure_out_dir(&cell_dir)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    for (bi, &beta) in cfg.betas.iter().enumerate() {
        let mut pes = Vec::new();
        let mut f_plus = Vec::new();
        let mut f_minus = Vec::new();
        let mut reps_converged = 0u32;
        for rep in 0..cfg.reps {
            let seed = cfg.seed + rep as u64;
            match sweep_cell(cfg, beta, seed, &cell_dir.join(format!("b{bi}_r{rep}"))) {
                Ok(cell) => {
                    pes.push(cell.p_error);
                    f_plus.push(cell.f_plus);
                    f_minus.push(cell.f_minus);
                    reps_converged += u32::from(cell.converged);
                }
                Err(e) => {
                    let line = format!("beta {beta} rep {rep} (seed {seed}): {e:#}");
                    log::warn!("sweep cell failed: {line}");
                    failures.push(line);
                }
            }
        }

        let theory = theory_curves(&[beta], &model_for(cfg, beta)?)?;
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let pe_mean = mean(&pes);
        let pe_std = (pes.len() >= 2).then(|| {
            let m = pe_mean.expect("non-empty");
            (pes.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (pes.len() - 1) as f64).sqrt()
        });
        rows.push(SweepRow {
            beta,
            reps_ok: pes.len() as u32,
            reps_converged,
            pe_mean,
            pe_std,
            f_plus_mean: mean(&f_plus),
            f_minus_mean: mean(&f_minus),
            pe_ideal: theory[0].pe_ideal,
            pe_imperfect: theory[0].pe_imperfect,
            pe_homodyne: theory[0].pe_homodyne,
        });
    }

    let path = cfg.out.join("sweep.csv");
    let mut file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    for line in cfg.comment_lines() {
        writeln!(file, "# {line}")?;
    }
    let mut writer = csv::Writer::from_writer(file);
    for row in &rows {
        writer.serialize(row)?;
    }
    writer.flush()?;

    if !failures.is_empty() {
        let failure_path = cfg.out.join("sweep_failures.txt");
        fs::write(&failure_path, failures.join("\n") + "\n")
            .with_context(|| format!("writing {}", failure_path.display()))?;
    }
    Ok(SweepOutcome { csv: path, failures })
}

struct SweepCell {
    p_error: f64,
    f_plus: f64,
    f_minus: f64,
    converged: bool,
}

fn sweep_cell(cfg: &EffectiveConfig, beta: f64, seed: u64, stem: &Path) -> Result<SweepCell> {
    let freq_path = stem.with_extension("csv");
    let table = simulate_to(cfg, beta, seed, &freq_path)?;
    let ensemble = ensemble_for(cfg, seed)?;
    let (povm, report) = ml_reconstruct(&ensemble, &table, &MlConfig::default())?;

    let qubit_block = truncate_povm(&povm, 2)?;
    let povm_path = stem.with_extension("povm_qubit.json");
    write_json(
        &povm_path,
        &PovmArtifact {
            config: Some(EffectiveConfig { beta, seed, ..cfg.clone() }),
            source: PovmSource::Reconstructed,
            document: qubit_block.to_document(),
        },
    )?;

    let discrimination =
        discrimination_error(&qubit_block, C64::new(beta, 0.0), PovmSource::Reconstructed)?;
    let reference = kennedy_povm(&KennedyParams::real(beta)?, 2)?;
    let fidelity = povm_fidelity(&qubit_block, &reference)?;
    Ok(SweepCell {
        p_error: discrimination.p_error,
        f_plus: fidelity.f_plus,
        f_minus: fidelity.f_minus,
        converged: report.converged,
    })
}

/// Read back an aggregated sweep CSV, skipping `#` comment lines.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<SweepRow>().enumerate() {
        rows.push(record.with_context(|| format!("sweep row {i} in {}", path.display()))?);
    }
    if rows.is_empty() {
        bail!("{} holds no sweep rows", path.display());
    }
    Ok(rows)
}

/// Convenience used by tests: load a POVM artifact back as a validated set.
pub fn read_povm_artifact(path: &Path) -> Result<(PovmSet, PovmArtifact)> {
    let artifact: PovmArtifact = read_json(path)?;
    let set = PovmSet::from_document(&artifact.document)
        .map_err(|e| anyhow!("{} does not hold a valid POVM: {e}", path.display()))?;
    Ok((set, artifact))
}
