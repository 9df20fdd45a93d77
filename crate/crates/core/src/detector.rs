//! Click model of the displaced on/off photon detector and seeded Monte
//! Carlo generation of probe-state frequency tables.
//!
//! The detector displaces the input by `beta` and reports click / no
//! click. Imperfections are an interference mode-match (visibility)
//! factor on the displacement cross-term, an independent per-gate dark
//! count, and a linear efficiency that the amplitude-rescaling convention
//! compensates away.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coherent_vector, FockOperator};
use crate::receivers::displaced_vacuum_projector;
use crate::tomography::PovmSet;

/// Minimum captured probability every probe must retain at the working
/// truncation dimension.
pub const MIN_CAPTURED_PROBABILITY: f64 = 0.95;
/// Default number of shots recorded per probe state.
pub const DEFAULT_SHOTS: u64 = 50_000;
/// Default master seed.
pub const DEFAULT_SEED: u64 = 7;
/// Default probe mean photon numbers `|alpha|^2`. The largest value is
/// capped by the captured-probability requirement at the default
/// four-level truncation.
pub const DEFAULT_MEAN_PHOTON_NUMBERS: [f64; 4] = [0.25, 0.5, 1.0, 1.3];

/// The four probe phases `{pi/4, 3pi/4, 5pi/4, 7pi/4}`.
pub fn probe_phases() -> [f64; 4] {
    let q = std::f64::consts::FRAC_PI_4;
    [q, 3.0 * q, 5.0 * q, 7.0 * q]
}

/// Physical parameters of the displaced on/off detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    beta: C64,
    visibility: f64,
    dark_prob: f64,
    loss_eta: f64,
}

impl DetectorModel {
    /// `visibility` in `[0, 1]`, `dark_prob` in `[0, 1)`, `loss_eta` in
    /// `(0, 1]`.
    pub fn new(beta: C64, visibility: f64, dark_prob: f64, loss_eta: f64) -> Result<Self> {
        if !beta.re.is_finite() || !beta.im.is_finite() {
            return Err(Error::InvalidInput("displacement amplitude must be finite".into()));
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::InvalidInput(format!(
                "visibility must lie in [0, 1], got {visibility}"
            )));
        }
        if !(0.0..1.0).contains(&dark_prob) {
            return Err(Error::InvalidInput(format!(
                "dark-count probability must lie in [0, 1), got {dark_prob}"
            )));
        }
        if !(dark_prob.is_finite() && visibility.is_finite()) {
            return Err(Error::InvalidInput("model parameters must be finite".into()));
        }
        if !(loss_eta > 0.0 && loss_eta <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "efficiency must lie in (0, 1], got {loss_eta}"
            )));
        }
        Ok(Self { beta, visibility, dark_prob, loss_eta })
    }

    /// Unit visibility, no dark counts, unit efficiency.
    pub fn ideal(beta: C64) -> Self {
        Self::new(beta, 1.0, 0.0, 1.0).expect("ideal parameters are valid")
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn dark_prob(&self) -> f64 {
        self.dark_prob
    }

    pub fn loss_eta(&self) -> f64 {
        self.loss_eta
    }

    pub fn is_ideal(&self) -> bool {
        self.visibility == 1.0 && self.dark_prob == 0.0 && self.loss_eta == 1.0
    }

    /// Same imperfections, different displacement.
    pub fn with_beta(&self, beta: C64) -> Result<Self> {
        Self::new(beta, self.visibility, self.dark_prob, self.loss_eta)
    }

    /// Mean photon number after imperfect displacement of the coherent
    /// input `alpha`: `|alpha|^2 + |beta|^2 + 2 v Re[alpha beta*]`,
    /// clamped at zero against rounding.
    pub fn mean_photon_number(&self, alpha: C64) -> f64 {
        let cross = 2.0 * self.visibility * (alpha * self.beta.conj()).re;
        (alpha.norm_sqr() + self.beta.norm_sqr() + cross).max(0.0)
    }

    /// `(1 - dark_prob) exp(-n_mean)`; at unit visibility and zero dark
    /// probability this is the exact displaced-vacuum probability
    /// `exp(-|alpha + beta|^2)`.
    pub fn no_click_probability(&self, alpha: C64) -> f64 {
        (1.0 - self.dark_prob) * (-self.mean_photon_number(alpha)).exp()
    }

    pub fn click_probability(&self, alpha: C64) -> f64 {
        1.0 - self.no_click_probability(alpha)
    }

    /// Operator form of the imperfect detector on `dim` Fock levels:
    /// the no-click element is
    /// `(1 - dark_prob) e^{-(1 - v^2)|beta|^2} D(v beta)^dag |0><0| D(v beta)`,
    /// whose coherent-state expectations reproduce
    /// [`no_click_probability`](Self::no_click_probability) exactly.
    /// The efficiency does not appear: amplitudes are understood in the
    /// loss-compensated frame (see [`loss_rescale`]).
    pub fn imperfect_povm(&self, dim: usize) -> Result<PovmSet> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "detector POVM needs dimension >= 2, got {dim}"
            )));
        }
        let projector = displaced_vacuum_projector(self.beta * self.visibility, dim)?;
        let coeff = (1.0 - self.dark_prob)
            * (-(1.0 - self.visibility * self.visibility) * self.beta.norm_sqr()).exp();
        let plus = projector.scaled_re(coeff);
        let minus = FockOperator::identity(dim).sub(&plus);
        PovmSet::binary(plus, minus)
    }
}

/// Amplitude relabeling that absorbs linear loss: `alpha / sqrt(eta)`.
pub fn loss_rescale(alpha_physical: C64, eta: f64) -> Result<C64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    Ok(alpha_physical / eta.sqrt())
}

/// A fixed list of coherent probe amplitudes with shot budget, truncation
/// dimension, and master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeEnsemble {
    probes: Vec<C64>,
    shots_per_probe: u64,
    truncation_dim: usize,
    seed: u64,
}

impl ProbeEnsemble {
    /// Rejects probes whose captured probability at `truncation_dim`
    /// falls below [`MIN_CAPTURED_PROBABILITY`].
    pub fn new(
        probes: Vec<C64>,
        shots_per_probe: u64,
        truncation_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if probes.is_empty() {
            return Err(Error::InvalidInput("probe ensemble must be non-empty".into()));
        }
        if shots_per_probe == 0 {
            return Err(Error::InvalidInput("shots per probe must be at least 1".into()));
        }
        for (m, &alpha) in probes.iter().enumerate() {
            let (_, captured) = coherent_vector(alpha, truncation_dim, false)?;
            if captured < MIN_CAPTURED_PROBABILITY {
                return Err(Error::InvalidInput(format!(
                    "probe {m} (alpha = {alpha}) captures only {captured:.4} of its weight \
                     in {truncation_dim} levels; need >= {MIN_CAPTURED_PROBABILITY}"
                )));
            }
        }
        Ok(Self { probes, shots_per_probe, truncation_dim, seed })
    }

    pub fn probes(&self) -> &[C64] {
        &self.probes
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn shots_per_probe(&self) -> u64 {
        self.shots_per_probe
    }

    pub fn dim(&self) -> usize {
        self.truncation_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_shots(self, shots_per_probe: u64) -> Result<Self> {
        if shots_per_probe == 0 {
            return Err(Error::InvalidInput("shots per probe must be at least 1".into()));
        }
        Ok(Self { shots_per_probe, ..self })
    }

    /// Probes as renormalized truncated density matrices (`Tr = 1`
    /// exactly).
    pub fn density_matrices(&self) -> Result<Vec<FockOperator>> {
        self.probes
            .iter()
            .map(|&alpha| {
                let (v, _) = coherent_vector(alpha, self.truncation_dim, true)?;
                Ok(v.outer())
            })
            .collect()
    }
}

/// The 16-probe set: four mean photon numbers
/// [`DEFAULT_MEAN_PHOTON_NUMBERS`] crossed with the four phases
/// [`probe_phases`], at [`DEFAULT_SHOTS`] shots and [`DEFAULT_SEED`].
/// Needs `dim >= 4` to satisfy the captured-probability requirement.
pub fn default_probe_ensemble(dim: usize) -> Result<ProbeEnsemble> {
    let mut probes = Vec::with_capacity(16);
    for &mean_n in &DEFAULT_MEAN_PHOTON_NUMBERS {
        for &phase in &probe_phases() {
            probes.push(C64::from_polar(mean_n.sqrt(), phase));
        }
    }
    ProbeEnsemble::new(probes, DEFAULT_SHOTS, dim, DEFAULT_SEED)
}

/// Click (`f_{m,click}`) and no-click counts per probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<Vec<u64>>,
    shots: Vec<u64>,
}

impl FrequencyTable {
    /// `counts[m][l]` with row sums equal to `shots[m]`.
    pub fn new(counts: Vec<Vec<u64>>, shots: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidInput("frequency table must be non-empty".into()));
        }
        if counts.len() != shots.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} count rows vs {} shot totals",
                counts.len(),
                shots.len()
            )));
        }
        let l_out = counts[0].len();
        if l_out == 0 {
            return Err(Error::InvalidInput("frequency table needs outcome columns".into()));
        }
        for (m, row) in counts.iter().enumerate() {
            if row.len() != l_out {
                return Err(Error::DimensionMismatch(format!(
                    "row {m} has {} outcomes, expected {l_out}",
                    row.len()
                )));
            }
            let sum: u64 = row.iter().sum();
            if sum != shots[m] {
                return Err(Error::InvalidInput(format!(
                    "row {m} sums to {sum} but records {} shots",
                    shots[m]
                )));
            }
        }
        Ok(Self { counts, shots })
    }

    pub fn n_probes(&self) -> usize {
        self.counts.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.counts[0].len()
    }

    pub fn count(&self, probe: usize, outcome: usize) -> u64 {
        self.counts[probe][outcome]
    }

    pub fn row(&self, probe: usize) -> &[u64] {
        &self.counts[probe]
    }

    pub fn shots(&self, probe: usize) -> u64 {
        self.shots[probe]
    }

    pub fn total_counts(&self) -> u64 {
        self.shots.iter().sum()
    }

    /// Click count of a two-outcome row (column 1).
    pub fn clicks(&self, probe: usize) -> u64 {
        self.counts[probe][1]
    }
}

/// Bernoulli click sampling for every probe.
///
/// Each probe draws from its own counter-based substream
/// (`seed = ensemble.seed`, `stream = probe index`), so the table is
/// independent of evaluation order and safe to produce in parallel.
/// Column 0 holds no-click counts, column 1 clicks.
pub fn simulate_frequency_table(
    model: &DetectorModel,
    ensemble: &ProbeEnsemble,
) -> Result<FrequencyTable> {
    let shots = ensemble.shots_per_probe();
    let mut counts = Vec::with_capacity(ensemble.len());
    for (idx, &alpha) in ensemble.probes().iter().enumerate() {
        let p_click = model.click_probability(alpha);
        let dist = Bernoulli::new(p_click).map_err(|_| {
            Error::InvalidInput(format!("click probability {p_click} outside [0, 1]"))
        })?;
        let mut rng = ChaCha12Rng::seed_from_u64(ensemble.seed());
        rng.set_stream(idx as u64);
        let clicks = (0..shots).filter(|_| dist.sample(&mut rng)).count() as u64;
        counts.push(vec![shots - clicks, clicks]);
    }
    FrequencyTable::new(counts, vec![shots; ensemble.len()])
}

#[derive(Debug, Serialize, Deserialize)]
struct FrequencyRow {
    probe_index: usize,
    re_alpha: f64,
    im_alpha: f64,
    shots: u64,
    clicks: u64,
}

/// Writes the table as CSV (`probe_index,re_alpha,im_alpha,shots,clicks`,
/// UTF-8, LF). `comments` are emitted first, one `# `-prefixed line each.
pub fn write_frequency_csv<W: Write>(
    mut writer: W,
    ensemble: &ProbeEnsemble,
    table: &FrequencyTable,
    comments: &[String],
) -> Result<()> {
    if table.n_probes() != ensemble.len() {
        return Err(Error::DimensionMismatch(format!(
            "table has {} rows for {} probes",
            table.n_probes(),
            ensemble.len()
        )));
    }
    if table.n_outcomes() != 2 {
        return Err(Error::InvalidInput(
            "frequency CSV schema covers two-outcome tables only".into(),
        ));
    }
    for line in comments {
        writeln!(writer, "# {line}")?;
    }
    let mut csv_writer = csv::Writer::from_writer(writer);
    for (m, &alpha) in ensemble.probes().iter().enumerate() {
        csv_writer.serialize(FrequencyRow {
            probe_index: m,
            re_alpha: alpha.re,
            im_alpha: alpha.im,
            shots: table.shots(m),
            clicks: table.clicks(m),
        })?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Reads a frequency CSV back into probe amplitudes and a table. Lines
/// starting with `#` are ignored.
pub fn read_frequency_csv<R: Read>(reader: R) -> Result<(Vec<C64>, FrequencyTable)> {
    let mut csv_reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut probes = Vec::new();
    let mut counts = Vec::new();
    let mut shots = Vec::new();
    for (i, record) in csv_reader.deserialize::<FrequencyRow>().enumerate() {
        let row = record?;
        if row.probe_index != i {
            return Err(Error::Parse {
                location: format!("data row {i}"),
                reason: format!("probe_index {} out of sequence (expected {i})", row.probe_index),
            });
        }
        if !row.re_alpha.is_finite() || !row.im_alpha.is_finite() {
            return Err(Error::Parse {
                location: format!("data row {i}"),
                reason: "probe amplitude is not finite".into(),
            });
        }
        if row.clicks > row.shots {
            return Err(Error::Parse {
                location: format!("data row {i}"),
                reason: format!("{} clicks exceed {} shots", row.clicks, row.shots),
            });
        }
        probes.push(C64::new(row.re_alpha, row.im_alpha));
        counts.push(vec![row.shots - row.clicks, row.clicks]);
        shots.push(row.shots);
    }
    if probes.is_empty() {
        return Err(Error::Parse {
            location: "end of input".into(),
            reason: "no data rows found".into(),
        });
    }
    Ok((probes, FrequencyTable::new(counts, shots)?))
}
