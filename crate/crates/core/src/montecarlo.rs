//! Photon-counting emulation of the gate experiment.
//!
//! Ideal probabilities from [`crate::measurement`] are turned into expected
//! coincidence counts (pair rate × integration time × detection efficiency,
//! plus an accidental floor), degraded by polarization leakage and phase
//! jitter, and Poisson-sampled.
//!
//! RNG: every sampled cell draws from ChaCha8 seeded with the run seed and
//! switched to stream `cell index`, so cells are independent and their values
//! do not depend on evaluation order. Poisson variates come from
//! `rand_distr::Poisson`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::circuits::GateConfig;
use crate::error::{Error, Result};
use crate::measurement::{
    analyzer_outcomes, pzt_volts_to_phase, run_gate, superposition_input, truth_table, CoincidenceWindow, TruthTable,
    DIAGONAL_ANALYZER_DEG,
};
use crate::state::PolPair;

/// Fraction of arm-1 photons reaching D1 through its analyzer, averaged over settings.
pub const SINGLES_FRACTION_1: f64 = 0.5;
/// Fraction of arm-2 photons reaching D2: half leave the target interferometer
/// by the detector rail, half of those pass the analyzer.
pub const SINGLES_FRACTION_2: f64 = 0.25;

/// Stream offset separating fringe cells from truth-table cells.
const FRINGE_STREAM_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    /// Photon pairs per second at the interferometer inputs.
    pub pair_rate: f64,
    pub efficiency_1: f64,
    pub efficiency_2: f64,
    /// Uncorrelated counts per second at each detector.
    pub dark_rate_1: f64,
    pub dark_rate_2: f64,
    /// Gaussian std of θ1 + θ2 over an integration, radians.
    pub phase_jitter_sigma: f64,
    /// Probability that a photon's recorded polarization is flipped.
    pub leakage: f64,
    pub integration_s: f64,
    /// Coincidence window used for the accidental rate, seconds.
    pub window_s: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            pair_rate: 2000.0,
            efficiency_1: 1.0,
            efficiency_2: 1.0,
            dark_rate_1: 0.0,
            dark_rate_2: 0.0,
            phase_jitter_sigma: 0.0,
            leakage: 0.0,
            integration_s: 10.0,
            window_s: 1.0e-9,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("pair_rate", self.pair_rate),
            ("dark_rate_1", self.dark_rate_1),
            ("dark_rate_2", self.dark_rate_2),
            ("phase_jitter_sigma", self.phase_jitter_sigma),
            ("integration_s", self.integration_s),
            ("window_s", self.window_s),
        ];
        for (name, x) in nonneg {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {x}")));
            }
        }
        for (name, x) in [("efficiency_1", self.efficiency_1), ("efficiency_2", self.efficiency_2)] {
            if !(x > 0.0 && x <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {x}")));
            }
        }
        if !(0.0..1.0).contains(&self.leakage) {
            return Err(Error::Config(format!(
                "leakage must lie in [0, 1), got {}",
                self.leakage
            )));
        }
        Ok(())
    }

    /// Singles rates at D1 and D2, counts per second.
    pub fn singles_rates(&self) -> (f64, f64) {
        (
            self.pair_rate * self.efficiency_1 * SINGLES_FRACTION_1 + self.dark_rate_1,
            self.pair_rate * self.efficiency_2 * SINGLES_FRACTION_2 + self.dark_rate_2,
        )
    }

    /// Expected accidental coincidences over one integration.
    pub fn accidentals(&self) -> f64 {
        let (r1, r2) = self.singles_rates();
        r1 * r2 * self.window_s * self.integration_s
    }

    /// Visibility multiplier from Gaussian phase jitter.
    pub fn jitter_factor(&self) -> f64 {
        (-self.phase_jitter_sigma.powi(2) / 2.0).exp()
    }
}

/// Counts recorded for one outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct CountRecord {
    pub label: String,
    pub counts: u64,
    /// Poisson mean the counts were drawn from.
    pub expected: f64,
    pub integration_s: f64,
    pub seed: u64,
}

/// Mean coincidences for a post-selected outcome of probability `p`:
/// `pair_rate · T · p · η1 · η2` plus accidentals `r1 · r2 · ΔT · T`.
pub fn expected_coincidences(p: f64, n: &NoiseConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Precondition(format!("probability {p} outside [0, 1]")));
    }
    Ok(n.pair_rate * n.integration_s * p * n.efficiency_1 * n.efficiency_2 + n.accidentals())
}

/// Generator for one sampling cell of a run.
pub fn cell_rng(seed: u64, cell: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell);
    rng
}

pub fn sample_poisson<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::Precondition(format!(
            "Poisson mean must be finite and >= 0, got {mean}"
        )));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Precondition(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// One Poisson draw with mean `mean`, reproducible from `seed`.
pub fn sample_counts(mean: f64, seed: u64) -> Result<u64> {
    sample_poisson(mean, &mut cell_rng(seed, 0))
}

fn sample_cell(label: String, mean: f64, n: &NoiseConfig, cell: u64) -> Result<CountRecord> {
    let counts = sample_poisson(mean, &mut cell_rng(n.seed, cell))?;
    Ok(CountRecord {
        label,
        counts,
        expected: mean,
        integration_s: n.integration_s,
        seed: n.seed,
    })
}

/// Mixes a polarization-pair distribution by independent recorded-polarization
/// flips with probability `leakage` on each photon.
pub fn apply_leakage(probs: [f64; 4], leakage: f64) -> [f64; 4] {
    let keep = 1.0 - leakage;
    let mut out = [0.0; 4];
    for src in PolPair::ALL {
        for dst in PolPair::ALL {
            let f1 = if src.control() == dst.control() { keep } else { leakage };
            let f2 = if src.target() == dst.target() { keep } else { leakage };
            out[dst.index()] += probs[src.index()] * f1 * f2;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct TruthTableExperiment {
    pub ideal: TruthTable,
    /// Probabilities after leakage, before counting.
    pub degraded: TruthTable,
    /// `records[input][output]`
    pub records: Vec<Vec<CountRecord>>,
    /// Counts divided by their input-row total.
    pub renormalized: [[f64; 4]; 4],
}

/// Counting version of the truth table: 4 inputs × 4 analyzer settings.
pub fn run_truth_table_experiment(
    cfg: &GateConfig,
    window: CoincidenceWindow,
    n: &NoiseConfig,
) -> Result<TruthTableExperiment> {
    n.validate()?;
    let ideal = truth_table(cfg, window)?;
    let mut degraded = [[0.0; 4]; 4];
    let mut records = Vec::with_capacity(4);
    let mut renormalized = [[0.0; 4]; 4];
    for input in PolPair::ALL {
        let i = input.index();
        degraded[i] = apply_leakage(ideal.probs[i], n.leakage);
        let mut row = Vec::with_capacity(4);
        for output in PolPair::ALL {
            let j = output.index();
            let mean = expected_coincidences(degraded[i][j].clamp(0.0, 1.0), n)?;
            row.push(sample_cell(format!("{input}->{output}"), mean, n, (4 * i + j) as u64)?);
        }
        let total: u64 = row.iter().map(|r| r.counts).sum();
        if total > 0 {
            for (j, r) in row.iter().enumerate() {
                renormalized[i][j] = r.counts as f64 / total as f64;
            }
        }
        records.push(row);
    }
    Ok(TruthTableExperiment {
        ideal,
        degraded: TruthTable { probs: degraded },
        records,
        renormalized,
    })
}

#[derive(Clone, Debug)]
pub struct FringePoint {
    pub volts: f64,
    /// Total phase θ1 + θ2 at this setting.
    pub theta: f64,
    /// Noiseless coincidence probability behind diagonal analyzers.
    pub ideal_probability: f64,
    /// After leakage and phase jitter.
    pub degraded_probability: f64,
    pub record: CountRecord,
}

/// Probability of the transmitted/transmitted outcome behind diagonal
/// analyzers at total phase `theta`, after leakage.
fn leaky_fringe_probability(base: &GateConfig, window: CoincidenceWindow, theta: f64, leakage: f64) -> Result<f64> {
    let (control, target) = superposition_input();
    let cfg = GateConfig {
        theta1: theta - base.theta2,
        ..*base
    };
    let (kept, _) = run_gate(&cfg, window, control, target)?;
    let outcomes = analyzer_outcomes(&kept, DIAGONAL_ANALYZER_DEG, DIAGONAL_ANALYZER_DEG)?;
    Ok(apply_leakage(outcomes, leakage)[PolPair::HH.index()])
}

/// Fringe scan as a counting experiment. Each voltage moves the PZT and
/// adds `pzt_volts_to_phase(volts)` to the base θ1 + θ2.
pub fn run_fringe_experiment(
    base: &GateConfig,
    window: CoincidenceWindow,
    voltages: &[f64],
    n: &NoiseConfig,
    nm_per_volt: f64,
    wavelength_nm: f64,
) -> Result<Vec<FringePoint>> {
    n.validate()?;
    if voltages.is_empty() {
        return Err(Error::Precondition(
            "fringe experiment needs at least one voltage".into(),
        ));
    }
    let thetas = voltages
        .iter()
        .map(|&v| Ok(base.total_phase() + pzt_volts_to_phase(v, nm_per_volt, wavelength_nm)?))
        .collect::<Result<Vec<_>>>()?;
    run_fringe_at_phases(base, window, voltages, &thetas, n)
}

/// Fringe counting at explicit total phases; `voltages` only labels the points.
pub fn run_fringe_at_phases(
    base: &GateConfig,
    window: CoincidenceWindow,
    voltages: &[f64],
    thetas: &[f64],
    n: &NoiseConfig,
) -> Result<Vec<FringePoint>> {
    n.validate()?;
    if thetas.is_empty() || thetas.len() != voltages.len() {
        return Err(Error::Precondition("need one voltage label per phase".into()));
    }
    let jitter = n.jitter_factor();
    voltages
        .iter()
        .zip(thetas)
        .enumerate()
        .map(|(k, (&volts, &theta))| {
            let ideal_probability = leaky_fringe_probability(base, window, theta, 0.0)?;
            let p = leaky_fringe_probability(base, window, theta, n.leakage)?;
            // first-harmonic fringe: the mean level is the average over θ and θ + π
            let opposite = leaky_fringe_probability(base, window, theta + std::f64::consts::PI, n.leakage)?;
            let mean_level = (p + opposite) / 2.0;
            let degraded_probability = (mean_level + jitter * (p - mean_level)).clamp(0.0, 1.0);
            let mean = expected_coincidences(degraded_probability, n)?;
            let record = sample_cell(format!("{volts}"), mean, n, FRINGE_STREAM_BASE + k as u64)?;
            Ok(FringePoint {
                volts,
                theta,
                ideal_probability,
                degraded_probability,
                record,
            })
        })
        .collect()
}
