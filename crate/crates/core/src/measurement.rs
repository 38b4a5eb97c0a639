//! Coincidence post-selection, polarization analysis and the figures of merit
//! computed from them (truth table, fringe, visibility, fidelity,
//! concurrence).
//!
//! Detection is modelled as a start/stop coincidence counter behind a CW
//! pump: only the arrival-time difference of the two photons is observable,
//! so outcomes are evaluated on [`JointState::relative_time_view`].

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};

use crate::circuits::{cnot_apply, GateConfig};
use crate::elements::apply_hwp;
use crate::error::{Error, Result};
use crate::state::{
    BinWidth, JointState, JonesVector, Mode, PolPair, Polarization, Port, SinglePhotonState, TimeBin, C64,
    NORM_TOLERANCE,
};

/// PZT calibration of the long-path actuator, nm per volt.
pub const PZT_NM_PER_VOLT: f64 = 69.0;

/// Photon wavelength, nm.
pub const PHOTON_WAVELENGTH_NM: f64 = 840.0;

/// Analyzer rotation that measures in the diagonal basis.
pub const DIAGONAL_ANALYZER_DEG: f64 = 45.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoincidenceWindow {
    pub window_bins: u32,
}

impl CoincidenceWindow {
    pub fn new(window_bins: u32) -> Result<Self> {
        if window_bins == 0 {
            return Err(Error::Config("coincidence window must be at least one bin".into()));
        }
        Ok(Self { window_bins })
    }

    /// Window for a ΔT given in ns. A pair counts when `|t1 - t2|·bin < ΔT`,
    /// i.e. `|Δt| < ceil(ΔT / bin)` in whole bins.
    pub fn from_ns(delta_t_ns: f64, bin: BinWidth) -> Result<Self> {
        if !(delta_t_ns.is_finite() && delta_t_ns > 0.0) {
            return Err(Error::Config(format!("delta_t_ns must be > 0, got {delta_t_ns}")));
        }
        let ratio = delta_t_ns / bin.ns();
        // guard against 1.0/0.1 landing a hair above 10
        let bins = (ratio - 1e-9).ceil().max(1.0);
        Self::new(bins as u32)
    }

    pub fn contains(&self, dt_bins: i64) -> bool {
        dt_bins.unsigned_abs() < u64::from(self.window_bins)
    }
}

fn require_normalized(state: &JointState) -> Result<()> {
    let n = state.squared_norm();
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Precondition(format!(
            "joint state has squared norm {n}, expected 1"
        )));
    }
    Ok(())
}

/// Keeps the pairs with photon 1 on `d1`, photon 2 on `d2` and arrival times
/// within the window. Returns the unnormalized kept part and its probability.
pub fn coincidence_postselect(
    joint: &JointState,
    d1: Port,
    d2: Port,
    window: CoincidenceWindow,
) -> Result<(JointState, f64)> {
    require_normalized(joint)?;
    let kept = joint.filtered(|m1, m2| m1.port == d1 && m2.port == d2 && window.contains(m1.t.0 - m2.t.0));
    let p = kept.squared_norm();
    Ok((kept, p))
}

fn pol_pair_weights(state: &JointState) -> [f64; 4] {
    let mut w = [0.0; 4];
    for ((m1, m2), a) in state.relative_time_view().iter() {
        w[PolPair::new(m1.pol, m2.pol).index()] += a.norm_sqr();
    }
    w
}

/// Outcome distribution over HH, HV, VH, VV, normalized to 1.
pub fn polarization_histogram(kept: &JointState) -> Result<[f64; 4]> {
    let w = pol_pair_weights(kept);
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyOutcome("no coincidences survived post-selection".into()));
    }
    Ok(w.map(|x| x / total))
}

/// Table of unconditional post-selected probabilities: rows are the inputs
/// HH, HV, VH, VV and columns the detected polarization pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthTable {
    pub probs: [[f64; 4]; 4],
}

impl TruthTable {
    pub fn get(&self, input: PolPair, output: PolPair) -> f64 {
        self.probs[input.index()][output.index()]
    }

    /// Post-selection success probability of one input.
    pub fn row_success(&self, input: PolPair) -> f64 {
        self.probs[input.index()].iter().sum()
    }

    /// Each row divided by its sum (zero rows stay zero).
    pub fn renormalized(&self) -> [[f64; 4]; 4] {
        self.probs.map(|row| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.map(|x| x / s)
            } else {
                row
            }
        })
    }
}

/// Product input with the control photon in `control` and the target photon
/// in `target`, both in time bin 0 on the gate's input rails.
pub fn product_input(cfg: &GateConfig, control: JonesVector, target: JonesVector) -> Result<JointState> {
    let s1 = SinglePhotonState::from_jones(cfg.ports.control_io, TimeBin(0), control);
    let s2 = SinglePhotonState::from_jones(cfg.ports.target_io, TimeBin(0), target);
    JointState::tensor(&s1, &s2)
}

/// Runs the gate and the coincidence filter on one input.
pub fn run_gate(
    cfg: &GateConfig,
    window: CoincidenceWindow,
    control: JonesVector,
    target: JonesVector,
) -> Result<(JointState, f64)> {
    let out = cnot_apply(&product_input(cfg, control, target)?, cfg)?;
    coincidence_postselect(&out, cfg.detector_port_1(), cfg.detector_port_2(), window)
}

pub fn truth_table(cfg: &GateConfig, window: CoincidenceWindow) -> Result<TruthTable> {
    let mut probs = [[0.0; 4]; 4];
    for input in PolPair::ALL {
        let (kept, p) = run_gate(
            cfg,
            window,
            JonesVector::basis(input.control()),
            JonesVector::basis(input.target()),
        )?;
        if p > 0.0 {
            let hist = polarization_histogram(&kept)?;
            probs[input.index()] = hist.map(|h| h * p);
        }
    }
    Ok(TruthTable { probs })
}

/// Passes each photon through a half-wave plate that rotates linear
/// polarization by the given angle (plate at half that angle) and a PBS.
/// Returns the unconditional probabilities of the four (transmitted = H,
/// reflected = V) detector combinations.
pub fn analyzer_outcomes(kept: &JointState, rotation1_deg: f64, rotation2_deg: f64) -> Result<[f64; 4]> {
    let plates = |s: &SinglePhotonState, rot: f64| -> Result<SinglePhotonState> {
        Ok(s.ports()
            .into_iter()
            .fold(s.clone(), |acc, p| apply_hwp(&acc, p, rot / 2.0)))
    };
    let none = Default::default();
    let rotated = kept
        .map_arm1(&none, |s| plates(s, rotation1_deg))?
        .map_arm2(&none, |s| plates(s, rotation2_deg))?;
    Ok(pol_pair_weights(&rotated))
}

/// Probability that both photons are transmitted by their analyzers.
pub fn analyzer_project(kept: &JointState, rotation1_deg: f64, rotation2_deg: f64) -> Result<f64> {
    Ok(analyzer_outcomes(kept, rotation1_deg, rotation2_deg)?[PolPair::HH.index()])
}

/// The superposition input `(|H> + |V>)/sqrt(2)` ⊗ `|H>` used for the
/// entanglement and fringe measurements.
pub fn superposition_input() -> (JonesVector, JonesVector) {
    (JonesVector::diagonal(), JonesVector::horizontal())
}

/// Coincidence probability behind diagonal analyzers as the total phase
/// θ1 + θ2 is swept. θ2 is held at its value in `base` and θ1 absorbs the
/// rest.
pub fn fringe_scan(base: &GateConfig, thetas: &[f64], window: CoincidenceWindow) -> Result<Vec<(f64, f64)>> {
    if thetas.is_empty() {
        return Err(Error::Precondition("fringe scan needs at least one phase".into()));
    }
    let (control, target) = superposition_input();
    thetas
        .iter()
        .map(|&theta| {
            let cfg = GateConfig {
                theta1: theta - base.theta2,
                ..*base
            };
            let (kept, _) = run_gate(&cfg, window, control, target)?;
            Ok((
                theta,
                analyzer_project(&kept, DIAGONAL_ANALYZER_DEG, DIAGONAL_ANALYZER_DEG)?,
            ))
        })
        .collect()
}

/// Least-squares fit of `c(θ) = A(1 + V cos(θ + φ))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeFit {
    pub amplitude: f64,
    pub visibility: f64,
    pub phase: f64,
    /// Residual-based standard error of V; `None` with exactly three samples.
    pub visibility_stderr: Option<f64>,
}

impl FringeFit {
    pub fn model(&self, theta: f64) -> f64 {
        self.amplitude * (1.0 + self.visibility * (theta + self.phase).cos())
    }
}

/// Fits `c = A + B cos θ + C sin θ` by ordinary least squares and reports
/// `A`, `V = sqrt(B² + C²)/A` (capped at 1) and `φ = atan2(-C, B)`.
pub fn fit_fringe(samples: &[(f64, f64)]) -> Result<FringeFit> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 samples, got {}", samples.len())));
    }
    let mut thetas: Vec<f64> = samples.iter().map(|s| s.0).collect();
    thetas.sort_by(|a, b| a.total_cmp(b));
    thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if thetas.len() < 3 {
        return Err(Error::Fit("need at least 3 distinct phases".into()));
    }
    let span = thetas[thetas.len() - 1] - thetas[0];
    if span <= std::f64::consts::PI {
        return Err(Error::Fit(format!(
            "phases span {span:.3} rad, need more than half a period"
        )));
    }
    if samples.iter().any(|(t, c)| !t.is_finite() || !c.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }

    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for &(theta, c) in samples {
        let row = Vector3::new(1.0, theta.cos(), theta.sin());
        xtx += row * row.transpose();
        xty += row * c;
    }
    let inv = xtx
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::Fit("degenerate design matrix".into()))?;
    let beta = inv * xty;
    let (a, b, c) = (beta[0], beta[1], beta[2]);
    if a <= 0.0 {
        return Err(Error::Fit(format!("non-positive mean level {a}")));
    }
    let r = b.hypot(c);
    let visibility = (r / a).min(1.0);
    let phase = (-c).atan2(b);

    let n = samples.len();
    let visibility_stderr = (n > 3).then(|| {
        let rss: f64 = samples
            .iter()
            .map(|&(t, y)| {
                let fit = a + b * t.cos() + c * t.sin();
                (y - fit).powi(2)
            })
            .sum();
        let cov = inv * (rss / (n - 3) as f64);
        let grad = if r > 0.0 {
            Vector3::new(-r / (a * a), b / (r * a), c / (r * a))
        } else {
            // V = |(B, C)|/A is not differentiable at 0; use the radial spread
            return ((cov[(1, 1)] + cov[(2, 2)]) / 2.0).max(0.0).sqrt() / a;
        };
        (grad.transpose() * cov * grad)[(0, 0)].max(0.0).sqrt()
    });

    Ok(FringeFit {
        amplitude: a,
        visibility,
        phase,
        visibility_stderr,
    })
}

/// Entanglement witness `(P_HH + P_VV + V)/2`.
pub fn fidelity(p_hh: f64, p_vv: f64, visibility: f64) -> Result<f64> {
    for (name, x) in [("p_hh", p_hh), ("p_vv", p_vv), ("visibility", visibility)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Precondition(format!("{name} = {x} is outside [0, 1]")));
        }
    }
    Ok((p_hh + p_vv + visibility) / 2.0)
}

/// Concurrence `2|a_HH a_VV - a_HV a_VH|` of a normalized two-qubit pure state.
pub fn concurrence(amps: [C64; 4]) -> Result<f64> {
    let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Precondition(format!("state has squared norm {n}, expected 1")));
    }
    Ok(2.0 * (amps[0] * amps[3] - amps[1] * amps[2]).norm())
}

/// Phase shift produced by moving the long path with the PZT.
pub fn pzt_volts_to_phase(volts: f64, nm_per_volt: f64, wavelength_nm: f64) -> Result<f64> {
    if !wavelength_nm.is_finite() || wavelength_nm <= 0.0 {
        return Err(Error::Precondition(format!(
            "wavelength must be > 0 nm, got {wavelength_nm}"
        )));
    }
    Ok(TAU * volts * nm_per_volt / wavelength_nm)
}

/// Inverse of [`pzt_volts_to_phase`].
pub fn phase_to_pzt_volts(phase: f64, nm_per_volt: f64, wavelength_nm: f64) -> Result<f64> {
    if !wavelength_nm.is_finite() || wavelength_nm <= 0.0 {
        return Err(Error::Precondition(format!(
            "wavelength must be > 0 nm, got {wavelength_nm}"
        )));
    }
    if nm_per_volt == 0.0 {
        return Err(Error::Precondition("nm_per_volt must be non-zero".into()));
    }
    Ok(phase * wavelength_nm / (TAU * nm_per_volt))
}

/// Everything reported for a superposition input.
#[derive(Clone, Debug)]
pub struct EntangleReport {
    pub kept: JointState,
    pub success: f64,
    pub histogram: [f64; 4],
    pub concurrence: f64,
}

pub fn entangle(
    cfg: &GateConfig,
    window: CoincidenceWindow,
    control: JonesVector,
    target: Polarization,
) -> Result<EntangleReport> {
    let (kept, success) = run_gate(cfg, window, control, JonesVector::basis(target))?;
    let histogram = polarization_histogram(&kept)?;
    let concurrence = concurrence(kept.normalized()?.polarization_amplitudes()?)?;
    Ok(EntangleReport {
        kept,
        success,
        histogram,
        concurrence,
    })
}

/// `(|HH> + e^{iθ}|VV>)/sqrt(2)` on the detector rails, with the VV term in
/// the late bin, as the post-selected state should look.
pub fn ideal_entangled_state(cfg: &GateConfig, theta: f64) -> Result<JointState> {
    let (p1, p2) = (cfg.detector_port_1(), cfg.detector_port_2());
    let d = i64::from(cfg.delay_bins);
    let k = std::f64::consts::FRAC_1_SQRT_2;
    JointState::from_entries(
        [p1].into(),
        [p2].into(),
        [
            (
                (
                    Mode {
                        port: p1,
                        pol: Polarization::H,
                        t: TimeBin(0),
                    },
                    Mode {
                        port: p2,
                        pol: Polarization::H,
                        t: TimeBin(0),
                    },
                ),
                C64::new(k, 0.0),
            ),
            (
                (
                    Mode {
                        port: p1,
                        pol: Polarization::V,
                        t: TimeBin(d),
                    },
                    Mode {
                        port: p2,
                        pol: Polarization::V,
                        t: TimeBin(d),
                    },
                ),
                C64::from_polar(k, theta),
            ),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::overlap_modulus_sq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const EPS: f64 = 1e-12;

    fn gate(t1: f64, t2: f64) -> GateConfig {
        GateConfig::new(19, t1, t2).unwrap()
    }

    fn w(n: u32) -> CoincidenceWindow {
        CoincidenceWindow::new(n).unwrap()
    }

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < EPS
    }

    #[test]
    fn window_from_ns() {
        assert_eq!(
            CoincidenceWindow::from_ns(1.0, BinWidth::default())
                .unwrap()
                .window_bins,
            10
        );
        assert_eq!(
            CoincidenceWindow::from_ns(1.05, BinWidth::default())
                .unwrap()
                .window_bins,
            11
        );
        let win = w(10);
        assert!(win.contains(9) && win.contains(-9) && !win.contains(10));
    }

    #[test]
    fn postselect_basis_input() {
        let (kept, p) = run_gate(
            &gate(0.0, 0.0),
            w(10),
            JonesVector::horizontal(),
            JonesVector::horizontal(),
        )
        .unwrap();
        assert!(approx(p, 0.25));
        assert_eq!(kept.len(), 1);
        let a = kept.amplitude(&Mode::new(0, Polarization::H, 0), &Mode::new(10, Polarization::H, 0));
        assert!((a - C64::new(0.5, 0.0)).norm() < EPS);
    }

    #[test]
    fn postselect_superposition_input() {
        let theta = 0.77;
        let cfg = gate(0.5, theta - 0.5);
        let (c, t) = superposition_input();
        let (kept, p) = run_gate(&cfg, w(10), c, t).unwrap();
        assert!(approx(p, 0.25));
        let k = 1.0 / (2.0 * 2f64.sqrt());
        let hh = kept.amplitude(&Mode::new(0, Polarization::H, 0), &Mode::new(10, Polarization::H, 0));
        let vv = kept.amplitude(&Mode::new(0, Polarization::V, 19), &Mode::new(10, Polarization::V, 19));
        assert!((hh - C64::new(k, 0.0)).norm() < EPS);
        assert!((vv - C64::from_polar(k, theta)).norm() < EPS);
        let ideal = ideal_entangled_state(&cfg, theta).unwrap();
        assert!(approx(
            overlap_modulus_sq(&kept.normalized().unwrap(), &ideal).unwrap(),
            1.0
        ));
    }

    #[test]
    fn wide_window_keeps_all_four_terms() {
        let (c, t) = superposition_input();
        let (kept, p) = run_gate(&gate(0.0, 0.0), w(30), c, t).unwrap();
        assert!(approx(p, 0.5));
        let h = polarization_histogram(&kept).unwrap();
        for x in h {
            assert!(approx(x, 0.25));
        }
    }

    #[test]
    fn postselect_requires_normalized_input() {
        let j = product_input(&gate(0.0, 0.0), JonesVector::horizontal(), JonesVector::horizontal())
            .unwrap()
            .scaled(C64::new(0.5, 0.0));
        assert!(coincidence_postselect(&j, Port(0), Port(10), w(10)).is_err());
    }

    #[test]
    fn histogram_cases() {
        let (kept, _) = run_gate(
            &gate(0.0, 0.0),
            w(10),
            JonesVector::horizontal(),
            JonesVector::horizontal(),
        )
        .unwrap();
        assert_eq!(polarization_histogram(&kept).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        let (c, t) = superposition_input();
        let (kept, _) = run_gate(&gate(0.0, 0.0), w(10), c, t).unwrap();
        let h = polarization_histogram(&kept).unwrap();
        assert!(approx(h[0], 0.5) && approx(h[3], 0.5) && h[1] == 0.0 && h[2] == 0.0);
        assert!(matches!(
            polarization_histogram(&kept.filtered(|_, _| false)),
            Err(Error::EmptyOutcome(_))
        ));
    }

    fn cnot_table() -> [[f64; 4]; 4] {
        let mut t = [[0.0; 4]; 4];
        t[0][0] = 0.25;
        t[1][1] = 0.25;
        t[2][3] = 0.25;
        t[3][2] = 0.25;
        t
    }

    #[test]
    fn ideal_truth_table() {
        for (t1, t2) in [(0.0, 0.0), (0.3, 1.0), (-2.0, 0.4)] {
            let table = truth_table(&gate(t1, t2), w(10)).unwrap();
            let expect = cnot_table();
            for (got, want) in table.probs.iter().flatten().zip(expect.iter().flatten()) {
                assert!(approx(*got, *want), "{t1},{t2}: {:?}", table.probs);
            }
        }
    }

    /// Independent enumeration: every input splits into short/long choices of
    /// each photon (2 control branches × 4 target branches including the
    /// discard rail); a branch pair counts when both hit their detector and
    /// |Δt| < window.
    fn brute_force_table(delay: i64, window: i64) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for input in PolPair::ALL {
            let (c, t) = (input.control(), input.target());
            // control: deterministic, H early / V late
            let t1 = if c == Polarization::V { delay } else { 0 };
            // target branches: (reaches detector, polarization, time, probability)
            let branches = [
                (true, t, 0, 0.25),
                (true, t.flipped(), delay, 0.25),
                (false, t, 0, 0.25),
                (false, t.flipped(), delay, 0.25),
            ];
            for (hit, p2, t2, prob) in branches {
                if hit && (t1 - t2).abs() < window {
                    out[input.index()][PolPair::new(c, p2).index()] += prob;
                }
            }
        }
        out
    }

    #[test]
    fn truth_table_matches_brute_force() {
        for (window, delay) in [(10u32, 19u32), (19, 19), (20, 19), (30, 19), (1, 5)] {
            let table = truth_table(&GateConfig::new(delay, 0.4, -1.1).unwrap(), w(window)).unwrap();
            let oracle = brute_force_table(delay as i64, window as i64);
            for (got, want) in table.probs.iter().flatten().zip(oracle.iter().flatten()) {
                assert!(approx(*got, *want), "w={window} d={delay}");
            }
        }
        // window above the delay: input HH also passes the flipped late target branch
        let table = truth_table(&gate(0.0, 0.0), w(30)).unwrap();
        assert!(approx(table.get(PolPair::HH, PolPair::HH), 0.25));
        assert!(approx(table.get(PolPair::HH, PolPair::HV), 0.25));
    }

    #[test]
    fn analyzer_cases() {
        let (kept, p) = run_gate(
            &gate(0.0, 0.0),
            w(10),
            JonesVector::horizontal(),
            JonesVector::horizontal(),
        )
        .unwrap();
        assert!(approx(analyzer_project(&kept, 0.0, 0.0).unwrap(), p));
        let (c, t) = superposition_input();
        for (theta, expect) in [(0.0, 0.5), (PI, 0.0)] {
            let (kept, _) = run_gate(&gate(theta, 0.0), w(10), c, t).unwrap();
            let norm = kept.normalized().unwrap();
            assert!(approx(analyzer_project(&norm, 45.0, 45.0).unwrap(), expect));
        }
    }

    #[test]
    fn analyzer_outcomes_sum_to_kept_probability() {
        let (c, t) = superposition_input();
        let (kept, p) = run_gate(&gate(0.3, 0.2), w(10), c, t).unwrap();
        let o = analyzer_outcomes(&kept, 45.0, 45.0).unwrap();
        assert!(approx(o.iter().sum::<f64>(), p));
    }

    #[test]
    fn fringe_scan_values() {
        let scan = fringe_scan(&gate(0.0, 0.0), &[0.0, PI, PI / 2.0], w(10)).unwrap();
        assert!(approx(scan[0].1, 0.125));
        assert!(approx(scan[1].1, 0.0));
        assert!(approx(scan[2].1, 1.0 / 16.0));
        assert!(fringe_scan(&gate(0.0, 0.0), &[], w(10)).is_err());
    }

    #[test]
    fn fit_round_trip() {
        let samples: Vec<_> = (0..20)
            .map(|k| {
                let th = TAU * k as f64 / 20.0;
                (th, 50.0 * (1.0 + 0.44 * th.cos()))
            })
            .collect();
        let fit = fit_fringe(&samples).unwrap();
        assert!((fit.amplitude - 50.0).abs() < 1e-9);
        assert!((fit.visibility - 0.44).abs() < 1e-9);
        assert!(fit.phase.abs() < 1e-9);

        let flat: Vec<_> = samples.iter().map(|(t, _)| (*t, 7.0)).collect();
        assert!(fit_fringe(&flat).unwrap().visibility.abs() < 1e-12);

        let thetas: Vec<f64> = (0..25).map(|k| TAU * k as f64 / 24.0).collect();
        let ideal = fringe_scan(&gate(0.0, 0.0), &thetas, w(10)).unwrap();
        assert!((fit_fringe(&ideal).unwrap().visibility - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_fringe(&[(0.0, 1.0)]), Err(Error::Fit(_))));
        assert!(matches!(
            fit_fringe(&[(0.0, 1.0), (0.0, 2.0), (0.0, 3.0), (0.0, 1.0)]),
            Err(Error::Fit(_))
        ));
        // three points within a quarter period
        assert!(matches!(
            fit_fringe(&[(0.0, 1.0), (0.5, 2.0), (1.0, 3.0)]),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn fidelity_cases() {
        assert!((fidelity(0.44, 0.41, 0.44).unwrap() - 0.645).abs() < 1e-12);
        assert!(approx(fidelity(0.5, 0.5, 1.0).unwrap(), 1.0));
        assert!(approx(fidelity(0.25, 0.25, 0.0).unwrap(), 0.25));
        assert!(fidelity(1.2, 0.0, 0.0).is_err());
        assert!(fidelity(0.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn concurrence_cases() {
        let k = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        assert!(approx(
            concurrence([C64::new(k, 0.0), z, z, C64::from_polar(k, 1.3)]).unwrap(),
            1.0
        ));
        assert!(approx(concurrence([C64::new(1.0, 0.0), z, z, z]).unwrap(), 0.0));
        let c = concurrence([C64::new(0.9f64.sqrt(), 0.0), z, z, C64::new(0.1f64.sqrt(), 0.0)]).unwrap();
        assert!((c - 0.6).abs() < 1e-12);
        assert!(concurrence([C64::new(0.5, 0.0), z, z, z]).is_err());
    }

    #[test]
    fn pzt_cases() {
        let p = pzt_volts_to_phase(1.0, 69.0, 840.0).unwrap();
        assert!((p - 0.5161).abs() < 5e-5);
        assert_eq!(pzt_volts_to_phase(0.0, 69.0, 840.0).unwrap(), 0.0);
        assert!((pzt_volts_to_phase(840.0 / 69.0, 69.0, 840.0).unwrap() - TAU).abs() < 1e-6);
        assert!(pzt_volts_to_phase(1.0, 69.0, 0.0).is_err());
        let v = phase_to_pzt_volts(1.234, 69.0, 840.0).unwrap();
        assert!((pzt_volts_to_phase(v, 69.0, 840.0).unwrap() - 1.234).abs() < 1e-12);
    }

    #[test]
    fn entangle_report() {
        let r = entangle(&gate(0.0, 0.0), w(10), JonesVector::diagonal(), Polarization::H).unwrap();
        assert!(approx(r.success, 0.25));
        assert!(approx(r.histogram[0], 0.5) && approx(r.histogram[3], 0.5));
        assert!(approx(r.concurrence, 1.0));
        let r = entangle(&gate(0.0, 0.0), w(10), JonesVector::horizontal(), Polarization::H).unwrap();
        assert_eq!(r.histogram, [1.0, 0.0, 0.0, 0.0]);
        assert!(approx(r.concurrence, 0.0));
        let j = JonesVector::new(C64::new(0.9f64.sqrt(), 0.0), C64::new(0.1f64.sqrt(), 0.0)).unwrap();
        let r = entangle(&gate(0.0, 0.0), w(10), j, Polarization::H).unwrap();
        assert!((r.concurrence - 0.6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn kept_plus_rejected_is_one(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0,
                                     win in 1u32..40, t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
            let n = (a * a + b * b).sqrt();
            let m = (c * c + d * d).sqrt();
            prop_assume!(n > 1e-3 && m > 1e-3);
            let cfg = GateConfig::new(19, t1, t2).unwrap();
            let j1 = JonesVector::new(C64::new(a / n, 0.0), C64::new(0.0, b / n)).unwrap();
            let j2 = JonesVector::new(C64::new(c / m, 0.0), C64::new(d / m, 0.0)).unwrap();
            let out = cnot_apply(&product_input(&cfg, j1, j2).unwrap(), &cfg).unwrap();
            let (_, p) = coincidence_postselect(&out, Port(0), Port(10), w(win)).unwrap();
            let rejected = out
                .filtered(|m1, m2| !(m1.port == Port(0) && m2.port == Port(10) && (m1.t.0 - m2.t.0).abs() < win as i64))
                .squared_norm();
            prop_assert!((p + rejected - 1.0).abs() < EPS);
        }

        #[test]
        fn fringe_depends_only_on_total_phase(t1 in -4.0f64..4.0, t2 in -4.0f64..4.0, delta in -4.0f64..4.0) {
            let (c, t) = superposition_input();
            let (k1, _) = run_gate(&gate(t1, t2), w(10), c, t).unwrap();
            let (k2, _) = run_gate(&gate(t1 + delta, t2 - delta), w(10), c, t).unwrap();
            let p1 = analyzer_project(&k1, 45.0, 45.0).unwrap();
            let p2 = analyzer_project(&k2, 45.0, 45.0).unwrap();
            prop_assert!((p1 - p2).abs() < EPS);
            prop_assert!((p1 - (1.0 + (t1 + t2).cos()) / 16.0).abs() < EPS);
        }

        #[test]
        fn fit_recovers_parameters(a in 1.0f64..500.0, v in 0.0f64..1.0, phi in -3.1f64..3.1, n in 7usize..40) {
            let samples: Vec<_> = (0..n)
                .map(|k| {
                    let th = TAU * k as f64 / n as f64;
                    (th, a * (1.0 + v * (th + phi).cos()))
                })
                .collect();
            let fit = fit_fringe(&samples).unwrap();
            prop_assert!((fit.amplitude - a).abs() < 1e-9 * a.max(1.0));
            prop_assert!((fit.visibility - v).abs() < 1e-9);
            if v > 1e-3 {
                let dphi = (fit.phase - phi + PI).rem_euclid(TAU) - PI;
                prop_assert!(dphi.abs() < 1e-8);
            }
        }

        #[test]
        fn fidelity_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..0.5) {
            let f = fidelity(a, b, c).unwrap();
            prop_assert!(fidelity((a + d).min(1.0), b, c).unwrap() >= f);
            prop_assert!(fidelity(a, (b + d).min(1.0), c).unwrap() >= f);
            prop_assert!(fidelity(a, b, (c + d).min(1.0)).unwrap() >= f);
        }

        #[test]
        fn concurrence_of_real_superposition(alpha in -1.0f64..1.0) {
            let beta = (1.0 - alpha * alpha).sqrt();
            let j = JonesVector::new(C64::new(alpha, 0.0), C64::new(beta, 0.0)).unwrap();
            prop_assume!(alpha.abs() > 1e-6 && beta > 1e-6);
            let r = entangle(&gate(0.2, 0.1), w(10), j, Polarization::H).unwrap();
            // direct amplitude route: kept = (α|HH> + β e^{iθ}|VV>)/2, normalized
            let kept = r.kept.normalized().unwrap();
            let hh = kept.amplitude(&Mode::new(0, Polarization::H, 0), &Mode::new(10, Polarization::H, 0));
            let vv = kept.amplitude(&Mode::new(0, Polarization::V, 19), &Mode::new(10, Polarization::V, 19));
            prop_assert!((r.concurrence - 2.0 * (hh * vv).norm()).abs() < 1e-12);
            prop_assert!((r.concurrence - 2.0 * (alpha * beta).abs()).abs() < 1e-12);
        }
    }
}
