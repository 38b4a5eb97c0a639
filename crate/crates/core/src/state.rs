//! Basis labels and sparse photon states.
//!
//! A photon lives in a [`Mode`]: a spatial port (rail), a polarization and a
//! discrete arrival-time bin. Single photons are sparse maps from modes to
//! complex amplitudes; photon pairs are sparse maps from ordered mode pairs,
//! with the first slot always the control-arm photon and the second slot the
//! target-arm photon. The two photons are distinguishable and never
//! symmetrized.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Amplitudes with modulus below this are dropped from sparse states.
pub const AMPLITUDE_EPSILON: f64 = 1e-15;

/// Tolerance used for every "normalized" precondition.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Default time-bin width in nanoseconds.
pub const DEFAULT_BIN_NS: f64 = 0.1;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const ALL: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }

    /// 0 for H, 1 for V (the qubit value it encodes).
    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

impl FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(Polarization::H),
            "V" | "v" => Ok(Polarization::V),
            other => Err(Error::Config(format!("unknown polarization {other:?}"))),
        }
    }
}

/// A normalized polarization state `alpha|H> + beta|V>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesVector {
    alpha: C64,
    beta: C64,
}

impl JonesVector {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Precondition(format!(
                "Jones vector has squared norm {norm}, expected 1"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Rescales `(alpha, beta)` to unit norm after checking it is within `tol` of 1.
    pub fn normalized_within(alpha: C64, beta: C64, tol: f64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > tol {
            return Err(Error::Precondition(format!(
                "Jones vector has squared norm {norm}, expected 1 within {tol}"
            )));
        }
        let s = norm.sqrt();
        Ok(Self {
            alpha: alpha / s,
            beta: beta / s,
        })
    }

    pub fn basis(pol: Polarization) -> Self {
        match pol {
            Polarization::H => Self::horizontal(),
            Polarization::V => Self::vertical(),
        }
    }

    pub fn horizontal() -> Self {
        Self {
            alpha: C64::new(1.0, 0.0),
            beta: C64::new(0.0, 0.0),
        }
    }

    pub fn vertical() -> Self {
        Self {
            alpha: C64::new(0.0, 0.0),
            beta: C64::new(1.0, 0.0),
        }
    }

    /// (|H> + |V>)/sqrt(2)
    pub fn diagonal() -> Self {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { alpha: a, beta: a }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn component(&self, pol: Polarization) -> C64 {
        match pol {
            Polarization::H => self.alpha,
            Polarization::V => self.beta,
        }
    }
}

/// Spatial port (optical rail) identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Port(pub u16);

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Arrival-time bin index. Bin widths live in [`BinWidth`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeBin(pub i64);

impl Add<i64> for TimeBin {
    type Output = TimeBin;

    fn add(self, rhs: i64) -> TimeBin {
        TimeBin(self.0 + rhs)
    }
}

impl fmt::Display for TimeBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Width of one time bin. All delays are integer multiples of it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinWidth {
    ns: f64,
}

impl Default for BinWidth {
    fn default() -> Self {
        Self { ns: DEFAULT_BIN_NS }
    }
}

impl BinWidth {
    pub fn from_ns(ns: f64) -> Result<Self> {
        if !(ns.is_finite() && ns > 0.0) {
            return Err(Error::Config(format!("bin width must be > 0 ns, got {ns}")));
        }
        Ok(Self { ns })
    }

    pub fn ns(&self) -> f64 {
        self.ns
    }

    pub fn seconds(&self) -> f64 {
        self.ns * 1e-9
    }

    /// Nearest whole number of bins for a duration, with the relative rounding error.
    pub fn bins_for_ns(&self, duration_ns: f64) -> (i64, f64) {
        let exact = duration_ns / self.ns;
        let bins = exact.round();
        let rel = if exact == 0.0 {
            0.0
        } else {
            ((bins - exact) / exact).abs()
        };
        (bins as i64, rel)
    }
}

/// Light travel time over a path difference, in nanoseconds.
pub fn path_difference_to_ns(meters: f64) -> f64 {
    meters / SPEED_OF_LIGHT * 1e9
}

/// A single-photon basis label. The derived ordering (port, pol, t) is the
/// canonical iteration and serialization order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub port: Port,
    pub pol: Polarization,
    pub t: TimeBin,
}

impl Mode {
    pub fn new(port: u16, pol: Polarization, t: i64) -> Self {
        Self {
            port: Port(port),
            pol,
            t: TimeBin(t),
        }
    }

    pub fn with_port(self, port: Port) -> Self {
        Self { port, ..self }
    }

    pub fn with_pol(self, pol: Polarization) -> Self {
        Self { pol, ..self }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.port, self.pol, self.t)
    }
}

/// Formats a real with 15 significant digits. Negative zero prints as zero so
/// equal states serialize identically.
pub fn format_sig15(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.14e}")
}

fn accumulate<K: Ord>(map: &mut BTreeMap<K, C64>, key: K, amp: C64) {
    *map.entry(key).or_insert(C64::new(0.0, 0.0)) += amp;
}

fn prune<K: Ord>(map: &mut BTreeMap<K, C64>) {
    map.retain(|_, a| a.norm() >= AMPLITUDE_EPSILON);
}

/// One photon's wavefunction over modes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SinglePhotonState {
    amps: BTreeMap<Mode, C64>,
}

impl SinglePhotonState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn basis(mode: Mode) -> Self {
        Self::from_entries([(mode, C64::new(1.0, 0.0))])
    }

    /// `jones` placed on one port and time bin.
    pub fn from_jones(port: Port, t: TimeBin, jones: JonesVector) -> Self {
        Self::from_entries(Polarization::ALL.map(|pol| (Mode { port, pol, t }, jones.component(pol))))
    }

    /// Builds a state by summing amplitudes per mode, then pruning.
    pub fn from_entries<I: IntoIterator<Item = (Mode, C64)>>(entries: I) -> Self {
        let mut amps = BTreeMap::new();
        for (m, a) in entries {
            accumulate(&mut amps, m, a);
        }
        prune(&mut amps);
        Self { amps }
    }

    pub fn amplitude(&self, mode: &Mode) -> C64 {
        self.amps.get(mode).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&Mode, &C64)> {
        self.amps.iter()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn squared_norm(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn ports(&self) -> BTreeSet<Port> {
        self.amps.keys().map(|m| m.port).collect()
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::from_entries(self.amps.iter().map(|(m, a)| (*m, a * c)))
    }

    /// Only the amplitudes on `port`.
    pub fn on_port(&self, port: Port) -> Self {
        Self {
            amps: self
                .amps
                .iter()
                .filter(|(m, _)| m.port == port)
                .map(|(m, a)| (*m, *a))
                .collect(),
        }
    }

    /// Inner product <self|other>.
    pub fn inner(&self, other: &SinglePhotonState) -> C64 {
        self.amps
            .iter()
            .filter_map(|(m, a)| other.amps.get(m).map(|b| a.conj() * b))
            .sum()
    }

    /// One `port,pol,t,re,im` line per entry in canonical mode order.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for (m, a) in &self.amps {
            out.push_str(&format!("{},{},{}\n", m, format_sig15(a.re), format_sig15(a.im)));
        }
        out
    }
}

/// Polarization pair of a detected photon pair, in (control, target) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolPair {
    HH,
    HV,
    VH,
    VV,
}

impl PolPair {
    pub const ALL: [PolPair; 4] = [PolPair::HH, PolPair::HV, PolPair::VH, PolPair::VV];

    pub fn new(p1: Polarization, p2: Polarization) -> Self {
        Self::ALL[2 * p1.index() + p2.index()]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn control(self) -> Polarization {
        Polarization::ALL[self.index() / 2]
    }

    pub fn target(self) -> Polarization {
        Polarization::ALL[self.index() % 2]
    }

    pub fn label(self) -> &'static str {
        ["HH", "HV", "VH", "VV"][self.index()]
    }
}

impl fmt::Display for PolPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Two-photon state over (control mode, target mode) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    amps: BTreeMap<(Mode, Mode), C64>,
    arm1_ports: BTreeSet<Port>,
    arm2_ports: BTreeSet<Port>,
}

impl JointState {
    /// Empty state on the given arms.
    pub fn empty(arm1_ports: BTreeSet<Port>, arm2_ports: BTreeSet<Port>) -> Result<Self> {
        if let Some(p) = arm1_ports.intersection(&arm2_ports).next() {
            return Err(Error::Config(format!("port {p} is assigned to both arms")));
        }
        Ok(Self {
            amps: BTreeMap::new(),
            arm1_ports,
            arm2_ports,
        })
    }

    /// Builds a state by summing amplitudes per mode pair, then pruning.
    /// Every mode must sit on a port of its own arm.
    pub fn from_entries<I>(arm1_ports: BTreeSet<Port>, arm2_ports: BTreeSet<Port>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((Mode, Mode), C64)>,
    {
        let mut state = Self::empty(arm1_ports, arm2_ports)?;
        for ((m1, m2), a) in entries {
            if !state.arm1_ports.contains(&m1.port) {
                return Err(Error::Config(format!(
                    "control photon on port {} outside arm 1",
                    m1.port
                )));
            }
            if !state.arm2_ports.contains(&m2.port) {
                return Err(Error::Config(format!(
                    "target photon on port {} outside arm 2",
                    m2.port
                )));
            }
            accumulate(&mut state.amps, (m1, m2), a);
        }
        prune(&mut state.amps);
        Ok(state)
    }

    /// Product state `s1 ⊗ s2`. Both factors must be normalized and use
    /// disjoint ports.
    pub fn tensor(s1: &SinglePhotonState, s2: &SinglePhotonState) -> Result<Self> {
        for (which, s) in [("first", s1), ("second", s2)] {
            let n = s.squared_norm();
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Precondition(format!(
                    "{which} factor has squared norm {n}, expected 1"
                )));
            }
        }
        Self::tensor_unchecked(s1, s2)
    }

    /// Product state without the normalization precondition.
    pub fn tensor_unchecked(s1: &SinglePhotonState, s2: &SinglePhotonState) -> Result<Self> {
        let (p1, p2) = (s1.ports(), s2.ports());
        let entries: Vec<_> = s1
            .iter()
            .flat_map(|(m1, a1)| s2.iter().map(move |(m2, a2)| ((*m1, *m2), a1 * a2)))
            .collect();
        Self::from_entries(p1, p2, entries)
    }

    pub fn arm1_ports(&self) -> &BTreeSet<Port> {
        &self.arm1_ports
    }

    pub fn arm2_ports(&self) -> &BTreeSet<Port> {
        &self.arm2_ports
    }

    pub fn amplitude(&self, m1: &Mode, m2: &Mode) -> C64 {
        self.amps.get(&(*m1, *m2)).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&(Mode, Mode), &C64)> {
        self.amps.iter()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn squared_norm(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.with_amps(self.amps.iter().map(|(k, a)| (*k, a * c)).collect());
        prune(&mut out.amps);
        out
    }

    /// The state rescaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.squared_norm();
        if n <= 0.0 {
            return Err(Error::EmptyOutcome("cannot normalize a zero state".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// Keeps entries satisfying `keep`; arm port sets are unchanged.
    pub fn filtered<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(&Mode, &Mode) -> bool,
    {
        self.with_amps(
            self.amps
                .iter()
                .filter(|((m1, m2), _)| keep(m1, m2))
                .map(|(k, a)| (*k, *a))
                .collect(),
        )
    }

    /// Inner product <self|other>.
    pub fn inner(&self, other: &JointState) -> C64 {
        self.amps
            .iter()
            .filter_map(|(k, a)| other.amps.get(k).map(|b| a.conj() * b))
            .sum()
    }

    /// Applies a linear single-photon map to the control photon.
    /// `extra_ports` are ports the map may route amplitude into.
    pub fn map_arm1<F>(&self, extra_ports: &BTreeSet<Port>, f: F) -> Result<Self>
    where
        F: Fn(&SinglePhotonState) -> Result<SinglePhotonState>,
    {
        let mut by_target: BTreeMap<Mode, Vec<(Mode, C64)>> = BTreeMap::new();
        for ((m1, m2), a) in &self.amps {
            by_target.entry(*m2).or_default().push((*m1, *a));
        }
        let arm1: BTreeSet<Port> = self.arm1_ports.union(extra_ports).copied().collect();
        let mut entries = Vec::new();
        for (m2, col) in by_target {
            let out = f(&SinglePhotonState::from_entries(col))?;
            entries.extend(out.iter().map(|(m1, a)| ((*m1, m2), *a)));
        }
        Self::from_entries(arm1, self.arm2_ports.clone(), entries)
    }

    /// Applies a linear single-photon map to the target photon.
    pub fn map_arm2<F>(&self, extra_ports: &BTreeSet<Port>, f: F) -> Result<Self>
    where
        F: Fn(&SinglePhotonState) -> Result<SinglePhotonState>,
    {
        let mut by_control: BTreeMap<Mode, Vec<(Mode, C64)>> = BTreeMap::new();
        for ((m1, m2), a) in &self.amps {
            by_control.entry(*m1).or_default().push((*m2, *a));
        }
        let arm2: BTreeSet<Port> = self.arm2_ports.union(extra_ports).copied().collect();
        let mut entries = Vec::new();
        for (m1, row) in by_control {
            let out = f(&SinglePhotonState::from_entries(row))?;
            entries.extend(out.iter().map(|(m2, a)| ((m1, *m2), *a)));
        }
        Self::from_entries(self.arm1_ports.clone(), arm2, entries)
    }

    /// The state as seen by a start/stop coincidence counter fed by a CW pump.
    ///
    /// The pair emission time is unknown, so branches that differ only by a
    /// common shift of both arrival times are indistinguishable and add
    /// coherently. Each entry is re-labelled to `(t1 - t2, 0)`.
    pub fn relative_time_view(&self) -> Self {
        let mut amps = BTreeMap::new();
        for ((m1, m2), a) in &self.amps {
            let dt = m1.t.0 - m2.t.0;
            let k1 = Mode { t: TimeBin(dt), ..*m1 };
            let k2 = Mode { t: TimeBin(0), ..*m2 };
            accumulate(&mut amps, (k1, k2), *a);
        }
        prune(&mut amps);
        self.with_amps(amps)
    }

    /// Polarization-qubit amplitudes `[a_HH, a_HV, a_VH, a_VV]`.
    ///
    /// Works on the relative-time view; fails unless every entry shares one
    /// (port, port, Δt) label, since otherwise the polarization qubits alone
    /// are not in a pure state.
    pub fn polarization_amplitudes(&self) -> Result<[C64; 4]> {
        let view = self.relative_time_view();
        let mut out = [C64::new(0.0, 0.0); 4];
        let mut spatial: Option<(Port, Port, i64)> = None;
        for ((m1, m2), a) in view.iter() {
            let idx = PolPair::new(m1.pol, m2.pol).index();
            let key = (m1.port, m2.port, m1.t.0);
            match spatial {
                None => spatial = Some(key),
                Some(k) if k == key => {}
                Some(_) => {
                    return Err(Error::Precondition(
                        "polarization qubits entangled with path or arrival time".into(),
                    ))
                }
            }
            out[idx] += a;
        }
        Ok(out)
    }

    /// One `port1,pol1,t1,port2,pol2,t2,re,im` line per entry in canonical order.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for ((m1, m2), a) in &self.amps {
            out.push_str(&format!(
                "{},{},{},{}\n",
                m1,
                m2,
                format_sig15(a.re),
                format_sig15(a.im)
            ));
        }
        out
    }

    fn with_amps(&self, amps: BTreeMap<(Mode, Mode), C64>) -> Self {
        Self {
            amps,
            arm1_ports: self.arm1_ports.clone(),
            arm2_ports: self.arm2_ports.clone(),
        }
    }
}

/// `|<a|b>|^2` for two normalized states. Invariant under a global phase on
/// either argument.
pub fn overlap_modulus_sq(a: &JointState, b: &JointState) -> Result<f64> {
    for (which, s) in [("first", a), ("second", b)] {
        let n = s.squared_norm();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Precondition(format!(
                "{which} state has squared norm {n}, expected 1"
            )));
        }
    }
    Ok(a.inner(b).norm_sqr())
}
