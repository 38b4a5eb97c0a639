//! The two interferometers, the CNOT built from them, and cascades of CNOTs.
//!
//! Rail layout of one gate (defaults in brackets):
//!
//! * control arm: `control_io` [0] carries the photon in and out; the first
//!   PBS sends H to `control_short` [1] and V to `control_long` [2], the
//!   long rail gets the delay and θ1, and the same PBS recombines onto
//!   `control_io`.
//! * target arm: a BS mixes `target_io` [10] with `target_aux` [11]; the aux
//!   rail is the long path (HWP at 45°, delay, phase); a second BS between
//!   the same rails recombines. `target_io` is the detector output and
//!   `target_aux` the discarded output.
//!
//! θ2 is the total extra phase of the long target path, including the `i·i`
//! picked up at the two BS reflections, so the delay element on the aux rail
//! carries `θ2 − π`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;

use crate::elements::{apply_all, ElementAction};
use crate::error::{Error, Result};
use crate::state::{JointState, Port, SinglePhotonState};

/// Upper bound on cascade length accepted by the timing check (2^(2n) branch pairs).
pub const MAX_CASCADE_GATES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GatePorts {
    pub control_io: Port,
    pub control_short: Port,
    pub control_long: Port,
    pub target_io: Port,
    pub target_aux: Port,
}

impl Default for GatePorts {
    fn default() -> Self {
        Self {
            control_io: Port(0),
            control_short: Port(1),
            control_long: Port(2),
            target_io: Port(10),
            target_aux: Port(11),
        }
    }
}

impl GatePorts {
    fn control_set(&self) -> BTreeSet<Port> {
        [self.control_io, self.control_short, self.control_long].into()
    }

    fn target_set(&self) -> BTreeSet<Port> {
        [self.target_io, self.target_aux].into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateConfig {
    /// Long-minus-short path difference in time bins (same in both arms).
    pub delay_bins: u32,
    pub theta1: f64,
    pub theta2: f64,
    pub ports: GatePorts,
}

impl GateConfig {
    pub fn new(delay_bins: u32, theta1: f64, theta2: f64) -> Result<Self> {
        if delay_bins < 1 {
            return Err(Error::Config("delay_bins must be at least 1".into()));
        }
        Ok(Self {
            delay_bins,
            theta1,
            theta2,
            ports: GatePorts::default(),
        })
    }

    pub fn with_ports(mut self, ports: GatePorts) -> Self {
        self.ports = ports;
        self
    }

    /// Output rail of the control interferometer (feeds D1).
    pub fn detector_port_1(&self) -> Port {
        self.ports.control_io
    }

    /// Output rail of the target interferometer (feeds D2).
    pub fn detector_port_2(&self) -> Port {
        self.ports.target_io
    }

    pub fn total_phase(&self) -> f64 {
        self.theta1 + self.theta2
    }

    pub fn interferometer1_elements(&self) -> [ElementAction; 3] {
        let p = &self.ports;
        let pbs = ElementAction::Pbs {
            in_port: p.control_io,
            h_port: p.control_short,
            v_port: p.control_long,
        };
        [
            pbs,
            ElementAction::Delay {
                port: p.control_long,
                delay_bins: self.delay_bins,
                phase_rad: self.theta1,
            },
            pbs,
        ]
    }

    pub fn interferometer2_elements(&self) -> [ElementAction; 4] {
        let p = &self.ports;
        let bs = ElementAction::Bs {
            port_a: p.target_io,
            port_b: p.target_aux,
        };
        [
            bs,
            ElementAction::Hwp {
                port: p.target_aux,
                angle_deg: 45.0,
            },
            ElementAction::Delay {
                port: p.target_aux,
                delay_bins: self.delay_bins,
                phase_rad: self.theta2 - PI,
            },
            bs,
        ]
    }
}

fn require_on_port(state: &SinglePhotonState, port: Port, arm: &str) -> Result<()> {
    if let Some((m, _)) = state.iter().find(|(m, _)| m.port != port) {
        return Err(Error::Precondition(format!(
            "{arm} input must be on port {port}, found amplitude on port {}",
            m.port
        )));
    }
    Ok(())
}

/// Control-qubit interferometer: H takes the short path, V the long one.
pub fn interferometer1(state: &SinglePhotonState, cfg: &GateConfig) -> Result<SinglePhotonState> {
    require_on_port(state, cfg.ports.control_io, "interferometer 1")?;
    apply_all(state, &cfg.interferometer1_elements())
}

/// Target-qubit interferometer: unbalanced BS Mach-Zehnder with a 90° polarization
/// rotation in the long arm.
pub fn interferometer2(state: &SinglePhotonState, cfg: &GateConfig) -> Result<SinglePhotonState> {
    require_on_port(state, cfg.ports.target_io, "interferometer 2")?;
    apply_all(state, &cfg.interferometer2_elements())
}

/// Sends the control photon through interferometer 1 and the target photon
/// through interferometer 2. Nothing is discarded.
pub fn cnot_apply(joint: &JointState, cfg: &GateConfig) -> Result<JointState> {
    let p = &cfg.ports;
    let after1 = joint.map_arm1(&p.control_set(), |s| {
        require_on_port(s, p.control_io, "interferometer 1")?;
        apply_all(s, &cfg.interferometer1_elements())
    })?;
    after1.map_arm2(&p.target_set(), |s| {
        require_on_port(s, p.target_io, "interferometer 2")?;
        apply_all(s, &cfg.interferometer2_elements())
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeConfig {
    pub gates: Vec<GateConfig>,
    pub window_bins: u32,
}

impl CascadeConfig {
    pub fn new(gates: Vec<GateConfig>, window_bins: u32) -> Result<Self> {
        let min_delay = gates
            .iter()
            .map(|g| g.delay_bins)
            .min()
            .ok_or_else(|| Error::Config("cascade needs at least one gate".into()))?;
        if window_bins == 0 {
            return Err(Error::Config("window_bins must be at least 1".into()));
        }
        if window_bins >= min_delay {
            return Err(Error::Config(format!(
                "window of {window_bins} bins is not below the shortest gate delay ({min_delay} bins)"
            )));
        }
        Ok(Self { gates, window_bins })
    }

    /// Gates with the given delays and zero phases. Each stage gets its own
    /// discard rail on the target arm so earlier discarded light is never
    /// fed back into a later beam splitter.
    pub fn from_delays(delays: &[u32], window_bins: u32) -> Result<Self> {
        let gates = delays
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let aux = u16::try_from(11 + k).map_err(|_| Error::Config("too many cascade stages".into()))?;
                Ok(GateConfig::new(d, 0.0, 0.0)?.with_ports(GatePorts {
                    target_aux: Port(aux),
                    ..GatePorts::default()
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(gates, window_bins)
    }

    pub fn delays(&self) -> Vec<u32> {
        self.gates.iter().map(|g| g.delay_bins).collect()
    }
}

/// Feeds each gate's detector outputs into the next gate. Time bins
/// accumulate across stages.
pub fn cascade_apply(joint: &JointState, cascade: &CascadeConfig) -> Result<JointState> {
    cascade.gates.iter().try_fold(joint.clone(), |state, gate| {
        // amplitude already on a discard rail stays where it is
        let (p1, p2) = (gate.detector_port_1(), gate.detector_port_2());
        let live = state.filtered(|m1, m2| m1.port == p1 && m2.port == p2);
        let dead = state.filtered(|m1, m2| !(m1.port == p1 && m2.port == p2));
        let out = cnot_apply(&live, gate)?;
        let entries: Vec<_> = out.iter().chain(dead.iter()).map(|(k, a)| (*k, *a)).collect();
        let arm1 = out.arm1_ports().union(dead.arm1_ports()).copied().collect();
        let arm2 = out.arm2_ports().union(dead.arm2_ports()).copied().collect();
        JointState::from_entries(arm1, arm2, entries)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathChoice {
    Short,
    Long,
}

/// One photon's path choice at every gate of a cascade, packed as a bit mask
/// (bit k set = long path at gate k).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Branch {
    pub mask: u32,
    pub gates: usize,
}

impl Branch {
    pub fn choices(&self) -> Vec<PathChoice> {
        (0..self.gates)
            .map(|k| {
                if self.mask >> k & 1 == 1 {
                    PathChoice::Long
                } else {
                    PathChoice::Short
                }
            })
            .collect()
    }

    pub fn arrival_bins(&self, delays: &[u32]) -> i64 {
        delays
            .iter()
            .enumerate()
            .filter(|(k, _)| self.mask >> k & 1 == 1)
            .map(|(_, &d)| i64::from(d))
            .sum()
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.choices() {
            f.write_str(match c {
                PathChoice::Short => "S",
                PathChoice::Long => "L",
            })?;
        }
        Ok(())
    }
}

/// A pair of path histories that the gate logic needs rejected but that
/// arrive within the coincidence window of each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimingConflict {
    pub photon1: Branch,
    pub photon2: Branch,
    /// Photon-1 arrival minus photon-2 arrival, in bins.
    pub dt_bins: i64,
}

impl fmt::Display for TimingConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "photon1={} photon2={} dt={}",
            self.photon1, self.photon2, self.dt_bins
        )
    }
}

/// Lists every pair of unequal path histories (photon 1 vs photon 2) whose
/// arrival times differ by less than the window. Only equal histories
/// (both photons short or both long at every gate) are meant to pass the
/// coincidence filter, so an empty result means the cascade is safe.
pub fn validate_cascade_timing(cascade: &CascadeConfig) -> Result<Vec<TimingConflict>> {
    let gates = cascade.gates.len();
    if gates == 0 {
        return Err(Error::Config("cascade needs at least one gate".into()));
    }
    if gates > MAX_CASCADE_GATES {
        return Err(Error::Config(format!(
            "timing check supports at most {MAX_CASCADE_GATES} gates, got {gates}"
        )));
    }
    let delays = cascade.delays();
    let min_delay = delays.iter().copied().min().unwrap_or(0);
    if cascade.window_bins >= min_delay {
        return Err(Error::Config(format!(
            "window of {} bins is not below the shortest gate delay ({min_delay} bins)",
            cascade.window_bins
        )));
    }

    let mut by_arrival: BTreeMap<i64, Vec<Branch>> = BTreeMap::new();
    for mask in 0..(1u32 << gates) {
        let b = Branch { mask, gates };
        by_arrival.entry(b.arrival_bins(&delays)).or_default().push(b);
    }

    let w = i64::from(cascade.window_bins);
    let mut conflicts = Vec::new();
    for (&t1, group1) in &by_arrival {
        for (&t2, group2) in by_arrival.range(t1 - w + 1..t1 + w) {
            for b1 in group1 {
                for b2 in group2 {
                    if b1 != b2 {
                        conflicts.push(TimingConflict {
                            photon1: *b1,
                            photon2: *b2,
                            dt_bins: t1 - t2,
                        });
                    }
                }
            }
        }
    }
    conflicts.sort();
    Ok(conflicts)
}
