//! Ideal linear-optical elements acting on single-photon states.
//!
//! Conventions: the 50/50 beam splitter is symmetric with reflection phase
//! `i`; the half-wave plate is the real Jones matrix
//! `[[cos 2θ, sin 2θ], [sin 2θ, -cos 2θ]]` with the fast axis at θ from
//! horizontal; angles are taken in degrees at the interface.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::state::{Mode, Polarization, Port, SinglePhotonState, C64};

pub type JonesMatrix = Matrix2<C64>;

/// Jones matrix of a half-wave plate with its fast axis at `angle_deg`.
pub fn hwp_matrix(angle_deg: f64) -> JonesMatrix {
    let two_theta = 2.0 * angle_deg.to_radians();
    let (s, c) = two_theta.sin_cos();
    Matrix2::new(C64::new(c, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-c, 0.0))
}

fn distinct(ports: &[Port]) -> Result<()> {
    for (i, a) in ports.iter().enumerate() {
        if ports[i + 1..].contains(a) {
            return Err(Error::Precondition(format!("port {a} used twice in one element")));
        }
    }
    Ok(())
}

/// 50/50 non-polarizing beam splitter between `port_a` and `port_b`.
pub fn apply_bs(state: &SinglePhotonState, port_a: Port, port_b: Port) -> Result<SinglePhotonState> {
    distinct(&[port_a, port_b])?;
    let t = C64::new(FRAC_1_SQRT_2, 0.0);
    let r = C64::new(0.0, FRAC_1_SQRT_2);
    let out = state.iter().flat_map(|(m, a)| {
        let (m, a) = (*m, *a);
        let other = if m.port == port_a {
            Some(port_b)
        } else if m.port == port_b {
            Some(port_a)
        } else {
            None
        };
        match other {
            Some(o) => vec![(m, a * t), (m.with_port(o), a * r)],
            None => vec![(m, a)],
        }
    });
    Ok(SinglePhotonState::from_entries(out))
}

/// Polarizing beam splitter: exchanges `H@in_port ↔ H@h_port` and
/// `V@in_port ↔ V@v_port`. The same element splits a beam by polarization
/// and, used the other way round, recombines the two rails.
pub fn apply_pbs(state: &SinglePhotonState, in_port: Port, h_port: Port, v_port: Port) -> Result<SinglePhotonState> {
    distinct(&[in_port, h_port, v_port])?;
    let route = |m: Mode| -> Mode {
        let partner = match m.pol {
            Polarization::H => h_port,
            Polarization::V => v_port,
        };
        if m.port == in_port {
            m.with_port(partner)
        } else if m.port == partner {
            m.with_port(in_port)
        } else {
            m
        }
    };
    Ok(SinglePhotonState::from_entries(
        state.iter().map(|(m, a)| (route(*m), *a)),
    ))
}

/// Delays everything on `port` by `delay_bins` and multiplies it by `e^{i·phase_rad}`.
pub fn apply_delay(state: &SinglePhotonState, port: Port, delay_bins: u32, phase_rad: f64) -> SinglePhotonState {
    let phase = C64::from_polar(1.0, phase_rad);
    SinglePhotonState::from_entries(state.iter().map(|(m, a)| {
        if m.port == port {
            (
                Mode {
                    t: m.t + i64::from(delay_bins),
                    ..*m
                },
                a * phase,
            )
        } else {
            (*m, *a)
        }
    }))
}

/// Half-wave plate on `port`, acting on the (H, V) pair of every time bin.
pub fn apply_hwp(state: &SinglePhotonState, port: Port, angle_deg: f64) -> SinglePhotonState {
    apply_jones(state, port, &hwp_matrix(angle_deg))
}

/// Arbitrary 2×2 Jones matrix on `port`.
pub fn apply_jones(state: &SinglePhotonState, port: Port, m: &JonesMatrix) -> SinglePhotonState {
    let out = state.iter().flat_map(|(mode, a)| {
        let (mode, a) = (*mode, *a);
        if mode.port != port {
            return vec![(mode, a)];
        }
        // column of the input polarization
        let col = mode.pol.index();
        Polarization::ALL
            .iter()
            .map(|p| (mode.with_pol(*p), m[(p.index(), col)] * a))
            .collect()
    });
    SinglePhotonState::from_entries(out)
}

/// One optical element, as a value that can be applied or inspected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElementAction {
    Bs {
        port_a: Port,
        port_b: Port,
    },
    Pbs {
        in_port: Port,
        h_port: Port,
        v_port: Port,
    },
    Hwp {
        port: Port,
        angle_deg: f64,
    },
    Delay {
        port: Port,
        delay_bins: u32,
        phase_rad: f64,
    },
}

impl ElementAction {
    pub fn apply(&self, state: &SinglePhotonState) -> Result<SinglePhotonState> {
        match *self {
            ElementAction::Bs { port_a, port_b } => apply_bs(state, port_a, port_b),
            ElementAction::Pbs {
                in_port,
                h_port,
                v_port,
            } => apply_pbs(state, in_port, h_port, v_port),
            ElementAction::Hwp { port, angle_deg } => Ok(apply_hwp(state, port, angle_deg)),
            ElementAction::Delay {
                port,
                delay_bins,
                phase_rad,
            } => Ok(apply_delay(state, port, delay_bins, phase_rad)),
        }
    }

    pub fn ports(&self) -> Vec<Port> {
        match *self {
            ElementAction::Bs { port_a, port_b } => vec![port_a, port_b],
            ElementAction::Pbs {
                in_port,
                h_port,
                v_port,
            } => vec![in_port, h_port, v_port],
            ElementAction::Hwp { port, .. } | ElementAction::Delay { port, .. } => vec![port],
        }
    }
}

/// Applies a sequence of elements in order.
pub fn apply_all(state: &SinglePhotonState, elements: &[ElementAction]) -> Result<SinglePhotonState> {
    elements.iter().try_fold(state.clone(), |s, e| e.apply(&s))
}

/// Largest entry of `|U†U - 1|` over the given basis modes, where `U` is the
/// element lifted to the full mode space. Zero (to rounding) means the
/// element is an isometry on that window.
pub fn isometry_defect(element: &ElementAction, basis: &[Mode]) -> Result<f64> {
    let images = basis
        .iter()
        .map(|m| element.apply(&SinglePhotonState::basis(*m)))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for (i, a) in images.iter().enumerate() {
        for (j, b) in images.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.inner(b) - C64::new(target, 0.0)).norm());
        }
    }
    Ok(worst)
}

/// Every mode with `port ∈ ports`, both polarizations and `t ∈ times`.
pub fn basis_window(ports: &[u16], times: std::ops::Range<i64>) -> Vec<Mode> {
    let mut out = Vec::new();
    for &p in ports {
        for pol in Polarization::ALL {
            for t in times.clone() {
                out.push(Mode::new(p, pol, t));
            }
        }
    }
    out
}
