//! Planar (surge, sway, yaw) rigid-body model of the vehicle with a
//! three-thruster actuation layout: one surge thruster on the centreline and
//! two lateral thrusters fore and aft of the centre of gravity.
//!
//! Equations of motion follow the usual 3-DOF marine-craft form
//! `(M_RB + M_A)·ν̇ = τ − C(ν)·ν − D(ν)·ν` with diagonal mass and damping
//! matrices, integrated with semi-implicit Euler.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{DockError, Result};

/// Wrap an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(DockError::Domain(format!("cannot wrap non-finite angle {a}")));
    }
    Ok(wrap_unchecked(a))
}

pub(crate) fn wrap_unchecked(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    /// North position (m).
    pub x: f64,
    /// East position (m).
    pub y: f64,
    /// Yaw (rad), kept in `[-π, π)`.
    pub psi: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Pose2D {
            x,
            y,
            psi: wrap_unchecked(psi),
        }
    }
}

/// Body-fixed velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

/// Thruster rotational speeds normalised so that 1.0 is `n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThrusterState {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

impl ThrusterState {
    pub fn new(n1: f64, n2: f64, n3: f64) -> Self {
        ThrusterState { n1, n2, n3 }.clamped()
    }

    pub fn clamped(self) -> Self {
        ThrusterState {
            n1: self.n1.clamp(-1.0, 1.0),
            n2: self.n2.clamp(-1.0, 1.0),
            n3: self.n3.clamp(-1.0, 1.0),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.n1, self.n2, self.n3]
    }
}

/// Net body-frame force and moment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub x: f64,
    pub y: f64,
    pub n: f64,
}

/// Hydrodynamic, actuator, and integration parameters.
///
/// Added-mass terms use the negative sign convention (`xu_dot < 0` adds
/// mass). Damping terms are positive magnitudes; the resulting force on
/// each axis is `-(lin + quad·|w|)·w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroParams {
    pub m: f64,
    pub iz: f64,
    pub xu_dot: f64,
    pub yv_dot: f64,
    pub nr_dot: f64,
    pub xu: f64,
    pub yv: f64,
    pub nr: f64,
    pub xuu: f64,
    pub yvv: f64,
    pub nrr: f64,
    /// Thrust per unit `n·|n|` with `n` in rad/s.
    pub k_t: f64,
    /// Rotational speed corresponding to a normalised command of 1.0 (rad/s).
    pub n_max: f64,
    /// Lateral offset of the surge thruster (m); zero on the centreline.
    pub l1: f64,
    /// Longitudinal arms of the two lateral thrusters (m), `l3 = -l2` for a
    /// symmetric layout.
    pub l2: f64,
    pub l3: f64,
    /// Thruster first-order lag time constant (s).
    pub tau_n: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub r_max: f64,
    /// Integration step per environment step (s).
    pub dt: f64,
}

impl Default for HydroParams {
    fn default() -> Self {
        let m = 60.0;
        let iz = 8.0;
        HydroParams {
            m,
            iz,
            xu_dot: -0.2 * m,
            yv_dot: -0.6 * m,
            nr_dot: -0.3 * iz,
            xu: 15.0,
            yv: 40.0,
            nr: 10.0,
            xuu: 10.0,
            yvv: 60.0,
            nrr: 15.0,
            k_t: 0.004,
            n_max: 100.0,
            l1: 0.0,
            l2: 0.5,
            l3: -0.5,
            tau_n: 0.3,
            u_max: 2.0,
            v_max: 1.0,
            r_max: 1.0,
            dt: 0.2,
        }
    }
}

impl HydroParams {
    /// Check physical constraints; errors name the dotted key under `prefix`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}.{k}");
        let all = [
            ("m", self.m),
            ("iz", self.iz),
            ("xu_dot", self.xu_dot),
            ("yv_dot", self.yv_dot),
            ("nr_dot", self.nr_dot),
            ("xu", self.xu),
            ("yv", self.yv),
            ("nr", self.nr),
            ("xuu", self.xuu),
            ("yvv", self.yvv),
            ("nrr", self.nrr),
            ("k_t", self.k_t),
            ("n_max", self.n_max),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("tau_n", self.tau_n),
            ("u_max", self.u_max),
            ("v_max", self.v_max),
            ("r_max", self.r_max),
            ("dt", self.dt),
        ];
        for (name, value) in all {
            if !value.is_finite() {
                return Err(DockError::config(key(name), "must be finite"));
            }
        }
        let positive = [
            ("m", self.m),
            ("iz", self.iz),
            ("k_t", self.k_t),
            ("n_max", self.n_max),
            ("tau_n", self.tau_n),
            ("u_max", self.u_max),
            ("v_max", self.v_max),
            ("r_max", self.r_max),
            ("dt", self.dt),
        ];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(DockError::config(key(name), "must be > 0"));
            }
        }
        for (name, value) in [
            ("xu", self.xu),
            ("yv", self.yv),
            ("nr", self.nr),
            ("xuu", self.xuu),
            ("yvv", self.yvv),
            ("nrr", self.nrr),
        ] {
            if value < 0.0 {
                return Err(DockError::config(key(name), "damping magnitude must be >= 0"));
            }
        }
        for (name, value) in [
            ("xu_dot", self.xu_dot),
            ("yv_dot", self.yv_dot),
            ("nr_dot", self.nr_dot),
        ] {
            if value > 0.0 {
                return Err(DockError::config(key(name), "added mass uses the negative convention"));
            }
        }
        Ok(())
    }

    fn m11(&self) -> f64 {
        self.m - self.xu_dot
    }

    fn m22(&self) -> f64 {
        self.m - self.yv_dot
    }

    fn m33(&self) -> f64 {
        self.iz - self.nr_dot
    }
}

/// Map thruster speeds to the body wrench with the quadratic thrust law.
pub fn allocate(thr: &ThrusterState, params: &HydroParams) -> Wrench {
    let gain = params.k_t * params.n_max * params.n_max;
    let f1 = gain * thr.n1 * thr.n1.abs();
    let f2 = gain * thr.n2 * thr.n2.abs();
    let f3 = gain * thr.n3 * thr.n3.abs();
    Wrench {
        x: f1,
        y: f2 + f3,
        n: -params.l1 * f1 + params.l2 * f2 + params.l3 * f3,
    }
}

/// Advance the vehicle by one step of length `dt`.
///
/// The thruster lag is applied first, then the body accelerations are
/// evaluated at the current velocity and the pose is integrated with the
/// updated velocity rotated by the pre-step heading.
pub fn step_dynamics(
    pose: &Pose2D,
    vel: &BodyVelocity,
    thr: &ThrusterState,
    cmd: &ThrusterState,
    params: &HydroParams,
    dt: f64,
) -> Result<(Pose2D, BodyVelocity, ThrusterState)> {
    if !(dt > 0.0) {
        return Err(DockError::Domain(format!("dt must be > 0, got {dt}")));
    }
    let lag = (dt / params.tau_n).min(1.0);
    let thr_next = ThrusterState {
        n1: thr.n1 + lag * (cmd.n1 - thr.n1),
        n2: thr.n2 + lag * (cmd.n2 - thr.n2),
        n3: thr.n3 + lag * (cmd.n3 - thr.n3),
    }
    .clamped();

    let tau = allocate(&thr_next, params);
    let (m11, m22, m33) = (params.m11(), params.m22(), params.m33());
    let BodyVelocity { u, v, r } = *vel;

    let damp_u = (params.xu + params.xuu * u.abs()) * u;
    let damp_v = (params.yv + params.yvv * v.abs()) * v;
    let damp_r = (params.nr + params.nrr * r.abs()) * r;

    let u_dot = (tau.x + m22 * v * r - damp_u) / m11;
    let v_dot = (tau.y - m11 * u * r - damp_v) / m22;
    let r_dot = (tau.n - (m22 - m11) * u * v - damp_r) / m33;

    let vel_next = BodyVelocity {
        u: (u + dt * u_dot).clamp(-params.u_max, params.u_max),
        v: (v + dt * v_dot).clamp(-params.v_max, params.v_max),
        r: (r + dt * r_dot).clamp(-params.r_max, params.r_max),
    };

    let (s, c) = pose.psi.sin_cos();
    let x = pose.x + dt * (c * vel_next.u - s * vel_next.v);
    let y = pose.y + dt * (s * vel_next.u + c * vel_next.v);
    let psi = pose.psi + dt * vel_next.r;

    let finite = [x, y, psi, vel_next.u, vel_next.v, vel_next.r]
        .iter()
        .all(|value| value.is_finite());
    if !finite {
        return Err(DockError::Diverged(format!(
            "pose=({x}, {y}, {psi}) vel=({}, {}, {}) thr=({}, {}, {})",
            vel_next.u, vel_next.v, vel_next.r, thr_next.n1, thr_next.n2, thr_next.n3
        )));
    }

    Ok((
        Pose2D {
            x,
            y,
            psi: wrap_unchecked(psi),
        },
        vel_next,
        thr_next,
    ))
}

/// Rigid-body kinetic energy surrogate `½(m·u² + m·v² + Iz·r²)`.
pub fn kinetic_energy(vel: &BodyVelocity, params: &HydroParams) -> f64 {
    0.5 * (params.m * vel.u * vel.u + params.m * vel.v * vel.v + params.iz * vel.r * vel.r)
}
