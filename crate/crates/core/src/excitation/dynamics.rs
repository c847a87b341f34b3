//! Fixed-step RK4 integration of the driven two-level system in the frame
//! rotating at the transition frequency:
//!
//! H(t) = Σⱼ Ωⱼ(t)/2 · (e^{iΔⱼt}|g⟩⟨e| + h.c.)
//!
//! with optional radiative decay (Lindblad, rate 1/T₁).

use num_complex::Complex64 as C64;

use super::{DriveConfig, EmitterParams, ResolvedPulse};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsMode {
    /// Schrödinger equation for the amplitudes (no decay).
    Unitary,
    /// Master equation with spontaneous emission at rate 1/T₁.
    Lindblad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub dt_ps: f64,
    /// Keep every n-th step in the trajectory (the final state is always kept).
    pub record_every: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { dt_ps: 0.002, record_every: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantumState {
    /// Amplitudes (c_g, c_e).
    Pure([C64; 2]),
    /// ρ in the (g, e) basis.
    Mixed([[C64; 2]; 2]),
}

impl QuantumState {
    pub fn ground() -> Self {
        QuantumState::Pure([C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
    }

    pub fn excited_population(&self) -> f64 {
        match self {
            QuantumState::Pure(c) => c[1].norm_sqr(),
            QuantumState::Mixed(r) => r[1][1].re,
        }
    }

    /// ‖ψ‖² or tr ρ.
    pub fn norm(&self) -> f64 {
        match self {
            QuantumState::Pure(c) => c[0].norm_sqr() + c[1].norm_sqr(),
            QuantumState::Mixed(r) => r[0][0].re + r[1][1].re,
        }
    }

    /// Smallest eigenvalue of ρ (0 for pure states up to rounding).
    pub fn min_eigenvalue(&self) -> f64 {
        let r = self.density_matrix();
        let a = r[0][0].re;
        let d = r[1][1].re;
        let b2 = r[0][1].norm_sqr();
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b2).sqrt();
        mean - half_gap
    }

    pub fn density_matrix(&self) -> [[C64; 2]; 2] {
        match *self {
            QuantumState::Pure([g, e]) => [[g * g.conj(), g * e.conj()], [e * g.conj(), e * e.conj()]],
            QuantumState::Mixed(r) => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub time_ps: f64,
    pub state: QuantumState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn final_state(&self) -> &QuantumState {
        &self.points.last().expect("trajectory is never empty").state
    }

    pub fn final_occupation(&self) -> f64 {
        self.final_state().excited_population()
    }
}

struct Coupling<'a> {
    pulses: &'a [ResolvedPulse],
}

impl Coupling<'_> {
    /// Off-diagonal element H_ge(t) = Σ Ωⱼ(t)/2 · e^{iΔⱼt}.
    #[inline]
    fn h_ge(&self, t: f64) -> C64 {
        self.pulses.iter().map(|p| C64::from_polar(0.5 * p.rabi(t), p.detuning * t)).sum()
    }
}

fn pure_rhs(h: C64, c: [C64; 2]) -> [C64; 2] {
    let mi = C64::new(0.0, -1.0);
    [mi * h * c[1], mi * h.conj() * c[0]]
}

fn mixed_rhs(h: C64, gamma: f64, r: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mi = C64::new(0.0, -1.0);
    let hm = [[C64::new(0.0, 0.0), h], [h.conj(), C64::new(0.0, 0.0)]];
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut comm = C64::new(0.0, 0.0);
            for k in 0..2 {
                comm += hm[i][k] * r[k][j] - r[i][k] * hm[k][j];
            }
            out[i][j] = mi * comm;
        }
    }
    let ree = r[1][1];
    out[0][0] += gamma * ree;
    out[1][1] -= gamma * ree;
    out[0][1] -= 0.5 * gamma * r[0][1];
    out[1][0] -= 0.5 * gamma * r[1][0];
    out
}

fn axpy2(y: &[C64; 2], a: f64, k: &[C64; 2]) -> [C64; 2] {
    [y[0] + a * k[0], y[1] + a * k[1]]
}

fn axpy22(y: &[[C64; 2]; 2], a: f64, k: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut o = *y;
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] += a * k[i][j];
        }
    }
    o
}

fn step(state: QuantumState, coupling: &Coupling, gamma: f64, t: f64, dt: f64) -> QuantumState {
    let h1 = coupling.h_ge(t);
    let h2 = coupling.h_ge(t + 0.5 * dt);
    let h3 = coupling.h_ge(t + dt);
    match state {
        QuantumState::Pure(c) => {
            let k1 = pure_rhs(h1, c);
            let k2 = pure_rhs(h2, axpy2(&c, 0.5 * dt, &k1));
            let k3 = pure_rhs(h2, axpy2(&c, 0.5 * dt, &k2));
            let k4 = pure_rhs(h3, axpy2(&c, dt, &k3));
            let mut n = c;
            for i in 0..2 {
                n[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            QuantumState::Pure(n)
        }
        QuantumState::Mixed(r) => {
            let k1 = mixed_rhs(h1, gamma, &r);
            let k2 = mixed_rhs(h2, gamma, &axpy22(&r, 0.5 * dt, &k1));
            let k3 = mixed_rhs(h2, gamma, &axpy22(&r, 0.5 * dt, &k2));
            let k4 = mixed_rhs(h3, gamma, &axpy22(&r, dt, &k3));
            let mut n = r;
            for i in 0..2 {
                for j in 0..2 {
                    n[i][j] += dt / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
                }
            }
            QuantumState::Mixed(n)
        }
    }
}

fn time_window(pulses: &[ResolvedPulse]) -> (f64, f64) {
    let start = pulses.iter().map(|p| p.center - p.half_window()).fold(f64::INFINITY, f64::min);
    let end = pulses.iter().map(|p| p.center + p.half_window()).fold(f64::NEG_INFINITY, f64::max);
    (start, end)
}

fn check_inputs(emitter: &EmitterParams, drive: &DriveConfig, settings: &SolverSettings) -> Result<()> {
    emitter.validate()?;
    drive.validate()?;
    if drive.pulses.len() == 2 && drive.pulses.iter().any(|p| p.detuning_nm <= 0.0) {
        return Err(Error::domain("two-colour drives require both pulses red-detuned"));
    }
    if !(settings.dt_ps > 0.0) {
        return Err(Error::domain("dt must be > 0"));
    }
    Ok(())
}

fn integrate(
    emitter: &EmitterParams,
    drive: &DriveConfig,
    mode: DynamicsMode,
    settings: &SolverSettings,
    mut record: impl FnMut(f64, &QuantumState),
) -> Result<QuantumState> {
    check_inputs(emitter, drive, settings)?;
    let pulses = drive.resolve(emitter)?;
    let coupling = Coupling { pulses: &pulses };
    let (t0, t1) = time_window(&pulses);
    let n = ((t1 - t0) / settings.dt_ps).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / n as f64;
    let gamma = emitter.decay_rate_per_ps();
    let mut state = match mode {
        DynamicsMode::Unitary => QuantumState::ground(),
        DynamicsMode::Lindblad => QuantumState::Mixed(QuantumState::ground().density_matrix()),
    };
    record(t0, &state);
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        state = step(state, &coupling, gamma, t, dt);
        record(t + dt, &state);
    }
    Ok(state)
}

/// Integrates the drive and returns the sampled trajectory.
pub fn solve_dynamics(
    emitter: &EmitterParams,
    drive: &DriveConfig,
    mode: DynamicsMode,
    settings: &SolverSettings,
) -> Result<Trajectory> {
    let every = settings.record_every.max(1);
    let mut points = Vec::new();
    let mut k = 0usize;
    let last = integrate(emitter, drive, mode, settings, |t, s| {
        if k.is_multiple_of(every) {
            points.push(TrajectoryPoint { time_ps: t, state: *s });
        }
        k += 1;
    })?;
    if points.last().map(|p| p.state) != Some(last) {
        let t = time_window(&drive.resolve(emitter)?).1;
        points.push(TrajectoryPoint { time_ps: t, state: last });
    }
    Ok(Trajectory { points })
}

/// Excited-state occupation after the pulses, without storing the trajectory.
pub fn final_occupation(
    emitter: &EmitterParams,
    drive: &DriveConfig,
    mode: DynamicsMode,
    settings: &SolverSettings,
) -> Result<f64> {
    Ok(integrate(emitter, drive, mode, settings, |_, _| {})?.excited_population())
}

/// Compares the final occupation at `dt` and `dt/2`; returns the difference
/// when it is below 1e-4.
pub fn verify_step_convergence(
    emitter: &EmitterParams,
    drive: &DriveConfig,
    mode: DynamicsMode,
    settings: &SolverSettings,
) -> Result<f64> {
    let coarse = final_occupation(emitter, drive, mode, settings)?;
    let fine_settings = SolverSettings { dt_ps: settings.dt_ps / 2.0, ..*settings };
    let fine = final_occupation(emitter, drive, mode, &fine_settings)?;
    let residual = (coarse - fine).abs();
    if residual < 1e-4 {
        Ok(residual)
    } else {
        Err(Error::Convergence { residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::PulseSpec;
    use std::f64::consts::PI;

    fn resonant(area: f64) -> DriveConfig {
        DriveConfig::single(PulseSpec::with_area(0.0, area), 76.0)
    }

    #[test]
    fn pi_pulse_inverts() {
        let e = EmitterParams::default();
        let occ = final_occupation(&e, &resonant(PI), DynamicsMode::Unitary, &SolverSettings::default()).unwrap();
        assert!((occ - 1.0).abs() < 1e-6, "occ = {occ}");
    }

    #[test]
    fn resonant_rabi_oscillation_follows_sin_squared() {
        // Resonant drive: P_e = sin²(A/2) for any envelope.
        let e = EmitterParams::default();
        for area in [0.3, 1.0, 2.5, 4.0] {
            let occ = final_occupation(&e, &resonant(area), DynamicsMode::Unitary, &SolverSettings::default()).unwrap();
            assert!((occ - (area / 2.0).sin().powi(2)).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_field_stays_in_ground_state() {
        let e = EmitterParams::default();
        for mode in [DynamicsMode::Unitary, DynamicsMode::Lindblad] {
            let occ = final_occupation(&e, &resonant(0.0), mode, &SolverSettings::default()).unwrap();
            assert_eq!(occ, 0.0);
        }
    }

    #[test]
    fn lindblad_pi_pulse_loses_little_population() {
        // A 6 ps pulse against T₁ = 500 ps: decay during the pulse is at the
        // percent level at most, and the trace stays 1.
        let e = EmitterParams::default();
        let s = SolverSettings { record_every: 1, ..Default::default() };
        let traj = solve_dynamics(&e, &resonant(PI), DynamicsMode::Lindblad, &s).unwrap();
        let occ = traj.final_occupation();
        assert!(occ < 1.0 && occ > 0.9, "occ = {occ}");
        for p in &traj.points {
            assert!((p.state.norm() - 1.0).abs() < 1e-9);
            assert!(p.state.min_eigenvalue() > -1e-9);
        }
    }

    #[test]
    fn trajectory_is_time_ordered_and_ends_at_window_end() {
        let e = EmitterParams::default();
        let traj = solve_dynamics(&e, &resonant(PI), DynamicsMode::Unitary, &SolverSettings::default()).unwrap();
        assert!(traj.points.windows(2).all(|w| w[1].time_ps > w[0].time_ps));
        assert!(traj.points.len() > 10);
    }

    #[test]
    fn two_color_requires_red_detuning() {
        let e = EmitterParams::default();
        let d = DriveConfig::two_color(PulseSpec::with_area(4.0, 1.0), PulseSpec::with_area(-2.0, 1.0), 0.0, 76.0);
        assert!(matches!(final_occupation(&e, &d, DynamicsMode::Unitary, &SolverSettings::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn coarse_step_reports_convergence_error() {
        let e = EmitterParams::default();
        let d = DriveConfig::two_color(PulseSpec::with_power(4.0, 350.0), PulseSpec::with_power(10.8, 700.0), 0.0, 76.0);
        let coarse = SolverSettings { dt_ps: 0.4, record_every: 1 };
        match verify_step_convergence(&e, &d, DynamicsMode::Unitary, &coarse) {
            Err(Error::Convergence { residual }) => assert!(residual >= 1e-4),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
