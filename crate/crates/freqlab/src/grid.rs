//! Nonlinear center-of-inertia (COI) grid model: per-generator swing inertia
//! with turbine governors (dead-band, droop, first-order servo), AGC on one
//! unit, frequency-dependent load damping, stochastic and drifting loads, and
//! a power/energy-limited synthetic-inertia device.
//!
//! All dynamics run in deviation form: scheduled generation balances the
//! nominal load, so governor references and load terms are deviations from
//! that balance. The swing update uses explicit Euler so the discrete power
//! bookkeeping identity holds exactly at each step.

use crate::error::{Error, Result};
use crate::rng::NoiseStream;
use crate::sde::{ou_exact_step, OuParams};

/// Turbine governor: droop response behind a dead-band, tracked by a
/// first-order servo. Powers are in per-unit on the machine base.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbineGovernor {
    /// Droop (pu frequency per pu power, machine base).
    pub droop: f64,
    /// Servo time constant (s).
    pub t_servo: f64,
    /// Dead-band half-width (Hz).
    pub d_za: f64,
    /// Scheduled power reference (pu, machine base; 0 in deviation form).
    pub p_ref: f64,
    /// External AGC offset input (pu, machine base).
    pub d_p: f64,
    /// Servo internal state = current mechanical-power command (pu).
    pub state: f64,
    /// Whether the dead-band output was nonzero at the previous step.
    pub db_active: bool,
}

impl TurbineGovernor {
    pub fn new(droop: f64, t_servo: f64, d_za_hz: f64) -> Result<Self> {
        if !(droop > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "droop must be positive, got {droop}"
            )));
        }
        if !(t_servo > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t_servo must be positive, got {t_servo}"
            )));
        }
        if !(d_za_hz >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "d_za must be nonnegative, got {d_za_hz}"
            )));
        }
        Ok(TurbineGovernor {
            droop,
            t_servo,
            d_za: d_za_hz,
            p_ref: 0.0,
            d_p: 0.0,
            state: 0.0,
            db_active: false,
        })
    }
}

/// One synchronous machine: inertia constant on its own rating, plus its
/// governor and current mechanical power.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    /// Inertia constant (s, machine base).
    pub h: f64,
    /// Machine rating (MVA).
    pub rating: f64,
    pub tg: TurbineGovernor,
    /// Current mechanical power (pu, machine base).
    pub p_mech: f64,
}

impl Generator {
    pub fn new(h: f64, rating: f64, tg: TurbineGovernor) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
        }
        if !(rating > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rating must be positive, got {rating}"
            )));
        }
        Ok(Generator {
            h,
            rating,
            tg,
            p_mech: 0.0,
        })
    }
}

/// Secondary frequency control: a pure integrator on the COI speed error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agc {
    /// Integrator gain (pu/s per pu frequency error).
    pub k_agc: f64,
    /// Integrator state (pu, system base).
    pub p_agc: f64,
    pub enabled: bool,
}

impl Agc {
    pub fn disabled() -> Self {
        Agc {
            k_agc: 0.0,
            p_agc: 0.0,
            enabled: false,
        }
    }

    pub fn new(k_agc: f64) -> Self {
        Agc {
            k_agc,
            p_agc: 0.0,
            enabled: true,
        }
    }
}

/// Stochastic load: an OU multiplier eta(t) scaling a nominal power.
/// The voltage exponent gamma is carried for config fidelity but inert,
/// since the voltage ratio is frozen at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticLoad {
    /// Nominal power (MW).
    pub p_l0: f64,
    pub ou: OuParams,
    pub gamma: f64,
    pub v_ratio: f64,
}

impl StochasticLoad {
    pub fn new(p_l0: f64, ou: OuParams) -> Result<Self> {
        if !(p_l0 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "p_l0 must be nonnegative, got {p_l0}"
            )));
        }
        ou.validate()?;
        Ok(StochasticLoad {
            p_l0,
            ou,
            gamma: 1.0,
            v_ratio: 1.0,
        })
    }
}

/// Slow deterministic load drift: power = p_d0 * (1 + delta(t)) with
/// delta(t) = -amplitude * sin(t / timescale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftingLoad {
    /// Nominal power (MW).
    pub p_d0: f64,
    /// Relative drift amplitude (pu of p_d0).
    pub amplitude: f64,
    /// Drift timescale (s).
    pub timescale: f64,
}

impl DriftingLoad {
    pub fn nominal() -> Self {
        DriftingLoad {
            p_d0: 14.9,
            amplitude: 0.12,
            timescale: 86_400.0,
        }
    }

    /// Relative deviation from nominal at time t.
    pub fn relative_deviation(&self, t: f64) -> f64 {
        -self.amplitude * (t / self.timescale).sin()
    }
}

/// Converter-interfaced fast frequency-response device with a battery:
/// PD action on frequency, power-limited by the converter and
/// energy-limited by the storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticInertia {
    /// Converter power limit (MW).
    pub p_max: f64,
    /// Battery capacity (MJ).
    pub e_cap: f64,
    /// Stored energy (MJ).
    pub e_state: f64,
    /// Derivative gain (MW per Hz/s).
    pub k_derivative: f64,
    /// Proportional gain (MW per Hz).
    pub k_proportional: f64,
    /// Derivative-path low-pass corner (Hz).
    pub filter_fc: f64,
    /// Filtered frequency derivative state (pu/s).
    pub d_filt: f64,
    /// Mean PV infeed (MW), balanced by schedule; carried for config fidelity.
    pub pv_mean: f64,
}

impl SyntheticInertia {
    pub fn new(
        p_max: f64,
        e_cap: f64,
        e0: f64,
        k_derivative: f64,
        k_proportional: f64,
        filter_fc: f64,
    ) -> Result<Self> {
        if !(p_max > 0.0) || !(e_cap > 0.0) || !(filter_fc > 0.0) {
            return Err(Error::InvalidArgument(
                "p_max, e_cap and filter_fc must be positive".into(),
            ));
        }
        if !(0.0..=e_cap).contains(&e0) {
            return Err(Error::InvalidArgument(format!(
                "initial energy {e0} MJ outside [0, {e_cap}]"
            )));
        }
        Ok(SyntheticInertia {
            p_max,
            e_cap,
            e_state: e0,
            k_derivative,
            k_proportional,
            filter_fc,
            d_filt: 0.0,
            pv_mean: 1.0,
        })
    }
}

/// COI aggregate quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoiState {
    /// Frequency deviation (pu of f0).
    pub delta_omega: f64,
    /// Nominal frequency (Hz).
    pub f0: f64,
    /// Rating-weighted total inertia (s, system base).
    pub h_total: f64,
    /// Aggregate load damping (pu/pu, system base).
    pub d_l: f64,
}

impl CoiState {
    pub fn frequency_hz(&self) -> f64 {
        self.f0 * (1.0 + self.delta_omega)
    }
}

/// Deadzone dead-band: zero inside the band, offset by the half-width
/// outside. Continuous and odd.
pub fn apply_deadband(x: f64, d_za: f64) -> f64 {
    debug_assert!(d_za >= 0.0);
    if x.abs() <= d_za {
        0.0
    } else {
        x - d_za * x.signum()
    }
}

/// Advances a governor one step. Returns the updated governor, the
/// mechanical-power output (pu, machine base), and whether the dead-band
/// output crossed the zero/nonzero boundary (a wear event).
pub fn tg_step(
    tg: &TurbineGovernor,
    freq_dev: f64,
    f0: f64,
    dt: f64,
) -> Result<(TurbineGovernor, f64, bool)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if dt > tg.t_servo / 5.0 {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} s exceeds t_servo/5 = {} s; the servo would be under-resolved",
            tg.t_servo / 5.0
        )));
    }
    let d_za_pu = tg.d_za / f0;
    let db_out = apply_deadband(freq_dev, d_za_pu);
    let active = db_out != 0.0;
    let wear = active != tg.db_active;
    let command = tg.p_ref + tg.d_p - db_out / tg.droop;
    // exact first-order tracking over one step
    let blend = -(-dt / tg.t_servo).exp_m1();
    let state = tg.state + (command - tg.state) * blend;
    let mut out = tg.clone();
    out.state = state;
    out.db_active = active;
    Ok((out, state, wear))
}

/// Advances the AGC integrator: p_agc += k_agc * (1 - omega_coi) * dt.
/// A disabled AGC is frozen.
pub fn agc_step(agc: &Agc, omega_coi: f64, dt: f64) -> Result<Agc> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut out = *agc;
    if agc.enabled {
        out.p_agc += agc.k_agc * (1.0 - omega_coi) * dt;
    }
    Ok(out)
}

/// Total load power in MW at time t for a given OU multiplier.
pub fn load_power(sl: &StochasticLoad, dl: Option<&DriftingLoad>, t: f64, eta: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let stochastic = eta * sl.p_l0 * sl.v_ratio.powf(sl.gamma);
    let drifting = dl.map_or(0.0, |d| d.p_d0 * (1.0 + d.relative_deviation(t)));
    Ok(stochastic + drifting)
}

/// Advances the synthetic-inertia device one step. Returns the updated
/// device and the injected power (MW, positive = discharge into the grid).
pub fn synthetic_inertia_step(
    si: &SyntheticInertia,
    delta_omega: f64,
    d_omega_dt: f64,
    f0: f64,
    dt: f64,
) -> Result<(SyntheticInertia, f64)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(0.0..=si.e_cap).contains(&si.e_state) {
        return Err(Error::InvariantViolation(format!(
            "battery energy {} MJ outside [0, {}]",
            si.e_state, si.e_cap
        )));
    }
    let mut out = *si;
    // exact exponential first-order low-pass on the frequency derivative
    let blend = -(-std::f64::consts::TAU * si.filter_fc * dt).exp_m1();
    out.d_filt += (d_omega_dt - out.d_filt) * blend;
    let raw = -si.k_derivative * out.d_filt * f0 - si.k_proportional * delta_omega * f0;
    let mut power = raw.clamp(-si.p_max, si.p_max);
    // Never discharge past empty or charge past full within the step
    // (MW * s = MJ, so the bounds divide out directly).
    power = power.clamp(-(si.e_cap - si.e_state) / dt, si.e_state / dt);
    // The clamp bounds the post-step energy up to rounding of (e/dt)*dt;
    // snap the last few ulps back into range.
    out.e_state = (out.e_state - power * dt).clamp(0.0, si.e_cap);
    Ok((out, power))
}

/// Static configuration of a scenario's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    /// Nominal frequency (Hz).
    pub f0: f64,
    /// System power base (MVA).
    pub s_base: f64,
    /// Aggregate load damping (pu/pu, system base).
    pub d_l: f64,
    pub generators: Vec<Generator>,
    pub agc: Agc,
    /// Index of the generator whose governor receives the AGC output.
    pub agc_target: usize,
    pub stochastic: StochasticLoad,
    pub drifting: Option<DriftingLoad>,
    pub si: Option<SyntheticInertia>,
}

pub const DEFAULT_F0_HZ: f64 = 60.0;
pub const DEFAULT_S_BASE_MVA: f64 = 100.0;
pub const DEFAULT_DROOP: f64 = 0.05;
pub const DEFAULT_T_SERVO_S: f64 = 0.5;

impl GridModel {
    /// Two-machine COI system with textbook governor constants. The inertia
    /// scale multiplies every machine's H.
    pub fn two_machine(
        d_l: f64,
        d_za_hz: f64,
        inertia_scale: f64,
        stochastic: StochasticLoad,
        drifting: Option<DriftingLoad>,
        agc: Agc,
        si: Option<SyntheticInertia>,
    ) -> Result<Self> {
        if !(inertia_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "inertia_scale must be positive, got {inertia_scale}"
            )));
        }
        if !(d_l >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "d_l must be nonnegative, got {d_l}"
            )));
        }
        let tg = || TurbineGovernor::new(DEFAULT_DROOP, DEFAULT_T_SERVO_S, d_za_hz);
        let generators = vec![
            Generator::new(5.148 * inertia_scale, 615.0, tg()?)?,
            Generator::new(6.54 * inertia_scale, 60.0, tg()?)?,
        ];
        Ok(GridModel {
            f0: DEFAULT_F0_HZ,
            s_base: DEFAULT_S_BASE_MVA,
            d_l,
            generators,
            agc,
            agc_target: 1,
            stochastic,
            drifting,
            si,
        })
    }

    /// Rating-weighted total inertia on the system base (s).
    pub fn h_total(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| g.h * g.rating / self.s_base)
            .sum()
    }

    pub fn coi(&self, delta_omega: f64) -> CoiState {
        CoiState {
            delta_omega,
            f0: self.f0,
            h_total: self.h_total(),
            d_l: self.d_l,
        }
    }

    pub fn initial_state(&self, stream: NoiseStream) -> GridState {
        GridState {
            t: 0.0,
            delta_omega: 0.0,
            eta: self.stochastic.ou.eta0,
            generators: self.generators.clone(),
            agc: self.agc,
            si: self.si,
            stream,
            wear_events: 0,
            last_domega_dt: 0.0,
            last_mismatch_pu: 0.0,
            last_si_power_mw: 0.0,
        }
    }
}

/// Full mutable simulation state, advanced one step at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub t: f64,
    /// COI frequency deviation (pu).
    pub delta_omega: f64,
    /// OU load multiplier.
    pub eta: f64,
    pub generators: Vec<Generator>,
    pub agc: Agc,
    pub si: Option<SyntheticInertia>,
    pub stream: NoiseStream,
    /// Cumulative dead-band boundary crossings over all governors.
    pub wear_events: u64,
    /// Frequency derivative over the last step (pu/s), fed to the SI device.
    pub last_domega_dt: f64,
    /// Net accelerating power of the last step, excluding damping (pu).
    pub last_mismatch_pu: f64,
    /// SI injection of the last step (MW).
    pub last_si_power_mw: f64,
}

/// Guard threshold for the divergence error (pu).
pub const DIVERGENCE_LIMIT_PU: f64 = 0.1;

/// Advances the grid one step of explicit Euler on the COI swing equation:
/// 2 h_total dw/dt = sum(p_mech) + p_si - dp_load - d_l * w, all on the
/// system base. Governors, AGC, SI and the OU load advance alongside.
pub fn step_grid(model: &GridModel, st: &GridState, dt: f64) -> Result<GridState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if st.delta_omega.abs() > DIVERGENCE_LIMIT_PU {
        return Err(Error::SimulationDiverged {
            t: st.t,
            delta_omega: st.delta_omega,
        });
    }
    let mut next = st.clone();
    let h_total = model.h_total();

    // Governors respond to the current frequency deviation.
    let mut p_mech_pu = 0.0;
    for (i, gen) in st.generators.iter().enumerate() {
        let mut tg = gen.tg.clone();
        if model.agc.enabled && i == model.agc_target {
            // AGC output is on the system base; the governor works on its own.
            tg.d_p = st.agc.p_agc * model.s_base / gen.rating;
        }
        let (tg_next, p_cmd, wear) = tg_step(&tg, st.delta_omega, model.f0, dt)?;
        if wear {
            next.wear_events += 1;
        }
        next.generators[i].tg = tg_next;
        next.generators[i].p_mech = p_cmd;
        p_mech_pu += p_cmd * gen.rating / model.s_base;
    }

    // Load deviation from schedule (MW -> system pu).
    let drift_mw = model
        .drifting
        .map_or(0.0, |d| d.p_d0 * d.relative_deviation(st.t));
    let stoch_mw = st.eta * model.stochastic.p_l0;
    let dp_load_pu = (stoch_mw + drift_mw) / model.s_base;

    // Synthetic inertia reacts to the previous step's frequency derivative.
    let mut p_si_pu = 0.0;
    if let Some(si) = &st.si {
        let (si_next, power_mw) =
            synthetic_inertia_step(si, st.delta_omega, st.last_domega_dt, model.f0, dt)?;
        next.si = Some(si_next);
        next.last_si_power_mw = power_mw;
        p_si_pu = power_mw / model.s_base;
    }

    // Swing update (explicit Euler, so the discrete bookkeeping identity
    // mismatch = 2 h_total dw/dt + d_l w holds exactly).
    let mismatch = p_mech_pu + p_si_pu - dp_load_pu;
    let accel = (mismatch - model.d_l * st.delta_omega) / (2.0 * h_total);
    next.delta_omega = st.delta_omega + accel * dt;
    next.last_domega_dt = accel;
    next.last_mismatch_pu = mismatch;

    next.agc = agc_step(&st.agc, 1.0 + st.delta_omega, dt)?;

    let (eta, stream) = ou_exact_step(st.eta, &model.stochastic.ou, dt, st.stream)?;
    next.eta = eta;
    next.stream = stream;
    next.t = st.t + dt;
    Ok(next)
}
