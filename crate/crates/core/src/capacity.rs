//! Analytical CDMA link model with narrowband interference.
//!
//! Interference density is the sum of same-cell code interference and
//! narrowband interference; other-cell interference is carried as an
//! explicit zero. All ratios are linear. Outputs are real-valued, so a
//! degraded capacity below one user means the link cannot close at the
//! required SINR.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("{name} must be strictly positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("occupancy fraction {0} outside [0, 1]")]
    OccupancyRange(f64),
    #[error("active users {0} below one")]
    TooFewUsers(f64),
    #[error("spread bandwidth {w} Hz is below the data rate {r} bit/s")]
    BandwidthBelowRate { w: f64, r: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<(), CapacityError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CapacityError::NotPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), CapacityError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CapacityError::Negative { name, value })
    }
}

/// Link-level scalars.
///
/// `users` is real-valued so that the capacity equations can be solved and
/// substituted back without rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Spread bandwidth `W`, Hz.
    pub bandwidth_hz: f64,
    /// Per-user data rate `R`, bit/s.
    pub data_rate_bps: f64,
    /// Received signal power `S`, W.
    pub signal_power: f64,
    /// Thermal noise density `N0`, W/Hz.
    pub noise_density: f64,
    /// Active codes `N`.
    pub users: f64,
    /// Required SINR, linear.
    pub sinr_req: f64,
    /// Chip rate `R_c`, chips/s.
    pub chip_rate: f64,
    /// Bandwidth factor `κ` in `W = κ·R_c`.
    pub bandwidth_factor: f64,
}

impl LinkParams {
    /// Single user, unit power, no thermal noise, 0 dB required SINR, `κ = 1`.
    pub fn new(bandwidth_hz: f64, data_rate_bps: f64) -> Self {
        LinkParams {
            bandwidth_hz,
            data_rate_bps,
            signal_power: 1.0,
            noise_density: 0.0,
            users: 1.0,
            sinr_req: 1.0,
            chip_rate: bandwidth_hz,
            bandwidth_factor: 1.0,
        }
    }

    /// Derives `W = κ·R_c`.
    pub fn from_chip_rate(chip_rate: f64, bandwidth_factor: f64, data_rate_bps: f64) -> Self {
        LinkParams {
            chip_rate,
            bandwidth_factor,
            ..LinkParams::new(bandwidth_factor * chip_rate, data_rate_bps)
        }
    }

    pub fn with_users(mut self, users: f64) -> Self {
        self.users = users;
        self
    }

    pub fn with_sinr_req(mut self, sinr_req: f64) -> Self {
        self.sinr_req = sinr_req;
        self
    }

    pub fn with_signal_power(mut self, signal_power: f64) -> Self {
        self.signal_power = signal_power;
        self
    }

    pub fn with_noise_density(mut self, noise_density: f64) -> Self {
        self.noise_density = noise_density;
        self
    }

    pub fn with_data_rate(mut self, data_rate_bps: f64) -> Self {
        self.data_rate_bps = data_rate_bps;
        self
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        positive("bandwidth", self.bandwidth_hz)?;
        positive("data rate", self.data_rate_bps)?;
        positive("signal power", self.signal_power)?;
        non_negative("noise density", self.noise_density)?;
        positive("required SINR", self.sinr_req)?;
        positive("chip rate", self.chip_rate)?;
        positive("bandwidth factor", self.bandwidth_factor)?;
        if !(self.users >= 1.0) {
            return Err(CapacityError::TooFewUsers(self.users));
        }
        if self.bandwidth_hz < self.data_rate_bps {
            return Err(CapacityError::BandwidthBelowRate {
                w: self.bandwidth_hz,
                r: self.data_rate_bps,
            });
        }
        Ok(())
    }

    /// `W/R`.
    pub fn processing_gain(&self) -> f64 {
        self.bandwidth_hz / self.data_rate_bps
    }

    /// `E_b = S/R`.
    pub fn energy_per_bit(&self) -> f64 {
        self.signal_power / self.data_rate_bps
    }
}

/// Narrowband interference environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceEnv {
    /// Fraction `p` of the spread band occupied.
    pub occupancy: f64,
    /// Per-interferer power `S_ni`, W.
    pub interferer_power: f64,
    /// Per-interferer spacing `W_ni` (bandwidth plus guard), Hz.
    pub spacing_hz: f64,
}

impl InterferenceEnv {
    pub fn new(occupancy: f64, interferer_power: f64, spacing_hz: f64) -> Self {
        InterferenceEnv {
            occupancy,
            interferer_power,
            spacing_hz,
        }
    }

    /// No interferers, with the given spacing kept for rate-bound formulas.
    pub fn clear(spacing_hz: f64) -> Self {
        InterferenceEnv::new(0.0, 0.0, spacing_hz)
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        if !(0.0..=1.0).contains(&self.occupancy) {
            return Err(CapacityError::OccupancyRange(self.occupancy));
        }
        non_negative("interferer power", self.interferer_power)?;
        positive("interferer spacing", self.spacing_hz)
    }
}

/// Same-cell interference density `(N - 1)·S/W`.
pub fn self_interference(lp: &LinkParams) -> f64 {
    (lp.users - 1.0) * lp.signal_power / lp.bandwidth_hz
}

/// Narrowband interference density `p·S_ni/W_ni`. The spread bandwidth
/// cancels: `W/W_ni` interferers fill the band, each spreading over `W`.
pub fn narrowband_density(env: &InterferenceEnv) -> f64 {
    env.occupancy * env.interferer_power / env.spacing_hz
}

/// Despread SINR `E_b/(N0 + I_0)`, written as
/// `S·(W/R) / [W·N0 + (N-1)·S + p·(W/W_ni)·S_ni]`.
///
/// Returns `+∞` when there is neither noise nor interference.
pub fn effective_sinr(lp: &LinkParams, env: &InterferenceEnv) -> f64 {
    let denom = lp.bandwidth_hz * lp.noise_density
        + (lp.users - 1.0) * lp.signal_power
        + env.occupancy * (lp.bandwidth_hz / env.spacing_hz) * env.interferer_power;
    if denom == 0.0 {
        return f64::INFINITY;
    }
    lp.signal_power * lp.processing_gain() / denom
}

/// Pole capacity: `1 + (W/R)/SINR_req` when `exact`, else `(W/R)/SINR_req`.
pub fn pole_capacity(lp: &LinkParams, exact: bool) -> f64 {
    let base = lp.processing_gain() / lp.sinr_req;
    if exact {
        1.0 + base
    } else {
        base
    }
}

/// Users supported with narrowband interference and negligible thermal
/// noise: `1 + (W/R)/SINR_req - p·(W/W_ni)·(S_ni/S)`.
pub fn degraded_capacity(lp: &LinkParams, env: &InterferenceEnv) -> f64 {
    pole_capacity(lp, true)
        - env.occupancy
            * (lp.bandwidth_hz / env.spacing_hz)
            * (env.interferer_power / lp.signal_power)
}

/// Largest `S_ni/S` a single user tolerates: `(W_ni/R)/(p·SINR_req)`.
/// Unbounded (`+∞`) when `p = 0`.
pub fn max_interferer_ratio(lp: &LinkParams, env: &InterferenceEnv) -> f64 {
    let denom = env.occupancy * lp.sinr_req;
    if denom == 0.0 {
        return f64::INFINITY;
    }
    (env.spacing_hz / lp.data_rate_bps) / denom
}

/// Largest single-user data rate: `W_ni / (SINR_req·p·S_ni/S)`.
/// Unbounded (`+∞`) when no interference power is present.
pub fn max_rate(lp: &LinkParams, env: &InterferenceEnv) -> f64 {
    let denom = lp.sinr_req * env.occupancy * (env.interferer_power / lp.signal_power);
    if denom == 0.0 {
        return f64::INFINITY;
    }
    env.spacing_hz / denom
}

/// Single-user M-ary rate `K·R_c/N`.
pub fn mary_bit_rate(chip_rate: f64, code_length: usize, bits_per_symbol: u32) -> f64 {
    bits_per_symbol as f64 * chip_rate / code_length as f64
}

/// Everything the model computes for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityReport {
    pub link: LinkParams,
    pub env: InterferenceEnv,
    /// J/bit.
    pub energy_per_bit: f64,
    pub self_interference: f64,
    /// Always zero: a single cell is modeled.
    pub other_cell_interference: f64,
    pub narrowband_interference: f64,
    pub total_interference: f64,
    pub sinr: f64,
    pub pole_capacity: f64,
    pub degraded_capacity: f64,
}

pub fn report(lp: &LinkParams, env: &InterferenceEnv) -> Result<CapacityReport, CapacityError> {
    lp.validate()?;
    env.validate()?;
    let i_sc = self_interference(lp);
    let i_ni = narrowband_density(env);
    let i_oc = 0.0;
    Ok(CapacityReport {
        link: *lp,
        env: *env,
        energy_per_bit: lp.energy_per_bit(),
        self_interference: i_sc,
        other_cell_interference: i_oc,
        narrowband_interference: i_ni,
        total_interference: i_sc + i_oc + i_ni,
        sinr: effective_sinr(lp, env),
        pole_capacity: pole_capacity(lp, true),
        degraded_capacity: degraded_capacity(lp, env),
    })
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn self_interference_examples() {
        assert_eq!(self_interference(&LinkParams::new(400e3, 25e3)), 0.0);
        let lp = LinkParams::new(400e3, 25e3).with_users(16.0);
        assert!(rel_eq(self_interference(&lp), 3.75e-5, 1e-12));
        let lp = LinkParams::new(4.0, 1.0).with_users(2.0).with_signal_power(2.0);
        assert_eq!(self_interference(&lp), 0.5);
    }

    #[test]
    fn narrowband_density_examples() {
        assert_eq!(narrowband_density(&InterferenceEnv::clear(35e3)), 0.0);
        let env = InterferenceEnv::new(0.7, 2.0, 35e3);
        assert!(rel_eq(narrowband_density(&env), 4.0e-5, 1e-12));
        // 25 kHz channels with a 10 kHz guard band.
        let spacing = 25e3 + 10e3;
        assert_eq!(spacing, 35e3);
    }

    #[test]
    fn sinr_examples() {
        let lp = LinkParams::new(16.0, 1.0).with_users(17.0);
        assert_eq!(effective_sinr(&lp, &InterferenceEnv::clear(1.0)), 1.0);

        let lp = LinkParams::new(400e3, 25e3).with_noise_density(1e-6);
        let env = InterferenceEnv::clear(35e3);
        let ebn0 = lp.energy_per_bit() / lp.noise_density;
        assert!(rel_eq(effective_sinr(&lp, &env), ebn0, 1e-12));

        let lp = LinkParams::new(400e3, 25e3);
        let env = InterferenceEnv::new(0.7, 2.0, 35e3);
        assert!(rel_eq(effective_sinr(&lp, &env), 1.0, 1e-12));

        assert_eq!(
            effective_sinr(&LinkParams::new(400e3, 25e3), &InterferenceEnv::clear(35e3)),
            f64::INFINITY
        );
    }

    #[test]
    fn pole_capacity_examples() {
        let lp = LinkParams::new(400e3, 25e3);
        assert_eq!(pole_capacity(&lp, false), 16.0);
        assert_eq!(pole_capacity(&lp, false) * lp.data_rate_bps, 400e3);
        assert_eq!(pole_capacity(&lp, true), 17.0);
        assert_eq!(pole_capacity(&lp.with_sinr_req(2.0), false), 8.0);
    }

    #[test]
    fn degraded_capacity_examples() {
        let lp = LinkParams::new(400e3, 25e3);
        let env = InterferenceEnv::new(0.7, 2.0, 35e3);
        assert_eq!(degraded_capacity(&lp, &env), 1.0);

        let env = InterferenceEnv::new(0.0, 5.0, 35e3);
        assert_eq!(degraded_capacity(&lp, &env), pole_capacity(&lp, true));

        for ratio in [2.0, 3.0, 4.0] {
            let env = InterferenceEnv::new(35e3 / 400e3, ratio, 35e3);
            let loss = pole_capacity(&lp, true) - degraded_capacity(&lp, &env);
            assert!(rel_eq(loss, ratio, 1e-12));
        }
    }

    #[test]
    fn interferer_ratio_bound() {
        let lp = LinkParams::new(400e3, 25e3);
        let env = InterferenceEnv::new(0.7, 0.0, 35e3);
        let bound = max_interferer_ratio(&lp, &env);
        assert!(rel_eq(bound, 2.0, 1e-12));
        let at_bound = InterferenceEnv::new(0.7, bound * lp.signal_power, 35e3);
        assert!(rel_eq(effective_sinr(&lp, &at_bound), lp.sinr_req, 1e-12));

        let halved = max_interferer_ratio(&lp.with_sinr_req(2.0), &env);
        assert!(rel_eq(halved, bound / 2.0, 1e-12));
        assert_eq!(
            max_interferer_ratio(&lp, &InterferenceEnv::clear(35e3)),
            f64::INFINITY
        );
    }

    #[test]
    fn rate_bound() {
        let lp = LinkParams::new(400e3, 25e3);
        let env = InterferenceEnv::new(0.7, 2.0, 35e3);
        let r = max_rate(&lp, &env);
        assert!(rel_eq(r, 25e3, 1e-12));
        assert!(rel_eq(effective_sinr(&lp.with_data_rate(r), &env), 1.0, 1e-12));

        let doubled = InterferenceEnv::new(0.7, 4.0, 35e3);
        assert!(rel_eq(max_rate(&lp, &doubled), r / 2.0, 1e-12));

        let weak = InterferenceEnv::new(35e3 / 400e3, 1.0, 35e3);
        assert!(rel_eq(max_rate(&lp, &weak), 400e3, 1e-12));
        assert_eq!(max_rate(&lp, &InterferenceEnv::clear(35e3)), f64::INFINITY);
    }

    #[test]
    fn mary_rates() {
        assert!(rel_eq(mary_bit_rate(400e3, 12, 4), 133_333.333_333, 1e-9));
        assert_eq!(mary_bit_rate(400e3, 1, 1), 400e3);
        assert_eq!(mary_bit_rate(400e3, 40, 6), 60e3);
    }

    #[test]
    fn report_components() {
        let lp = LinkParams::new(400e3, 25e3).with_users(3.0).with_noise_density(1e-7);
        let env = InterferenceEnv::new(0.5, 1.0, 35e3);
        let rep = report(&lp, &env).unwrap();
        assert_eq!(rep.other_cell_interference, 0.0);
        assert_eq!(
            rep.total_interference,
            rep.self_interference + rep.narrowband_interference
        );
        let direct = rep.energy_per_bit / (lp.noise_density + rep.total_interference);
        assert!(rel_eq(rep.sinr, direct, 1e-12));
    }

    #[test]
    fn validation() {
        assert!(LinkParams::new(1.0, 2.0).validate().is_err());
        assert!(LinkParams::new(400e3, 25e3).with_users(0.5).validate().is_err());
        assert!(LinkParams::new(400e3, 25e3).with_sinr_req(0.0).validate().is_err());
        assert!(InterferenceEnv::new(1.5, 1.0, 35e3).validate().is_err());
        assert!(InterferenceEnv::new(0.5, 1.0, 0.0).validate().is_err());
        assert!(report(&LinkParams::new(400e3, 25e3), &InterferenceEnv::clear(35e3)).is_ok());
    }

    #[test]
    fn chip_rate_bandwidth() {
        let lp = LinkParams::from_chip_rate(400e3, 1.0, 25e3);
        assert_eq!(lp.bandwidth_hz, 400e3);
        let lp = LinkParams::from_chip_rate(400e3, 1.25, 25e3);
        assert_eq!(lp.bandwidth_hz, 500e3);
    }
}
