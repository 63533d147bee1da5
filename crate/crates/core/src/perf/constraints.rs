use serde::{Deserialize, Serialize};

use super::config::CoreConfig;
use crate::error::{domain, Result};

pub const SECONDS_PER_YEAR: f64 = 3.156e7;

/// Single-pulse updates equivalent to the best reported memory endurance:
/// 10¹² full SET/RESET cycles, each counted as two nudges.
pub const LITERATURE_ENDURANCE: f64 = 2e12;

/// Wire current budget when a whole column is nudged at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Electromigration {
    pub i_limit_a: f64,
    pub n_parallel: u32,
    pub i_nudge_a: f64,
    pub i_nudge_max_a: f64,
    /// Smallest ON resistance that keeps the nudge current within budget at
    /// the cell write voltage.
    pub r_on_min_ohm: f64,
    pub v_cell: f64,
    pub pass: bool,
}

pub fn electromigration_check(
    n_parallel: u32,
    i_limit_a: f64,
    i_nudge_a: f64,
    v_cell: f64,
) -> Result<Electromigration> {
    if n_parallel == 0 {
        return Err(domain("at least one device must be written"));
    }
    if !(i_limit_a > 0.0 && i_nudge_a >= 0.0 && v_cell > 0.0) {
        return Err(domain("currents and voltage must be positive"));
    }
    let i_nudge_max = i_limit_a / f64::from(n_parallel);
    Ok(Electromigration {
        i_limit_a,
        n_parallel,
        i_nudge_a,
        i_nudge_max_a: i_nudge_max,
        r_on_min_ohm: v_cell / i_nudge_max,
        v_cell,
        pass: i_nudge_a <= i_nudge_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endurance {
    pub pulses_per_cycle: f64,
    pub update_rate_hz: f64,
    pub duty: f64,
    pub years: f64,
    pub required_pulses: f64,
    pub literature_pulses: f64,
    pub pass: bool,
}

/// Single pulses a device must survive over the given service life.
pub fn endurance_requirement(
    pulses_per_cycle: f64,
    rate_hz: f64,
    duty: f64,
    years: f64,
) -> Result<Endurance> {
    if [pulses_per_cycle, rate_hz, duty, years]
        .iter()
        .any(|v| !(*v >= 0.0))
    {
        return Err(domain("endurance inputs must be nonnegative"));
    }
    let required = pulses_per_cycle * rate_hz * duty * years * SECONDS_PER_YEAR;
    Ok(Endurance {
        pulses_per_cycle,
        update_rate_hz: rate_hz,
        duty,
        years,
        required_pulses: required,
        literature_pulses: LITERATURE_ENDURANCE,
        pass: required <= LITERATURE_ENDURANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub electromigration: Electromigration,
    /// Every device pulsed for a full temporal word each cycle.
    pub endurance_worst: Endurance,
    /// Half the pulses on a tenth of the cycles.
    pub endurance_typical: Endurance,
}

/// Default operating point: a full column of 1024 nudged at the analog
/// write current, 33 µA wire limit, 100 kHz updates for one year.
pub fn constraint_report(cfg: &CoreConfig) -> Result<ConstraintReport> {
    let a = &cfg.analog;
    let pulses = 2f64.powi(cfg.coding.n_bits_t as i32);
    Ok(ConstraintReport {
        electromigration: electromigration_check(
            cfg.n_rows as u32,
            33e-6,
            a.i_write_a,
            a.i_write_a * a.r_on_ohm,
        )?,
        endurance_worst: endurance_requirement(pulses, 1e5, 1.0, 1.0)?,
        endurance_typical: endurance_requirement(pulses / 2.0, 1e5, 0.1, 1.0)?,
    })
}
