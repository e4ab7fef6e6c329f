//! Unit conventions.
//!
//! Time is in ns. Frequencies and amplitudes are stored as ordinary
//! frequencies in MHz and become angular (rad/ns) only when a Hamiltonian is
//! assembled. Decay rates are stored in 1/µs ("MHz" without 2π) and become
//! 1/ns on assembly. Lifetimes are in µs.

use std::f64::consts::PI;

/// rad/ns per MHz of ordinary frequency.
pub const ANGULAR_PER_MHZ: f64 = 2.0 * PI * 1e-3;

/// 1/ns per 1/µs.
pub const RATE_PER_MHZ: f64 = 1e-3;

pub fn angular(mhz: f64) -> f64 {
    mhz * ANGULAR_PER_MHZ
}

pub fn mhz_from_angular(rad_per_ns: f64) -> f64 {
    rad_per_ns / ANGULAR_PER_MHZ
}

/// Decay rate in 1/µs for a lifetime in µs.
pub fn rate_from_lifetime(t_us: f64) -> f64 {
    if t_us.is_infinite() {
        0.0
    } else {
        1.0 / t_us
    }
}
