//! SI constants and conversions. Everything inside the crate is SI.

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s.
pub const H: f64 = 6.626_070_15e-34;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mass of a ⁴⁰K⁸⁷Rb molecule, kg.
pub const KRB_MASS: f64 = 127.0 * AMU;

pub const NANOKELVIN: f64 = 1e-9;
pub const CM: f64 = 1e-2;

/// Energy of `t` nanokelvin expressed in joules.
pub fn nk_to_joule(t: f64) -> f64 {
    t * NANOKELVIN * K_B
}

pub fn joule_to_nk(e: f64) -> f64 {
    e / (NANOKELVIN * K_B)
}

/// Angular frequency from an ordinary frequency in Hz.
pub fn hz_to_omega(nu: f64) -> f64 {
    2.0 * std::f64::consts::PI * nu
}
