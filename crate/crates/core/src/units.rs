//! Physical constants in the toolkit's unit system.
//!
//! Energies are in meV, times in ps, magnetic fields in tesla and
//! temperatures in kelvin. Spin operators are dimensionless (units of ħ).

/// Reduced Planck constant in meV·ps.
pub const HBAR_MEV_PS: f64 = 0.658_211_956_9;

/// Bohr magneton in meV/T.
pub const MU_B_MEV_PER_T: f64 = 0.057_883_818_060;

/// Boltzmann constant in meV/K.
pub const K_B_MEV_PER_K: f64 = 0.086_173_332_62;

/// Default electron g-factor used by Zeeman terms.
pub const DEFAULT_G_FACTOR: f64 = 2.0;

/// Converts a time in ps to natural units (1/meV).
#[inline]
pub fn natural_time(t_ps: f64) -> f64 {
    t_ps / HBAR_MEV_PS
}

/// Converts a time in natural units (1/meV) to ps.
#[inline]
pub fn ps_from_natural(t: f64) -> f64 {
    t * HBAR_MEV_PS
}

/// Inverse temperature in 1/meV.
pub fn beta_from_kelvin(temperature: f64) -> f64 {
    if temperature <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / (K_B_MEV_PER_K * temperature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_kelvin_is_about_23_per_mev() {
        let beta = beta_from_kelvin(0.5);
        assert!((beta - 23.209).abs() < 1e-3, "{beta}");
    }

    #[test]
    fn time_conversion_roundtrips() {
        let t = 1.2345;
        assert!((ps_from_natural(natural_time(t)) - t).abs() < 1e-15);
    }
}
