//! Physical constants used for unit conversion at the command line.

/// Solar mass in kilograms (IAU nominal value).
pub const SOLAR_MASS_KG: f64 = 1.988_47e30;

/// Planck mass in kilograms (CODATA 2018).
pub const PLANCK_MASS_KG: f64 = 2.176_434e-8;

/// One solar mass expressed in Planck masses.
pub const SOLAR_MASS_IN_PLANCK: f64 = SOLAR_MASS_KG / PLANCK_MASS_KG;

pub fn solar_to_planck(mass_solar: f64) -> f64 {
    mass_solar * SOLAR_MASS_IN_PLANCK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solar_mass_order_of_magnitude() {
        let m = solar_to_planck(1.0);
        assert!((9.0e37..9.3e37).contains(&m), "{m}");
    }
}
