//! Free-space constants derived from the carrier frequency.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permeability, H/m (CODATA 2018).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPS0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Carrier frequency in Hz.
    pub frequency: f64,
    /// Wavelength in m.
    pub wavelength: f64,
    /// Free-space wavenumber in rad/m.
    pub wavenumber: f64,
    /// Intrinsic impedance of free space in ohms.
    pub eta0: f64,
    pub mu0: f64,
    pub eps0: f64,
}

impl PhysicalConstants {
    pub fn new(frequency: f64) -> Result<Self> {
        derive_constants(frequency)
    }

    /// Angular frequency in rad/s.
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }
}

pub fn derive_constants(frequency: f64) -> Result<PhysicalConstants> {
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "frequency must be positive and finite, got {frequency}"
        )));
    }
    let wavelength = SPEED_OF_LIGHT / frequency;
    Ok(PhysicalConstants {
        frequency,
        wavelength,
        wavenumber: 2.0 * PI / wavelength,
        eta0: (MU0 / EPS0).sqrt(),
        mu0: MU0,
        eps0: EPS0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_at_28_ghz() {
        let c = derive_constants(28e9).unwrap();
        // 299792458 / 28e9 and 2*pi / lambda
        assert_relative_eq!(c.wavelength, 0.010_706_873_5, max_relative = 1e-8);
        assert_relative_eq!(c.wavenumber, 586.836_606_1, max_relative = 1e-9);
        assert_relative_eq!(c.eta0, 376.730_313, max_relative = 1e-8);
    }

    #[test]
    fn wavelength_scales_inversely() {
        let a = derive_constants(28e9).unwrap();
        let b = derive_constants(14e9).unwrap();
        assert_eq!(b.wavelength, 2.0 * a.wavelength);
        assert_eq!(a, derive_constants(28e9).unwrap());
    }

    #[test]
    fn rejects_bad_frequency() {
        assert!(derive_constants(0.0).is_err());
        assert!(derive_constants(-1.0).is_err());
        assert!(derive_constants(f64::NAN).is_err());
    }
}
