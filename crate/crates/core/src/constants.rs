//! Earth–Moon canonical units and primary-body geometry.

use nalgebra::Vector3;

/// Radius of the Earth in km.
pub const EARTH_RADIUS_KM: f64 = 6378.1;
/// Radius of the Moon in km.
pub const MOON_RADIUS_KM: f64 = 1737.1;

/// Arcseconds per radian.
pub const ARCSEC_PER_RAD: f64 = 180.0 * 3600.0 / core::f64::consts::PI;

/// Converts arcseconds to radians.
pub fn arcsec_to_rad(arcsec: f64) -> f64 {
    arcsec / ARCSEC_PER_RAD
}

/// Mass ratio and characteristic units of the CR3BP system.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CanonicalConstants {
    pub mu: f64,
    /// Distance unit in km.
    pub du_km: f64,
    /// Time unit in seconds.
    pub tu_s: f64,
}

impl CanonicalConstants {
    pub const EARTH_MOON: CanonicalConstants = CanonicalConstants { mu: 0.0121506, du_km: 389703.0, tu_s: 382981.0 };

    pub fn is_valid(&self) -> bool {
        self.mu > 0.0 && self.mu < 0.5 && self.du_km > 0.0 && self.tu_s > 0.0
    }

    /// Position of the larger primary (Earth) in the synodic frame.
    pub fn earth_center(&self) -> Vector3<f64> {
        Vector3::new(-self.mu, 0.0, 0.0)
    }

    /// Position of the smaller primary (Moon) in the synodic frame.
    pub fn moon_center(&self) -> Vector3<f64> {
        Vector3::new(1.0 - self.mu, 0.0, 0.0)
    }

    pub fn km_to_du(&self, km: f64) -> f64 {
        km / self.du_km
    }

    pub fn du_to_km(&self, du: f64) -> f64 {
        du * self.du_km
    }

    /// DU/TU to km/s.
    pub fn du_per_tu_to_km_per_s(&self, v: f64) -> f64 {
        v * self.du_km / self.tu_s
    }

    pub fn tu_to_minutes(&self, tu: f64) -> f64 {
        tu * self.tu_s / 60.0
    }

    pub fn earth(&self) -> PrimaryBody {
        PrimaryBody { center: self.earth_center(), radius: self.km_to_du(EARTH_RADIUS_KM) }
    }

    pub fn moon(&self) -> PrimaryBody {
        PrimaryBody { center: self.moon_center(), radius: self.km_to_du(MOON_RADIUS_KM) }
    }

    /// Earth and Moon, the two occluding bodies.
    pub fn primaries(&self) -> [PrimaryBody; 2] {
        [self.earth(), self.moon()]
    }
}

impl Default for CanonicalConstants {
    fn default() -> Self {
        Self::EARTH_MOON
    }
}

/// A spherical occluding body in the synodic frame (DU).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimaryBody {
    pub center: Vector3<f64>,
    pub radius: f64,
}
