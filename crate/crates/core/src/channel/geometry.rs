//! Earth-centred geometry for a geostationary satellite.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Geodetic position on a spherical Earth, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl LatLon {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Self {
        Self { lat_deg, lon_deg }
    }
}

/// Satellite position plus the sphere it looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Satellite {
    pub position: Vec3,
    pub earth_radius_m: f64,
}

impl Satellite {
    /// Geostationary satellite over the equator at `longitude_deg`.
    pub fn geostationary(longitude_deg: f64, height_m: f64, earth_radius_m: f64) -> Self {
        let r = earth_radius_m + height_m;
        let lon = longitude_deg.to_radians();
        Self {
            position: Vec3::new(r * lon.cos(), r * lon.sin(), 0.0),
            earth_radius_m,
        }
    }

    pub fn ground_point(&self, p: LatLon) -> Vec3 {
        let (lat, lon) = (p.lat_deg.to_radians(), p.lon_deg.to_radians());
        self.earth_radius_m * Vec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
    }

    pub fn slant_range(&self, p: LatLon) -> f64 {
        (self.ground_point(p) - self.position).norm()
    }

    /// Unit vector from the satellite towards a ground point.
    pub fn direction_to(&self, p: LatLon) -> Vec3 {
        (self.ground_point(p) - self.position).normalize()
    }

    pub fn nadir(&self) -> Vec3 {
        -self.position.normalize()
    }

    /// First intersection of the ray from the satellite along `dir` with the Earth.
    pub fn ground_hit(&self, dir: &Vec3) -> Result<LatLon> {
        let d = dir.normalize();
        let s = self.position;
        let b = s.dot(&d);
        let c = s.norm_squared() - self.earth_radius_m * self.earth_radius_m;
        let disc = b * b - c;
        if disc < 0.0 {
            return Err(Error::Geometry("direction misses the Earth".into()));
        }
        let t = -b - disc.sqrt();
        if t <= 0.0 {
            return Err(Error::Geometry("Earth intersection behind the satellite".into()));
        }
        let p = s + d * t;
        Ok(LatLon {
            lat_deg: (p.z / p.norm()).asin().to_degrees(),
            lon_deg: p.y.atan2(p.x).to_degrees(),
        })
    }
}

/// Angle between two directions, radians.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Orthonormal pair spanning the plane perpendicular to `axis`, the first
/// one as close to east (`+z × axis`) as possible.
pub fn tangent_basis(axis: &Vec3) -> (Vec3, Vec3) {
    let a = axis.normalize();
    let mut east = Vec3::z().cross(&a);
    if east.norm() < 1e-12 {
        east = Vec3::y().cross(&a);
    }
    let east = east.normalize();
    let north = a.cross(&east).normalize();
    (east, north)
}

/// Direction at angular offset `rho` from `axis` along azimuth `phi` in the
/// tangent frame of `axis`.
pub fn offset_direction(axis: &Vec3, rho: f64, phi: f64) -> Vec3 {
    let (e, n) = tangent_basis(axis);
    let a = axis.normalize();
    (a * rho.cos() + (e * phi.cos() + n * phi.sin()) * rho.sin()).normalize()
}
