use crate::math::Vec3;
#[allow(unused_imports)]
use crate::prelude::*;

/// Refraction angle [rad] into a medium of index `n` from air.
pub fn snell_refract(psi: f64, n: f64) -> f64 {
    (psi.sin() / n).asin()
}

/// Unpolarized Fresnel transmissivity of a flat cover for incidence angle
/// `psi` [rad] from the surface normal.
pub fn cover_transmissivity_at(psi: f64, n: f64) -> f64 {
    let psi = psi.abs();
    if psi >= core::f64::consts::FRAC_PI_2 {
        return 0.0;
    }
    if psi < 1e-8 {
        let r = (n - 1.0) / (n + 1.0);
        return 1.0 - r * r;
    }
    let t = snell_refract(psi, n);
    let rs = ((psi - t).sin() / (psi + t).sin()).powi(2);
    let rp = ((psi - t).tan() / (psi + t).tan()).powi(2);
    (1.0 - 0.5 * (rs + rp)).clamp(0.0, 1.0)
}

/// Transmissivity of a horizontal cover for light travelling along `omega`.
pub fn cover_transmissivity(omega: Vec3, n: f64) -> f64 {
    let c = (omega.z.abs() / omega.norm()).min(1.0);
    cover_transmissivity_at(c.acos(), n)
}
