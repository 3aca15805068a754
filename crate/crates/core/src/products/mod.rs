//! Reconstruction metrics and downstream products: cover-glass optics,
//! horizontal irradiance, photovoltaic current and droplet microphysics.

mod fresnel;
mod irradiance;
mod metrics;
mod microphys;

pub use fresnel::{cover_transmissivity, cover_transmissivity_at, snell_refract};
pub use irradiance::{
    ghi, ghi_at_points, pv_current, pv_relative_response, relative_response, DirectBeam, HemisphereQuadrature, PVSpec,
};
pub use metrics::epsilon_delta;
pub use microphys::{
    adiabatic_fraction, af_histogram, core_mask, core_re_profile, effective_radius, lwc_from_re, lwc_from_re_field,
    AdiabaticFraction, AdiabaticProfile, AfBin, CoreReSample, MicrophysConstants,
};
