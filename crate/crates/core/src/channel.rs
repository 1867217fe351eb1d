//! Channel vectors built from array geometry.
//!
//! Sign conventions are fixed crate-wide: a far-field steering entry is
//! `exp(+j·β·⟨p, u⟩)` and a near-field entry is `g(d)·exp(−j·β·d)` with
//! `β = 2π/λ`. Because `d ≈ d₀ − ⟨p, u⟩` far from the array, the two agree up
//! to a global phase.

use std::f64::consts::PI;
use std::ops::{Add, Index};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, Dim, Point};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Slack on direction range checks, in degrees.
pub const ANGLE_TOLERANCE_DEG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    pub frequency_hz: f64,
    pub wavelength_m: f64,
}

impl CarrierSpec {
    pub fn from_frequency(frequency_hz: f64) -> Result<Self> {
        if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "carrier frequency must be positive, got {frequency_hz}"
            )));
        }
        Ok(CarrierSpec {
            frequency_hz,
            wavelength_m: SPEED_OF_LIGHT_M_S / frequency_hz,
        })
    }

    /// A carrier with an exact wavelength, for experiments quoted in wavelengths
    /// (30 GHz is usually rounded to λ = 1 cm).
    pub fn from_wavelength(wavelength_m: f64) -> Result<Self> {
        if !(wavelength_m > 0.0 && wavelength_m.is_finite()) {
            return Err(Error::invalid(format!(
                "wavelength must be positive, got {wavelength_m}"
            )));
        }
        Ok(CarrierSpec {
            frequency_hz: SPEED_OF_LIGHT_M_S / wavelength_m,
            wavelength_m,
        })
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_m
    }
}

/// Far-field direction of departure.
///
/// 1D layouts use the angle from the positive array axis (90° is broadside);
/// 2D layouts use a unit vector in the array plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Direction {
    Axis { theta_deg: f64 },
    Planar { ux: f64, uy: f64 },
}

impl Direction {
    pub fn axis(theta_deg: f64) -> Result<Self> {
        let d = Direction::Axis { theta_deg };
        d.validate()?;
        Ok(d)
    }

    /// Unit vector at polar angle `phi_rad` in the array plane.
    pub fn planar(phi_rad: f64) -> Self {
        Direction::Planar {
            ux: phi_rad.cos(),
            uy: phi_rad.sin(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Direction::Axis { theta_deg } => {
                if !(theta_deg >= -ANGLE_TOLERANCE_DEG && theta_deg <= 180.0 + ANGLE_TOLERANCE_DEG) {
                    return Err(Error::invalid(format!(
                        "theta must lie in [0, 180] degrees, got {theta_deg}"
                    )));
                }
            }
            Direction::Planar { ux, uy } => {
                if ((ux * ux + uy * uy).sqrt() - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "direction ({ux}, {uy}) is not a unit vector"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> Dim {
        match self {
            Direction::Axis { .. } => Dim::One,
            Direction::Planar { .. } => Dim::Two,
        }
    }

    /// Unit vector in the layout frame.
    pub fn unit(&self) -> Point {
        match *self {
            Direction::Axis { theta_deg } => Point::on_axis(theta_deg.to_radians().cos()),
            Direction::Planar { ux, uy } => Point::new(ux, uy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarLocation {
    pub d_m: f64,
    pub phi_rad: f64,
}

impl PolarLocation {
    pub fn new(d_m: f64, phi_rad: f64) -> Result<Self> {
        if !(d_m > 0.0 && d_m.is_finite() && phi_rad.is_finite()) {
            return Err(Error::invalid(format!(
                "polar location needs a positive distance, got d = {d_m}"
            )));
        }
        Ok(PolarLocation { d_m, phi_rad })
    }

    pub fn to_point(&self) -> Point {
        Point::new(self.d_m * self.phi_rad.cos(), self.d_m * self.phi_rad.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeModel {
    /// `|h_m| = 1`.
    Unit,
    /// `|h_m| = λ / (4π d_m)`.
    #[default]
    FreeSpace,
}

impl AmplitudeModel {
    pub fn gain(&self, distance_m: f64, wavelength_m: f64) -> f64 {
        match self {
            AmplitudeModel::Unit => 1.0,
            AmplitudeModel::FreeSpace => wavelength_m / (4.0 * PI * distance_m),
        }
    }
}

/// One propagation path: its departure direction and complex gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub direction: Direction,
    pub coeff: Complex64,
}

/// Complex per-element channel response.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(Vec<Complex64>);

impl ChannelVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("channel entries must be finite"));
        }
        Ok(ChannelVector(entries))
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `selfᴴ · other`.
    pub fn inner(&self, other: &ChannelVector) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scaled(&self, alpha: Complex64) -> ChannelVector {
        ChannelVector(self.0.iter().map(|z| z * alpha).collect())
    }
}

impl Index<usize> for ChannelVector {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl Add for &ChannelVector {
    type Output = ChannelVector;

    fn add(self, rhs: &ChannelVector) -> ChannelVector {
        ChannelVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

fn check_direction(layout: &ArrayLayout, dir: &Direction) -> Result<()> {
    dir.validate()?;
    if dir.dim() != layout.dim() {
        return Err(Error::invalid(format!(
            "a {} direction cannot steer a {} layout",
            dir.dim(),
            layout.dim()
        )));
    }
    Ok(())
}

/// Plane-wave array response: entry `m` is `exp(+j·β·⟨p_m, u⟩)`.
pub fn steering_vector(layout: &ArrayLayout, dir: &Direction, carrier: &CarrierSpec) -> Result<ChannelVector> {
    check_direction(layout, dir)?;
    let beta = carrier.wavenumber();
    let u = dir.unit();
    Ok(ChannelVector(
        layout
            .positions()
            .iter()
            .map(|p| Complex64::cis(beta * p.dot(&u)))
            .collect(),
    ))
}

/// Phase of one near-field entry, reduced before the complex exponential so
/// that long distances keep their sub-wavelength precision.
fn spherical_phase(distance_m: f64, wavelength_m: f64) -> f64 {
    let cycles = distance_m / wavelength_m;
    -2.0 * PI * (cycles - cycles.floor())
}

/// Response of every element toward a point in the array plane.
pub(crate) fn point_response(
    layout: &ArrayLayout,
    target: &Point,
    carrier: &CarrierSpec,
    amp: AmplitudeModel,
) -> Result<ChannelVector> {
    let mut entries = Vec::with_capacity(layout.len());
    for (m, p) in layout.positions().iter().enumerate() {
        let d = p.distance(target);
        if d < 1e-12 {
            return Err(Error::SingularGeometry(format!(
                "point ({}, {}) coincides with element {m}",
                target.x, target.y
            )));
        }
        let g = amp.gain(d, carrier.wavelength_m);
        entries.push(Complex64::from_polar(g, spherical_phase(d, carrier.wavelength_m)));
    }
    Ok(ChannelVector(entries))
}

/// Spherical-wave response toward a receiver at polar location `loc` relative
/// to the array origin: entry `m` is `g(d_m)·exp(−j·2π·d_m/λ)`.
pub fn nearfield_response(
    layout: &ArrayLayout,
    loc: &PolarLocation,
    carrier: &CarrierSpec,
    amp: AmplitudeModel,
) -> Result<ChannelVector> {
    if layout.dim() != Dim::Two {
        return Err(Error::invalid("near-field responses need a 2D layout"));
    }
    if !(loc.d_m > 0.0) {
        return Err(Error::invalid(format!("distance must be positive, got {}", loc.d_m)));
    }
    point_response(layout, &loc.to_point(), carrier, amp)
}

/// Field-response channel `Σ_l b_l · a(dir_l)`.
pub fn multipath_channel(layout: &ArrayLayout, paths: &[PathSpec], carrier: &CarrierSpec) -> Result<ChannelVector> {
    if paths.is_empty() {
        return Err(Error::invalid("multipath channel needs at least one path"));
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); layout.len()];
    for path in paths {
        if !(path.coeff.re.is_finite() && path.coeff.im.is_finite()) {
            return Err(Error::invalid("path coefficients must be finite"));
        }
        let a = steering_vector(layout, &path.direction, carrier)?;
        for (slot, z) in acc.iter_mut().zip(a.entries()) {
            *slot += path.coeff * z;
        }
    }
    Ok(ChannelVector(acc))
}

/// `|h1ᴴh2| / (‖h1‖·‖h2‖)`, clamped to `[0, 1]`.
pub fn channel_correlation(h1: &ChannelVector, h2: &ChannelVector) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::invalid(format!(
            "channel lengths differ: {} vs {}",
            h1.len(),
            h2.len()
        )));
    }
    let (n1, n2) = (h1.norm(), h2.norm());
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::invalid("correlation is undefined for a zero channel"));
    }
    Ok((h1.inner(h2).norm() / (n1 * n2)).min(1.0))
}

/// Near-field boundary `2·D²/λ`.
pub fn rayleigh_distance(aperture_m: f64, carrier: &CarrierSpec) -> f64 {
    2.0 * aperture_m * aperture_m / carrier.wavelength_m
}

/// A channel described independently of any particular layout, resolved
/// against a layout on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSpec {
    FarField(Direction),
    NearField { location: PolarLocation, amplitude: AmplitudeModel },
    Multipath(Vec<PathSpec>),
}

impl ChannelSpec {
    pub fn resolve(&self, layout: &ArrayLayout, carrier: &CarrierSpec) -> Result<ChannelVector> {
        match self {
            ChannelSpec::FarField(dir) => steering_vector(layout, dir, carrier),
            ChannelSpec::NearField { location, amplitude } => {
                nearfield_response(layout, location, carrier, *amplitude)
            }
            ChannelSpec::Multipath(paths) => multipath_channel(layout, paths, carrier),
        }
    }
}
