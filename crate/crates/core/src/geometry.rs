//! User placement, RIS element indexing and array responses.
//!
//! The RIS lies in the YZ plane with its central element at the origin.
//! Element `(h, v)` sits at `(0, h·d_h, v·d_v)` with signed indices
//! `h ∈ [-(n_h-1)/2, (n_h-1)/2]` and likewise for `v`. Elements are
//! flattened left-to-right, bottom-to-top.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Planar RIS layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisGeometry {
    n_h: usize,
    n_v: usize,
    d_h: f64,
    d_v: f64,
    lambda: f64,
}

impl RisGeometry {
    pub fn new(n_h: usize, n_v: usize, d_h: f64, d_v: f64, lambda: f64) -> Result<Self> {
        if n_h == 0 || n_h.is_multiple_of(2) || n_v == 0 || n_v.is_multiple_of(2) {
            return Err(Error::InvalidGeometry(format!("element counts must be odd and positive, got {n_h}x{n_v}")));
        }
        for (name, value) in [("d_h", d_h), ("d_v", d_v), ("lambda", lambda)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidGeometry(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(Self { n_h, n_v, d_h, d_v, lambda })
    }

    /// Square surface with half-wavelength spacing.
    pub fn half_wavelength(side: usize, lambda: f64) -> Result<Self> {
        Self::new(side, side, lambda / 2.0, lambda / 2.0, lambda)
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn d_h(&self) -> f64 {
        self.d_h
    }

    pub fn d_v(&self) -> f64 {
        self.d_v
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    /// Total element count `N`.
    pub fn len(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn half_h(&self) -> i64 {
        (self.n_h as i64 - 1) / 2
    }

    fn half_v(&self) -> i64 {
        (self.n_v as i64 - 1) / 2
    }

    /// Largest distance between two elements.
    pub fn aperture(&self) -> f64 {
        let w = (self.n_h - 1) as f64 * self.d_h;
        let h = (self.n_v - 1) as f64 * self.d_v;
        w.hypot(h)
    }

    /// Flattened index of element `(h, v)`.
    pub fn linear_index(&self, h: i64, v: i64) -> Result<usize> {
        self.check_index(h, v)?;
        Ok(((v + self.half_v()) as usize) * self.n_h + (h + self.half_h()) as usize)
    }

    /// Signed `(h, v)` indices of flattened element `n`.
    pub fn signed_index(&self, n: usize) -> (i64, i64) {
        let h = (n % self.n_h) as i64 - self.half_h();
        let v = (n / self.n_h) as i64 - self.half_v();
        (h, v)
    }

    /// Signed indices of every element in flattened order.
    pub fn indices(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.len()).map(|n| self.signed_index(n))
    }

    fn check_index(&self, h: i64, v: i64) -> Result<()> {
        if h.abs() > self.half_h() || v.abs() > self.half_v() {
            return Err(Error::IndexOutOfRange { h, v, n_h: self.n_h, n_v: self.n_v });
        }
        Ok(())
    }

    /// Position of element `(h, v)` in the global frame.
    pub fn element_position(&self, h: i64, v: i64) -> Cartesian3 {
        Cartesian3 { x: 0.0, y: h as f64 * self.d_h, z: v as f64 * self.d_v }
    }
}

/// Admissible angular range for user directions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngularDomain {
    /// Azimuth and elevation in `[-π/2, π/2)`: users in front of the surface.
    #[default]
    Front,
    /// Azimuth and elevation in `[-π, π)`.
    Full,
}

impl AngularDomain {
    pub fn half_width(self) -> f64 {
        match self {
            AngularDomain::Front => FRAC_PI_2,
            AngularDomain::Full => PI,
        }
    }

    pub fn contains(self, angle: f64) -> bool {
        let w = self.half_width();
        (-w..w).contains(&angle)
    }
}

/// Polar position of one user relative to the RIS centre, plus its
/// transmit power in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeState {
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
    pub power: f64,
}

impl UeState {
    pub fn new(r: f64, phi: f64, theta: f64, power: f64) -> Result<Self> {
        Self::in_domain(r, phi, theta, power, AngularDomain::Front)
    }

    pub fn in_domain(r: f64, phi: f64, theta: f64, power: f64, domain: AngularDomain) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter { name: "r", reason: format!("range must be positive, got {r}") });
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "power",
                reason: format!("transmit power must be positive, got {power}"),
            });
        }
        if !domain.contains(phi) {
            return Err(Error::InvalidParameter { name: "phi", reason: format!("{phi} outside {domain:?} domain") });
        }
        if !domain.contains(theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("{theta} outside {domain:?} domain"),
            });
        }
        Ok(Self { r, phi, theta, power })
    }

    pub fn with_power(self, power: f64) -> Self {
        Self { power, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cartesian3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Cartesian3 {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Cartesian3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

pub fn ue_position(ue: &UeState) -> Cartesian3 {
    let (sp, cp) = ue.phi.sin_cos();
    let (st, ct) = ue.theta.sin_cos();
    Cartesian3 { x: ue.r * cp * ct, y: ue.r * sp * ct, z: ue.r * st }
}

/// Exact distance from the user to element `(h, v)`.
pub fn element_distance_exact(ue: &UeState, h: i64, v: i64, geom: &RisGeometry) -> Result<f64> {
    geom.check_index(h, v)?;
    Ok(ue_position(ue).distance(&geom.element_position(h, v)))
}

/// Second-order (Fresnel) expansion of the element distance.
pub fn element_distance_fresnel(ue: &UeState, h: i64, v: i64, geom: &RisGeometry) -> f64 {
    let (hd, vd) = (h as f64 * geom.d_h, v as f64 * geom.d_v);
    ue.r - hd * ue.phi.sin() * ue.theta.cos() - vd * ue.theta.sin() + (hd * hd + vd * vd) / (2.0 * ue.r)
}

/// Array response toward the user using exact element distances.
pub fn array_response(ue: &UeState, geom: &RisGeometry) -> CVector {
    let k = geom.wavenumber();
    let p = ue_position(ue);
    CVector::from_iterator(
        geom.len(),
        geom.indices().map(|(h, v)| {
            let rn = p.distance(&geom.element_position(h, v));
            Complex64::from_polar(1.0, k * (ue.r - rn))
        }),
    )
}

/// Phase coefficients of the Fresnel-approximated array response.
///
/// Entry `(h, v)` of the response is `exp(j(h·α + v·β − (h²d_h² + v²d_v²)·γ))`,
/// which is the exact response with the distance replaced by its Fresnel
/// expansion. Setting `γ = 0` gives the far-field (planar wavefront) response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl FresnelCoefficients {
    pub fn near_field(geom: &RisGeometry, r: f64, phi: f64, theta: f64) -> Self {
        let far = Self::far_field(geom, phi, theta);
        Self { gamma: PI / (geom.lambda * r), ..far }
    }

    pub fn far_field(geom: &RisGeometry, phi: f64, theta: f64) -> Self {
        let k = geom.wavenumber();
        Self { alpha: k * geom.d_h * phi.sin() * theta.cos(), beta: k * geom.d_v * theta.sin(), gamma: 0.0 }
    }

    pub fn of(ue: &UeState, geom: &RisGeometry) -> Self {
        Self::near_field(geom, ue.r, ue.phi, ue.theta)
    }

    pub fn phase(&self, geom: &RisGeometry, h: i64, v: i64) -> f64 {
        let (hf, vf) = (h as f64, v as f64);
        let quad = hf * hf * geom.d_h * geom.d_h + vf * vf * geom.d_v * geom.d_v;
        hf * self.alpha + vf * self.beta - quad * self.gamma
    }

    pub fn response(&self, geom: &RisGeometry) -> CVector {
        CVector::from_iterator(
            geom.len(),
            geom.indices().map(|(h, v)| Complex64::from_polar(1.0, self.phase(geom, h, v))),
        )
    }
}

/// `N×K` matrix of Fresnel responses, one column per user.
pub fn fresnel_response_matrix(ues: &[UeState], geom: &RisGeometry) -> CMatrix {
    let mut a = CMatrix::zeros(geom.len(), ues.len());
    for (k, ue) in ues.iter().enumerate() {
        a.set_column(k, &FresnelCoefficients::of(ue, geom).response(geom));
    }
    a
}
