//! Fisheye camera model and coordinate transforms.
//!
//! Every transform here manipulates pixel coordinates only; no luminance is
//! resampled. Fisheye pixels are expressed in polar form about the principal
//! point, the radius is carried through the lens model into a virtual pinhole
//! ("perspective") image plane with the same focal length, and back.
//!
//! Polar angles follow the mathematical convention: `phi = 0` points along
//! increasing column index and grows counter-clockwise with rows pointing up.
//! Since image rows grow downward, `phi = atan2(-(m - c_m), n - c_n)`.
//!
//! Incident angles close to and beyond 90 degrees have no finite pinhole
//! image. Above the compensation onset `theta_lim` the perspective radius is
//! continued linearly with matching value and slope, which keeps the mapping
//! finite, strictly increasing, C1 and exactly invertible. This continuation
//! is a stand-in for a dedicated ultra-wide-angle compensation.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_FOV_DEG: f64 = 185.0;
pub const DEFAULT_THETA_LIM_DEG: f64 = 85.0;

/// Absolute image position. `m` is the row (down), `n` the column (right).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub m: f64,
    pub n: f64,
}

impl PixelCoord {
    pub const fn new(m: f64, n: f64) -> Self {
        Self { m, n }
    }
}

/// Fisheye image position relative to the principal point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarFisheye {
    pub r_f: f64,
    pub phi: f64,
}

/// Position on the virtual pinhole image plane. `phi` is shared with the
/// fisheye point it was projected from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPerspective {
    pub r_p: f64,
    pub phi: f64,
}

/// Radial lens model relating incident angle to image radius.
///
/// This is the single place where other radially symmetric models
/// (equidistant, stereographic, ...) would be added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadialModel {
    #[default]
    Equisolid,
}

impl RadialModel {
    /// Largest incident angle the model can represent.
    pub fn max_angle(self) -> f64 {
        match self {
            RadialModel::Equisolid => PI,
        }
    }

    fn project(self, theta: f64, f: f64) -> f64 {
        match self {
            RadialModel::Equisolid => 2.0 * f * (0.5 * theta).sin(),
        }
    }

    fn unproject(self, r: f64, f: f64) -> f64 {
        match self {
            RadialModel::Equisolid => 2.0 * (r / (2.0 * f)).min(1.0).asin(),
        }
    }
}

/// Equisolid-angle fisheye intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub focal_length_px: f64,
    pub principal_point: PixelCoord,
    pub fov_deg: f64,
    pub theta_lim_rad: f64,
    pub model: RadialModel,
}

impl CameraModel {
    /// Equisolid camera with the default 185 degree field of view and 85 degree
    /// compensation onset.
    pub fn new(focal_length_px: f64, principal_point: PixelCoord) -> Result<Self> {
        Self::with_limits(
            focal_length_px,
            principal_point,
            DEFAULT_FOV_DEG,
            DEFAULT_THETA_LIM_DEG.to_radians(),
        )
    }

    /// Camera whose principal point sits at the center of a `height x width` image.
    pub fn centered(focal_length_px: f64, height: usize, width: usize) -> Result<Self> {
        Self::new(focal_length_px, image_center(height, width))
    }

    pub fn with_limits(
        focal_length_px: f64,
        principal_point: PixelCoord,
        fov_deg: f64,
        theta_lim_rad: f64,
    ) -> Result<Self> {
        let cam = Self {
            focal_length_px,
            principal_point,
            fov_deg,
            theta_lim_rad,
            model: RadialModel::Equisolid,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length_px.is_finite() && self.focal_length_px > 0.0) {
            return Err(Error::InvalidCamera(format!(
                "focal length must be positive, got {}",
                self.focal_length_px
            )));
        }
        if !(self.principal_point.m.is_finite() && self.principal_point.n.is_finite()) {
            return Err(Error::InvalidCamera(
                "principal point must be finite".into(),
            ));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return Err(Error::InvalidCamera(format!(
                "field of view must lie in (0, 360] degrees, got {}",
                self.fov_deg
            )));
        }
        if !(self.theta_lim_rad > 0.0 && self.theta_lim_rad < 0.5 * PI) {
            return Err(Error::InvalidCamera(format!(
                "compensation onset must lie in (0, 90) degrees, got {}",
                self.theta_lim_rad.to_degrees()
            )));
        }
        Ok(())
    }

    pub fn half_fov_rad(&self) -> f64 {
        0.5 * self.fov_deg.to_radians()
    }

    /// Image radius of the field-of-view border.
    pub fn fov_radius(&self) -> f64 {
        self.model.project(
            self.half_fov_rad().min(self.model.max_angle()),
            self.focal_length_px,
        )
    }

    /// Largest fisheye radius the lens model can produce (2f for equisolid).
    pub fn max_radius(&self) -> f64 {
        self.model
            .project(self.model.max_angle(), self.focal_length_px)
    }

    /// Incident angle to fisheye image radius.
    pub fn project(&self, theta: f64) -> Result<f64> {
        if !(0.0..=self.model.max_angle()).contains(&theta) {
            return Err(Error::Domain {
                what: "incident angle",
                value: theta,
                domain: "[0, pi]",
            });
        }
        Ok(self.model.project(theta, self.focal_length_px))
    }

    /// Fisheye image radius to incident angle.
    pub fn unproject(&self, r_f: f64) -> Result<f64> {
        self.check_fisheye_radius(r_f)?;
        Ok(self.model.unproject(r_f, self.focal_length_px))
    }

    /// Perspective radius of a ray at incident angle `theta`, including the
    /// linear continuation above `theta_lim`.
    pub fn perspective_radius_of_angle(&self, theta: f64) -> f64 {
        let f = self.focal_length_px;
        let lim = self.theta_lim_rad;
        if theta <= lim {
            f * theta.tan()
        } else {
            let c = lim.cos();
            f * lim.tan() + f * (theta - lim) / (c * c)
        }
    }

    /// Inverse of [`Self::perspective_radius_of_angle`], saturating at the
    /// model's maximum angle.
    pub fn angle_of_perspective_radius(&self, r_p: f64) -> f64 {
        let f = self.focal_length_px;
        let lim = self.theta_lim_rad;
        let knee = f * lim.tan();
        let theta = if r_p <= knee {
            (r_p / f).atan()
        } else {
            let c = lim.cos();
            lim + (r_p - knee) * c * c / f
        };
        theta.min(self.model.max_angle())
    }

    pub fn fisheye_to_perspective_radius(&self, r_f: f64) -> Result<f64> {
        let theta = self.unproject(r_f)?;
        Ok(self.perspective_radius_of_angle(theta))
    }

    pub fn perspective_to_fisheye_radius(&self, r_p: f64) -> Result<f64> {
        if r_p.is_nan() || r_p < 0.0 {
            return Err(Error::Domain {
                what: "perspective radius",
                value: r_p,
                domain: "[0, inf)",
            });
        }
        let theta = self.angle_of_perspective_radius(r_p);
        Ok(self.model.project(theta, self.focal_length_px))
    }

    pub fn pixel_to_polar(&self, p: PixelCoord) -> PolarFisheye {
        let up = -(p.m - self.principal_point.m);
        let right = p.n - self.principal_point.n;
        let r_f = up.hypot(right);
        if r_f == 0.0 {
            return PolarFisheye { r_f: 0.0, phi: 0.0 };
        }
        let mut phi = up.atan2(right);
        if phi == -PI {
            phi = PI;
        }
        PolarFisheye { r_f, phi }
    }

    pub fn polar_to_pixel(&self, q: PolarFisheye) -> PixelCoord {
        let (sin, cos) = q.phi.sin_cos();
        PixelCoord {
            m: self.principal_point.m - q.r_f * sin,
            n: self.principal_point.n + q.r_f * cos,
        }
    }

    pub fn to_perspective(&self, q: PolarFisheye) -> Result<PolarPerspective> {
        Ok(PolarPerspective {
            r_p: self.fisheye_to_perspective_radius(q.r_f)?,
            phi: q.phi,
        })
    }

    pub fn to_fisheye(&self, q: PolarPerspective) -> Result<PolarFisheye> {
        Ok(PolarFisheye {
            r_f: self.perspective_to_fisheye_radius(q.r_p)?,
            phi: q.phi,
        })
    }

    /// Moves a fisheye pixel by `shift` columns on the perspective plane and
    /// returns where it lands in the fisheye image.
    ///
    /// Pixels beyond the largest radius the lens can image carry no light and
    /// are returned unchanged.
    pub fn shift_in_perspective(&self, p: PixelCoord, shift: f64) -> PixelCoord {
        let polar = self.pixel_to_polar(p);
        let Ok(persp) = self.to_perspective(polar) else {
            return p;
        };
        let (sin, cos) = persp.phi.sin_cos();
        let right = persp.r_p * cos + shift;
        let up = persp.r_p * sin;
        let shifted = PolarPerspective {
            r_p: up.hypot(right),
            phi: if up == 0.0 && right == 0.0 {
                0.0
            } else {
                up.atan2(right)
            },
        };
        let back = self
            .to_fisheye(shifted)
            .expect("perspective radius is non-negative by construction");
        self.polar_to_pixel(back)
    }

    fn check_fisheye_radius(&self, r_f: f64) -> Result<()> {
        if !(0.0..=self.max_radius()).contains(&r_f) {
            return Err(Error::Domain {
                what: "fisheye radius",
                value: r_f,
                domain: "[0, 2f]",
            });
        }
        Ok(())
    }
}

/// Geometric center of a `height x width` pixel grid.
pub fn image_center(height: usize, width: usize) -> PixelCoord {
    PixelCoord::new((height as f64 - 1.0) * 0.5, (width as f64 - 1.0) * 0.5)
}
