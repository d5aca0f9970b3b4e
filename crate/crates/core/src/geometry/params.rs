use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A-priori geometric data plus the parametric family realizing it.
///
/// `rho1`, `rho2` and `h1` are chosen by the user and checked for
/// feasibility against the family; they are never derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryParams {
    pub dimension: usize,
    pub rho0: f64,
    pub m0: f64,
    pub d0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub h1: f64,
    pub diam_omega: f64,
    pub mesh_size: f64,
    pub family: Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Disk(DiskFamily),
    Box(BoxFamily),
}

/// Ω a disk of radius `radius` centred at the origin; Σ the arc of
/// half-angle `sigma_half_angle` centred on the positive y axis; Σ₀ the
/// concentric arc with `sigma0_fraction` of that angular width; A the
/// annular sector between `radius` and `bulge_radius` over Σ₀; D, D′, D̃
/// concentric disks. The Lipschitz constants of this family are those of the
/// circle (M₀ = 1 for ρ₀ ≤ radius / 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskFamily {
    pub radius: f64,
    pub sigma_half_angle: f64,
    pub sigma0_fraction: f64,
    pub bulge_radius: f64,
    pub r_d: f64,
    pub r_dprime: f64,
    pub r_dtilde: f64,
    /// Rings of constant angular resolution on each side of ∂D̃. Normal
    /// offsets of boundary vertices by up to this many radial steps land on
    /// mesh vertices exactly.
    pub band_layers: usize,
}

/// Ω = (0, side)³; Σ the top face z = side; Σ₀ the centred square with
/// `sigma0_fraction` of the side; A the box of height `bulge_height` over
/// Σ₀; D, D′, D̃ centred cubes with the given half sides. Lipschitz constants
/// are those of the cube (M₀ = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxFamily {
    pub side: f64,
    pub sigma0_fraction: f64,
    pub bulge_height: f64,
    pub d_half: f64,
    pub dprime_half: f64,
    pub dtilde_half: f64,
}

impl DiskFamily {
    pub fn q(&self) -> [f64; 3] {
        [0.0, 0.5 * (self.radius + self.bulge_radius), 0.0]
    }

    /// Largest ball radius centred at Q inside A.
    pub fn inscribed_radius(&self) -> f64 {
        let rq = 0.5 * (self.radius + self.bulge_radius);
        let beta = self.sigma_half_angle * self.sigma0_fraction;
        let side = if beta < PI / 2.0 { rq * beta.sin() } else { f64::INFINITY };
        (0.5 * (self.bulge_radius - self.radius)).min(side)
    }
}

impl BoxFamily {
    pub fn q(&self) -> [f64; 3] {
        let c = 0.5 * self.side;
        [c, c, self.side + 0.5 * self.bulge_height]
    }

    pub fn inscribed_radius(&self) -> f64 {
        (0.5 * self.sigma0_fraction * self.side).min(0.5 * self.bulge_height)
    }
}

impl GeometryParams {
    /// The default 2D configuration: unit disk, Σ the upper half circle.
    pub fn default_disk() -> Self {
        GeometryParams {
            dimension: 2,
            rho0: 0.5,
            m0: 1.0,
            d0: 0.3,
            rho1: 0.15,
            rho2: 0.18,
            h1: 0.085,
            diam_omega: 2.0,
            mesh_size: 0.02,
            family: Family::Disk(DiskFamily {
                radius: 1.0,
                sigma_half_angle: PI / 2.0,
                sigma0_fraction: 0.5,
                bulge_radius: 1.6,
                r_d: 0.2,
                r_dprime: 0.4,
                r_dtilde: 0.6,
                band_layers: 4,
            }),
        }
    }

    /// A coarse 3D configuration on the unit cube.
    pub fn default_box() -> Self {
        GeometryParams {
            dimension: 3,
            rho0: 0.4,
            m0: 1.0,
            d0: 0.3,
            rho1: 0.15,
            rho2: 0.09,
            h1: 0.044,
            diam_omega: 3f64.sqrt(),
            mesh_size: 1.0 / 48.0,
            family: Family::Box(BoxFamily {
                side: 1.0,
                sigma0_fraction: 0.6,
                bulge_height: 0.6,
                d_half: 0.05,
                dprime_half: 0.15,
                dtilde_half: 0.25,
            }),
        }
    }

    pub fn q(&self) -> [f64; 3] {
        match &self.family {
            Family::Disk(d) => d.q(),
            Family::Box(b) => b.q(),
        }
    }

    /// Checks every feasibility constraint, naming the violated parameter.
    pub fn validate(&self) -> Result<()> {
        let pos = |key: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::geometry(key, format!("must be positive and finite, got {v}")))
            }
        };
        pos("rho0", self.rho0)?;
        pos("m0", self.m0)?;
        pos("rho1", self.rho1)?;
        pos("rho2", self.rho2)?;
        pos("h1", self.h1)?;
        pos("mesh_size", self.mesh_size)?;
        if !(self.d0 > 0.0 && self.d0 <= self.rho0) {
            return Err(Error::geometry(
                "d0",
                format!("size of Sigma requires 0 < d0 <= rho0, got d0 = {} and rho0 = {}", self.d0, self.rho0),
            ));
        }
        if self.h1 >= self.rho2 / 2.0 {
            return Err(Error::geometry("h1", format!("h1 = {} must be below rho2 / 2 = {}", self.h1, self.rho2 / 2.0)));
        }
        let finest = self.rho1.min(self.rho2).min(self.h1);
        if self.mesh_size > finest / 2.0 {
            return Err(Error::geometry(
                "mesh_size",
                format!("mesh size {} exceeds min(rho1, rho2, h1) / 2 = {}", self.mesh_size, finest / 2.0),
            ));
        }
        let (diam, dist_d, sigma_size, gaps, inscribed) = match &self.family {
            Family::Disk(d) => {
                if self.dimension != 2 {
                    return Err(Error::geometry("dimension", "disk family is two-dimensional"));
                }
                if !(0.0 < d.r_d && d.r_d < d.r_dprime && d.r_dprime < d.r_dtilde && d.r_dtilde < d.radius) {
                    return Err(Error::geometry("family", "need 0 < r_d < r_dprime < r_dtilde < radius"));
                }
                if !(d.sigma_half_angle > 0.0 && d.sigma_half_angle < PI) {
                    return Err(Error::geometry("family", "sigma_half_angle must lie in (0, pi)"));
                }
                if !(d.sigma0_fraction > 0.0 && d.sigma0_fraction < 1.0) {
                    return Err(Error::geometry("family", "sigma0_fraction must lie in (0, 1)"));
                }
                if d.bulge_radius <= d.radius {
                    return Err(Error::geometry("family", "bulge_radius must exceed radius"));
                }
                let band = d.band_layers as f64 * self.mesh_size;
                if d.r_dtilde - band <= d.r_dprime + self.mesh_size || d.r_dtilde + band >= d.radius - self.mesh_size {
                    return Err(Error::geometry(
                        "band_layers",
                        format!("band of {} layers around the D-tilde boundary does not fit between its neighbours", d.band_layers),
                    ));
                }
                (
                    2.0 * d.radius,
                    d.radius - d.r_d,
                    2.0 * d.radius * (d.sigma_half_angle / 2.0).sin(),
                    [d.r_dprime - d.r_d, d.r_dtilde - d.r_dprime, d.radius - d.r_dtilde - self.rho2],
                    d.inscribed_radius(),
                )
            }
            Family::Box(b) => {
                if self.dimension != 3 {
                    return Err(Error::geometry("dimension", "box family is three-dimensional"));
                }
                if !(0.0 < b.d_half && b.d_half < b.dprime_half && b.dprime_half < b.dtilde_half && b.dtilde_half < 0.5 * b.side) {
                    return Err(Error::geometry("family", "need 0 < d_half < dprime_half < dtilde_half < side / 2"));
                }
                if !(b.sigma0_fraction > 0.0 && b.sigma0_fraction < 1.0) {
                    return Err(Error::geometry("family", "sigma0_fraction must lie in (0, 1)"));
                }
                if !(b.bulge_height > 0.0) {
                    return Err(Error::geometry("family", "bulge_height must be positive"));
                }
                (
                    3f64.sqrt() * b.side,
                    0.5 * b.side - b.d_half,
                    0.5 * b.side,
                    [b.dprime_half - b.d_half, b.dtilde_half - b.dprime_half, 0.5 * b.side - b.dtilde_half - self.rho2],
                    b.inscribed_radius(),
                )
            }
        };
        if (self.diam_omega - diam).abs() > 1e-9 * diam {
            return Err(Error::geometry("diam_omega", format!("family diameter is {diam}, configured {}", self.diam_omega)));
        }
        if dist_d < self.rho0 {
            return Err(Error::geometry("rho0", format!("dist(D, boundary) = {dist_d} is below rho0 = {}", self.rho0)));
        }
        if sigma_size < self.d0 {
            return Err(Error::geometry("d0", format!("Sigma has size {sigma_size}, below d0 = {}", self.d0)));
        }
        let names = ["D to D'", "D' to D-tilde", "D-tilde to the rho2-interior of the augmented domain"];
        for (gap, name) in gaps.iter().zip(names) {
            if *gap <= self.rho2 {
                return Err(Error::geometry("rho2", format!("distance {name} is {gap}, must exceed rho2 = {}", self.rho2)));
            }
        }
        if 2.0 * self.rho1 > inscribed {
            return Err(Error::geometry(
                "rho1",
                format!("ball of radius 2 rho1 = {} does not fit in the attachment (inscribed radius {inscribed})", 2.0 * self.rho1),
            ));
        }
        Ok(())
    }
}
