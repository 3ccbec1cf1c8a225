//! Synthetic parametric shapes with closed-form signed distance, drag
//! target, and velocity template.
//!
//! Shapes sit in the reference vehicle ROI with the nose at x = 1.0 m, a
//! 0.2 m ground clearance, and lateral centering. Box-family shapes carry a
//! thin rear spoiler plate (0.06 m thick, height a shape parameter): a
//! deliberately fine-scale feature that R512 grids resolve and R128 grids
//! alias. The drag target is
//!
//! `cd = base(family) + 0.08 * (A/2.0 - 1) + 0.10 * sin^2(slant)
//!       + 0.30 * spoiler_height + 0.01 * exp(-corner_radius/0.05)`
//!
//! with `A` the frontal area (W*H, scaled by pi/4 for ellipsoids): strictly
//! increasing in frontal area, rising with slant angle and spoiler height,
//! falling slightly as the corner radius rounds the body off. The corner
//! radius shapes the target only; meshes and SDFs stay sharp-edged.
//!
//! The velocity template is a unit free stream in +x with a boundary-layer
//! deficit hugging the surface and a Gaussian wake deficit spreading behind
//! the body, zero inside the body:
//!
//! `u_x = (1 - 0.85 * exp(-sdf/0.15)) * (1 - 0.6 * exp(-dx/3.0) * exp(-rho^2/(2 * sigma^2)))`
//! `u_z = 0.1 * wake * (z - cz)/rz`,  `sigma = 1 + dx/4`, `dx = max(0, x - x_rear)`,
//!
//! where `rho` is the (y, z) distance from the wake axis normalized by the
//! body half-extents.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::grid::{FieldTag, Roi, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Box,
    Ellipsoid,
    BoxWithSlant,
}

/// A synthetic vehicle stand-in: body extents in meters, rear slant angle
/// in radians (used by `BoxWithSlant`), rear spoiler height in meters
/// (box families; 0 disables it), corner radius in meters (drag target
/// only), plus raw simulation-parameter stand-ins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub family: ShapeFamily,
    /// (length, width, height) in meters.
    pub extents: [f64; 3],
    pub slant_angle: f64,
    #[serde(default)]
    pub spoiler_height: f64,
    pub corner_radius: f64,
    pub sim_params: Vec<f64>,
}

/// Ground clearance under the body, meters.
pub const CLEARANCE: f64 = 0.2;
/// Nose position along x inside the ROI, meters.
pub const NOSE_X: f64 = 1.0;
/// Spoiler plate thickness along x, meters (under one R128 cell, a few
/// R512 cells).
pub const SPOILER_THICKNESS: f64 = 0.06;

impl ShapeSpec {
    /// Body center in ROI coordinates (reference vehicle ROI).
    pub fn center(&self, roi: &Roi) -> Point3<f64> {
        Point3::new(
            roi.origin[0] + NOSE_X + self.extents[0] / 2.0,
            roi.origin[1] + roi.extent[1] / 2.0,
            roi.origin[2] + CLEARANCE + self.extents[2] / 2.0,
        )
    }

    pub fn half_extents(&self) -> Vector3<f64> {
        Vector3::new(
            self.extents[0] / 2.0,
            self.extents[1] / 2.0,
            self.extents[2] / 2.0,
        )
    }

    /// Frontal area in m^2.
    pub fn frontal_area(&self) -> f64 {
        let a = self.extents[1] * self.extents[2];
        match self.family {
            ShapeFamily::Ellipsoid => std::f64::consts::FRAC_PI_4 * a,
            _ => a,
        }
    }

    /// Analytic drag-coefficient target (see the module docs).
    pub fn target_cd(&self) -> f64 {
        let base = match self.family {
            ShapeFamily::Box => 0.32,
            ShapeFamily::BoxWithSlant => 0.28,
            ShapeFamily::Ellipsoid => 0.18,
        };
        let slant = match self.family {
            ShapeFamily::BoxWithSlant => 0.10 * self.slant_angle.sin().powi(2),
            _ => 0.0,
        };
        base + 0.08 * (self.frontal_area() / 2.0 - 1.0)
            + slant
            + 0.30 * self.effective_spoiler_height()
            + 0.01 * (-self.corner_radius / 0.05).exp()
    }

    /// Spoiler height actually applied (box families only).
    pub fn effective_spoiler_height(&self) -> f64 {
        match self.family {
            ShapeFamily::Ellipsoid => 0.0,
            _ => self.spoiler_height.max(0.0),
        }
    }

    /// Spoiler plate as center/half-extents, when present: a thin vertical
    /// plate across the rear top edge.
    fn spoiler_box(&self, roi: &Roi) -> Option<(Point3<f64>, Vector3<f64>)> {
        let h_sp = self.effective_spoiler_height();
        if h_sp <= 0.0 {
            return None;
        }
        let center = self.center(roi);
        let half = self.half_extents();
        // Top of the supporting edge: the rear top for the plain box, the
        // slant start for the slanted box.
        let (x_edge, z_base) = match self.family {
            ShapeFamily::BoxWithSlant => {
                let run = 0.8 * half.x;
                (center.x + half.x - run, center.z + half.z)
            }
            _ => (center.x + half.x, center.z + half.z),
        };
        Some((
            Point3::new(x_edge - SPOILER_THICKNESS / 2.0, center.y, z_base + h_sp / 2.0),
            Vector3::new(SPOILER_THICKNESS / 2.0, 0.8 * half.y, h_sp / 2.0),
        ))
    }

    /// Triangle mesh of the body, placed in the ROI. The spoiler, when
    /// present, is appended as a second closed shell (the winding-number
    /// sign handles overlapping shells).
    pub fn mesh(&self, roi: &Roi) -> crate::mesh::TriangleMesh {
        use crate::mesh::primitives;
        let c = self.center(roi);
        let h = self.half_extents();
        let mut mesh = match self.family {
            ShapeFamily::Box => primitives::box_mesh(c, h),
            ShapeFamily::Ellipsoid => primitives::ellipsoid(c, h, 4),
            ShapeFamily::BoxWithSlant => primitives::box_with_slant(c, h, self.slant_angle),
        };
        if let Some((sc, sh)) = self.spoiler_box(roi) {
            let spoiler = primitives::box_mesh(sc, sh);
            let offset = mesh.vertices.len() as u32;
            mesh.vertices.extend_from_slice(&spoiler.vertices);
            mesh.triangles.extend(
                spoiler
                    .triangles
                    .iter()
                    .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
            );
        }
        mesh
    }
}

fn box_sdf(p: &Point3<f64>, center: &Point3<f64>, half: &Vector3<f64>) -> f64 {
    let q = Vector3::new(
        (p.x - center.x).abs() - half.x,
        (p.y - center.y).abs() - half.y,
        (p.z - center.z).abs() - half.z,
    );
    let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

/// Signed distance from `p` to the shape surface, negative inside.
///
/// Box: exact. Ellipsoid: scaled-sphere bound `(|S^-1 d| - 1) * min(S)`,
/// a 1-Lipschitz underestimate with the exact sign. Slanted box: max of the
/// box SDF and the slant half-space, exact inside and a 1-Lipschitz
/// underestimate in exterior corner regions. The spoiler joins the body as
/// a union (`min` of the two SDFs).
pub fn analytic_sdf(spec: &ShapeSpec, roi: &Roi, p: &Point3<f64>) -> f64 {
    let center = spec.center(roi);
    let half = spec.half_extents();
    let body = match spec.family {
        ShapeFamily::Box => box_sdf(p, &center, &half),
        ShapeFamily::Ellipsoid => {
            let d = Vector3::new(
                (p.x - center.x) / half.x,
                (p.y - center.y) / half.y,
                (p.z - center.z) / half.z,
            );
            (d.norm() - 1.0) * half.x.min(half.y).min(half.z)
        }
        ShapeFamily::BoxWithSlant => {
            let box_part = box_sdf(p, &center, &half);
            // Slant plane matching `primitives::box_with_slant`: from the
            // top at x0 dropping toward the rear.
            let run = 0.8 * half.x;
            let drop = (run * spec.slant_angle.tan()).clamp(0.0, 1.6 * half.z);
            let x0 = center.x + half.x - run;
            let z0 = center.z + half.z;
            // Outward normal of the cutting plane.
            let n = Vector3::new(drop, 0.0, run).normalize();
            let plane = n.dot(&Vector3::new(p.x - x0, 0.0, p.z - z0));
            box_part.max(plane)
        }
    };
    match spec.spoiler_box(roi) {
        Some((sc, sh)) => body.min(box_sdf(p, &sc, &sh)),
        None => body,
    }
}

/// Rear x coordinate of the body (wake origin).
fn rear_x(spec: &ShapeSpec, roi: &Roi) -> f64 {
    spec.center(roi).x + spec.extents[0] / 2.0
}

/// Closed-form velocity at a point (see the module docs for the formula).
pub fn velocity_at(spec: &ShapeSpec, roi: &Roi, p: &Point3<f64>) -> [f64; 3] {
    let sdf = analytic_sdf(spec, roi, p);
    if sdf <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let center = spec.center(roi);
    let half = spec.half_extents();
    let dx = (p.x - rear_x(spec, roi)).max(0.0);
    let sigma = 1.0 + dx / 4.0;
    let rho2 = ((p.y - center.y) / half.y).powi(2) + ((p.z - center.z) / half.z).powi(2);
    let wake = 0.6 * (-dx / 3.0).exp() * (-rho2 / (2.0 * sigma * sigma)).exp();
    let boundary_layer = 0.85 * (-sdf / 0.15).exp();
    let ux = (1.0 - boundary_layer) * (1.0 - if dx > 0.0 { wake } else { 0.0 });
    let uz = if dx > 0.0 {
        0.1 * wake * (p.z - center.z) / half.z
    } else {
        0.0
    };
    [ux.max(0.0), 0.0, uz]
}

/// Materialize the SDF and velocity grids of a shape at a grid shape.
pub fn sample_grids(spec: &ShapeSpec, roi: &Roi, shape: [usize; 3]) -> (VoxelGrid, VoxelGrid) {
    let mut sdf = VoxelGrid::zeros(shape, 1, *roi, FieldTag::Sdf);
    let mut velocity = VoxelGrid::zeros(shape, 3, *roi, FieldTag::Velocity);
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            for k in 0..shape[2] {
                let p = roi.cell_center(shape, i, j, k);
                sdf.set(0, i, j, k, analytic_sdf(spec, roi, &p));
                let u = velocity_at(spec, roi, &p);
                for (ch, &val) in u.iter().enumerate() {
                    velocity.set(ch, i, j, k, val);
                }
            }
        }
    }
    (sdf, velocity)
}
