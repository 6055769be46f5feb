//! Oriented bounding boxes and a separating-axis overlap test.
//!
//! Links and workspace obstacles are approximated by boxes.  Two boxes
//! are disjoint exactly when a separating axis exists among the 15
//! candidates (3 face normals each, 9 edge-direction cross products);
//! [`obb_overlap`] tests all of them.  [`collision_free`] places per-link
//! boxes with forward kinematics and checks them against each other
//! (skipping adjacent pairs, which touch by construction) and against the
//! obstacle list.

use nalgebra::{Matrix3, Vector3};

use crate::dynamics::link_poses;
use crate::robot::RobotModel;

/// An oriented box: center, half extents, and a rotation whose columns
/// are the box axes.
#[derive(Clone, Debug)]
pub struct Obb {
    /// Box center (m).
    pub center: Vector3<f64>,
    /// Half extents along the box axes (m).
    pub half_extents: Vector3<f64>,
    /// Rotation from box frame to the frame the box lives in.
    pub orientation: Matrix3<f64>,
}

impl Obb {
    /// Axis-aligned box.
    pub fn axis_aligned(center: Vector3<f64>, half_extents: Vector3<f64>) -> Self {
        Obb {
            center,
            half_extents,
            orientation: Matrix3::identity(),
        }
    }

    /// The box re-expressed in a parent frame given the frame's pose.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Obb {
        Obb {
            center: rotation * self.center + translation,
            half_extents: self.half_extents,
            orientation: rotation * self.orientation,
        }
    }

    /// Whether a world point lies inside (or on) the box.
    pub fn contains(&self, point: &Vector3<f64>) -> bool {
        let local = self.orientation.transpose() * (point - self.center);
        (0..3).all(|i| local[i].abs() <= self.half_extents[i])
    }

    /// A deterministic lattice of points covering the box, `per_axis`
    /// samples along each axis (used by the sampling cross-checks).
    pub fn lattice(&self, per_axis: usize) -> Vec<Vector3<f64>> {
        let mut points = Vec::with_capacity(per_axis.pow(3));
        let step = |k: usize| {
            if per_axis == 1 {
                0.0
            } else {
                -1.0 + 2.0 * k as f64 / (per_axis - 1) as f64
            }
        };
        for i in 0..per_axis {
            for j in 0..per_axis {
                for k in 0..per_axis {
                    let local = Vector3::new(
                        step(i) * self.half_extents[0],
                        step(j) * self.half_extents[1],
                        step(k) * self.half_extents[2],
                    );
                    points.push(self.orientation * local + self.center);
                }
            }
        }
        points
    }
}

/// Projection radius of a box onto a unit-ish axis.
fn projection_radius(obb: &Obb, axis: &Vector3<f64>) -> f64 {
    (0..3)
        .map(|i| obb.half_extents[i] * obb.orientation.column(i).dot(axis).abs())
        .sum()
}

/// Separating-axis overlap test between two oriented boxes.
///
/// Returns `true` when the boxes intersect (touching counts as overlap).
/// All 15 candidate axes are tested; near-parallel edge pairs whose cross
/// product degenerates are skipped, as they cannot separate on their own.
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    let t = b.center - a.center;
    let mut axes: Vec<Vector3<f64>> = Vec::with_capacity(15);
    for i in 0..3 {
        axes.push(a.orientation.column(i).into());
        axes.push(b.orientation.column(i).into());
    }
    for i in 0..3 {
        for j in 0..3 {
            let cross = Vector3::from(a.orientation.column(i))
                .cross(&Vector3::from(b.orientation.column(j)));
            if cross.norm_squared() > 1e-12 {
                axes.push(cross.normalize());
            }
        }
    }
    for axis in &axes {
        let dist = t.dot(axis).abs();
        if dist > projection_radius(a, axis) + projection_radius(b, axis) + 1e-12 {
            return false;
        }
    }
    true
}

/// A collision box attached to a link, expressed in the link frame.
#[derive(Clone, Debug)]
pub struct LinkBox {
    /// Index of the link the box rides on (0-based).
    pub link: usize,
    /// Box geometry in the link frame.
    pub local: Obb,
}

impl LinkBox {
    /// Generate one box per link that spans from the proximal to the
    /// distal joint with square cross-section `2 * thickness`.  Links with
    /// (nearly) coincident joint origins get a small cube instead.
    pub fn auto_from_model(model: &RobotModel, thickness: f64) -> Vec<LinkBox> {
        let mut boxes = Vec::with_capacity(model.n_joints());
        for (i, row) in model.dh.iter().enumerate() {
            // Position of the previous joint origin in this link's frame:
            // invert the local DH transform applied to the origin.
            let (sa, ca) = row.alpha.sin_cos();
            let r_local_t = Matrix3::new(
                1.0, 0.0, 0.0, //
                0.0, ca, sa, //
                0.0, -sa, ca,
            ); // transpose of TransX/RotX rotation; RotZ does not move frame i's origin expression below
            let prev_in_i = r_local_t * Vector3::new(-row.a, 0.0, -row.d);
            let len = prev_in_i.norm();
            let local = if len < 1e-9 {
                Obb::axis_aligned(Vector3::zeros(), Vector3::repeat(thickness))
            } else {
                let x = prev_in_i / len;
                // Any perpendicular completes the frame.
                let helper = if x.x.abs() < 0.9 {
                    Vector3::x()
                } else {
                    Vector3::y()
                };
                let y = x.cross(&helper).normalize();
                let z = x.cross(&y);
                Obb {
                    center: prev_in_i / 2.0,
                    half_extents: Vector3::new(len / 2.0 + thickness, thickness, thickness),
                    orientation: Matrix3::from_columns(&[x, y, z]),
                }
            };
            boxes.push(LinkBox { link: i, local });
        }
        boxes
    }
}

/// Whether the arm at `theta` is free of collisions: no link box overlaps
/// an obstacle, and no two non-adjacent link boxes overlap each other.
pub fn collision_free(
    model: &RobotModel,
    theta: &nalgebra::DVector<f64>,
    link_boxes: &[LinkBox],
    obstacles: &[Obb],
) -> Result<bool, crate::dynamics::DynamicsError> {
    let poses = link_poses(model, theta)?;
    let world: Vec<(usize, Obb)> = link_boxes
        .iter()
        .map(|b| {
            let pose = &poses[b.link];
            (b.link, b.local.transformed(&pose.rotation, &pose.translation))
        })
        .collect();
    for (_, obb) in &world {
        for obstacle in obstacles {
            if obb_overlap(obb, obstacle) {
                return Ok(false);
            }
        }
    }
    for i in 0..world.len() {
        for j in (i + 1)..world.len() {
            let (link_i, ref obb_i) = world[i];
            let (link_j, ref obb_j) = world[j];
            if link_i.abs_diff(link_j) <= 1 {
                continue; // adjacent links share a joint and always touch
            }
            if obb_overlap(obb_i, obb_j) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
