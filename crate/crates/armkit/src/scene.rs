//! Quasi-static contact environments for the contact tasks: a cylindrical
//! peg over a chamferless hole, and a flat (optionally ramped) surface
//! for wiping.
//!
//! Contact is penalty-based: penetration times a contact stiffness gives
//! the normal force, a damping term dissipates approach velocity, and
//! tangential friction is regularized Coulomb.  Everything is expressed
//! in the scene's own frame — for the hole that frame has its origin at
//! the mouth center with z pointing up, so the peg descends along -z.
//! Forces are reported as the equivalent wrench about the end-effector
//! origin (the flange the peg hangs from), which is where the robot's
//! Jacobian maps wrenches.

use nalgebra::{Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by scene validation.
#[derive(Debug, Error)]
pub enum SceneError {
    /// A geometric or material parameter is invalid.
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

/// Peg and hole geometry plus contact material parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PegHoleScene {
    /// Hole depth below the surface (m).
    pub hole_depth: f64,
    /// Hole diameter (m).
    pub hole_diameter: f64,
    /// Peg length from flange to tip (m).
    pub peg_length: f64,
    /// Peg diameter (m).
    pub peg_diameter: f64,
    /// Coulomb friction coefficient at all contacts.
    pub friction_coeff: f64,
    /// Penalty stiffness (N/m).
    pub contact_stiffness: f64,
    /// Penalty damping (N s/m).
    pub contact_damping: f64,
}

impl Default for PegHoleScene {
    fn default() -> Self {
        PegHoleScene {
            hole_depth: 0.030,
            hole_diameter: 0.0218,
            peg_length: 0.048,
            peg_diameter: 0.0214,
            friction_coeff: 0.15,
            // Chosen for stable explicit coupling at the 8 ms control
            // period: sqrt(k/m_eff)*dt stays well under one, and the
            // damping satisfies c*dt/m_eff < 0.5.
            contact_stiffness: 8.0e3,
            contact_damping: 1.5e2,
        }
    }
}

impl PegHoleScene {
    /// Check geometry: the peg must fit the hole and lengths must be
    /// positive.
    pub fn validate(&self) -> Result<(), SceneError> {
        for (name, v) in [
            ("hole_depth", self.hole_depth),
            ("hole_diameter", self.hole_diameter),
            ("peg_length", self.peg_length),
            ("peg_diameter", self.peg_diameter),
            ("contact_stiffness", self.contact_stiffness),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SceneError::InvalidScene(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.peg_diameter >= self.hole_diameter {
            return Err(SceneError::InvalidScene(format!(
                "peg diameter {} must be below hole diameter {}",
                self.peg_diameter, self.hole_diameter
            )));
        }
        if !(self.friction_coeff >= 0.0) || !(self.contact_damping >= 0.0) {
            return Err(SceneError::InvalidScene(
                "friction and damping must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Radial clearance between peg and hole.
    pub fn radial_clearance(&self) -> f64 {
        0.5 * (self.hole_diameter - self.peg_diameter)
    }
}

/// Peg pose in the hole frame.
#[derive(Clone, Copy, Debug)]
pub struct PegPose {
    /// Tip center position (m).
    pub tip: Vector3<f64>,
    /// Unit vector along the peg from tip toward the flange
    /// (approximately +z when the peg hangs upright over the hole).
    pub axis: Vector3<f64>,
    /// Tip velocity (m/s), used for contact damping and friction
    /// direction.
    pub tip_velocity: Vector3<f64>,
}

/// Which geometric situation the peg is in (ground truth as computed
/// from the scene geometry, independent of any sensing).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrueContact {
    /// No contact at all.
    Free,
    /// Tip (partially) resting on the surface around the hole.
    Surface,
    /// Inside the hole, touching the wall or the mouth rim.
    WallOrRim,
    /// Tip pressed onto the hole bottom.
    Bottom,
}

/// One resolved contact point.
#[derive(Clone, Copy, Debug)]
pub struct ContactPoint {
    /// Contact location in the hole frame (m).
    pub point: Vector3<f64>,
    /// Force applied to the peg at that location (N).
    pub force: Vector3<f64>,
}

/// Wrench and diagnostics for one peg pose.
#[derive(Clone, Debug)]
pub struct ContactResult {
    /// Equivalent wrench about the end-effector origin, hole frame:
    /// `[fx, fy, fz, mx, my, mz]`, applied to the robot.
    pub wrench_ee: Vector6<f64>,
    /// Geometric ground-truth label.
    pub true_contact: TrueContact,
    /// Resolved contact points.
    pub contacts: Vec<ContactPoint>,
    /// Insertion depth of the tip below the surface plane (m, negative
    /// above the surface).
    pub depth: f64,
}

/// Below this depth the tip is treated as genuinely inside the hole; a
/// shallower, laterally offset tip is treated as rim-supported.  The
/// bound is the plausible elastic compression of the surface: a tip that
/// has sunk further than the contact spring can explain is falling into
/// the opening, and a marginal rim sliver must not arrest it at depth.
const INSIDE_SWITCH_DEPTH: f64 = 1.6e-3;

/// Velocity scale for regularized Coulomb friction.
const FRICTION_V_EPS: f64 = 1.0e-3;

fn smooth_sign(v: f64) -> f64 {
    (v / FRICTION_V_EPS).tanh()
}

/// Area and centroid offset of a circular segment: the part of a disc of
/// radius `r` beyond a chord at signed distance `h` from the center.
/// The centroid offset is measured from the circle center toward the
/// segment.
fn circular_segment(r: f64, h: f64) -> (f64, f64) {
    let h = h.clamp(-r, r);
    let alpha = (h / r).acos();
    let area = r * r * (alpha - alpha.sin() * alpha.cos());
    if area <= 0.0 {
        return (0.0, r);
    }
    let centroid = (2.0 / 3.0) * r.powi(3) * alpha.sin().powi(3) / area;
    (area, centroid)
}

/// Supported-region centroid for a flat tip disc (radius `r`, center at
/// `c`) resting on the surface around a hole of radius `hole_r` at the
/// origin: the centroid of the disc part outside the hole circle and the
/// supported area fraction.  `None` when the disc lies fully over the
/// opening.  Exact circle-circle geometry — thin crescents near the
/// alignment threshold must not be lost, they are what enforces the true
/// clearance.
fn tip_support_outside(
    c: Vector2<f64>,
    r: f64,
    hole_r: f64,
) -> Option<(Vector2<f64>, f64)> {
    let d = c.norm();
    let full = std::f64::consts::PI * r * r;
    if d + r <= hole_r {
        return None;
    }
    if d >= hole_r + r {
        return Some((c, 1.0));
    }
    if d <= 1e-12 {
        // Centered disc smaller than the opening: cannot overlap.
        return None;
    }
    let u = c / d;
    // Overlap lens between the disc and the opening: hole-circle segment
    // beyond the radical chord plus disc segment on the hole side of it.
    let x0 = (d * d + hole_r * hole_r - r * r) / (2.0 * d);
    let (a_seg, ca) = circular_segment(hole_r, x0);
    let (b_seg, cb) = circular_segment(r, d - x0);
    let lens = a_seg + b_seg;
    let outside = (full - lens).max(0.0);
    if outside <= full * 1e-9 {
        return None;
    }
    let lens_cx = if lens > 0.0 {
        (a_seg * ca + b_seg * (d - cb)) / lens
    } else {
        0.0
    };
    let cx = (full * d - lens * lens_cx) / outside;
    Some((u * cx, outside / full))
}

/// Resolve the contact wrench for one peg pose.
pub fn simulate_contact(scene: &PegHoleScene, pose: &PegPose) -> ContactResult {
    let r_p = 0.5 * scene.peg_diameter;
    let r_h = 0.5 * scene.hole_diameter;
    let depth = -pose.tip[2];
    let flange = pose.tip + pose.axis * scene.peg_length;
    let mut contacts: Vec<ContactPoint> = Vec::new();
    let mut true_contact = TrueContact::Free;

    let tip_xy = Vector2::new(pose.tip[0], pose.tip[1]);
    // Lateral center of the peg cross-section at height z.
    let center_at = |z: f64| -> Vector2<f64> {
        let scale = (z - pose.tip[2]) / pose.axis[2].max(0.2);
        Vector2::new(
            pose.tip[0] + scale * pose.axis[0],
            pose.tip[1] + scale * pose.axis[1],
        )
    };

    if depth > 0.0 {
        let support = if depth < INSIDE_SWITCH_DEPTH {
            tip_support_outside(tip_xy, r_p, r_h)
        } else {
            None
        };
        if let Some((centroid, _fraction)) = support {
            // Tip resting on the surface ring around the hole.  Normal
            // force at the centroid of the supported part of the tip
            // disc; the offset between that centroid and the tip center
            // is what the moment channels read.
            true_contact = TrueContact::Surface;
            let vn = pose.tip_velocity[2];
            let fz =
                (scene.contact_stiffness * depth - scene.contact_damping * vn).max(0.0);
            let v_xy = Vector2::new(pose.tip_velocity[0], pose.tip_velocity[1]);
            let speed = v_xy.norm();
            let f_fric = if speed > 0.0 {
                let scale = -scene.friction_coeff * fz * smooth_sign(speed) / speed;
                v_xy * scale
            } else {
                Vector2::zeros()
            };
            contacts.push(ContactPoint {
                point: Vector3::new(centroid[0], centroid[1], 0.0),
                force: Vector3::new(f_fric[0], f_fric[1], fz),
            });
        } else {
            // Inside the hole: check the wall at the tip and the mouth
            // rim, then the bottom.
            let engaged_depth = depth.min(scene.hole_depth);
            let tip_c = center_at(-engaged_depth.min(depth));
            let mouth_c = center_at(0.0);
            for (c, z) in [(tip_c, -depth.min(scene.hole_depth)), (mouth_c, 0.0)] {
                let rho = c.norm();
                let pen = rho + r_p - r_h;
                if pen > 0.0 && rho > 1e-12 {
                    true_contact = TrueContact::WallOrRim;
                    let u = c / rho;
                    // Radial approach velocity at the contact.
                    let v_xy = Vector2::new(pose.tip_velocity[0], pose.tip_velocity[1]);
                    let v_rad = v_xy.dot(&u);
                    let fn_mag = (scene.contact_stiffness * pen
                        + scene.contact_damping * v_rad.max(0.0))
                    .max(0.0);
                    let normal = -Vector3::new(u[0], u[1], 0.0) * fn_mag;
                    // Axial friction opposing the descent/retreat.
                    let fric =
                        Vector3::new(0.0, 0.0, -scene.friction_coeff * fn_mag)
                            * smooth_sign(pose.tip_velocity[2]);
                    let radius = if z == 0.0 { r_h } else { r_p };
                    let point = Vector3::new(u[0] * radius + if z == 0.0 { 0.0 } else { c[0] },
                        u[1] * radius + if z == 0.0 { 0.0 } else { c[1] },
                        z);
                    contacts.push(ContactPoint {
                        point,
                        force: normal + fric,
                    });
                }
            }
            if depth >= scene.hole_depth {
                true_contact = TrueContact::Bottom;
                let pen = depth - scene.hole_depth;
                let vn = pose.tip_velocity[2];
                let fz = (scene.contact_stiffness * pen - scene.contact_damping * vn)
                    .max(0.0);
                let bottom_c = center_at(-scene.hole_depth);
                contacts.push(ContactPoint {
                    point: Vector3::new(bottom_c[0], bottom_c[1], -scene.hole_depth),
                    force: Vector3::new(0.0, 0.0, fz),
                });
            }
        }
    }

    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for c in &contacts {
        force += c.force;
        moment += (c.point - flange).cross(&c.force);
    }
    ContactResult {
        wrench_ee: Vector6::new(
            force[0], force[1], force[2], moment[0], moment[1], moment[2],
        ),
        true_contact,
        contacts,
        depth,
    }
}

/// Flat wiping surface with an optional smooth height ramp along x.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WipeScene {
    /// Surface height left of the ramp (m).
    pub base_height: f64,
    /// Ramp start along x (m).
    pub ramp_start_x: f64,
    /// Ramp end along x (m).
    pub ramp_end_x: f64,
    /// Height gained across the ramp (m).
    pub ramp_height: f64,
    /// Coulomb friction coefficient.
    pub friction_coeff: f64,
    /// Penalty stiffness (N/m).
    pub contact_stiffness: f64,
    /// Penalty damping (N s/m).
    pub contact_damping: f64,
}

impl Default for WipeScene {
    fn default() -> Self {
        WipeScene {
            base_height: 0.0,
            ramp_start_x: 0.0,
            ramp_end_x: 1.0,
            ramp_height: 0.0,
            friction_coeff: 0.2,
            // Compliant wiping tool; stable at the 8 ms loop like the
            // peg scene.
            contact_stiffness: 1.0e4,
            contact_damping: 1.5e2,
        }
    }
}

impl WipeScene {
    /// Surface height under a given x (smoothstep across the ramp).
    pub fn surface_height(&self, x: f64) -> f64 {
        if self.ramp_height == 0.0 || self.ramp_end_x <= self.ramp_start_x {
            return self.base_height;
        }
        let u = ((x - self.ramp_start_x) / (self.ramp_end_x - self.ramp_start_x))
            .clamp(0.0, 1.0);
        self.base_height + self.ramp_height * (3.0 * u * u - 2.0 * u * u * u)
    }

    /// Contact wrench about the flange for a tool tip at `tip` moving at
    /// `tip_velocity`, with the flange `tool_length` above the tip along
    /// `axis`.
    pub fn contact(
        &self,
        tip: &Vector3<f64>,
        tip_velocity: &Vector3<f64>,
        axis: &Vector3<f64>,
        tool_length: f64,
    ) -> ContactResult {
        let surface = self.surface_height(tip[0]);
        let pen = surface - tip[2];
        let mut contacts = Vec::new();
        let mut true_contact = TrueContact::Free;
        if pen > 0.0 {
            true_contact = TrueContact::Surface;
            let fz = (self.contact_stiffness * pen - self.contact_damping * tip_velocity[2])
                .max(0.0);
            let v_xy = Vector2::new(tip_velocity[0], tip_velocity[1]);
            let speed = v_xy.norm();
            let f_fric = if speed > 0.0 {
                let scale = -self.friction_coeff * fz * smooth_sign(speed) / speed;
                v_xy * scale
            } else {
                Vector2::zeros()
            };
            contacts.push(ContactPoint {
                point: Vector3::new(tip[0], tip[1], surface),
                force: Vector3::new(f_fric[0], f_fric[1], fz),
            });
        }
        let flange = tip + axis * tool_length;
        let mut force = Vector3::zeros();
        let mut moment = Vector3::zeros();
        for c in &contacts {
            force += c.force;
            moment += (c.point - flange).cross(&c.force);
        }
        ContactResult {
            wrench_ee: Vector6::new(
                force[0], force[1], force[2], moment[0], moment[1], moment[2],
            ),
            true_contact,
            contacts,
            depth: pen,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn upright(tip: Vector3<f64>) -> PegPose {
        PegPose {
            tip,
            axis: Vector3::new(0.0, 0.0, 1.0),
            tip_velocity: Vector3::zeros(),
        }
    }

    #[test]
    fn default_scene_matches_the_published_dimensions() {
        let s = PegHoleScene::default();
        s.validate().unwrap();
        assert!((s.hole_diameter - 0.0218).abs() < 1e-12);
        assert!((s.peg_diameter - 0.0214).abs() < 1e-12);
        assert!((s.hole_depth - 0.030).abs() < 1e-12);
        assert!((s.peg_length - 0.048).abs() < 1e-12);
        assert!((s.radial_clearance() - 0.0002).abs() < 1e-12);
    }

    #[test]
    fn no_penetration_means_zero_wrench() {
        let s = PegHoleScene::default();
        let r = simulate_contact(&s, &upright(Vector3::new(0.0, 0.0, 0.003)));
        assert_eq!(r.true_contact, TrueContact::Free);
        assert_eq!(r.wrench_ee.norm(), 0.0);
        assert!(r.contacts.is_empty());
    }

    #[test]
    fn axial_bottom_penetration_gives_stiffness_times_depth() {
        let s = PegHoleScene::default();
        let extra = 2.0e-4;
        let r = simulate_contact(&s, &upright(Vector3::new(0.0, 0.0, -s.hole_depth - extra)));
        assert_eq!(r.true_contact, TrueContact::Bottom);
        assert!((r.wrench_ee[2] - s.contact_stiffness * extra).abs() < 1e-9);
        // Centered bottom contact carries no moment.
        assert!(r.wrench_ee.fixed_rows::<3>(3).norm() < 1e-12);
    }

    #[test]
    fn surface_contact_moment_points_the_lateral_correction_at_the_hole() {
        // The supported part of the tip disc is away from the hole, so
        // (m_y, -m_x) must point from the peg center toward the hole
        // center, which is the correction direction the search uses.
        let s = PegHoleScene::default();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let ang = rng.random::<f64>() * std::f64::consts::TAU;
            let rho = 0.001 + rng.random::<f64>() * 0.004;
            let offset = Vector2::new(rho * ang.cos(), rho * ang.sin());
            let r = simulate_contact(
                &s,
                &upright(Vector3::new(offset[0], offset[1], -2.0e-4)),
            );
            assert_eq!(r.true_contact, TrueContact::Surface);
            let toward_hole = -offset.normalize();
            let correction = Vector2::new(r.wrench_ee[4], -r.wrench_ee[3]);
            assert!(
                correction.norm() > 0.0,
                "offset contact must produce a readable moment"
            );
            let agreement = correction.normalize().dot(&toward_hole);
            assert!(
                agreement > 0.95,
                "correction {correction:?} should point along {toward_hole:?}"
            );
        }
    }

    #[test]
    fn contact_points_and_forces_match_first_principles_for_tilted_pegs() {
        // Independent oracle: an aligned tip deep in the hole with a
        // small tilt touches the mouth rim where the cross-section
        // center drifted; the normal force there is stiffness times the
        // radial overlap, pointing back toward the hole axis.
        let s = PegHoleScene::default();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..100 {
            let rx = (rng.random::<f64>() - 0.5) * 0.04;
            let ry = (rng.random::<f64>() - 0.5) * 0.04;
            let axis = Vector3::new(ry, -rx, 1.0).normalize();
            let depth = 0.008;
            let pose = PegPose {
                tip: Vector3::new(0.0, 0.0, -depth),
                axis,
                tip_velocity: Vector3::zeros(),
            };
            let r = simulate_contact(&s, &pose);
            // Oracle: center of the cross-section at the mouth plane.
            let scale = depth / axis[2];
            let c0 = Vector2::new(scale * axis[0], scale * axis[1]);
            let pen = c0.norm() + 0.5 * s.peg_diameter - 0.5 * s.hole_diameter;
            if pen > 1.0e-6 {
                assert_eq!(r.true_contact, TrueContact::WallOrRim);
                let u = c0.normalize();
                let want = -u * s.contact_stiffness * pen;
                let got = Vector2::new(r.wrench_ee[0], r.wrench_ee[1]);
                assert!(
                    (got - want).norm() < 1e-6,
                    "lateral force {got:?} vs oracle {want:?}"
                );
            } else if pen < -1.0e-6 {
                assert_eq!(r.true_contact, TrueContact::Free);
            }
        }
    }

    #[test]
    fn insertion_is_possible_only_when_aligned_within_clearance() {
        let s = PegHoleScene::default();
        // Aligned: descending 5 mm into the hole meets no resistance.
        let aligned = simulate_contact(&s, &upright(Vector3::new(0.0, 0.0, -0.005)));
        assert_eq!(aligned.true_contact, TrueContact::Free);
        // Slightly offset beyond the clearance: rim support at shallow
        // depth instead.
        let offset = simulate_contact(&s, &upright(Vector3::new(0.0006, 0.0, -0.0003)));
        assert_eq!(offset.true_contact, TrueContact::Surface);
        assert!(offset.wrench_ee[2] > 0.0);
        // A whisker past the clearance still blocks: the thin crescent
        // of rim support must not be lost to numerics.
        let thin = simulate_contact(
            &s,
            &upright(Vector3::new(s.radial_clearance() + 2.0e-5, 0.0, -0.0003)),
        );
        assert_eq!(thin.true_contact, TrueContact::Surface);
        assert!(thin.wrench_ee[2] > 0.0);
        // Just inside the clearance: no resistance.
        let fine = simulate_contact(
            &s,
            &upright(Vector3::new(s.radial_clearance() - 2.0e-5, 0.0, -0.0003)),
        );
        assert_eq!(fine.true_contact, TrueContact::Free);
    }

    #[test]
    fn crescent_support_matches_a_fine_grid_quadrature() {
        // Oracle: dense polar-grid integration of the disc region outside
        // the hole circle, independent of the closed-form lens geometry.
        let r_p = 0.0107;
        let r_h = 0.0109;
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..40 {
            let d = rng.random::<f64>() * (r_h + r_p) * 1.1;
            let c = Vector2::new(d, 0.0);
            const NR: usize = 600;
            const NA: usize = 1200;
            let mut area = 0.0;
            let mut cx = 0.0;
            for ir in 0..NR {
                let rho = (ir as f64 + 0.5) / NR as f64 * r_p;
                let w = r_p / NR as f64;
                for ia in 0..NA {
                    let ang = (ia as f64 + 0.5) / NA as f64 * std::f64::consts::TAU;
                    let px = d + rho * ang.cos();
                    let py = rho * ang.sin();
                    if (px * px + py * py).sqrt() >= r_h {
                        let da = rho * w * (std::f64::consts::TAU / NA as f64);
                        area += da;
                        cx += px * da;
                    }
                }
            }
            let full = std::f64::consts::PI * r_p * r_p;
            match tip_support_outside(c, r_p, r_h) {
                None => assert!(
                    area / full < 2e-3,
                    "formula says no support but grid finds fraction {}",
                    area / full
                ),
                Some((centroid, fraction)) => {
                    assert!(
                        (fraction - area / full).abs() < 2e-3,
                        "fraction {fraction} vs grid {}",
                        area / full
                    );
                    if area / full > 1e-2 {
                        assert!(
                            (centroid[0] - cx / area).abs() < 1e-4,
                            "centroid {} vs grid {}",
                            centroid[0],
                            cx / area
                        );
                        assert!(centroid[1].abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn wipe_surface_force_is_stiffness_times_penetration() {
        let scene = WipeScene::default();
        let pen = 5.0e-4;
        let r = scene.contact(
            &Vector3::new(0.2, 0.0, -pen),
            &Vector3::zeros(),
            &Vector3::new(0.0, 0.0, 1.0),
            0.048,
        );
        assert_eq!(r.true_contact, TrueContact::Surface);
        assert!((r.wrench_ee[2] - scene.contact_stiffness * pen).abs() < 1e-9);
    }

    #[test]
    fn wipe_ramp_interpolates_smoothly_between_heights() {
        let scene = WipeScene {
            ramp_start_x: 0.1,
            ramp_end_x: 0.3,
            ramp_height: 0.002,
            ..WipeScene::default()
        };
        assert_eq!(scene.surface_height(0.0), 0.0);
        assert_eq!(scene.surface_height(0.4), 0.002);
        let mid = scene.surface_height(0.2);
        assert!((mid - 0.001).abs() < 1e-12, "smoothstep midpoint is half");
        // Monotone over the ramp.
        let mut prev = scene.surface_height(0.1);
        for i in 1..=20 {
            let h = scene.surface_height(0.1 + 0.01 * i as f64);
            assert!(h >= prev);
            prev = h;
        }
    }

    #[test]
    fn friction_opposes_the_sliding_direction() {
        let scene = WipeScene::default();
        let r = scene.contact(
            &Vector3::new(0.2, 0.0, -4.0e-4),
            &Vector3::new(0.05, 0.0, 0.0),
            &Vector3::new(0.0, 0.0, 1.0),
            0.048,
        );
        assert!(r.wrench_ee[0] < 0.0, "friction must oppose +x sliding");
        let ratio = -r.wrench_ee[0] / r.wrench_ee[2];
        assert!(
            ratio <= scene.friction_coeff + 1e-9,
            "friction bounded by mu N"
        );
    }
}
