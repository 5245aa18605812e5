//! Hierarchical geometric features: per-residue local frames, residue-level
//! spherical edge tuples, backbone Euler angles, and side-chain torsions.
//!
//! All quantities are expressed in per-residue local frames, so they are
//! invariant under rigid motions of the whole structure.

use alloc::vec::Vec;

use crate::fmath;
use crate::structure::{ProteinStructure, Residue};
use crate::vec3::Vec3;

const DEGENERATE_EPS: f64 = 1e-8;

/// Orthonormal right-handed coordinate system centered at a residue anchor.
#[derive(Debug, Clone, Copy)]
pub struct LocalFrame {
    pub origin: Vec3,
    pub x_axis: Vec3,
    pub y_axis: Vec3,
    pub z_axis: Vec3,
    /// True when the defining atoms were missing or collinear and the frame
    /// fell back to the global axes.
    pub degenerate: bool,
}

impl LocalFrame {
    fn global_fallback(origin: Vec3) -> LocalFrame {
        LocalFrame {
            origin,
            x_axis: Vec3::X,
            y_axis: Vec3::Y,
            z_axis: Vec3::Z,
            degenerate: true,
        }
    }

    /// Express a world-space point in this frame's coordinates.
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        let r = p - self.origin;
        Vec3::new(r.dot(self.x_axis), r.dot(self.y_axis), r.dot(self.z_axis))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueEdgeGeom {
    /// Anchor distance, Angstrom.
    pub d: f64,
    /// Azimuth of the offset's xy-plane projection, radians in [-pi, pi].
    pub theta: f64,
    /// Angle from the +z axis, radians in [0, pi].
    pub phi: f64,
    /// Rotation angle about the edge, radians in [-pi, pi].
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackboneEdgeGeom {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideChainGeom {
    /// Torsion angles chi1..chi4, radians; exactly 0 where masked out.
    pub chi: [f64; 4],
    /// True where the angle is defined for this residue type and its atoms
    /// are all present.
    pub mask: [bool; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeomError {
    /// Anchor distance below 1e-8.
    CoincidentAnchors,
    /// Collinear point triple in a dihedral.
    DegenerateDihedral,
}

impl core::fmt::Display for GeomError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GeomError::CoincidentAnchors => write!(f, "coincident anchors"),
            GeomError::DegenerateDihedral => write!(f, "degenerate dihedral"),
        }
    }
}

/// Build the local frame for a residue from its N, CA, C atoms:
/// x = unit(N - CA), z = unit(x cross (C - CA)), y = z cross x.
///
/// When C is missing, the direction toward `next_anchor` substitutes for
/// C - CA. Missing N, or a collinear atom triple, degrades to the global
/// axes with the `degenerate` flag set.
pub fn build_frame(residue: &Residue, next_anchor: Option<Vec3>) -> LocalFrame {
    let origin = residue.anchor;
    let n = residue.atom("N").map(|a| a.position);
    let t_raw = residue
        .atom("C")
        .map(|a| a.position - origin)
        .or_else(|| next_anchor.map(|a| a - origin));

    let (Some(n), Some(t_raw)) = (n, t_raw) else {
        return LocalFrame::global_fallback(origin);
    };
    let Some(x_axis) = (n - origin).normalized(DEGENERATE_EPS) else {
        return LocalFrame::global_fallback(origin);
    };
    let Some(z_axis) = x_axis.cross(t_raw).normalized(DEGENERATE_EPS) else {
        return LocalFrame::global_fallback(origin);
    };
    let y_axis = z_axis.cross(x_axis);
    LocalFrame { origin, x_axis, y_axis, z_axis, degenerate: false }
}

/// Frames for every residue of a structure, in chain order. The C-atom
/// fallback uses the next residue's anchor within the same chain.
pub fn build_frames(structure: &ProteinStructure) -> Vec<LocalFrame> {
    let mut frames = Vec::with_capacity(structure.residue_count());
    for (_, residues) in &structure.chains {
        for (i, r) in residues.iter().enumerate() {
            let next = residues.get(i + 1).map(|n| n.anchor);
            frames.push(build_frame(r, next));
        }
    }
    frames
}

/// The (d, theta, phi, tau) tuple for an edge i -> j, expressed in frame i.
///
/// tau is the dihedral N_i - CA_i - CA_j - N_j, reconstructed from the frame
/// x-axes (which point CA -> N).
pub fn residue_edge_geom(
    frame_i: &LocalFrame,
    anchor_j: Vec3,
    frame_j: &LocalFrame,
) -> Result<ResidueEdgeGeom, GeomError> {
    let local = frame_i.to_local(anchor_j);
    let d = local.norm();
    if d < DEGENERATE_EPS {
        return Err(GeomError::CoincidentAnchors);
    }
    let phi = fmath::acos(local.z / d);
    let planar = fmath::hypot(local.x, local.y);
    // Offset along +-z: azimuth is undefined, fixed to 0 by convention.
    let theta = if planar < DEGENERATE_EPS { 0.0 } else { fmath::atan2(local.y, local.x) };
    let tau = dihedral(
        frame_i.origin + frame_i.x_axis,
        frame_i.origin,
        anchor_j,
        anchor_j + frame_j.x_axis,
    )
    .unwrap_or(0.0);
    Ok(ResidueEdgeGeom { d, theta, phi, tau })
}

fn signed_angle_about(u: Vec3, v: Vec3, axis: Vec3) -> f64 {
    fmath::atan2(u.cross(v).dot(axis), u.dot(v))
}

/// Euler angles (alpha, beta, gamma) between two frames: n = z_i x z_j
/// (falling back to x_i when the z axes are parallel), alpha = angle from
/// x_i to n about z_i, beta = angle between z_i and z_j, gamma = angle from
/// n to x_j about z_j.
pub fn backbone_edge_geom(frame_i: &LocalFrame, frame_j: &LocalFrame) -> BackboneEdgeGeom {
    let n_raw = frame_i.z_axis.cross(frame_j.z_axis);
    let n = n_raw.normalized(DEGENERATE_EPS).unwrap_or(frame_i.x_axis);
    let alpha = signed_angle_about(frame_i.x_axis, n, frame_i.z_axis);
    let beta = fmath::acos(frame_i.z_axis.dot(frame_j.z_axis));
    let gamma = signed_angle_about(n, frame_j.x_axis, frame_j.z_axis);
    BackboneEdgeGeom { alpha, beta, gamma }
}

/// Standard signed dihedral over four points, radians in [-pi, pi].
pub fn dihedral(p1: Vec3, p2: Vec3, p3: Vec3, p4: Vec3) -> Result<f64, GeomError> {
    let b1 = p2 - p1;
    let b2 = p3 - p2;
    let b3 = p4 - p3;
    let n1 = b1.cross(b2);
    let n2 = b2.cross(b3);
    let b2n = b2.norm();
    if b2n < DEGENERATE_EPS || n1.norm() < DEGENERATE_EPS || n2.norm() < DEGENERATE_EPS {
        return Err(GeomError::DegenerateDihedral);
    }
    let y = b1.scale(b2n).dot(n2);
    let x = n1.dot(n2);
    Ok(fmath::atan2(y, x))
}

/// Atom quadruples defining chi1..chi4 per canonical residue. `None` slots
/// mean the residue type has no such torsion.
fn chi_atom_table(residue_name: &str) -> [Option<[&'static str; 4]>; 4] {
    let g = |x| Some(["N", "CA", "CB", x]);
    let d = |x, y| Some(["CA", "CB", x, y]);
    match residue_name {
        "ARG" => [g("CG"), d("CG", "CD"), Some(["CB", "CG", "CD", "NE"]), Some(["CG", "CD", "NE", "CZ"])],
        "ASN" => [g("CG"), d("CG", "OD1"), None, None],
        "ASP" => [g("CG"), d("CG", "OD1"), None, None],
        "CYS" => [g("SG"), None, None, None],
        "GLN" => [g("CG"), d("CG", "CD"), Some(["CB", "CG", "CD", "OE1"]), None],
        "GLU" => [g("CG"), d("CG", "CD"), Some(["CB", "CG", "CD", "OE1"]), None],
        "HIS" => [g("CG"), d("CG", "ND1"), None, None],
        "ILE" => [g("CG1"), d("CG1", "CD1"), None, None],
        "LEU" => [g("CG"), d("CG", "CD1"), None, None],
        "LYS" => [g("CG"), d("CG", "CD"), Some(["CB", "CG", "CD", "CE"]), Some(["CG", "CD", "CE", "NZ"])],
        "MET" => [g("CG"), d("CG", "SD"), Some(["CB", "CG", "SD", "CE"]), None],
        "PHE" => [g("CG"), d("CG", "CD1"), None, None],
        "PRO" => [g("CG"), d("CG", "CD"), None, None],
        "SER" => [g("OG"), None, None, None],
        "THR" => [g("OG1"), None, None, None],
        "TRP" => [g("CG"), d("CG", "CD1"), None, None],
        "TYR" => [g("CG"), d("CG", "CD1"), None, None],
        "VAL" => [g("CG1"), None, None, None],
        _ => [None, None, None, None],
    }
}

/// Compute chi1..chi4 from the standard atom quadruples. Missing atoms,
/// unknown residue types, or degenerate geometry leave the slot masked
/// with angle 0.
pub fn side_chain_torsions(residue: &Residue) -> SideChainGeom {
    let table = chi_atom_table(&residue.name);
    let mut chi = [0.0f64; 4];
    let mut mask = [false; 4];
    for (k, quad) in table.iter().enumerate() {
        let Some(names) = quad else { continue };
        let pts: Option<Vec<Vec3>> =
            names.iter().map(|n| residue.atom(n).map(|a| a.position)).collect();
        let Some(pts) = pts else { continue };
        if let Ok(angle) = dihedral(pts[0], pts[1], pts[2], pts[3]) {
            chi[k] = angle;
            mask[k] = true;
        }
    }
    SideChainGeom { chi, mask }
}

/// Embed torsions on the 4-torus: (sin chi1, cos chi1, ..., sin chi4, cos chi4).
/// Masked slots emit (0, 0) so absent angles carry no signal.
pub fn torus_embed(geom: &SideChainGeom) -> [f64; 8] {
    let mut out = [0.0; 8];
    for k in 0..4 {
        if geom.mask[k] {
            out[2 * k] = fmath::sin(geom.chi[k]);
            out[2 * k + 1] = fmath::cos(geom.chi[k]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Atom;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;

    fn residue_with(atoms: &[(&str, [f64; 3])]) -> Residue {
        let atoms: Vec<Atom> = atoms
            .iter()
            .map(|(n, p)| Atom {
                name: n.to_string(),
                position: Vec3::from(*p),
                element: n[..1].to_string(),
            })
            .collect();
        let anchor = atoms.iter().find(|a| a.name == "CA").unwrap().position;
        Residue { index: 0, name: "ALA".to_string(), atoms, anchor }
    }

    #[test]
    fn frame_from_axis_aligned_atoms() {
        let r = residue_with(&[("N", [1.0, 0.0, 0.0]), ("CA", [0.0, 0.0, 0.0]), ("C", [0.0, 1.0, 0.0])]);
        let f = build_frame(&r, None);
        assert!(!f.degenerate);
        assert_abs_diff_eq!(f.x_axis.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.z_axis.z, 1.0, epsilon = 1e-12);
        // Right-handed: x cross y = z.
        let xy = f.x_axis.cross(f.y_axis);
        assert_abs_diff_eq!((xy - f.z_axis).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_atoms_degenerate() {
        let r = residue_with(&[("N", [1.0, 0.0, 0.0]), ("CA", [0.0, 0.0, 0.0]), ("C", [2.0, 0.0, 0.0])]);
        let f = build_frame(&r, None);
        assert!(f.degenerate);
    }

    #[test]
    fn missing_c_uses_next_anchor() {
        let r = residue_with(&[("N", [1.0, 0.0, 0.0]), ("CA", [0.0, 0.0, 0.0])]);
        let f = build_frame(&r, Some(Vec3::new(0.0, 1.0, 0.0)));
        assert!(!f.degenerate);
        assert_abs_diff_eq!(f.z_axis.z, 1.0, epsilon = 1e-12);
    }

    fn frame_at(origin: Vec3) -> LocalFrame {
        LocalFrame { origin, x_axis: Vec3::X, y_axis: Vec3::Y, z_axis: Vec3::Z, degenerate: false }
    }

    #[test]
    fn edge_along_z() {
        let fi = frame_at(Vec3::ZERO);
        let fj = frame_at(Vec3::new(0.0, 0.0, 5.0));
        let g = residue_edge_geom(&fi, fj.origin, &fj).unwrap();
        assert_abs_diff_eq!(g.d, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.phi, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.theta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn edge_along_x() {
        let fi = frame_at(Vec3::ZERO);
        let fj = frame_at(Vec3::new(2.0, 0.0, 0.0));
        let g = residue_edge_geom(&fi, fj.origin, &fj).unwrap();
        assert_abs_diff_eq!(g.d, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.phi, core::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(g.theta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_anchors_error() {
        let fi = frame_at(Vec3::ZERO);
        assert_eq!(
            residue_edge_geom(&fi, Vec3::ZERO, &fi).unwrap_err(),
            GeomError::CoincidentAnchors
        );
    }

    #[test]
    fn identical_frames_give_zero_euler() {
        let fi = frame_at(Vec3::ZERO);
        let fj = frame_at(Vec3::new(3.0, 0.0, 0.0));
        let g = backbone_edge_geom(&fi, &fj);
        assert_abs_diff_eq!(g.alpha, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.beta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.gamma, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_about_z_splits_between_alpha_and_gamma() {
        let fi = frame_at(Vec3::ZERO);
        let a = core::f64::consts::FRAC_PI_2;
        let fj = LocalFrame {
            origin: Vec3::new(3.0, 0.0, 0.0),
            x_axis: Vec3::new(fmath::cos(a), fmath::sin(a), 0.0),
            y_axis: Vec3::new(-fmath::sin(a), fmath::cos(a), 0.0),
            z_axis: Vec3::Z,
            degenerate: false,
        };
        let g = backbone_edge_geom(&fi, &fj);
        assert_abs_diff_eq!(g.beta, 0.0, epsilon = 1e-12);
        let total = (g.alpha + g.gamma).rem_euclid(2.0 * fmath::PI);
        assert_abs_diff_eq!(total, a, epsilon = 1e-12);
    }

    #[test]
    fn beta_is_symmetric() {
        let fi = frame_at(Vec3::ZERO);
        let fj = LocalFrame {
            origin: Vec3::new(1.0, 2.0, 3.0),
            x_axis: Vec3::Z,
            y_axis: Vec3::X,
            z_axis: Vec3::Y,
            degenerate: false,
        };
        let a = backbone_edge_geom(&fi, &fj);
        let b = backbone_edge_geom(&fj, &fi);
        assert_abs_diff_eq!(a.beta, b.beta, epsilon = 1e-12);
    }

    #[test]
    fn dihedral_planar_cases() {
        let p = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let cis = dihedral(p(1.0, 0.0, 0.0), p(0.0, 0.0, 0.0), p(0.0, 1.0, 0.0), p(1.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(cis, 0.0, epsilon = 1e-12);
        let trans =
            dihedral(p(1.0, 0.0, 0.0), p(0.0, 0.0, 0.0), p(0.0, 1.0, 0.0), p(-1.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(fmath::abs(trans), fmath::PI, epsilon = 1e-12);
    }

    #[test]
    fn dihedral_quarter_turn_sign_golden() {
        // Golden: out-of-plane p4 at +z gives -pi/2 under the atan2 convention.
        let p = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let v = dihedral(p(1.0, 0.0, 0.0), p(0.0, 0.0, 0.0), p(0.0, 1.0, 0.0), p(0.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(fmath::abs(v), core::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        // Lock the sign so the convention cannot drift silently.
        assert!(v < 0.0, "sign convention changed: got {v}");
    }

    #[test]
    fn dihedral_reversal_invariance() {
        // Reversing the atom order leaves the signed dihedral unchanged
        // (scalar-triple-product identity); only mirroring flips the sign.
        let p1 = Vec3::new(1.0, 0.2, -0.3);
        let p2 = Vec3::new(0.0, 0.0, 0.0);
        let p3 = Vec3::new(0.1, 1.4, 0.2);
        let p4 = Vec3::new(-0.9, 1.3, 0.8);
        let a = dihedral(p1, p2, p3, p4).unwrap();
        let b = dihedral(p4, p3, p2, p1).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        let mirror = |p: Vec3| Vec3::new(p.x, p.y, -p.z);
        let m = dihedral(mirror(p1), mirror(p2), mirror(p3), mirror(p4)).unwrap();
        assert_abs_diff_eq!(a, -m, epsilon = 1e-12);
    }

    #[test]
    fn dihedral_collinear_errors() {
        let p = |x: f64| Vec3::new(x, 0.0, 0.0);
        assert_eq!(
            dihedral(p(0.0), p(1.0), p(2.0), Vec3::new(2.0, 1.0, 0.0)).unwrap_err(),
            GeomError::DegenerateDihedral
        );
    }

    #[test]
    fn glycine_and_alanine_have_no_torsions() {
        for name in ["GLY", "ALA"] {
            let mut r = residue_with(&[
                ("N", [1.0, 0.0, 0.0]),
                ("CA", [0.0, 0.0, 0.0]),
                ("C", [0.0, 1.0, 0.0]),
            ]);
            r.name = name.to_string();
            let g = side_chain_torsions(&r);
            assert_eq!(g.mask, [false; 4]);
            assert_eq!(g.chi, [0.0; 4]);
        }
    }

    #[test]
    fn lysine_planar_trans_chi1() {
        // Zig-zag side chain in the xy-plane: every torsion is planar-trans.
        let mut r = residue_with(&[
            ("N", [-1.0, 1.0, 0.0]),
            ("CA", [0.0, 0.0, 0.0]),
            ("C", [-1.0, -1.0, 0.0]),
            ("CB", [1.0, 1.0, 0.0]),
            ("CG", [2.0, 0.0, 0.0]),
            ("CD", [3.0, 1.0, 0.0]),
            ("CE", [4.0, 0.0, 0.0]),
            ("NZ", [5.0, 1.0, 0.0]),
        ]);
        r.name = "LYS".to_string();
        let g = side_chain_torsions(&r);
        assert_eq!(g.mask, [true; 4]);
        for k in 0..4 {
            assert_abs_diff_eq!(fmath::abs(g.chi[k]), fmath::PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn torus_embedding() {
        let all_masked = SideChainGeom { chi: [0.0; 4], mask: [false; 4] };
        assert_eq!(torus_embed(&all_masked), [0.0; 8]);

        let one = SideChainGeom {
            chi: [core::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0],
            mask: [true, false, false, false],
        };
        let e = torus_embed(&one);
        assert_abs_diff_eq!(e[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 0.0, epsilon = 1e-12);
        assert_eq!(&e[2..], &[0.0; 6]);
    }

    #[test]
    fn mirror_flips_unmasked_chi_sign() {
        let atoms = vec![
            ("N", [-1.0, 1.0, 0.3]),
            ("CA", [0.0, 0.0, 0.0]),
            ("C", [-1.0, -1.0, 0.2]),
            ("CB", [1.0, 1.0, 0.4]),
            ("CG", [2.0, 0.0, 0.9]),
        ];
        let make = |mirror: bool| {
            let pts: Vec<(&str, [f64; 3])> = atoms
                .iter()
                .map(|(n, p)| (*n, [p[0], p[1], if mirror { -p[2] } else { p[2] }]))
                .collect();
            let mut r = residue_with(&pts);
            r.name = "LEU".to_string();
            side_chain_torsions(&r)
        };
        let a = make(false);
        let b = make(true);
        assert!(a.mask[0]);
        assert_abs_diff_eq!(a.chi[0], -b.chi[0], epsilon = 1e-12);
    }
}
