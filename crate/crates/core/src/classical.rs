//! The classical kicked top on the unit sphere and its phase portraits.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use serde::Serialize;

use crate::floquet::{FloquetMap, MapKind};
use crate::spin::SpinSystem;
use crate::{Error, Result};

const NORM_TOL: f64 = 1e-9;

/// Unit spin vector (X, Y, Z) = J/j.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpherePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpherePoint {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::OffSphere(norm));
        }
        Ok(Self { x, y, z })
    }

    /// Polar angle θ from +z and azimuth φ from +x.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            x: theta.sin() * phi.cos(),
            y: theta.sin() * phi.sin(),
            z: theta.cos(),
        }
    }

    pub fn theta(&self) -> f64 {
        self.z.clamp(-1.0, 1.0).acos()
    }

    pub fn phi(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    /// Uniform on the sphere (area measure).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).sqrt();
        Self {
            x: s * phi.cos(),
            y: s * phi.sin(),
            z,
        }
    }
}

/// Rotation about x by α, then about z by λZ' with Z' the post-rotation z.
pub fn classical_kick_map(p: SpherePoint, alpha: f64, lambda: f64) -> Result<SpherePoint> {
    let norm = p.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::OffSphere(norm));
    }
    Ok(kick_unchecked(p, alpha, lambda))
}

fn kick_unchecked(p: SpherePoint, alpha: f64, lambda: f64) -> SpherePoint {
    let (sa, ca) = alpha.sin_cos();
    let x1 = p.x;
    let y1 = p.y * ca - p.z * sa;
    let z1 = p.y * sa + p.z * ca;
    let (st, ct) = (lambda * z1).sin_cos();
    SpherePoint {
        x: x1 * ct - y1 * st,
        y: x1 * st + y1 * ct,
        z: z1,
    }
}

/// One recorded crossing of the southern (X < 0) hemisphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PortraitPoint {
    pub traj_id: usize,
    pub step: usize,
    pub y: f64,
    pub z: f64,
}

/// Iterates the map from `n_traj` uniformly random starts and records
/// (Y, Z) after every step that lands at X < 0.
pub fn phase_portrait<R: Rng + ?Sized>(
    alpha: f64,
    lambda: f64,
    n_traj: usize,
    n_steps: usize,
    rng: &mut R,
) -> Vec<PortraitPoint> {
    let mut out = Vec::new();
    for traj_id in 0..n_traj {
        let mut p = SpherePoint::random(rng);
        for step in 1..=n_steps {
            p = kick_unchecked(p, alpha, lambda);
            if p.x < 0.0 {
                out.push(PortraitPoint {
                    traj_id,
                    step,
                    y: p.y,
                    z: p.z,
                });
            }
        }
    }
    out
}

/// Local scatter of one trajectory's recorded (Y, Z) points.
///
/// For every point the `k` nearest other points of the same trajectory are
/// gathered and the RMS spread of that neighbourhood perpendicular to its
/// principal axis is measured. Points on a smooth invariant curve give a
/// spread far below the point spacing; points scattered over an area give a
/// spread comparable to it. The maximum over points is returned, or `None`
/// when fewer than `min_points` points are available.
pub fn trajectory_scatter(points: &[(f64, f64)], k: usize, min_points: usize) -> Option<f64> {
    if points.len() < min_points.max(k + 1) {
        return None;
    }
    let mut worst: f64 = 0.0;
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    for &(yi, zi) in points {
        dist.clear();
        dist.extend(
            points
                .iter()
                .enumerate()
                .map(|(j, &(yj, zj))| ((yi - yj).powi(2) + (zi - zj).powi(2), j)),
        );
        dist.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0));
        let hood: Vec<Vector2<f64>> = dist[..=k]
            .iter()
            .map(|&(_, j)| Vector2::new(points[j].0, points[j].1))
            .collect();
        let mean = hood.iter().sum::<Vector2<f64>>() / hood.len() as f64;
        let mut cov = Matrix2::zeros();
        for v in &hood {
            let c = v - mean;
            cov += c * c.transpose();
        }
        cov /= hood.len() as f64;
        let minor = cov.symmetric_eigen().eigenvalues.min().max(0.0);
        worst = worst.max(minor.sqrt());
    }
    Some(worst)
}

/// Fraction of cells of an `n × n` grid over [−1, 1]² hit by at least one
/// point.
pub fn grid_coverage(points: &[(f64, f64)], n: usize) -> f64 {
    let mut hit = vec![false; n * n];
    let cell =
        |v: f64| (((v + 1.0) / 2.0 * n as f64).floor() as isize).clamp(0, n as isize - 1) as usize;
    for &(y, z) in points {
        hit[cell(z) * n + cell(y)] = true;
    }
    hit.iter().filter(|&&h| h).count() as f64 / (n * n) as f64
}

/// Maximum over steps 1..=n of ‖⟨J⟩/j − p_classical‖ for a coherent state
/// started at `p0` and evolved by the kicked-top map.
pub fn correspondence_check(
    system: &SpinSystem,
    map: &FloquetMap,
    p0: SpherePoint,
    n: usize,
) -> Result<f64> {
    if map.kind() != MapKind::KickedTopTR {
        return Err(Error::Unsupported(
            "correspondence requires the time-reversal-symmetric kicked top".into(),
        ));
    }
    let alpha = map.param("alpha").unwrap_or_default();
    let lambda = map.param("lambda").unwrap_or_default();
    let j = system.j();
    let mut psi = system.coherent_ket(p0.theta(), p0.phi());
    let mut classical = SpherePoint::new(p0.x, p0.y, p0.z)?;
    let u = map.unitary();
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        psi = u * psi;
        classical = kick_unchecked(classical, alpha, lambda);
        let rho = crate::spin::DensityMatrix::from_ket(&psi);
        let quantum = SpherePoint {
            x: rho.expectation(system.jx()) / j,
            y: rho.expectation(system.jy()) / j,
            z: rho.expectation(system.jz()) / j,
        };
        worst = worst.max(quantum.distance(&classical));
    }
    Ok(worst)
}

/// (Y, Z) points of one trajectory after the first `transient` steps.
pub fn trajectory_points(
    points: &[PortraitPoint],
    traj_id: usize,
    transient: usize,
) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|p| p.traj_id == traj_id && p.step > transient)
        .map(|p| (p.y, p.z))
        .collect()
}

#[doc(hidden)]
pub fn rotation_about_x(p: SpherePoint, angle: f64) -> SpherePoint {
    kick_unchecked(p, angle, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::kicked_top_tr;
    use crate::rng::task_rng;

    #[test]
    fn x_axis_is_fixed_without_kick() {
        let p = SpherePoint::new(1.0, 0.0, 0.0).unwrap();
        let q = classical_kick_map(p, 1.4, 0.0).unwrap();
        assert!(q.distance(&p) < 1e-15);
    }

    #[test]
    fn norm_is_preserved() {
        let mut rng = task_rng(4, 0);
        for _ in 0..1000 {
            let mut p = SpherePoint::random(&mut rng);
            for _ in 0..20 {
                p = classical_kick_map(p, 1.4, 7.0).unwrap();
            }
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_off_sphere_input() {
        assert!(SpherePoint::new(1.0, 1.0, 0.0).is_err());
        let bad = SpherePoint {
            x: 0.5,
            y: 0.0,
            z: 0.0,
        };
        assert!(matches!(
            classical_kick_map(bad, 1.0, 1.0),
            Err(Error::OffSphere(_))
        ));
    }

    #[test]
    fn repeated_rotation_composes() {
        let mut rng = task_rng(5, 0);
        for _ in 0..100 {
            let p0 = SpherePoint::random(&mut rng);
            let mut p = p0;
            for _ in 0..7 {
                p = classical_kick_map(p, 0.3, 0.0).unwrap();
            }
            let q = rotation_about_x(p0, 2.1);
            assert!(p.distance(&q) < 1e-12);
        }
    }

    #[test]
    fn exact_correspondence_without_kick() {
        let s = SpinSystem::new(10.0).unwrap();
        let map = kicked_top_tr(&s, 1.4, 0.0);
        let p0 = SpherePoint::from_angles(0.7, 2.2);
        // for a pure rotation ⟨J⟩ rotates rigidly, at any spin
        let dev = correspondence_check(&s, &map, p0, 30).unwrap();
        assert!(dev < 1e-6, "{dev}");
    }

    #[test]
    fn regular_short_time_correspondence() {
        let s = SpinSystem::new(50.0).unwrap();
        let map = kicked_top_tr(&s, 1.4, 0.5);
        let p0 = SpherePoint::from_angles(1.2, 0.4);
        let dev = correspondence_check(&s, &map, p0, 3).unwrap();
        assert!(dev < 0.1, "{dev}");
        // flipping the kick direction must break the agreement: this pins
        // the sign convention of the twist
        let wrong = {
            let mut psi = s.coherent_ket(p0.theta(), p0.phi());
            let mut c = p0;
            let mut worst: f64 = 0.0;
            for _ in 0..3 {
                psi = map.unitary() * psi;
                c = classical_kick_map(c, 1.4, -0.5).unwrap();
                let rho = crate::spin::DensityMatrix::from_ket(&psi);
                let q = SpherePoint {
                    x: rho.expectation(s.jx()) / 50.0,
                    y: rho.expectation(s.jy()) / 50.0,
                    z: rho.expectation(s.jz()) / 50.0,
                };
                worst = worst.max(q.distance(&c));
            }
            worst
        };
        assert!(wrong > dev);
    }

    #[test]
    fn deviation_grows_with_chaoticity() {
        let s = SpinSystem::new(50.0).unwrap();
        let p0 = SpherePoint::from_angles(1.2, 0.4);
        let devs: Vec<f64> = [0.0, 2.5, 7.0]
            .iter()
            .map(|&l| correspondence_check(&s, &kicked_top_tr(&s, 1.4, l), p0, 8).unwrap())
            .collect();
        assert!(devs[0] < devs[1] && devs[1] < devs[2], "{devs:?}");
    }

    #[test]
    fn correspondence_rejects_other_maps() {
        let s = SpinSystem::new(2.0).unwrap();
        let map = FloquetMap::sampled(crate::linalg::CMatrix::identity(5, 5));
        assert!(correspondence_check(&s, &map, SpherePoint::from_angles(0.1, 0.0), 1).is_err());
    }

    #[test]
    fn scatter_separates_curves_from_clouds() {
        let circle: Vec<(f64, f64)> = (0..300)
            .map(|i| {
                let t = i as f64 * 2.399;
                (0.5 * t.cos(), 0.3 * t.sin())
            })
            .collect();
        assert!(trajectory_scatter(&circle, 4, 20).unwrap() < 1e-3);
        let mut rng = task_rng(6, 0);
        let cloud: Vec<(f64, f64)> = (0..300)
            .map(|_| (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
            .collect();
        assert!(trajectory_scatter(&cloud, 4, 20).unwrap() > 0.01);
        assert_eq!(trajectory_scatter(&circle[..5], 4, 20), None);
    }

    #[test]
    fn coverage_counts_cells() {
        assert_eq!(grid_coverage(&[], 4), 0.0);
        assert_eq!(
            grid_coverage(&[(-0.9, -0.9), (0.9, 0.9), (1.0, 1.0)], 2),
            0.5
        );
    }

    #[test]
    fn portrait_records_only_southern_points() {
        let pts = phase_portrait(1.4, 3.0, 5, 50, &mut task_rng(7, 0));
        assert!(!pts.is_empty());
        assert!(pts
            .iter()
            .all(|p| p.traj_id < 5 && (1..=50).contains(&p.step)));
        assert!(pts.iter().all(|p| p.y * p.y + p.z * p.z <= 1.0 + 1e-12));
    }
}
