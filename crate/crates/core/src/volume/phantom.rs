//! Deterministic phantom volumes used as desk-scale stand-ins for clinical data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{ReconError, Result};

use super::Volume3D;

/// Analytic ellipsoid: intensity added inside the rotated, translated unit ball.
/// Angles are z-x-z Euler rotations in radians; coordinates live in [-1, 1]^3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub value: f64,
    pub semi_axes: (f64, f64, f64),
    pub center: (f64, f64, f64),
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl Ellipsoid {
    fn rotation(&self) -> [[f64; 3]; 3] {
        let (cp, sp) = (self.phi.cos(), self.phi.sin());
        let (ct, st) = (self.theta.cos(), self.theta.sin());
        let (cs, ss) = (self.psi.cos(), self.psi.sin());
        // z-x-z Euler convention
        [
            [cs * cp - ct * sp * ss, cs * sp + ct * cp * ss, ss * st],
            [-ss * cp - ct * sp * cs, -ss * sp + ct * cp * cs, cs * st],
            [st * sp, -st * cp, ct],
        ]
    }

    /// Whether the point (normalized coordinates) lies inside the ellipsoid.
    pub fn contains(&self, p: (f64, f64, f64)) -> bool {
        let d = (p.0 - self.center.0, p.1 - self.center.1, p.2 - self.center.2);
        let r = self.rotation();
        let u = (
            r[0][0] * d.0 + r[0][1] * d.1 + r[0][2] * d.2,
            r[1][0] * d.0 + r[1][1] * d.1 + r[1][2] * d.2,
            r[2][0] * d.0 + r[2][1] * d.1 + r[2][2] * d.2,
        );
        let (a, b, c) = self.semi_axes;
        (u.0 / a).powi(2) + (u.1 / b).powi(2) + (u.2 / c).powi(2) <= 1.0
    }
}

/// The classic ten-ellipsoid head phantom with contrast-adjusted intensities
/// so the summed field stays inside [0, 1].
pub fn shepp_logan_ellipsoids() -> Vec<Ellipsoid> {
    let d = std::f64::consts::PI / 180.0;
    let e = |value: f64, ax: (f64, f64, f64), c: (f64, f64, f64), phi: f64, psi: f64| Ellipsoid {
        value,
        semi_axes: ax,
        center: c,
        phi: phi * d,
        theta: 0.0,
        psi: psi * d,
    };
    vec![
        e(1.0, (0.69, 0.92, 0.81), (0.0, 0.0, 0.0), 0.0, 0.0),
        e(-0.8, (0.6624, 0.874, 0.78), (0.0, -0.0184, 0.0), 0.0, 0.0),
        e(-0.2, (0.11, 0.31, 0.22), (0.22, 0.0, 0.0), -18.0, 10.0),
        e(-0.2, (0.16, 0.41, 0.28), (-0.22, 0.0, 0.0), 18.0, 10.0),
        e(0.1, (0.21, 0.25, 0.41), (0.0, 0.35, -0.15), 0.0, 0.0),
        e(0.1, (0.046, 0.046, 0.05), (0.0, 0.1, 0.25), 0.0, 0.0),
        e(0.1, (0.046, 0.046, 0.05), (0.0, -0.1, 0.25), 0.0, 0.0),
        e(0.1, (0.046, 0.023, 0.05), (-0.08, -0.605, 0.0), 0.0, 0.0),
        e(0.1, (0.023, 0.023, 0.02), (0.0, -0.606, 0.0), 0.0, 0.0),
        e(0.1, (0.023, 0.046, 0.02), (0.06, -0.605, 0.0), 0.0, 0.0),
    ]
}

/// Sums ellipsoid intensities at one normalized point.
pub fn ellipsoid_sum(ellipsoids: &[Ellipsoid], p: (f64, f64, f64)) -> f64 {
    ellipsoids.iter().filter(|e| e.contains(p)).map(|e| e.value).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomKind {
    /// Constant field.
    Uniform { intensity: f64 },
    /// Centered axis-aligned cube of the given half-width (in voxels).
    Cube { half_width: usize, intensity: f64 },
    /// Fixed set of three nested axis-aligned ellipsoids, scaled by `intensity`.
    Ellipsoids { intensity: f64 },
    /// Ten-ellipsoid head phantom.
    Shepp3d,
    /// Seeded family of random ellipsoids; the training-set generator.
    RandomEllipsoids { seed: u64, count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    /// Edge length in voxels; the phantom is always cubic.
    pub n: usize,
    /// Isotropic voxel spacing in mm.
    pub spacing: f32,
}

impl PhantomSpec {
    pub fn new(kind: PhantomKind, n: usize) -> Self {
        Self { kind, n, spacing: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(ReconError::spec(format!("phantom edge must be >= 4 voxels, got {}", self.n)));
        }
        if self.spacing <= 0.0 {
            return Err(ReconError::spec("phantom spacing must be positive"));
        }
        let intensity_ok = |v: f64| (0.0..=1.0).contains(&v);
        match &self.kind {
            PhantomKind::Uniform { intensity } | PhantomKind::Ellipsoids { intensity } => {
                if !intensity_ok(*intensity) {
                    return Err(ReconError::spec("phantom intensity must lie in [0, 1]"));
                }
            }
            PhantomKind::Cube { half_width, intensity } => {
                if !intensity_ok(*intensity) {
                    return Err(ReconError::spec("phantom intensity must lie in [0, 1]"));
                }
                if *half_width == 0 || *half_width * 2 > self.n {
                    return Err(ReconError::spec("cube half-width must fit inside the volume"));
                }
            }
            PhantomKind::Shepp3d => {}
            PhantomKind::RandomEllipsoids { count, .. } => {
                if *count == 0 {
                    return Err(ReconError::spec("random phantom needs at least one ellipsoid"));
                }
            }
        }
        Ok(())
    }
}

fn fixed_ellipsoids(intensity: f64) -> Vec<Ellipsoid> {
    let e = |value, ax, c| Ellipsoid {
        value,
        semi_axes: ax,
        center: c,
        phi: 0.0,
        theta: 0.0,
        psi: 0.0,
    };
    vec![
        e(0.6 * intensity, (0.85, 0.7, 0.75), (0.0, 0.0, 0.0)),
        e(0.25 * intensity, (0.35, 0.45, 0.3), (-0.25, 0.1, 0.15)),
        e(0.15 * intensity, (0.2, 0.15, 0.25), (0.35, -0.3, -0.2)),
    ]
}

/// Draws a seeded ellipsoid family with intensities that keep the summed
/// field inside [0, 1] before the final clamp.
pub fn random_ellipsoids(seed: u64, count: usize) -> Vec<Ellipsoid> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count + 1);
    // enclosing body so the family shares a coarse silhouette
    out.push(Ellipsoid {
        value: 0.3,
        semi_axes: (0.88, 0.88, 0.88),
        center: (0.0, 0.0, 0.0),
        phi: 0.0,
        theta: 0.0,
        psi: 0.0,
    });
    let budget = 0.7 / count as f64;
    for _ in 0..count {
        let ax = (
            rng.random_range(0.08..0.45),
            rng.random_range(0.08..0.45),
            rng.random_range(0.08..0.45),
        );
        let center = (
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        );
        out.push(Ellipsoid {
            value: rng.random_range(0.2..1.0) * budget,
            semi_axes: ax,
            center,
            phi: rng.random_range(0.0..std::f64::consts::PI),
            theta: rng.random_range(0.0..std::f64::consts::PI),
            psi: rng.random_range(0.0..std::f64::consts::PI),
        });
    }
    out
}

/// Normalized coordinate of a voxel center: index i of n maps to
/// (2(i + 0.5) - n) / n in [-1, 1].
#[inline]
pub fn norm_coord(i: usize, n: usize) -> f64 {
    (2.0 * (i as f64 + 0.5) - n as f64) / n as f64
}

/// Builds the cubic phantom volume described by `spec`. Deterministic,
/// including the seeded random family; values always lie in [0, 1].
pub fn make_phantom(spec: &PhantomSpec) -> Result<Volume3D> {
    spec.validate()?;
    let n = spec.n;
    let sp = (spec.spacing, spec.spacing, spec.spacing);
    let from_ellipsoids = |es: &[Ellipsoid]| {
        Volume3D::from_fn((n, n, n), sp, |x, y, z| {
            let p = (norm_coord(x, n), norm_coord(y, n), norm_coord(z, n));
            ellipsoid_sum(es, p).clamp(0.0, 1.0) as f32
        })
    };
    match &spec.kind {
        PhantomKind::Uniform { intensity } => {
            Volume3D::new((n, n, n), sp, vec![*intensity as f32; n * n * n])
        }
        PhantomKind::Cube { half_width, intensity } => {
            let lo = n / 2 - half_width;
            let hi = n / 2 + half_width;
            Volume3D::from_fn((n, n, n), sp, |x, y, z| {
                let inside = (lo..hi).contains(&x) && (lo..hi).contains(&y) && (lo..hi).contains(&z);
                if inside {
                    *intensity as f32
                } else {
                    0.0
                }
            })
        }
        PhantomKind::Ellipsoids { intensity } => from_ellipsoids(&fixed_ellipsoids(*intensity)),
        PhantomKind::Shepp3d => from_ellipsoids(&shepp_logan_ellipsoids()),
        PhantomKind::RandomEllipsoids { seed, count } => {
            from_ellipsoids(&random_ellipsoids(*seed, *count))
        }
    }
}
