//! CT forward model: ray-driven line integrals (Siddon traversal), the exact
//! adjoint backprojection, and analytic FBP/FDK baselines.
//!
//! Forward and backprojection share one traversal routine, so the discrete
//! operators M and M^T are exactly matched and the adjoint identity
//! <Mv, s> = <v, M^T s> holds to float rounding.

mod fbp;
pub mod sidecar;

pub use fbp::{fbp_reconstruct, filter_response, FbpFilter};

use rayon::prelude::*;

use crate::error::{ReconError, Result};
use crate::volume::Volume3D;

/// Scan trajectory type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Parallel3d,
    Conebeam,
}

impl ScanMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanMode::Parallel3d => "parallel3d",
            ScanMode::Conebeam => "conebeam",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "parallel3d" => Ok(ScanMode::Parallel3d),
            "conebeam" => Ok(ScanMode::Conebeam),
            other => Err(ReconError::config(format!("unknown scan mode '{other}'"))),
        }
    }
}

/// Acquisition geometry. Angles are radians; the detector is a (nu, nv) flat
/// panel with (du, dv) mm pitch. Distances apply to cone-beam mode only.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub mode: ScanMode,
    pub num_views: usize,
    pub angles: Vec<f64>,
    pub det_bins: (usize, usize),
    pub det_pitch: (f64, f64),
    pub source_to_center: f64,
    pub center_to_detector: f64,
}

impl Geometry {
    /// Parallel-beam geometry with views evenly spaced over [0, 2pi).
    pub fn parallel(num_views: usize, det_bins: (usize, usize), det_pitch: (f64, f64)) -> Self {
        Self {
            mode: ScanMode::Parallel3d,
            num_views,
            angles: even_angles(num_views),
            det_bins,
            det_pitch,
            source_to_center: 0.0,
            center_to_detector: 0.0,
        }
    }

    /// Cone-beam geometry with views evenly spaced over [0, 2pi).
    pub fn conebeam(
        num_views: usize,
        det_bins: (usize, usize),
        det_pitch: (f64, f64),
        source_to_center: f64,
        center_to_detector: f64,
    ) -> Self {
        Self {
            mode: ScanMode::Conebeam,
            num_views,
            angles: even_angles(num_views),
            det_bins,
            det_pitch,
            source_to_center,
            center_to_detector,
        }
    }

    /// Replaces the even angle spacing with explicit view angles.
    pub fn with_angles(mut self, angles: Vec<f64>) -> Self {
        self.num_views = angles.len();
        self.angles = angles;
        self
    }

    /// Parallel-beam geometry sized so the grid's field of view is covered,
    /// with detector pitch equal to the voxel spacing. Bin counts keep the
    /// grid's parity so rays sit at half-voxel offsets rather than exactly on
    /// voxel boundaries.
    pub fn parallel_for_grid(grid: GridSpec, num_views: usize) -> Self {
        let (nx, ny, nz) = grid.dims;
        let (sx, sy, sz) = grid.spacing;
        let s = sx.min(sy).min(sz) as f64;
        let diag = ((nx as f64 * sx as f64).hypot(ny as f64 * sy as f64)) / s;
        let mut nu = diag.ceil() as usize + 2;
        if (nu + nx) % 2 == 1 {
            nu += 1;
        }
        let mut nv = (nz as f64 * sz as f64 / s).ceil() as usize + 2;
        if (nv + nz) % 2 == 1 {
            nv += 1;
        }
        Self::parallel(num_views, (nu, nv), (s, s))
    }

    /// Cone-beam geometry for a grid, preserving the 1:1 source/detector
    /// distance ratio (500 mm + 500 mm) and scaling the panel to cover the
    /// magnified field of view.
    pub fn conebeam_for_grid(grid: GridSpec, num_views: usize) -> Self {
        let (nx, ny, nz) = grid.dims;
        let (sx, sy, sz) = grid.spacing;
        let s = sx.min(sy).min(sz) as f64;
        let (d_src, d_det) = (500.0, 500.0);
        let r_xy = 0.5 * (nx as f64 * sx as f64).hypot(ny as f64 * sy as f64);
        let mag = (d_src + d_det) / (d_src - r_xy);
        let du = s * (d_src + d_det) / d_src;
        let nu = (2.0 * r_xy * mag / du).ceil() as usize + 4;
        let nv = (nz as f64 * sz as f64 * mag / du).ceil() as usize + 4;
        Self::conebeam(num_views, (nu, nv), (du, du), d_src, d_det)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_views == 0 {
            return Err(ReconError::config("geometry needs at least one view"));
        }
        if self.angles.len() != self.num_views {
            return Err(ReconError::config(format!(
                "num_views {} != angle count {}",
                self.num_views,
                self.angles.len()
            )));
        }
        if self.det_bins.0 == 0 || self.det_bins.1 == 0 {
            return Err(ReconError::config("detector needs positive bin counts"));
        }
        if !(self.det_pitch.0 > 0.0 && self.det_pitch.1 > 0.0) {
            return Err(ReconError::config("detector pitch must be positive"));
        }
        if self.mode == ScanMode::Conebeam
            && !(self.source_to_center > 0.0 && self.center_to_detector > 0.0)
        {
            return Err(ReconError::config("cone-beam distances must be positive"));
        }
        Ok(())
    }

    pub fn num_rays(&self) -> usize {
        self.num_views * self.det_bins.0 * self.det_bins.1
    }

    /// Checks that the grid fits inside the scanned field of view.
    pub fn check_grid(&self, grid: GridSpec) -> Result<()> {
        self.validate()?;
        let (nx, ny, nz) = grid.dims;
        let (sx, sy, sz) = grid.spacing;
        let r_xy = 0.5 * (nx as f64 * sx as f64).hypot(ny as f64 * sy as f64);
        let half_z = 0.5 * nz as f64 * sz as f64;
        let half_u = 0.5 * self.det_bins.0 as f64 * self.det_pitch.0;
        let half_v = 0.5 * self.det_bins.1 as f64 * self.det_pitch.1;
        match self.mode {
            ScanMode::Parallel3d => {
                if half_u < r_xy || half_v < half_z {
                    return Err(ReconError::config(format!(
                        "detector ({half_u:.2} x {half_v:.2} mm half-extent) does not cover \
                         the volume (needs {r_xy:.2} x {half_z:.2} mm)"
                    )));
                }
            }
            ScanMode::Conebeam => {
                if r_xy >= self.source_to_center {
                    return Err(ReconError::config("volume extends beyond the source orbit"));
                }
                let mag = (self.source_to_center + self.center_to_detector)
                    / (self.source_to_center - r_xy);
                if half_u < r_xy * mag || half_v < half_z * mag {
                    return Err(ReconError::config(format!(
                        "cone-beam detector does not cover the magnified volume \
                         (needs {:.2} x {:.2} mm half-extent, has {half_u:.2} x {half_v:.2})",
                        r_xy * mag,
                        half_z * mag
                    )));
                }
            }
        }
        Ok(())
    }
}

fn even_angles(num_views: usize) -> Vec<f64> {
    (0..num_views)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / num_views as f64)
        .collect()
}

/// Voxel grid description: dims plus mm spacing, centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dims: (usize, usize, usize),
    pub spacing: (f32, f32, f32),
}

impl GridSpec {
    pub fn of(vol: &Volume3D) -> Self {
        Self { dims: vol.dims(), spacing: vol.spacing() }
    }

    pub fn num_voxels(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }
}

/// Measured projection data for one geometry. Values are stored with the
/// detector u index fastest, then v, then view.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub geometry: Geometry,
    values: Vec<f32>,
}

impl Sinogram {
    pub fn new(geometry: Geometry, values: Vec<f32>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.num_rays() {
            return Err(ReconError::shape(format!(
                "sinogram needs {} values, got {}",
                geometry.num_rays(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ReconError::spec("sinogram values must be finite"));
        }
        Ok(Self { geometry, values })
    }

    pub fn zeros(geometry: Geometry) -> Result<Self> {
        let n = geometry.num_rays();
        Self::new(geometry, vec![0.0; n])
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn index(&self, view: usize, iu: usize, iv: usize) -> usize {
        let (nu, nv) = self.geometry.det_bins;
        iu + nu * (iv + nv * view)
    }

    pub fn at(&self, view: usize, iu: usize, iv: usize) -> f32 {
        self.values[self.index(view, iu, iv)]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(self.geometry.clone(), self.values.iter().map(|&v| f(v)).collect())
    }
}

/// A ray in mm coordinates with normalized direction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ray {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
}

pub(crate) fn ray_for(geom: &Geometry, view: usize, iu: usize, iv: usize) -> Ray {
    let phi = geom.angles[view];
    let (nu, nv) = geom.det_bins;
    let (du, dv) = geom.det_pitch;
    let u = (iu as f64 + 0.5 - nu as f64 / 2.0) * du;
    let v = (iv as f64 + 0.5 - nv as f64 / 2.0) * dv;
    let e_r = [phi.cos(), phi.sin(), 0.0];
    let e_u = [-phi.sin(), phi.cos(), 0.0];
    match geom.mode {
        ScanMode::Parallel3d => Ray {
            origin: [u * e_u[0], u * e_u[1], v],
            dir: e_r,
        },
        ScanMode::Conebeam => {
            let src = [geom.source_to_center * e_r[0], geom.source_to_center * e_r[1], 0.0];
            let det = [
                -geom.center_to_detector * e_r[0] + u * e_u[0],
                -geom.center_to_detector * e_r[1] + u * e_u[1],
                v,
            ];
            let d = [det[0] - src[0], det[1] - src[1], det[2] - src[2]];
            let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            Ray {
                origin: src,
                dir: [d[0] / len, d[1] / len, d[2] / len],
            }
        }
    }
}

/// Walks the voxels intersected by `ray`, reporting (linear index,
/// intersection length in mm) per voxel. Rays missing the grid visit nothing.
pub(crate) fn traverse(grid: GridSpec, ray: Ray, mut visit: impl FnMut(usize, f64)) {
    let (nx, ny, nz) = grid.dims;
    let n = [nx as isize, ny as isize, nz as isize];
    let s = [grid.spacing.0 as f64, grid.spacing.1 as f64, grid.spacing.2 as f64];
    let h = [0.5 * nx as f64 * s[0], 0.5 * ny as f64 * s[1], 0.5 * nz as f64 * s[2]];
    let o = ray.origin;
    let d = ray.dir;

    // slab clip against the volume bounding box
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if d[a].abs() < 1e-12 {
            if o[a] <= -h[a] || o[a] >= h[a] {
                return;
            }
        } else {
            let ta = (-h[a] - o[a]) / d[a];
            let tb = (h[a] - o[a]) / d[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    if !(t1 > t0) {
        return;
    }

    // entry voxel, nudged off exact boundaries
    let eps = 1e-9 * (t1 - t0);
    let mut idx = [0isize; 3];
    for a in 0..3 {
        let p = o[a] + (t0 + eps) * d[a];
        idx[a] = (((p + h[a]) / s[a]).floor() as isize).clamp(0, n[a] - 1);
    }

    let mut t_next = [f64::INFINITY; 3];
    let mut step = [0isize; 3];
    let mut dt = [f64::INFINITY; 3];
    for a in 0..3 {
        if d[a] > 1e-12 {
            step[a] = 1;
            t_next[a] = ((idx[a] + 1) as f64 * s[a] - h[a] - o[a]) / d[a];
            dt[a] = s[a] / d[a];
        } else if d[a] < -1e-12 {
            step[a] = -1;
            t_next[a] = (idx[a] as f64 * s[a] - h[a] - o[a]) / d[a];
            dt[a] = -s[a] / d[a];
        }
    }

    let mut t_cur = t0;
    loop {
        let mut a_min = 0;
        if t_next[1] < t_next[a_min] {
            a_min = 1;
        }
        if t_next[2] < t_next[a_min] {
            a_min = 2;
        }
        let t_exit = t_next[a_min].min(t1);
        let w = t_exit - t_cur;
        if w > 0.0 {
            let lin = idx[0] + n[0] * (idx[1] + n[1] * idx[2]);
            visit(lin as usize, w);
        }
        if t_exit >= t1 - 1e-15 {
            return;
        }
        t_cur = t_exit;
        idx[a_min] += step[a_min];
        if idx[a_min] < 0 || idx[a_min] >= n[a_min] {
            return;
        }
        t_next[a_min] += dt[a_min];
    }
}

/// Number of views whose partial results are held in memory at once during
/// parallel backprojection.
const VIEW_CHUNK: usize = 8;

/// f64 forward projection kernel shared by the public API and SIRT.
pub(crate) fn forward_values(geom: &Geometry, grid: GridSpec, vals: &[f64]) -> Vec<f64> {
    let (nu, nv) = geom.det_bins;
    let per_view = nu * nv;
    let mut out = vec![0.0f64; geom.num_rays()];
    out.par_chunks_mut(per_view).enumerate().for_each(|(view, block)| {
        for iv in 0..nv {
            for iu in 0..nu {
                let mut acc = 0.0f64;
                traverse(grid, ray_for(geom, view, iu, iv), |i, w| {
                    acc += w * vals[i];
                });
                block[iu + nu * iv] = acc;
            }
        }
    });
    out
}

/// f64 backprojection kernel; the exact adjoint of [`forward_values`].
/// Per-view partial volumes are reduced in view order, so the result is
/// independent of the parallel schedule.
pub(crate) fn back_values(geom: &Geometry, grid: GridSpec, ray_vals: &[f64]) -> Vec<f64> {
    let (nu, nv) = geom.det_bins;
    let nvox = grid.num_voxels();
    let mut acc = vec![0.0f64; nvox];
    let views: Vec<usize> = (0..geom.num_views).collect();
    for chunk in views.chunks(VIEW_CHUNK) {
        let partials: Vec<Vec<f64>> = chunk
            .par_iter()
            .map(|&view| {
                let mut part = vec![0.0f64; nvox];
                for iv in 0..nv {
                    for iu in 0..nu {
                        let rv = ray_vals[iu + nu * (iv + nv * view)];
                        if rv != 0.0 {
                            traverse(grid, ray_for(geom, view, iu, iv), |i, w| {
                                part[i] += w * rv;
                            });
                        }
                    }
                }
                part
            })
            .collect();
        for part in partials {
            for (a, p) in acc.iter_mut().zip(part.iter()) {
                *a += p;
            }
        }
    }
    acc
}

/// Per-ray weight sums (total intersection length of each ray with the grid).
pub(crate) fn ray_weight_sums(geom: &Geometry, grid: GridSpec) -> Vec<f64> {
    forward_values(geom, grid, &vec![1.0; grid.num_voxels()])
}

/// Per-voxel weight sums (total length of all rays crossing each voxel).
pub(crate) fn voxel_weight_sums(geom: &Geometry, grid: GridSpec) -> Vec<f64> {
    back_values(geom, grid, &vec![1.0; geom.num_rays()])
}

/// Line-integral forward projection: each sinogram entry is the intersection
/// -length-weighted sum of voxel values along its ray.
pub fn forward_project(vol: &Volume3D, geom: &Geometry) -> Result<Sinogram> {
    geom.check_grid(GridSpec::of(vol))?;
    let vals: Vec<f64> = vol.values().iter().map(|&v| v as f64).collect();
    let out = forward_values(geom, GridSpec::of(vol), &vals);
    Sinogram::new(geom.clone(), out.into_iter().map(|v| v as f32).collect())
}

/// Exact adjoint of [`forward_project`] onto the given grid.
pub fn back_project(sino: &Sinogram, grid: GridSpec) -> Result<Volume3D> {
    sino.geometry.check_grid(grid)?;
    let rays: Vec<f64> = sino.values().iter().map(|&v| v as f64).collect();
    let out = back_values(&sino.geometry, grid, &rays);
    Volume3D::new(grid.dims, grid.spacing, out.into_iter().map(|v| v as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{make_phantom, PhantomKind, PhantomSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_volume(n: usize, seed: u64) -> Volume3D {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Volume3D::from_fn((n, n, n), (1.0, 1.0, 1.0), |_, _, _| rng.random::<f32>()).unwrap()
    }

    #[test]
    fn zero_volume_projects_to_zero() {
        let v = Volume3D::zeros((8, 8, 8), (1.0, 1.0, 1.0)).unwrap();
        let geom = Geometry::parallel_for_grid(GridSpec::of(&v), 4);
        let sino = forward_project(&v, &geom).unwrap();
        assert!(sino.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn axial_ray_through_cube_integrates_side_length() {
        // uniform unit-density cube, parallel ray perpendicular to a face
        let n = 8;
        let v = Volume3D::from_fn((n, n, n), (1.0, 1.0, 1.0), |_, _, _| 1.0).unwrap();
        let geom = Geometry::parallel(1, (15, 15), (1.0, 1.0)).with_angles(vec![0.0]);
        let sino = forward_project(&v, &geom).unwrap();
        // center bin: u = v = 0 passes straight through 8 mm of material
        let center = sino.at(0, 7, 7);
        assert!((center - n as f32).abs() < 1e-4, "got {center}");
    }

    #[test]
    fn single_voxel_oblique_ray_matches_clipping_oracle() {
        // Liang-Barsky style slab clipping against the one voxel's box is an
        // independent check of the traversal's intersection length.
        let n = 6;
        let (ix, iy, iz) = (2usize, 3usize, 1usize);
        let v = Volume3D::from_fn((n, n, n), (1.0, 1.0, 1.0), |x, y, z| {
            if (x, y, z) == (ix, iy, iz) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let geom = Geometry::parallel(5, (16, 16), (1.0, 1.0));
        let sino = forward_project(&v, &geom).unwrap();

        let h = n as f64 / 2.0;
        let lo = [ix as f64 - h, iy as f64 - h, iz as f64 - h];
        let hi = [lo[0] + 1.0, lo[1] + 1.0, lo[2] + 1.0];
        let mut checked = 0;
        for view in 0..5 {
            for iu in 0..16 {
                for iv in 0..16 {
                    let ray = ray_for(&geom, view, iu, iv);
                    let mut t0 = f64::NEG_INFINITY;
                    let mut t1 = f64::INFINITY;
                    let mut hit = true;
                    for a in 0..3 {
                        if ray.dir[a].abs() < 1e-12 {
                            if ray.origin[a] <= lo[a] || ray.origin[a] >= hi[a] {
                                hit = false;
                            }
                        } else {
                            let ta = (lo[a] - ray.origin[a]) / ray.dir[a];
                            let tb = (hi[a] - ray.origin[a]) / ray.dir[a];
                            t0 = t0.max(ta.min(tb));
                            t1 = t1.min(ta.max(tb));
                        }
                    }
                    let expected = if hit && t1 > t0 { t1 - t0 } else { 0.0 };
                    let got = sino.at(view, iu, iv) as f64;
                    assert!(
                        (got - expected).abs() < 1e-5,
                        "view {view} bin ({iu},{iv}): got {got}, oracle {expected}"
                    );
                    if expected > 0.0 {
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0, "no ray intersected the voxel");
    }

    #[test]
    fn adjoint_identity_parallel_and_conebeam() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for mode in [ScanMode::Parallel3d, ScanMode::Conebeam] {
            let v = random_volume(16, rng.random());
            let grid = GridSpec::of(&v);
            let geom = match mode {
                ScanMode::Parallel3d => Geometry::parallel_for_grid(grid, 8),
                ScanMode::Conebeam => Geometry::conebeam_for_grid(grid, 8),
            };
            let s_vals: Vec<f32> = (0..geom.num_rays()).map(|_| rng.random::<f32>() - 0.5).collect();
            let s = Sinogram::new(geom.clone(), s_vals).unwrap();
            let fv = forward_project(&v, &geom).unwrap();
            let bt = back_project(&s, grid).unwrap();
            let lhs: f64 = fv
                .values()
                .iter()
                .zip(s.values())
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            let rhs: f64 = v
                .values()
                .iter()
                .zip(bt.values())
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            let norm_f: f64 = fv.values().iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
            let norm_s: f64 = s.values().iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
            let rel = (lhs - rhs).abs() / (norm_f * norm_s);
            assert!(rel <= 1e-5, "{mode:?}: adjoint relative error {rel}");
        }
    }

    #[test]
    fn forward_is_linear() {
        let a = random_volume(8, 1);
        let b = random_volume(8, 2);
        let geom = Geometry::parallel_for_grid(GridSpec::of(&a), 6);
        let lin = a.zip_map(&b, |x, y| 2.0 * x - 0.5 * y).unwrap();
        let f_lin = forward_project(&lin, &geom).unwrap();
        let fa = forward_project(&a, &geom).unwrap();
        let fb = forward_project(&b, &geom).unwrap();
        let scale: f64 = fa.values().iter().map(|&v| (v as f64).abs()).fold(0.0, f64::max);
        for i in 0..f_lin.values().len() {
            let expect = 2.0 * fa.values()[i] as f64 - 0.5 * fb.values()[i] as f64;
            assert!(
                (f_lin.values()[i] as f64 - expect).abs() <= 1e-6 * scale.max(1.0),
                "ray {i}"
            );
        }
    }

    #[test]
    fn rotating_phantom_half_turn_shifts_views() {
        let v = make_phantom(&PhantomSpec::new(
            PhantomKind::RandomEllipsoids { seed: 5, count: 4 },
            12,
        ))
        .unwrap();
        let rot = Volume3D::from_fn(v.dims(), v.spacing(), |x, y, z| {
            v.at(11 - x, 11 - y, z)
        })
        .unwrap();
        let geom = Geometry::parallel_for_grid(GridSpec::of(&v), 8);
        let s = forward_project(&v, &geom).unwrap();
        let sr = forward_project(&rot, &geom).unwrap();
        let (nu, nv) = geom.det_bins;
        let scale: f64 = s.values().iter().map(|&v| (v as f64).abs()).fold(0.0, f64::max);
        for view in 0..8 {
            for iu in 0..nu {
                for iv in 0..nv {
                    let a = sr.at(view, iu, iv) as f64;
                    let b = s.at((view + 4) % 8, iu, iv) as f64;
                    assert!((a - b).abs() <= 1e-5 * scale.max(1.0), "view {view} ({iu},{iv})");
                }
            }
        }
    }

    #[test]
    fn single_ray_backprojection_supports_only_its_voxels() {
        let grid = GridSpec { dims: (6, 6, 6), spacing: (1.0, 1.0, 1.0) };
        let geom = Geometry::parallel_for_grid(grid, 3);
        let mut vals = vec![0.0f32; geom.num_rays()];
        let (nu, nv) = geom.det_bins;
        let pick = (1usize, nu / 2, nv / 2);
        vals[pick.1 + nu * (pick.2 + nv * pick.0)] = 1.0;
        let sino = Sinogram::new(geom.clone(), vals).unwrap();
        let vol = back_project(&sino, grid).unwrap();
        let mut expected = vec![false; grid.num_voxels()];
        traverse(grid, ray_for(&geom, pick.0, pick.1, pick.2), |i, _| {
            expected[i] = true;
        });
        assert!(expected.iter().any(|&e| e));
        for (i, &val) in vol.values().iter().enumerate() {
            if expected[i] {
                assert!(val > 0.0, "voxel {i} on the ray should be positive");
            } else {
                assert_eq!(val, 0.0, "voxel {i} off the ray should stay zero");
            }
        }
    }

    #[test]
    fn geometry_mismatch_is_config_error() {
        let v = Volume3D::zeros((16, 16, 16), (1.0, 1.0, 1.0)).unwrap();
        // detector too small to cover the volume
        let geom = Geometry::parallel(4, (4, 4), (1.0, 1.0));
        assert!(matches!(forward_project(&v, &geom), Err(ReconError::Config(_))));
    }
}
