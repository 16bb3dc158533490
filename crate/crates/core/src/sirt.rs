//! Simultaneous Iterative Reconstruction Technique.
//!
//! One iteration performs
//!   v_n <- v_n + relax * [ sum_a m_an (p_a - sum_k m_ak v_k) / sum_k m_ak ] / sum_a m_an
//! over all rays a and voxels n simultaneously; rays or voxels whose weight
//! sum is zero are skipped (their correction is defined as zero).

use crate::error::{ReconError, Result};
use crate::projector::{back_values, forward_values, ray_weight_sums, voxel_weight_sums};
use crate::projector::{Geometry, GridSpec, Sinogram};
use crate::volume::Volume3D;

#[derive(Debug, Clone, PartialEq)]
pub struct SirtConfig {
    pub iterations: usize,
    /// Relaxation factor in (0, 2] applied to the correction.
    pub relaxation: f64,
    /// Clamp negative voxels to zero after each iteration (CT attenuation is
    /// non-negative).
    pub nonneg_clamp: bool,
}

impl Default for SirtConfig {
    fn default() -> Self {
        Self { iterations: 20, relaxation: 1.0, nonneg_clamp: true }
    }
}

impl SirtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 2.0) {
            return Err(ReconError::spec(format!(
                "SIRT relaxation must lie in (0, 2], got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

/// SIRT solver with the iteration-invariant ray/voxel weight sums
/// precomputed once per (geometry, grid) pair.
pub struct SirtOperator {
    geom: Geometry,
    grid: GridSpec,
    inv_row_sums: Vec<f64>,
    inv_col_sums: Vec<f64>,
}

const WEIGHT_EPS: f64 = 1e-12;

impl SirtOperator {
    pub fn new(geom: &Geometry, grid: GridSpec) -> Result<Self> {
        geom.check_grid(grid)?;
        let inv = |sums: Vec<f64>| {
            sums.into_iter()
                .map(|s| if s > WEIGHT_EPS { 1.0 / s } else { 0.0 })
                .collect::<Vec<f64>>()
        };
        Ok(Self {
            geom: geom.clone(),
            grid,
            inv_row_sums: inv(ray_weight_sums(geom, grid)),
            inv_col_sums: inv(voxel_weight_sums(geom, grid)),
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// l2 norm of the projection residual ||M v - P||.
    pub fn residual_norm(&self, v: &Volume3D, sino: &Sinogram) -> f64 {
        let vals: Vec<f64> = v.values().iter().map(|&x| x as f64).collect();
        let proj = forward_values(&self.geom, self.grid, &vals);
        proj.iter()
            .zip(sino.values())
            .map(|(&a, &b)| (a - b as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Runs `cfg.iterations` SIRT iterations starting from `init`.
    pub fn run(&self, sino: &Sinogram, init: &Volume3D, cfg: &SirtConfig) -> Result<Volume3D> {
        cfg.validate()?;
        if sino.geometry != self.geom {
            return Err(ReconError::shape("sinogram geometry differs from the operator's"));
        }
        if init.dims() != self.grid.dims {
            return Err(ReconError::shape(format!(
                "init dims {:?} differ from grid {:?}",
                init.dims(),
                self.grid.dims
            )));
        }
        let measured: Vec<f64> = sino.values().iter().map(|&x| x as f64).collect();
        let mut v: Vec<f64> = init.values().iter().map(|&x| x as f64).collect();
        for _ in 0..cfg.iterations {
            let proj = forward_values(&self.geom, self.grid, &v);
            let scaled: Vec<f64> = proj
                .iter()
                .zip(measured.iter())
                .zip(self.inv_row_sums.iter())
                .map(|((&p_est, &p), &inv_r)| (p - p_est) * inv_r)
                .collect();
            let correction = back_values(&self.geom, self.grid, &scaled);
            for ((vn, &c), &inv_c) in v.iter_mut().zip(correction.iter()).zip(self.inv_col_sums.iter())
            {
                *vn += cfg.relaxation * c * inv_c;
                if cfg.nonneg_clamp && *vn < 0.0 {
                    *vn = 0.0;
                }
            }
        }
        Volume3D::new(self.grid.dims, self.grid.spacing, v.into_iter().map(|x| x as f32).collect())
    }
}

/// Solves the system from `init` with a freshly built operator.
pub fn sirt_solve(sino: &Sinogram, grid: GridSpec, init: &Volume3D, cfg: &SirtConfig) -> Result<Volume3D> {
    SirtOperator::new(&sino.geometry, grid)?.run(sino, init, cfg)
}

/// CT data-consistency step: SIRT iterations starting from the current
/// iterate (default 20 inner iterations).
pub fn sirt_dc_step(v: &Volume3D, sino: &Sinogram, cfg: &SirtConfig) -> Result<Volume3D> {
    sirt_solve(sino, GridSpec::of(v), v, cfg)
}
