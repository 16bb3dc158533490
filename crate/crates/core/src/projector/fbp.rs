//! Analytic baselines: filtered backprojection (parallel beam) and
//! FDK-weighted filtered backprojection (cone beam).

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{ReconError, Result};
use crate::volume::Volume3D;

use super::{GridSpec, ScanMode, Sinogram};

/// Reconstruction filter for the ramp stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbpFilter {
    Ramp,
    SheppLogan,
}

impl FbpFilter {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ramp" => Ok(FbpFilter::Ramp),
            "shepp_logan" => Ok(FbpFilter::SheppLogan),
            other => Err(ReconError::config(format!("unsupported filter name '{other}'"))),
        }
    }
}

/// Frequency response of the filter over an FFT of length `n_fft` with
/// sample pitch `pitch` (mm). Frequencies are in cycles/mm; DC is zero.
pub fn filter_response(filter: FbpFilter, n_fft: usize, pitch: f64) -> Vec<f64> {
    let f_nyquist = 0.5 / pitch;
    (0..n_fft)
        .map(|k| {
            let k_signed = if k <= n_fft / 2 { k as f64 } else { k as f64 - n_fft as f64 };
            let f = k_signed / (n_fft as f64 * pitch);
            let ramp = f.abs();
            match filter {
                FbpFilter::Ramp => ramp,
                FbpFilter::SheppLogan => {
                    if f == 0.0 {
                        0.0
                    } else {
                        let x = std::f64::consts::PI * f / (2.0 * f_nyquist);
                        ramp * x.sin() / x
                    }
                }
            }
        })
        .collect()
}

fn next_pow2(n: usize) -> usize {
    let mut p = 1;
    while p < n {
        p <<= 1;
    }
    p
}

struct RowFilter {
    n_fft: usize,
    response: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl RowFilter {
    fn new(filter: FbpFilter, nu: usize, pitch: f64) -> Self {
        let n_fft = next_pow2(2 * nu);
        let mut planner = FftPlanner::new();
        Self {
            n_fft,
            response: filter_response(filter, n_fft, pitch),
            fwd: planner.plan_fft_forward(n_fft),
            inv: planner.plan_fft_inverse(n_fft),
        }
    }

    /// Ramp-filters one detector row of line integrals sampled at `pitch`.
    fn apply(&self, row: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        for (b, &r) in buf.iter_mut().zip(row.iter()) {
            b.re = r;
        }
        self.fwd.process(&mut buf);
        for (b, &h) in buf.iter_mut().zip(self.response.iter()) {
            *b *= h;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.n_fft as f64;
        row.iter().enumerate().map(|(i, _)| buf[i].re * scale).collect()
    }
}

/// Bilinear lookup into one filtered view, (u, v) in mm detector coordinates.
#[inline]
fn sample_view(view: &[f64], nu: usize, nv: usize, du: f64, dv: f64, u: f64, v: f64) -> f64 {
    let fu = u / du + nu as f64 / 2.0 - 0.5;
    let fv = v / dv + nv as f64 / 2.0 - 0.5;
    let iu = fu.floor();
    let iv = fv.floor();
    let wu = fu - iu;
    let wv = fv - iv;
    let mut acc = 0.0;
    for (su, cu) in [(iu as isize, 1.0 - wu), (iu as isize + 1, wu)] {
        for (sv, cv) in [(iv as isize, 1.0 - wv), (iv as isize + 1, wv)] {
            if su >= 0 && (su as usize) < nu && sv >= 0 && (sv as usize) < nv {
                acc += cu * cv * view[su as usize + nu * sv as usize];
            }
        }
    }
    acc
}

/// Analytic reconstruction. Parallel mode is classic FBP; cone-beam mode is
/// FDK with cosine pre-weighting and distance-squared backprojection weights,
/// filtered on the virtual detector at the rotation center.
pub fn fbp_reconstruct(sino: &Sinogram, grid: GridSpec, filter: FbpFilter) -> Result<Volume3D> {
    let geom = &sino.geometry;
    geom.check_grid(grid)?;
    let (nu, nv) = geom.det_bins;
    let (du, dv) = geom.det_pitch;
    let n_views = geom.num_views;

    // virtual-detector scale: 1 for parallel, R/(R+D) for cone beam
    let det_scale = match geom.mode {
        ScanMode::Parallel3d => 1.0,
        ScanMode::Conebeam => {
            geom.source_to_center / (geom.source_to_center + geom.center_to_detector)
        }
    };
    let (du_v, dv_v) = (du * det_scale, dv * det_scale);
    let row_filter = RowFilter::new(filter, nu, du_v);
    let r_src = geom.source_to_center;

    let filtered: Vec<Vec<f64>> = (0..n_views)
        .into_par_iter()
        .map(|view| {
            let mut out = vec![0.0f64; nu * nv];
            let mut row = vec![0.0f64; nu];
            for iv in 0..nv {
                for iu in 0..nu {
                    let mut p = sino.at(view, iu, iv) as f64;
                    if geom.mode == ScanMode::Conebeam {
                        let u = (iu as f64 + 0.5 - nu as f64 / 2.0) * du_v;
                        let v = (iv as f64 + 0.5 - nv as f64 / 2.0) * dv_v;
                        p *= r_src / (r_src * r_src + u * u + v * v).sqrt();
                    }
                    row[iu] = p;
                }
                let q = row_filter.apply(&row);
                out[iv * nu..(iv + 1) * nu].copy_from_slice(&q);
            }
            out
        })
        .collect();

    let (nx, ny, nz) = grid.dims;
    let (sx, sy, sz) = (grid.spacing.0 as f64, grid.spacing.1 as f64, grid.spacing.2 as f64);
    let scale = std::f64::consts::PI / n_views as f64;

    let mut values = vec![0.0f32; nx * ny * nz];
    values
        .par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, plane)| {
            let pz = (z as f64 + 0.5 - nz as f64 / 2.0) * sz;
            for y in 0..ny {
                let py = (y as f64 + 0.5 - ny as f64 / 2.0) * sy;
                for x in 0..nx {
                    let px = (x as f64 + 0.5 - nx as f64 / 2.0) * sx;
                    let mut acc = 0.0f64;
                    for (view, q) in filtered.iter().enumerate() {
                        let phi = geom.angles[view];
                        let (c, s) = (phi.cos(), phi.sin());
                        match geom.mode {
                            ScanMode::Parallel3d => {
                                let u = -s * px + c * py;
                                acc += sample_view(q, nu, nv, du_v, dv_v, u, pz);
                            }
                            ScanMode::Conebeam => {
                                // distance from the source plane along the central ray
                                let l = r_src - (px * c + py * s);
                                if l > 1e-6 {
                                    let t = r_src / l;
                                    let u = t * (-s * px + c * py);
                                    let v = t * pz;
                                    acc += t * t * sample_view(q, nu, nv, du_v, dv_v, u, v);
                                }
                            }
                        }
                    }
                    plane[x + nx * y] = (acc * scale) as f32;
                }
            }
        });

    Volume3D::new(grid.dims, grid.spacing, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;
    use crate::projector::{forward_project, Geometry};
    use crate::volume::{make_phantom, PhantomKind, PhantomSpec};

    #[test]
    fn ramp_response_is_zero_at_dc() {
        for filter in [FbpFilter::Ramp, FbpFilter::SheppLogan] {
            let h = filter_response(filter, 64, 1.0);
            assert_eq!(h[0], 0.0);
            assert!(h[1] > 0.0);
        }
    }

    #[test]
    fn unknown_filter_name_rejected() {
        assert!(FbpFilter::parse("hann").is_err());
        assert_eq!(FbpFilter::parse("ramp").unwrap(), FbpFilter::Ramp);
    }

    #[test]
    fn zero_sinogram_reconstructs_zero() {
        let grid = GridSpec { dims: (8, 8, 8), spacing: (1.0, 1.0, 1.0) };
        let geom = Geometry::parallel_for_grid(grid, 8);
        let sino = Sinogram::zeros(geom).unwrap();
        let v = fbp_reconstruct(&sino, grid, FbpFilter::Ramp).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    fn ball_phantom(n: usize) -> Volume3D {
        make_phantom(&PhantomSpec::new(PhantomKind::Ellipsoids { intensity: 1.0 }, n)).unwrap()
    }

    #[test]
    fn dense_views_beat_sparse_views() {
        let truth = ball_phantom(32);
        let grid = GridSpec::of(&truth);
        let psnr_for = |views: usize| {
            let geom = Geometry::parallel_for_grid(grid, views);
            let sino = forward_project(&truth, &geom).unwrap();
            let recon = fbp_reconstruct(&sino, grid, FbpFilter::Ramp).unwrap();
            psnr(&recon, &truth, 1.0).unwrap()
        };
        let dense = psnr_for(64);
        let sparse = psnr_for(29);
        assert!(
            dense > sparse,
            "dense-view FBP ({dense:.2} dB) should beat 29 views ({sparse:.2} dB)"
        );
    }

    #[test]
    fn parallel_fbp_reference_psnr_pinned() {
        // regression oracle: value recorded from a reference run of this code
        let truth = ball_phantom(32);
        let grid = GridSpec::of(&truth);
        let geom = Geometry::parallel_for_grid(grid, 64);
        let sino = forward_project(&truth, &geom).unwrap();
        let recon = fbp_reconstruct(&sino, grid, FbpFilter::Ramp).unwrap();
        let got = psnr(&recon, &truth, 1.0).unwrap();
        let reference = 29.012;
        assert!(
            (got - reference).abs() <= 0.1,
            "FBP reference PSNR drifted: got {got:.3} dB, pinned {reference:.3} dB"
        );
    }

    #[test]
    fn fdk_reconstructs_recognizable_ball() {
        let truth = ball_phantom(24);
        let grid = GridSpec::of(&truth);
        let geom = Geometry::conebeam_for_grid(grid, 48);
        let sino = forward_project(&truth, &geom).unwrap();
        let recon = fbp_reconstruct(&sino, grid, FbpFilter::SheppLogan).unwrap();
        let zero = Volume3D::zeros(grid.dims, grid.spacing).unwrap();
        let base = psnr(&zero, &truth, 1.0).unwrap();
        let got = psnr(&recon, &truth, 1.0).unwrap();
        assert!(
            got > base + 5.0,
            "FDK ({got:.2} dB) should clearly beat the zero volume ({base:.2} dB)"
        );
    }
}
