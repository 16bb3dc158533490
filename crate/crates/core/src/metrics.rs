//! Quantitative evaluation: PSNR, SSIM and RMSE (global and per anatomical
//! plane), noise power spectra over ROIs, and the per-axis histogram
//! similarity diagnostic.
//!
//! Plane naming follows the toolkit's axis convention: sagittal = axis 0
//! (y-z slices), coronal = axis 1 (x-z slices), transaxial = axis 2 (x-y
//! slices). Per-plane values are means over all slices of that plane.

use num_complex::Complex64;

use crate::error::{ReconError, Result};
use crate::mri::{fft2_centered_rect, ComplexField2D};
use crate::volume::{slice_stack, Field2D, Volume3D};

fn check_same_dims(a: &Volume3D, b: &Volume3D) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(ReconError::shape(format!("dims {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

fn mse(a: &[f32], b: &[f32]) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    sum / a.len() as f64
}

fn psnr_from_mse(mse: f64, data_range: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * data_range.log10() - 10.0 * mse.log10()
    }
}

/// Peak signal-to-noise ratio in dB; identical inputs yield +inf.
pub fn psnr(a: &Volume3D, b: &Volume3D, data_range: f64) -> Result<f64> {
    check_same_dims(a, b)?;
    if data_range <= 0.0 {
        return Err(ReconError::spec("data_range must be positive"));
    }
    Ok(psnr_from_mse(mse(a.values(), b.values()), data_range))
}

/// Root mean squared error.
pub fn rmse(a: &Volume3D, b: &Volume3D) -> Result<f64> {
    check_same_dims(a, b)?;
    Ok(mse(a.values(), b.values()).sqrt())
}

const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_WINDOW: usize = 7;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_taps() -> Vec<f64> {
    let radius = (SSIM_WINDOW / 2) as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k as f64).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= total;
    }
    taps
}

/// Separable Gaussian blur along one axis of a flat array, with border taps
/// renormalized to the in-bounds weight sum.
fn blur_axis(values: &[f64], dims: &[usize], axis: usize, taps: &[f64]) -> Vec<f64> {
    let radius = (taps.len() / 2) as isize;
    let n_axis = dims[axis] as isize;
    let stride: usize = dims[..axis].iter().product();
    let outer: usize = values.len() / dims[axis];
    let mut out = vec![0.0f64; values.len()];
    // iterate over all lines along `axis`
    let line_count = outer;
    for line in 0..line_count {
        // decompose the line id into (inner, rest) around the axis
        let inner = line % stride.max(1);
        let rest = line / stride.max(1);
        let base = inner + rest * stride * dims[axis];
        for i in 0..n_axis {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (t, &w) in taps.iter().enumerate() {
                let j = i + t as isize - radius;
                if j >= 0 && j < n_axis {
                    acc += w * values[base + j as usize * stride];
                    wsum += w;
                }
            }
            out[base + i as usize * stride] = acc / wsum;
        }
    }
    out
}

fn blur_nd(values: &[f64], dims: &[usize]) -> Vec<f64> {
    let taps = gaussian_taps();
    let mut cur = values.to_vec();
    for axis in 0..dims.len() {
        if dims[axis] > 1 {
            cur = blur_axis(&cur, dims, axis, &taps);
        }
    }
    cur
}

fn ssim_from_arrays(a: &[f64], b: &[f64], dims: &[usize], data_range: f64) -> f64 {
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let mu_a = blur_nd(a, dims);
    let mu_b = blur_nd(b, dims);
    let aa: Vec<f64> = a.iter().map(|&x| x * x).collect();
    let bb: Vec<f64> = b.iter().map(|&x| x * x).collect();
    let ab: Vec<f64> = a.iter().zip(b.iter()).map(|(&x, &y)| x * y).collect();
    let m_aa = blur_nd(&aa, dims);
    let m_bb = blur_nd(&bb, dims);
    let m_ab = blur_nd(&ab, dims);
    let mut total = 0.0;
    for i in 0..a.len() {
        let va = m_aa[i] - mu_a[i] * mu_a[i];
        let vb = m_bb[i] - mu_b[i] * mu_b[i];
        let cov = m_ab[i] - mu_a[i] * mu_b[i];
        let num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
        let den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
        total += num / den;
    }
    total / a.len() as f64
}

/// Structural similarity with a 7-tap Gaussian window (sigma 1.5) over the
/// full 3D volume; constants k1 = 0.01, k2 = 0.03.
pub fn ssim(a: &Volume3D, b: &Volume3D, data_range: f64) -> Result<f64> {
    check_same_dims(a, b)?;
    if data_range <= 0.0 {
        return Err(ReconError::spec("data_range must be positive"));
    }
    let av: Vec<f64> = a.values().iter().map(|&v| v as f64).collect();
    let bv: Vec<f64> = b.values().iter().map(|&v| v as f64).collect();
    let d = a.dims();
    Ok(ssim_from_arrays(&av, &bv, &[d.0, d.1, d.2], data_range))
}

/// 2D SSIM of a single slice pair.
pub fn ssim2d(a: &Field2D, b: &Field2D, data_range: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(ReconError::shape("slice shapes differ"));
    }
    // Field2D is row-major with cols fastest
    Ok(ssim_from_arrays(a.values(), b.values(), &[a.cols(), a.rows()], data_range))
}

/// Per-plane metric triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneMetrics {
    pub psnr: f64,
    pub ssim: f64,
    pub rmse: f64,
}

/// Metrics over the whole volume and per anatomical plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub data_range: f64,
    pub global: PlaneMetrics,
    /// axis 0 slices (y-z planes)
    pub sagittal: PlaneMetrics,
    /// axis 1 slices (x-z planes)
    pub coronal: PlaneMetrics,
    /// axis 2 slices (x-y planes)
    pub transaxial: PlaneMetrics,
}

fn slice_mse(a: &Field2D, b: &Field2D) -> f64 {
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    sum / a.values().len() as f64
}

/// Mean per-slice PSNR along each axis; order [axis0, axis1, axis2].
pub fn psnr_per_plane(a: &Volume3D, b: &Volume3D, data_range: f64) -> Result<[f64; 3]> {
    check_same_dims(a, b)?;
    let mut out = [0.0f64; 3];
    for axis in 0..3 {
        let sa = slice_stack(a, axis)?;
        let sb = slice_stack(b, axis)?;
        let total: f64 = sa
            .iter()
            .zip(sb.iter())
            .map(|(x, y)| psnr_from_mse(slice_mse(x, y), data_range))
            .sum();
        out[axis] = total / sa.len() as f64;
    }
    Ok(out)
}

fn plane_metrics(a: &Volume3D, b: &Volume3D, axis: usize, data_range: f64) -> Result<PlaneMetrics> {
    let sa = slice_stack(a, axis)?;
    let sb = slice_stack(b, axis)?;
    let n = sa.len() as f64;
    let mut p = 0.0;
    let mut s = 0.0;
    let mut r = 0.0;
    for (x, y) in sa.iter().zip(sb.iter()) {
        let m = slice_mse(x, y);
        p += psnr_from_mse(m, data_range);
        r += m.sqrt();
        s += ssim2d(x, y, data_range)?;
    }
    Ok(PlaneMetrics { psnr: p / n, ssim: s / n, rmse: r / n })
}

/// Full evaluation of a reconstruction against ground truth. The data range
/// defaults to the truth's max - min.
pub fn report(recon: &Volume3D, truth: &Volume3D, data_range: Option<f64>) -> Result<MetricsReport> {
    check_same_dims(recon, truth)?;
    let range = match data_range {
        Some(r) => r,
        None => {
            let (lo, hi) = truth.min_max();
            let r = (hi - lo) as f64;
            if r > 0.0 {
                r
            } else {
                1.0
            }
        }
    };
    Ok(MetricsReport {
        data_range: range,
        global: PlaneMetrics {
            psnr: psnr(recon, truth, range)?,
            ssim: ssim(recon, truth, range)?,
            rmse: rmse(recon, truth)?,
        },
        sagittal: plane_metrics(recon, truth, 0, range)?,
        coronal: plane_metrics(recon, truth, 1, range)?,
        transaxial: plane_metrics(recon, truth, 2, range)?,
    })
}

/// Cuboid region of interest in voxel indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub offset: (usize, usize, usize),
    pub size: (usize, usize, usize),
}

impl Roi {
    pub fn full(vol: &Volume3D) -> Self {
        Self { offset: (0, 0, 0), size: vol.dims() }
    }

    fn check(&self, dims: (usize, usize, usize)) -> Result<()> {
        if self.size.0 == 0 || self.size.1 == 0 || self.size.2 == 0 {
            return Err(ReconError::spec("ROI must be non-empty"));
        }
        if self.offset.0 + self.size.0 > dims.0
            || self.offset.1 + self.size.1 > dims.1
            || self.offset.2 + self.size.2 > dims.2
        {
            return Err(ReconError::spec(format!(
                "ROI {:?}+{:?} exceeds volume dims {:?}",
                self.offset, self.size, dims
            )));
        }
        Ok(())
    }
}

/// Noise power spectrum of (recon - truth) over the ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct NpsResult {
    /// rows = ROI y extent, cols = ROI x extent; ensemble mean over the ROI's
    /// transaxial slices of |F(diff)|^2 / pixel count (unitary transform), so
    /// the spectrum sums to the ROI mean squared error and the DC bin equals
    /// the squared per-slice mean error, averaged over slices.
    pub spectrum: Field2D,
    /// Mean spectrum over integer-radius annuli, index = radius in bins.
    pub radial: Vec<f64>,
}

pub fn nps(recon: &Volume3D, truth: &Volume3D, roi: Roi) -> Result<NpsResult> {
    check_same_dims(recon, truth)?;
    roi.check(recon.dims())?;
    let (sx, sy, sz) = roi.size;
    let npix = (sx * sy) as f64;
    let mut spectrum = vec![0.0f64; sx * sy];
    for z in 0..sz {
        let field = ComplexField2D::from_fn(sy, sx, |y, x| {
            let (gx, gy, gz) = (x + roi.offset.0, y + roi.offset.1, z + roi.offset.2);
            Complex64::new((recon.at(gx, gy, gz) - truth.at(gx, gy, gz)) as f64, 0.0)
        });
        let k = fft2_centered_rect(&field);
        for (s, v) in spectrum.iter_mut().zip(k.values()) {
            *s += v.norm_sqr() / npix;
        }
    }
    for s in spectrum.iter_mut() {
        *s /= sz as f64;
    }
    let spectrum = Field2D::new(sy, sx, spectrum)?;
    // radial average around the DC bin at (sy/2, sx/2)
    let (cy, cx) = (sy / 2, sx / 2);
    let r_max = ((cx.max(sx - 1 - cx)).pow(2) as f64 + (cy.max(sy - 1 - cy)).pow(2) as f64)
        .sqrt()
        .round() as usize;
    let mut sums = vec![0.0f64; r_max + 1];
    let mut counts = vec![0usize; r_max + 1];
    for y in 0..sy {
        for x in 0..sx {
            let r = (((x as f64 - cx as f64).powi(2) + (y as f64 - cy as f64).powi(2)).sqrt())
                .round() as usize;
            sums[r] += spectrum.at(y, x);
            counts[r] += 1;
        }
    }
    let radial = sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(NpsResult { spectrum, radial })
}

/// Per-axis L1 divergence between slice-stack histograms and the whole-volume
/// histogram. For each axis, every slice's normalized histogram (shared bin
/// edges over the volume's value range) is compared to the global normalized
/// histogram; the axis score is the mean over slices.
pub fn histogram_similarity(vol: &Volume3D, bins: usize) -> Result<[f64; 3]> {
    if bins < 2 {
        return Err(ReconError::spec("histogram needs at least 2 bins"));
    }
    let (lo, hi) = vol.min_max();
    let (lo, hi) = (lo as f64, hi as f64);
    let width = hi - lo;
    let bin_of = |v: f32| -> usize {
        if width <= 0.0 {
            0
        } else {
            (((v as f64 - lo) / width * bins as f64) as usize).min(bins - 1)
        }
    };
    let normalize = |h: &[f64]| -> Vec<f64> {
        let total: f64 = h.iter().sum();
        h.iter().map(|&c| c / total).collect()
    };
    let mut global = vec![0.0f64; bins];
    for &v in vol.values() {
        global[bin_of(v)] += 1.0;
    }
    let global = normalize(&global);

    let mut out = [0.0f64; 3];
    for axis in 0..3 {
        let slices = slice_stack(vol, axis)?;
        let mut total = 0.0;
        for slice in &slices {
            let mut h = vec![0.0f64; bins];
            for &v in slice.values() {
                h[bin_of(v as f32)] += 1.0;
            }
            let h = normalize(&h);
            total += h.iter().zip(global.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        }
        out[axis] = total / slices.len() as f64;
    }
    Ok(out)
}
