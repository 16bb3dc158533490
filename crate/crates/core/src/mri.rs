//! Fourier measurement model for fast MRI: unitary centered 2D transforms per
//! transaxial slice, 1D readout-line undersampling masks, and the k-space
//! data-consistency operator.
//!
//! Masks act along the second in-plane axis (y): one 0/1 flag per ky line,
//! constant along the frequency-encode (x) direction.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{ReconError, Result};
use crate::volume::ComplexVolume3D;

/// Dense 2D complex field, row-major with the column index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    rows: usize,
    cols: usize,
    values: Vec<Complex64>,
}

impl ComplexField2D {
    pub fn new(rows: usize, cols: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(ReconError::shape(format!(
                "complex field needs {} values for {}x{}, got {}",
                rows * cols,
                rows,
                cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self { rows, cols, values }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.values[r * self.cols + c]
    }

    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

struct Fft2Plan {
    row_fft: Arc<dyn Fft<f64>>,
    col_fft: Arc<dyn Fft<f64>>,
}

fn plan(rows: usize, cols: usize, inverse: bool) -> Fft2Plan {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(cols), planner.plan_fft_inverse(rows))
    } else {
        (planner.plan_fft_forward(cols), planner.plan_fft_forward(rows))
    };
    Fft2Plan { row_fft, col_fft }
}

/// fftshift along both axes (index i -> i + n/2 mod n).
fn shift2(field: &ComplexField2D, back: bool) -> ComplexField2D {
    let (rows, cols) = field.shape();
    let off_r = if back { rows - rows / 2 } else { rows / 2 };
    let off_c = if back { cols - cols / 2 } else { cols / 2 };
    ComplexField2D::from_fn(rows, cols, |r, c| {
        field.at((r + off_r) % rows, (c + off_c) % cols)
    })
}

fn fft2_raw(field: &ComplexField2D, inverse: bool) -> ComplexField2D {
    let (rows, cols) = field.shape();
    let plans = plan(rows, cols, inverse);
    let mut values = field.values.clone();
    for r in 0..rows {
        plans.row_fft.process(&mut values[r * cols..(r + 1) * cols]);
    }
    let mut col_buf = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col_buf[r] = values[r * cols + c];
        }
        plans.col_fft.process(&mut col_buf);
        for r in 0..rows {
            values[r * cols + c] = col_buf[r];
        }
    }
    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    for v in values.iter_mut() {
        *v *= scale;
    }
    ComplexField2D { rows, cols, values }
}

/// Unitary 2D Fourier transform with the DC component at the grid center.
pub fn fft2_centered(slice: &ComplexField2D) -> Result<ComplexField2D> {
    if !slice.is_square() {
        return Err(ReconError::shape("fft2_centered expects a square slice"));
    }
    Ok(shift2(&fft2_raw(&shift2(slice, true), false), false))
}

/// Inverse of [`fft2_centered`].
pub fn ifft2_centered(slice: &ComplexField2D) -> Result<ComplexField2D> {
    if !slice.is_square() {
        return Err(ReconError::shape("ifft2_centered expects a square slice"));
    }
    Ok(shift2(&fft2_raw(&shift2(slice, true), true), false))
}

/// Centered unitary 2D transform without the square restriction; used by the
/// noise-power-spectrum evaluation.
pub(crate) fn fft2_centered_rect(slice: &ComplexField2D) -> ComplexField2D {
    shift2(&fft2_raw(&shift2(slice, true), false), false)
}

/// Undersampling mask specification.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    pub kind: MaskKind,
    pub acceleration: f64,
    /// Fraction of lines in the always-sampled centered ACS band.
    pub acs_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Uniform1d,
    Gaussian1d,
    Full,
}

impl MaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskKind::Uniform1d => "uniform1d",
            MaskKind::Gaussian1d => "gaussian1d",
            MaskKind::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform1d" => Ok(MaskKind::Uniform1d),
            "gaussian1d" => Ok(MaskKind::Gaussian1d),
            "full" => Ok(MaskKind::Full),
            other => Err(ReconError::spec(format!("unknown mask kind '{other}'"))),
        }
    }
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.acceleration < 1.0 {
            return Err(ReconError::spec("mask acceleration must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.acs_fraction) {
            return Err(ReconError::spec("acs_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Binary per-line sampling mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask1D {
    sampled: Vec<bool>,
}

impl Mask1D {
    pub fn full(n_lines: usize) -> Self {
        Self { sampled: vec![true; n_lines] }
    }

    pub fn from_flags(sampled: Vec<bool>) -> Self {
        Self { sampled }
    }

    pub fn len(&self) -> usize {
        self.sampled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sampled.is_empty()
    }

    #[inline]
    pub fn is_sampled(&self, line: usize) -> bool {
        self.sampled[line]
    }

    pub fn num_sampled(&self) -> usize {
        self.sampled.iter().filter(|&&s| s).count()
    }

    pub fn flags(&self) -> &[bool] {
        &self.sampled
    }
}

/// Index range of the centered ACS band: ceil(acs_fraction * n) lines.
pub fn acs_band(acs_fraction: f64, n_lines: usize) -> std::ops::Range<usize> {
    let width = (acs_fraction * n_lines as f64).ceil() as usize;
    let start = (n_lines - width) / 2;
    start..start + width
}

/// Builds the sampling mask for `n_lines` readout lines.
///
/// The ACS band is always fully sampled. Uniform masks add every
/// ceil(acceleration)-th remaining line; Gaussian masks draw remaining lines
/// with center-weighted probability until ceil(n_lines / acceleration) total
/// lines are sampled, deterministically per seed.
pub fn make_mask(spec: &MaskSpec, n_lines: usize) -> Result<Mask1D> {
    spec.validate()?;
    if n_lines < 4 {
        return Err(ReconError::spec("mask needs at least 4 lines"));
    }
    let mut sampled = vec![false; n_lines];
    if spec.kind == MaskKind::Full {
        return Ok(Mask1D::full(n_lines));
    }
    let acs = acs_band(spec.acs_fraction, n_lines);
    for i in acs.clone() {
        sampled[i] = true;
    }
    match spec.kind {
        MaskKind::Full => unreachable!(),
        MaskKind::Uniform1d => {
            let every = spec.acceleration.ceil() as usize;
            let mut k = 0usize;
            for (i, s) in sampled.iter_mut().enumerate() {
                if acs.contains(&i) {
                    continue;
                }
                if k % every == 0 {
                    *s = true;
                }
                k += 1;
            }
        }
        MaskKind::Gaussian1d => {
            let budget = (n_lines as f64 / spec.acceleration).ceil() as usize;
            if budget < acs.len() {
                return Err(ReconError::spec(format!(
                    "line budget {} is smaller than the {}-line ACS band",
                    budget,
                    acs.len()
                )));
            }
            let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
            let center = (n_lines as f64 - 1.0) / 2.0;
            let sigma = n_lines as f64 / 4.0;
            let mut count = acs.len();
            while count < budget {
                let g: f64 = {
                    // Box-Muller keeps the draw sequence explicit and stable
                    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                    let u2: f64 = rng.random();
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                };
                let line = (center + sigma * g).round();
                if line < 0.0 || line >= n_lines as f64 {
                    continue;
                }
                let line = line as usize;
                if !sampled[line] {
                    sampled[line] = true;
                    count += 1;
                }
            }
        }
    }
    Ok(Mask1D { sampled })
}

/// Stack of per-slice k-space measurements sharing one line mask. Values are
/// stored like a volume (x fastest) with (kx, ky) per transaxial slice.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
    values: Vec<Complex64>,
    mask: Mask1D,
}

impl KSpaceData {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f32, f32, f32),
        values: Vec<Complex64>,
        mask: Mask1D,
    ) -> Result<Self> {
        if values.len() != dims.0 * dims.1 * dims.2 {
            return Err(ReconError::shape("k-space values do not match dims"));
        }
        if mask.len() != dims.1 {
            return Err(ReconError::shape(format!(
                "mask has {} lines but the grid has ny = {}",
                mask.len(),
                dims.1
            )));
        }
        if mask.num_sampled() == 0 {
            return Err(ReconError::spec("mask samples no lines"));
        }
        for (i, v) in values.iter().enumerate() {
            let ky = (i / dims.0) % dims.1;
            if !mask.is_sampled(ky) && (v.re != 0.0 || v.im != 0.0) {
                return Err(ReconError::spec(
                    "k-space values must be zero on unsampled lines",
                ));
            }
        }
        Ok(Self { dims, spacing, values, mask })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> (f32, f32, f32) {
        self.spacing
    }

    pub fn mask(&self) -> &Mask1D {
        &self.mask
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// k-space of one transaxial slice as a (ky rows, kx cols) field.
    pub fn slice(&self, z: usize) -> ComplexField2D {
        let (nx, ny, _) = self.dims;
        ComplexField2D::from_fn(ny, nx, |ky, kx| self.values[kx + nx * (ky + ny * z)])
    }
}

/// Converts an image-domain complex volume into per-slice centered k-space.
pub fn fft_volume(img: &ComplexVolume3D) -> Result<Vec<ComplexField2D>> {
    let (nx, ny, nz) = img.dims();
    if nx != ny {
        return Err(ReconError::shape("fft_volume expects square transaxial slices"));
    }
    let mut out = Vec::with_capacity(nz);
    for z in 0..nz {
        let field = ComplexField2D::from_fn(ny, nx, |y, x| {
            let i = x + nx * (y + ny * z);
            Complex64::new(img.re()[i] as f64, img.im()[i] as f64)
        });
        out.push(fft2_centered(&field)?);
    }
    Ok(out)
}

/// Simulates the measurement: per-slice forward transform followed by line
/// masking. The result satisfies the KSpaceData zero-off-mask invariant.
pub fn simulate_kspace(img: &ComplexVolume3D, mask: &Mask1D) -> Result<KSpaceData> {
    let (nx, ny, nz) = img.dims();
    if mask.len() != ny {
        return Err(ReconError::shape("mask length must equal ny"));
    }
    let slices = fft_volume(img)?;
    let mut values = vec![Complex64::new(0.0, 0.0); nx * ny * nz];
    for (z, k) in slices.iter().enumerate() {
        for ky in 0..ny {
            if !mask.is_sampled(ky) {
                continue;
            }
            for kx in 0..nx {
                values[kx + nx * (ky + ny * z)] = k.at(ky, kx);
            }
        }
    }
    KSpaceData::new(img.dims(), img.spacing(), values, mask.clone())
}

/// Applies the line mask to fully sampled k-space: values = mask .* full.
pub fn undersample(full: &KSpaceData, mask: &Mask1D) -> Result<KSpaceData> {
    if mask.len() != full.dims.1 {
        return Err(ReconError::shape("mask length must equal ny"));
    }
    if mask.num_sampled() == 0 {
        return Err(ReconError::spec("mask samples no lines"));
    }
    let (nx, ny, nz) = full.dims;
    let mut values = full.values.clone();
    for z in 0..nz {
        for ky in 0..ny {
            if !mask.is_sampled(ky) {
                for kx in 0..nx {
                    values[kx + nx * (ky + ny * z)] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
    KSpaceData::new(full.dims, full.spacing, values, mask.clone())
}

/// Zero-filled reconstruction of one slice: inverse transform of the masked
/// measurements.
pub fn zero_filled_slice(measured: &ComplexField2D) -> Result<ComplexField2D> {
    ifft2_centered(measured)
}

/// k-space data consistency in residual form:
///   v <- v + gamma1 * ifft2( mask .* (measured - fft2(v)) ).
///
/// At gamma1 = 1 the sampled lines of fft2(output) equal the measurements
/// exactly and the operator is an idempotent projection; for gamma1 in [0, 1]
/// it is non-expansive in l2.
pub fn kspace_dc(
    v: &ComplexField2D,
    measured: &ComplexField2D,
    mask: &Mask1D,
    gamma1: f64,
) -> Result<ComplexField2D> {
    if v.shape() != measured.shape() {
        return Err(ReconError::shape(format!(
            "image {:?} vs measured {:?}",
            v.shape(),
            measured.shape()
        )));
    }
    if mask.len() != v.rows {
        return Err(ReconError::shape("mask length must equal the ky line count"));
    }
    if !(0.0..=1.0).contains(&gamma1) {
        return Err(ReconError::spec(format!("gamma1 must lie in [0, 1], got {gamma1}")));
    }
    let k = fft2_centered(v)?;
    let (rows, cols) = v.shape();
    let resid = ComplexField2D::from_fn(rows, cols, |ky, kx| {
        if mask.is_sampled(ky) {
            measured.at(ky, kx) - k.at(ky, kx)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let corr = ifft2_centered(&resid)?;
    Ok(ComplexField2D::from_fn(rows, cols, |r, c| v.at(r, c) + gamma1 * corr.at(r, c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_field(n: usize, seed: u64) -> ComplexField2D {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        ComplexField2D::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn fft_inverse_pair_and_parseval() {
        let x = random_field(16, 1);
        let k = fft2_centered(&x).unwrap();
        let back = ifft2_centered(&k).unwrap();
        let max_err = x
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-6);
        let rel = (x.norm_l2() - k.norm_l2()).abs() / x.norm_l2();
        assert!(rel <= 1e-6, "Parseval violated: {rel}");
    }

    #[test]
    fn constant_field_concentrates_at_center() {
        let n = 8;
        let c = Complex64::new(0.7, -0.2);
        let x = ComplexField2D::from_fn(n, n, |_, _| c);
        let k = fft2_centered(&x).unwrap();
        for r in 0..n {
            for col in 0..n {
                let v = k.at(r, col);
                if (r, col) == (n / 2, n / 2) {
                    assert!((v - c * n as f64).norm() <= 1e-9, "center {v}");
                } else {
                    assert!(v.norm() <= 1e-9, "({r},{col}) = {v}");
                }
            }
        }
    }

    #[test]
    fn uniform_mask_matches_rule_enumeration() {
        let spec = MaskSpec {
            kind: MaskKind::Uniform1d,
            acceleration: 2.0,
            acs_fraction: 0.15,
            seed: 0,
        };
        let mask = make_mask(&spec, 64).unwrap();
        // oracle: direct enumeration of the stated rule
        let acs = acs_band(0.15, 64);
        assert_eq!(acs.len(), 10);
        let mut expected = 0usize;
        let mut k = 0usize;
        for i in 0..64 {
            if acs.contains(&i) {
                expected += 1;
            } else {
                if k % 2 == 0 {
                    expected += 1;
                }
                k += 1;
            }
        }
        assert_eq!(mask.num_sampled(), expected);
        assert!(acs.clone().all(|i| mask.is_sampled(i)));
    }

    #[test]
    fn gaussian_mask_budget_and_acs() {
        let spec = MaskSpec {
            kind: MaskKind::Gaussian1d,
            acceleration: 15.0,
            acs_fraction: 0.05,
            seed: 7,
        };
        let mask = make_mask(&spec, 240).unwrap();
        assert_eq!(mask.num_sampled(), 16); // ceil(240 / 15)
        assert!(acs_band(0.05, 240).all(|i| mask.is_sampled(i)));
        // deterministic per seed
        assert_eq!(make_mask(&spec, 240).unwrap(), mask);
    }

    #[test]
    fn gaussian_mask_budget_below_acs_errors() {
        let spec = MaskSpec {
            kind: MaskKind::Gaussian1d,
            acceleration: 15.0,
            acs_fraction: 0.15,
            seed: 7,
        };
        assert!(make_mask(&spec, 240).is_err());
    }

    #[test]
    fn full_mask_is_all_ones() {
        let spec = MaskSpec { kind: MaskKind::Full, acceleration: 1.0, acs_fraction: 0.15, seed: 0 };
        let mask = make_mask(&spec, 32).unwrap();
        assert_eq!(mask.num_sampled(), 32);
    }

    #[test]
    fn undersample_masks_lines_and_rejects_empty_mask() {
        let n = 8;
        let full_mask = Mask1D::full(n);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let values: Vec<Complex64> = (0..n * n * 2)
            .map(|_| Complex64::new(rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let full = KSpaceData::new((n, n, 2), (1.0, 1.0, 1.0), values, full_mask.clone()).unwrap();

        // identity under the full mask
        let same = undersample(&full, &full_mask).unwrap();
        assert_eq!(same.values(), full.values());

        // empty mask violates the sampled-ACS invariant
        let empty = Mask1D::from_flags(vec![false; n]);
        assert!(undersample(&full, &empty).is_err());

        // projection is non-expansive in energy
        let half = Mask1D::from_flags((0..n).map(|i| i % 2 == 0).collect());
        let sub = undersample(&full, &half).unwrap();
        let e_full: f64 = full.values().iter().map(|v| v.norm_sqr()).sum();
        let e_sub: f64 = sub.values().iter().map(|v| v.norm_sqr()).sum();
        assert!(e_sub <= e_full);
    }

    #[test]
    fn dc_identity_at_gamma_zero() {
        let v = random_field(8, 5);
        let measured = fft2_centered(&random_field(8, 6)).unwrap();
        let mask = Mask1D::from_flags((0..8).map(|i| i % 2 == 0).collect());
        let out = kspace_dc(&v, &measured, &mask, 0.0).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn dc_idempotent_at_gamma_one() {
        let v = random_field(16, 9);
        let truth = random_field(16, 10);
        let mask = Mask1D::from_flags((0..16).map(|i| i % 3 == 0 || (6..10).contains(&i)).collect());
        let k_truth = fft2_centered(&truth).unwrap();
        let measured = ComplexField2D::from_fn(16, 16, |ky, kx| {
            if mask.is_sampled(ky) { k_truth.at(ky, kx) } else { Complex64::new(0.0, 0.0) }
        });
        let once = kspace_dc(&v, &measured, &mask, 1.0).unwrap();
        let twice = kspace_dc(&once, &measured, &mask, 1.0).unwrap();
        let max_err = once
            .values()
            .iter()
            .zip(twice.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-6, "projection not idempotent: {max_err}");
        // sampled lines match the measurements exactly
        let k_once = fft2_centered(&once).unwrap();
        for ky in 0..16 {
            if mask.is_sampled(ky) {
                for kx in 0..16 {
                    assert!((k_once.at(ky, kx) - measured.at(ky, kx)).norm() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn dc_full_mask_replaces_everything() {
        let v = random_field(8, 20);
        let truth = random_field(8, 21);
        let mask = Mask1D::full(8);
        let measured = fft2_centered(&truth).unwrap();
        let out = kspace_dc(&v, &measured, &mask, 1.0).unwrap();
        let max_err = out
            .values()
            .iter()
            .zip(truth.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-9, "full replacement failed: {max_err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn dc_is_non_expansive(seed in any::<u64>(), gamma_idx in 0usize..4) {
            let gamma = [0.0, 0.25, 0.5, 1.0][gamma_idx];
            let v1 = random_field(8, seed);
            let v2 = random_field(8, seed.wrapping_add(1));
            let truth = random_field(8, seed.wrapping_add(2));
            let mask = Mask1D::from_flags((0..8).map(|i| i % 2 == 0 || i == 3).collect());
            let k = fft2_centered(&truth).unwrap();
            let measured = ComplexField2D::from_fn(8, 8, |ky, kx| {
                if mask.is_sampled(ky) { k.at(ky, kx) } else { Complex64::new(0.0, 0.0) }
            });
            let d1 = kspace_dc(&v1, &measured, &mask, gamma).unwrap();
            let d2 = kspace_dc(&v2, &measured, &mask, gamma).unwrap();
            let before: f64 = v1.values().iter().zip(v2.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let after: f64 = d1.values().iter().zip(d2.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(after <= before * (1.0 + 1e-9), "expanded: {} -> {}", before, after);
        }

        #[test]
        fn mask_always_contains_acs(n in 16usize..64, accel in 1.0f64..4.0, seed in any::<u64>()) {
            let spec = MaskSpec { kind: MaskKind::Uniform1d, acceleration: accel, acs_fraction: 0.15, seed };
            let mask = make_mask(&spec, n).unwrap();
            prop_assert!(acs_band(0.15, n).all(|i| mask.is_sampled(i)));
        }
    }
}
