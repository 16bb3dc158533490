//! Core 3D field types, phantom generators, axis slicing and cube padding.
//!
//! Voxel layout is row-major with x fastest: index = x + nx*(y + ny*z).
//! Axis conventions used throughout the toolkit:
//! axis 0 = x (sagittal, y-z slices), axis 1 = y (coronal, x-z slices),
//! axis 2 = z (transaxial, x-y slices).

mod phantom;
pub mod tvol;

pub use phantom::{make_phantom, PhantomKind, PhantomSpec};

use crate::error::{ReconError, Result};

/// Real scalar field on a regular 3D grid. Values are immutable after
/// construction; every operation returns a new volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
    values: Vec<f32>,
}

impl Volume3D {
    pub fn new(dims: (usize, usize, usize), spacing: (f32, f32, f32), values: Vec<f32>) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(ReconError::spec("volume dims must be positive"));
        }
        if values.len() != n {
            return Err(ReconError::shape(format!(
                "volume needs {} values for dims {:?}, got {}",
                n,
                dims,
                values.len()
            )));
        }
        if !(spacing.0 > 0.0 && spacing.1 > 0.0 && spacing.2 > 0.0) {
            return Err(ReconError::spec("voxel spacing must be strictly positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ReconError::spec("volume values must be finite"));
        }
        Ok(Self { dims, spacing, values })
    }

    pub fn zeros(dims: (usize, usize, usize), spacing: (f32, f32, f32)) -> Result<Self> {
        Self::new(dims, spacing, vec![0.0; dims.0 * dims.1 * dims.2])
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel index.
    pub fn from_fn(
        dims: (usize, usize, usize),
        spacing: (f32, f32, f32),
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let (nx, ny, nz) = dims;
        let mut values = Vec::with_capacity(nx * ny * nz);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    values.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, spacing, values)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> (f32, f32, f32) {
        self.spacing
    }

    pub fn num_voxels(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_cubic(&self) -> bool {
        self.dims.0 == self.dims.1 && self.dims.1 == self.dims.2
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.values[self.index(x, y, z)]
    }

    /// Pointwise map into a new volume.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(self.dims, self.spacing, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two volumes of identical dims.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f32, f32) -> f32) -> Result<Self> {
        if self.dims != other.dims {
            return Err(ReconError::shape(format!(
                "zip_map dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.dims, self.spacing, values)
    }

    /// Convex combination `(1-w)*self + w*other`.
    pub fn blend(&self, other: &Self, w: f64) -> Result<Self> {
        self.zip_map(other, |a, b| ((1.0 - w) * a as f64 + w * b as f64) as f32)
    }

    pub fn min_max(&self) -> (f32, f32) {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Two-channel complex field on a regular 3D grid, stored as separate
/// real/imaginary planes with the same layout as [`Volume3D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVolume3D {
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
    re: Vec<f32>,
    im: Vec<f32>,
}

impl ComplexVolume3D {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f32, f32, f32),
        re: Vec<f32>,
        im: Vec<f32>,
    ) -> Result<Self> {
        let real = Volume3D::new(dims, spacing, re)?;
        if im.len() != real.values.len() {
            return Err(ReconError::shape("complex volume channels differ in length"));
        }
        if im.iter().any(|v| !v.is_finite()) {
            return Err(ReconError::spec("volume values must be finite"));
        }
        Ok(Self { dims, spacing, re: real.values, im })
    }

    pub fn zeros(dims: (usize, usize, usize), spacing: (f32, f32, f32)) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        Self::new(dims, spacing, vec![0.0; n], vec![0.0; n])
    }

    pub fn from_parts(re: &Volume3D, im: &Volume3D) -> Result<Self> {
        if re.dims != im.dims {
            return Err(ReconError::shape("real/imaginary dims differ"));
        }
        Self::new(re.dims, re.spacing, re.values.clone(), im.values.clone())
    }

    pub fn from_real(re: &Volume3D) -> Self {
        Self {
            dims: re.dims,
            spacing: re.spacing,
            re: re.values.clone(),
            im: vec![0.0; re.values.len()],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> (f32, f32, f32) {
        self.spacing
    }

    pub fn re(&self) -> &[f32] {
        &self.re
    }

    pub fn im(&self) -> &[f32] {
        &self.im
    }

    pub fn real_volume(&self) -> Volume3D {
        Volume3D { dims: self.dims, spacing: self.spacing, values: self.re.clone() }
    }

    pub fn imag_volume(&self) -> Volume3D {
        Volume3D { dims: self.dims, spacing: self.spacing, values: self.im.clone() }
    }

    /// Per-voxel modulus as a real volume.
    pub fn magnitude_volume(&self) -> Volume3D {
        let values = self
            .re
            .iter()
            .zip(self.im.iter())
            .map(|(&r, &i)| ((r as f64).hypot(i as f64)) as f32)
            .collect();
        Volume3D { dims: self.dims, spacing: self.spacing, values }
    }
}

/// Dense 2D field with f64 values, row-major with the column index fastest.
/// Slices extracted from an f32 volume restack bit-exactly because f64
/// represents every f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Field2D {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(ReconError::shape(format!(
                "field needs {} values for {}x{}, got {}",
                rows * cols,
                rows,
                cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
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

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Remaining axes, in increasing order, for a slicing axis.
fn in_plane_axes(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        2 => (0, 1),
        _ => unreachable!(),
    }
}

fn dim(dims: (usize, usize, usize), axis: usize) -> usize {
    match axis {
        0 => dims.0,
        1 => dims.1,
        2 => dims.2,
        _ => unreachable!(),
    }
}

/// Extracts the ordered stack of 2D slices perpendicular to `axis`.
///
/// Slice k holds the voxels with coordinate k along `axis`; in-plane, the
/// lower remaining axis indexes rows and the higher one indexes columns, so
/// axis 0 yields ny x nz slices, axis 1 nx x nz, axis 2 nx x ny.
pub fn slice_stack(vol: &Volume3D, axis: usize) -> Result<Vec<Field2D>> {
    if axis > 2 {
        return Err(ReconError::spec(format!("slice axis must be 0, 1 or 2, got {axis}")));
    }
    let dims = vol.dims();
    let (pa, qa) = in_plane_axes(axis);
    let (np, nq) = (dim(dims, pa), dim(dims, qa));
    let mut out = Vec::with_capacity(dim(dims, axis));
    for k in 0..dim(dims, axis) {
        let mut values = Vec::with_capacity(np * nq);
        for ip in 0..np {
            for iq in 0..nq {
                let mut c = [0usize; 3];
                c[axis] = k;
                c[pa] = ip;
                c[qa] = iq;
                values.push(vol.at(c[0], c[1], c[2]) as f64);
            }
        }
        out.push(Field2D { rows: np, cols: nq, values });
    }
    Ok(out)
}

/// Exact inverse of [`slice_stack`] along the same axis.
pub fn restack(slices: &[Field2D], axis: usize, spacing: (f32, f32, f32)) -> Result<Volume3D> {
    if axis > 2 {
        return Err(ReconError::spec(format!("slice axis must be 0, 1 or 2, got {axis}")));
    }
    let first = slices
        .first()
        .ok_or_else(|| ReconError::shape("restack needs a nonempty slice list"))?;
    let (np, nq) = first.shape();
    if let Some(bad) = slices.iter().find(|s| s.shape() != (np, nq)) {
        return Err(ReconError::shape(format!(
            "inconsistent slice shapes: {:?} vs {:?}",
            (np, nq),
            bad.shape()
        )));
    }
    let (pa, qa) = in_plane_axes(axis);
    let mut dims = [0usize; 3];
    dims[axis] = slices.len();
    dims[pa] = np;
    dims[qa] = nq;
    let dims = (dims[0], dims[1], dims[2]);
    let mut values = vec![0.0f32; dims.0 * dims.1 * dims.2];
    for (k, slice) in slices.iter().enumerate() {
        for ip in 0..np {
            for iq in 0..nq {
                let mut c = [0usize; 3];
                c[axis] = k;
                c[pa] = ip;
                c[qa] = iq;
                values[c[0] + dims.0 * (c[1] + dims.1 * c[2])] = slice.at(ip, iq) as f32;
            }
        }
    }
    Volume3D::new(dims, spacing, values)
}

/// Zero-alike padding to a cube of edge max(nx, ny, nz), content centered
/// with floor-biased offsets on odd differences, new voxels set to `fill`.
pub fn pad_to_cube(vol: &Volume3D, fill: f32) -> Result<Volume3D> {
    let (nx, ny, nz) = vol.dims();
    let n = nx.max(ny).max(nz);
    if (nx, ny, nz) == (n, n, n) {
        return Ok(vol.clone());
    }
    let off = ((n - nx) / 2, (n - ny) / 2, (n - nz) / 2);
    let mut out = vec![fill; n * n * n];
    for z in 0..nz {
        for y in 0..ny {
            let dst = (off.0) + n * ((y + off.1) + n * (z + off.2));
            let src = vol.index(0, y, z);
            out[dst..dst + nx].copy_from_slice(&vol.values()[src..src + nx]);
        }
    }
    Volume3D::new((n, n, n), vol.spacing(), out)
}

/// Extracts the centered region of the given dims; inverse of [`pad_to_cube`]
/// on the original region.
pub fn crop_center(vol: &Volume3D, dims: (usize, usize, usize)) -> Result<Volume3D> {
    let (nx, ny, nz) = vol.dims();
    if dims.0 > nx || dims.1 > ny || dims.2 > nz {
        return Err(ReconError::shape(format!(
            "crop dims {:?} exceed volume dims {:?}",
            dims,
            vol.dims()
        )));
    }
    let off = ((nx - dims.0) / 2, (ny - dims.1) / 2, (nz - dims.2) / 2);
    let mut out = Vec::with_capacity(dims.0 * dims.1 * dims.2);
    for z in 0..dims.2 {
        for y in 0..dims.1 {
            let src = vol.index(off.0, y + off.1, z + off.2);
            out.extend_from_slice(&vol.values()[src..src + dims.0]);
        }
    }
    Volume3D::new(dims, vol.spacing(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_dims() -> impl Strategy<Value = (usize, usize, usize)> {
        (1usize..6, 1usize..6, 1usize..6)
    }

    #[test]
    fn slice_shapes_match_dims() {
        let v = Volume3D::from_fn((2, 3, 4), (1.0, 1.0, 1.0), |x, y, z| (x + 10 * y + 100 * z) as f32)
            .unwrap();
        let s0 = slice_stack(&v, 0).unwrap();
        assert_eq!(s0.len(), 2);
        assert_eq!(s0[0].shape(), (3, 4));
        let s2 = slice_stack(&v, 2).unwrap();
        assert_eq!(s2.len(), 4);
        assert_eq!(s2[0].shape(), (2, 3));
        // spot-check a voxel: slice k=1 along axis 2, row x=1, col y=2
        assert_eq!(s2[1].at(1, 2), (1 + 20 + 100) as f64);
    }

    #[test]
    fn restack_singleton() {
        let s = Field2D::new(1, 1, vec![7.0]).unwrap();
        let v = restack(&[s], 0, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(v.dims(), (1, 1, 1));
        assert_eq!(v.values(), &[7.0]);
    }

    #[test]
    fn restack_rejects_mismatched_shapes() {
        let a = Field2D::zeros(3, 4);
        let b = Field2D::zeros(3, 5);
        assert!(restack(&[a, b], 1, (1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn bad_axis_rejected() {
        let v = Volume3D::zeros((2, 2, 2), (1.0, 1.0, 1.0)).unwrap();
        assert!(slice_stack(&v, 3).is_err());
    }

    #[test]
    fn constructor_rejects_nan_and_bad_spacing() {
        assert!(Volume3D::new((1, 1, 1), (1.0, 1.0, 1.0), vec![f32::NAN]).is_err());
        assert!(Volume3D::new((1, 1, 1), (0.0, 1.0, 1.0), vec![1.0]).is_err());
        assert!(Volume3D::new((2, 1, 1), (1.0, 1.0, 1.0), vec![1.0]).is_err());
    }

    #[test]
    fn pad_examples() {
        // (1,1,2) fill 7 -> (2,2,2) with six voxels equal to 7
        let v = Volume3D::new((1, 1, 2), (1.0, 1.0, 1.0), vec![1.0, 2.0]).unwrap();
        let p = pad_to_cube(&v, 7.0).unwrap();
        assert_eq!(p.dims(), (2, 2, 2));
        let sevens = p.values().iter().filter(|&&v| v == 7.0).count();
        assert_eq!(sevens, 6);
        assert_eq!(crop_center(&p, (1, 1, 2)).unwrap(), v);

        // already cubic -> identity
        let c = Volume3D::from_fn((3, 3, 3), (1.0, 1.0, 1.0), |x, _, _| x as f32).unwrap();
        assert_eq!(pad_to_cube(&c, 0.0).unwrap(), c);
    }

    #[test]
    fn pad_matches_brain_volume_shape() {
        let v = Volume3D::zeros((31, 48, 48), (1.0, 1.0, 1.0)).unwrap();
        let p = pad_to_cube(&v, 0.0).unwrap();
        assert_eq!(p.dims(), (48, 48, 48));
    }

    proptest! {
        #[test]
        fn restack_inverts_slice_stack(dims in arb_dims(), axis in 0usize..3, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let v = Volume3D::from_fn(dims, (1.0, 0.5, 2.0), |_, _, _| rng.random::<f32>()).unwrap();
            let slices = slice_stack(&v, axis).unwrap();
            let back = restack(&slices, axis, v.spacing()).unwrap();
            prop_assert_eq!(back, v);
        }

        #[test]
        fn pad_then_crop_is_identity(dims in arb_dims(), fill in -2.0f32..2.0) {
            let v = Volume3D::from_fn(dims, (1.0, 1.0, 1.0), |x, y, z| (x * 7 + y * 3 + z) as f32).unwrap();
            let p = pad_to_cube(&v, fill).unwrap();
            let edge = dims.0.max(dims.1).max(dims.2);
            prop_assert_eq!(p.dims(), (edge, edge, edge));
            prop_assert_eq!(crop_center(&p, dims).unwrap(), v);
        }
    }
}
