//! TVOL v1 volume container.
//!
//! Layout: 8-byte magic `TVOL0001`, three u32 little-endian dims (nx, ny, nz),
//! three f32 little-endian spacings, one u8 channel count (1 = real,
//! 2 = complex), then channel-interleaved f32 little-endian values in
//! row-major order (x fastest). Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{ReconError, Result};

use super::{ComplexVolume3D, Volume3D};

pub const MAGIC: &[u8; 8] = b"TVOL0001";

#[derive(Debug, Clone, PartialEq)]
pub enum TvolData {
    Real(Volume3D),
    Complex(ComplexVolume3D),
}

fn write_header<W: Write>(
    w: &mut W,
    dims: (usize, usize, usize),
    spacing: (f32, f32, f32),
    channels: u8,
) -> Result<()> {
    w.write_all(MAGIC)?;
    for d in [dims.0, dims.1, dims.2] {
        let d = u32::try_from(d).map_err(|_| ReconError::format("dims exceed u32"))?;
        w.write_all(&d.to_le_bytes())?;
    }
    for s in [spacing.0, spacing.1, spacing.2] {
        w.write_all(&s.to_le_bytes())?;
    }
    w.write_all(&[channels])?;
    Ok(())
}

pub fn write_volume(path: impl AsRef<Path>, vol: &Volume3D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, vol.dims(), vol.spacing(), 1)?;
    for v in vol.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_complex_volume(path: impl AsRef<Path>, vol: &ComplexVolume3D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, vol.dims(), vol.spacing(), 2)?;
    for (r, i) in vol.re().iter().zip(vol.im().iter()) {
        w.write_all(&r.to_le_bytes())?;
        w.write_all(&i.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<TvolData> {
    let mut r = BufReader::new(File::open(&path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ReconError::format("not a TVOL v1 file (bad magic)"));
    }
    let mut u32buf = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        r.read_exact(&mut u32buf)?;
        *d = u32::from_le_bytes(u32buf) as usize;
    }
    let mut spacing = [0f32; 3];
    for s in spacing.iter_mut() {
        r.read_exact(&mut u32buf)?;
        *s = f32::from_le_bytes(u32buf);
    }
    let mut ch = [0u8; 1];
    r.read_exact(&mut ch)?;
    let n = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or_else(|| ReconError::format("dims overflow"))?;
    let read_f32s = |r: &mut BufReader<File>, count: usize| -> Result<Vec<f32>> {
        let mut bytes = vec![0u8; count * 4];
        r.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    };
    let dims = (dims[0], dims[1], dims[2]);
    let spacing = (spacing[0], spacing[1], spacing[2]);
    match ch[0] {
        1 => {
            let values = read_f32s(&mut r, n)?;
            Ok(TvolData::Real(Volume3D::new(dims, spacing, values)?))
        }
        2 => {
            let inter = read_f32s(&mut r, 2 * n)?;
            let mut re = Vec::with_capacity(n);
            let mut im = Vec::with_capacity(n);
            for pair in inter.chunks_exact(2) {
                re.push(pair[0]);
                im.push(pair[1]);
            }
            Ok(TvolData::Complex(ComplexVolume3D::new(dims, spacing, re, im)?))
        }
        c => Err(ReconError::format(format!("unsupported channel count {c}"))),
    }
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    match read(path)? {
        TvolData::Real(v) => Ok(v),
        TvolData::Complex(_) => Err(ReconError::format("expected a 1-channel TVOL file")),
    }
}

pub fn read_complex_volume(path: impl AsRef<Path>) -> Result<ComplexVolume3D> {
    match read(path)? {
        TvolData::Complex(v) => Ok(v),
        TvolData::Real(_) => Err(ReconError::format("expected a 2-channel TVOL file")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_magic() {
        let dir = std::env::temp_dir().join("tvol_bad_magic_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.tvol");
        std::fs::write(&path, b"NOTAVOL!rest").unwrap();
        assert!(read(&path).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip_is_bit_exact(nx in 1usize..5, ny in 1usize..5, nz in 1usize..5, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let dims = (nx, ny, nz);
            let v = Volume3D::from_fn(dims, (0.5, 1.0, 2.0), |_, _, _| rng.random::<f32>() * 100.0 - 50.0).unwrap();
            let dir = std::env::temp_dir().join(format!("tvol_rt_{seed}_{nx}{ny}{nz}"));
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join("v.tvol");
            write_volume(&path, &v).unwrap();
            let back = read_volume(&path).unwrap();
            prop_assert_eq!(back, v);

            let c = ComplexVolume3D::new(dims, (1.0, 1.0, 1.0),
                (0..nx*ny*nz).map(|i| i as f32).collect(),
                (0..nx*ny*nz).map(|i| -(i as f32)).collect()).unwrap();
            let cpath = dir.join("c.tvol");
            write_complex_volume(&cpath, &c).unwrap();
            prop_assert_eq!(read_complex_volume(&cpath).unwrap(), c);
            std::fs::remove_dir_all(&dir).ok();
        }
    }
}
