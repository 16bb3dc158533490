//! Sinogram container i/o: TVOL payload with dims (num_views, nu, nv) plus a
//! key = value text sidecar describing the geometry.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ReconError, Result};
use crate::volume::{tvol, Volume3D};

use super::{Geometry, ScanMode, Sinogram};

/// Renders the geometry sidecar text.
pub fn geometry_text(geom: &Geometry) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[geometry]");
    let _ = writeln!(s, "mode = {}", geom.mode.as_str());
    let _ = writeln!(s, "num_views = {}", geom.num_views);
    let _ = writeln!(s, "du = {}", geom.det_pitch.0);
    let _ = writeln!(s, "dv = {}", geom.det_pitch.1);
    let _ = writeln!(s, "d_source = {}", geom.source_to_center);
    let _ = writeln!(s, "d_detector = {}", geom.center_to_detector);
    s
}

/// Parses the sidecar text; detector bin counts come from the TVOL dims.
pub fn parse_geometry_text(text: &str, det_bins: (usize, usize)) -> Result<Geometry> {
    let mut mode = None;
    let mut num_views = None;
    let mut du = None;
    let mut dv = None;
    let mut d_source = 0.0f64;
    let mut d_detector = 0.0f64;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('[') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ReconError::format(format!("sidecar line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| ReconError::format(format!("sidecar line {}: bad number '{v}'", lineno + 1)))
        };
        match key {
            "mode" => mode = Some(ScanMode::parse(value)?),
            "num_views" => {
                num_views = Some(value.parse::<usize>().map_err(|_| {
                    ReconError::format(format!("sidecar line {}: bad view count", lineno + 1))
                })?)
            }
            "du" => du = Some(parse_f64(value)?),
            "dv" => dv = Some(parse_f64(value)?),
            "d_source" => d_source = parse_f64(value)?,
            "d_detector" => d_detector = parse_f64(value)?,
            other => return Err(ReconError::format(format!("sidecar: unknown key '{other}'"))),
        }
    }
    let mode = mode.ok_or_else(|| ReconError::format("sidecar: missing key 'mode'"))?;
    let num_views = num_views.ok_or_else(|| ReconError::format("sidecar: missing key 'num_views'"))?;
    let du = du.ok_or_else(|| ReconError::format("sidecar: missing key 'du'"))?;
    let dv = dv.ok_or_else(|| ReconError::format("sidecar: missing key 'dv'"))?;
    let geom = match mode {
        ScanMode::Parallel3d => Geometry::parallel(num_views, det_bins, (du, dv)),
        ScanMode::Conebeam => Geometry::conebeam(num_views, det_bins, (du, dv), d_source, d_detector),
    };
    geom.validate()?;
    Ok(geom)
}

/// Writes `<path>` (TVOL payload) and `<path>.geom.txt` (sidecar).
pub fn write_sinogram(path: impl AsRef<Path>, sino: &Sinogram) -> Result<()> {
    let path = path.as_ref();
    let geom = &sino.geometry;
    let (nu, nv) = geom.det_bins;
    let views = geom.num_views;
    // container layout: first dim fastest, dims (num_views, nu, nv)
    let mut values = vec![0.0f32; sino.values().len()];
    for view in 0..views {
        for iv in 0..nv {
            for iu in 0..nu {
                values[view + views * (iu + nu * iv)] = sino.at(view, iu, iv);
            }
        }
    }
    let payload = Volume3D::new(
        (views, nu, nv),
        (1.0, geom.det_pitch.0 as f32, geom.det_pitch.1 as f32),
        values,
    )?;
    tvol::write_volume(path, &payload)?;
    std::fs::write(sidecar_path(path), geometry_text(geom))?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".geom.txt");
    std::path::PathBuf::from(os)
}

/// Reads a sinogram written by [`write_sinogram`].
pub fn read_sinogram(path: impl AsRef<Path>) -> Result<Sinogram> {
    let path = path.as_ref();
    let payload = tvol::read_volume(path)?;
    let (views, nu, nv) = payload.dims();
    let text = std::fs::read_to_string(sidecar_path(path))?;
    let geom = parse_geometry_text(&text, (nu, nv))?;
    if geom.num_views != views {
        return Err(ReconError::format(format!(
            "sidecar num_views {} disagrees with payload dims {}",
            geom.num_views, views
        )));
    }
    let mut values = vec![0.0f32; payload.num_voxels()];
    for view in 0..views {
        for iv in 0..nv {
            for iu in 0..nu {
                values[iu + nu * (iv + nv * view)] = payload.at(view, iu, iv);
            }
        }
    }
    Sinogram::new(geom, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn sinogram_file_round_trip() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for geom in [
            Geometry::parallel(5, (7, 3), (0.5, 1.0)),
            Geometry::conebeam(4, (6, 5), (1.0, 1.0), 400.0, 300.0),
        ] {
            let values: Vec<f32> = (0..geom.num_rays()).map(|_| rng.random()).collect();
            let sino = Sinogram::new(geom, values).unwrap();
            let dir = std::env::temp_dir().join("sino_rt_test");
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join("s.tvol");
            write_sinogram(&path, &sino).unwrap();
            let back = read_sinogram(&path).unwrap();
            assert_eq!(back, sino);
        }
    }

    #[test]
    fn sidecar_missing_key_errors() {
        assert!(parse_geometry_text("mode = parallel3d\ndu = 1.0\ndv = 1.0\n", (4, 4)).is_err());
    }
}
