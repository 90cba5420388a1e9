//! Minimal NIfTI-1 volume I/O (.nii / .nii.gz, little-endian).
//!
//! Reads the fields the pipeline needs (dims, datatype, pixdim,
//! scaling) and writes single-file volumes with spacing carried in
//! both pixdim and a diagonal sform. Files without positive voxel
//! spacing are rejected; there is no silent 1 mm default.

use crate::error::Error;
use crate::volume::{DiskDtype, Volume};
use crate::Result;
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use ndarray::{Array3, ShapeBuilder};
use std::io::{Read, Write};
use std::path::Path;

const HDR_SIZE: usize = 348;

fn i16_at(buf: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([buf[off], buf[off + 1]])
}

fn f32_at(buf: &[u8], off: usize) -> f32 {
    f32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let file = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut bytes)?;
    } else {
        let mut file = file;
        file.read_to_end(&mut bytes)?;
    }
    Ok(bytes)
}

/// Load a volume; the through-plane axis is inferred as the strictly
/// largest voxel spacing and left unset when that is ambiguous.
pub fn load_volume(path: &Path) -> Result<Volume> {
    let name = path.display().to_string();
    let bytes = read_all(path)?;
    if bytes.len() < HDR_SIZE {
        return Err(Error::UnsupportedContainer(format!(
            "{name}: shorter than a NIfTI-1 header"
        )));
    }
    let sizeof_hdr = i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if sizeof_hdr != HDR_SIZE as i32 {
        return Err(Error::UnsupportedContainer(format!(
            "{name}: not a little-endian NIfTI-1 file (sizeof_hdr={sizeof_hdr})"
        )));
    }
    let ndim = i16_at(&bytes, 40);
    if !(3..=7).contains(&ndim) {
        return Err(Error::UnsupportedContainer(format!(
            "{name}: expected a 3D volume, dim[0]={ndim}"
        )));
    }
    let mut dims = [1usize; 7];
    for (i, d) in dims.iter_mut().enumerate().take(ndim as usize) {
        let v = i16_at(&bytes, 42 + 2 * i);
        if v < 1 {
            return Err(Error::UnsupportedContainer(format!(
                "{name}: non-positive dim[{}]={v}",
                i + 1
            )));
        }
        *d = v as usize;
    }
    if dims[3..].iter().any(|&d| d != 1) {
        return Err(Error::UnsupportedContainer(format!(
            "{name}: higher-dimensional volumes are not supported"
        )));
    }
    let (nx, ny, nz) = (dims[0], dims[1], dims[2]);

    let mut spacing = [0.0f64; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        *s = f32_at(&bytes, 76 + 4 * (i + 1)) as f64;
    }
    if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::MissingSpacing(name));
    }

    let datatype = i16_at(&bytes, 70);
    let vox_offset = f32_at(&bytes, 108).max(HDR_SIZE as f32) as usize;
    let slope = f32_at(&bytes, 112) as f64;
    let inter = f32_at(&bytes, 116) as f64;
    let (slope, inter) = if slope == 0.0 { (1.0, 0.0) } else { (slope, inter) };

    let n = nx * ny * nz;
    if payloads_short(&bytes, vox_offset, datatype, n) {
        return Err(Error::Malformed {
            path: name,
            reason: "data payload shorter than header dims require".into(),
        });
    }
    let payload = &bytes[vox_offset..];
    let (values, dtype): (Vec<f64>, DiskDtype) = match datatype {
        2 => (payload[..n].iter().map(|&b| b as f64).collect(), DiskDtype::F32),
        4 => (
            payload[..2 * n]
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64)
                .collect(),
            DiskDtype::F32,
        ),
        8 => (
            payload[..4 * n]
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
            DiskDtype::F32,
        ),
        512 => (
            payload[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]) as f64)
                .collect(),
            DiskDtype::F32,
        ),
        16 => (
            payload[..4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
            DiskDtype::F32,
        ),
        64 => (
            payload[..8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            DiskDtype::F64,
        ),
        other => {
            return Err(Error::UnsupportedContainer(format!(
                "{name}: unsupported NIfTI datatype {other}"
            )))
        }
    };
    let values: Vec<f64> = values.into_iter().map(|v| v * slope + inter).collect();
    // NIfTI stores x fastest; build in column-major order.
    let data = Array3::from_shape_vec((nx, ny, nz).f(), values)
        .map_err(|e| Error::InvalidVolume(e.to_string()))?;
    let through = Volume::infer_through_axis(&spacing);
    let mut vol = Volume::new(data, spacing, through)?;
    vol.disk_dtype = dtype;
    Ok(vol)
}

fn payloads_short(bytes: &[u8], off: usize, datatype: i16, n: usize) -> bool {
    let width = match datatype {
        2 => 1,
        4 | 512 => 2,
        8 | 16 => 4,
        64 => 8,
        _ => return true,
    };
    bytes.len() < off + n * width
}

/// Write a single-file NIfTI-1 volume; `.gz` suffix selects gzip.
pub fn save_volume(volume: &Volume, path: &Path) -> Result<()> {
    let [nx, ny, nz] = volume.shape();
    let mut hdr = vec![0u8; HDR_SIZE + 4]; // header + empty extension flag
    hdr[0..4].copy_from_slice(&(HDR_SIZE as i32).to_le_bytes());
    // dim
    hdr[40..42].copy_from_slice(&3i16.to_le_bytes());
    for (i, d) in [nx, ny, nz].iter().enumerate() {
        hdr[42 + 2 * i..44 + 2 * i].copy_from_slice(&(*d as i16).to_le_bytes());
    }
    for i in 3..7 {
        hdr[42 + 2 * i..44 + 2 * i].copy_from_slice(&1i16.to_le_bytes());
    }
    let (datatype, bitpix): (i16, i16) = match volume.disk_dtype {
        DiskDtype::F32 => (16, 32),
        DiskDtype::F64 => (64, 64),
    };
    hdr[70..72].copy_from_slice(&datatype.to_le_bytes());
    hdr[72..74].copy_from_slice(&bitpix.to_le_bytes());
    // pixdim
    hdr[76..80].copy_from_slice(&1f32.to_le_bytes());
    for (i, s) in volume.spacing.iter().enumerate() {
        hdr[80 + 4 * i..84 + 4 * i].copy_from_slice(&(*s as f32).to_le_bytes());
    }
    hdr[108..112].copy_from_slice(&352f32.to_le_bytes()); // vox_offset
    hdr[112..116].copy_from_slice(&1f32.to_le_bytes()); // scl_slope
    hdr[123] = 2; // xyzt_units: mm
    // Diagonal sform carrying the spacing.
    hdr[254..256].copy_from_slice(&1i16.to_le_bytes());
    for (row, s) in volume.spacing.iter().enumerate() {
        let off = 280 + 16 * row + 4 * row;
        hdr[off..off + 4].copy_from_slice(&(*s as f32).to_le_bytes());
    }
    hdr[344..348].copy_from_slice(b"n+1\0");

    let mut body = Vec::with_capacity(nx * ny * nz * 8);
    // x fastest on disk.
    let view = volume.data.view().permuted_axes([2, 1, 0]);
    match volume.disk_dtype {
        DiskDtype::F32 => {
            for &v in view.iter() {
                body.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        DiskDtype::F64 => {
            for &v in view.iter() {
                body.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    let file = std::fs::File::create(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(file, flate2::Compression::default());
        enc.write_all(&hdr)?;
        enc.write_all(&body)?;
        enc.finish()?;
    } else {
        let mut file = file;
        file.write_all(&hdr)?;
        file.write_all(&body)?;
    }
    Ok(())
}

/// Integer label volume loaded from the same container.
#[derive(Debug, Clone)]
pub struct LabelVolume {
    pub data: Array3<i64>,
    pub spacing: [f64; 3],
}

impl LabelVolume {
    pub fn shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    /// Distinct non-background labels present in the volume.
    pub fn label_ids(&self) -> std::collections::BTreeSet<i64> {
        self.data.iter().copied().filter(|&l| l != 0).collect()
    }
}

pub fn load_labels(path: &Path) -> Result<LabelVolume> {
    let vol = load_volume(path)?;
    let data = vol.data.mapv(|v| v.round() as i64);
    Ok(LabelVolume {
        data,
        spacing: vol.spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn round_trip_preserves_data_and_spacing() {
        let data = Array3::from_shape_fn((5, 4, 3), |(i, j, k)| i as f64 + 10.0 * j as f64 + 0.5 * k as f64);
        let vol = Volume::new(data.clone(), [0.5, 0.75, 6.5], Some(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for name in ["v.nii", "v.nii.gz"] {
            let path = dir.path().join(name);
            save_volume(&vol, &path).unwrap();
            let back = load_volume(&path).unwrap();
            assert_eq!(back.data, data);
            assert_eq!(back.spacing, [0.5, 0.75, 6.5]);
            assert_eq!(back.through_axis, Some(2));
        }
    }

    #[test]
    fn f32_disk_dtype_round_trips() {
        let data = Array3::from_shape_fn((3, 3, 3), |(i, j, k)| ((i * 9 + j * 3 + k) as f64) * 0.25);
        let mut vol = Volume::new(data.clone(), [1.0, 1.0, 2.0], None).unwrap();
        vol.disk_dtype = DiskDtype::F32;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.nii");
        save_volume(&vol, &path).unwrap();
        let back = load_volume(&path).unwrap();
        assert_eq!(back.disk_dtype, DiskDtype::F32);
        assert_eq!(back.data, data); // quarters are exact in f32
    }

    #[test]
    fn missing_spacing_is_an_error() {
        let data = Array3::zeros((2, 2, 2));
        let vol = Volume::new(data, [1.0; 3], None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.nii");
        save_volume(&vol, &path).unwrap();
        // Zero out pixdim[1..3].
        let mut bytes = std::fs::read(&path).unwrap();
        for off in (80..92).step_by(4) {
            bytes[off..off + 4].copy_from_slice(&0f32.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_volume(&path), Err(Error::MissingSpacing(_))));
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.nii");
        std::fs::write(&path, b"definitely not a nifti file").unwrap();
        assert!(load_volume(&path).is_err());
    }
}
