//! ATRK: a minimal binary container for one dense tensor, trivially writable
//! from any inference exporter.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic   4 bytes  "ATRK"
//! version u16      1
//! kind    u8       1 = heatmap, 2 = size map, 3 = displacement field
//! reserved u8      0
//! rows    u32      H/R
//! cols    u32      W/R
//! channels u32     C for heatmaps, 2 otherwise
//! R       u32      down-sampling factor
//! payload rows * cols * channels f32, row-major (row, col, channel)
//! ```

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::tensor::{DisplacementField, Heatmap, SizeMap};

pub const ATRK_MAGIC: [u8; 4] = *b"ATRK";
pub const ATRK_VERSION: u16 = 1;

const HEADER_LEN: usize = 24;

/// Tensor kind tag stored in the file header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    Heatmap = 1,
    Size = 2,
    Displacement = 3,
}

impl TensorKind {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Self::Heatmap),
            2 => Ok(Self::Size),
            3 => Ok(Self::Displacement),
            found => Err(Error::BadKind { found }),
        }
    }
}

/// A tensor read from or destined for an ATRK file.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    Heatmap(Heatmap),
    Size(SizeMap),
    Displacement(DisplacementField),
}

impl TensorData {
    pub fn kind(&self) -> TensorKind {
        match self {
            Self::Heatmap(_) => TensorKind::Heatmap,
            Self::Size(_) => TensorKind::Size,
            Self::Displacement(_) => TensorKind::Displacement,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        match self {
            Self::Heatmap(t) => t.grid(),
            Self::Size(t) => t.grid(),
            Self::Displacement(t) => t.grid(),
        }
    }

    fn values(&self) -> &[f32] {
        match self {
            Self::Heatmap(t) => t.values(),
            Self::Size(t) => t.values(),
            Self::Displacement(t) => t.values(),
        }
    }

    fn channels(&self) -> u32 {
        match self {
            Self::Heatmap(t) => t.grid().classes(),
            _ => 2,
        }
    }
}

/// Serializes a tensor to ATRK bytes.
pub fn write_tensor_file(tensor: &TensorData) -> Vec<u8> {
    let grid = tensor.grid();
    let values = tensor.values();
    let mut out = Vec::with_capacity(HEADER_LEN + values.len() * 4);
    out.extend_from_slice(&ATRK_MAGIC);
    out.write_u16::<LittleEndian>(ATRK_VERSION).unwrap();
    out.push(tensor.kind() as u8);
    out.push(0); // reserved
    out.write_u32::<LittleEndian>(grid.rows() as u32).unwrap();
    out.write_u32::<LittleEndian>(grid.cols() as u32).unwrap();
    out.write_u32::<LittleEndian>(tensor.channels()).unwrap();
    out.write_u32::<LittleEndian>(grid.downsample()).unwrap();
    for &v in values {
        out.write_f32::<LittleEndian>(v).unwrap();
    }
    out
}

/// Deserializes ATRK bytes, validating magic, version, kind, declared shape
/// and payload values.
pub fn read_tensor_file(bytes: &[u8]) -> Result<TensorData> {
    if bytes.len() < 4 || bytes[..4] != ATRK_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let mut header = &bytes[4..HEADER_LEN];
    let version = header.read_u16::<LittleEndian>().unwrap();
    if version != ATRK_VERSION {
        return Err(Error::UnsupportedVersion { found: version });
    }
    let kind = TensorKind::from_u8(header.read_u8().unwrap())?;
    let _reserved = header.read_u8().unwrap();
    let rows = header.read_u32::<LittleEndian>().unwrap();
    let cols = header.read_u32::<LittleEndian>().unwrap();
    let channels = header.read_u32::<LittleEndian>().unwrap();
    let downsample = header.read_u32::<LittleEndian>().unwrap();

    if rows == 0 || cols == 0 || channels == 0 || downsample == 0 {
        return Err(Error::InvalidHeader(format!(
            "zero dimension in {rows}x{cols}x{channels}, R={downsample}"
        )));
    }
    match kind {
        TensorKind::Heatmap => {}
        TensorKind::Size | TensorKind::Displacement => {
            if channels != 2 {
                return Err(Error::InvalidHeader(format!(
                    "{kind:?} tensor must have 2 channels, header says {channels}"
                )));
            }
        }
    }

    let count = (rows as usize)
        .checked_mul(cols as usize)
        .and_then(|n| n.checked_mul(channels as usize))
        .ok_or_else(|| Error::InvalidHeader("shape overflows".into()))?;
    let expected = HEADER_LEN + count * 4;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }

    let mut values = Vec::with_capacity(count);
    let mut payload = &bytes[HEADER_LEN..];
    for i in 0..count {
        let v = payload.read_f32::<LittleEndian>().unwrap();
        if !v.is_finite() {
            return Err(Error::NonFinitePayload { index: i });
        }
        values.push(v);
    }

    let width_px = cols
        .checked_mul(downsample)
        .ok_or_else(|| Error::InvalidHeader("image width overflows".into()))?;
    let height_px = rows
        .checked_mul(downsample)
        .ok_or_else(|| Error::InvalidHeader("image height overflows".into()))?;

    match kind {
        TensorKind::Heatmap => {
            let grid = GridSpec::new(width_px, height_px, downsample, channels)?;
            Ok(TensorData::Heatmap(Heatmap::new(grid, values)?))
        }
        TensorKind::Size => {
            let grid = GridSpec::single_class(width_px, height_px, downsample)?;
            Ok(TensorData::Size(SizeMap::new(grid, values)?))
        }
        TensorKind::Displacement => {
            let grid = GridSpec::single_class(width_px, height_px, downsample)?;
            Ok(TensorData::Displacement(DisplacementField::new(
                grid, values,
            )?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::single_class(32, 16, 4).unwrap()
    }

    #[test]
    fn empty_input_is_bad_magic() {
        assert!(matches!(read_tensor_file(&[]), Err(Error::BadMagic)));
        assert!(matches!(read_tensor_file(b"NOPE"), Err(Error::BadMagic)));
    }

    #[test]
    fn version_mismatch_detected() {
        let mut bytes = write_tensor_file(&TensorData::Heatmap(Heatmap::zeros(grid())));
        bytes[4] = 9;
        assert!(matches!(
            read_tensor_file(&bytes),
            Err(Error::UnsupportedVersion { found: 9 })
        ));
    }

    #[test]
    fn unknown_kind_detected() {
        let mut bytes = write_tensor_file(&TensorData::Heatmap(Heatmap::zeros(grid())));
        bytes[6] = 7;
        assert!(matches!(
            read_tensor_file(&bytes),
            Err(Error::BadKind { found: 7 })
        ));
    }

    #[test]
    fn short_payload_is_truncation() {
        let bytes = write_tensor_file(&TensorData::Heatmap(Heatmap::zeros(grid())));
        let cut = &bytes[..bytes.len() - 8];
        assert!(matches!(
            read_tensor_file(cut),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = write_tensor_file(&TensorData::Heatmap(Heatmap::zeros(grid())));
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(
            read_tensor_file(&bytes),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn nan_payload_detected() {
        let mut bytes = write_tensor_file(&TensorData::Displacement(DisplacementField::zeros(
            grid(),
        )));
        let nan = f32::NAN.to_le_bytes();
        bytes[HEADER_LEN + 8..HEADER_LEN + 12].copy_from_slice(&nan);
        assert!(matches!(
            read_tensor_file(&bytes),
            Err(Error::NonFinitePayload { index: 2 })
        ));
    }

    #[test]
    fn heatmap_value_range_still_enforced() {
        let mut bytes = write_tensor_file(&TensorData::Heatmap(Heatmap::zeros(grid())));
        let big = 2.0f32.to_le_bytes();
        bytes[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&big);
        assert!(matches!(
            read_tensor_file(&bytes),
            Err(Error::ValueOutOfRange(_))
        ));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            kind in 1u8..=3,
            cols in 1usize..12,
            rows in 1usize..12,
            r in 1u32..5,
            seed in 0u64..10_000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = GridSpec::single_class(cols as u32 * r, rows as u32 * r, r).unwrap();
            let n = g.cell_count();
            let tensor = match kind {
                1 => TensorData::Heatmap(Heatmap::new(
                    g,
                    (0..n).map(|_| rng.gen_range(0.0f32..=1.0)).collect(),
                ).unwrap()),
                2 => TensorData::Size(SizeMap::new(
                    g,
                    (0..n * 2).map(|_| rng.gen_range(0.0f32..100.0)).collect(),
                ).unwrap()),
                _ => TensorData::Displacement(DisplacementField::new(
                    g,
                    (0..n * 2).map(|_| rng.gen_range(-50.0f32..50.0)).collect(),
                ).unwrap()),
            };
            let bytes = write_tensor_file(&tensor);
            let back = read_tensor_file(&bytes).unwrap();
            prop_assert_eq!(&back, &tensor);
            // And the re-written bytes are identical.
            prop_assert_eq!(write_tensor_file(&back), bytes);
        }
    }
}
