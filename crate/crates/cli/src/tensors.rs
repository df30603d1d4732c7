//! Loading per-frame ATRK triplets from a directory.
//!
//! Frames are named `frame_%06d.{hm,sz,dp}.atrk` and must form a contiguous
//! 0-based sequence; each triplet must agree on grid geometry.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use apextrack::dataset::{read_tensor_file, TensorData};
use apextrack::eval::FrameTensors;

pub struct LoadedFrames {
    pub frames: Vec<FrameTensors>,
    pub paths: Vec<PathBuf>,
}

pub fn frame_paths(dir: &Path, frame: u64) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("frame_{frame:06}.hm.atrk")),
        dir.join(format!("frame_{frame:06}.sz.atrk")),
        dir.join(format!("frame_{frame:06}.dp.atrk")),
    )
}

fn read_tensor(path: &Path) -> Result<TensorData> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_tensor_file(&bytes).with_context(|| format!("decoding {}", path.display()))
}

/// Loads every triplet in `dir`. Fails on an empty directory, a gap in the
/// frame numbering, a missing triplet member or mismatched grids.
pub fn load_tensor_dir(dir: &Path) -> Result<LoadedFrames> {
    let mut frame_ids: Vec<u64> = Vec::new();
    for entry in
        fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?
    {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name
            .strip_prefix("frame_")
            .and_then(|s| s.strip_suffix(".hm.atrk"))
        {
            let id: u64 = stem
                .parse()
                .map_err(|_| anyhow!("bad frame number in {name}"))?;
            frame_ids.push(id);
        }
    }
    frame_ids.sort_unstable();
    if frame_ids.is_empty() {
        bail!("no frames: {} contains no frame_*.hm.atrk files", dir.display());
    }
    for (expected, &got) in frame_ids.iter().enumerate() {
        if expected as u64 != got {
            bail!("frame_{:06} is missing from {}", expected, dir.display());
        }
    }

    let mut frames = Vec::with_capacity(frame_ids.len());
    let mut paths = Vec::with_capacity(frame_ids.len() * 3);
    for &frame in &frame_ids {
        let (hm_path, sz_path, dp_path) = frame_paths(dir, frame);
        for p in [&hm_path, &sz_path, &dp_path] {
            if !p.exists() {
                bail!("frame_{frame:06}: missing {}", p.display());
            }
        }
        let TensorData::Heatmap(heatmap) = read_tensor(&hm_path)? else {
            bail!("frame_{frame:06}: {} is not a heatmap", hm_path.display());
        };
        let TensorData::Size(sizes) = read_tensor(&sz_path)? else {
            bail!("frame_{frame:06}: {} is not a size map", sz_path.display());
        };
        let TensorData::Displacement(displacement) = read_tensor(&dp_path)? else {
            bail!(
                "frame_{frame:06}: {} is not a displacement field",
                dp_path.display()
            );
        };
        let tensors = FrameTensors::new(heatmap, sizes, displacement)
            .with_context(|| format!("frame_{frame:06}: triplet grids disagree"))?;
        if let Some(first) = frames.first() {
            let f: &FrameTensors = first;
            if !f.heatmap().grid().same_geometry(tensors.heatmap().grid()) {
                bail!("frame_{frame:06}: grid differs from frame_000000");
            }
        }
        frames.push(tensors);
        paths.extend([hm_path, sz_path, dp_path]);
    }
    Ok(LoadedFrames { frames, paths })
}
