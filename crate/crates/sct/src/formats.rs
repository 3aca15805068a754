//! Binary artifacts: one JSON header line, a newline, then little-endian
//! `f32` values.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sct_core::math::Vec3;
use sct_core::nn::{Group, ParamStore};
use sct_core::probct::{PosteriorGrid, PosteriorSpec, ProbCt, ProbCtConfig};
use sct_core::scene::{CameraRig, ExtinctionField, ImageSet, ImageUnits, VoxelGrid};

use crate::error::{format_err, io_err, Result};

const DTYPE: &str = "f32le";

fn encode<H: Serialize>(header: &H, values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    let mut out = serde_json::to_vec(header).expect("headers serialize");
    out.push(b'\n');
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn decode<H: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<(H, Vec<f64>)> {
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| format_err(path, "missing header line"))?;
    let header: H = serde_json::from_slice(&bytes[..nl]).map_err(|e| format_err(path, format!("bad header: {e}")))?;
    let payload = &bytes[nl + 1..];
    if payload.len() % 4 != 0 {
        return Err(format_err(path, "payload is not a whole number of f32 values"));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((header, values))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}

fn check_magic(path: &Path, got: &str, want: &str, dtype: &str) -> Result<()> {
    if got != want {
        return Err(format_err(path, format!("expected a {want} file, found magic {got:?}")));
    }
    if dtype != DTYPE {
        return Err(format_err(path, format!("unsupported dtype {dtype:?}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VxgHeader {
    magic: String,
    nx: usize,
    ny: usize,
    nz: usize,
    dx: f64,
    dy: f64,
    dz: f64,
    origin: [f64; 3],
    dtype: String,
}

impl VxgHeader {
    fn of(g: &VoxelGrid) -> Self {
        VxgHeader {
            magic: "VXG1".into(),
            nx: g.nx,
            ny: g.ny,
            nz: g.nz,
            dx: g.dx,
            dy: g.dy,
            dz: g.dz,
            origin: g.origin.to_array(),
            dtype: DTYPE.into(),
        }
    }

    fn grid(&self, path: &Path) -> Result<VoxelGrid> {
        check_magic(path, &self.magic, "VXG1", &self.dtype)?;
        Ok(VoxelGrid::new(
            [self.nx, self.ny, self.nz],
            [self.dx, self.dy, self.dz],
            Vec3::from(self.origin),
        )?)
    }
}

/// Scalar volume on a grid, x-fastest.
pub fn write_volume(path: &Path, grid: &VoxelGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(format_err(path, "volume does not match its grid"));
    }
    write_bytes(path, &encode(&VxgHeader::of(grid), values.iter().copied()))
}

pub fn read_volume(path: &Path) -> Result<(VoxelGrid, Vec<f64>)> {
    let (h, v): (VxgHeader, _) = decode(path, &read_bytes(path)?)?;
    let grid = h.grid(path)?;
    if v.len() != grid.len() {
        return Err(format_err(path, format!("{} values for {} voxels", v.len(), grid.len())));
    }
    Ok((grid, v))
}

pub fn write_field(path: &Path, f: &ExtinctionField) -> Result<()> {
    write_volume(path, &f.grid, &f.beta)
}

pub fn read_field(path: &Path) -> Result<ExtinctionField> {
    let (g, v) = read_volume(path)?;
    Ok(ExtinctionField::new(g, v)?)
}

/// Boolean mask stored as a 0/1 volume.
pub fn write_mask(path: &Path, grid: &VoxelGrid, mask: &[bool]) -> Result<()> {
    let v: Vec<f64> = mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect();
    write_volume(path, grid, &v)
}

pub fn read_mask(path: &Path) -> Result<(VoxelGrid, Vec<bool>)> {
    let (g, v) = read_volume(path)?;
    Ok((g, v.into_iter().map(|x| x > 0.5).collect()))
}

pub fn write_rig(path: &Path, rig: &CameraRig) -> Result<()> {
    let mut s = serde_json::to_vec_pretty(rig).expect("rig serializes");
    s.push(b'\n');
    write_bytes(path, &s)
}

pub fn read_rig(path: &Path) -> Result<CameraRig> {
    let rig: CameraRig =
        serde_json::from_slice(&read_bytes(path)?).map_err(|e| format_err(path, format!("bad rig: {e}")))?;
    rig.validate()?;
    Ok(rig)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImsetHeader {
    magic: String,
    units: ImageUnits,
    widths: Vec<usize>,
    heights: Vec<usize>,
    electrons_per_radiance: Option<f64>,
    dtype: String,
}

/// Images of every camera, one row-major block per camera.
pub fn write_images(path: &Path, im: &ImageSet) -> Result<()> {
    let h = ImsetHeader {
        magic: "IMS1".into(),
        units: im.units,
        widths: im.widths.clone(),
        heights: im.heights.clone(),
        electrons_per_radiance: im.electrons_per_radiance,
        dtype: DTYPE.into(),
    };
    write_bytes(path, &encode(&h, im.data.iter().flatten().copied()))
}

pub fn read_images(path: &Path) -> Result<ImageSet> {
    let (h, v): (ImsetHeader, _) = decode(path, &read_bytes(path)?)?;
    check_magic(path, &h.magic, "IMS1", &h.dtype)?;
    let sizes: Vec<usize> = h.widths.iter().zip(&h.heights).map(|(w, h)| w * h).collect();
    if sizes.iter().sum::<usize>() != v.len() || h.widths.len() != h.heights.len() {
        return Err(format_err(path, "payload does not match the image sizes"));
    }
    let mut data = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for n in sizes {
        data.push(v[at..at + n].to_vec());
        at += n;
    }
    Ok(ImageSet::new(h.units, h.widths, h.heights, data, h.electrons_per_radiance)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PgridHeader {
    magic: String,
    #[serde(rename = "Q")]
    q: usize,
    dbeta: f64,
    grid: VxgHeader,
    voxels: Vec<u32>,
    dtype: String,
}

/// Per-voxel posteriors of the queried voxels.
pub fn write_posterior(path: &Path, pg: &PosteriorGrid) -> Result<()> {
    let h = PgridHeader {
        magic: "PGR1".into(),
        q: pg.spec.q,
        dbeta: pg.spec.dbeta,
        grid: VxgHeader::of(&pg.grid),
        voxels: pg.voxels.clone(),
        dtype: DTYPE.into(),
    };
    write_bytes(path, &encode(&h, pg.probs.iter().copied()))
}

/// Rows are renormalized after the `f32` round trip.
pub fn read_posterior(path: &Path) -> Result<PosteriorGrid> {
    let (h, mut v): (PgridHeader, _) = decode(path, &read_bytes(path)?)?;
    check_magic(path, &h.magic, "PGR1", &h.dtype)?;
    let grid = h.grid.grid(path)?;
    let spec = PosteriorSpec { q: h.q, dbeta: h.dbeta };
    spec.validate()?;
    if v.len() != h.voxels.len() * h.q {
        return Err(format_err(path, "payload does not match voxel count x Q"));
    }
    for row in v.chunks_mut(h.q) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
    Ok(PosteriorGrid::new(spec, grid, h.voxels, v)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockEntry {
    name: String,
    group: Group,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    magic: String,
    config: ProbCtConfig,
    cameras: usize,
    step: u64,
    /// Values, then Adam first and second moments, per block.
    blocks: Vec<BlockEntry>,
    dtype: String,
}

/// Model weights with their optimizer state.
pub fn write_checkpoint(path: &Path, model: &ProbCt) -> Result<()> {
    let blocks = model.params.blocks();
    let h = CheckpointHeader {
        magic: "SCK1".into(),
        config: model.cfg.clone(),
        cameras: model.cameras,
        step: blocks.first().map_or(0, |b| b.step),
        blocks: blocks
            .iter()
            .map(|b| BlockEntry {
                name: b.name.clone(),
                group: b.group,
                rows: b.rows,
                cols: b.cols,
            })
            .collect(),
        dtype: DTYPE.into(),
    };
    let values = blocks
        .iter()
        .flat_map(|b| b.data.iter().chain(&b.m).chain(&b.v).map(|x| *x as f64));
    write_bytes(path, &encode(&h, values))
}

pub fn read_checkpoint(path: &Path) -> Result<ProbCt> {
    let (h, v): (CheckpointHeader, _) = decode(path, &read_bytes(path)?)?;
    check_magic(path, &h.magic, "SCK1", &h.dtype)?;
    let need: usize = h.blocks.iter().map(|b| 3 * b.rows * b.cols).sum();
    if need != v.len() {
        return Err(format_err(path, format!("manifest needs {need} values, payload has {}", v.len())));
    }
    let mut store = ParamStore::<f32>::new();
    let mut at = 0;
    for b in &h.blocks {
        let n = b.rows * b.cols;
        let take = |at: usize| v[at..at + n].iter().map(|x| *x as f32).collect::<Vec<f32>>();
        let id = store.push_block(&b.name, b.group, b.rows, b.cols, take(at));
        let blk = store.block_mut(id);
        blk.m = take(at + n);
        blk.v = take(at + 2 * n);
        blk.step = h.step;
        at += 3 * n;
    }
    Ok(ProbCt::from_params(h.config, h.cameras, store)?)
}
