//! Persistence: versioned shell-model records (JSON) and binary ensemble
//! records (explicit little-endian 64-bit floats with a magic/version header).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::ParticleEnsemble;
use crate::grid::make_log_grid;
use crate::params::ShellParams;
use crate::steady::ShellModel;
use crate::{CoreError, Result};

const ENSEMBLE_MAGIC: &[u8; 8] = b"VSHENS\0\0";
const ENSEMBLE_VERSION: u32 = 1;
const MODEL_VERSION: u32 = 1;

/// Geometric grid specification; regenerating it is bit-reproducible.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

/// On-disk form of a solved shell.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelRecord {
    pub version: u32,
    pub params: ShellParams,
    pub grid: GridSpec,
    pub rho0: Vec<f64>,
    pub iterations: usize,
    // derived, for human readers; recomputed on load
    pub r1: f64,
    pub r2: f64,
    pub mass: f64,
}

/// Writes a model record as JSON.
pub fn save_model(path: &Path, model: &ShellModel) -> Result<()> {
    let grid = model.grid();
    let record = ModelRecord {
        version: MODEL_VERSION,
        params: model.params,
        grid: GridSpec {
            r_min: grid.r_min(),
            r_max: grid.r_cut(),
            count: grid.len(),
        },
        rho0: model.rho0().values().to_vec(),
        iterations: model.iterations(),
        r1: model.r1(),
        r2: model.r2(),
        mass: model.mass(),
    };
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer(file, &record).map_err(|e| CoreError::Record(e.to_string()))
}

/// Reads a model record and reassembles the solved shell.
pub fn load_model(path: &Path) -> Result<ShellModel> {
    let file = BufReader::new(File::open(path)?);
    let record: ModelRecord =
        serde_json::from_reader(file).map_err(|e| CoreError::Record(e.to_string()))?;
    if record.version != MODEL_VERSION {
        return Err(CoreError::Record(format!(
            "unsupported model record version {}",
            record.version
        )));
    }
    let grid = Arc::new(make_log_grid(
        record.grid.r_min,
        record.grid.r_max,
        record.grid.count,
    )?);
    ShellModel::from_parts(record.params, grid, record.rho0, record.iterations)
}

/// Writes the binary ensemble record:
/// magic(8) version(u32) count(u64) seed(u64) params(7 x f64) then the five
/// arrays `r, w, L, weight, f_value`, all little-endian.
pub fn save_ensemble(path: &Path, ensemble: &ParticleEnsemble, params: &ShellParams) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(ENSEMBLE_MAGIC)?;
    out.write_all(&ENSEMBLE_VERSION.to_le_bytes())?;
    out.write_all(&(ensemble.len() as u64).to_le_bytes())?;
    out.write_all(&ensemble.seed().to_le_bytes())?;
    for v in [
        params.k,
        params.l,
        params.l0,
        params.mc,
        params.e0,
        params.amplitude,
        ensemble.total_mass(),
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    for arr in [
        ensemble.radii(),
        ensemble.radial_velocities(),
        ensemble.angular_momenta(),
        ensemble.weights(),
        ensemble.f_values(),
    ] {
        for v in arr {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads the binary ensemble record back.
pub fn load_ensemble(path: &Path) -> Result<(ParticleEnsemble, ShellParams)> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != ENSEMBLE_MAGIC {
        return Err(CoreError::Record("bad magic in ensemble record".into()));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != ENSEMBLE_VERSION {
        return Err(CoreError::Record(format!(
            "unsupported ensemble record version {version}"
        )));
    }
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    let mut scalar = || -> Result<f64> {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let k = scalar()?;
    let l = scalar()?;
    let l0 = scalar()?;
    let mc = scalar()?;
    let e0 = scalar()?;
    let amplitude = scalar()?;
    let _total_mass = scalar()?;
    let params = ShellParams::new(k, l, l0, mc, e0, Some(amplitude))?;

    let array = |input: &mut BufReader<File>| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; count * 8];
        input.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let r = array(&mut input)?;
    let w = array(&mut input)?;
    let lv = array(&mut input)?;
    let weight = array(&mut input)?;
    let f_value = array(&mut input)?;
    let ensemble = ParticleEnsemble::from_raw(r, w, lv, weight, f_value, seed)?;
    Ok((ensemble, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady::{solve_shell, SolveOptions};

    fn reference_model() -> ShellModel {
        let params = ShellParams::new(1.0, 1.0, 0.1, 1.0, -2.0, None).unwrap();
        let grid = Arc::new(make_log_grid(0.01, 10.0, 800).unwrap());
        solve_shell(&params, &grid, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = reference_model();
        save_model(&path, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.mass(), model.mass());
        assert_eq!(loaded.r1(), model.r1());
        assert_eq!(loaded.rho0().values(), model.rho0().values());
    }

    #[test]
    fn ensemble_round_trip_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ens.bin");
        let model = reference_model();
        let ens = crate::dynamics::sample_shell(&model, 500, 11).unwrap();
        save_ensemble(&path, &ens, &model.params).unwrap();
        let (loaded, params) = load_ensemble(&path).unwrap();
        assert_eq!(loaded.radii(), ens.radii());
        assert_eq!(loaded.f_values(), ens.f_values());
        assert_eq!(params.e0, model.params.e0);

        std::fs::write(&path, b"garbage").unwrap();
        assert!(load_ensemble(&path).is_err());
    }
}
