//! File output: diagnostics CSV, error-table CSV, VTK legacy snapshots, raw
//! binary state dumps and the persisted reference ensemble.

use crate::diag::{DiagnosticsRecord, ErrorTableRow, OBSERVABLE_NAMES};
use crate::field::WallBc;
use crate::mc::{Observables, Reference, StatErrorRow, TotalErrorRow};
use crate::mesh::Mesh;
use crate::ops;
use crate::physics::{PhysParams, State};
use crate::scheme::StepReport;
use crate::stochastic::ExperimentSpec;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: String, reason: String },
}

fn fmt(v: f64) -> String {
    // shortest round-trip representation; deterministic for identical bits
    let mut buf = format!("{}", v);
    if !buf.contains(['e', '.', 'n', 'i']) {
        buf.push_str(".0");
    }
    buf
}

pub fn write_step_reports_csv(path: &Path, reports: &[StepReport]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "step", "t", "dt", "picard_iters", "increment", "lin_iters", "mass", "min_density",
        "div_b_max", "energy", "energy_residual", "halvings",
    ])?;
    for (k, r) in reports.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            fmt(r.t),
            fmt(r.dt),
            r.picard_iters.to_string(),
            fmt(r.increment),
            r.lin_iters.to_string(),
            fmt(r.mass_after),
            fmt(r.min_density),
            fmt(r.div_b_max),
            fmt(r.energy),
            fmt(r.energy_residual),
            r.halvings.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t", "mass", "energy", "min_rho", "max_rho", "div_b_max", "rho_lgamma", "momentum_norm",
        "u_l2", "grad_u_l2", "div_u_l2", "b_l2", "curl_b_l2",
    ])?;
    for r in records {
        w.write_record([
            fmt(r.time),
            fmt(r.mass),
            fmt(r.energy),
            fmt(r.min_rho),
            fmt(r.max_rho),
            fmt(r.div_b_max),
            fmt(r.rho_lgamma),
            fmt(r.momentum_norm),
            fmt(r.u_l2),
            fmt(r.grad_u_l2),
            fmt(r.div_u_l2),
            fmt(r.b_l2),
            fmt(r.curl_b_l2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_error_table_csv(path: &Path, rows: &[ErrorTableRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["h".to_string()];
    for name in OBSERVABLE_NAMES {
        header.push(format!("err_{}", name));
    }
    for name in OBSERVABLE_NAMES {
        header.push(format!("rate_{}", name));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![fmt(r.h)];
        for c in 0..6 {
            rec.push(fmt(r.errors[c]));
        }
        for c in 0..6 {
            rec.push(match r.rates {
                Some(rates) => fmt(rates[c]),
                None => String::new(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stat_error_csv(path: &Path, rows: &[StatErrorRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["n".to_string()];
    for name in OBSERVABLE_NAMES {
        header.push(format!("e1_{}", name));
    }
    for name in OBSERVABLE_NAMES {
        header.push(format!("e2_{}", name));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.n.to_string()];
        for c in 0..6 {
            rec.push(fmt(r.e1[c]));
        }
        for c in 0..6 {
            rec.push(fmt(r.e2[c]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_total_error_csv(path: &Path, rows: &[TotalErrorRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["nx".to_string(), "h".to_string(), "n".to_string()];
    for name in OBSERVABLE_NAMES {
        header.push(format!("e1_{}", name));
    }
    for name in OBSERVABLE_NAMES {
        header.push(format!("e2_{}", name));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.nx.to_string(), fmt(r.h), r.n.to_string()];
        for c in 0..6 {
            rec.push(fmt(r.e1[c]));
        }
        for c in 0..6 {
            rec.push(fmt(r.e2[c]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// VTK legacy ASCII structured-points snapshot with cell data: density, the
/// velocity and magnetic vectors (zero third component), the discrete
/// divergence and curl of B.
pub fn write_vtk(
    path: &Path,
    mesh: &Mesh,
    state: &State,
    phys: &PhysParams,
    title: &str,
) -> Result<(), IoError> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# vtk DataFile Version 3.0")?;
    writeln!(f, "{}", title)?;
    writeln!(f, "ASCII")?;
    writeln!(f, "DATASET STRUCTURED_POINTS")?;
    writeln!(f, "DIMENSIONS {} {} 1", mesh.nx1 + 1, mesh.nx2 + 1)?;
    writeln!(f, "ORIGIN {} {} 0", fmt(mesh.x1a), fmt(mesh.x2a))?;
    writeln!(f, "SPACING {} {} 1", fmt(mesh.h), fmt(mesh.h))?;
    writeln!(f, "CELL_DATA {}", mesh.ncells())?;
    let scalar = |f: &mut BufWriter<File>, name: &str, data: &[f64]| -> Result<(), IoError> {
        writeln!(f, "SCALARS {} double 1", name)?;
        writeln!(f, "LOOKUP_TABLE default")?;
        for v in data {
            writeln!(f, "{}", fmt(*v))?;
        }
        Ok(())
    };
    let vector = |f: &mut BufWriter<File>, name: &str, c1: &[f64], c2: &[f64]| -> Result<(), IoError> {
        writeln!(f, "VECTORS {} double", name)?;
        for k in 0..c1.len() {
            writeln!(f, "{} {} 0", fmt(c1[k]), fmt(c2[k]))?;
        }
        Ok(())
    };
    scalar(&mut f, "rho", &state.rho.data)?;
    vector(&mut f, "u", &state.u.c1.data, &state.u.c2.data)?;
    vector(&mut f, "B", &state.b.c1.data, &state.b.c2.data)?;
    let div_b = ops::div_cells(mesh, &state.b, &WallBc::even());
    scalar(&mut f, "div_B", &div_b.data)?;
    let curl_b = ops::curl_vec(mesh, &state.b, &WallBc::mirror(phys.b_minus, phys.b_plus));
    scalar(&mut f, "curl_B", &curl_b.data)?;
    f.flush()?;
    Ok(())
}

const STATE_MAGIC: &[u8; 8] = b"MHDMC\0S1";

/// Raw full-precision state dump: magic, grid shape, bounds, then the five
/// component arrays as little-endian f64 in row-major cell order.
pub fn write_state_bin(path: &Path, mesh: &Mesh, state: &State) -> Result<(), IoError> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(STATE_MAGIC)?;
    f.write_all(&(mesh.nx1 as u64).to_le_bytes())?;
    f.write_all(&(mesh.nx2 as u64).to_le_bytes())?;
    for v in [mesh.x1a, mesh.x1b, mesh.x2a, mesh.x2b] {
        f.write_all(&v.to_le_bytes())?;
    }
    for part in [
        &state.rho.data,
        &state.u.c1.data,
        &state.u.c2.data,
        &state.b.c1.data,
        &state.b.c2.data,
    ] {
        for v in part {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_state_bin(path: &Path) -> Result<(Mesh, State), IoError> {
    let mut f = BufReader::new(File::open(path)?);
    let corrupt = |reason: &str| IoError::Corrupt {
        path: path.display().to_string(),
        reason: reason.into(),
    };
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut u64buf = [0u8; 8];
    let mut read_u64 = |f: &mut BufReader<File>| -> Result<u64, IoError> {
        f.read_exact(&mut u64buf)?;
        Ok(u64::from_le_bytes(u64buf))
    };
    let nx1 = read_u64(&mut f)? as usize;
    let nx2 = read_u64(&mut f)? as usize;
    let mut fbuf = [0u8; 8];
    let mut read_f64 = |f: &mut BufReader<File>| -> Result<f64, IoError> {
        f.read_exact(&mut fbuf)?;
        Ok(f64::from_le_bytes(fbuf))
    };
    let x1a = read_f64(&mut f)?;
    let x1b = read_f64(&mut f)?;
    let x2a = read_f64(&mut f)?;
    let x2b = read_f64(&mut f)?;
    let mesh = Mesh::new(nx1, nx2, (x1a, x1b, x2a, x2b))
        .map_err(|e| corrupt(&format!("bad mesh: {}", e)))?;
    let mut state = State::zeros(&mesh);
    for part in [
        &mut state.rho.data,
        &mut state.u.c1.data,
        &mut state.u.c2.data,
        &mut state.b.c1.data,
        &mut state.b.c2.data,
    ] {
        for v in part.iter_mut() {
            *v = read_f64(&mut f)?;
        }
    }
    Ok((mesh, state))
}

/// Sidecar manifest of a persisted reference ensemble.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ReferenceManifest {
    pub schema_version: u32,
    pub experiment: String,
    pub nx: usize,
    pub m_ref: usize,
    pub master_seed: u64,
    pub t_final: f64,
    pub flat_len: usize,
}

const REF_MAGIC: &[u8; 8] = b"MHDMC\0R1";

/// Persists mean and deviation fields plus a JSON manifest under `dir`.
pub fn save_reference(dir: &Path, spec: &ExperimentSpec, r: &Reference) -> Result<(), IoError> {
    fs::create_dir_all(dir)?;
    let mean = r.mean.flatten();
    let dev = r.dev.flatten();
    let manifest = ReferenceManifest {
        schema_version: 1,
        experiment: spec.name.clone(),
        nx: r.nx,
        m_ref: r.m_ref,
        master_seed: r.master_seed,
        t_final: spec.t_final,
        flat_len: mean.len(),
    };
    let mut f = BufWriter::new(File::create(dir.join("reference.bin"))?);
    f.write_all(REF_MAGIC)?;
    for v in mean.iter().chain(dev.iter()) {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    serde_json::to_writer_pretty(
        BufWriter::new(File::create(dir.join("reference.json"))?),
        &manifest,
    )?;
    Ok(())
}

/// Reloads a reference saved by [`save_reference`]; the experiment provides
/// the field shapes.
pub fn load_reference(dir: &Path, spec: &ExperimentSpec) -> Result<Reference, IoError> {
    let manifest_path = dir.join("reference.json");
    let manifest: ReferenceManifest =
        serde_json::from_reader(BufReader::new(File::open(&manifest_path)?))?;
    let bin_path = dir.join("reference.bin");
    let corrupt = |reason: String| IoError::Corrupt {
        path: bin_path.display().to_string(),
        reason,
    };
    if manifest.experiment != spec.name {
        return Err(corrupt(format!(
            "reference is for experiment {}, requested {}",
            manifest.experiment, spec.name
        )));
    }
    let mut f = BufReader::new(File::open(&bin_path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != REF_MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let mut raw = Vec::new();
    f.read_to_end(&mut raw)?;
    if raw.len() != 2 * manifest.flat_len * 8 {
        return Err(corrupt(format!(
            "expected {} bytes, found {}",
            2 * manifest.flat_len * 8,
            raw.len()
        )));
    }
    let vals: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mesh = spec
        .mesh(manifest.nx)
        .map_err(|e| corrupt(format!("bad mesh: {}", e)))?;
    let zero = State::zeros(&mesh);
    let mut mean = Observables::from_state(&mesh, &zero, 0.0, 0.0);
    let mut dev = mean.clone();
    if mean.flatten().len() != manifest.flat_len {
        return Err(corrupt("field shapes do not match the experiment".into()));
    }
    mean.fill_from_flat(&vals[..manifest.flat_len]);
    dev.fill_from_flat(&vals[manifest.flat_len..]);
    Ok(Reference {
        nx: manifest.nx,
        m_ref: manifest.m_ref,
        master_seed: manifest.master_seed,
        mean,
        dev,
    })
}
