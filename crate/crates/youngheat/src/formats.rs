//! On-disk formats. Column layouts are described in `docs/formats.md`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use youngheat_core::asymptotics::{DensityPoint, SeriesFit};
use youngheat_core::expansion::ExponentLattice;
use youngheat_core::malliavin::{DensityEstimate, NondegeneracyProfile};
use youngheat_core::GridPath;

use crate::config::{sha256_hex, ExperimentConfig};
use crate::error::{AppError, AppResult};

pub const CONTAINER_MAGIC: &[u8; 4] = b"YHPC";
pub const CONTAINER_VERSION: u16 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Paths on a common grid with the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathContainer {
    pub hurst: f64,
    pub seed: u64,
    /// `fbm`, `state`, `jacobian`, `jacobian_inv` or `phi(p,q)`.
    pub series: String,
    pub paths: Vec<GridPath>,
}

impl PathContainer {
    pub fn dims(&self) -> usize {
        self.paths.first().map_or(0, |p| p.dims())
    }

    pub fn steps(&self) -> usize {
        self.paths.first().map_or(0, |p| p.steps())
    }

    fn check(&self) -> Result<(), String> {
        let (d, n) = (self.dims(), self.steps());
        if self.paths.iter().any(|p| p.dims() != d || p.steps() != n) {
            return Err("paths do not share a grid".into());
        }
        Ok(())
    }

    /// Little-endian: magic, version `u16`, reserved `u16`, `H` (`f64`),
    /// `d` (`u32`), `N` (`u64`), `M` (`u64`), seed (`u64`), tag length
    /// (`u32`), tag bytes, then `M (N + 1) d` values, path-major, then time,
    /// then component.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        self.check().map_err(std::io::Error::other)?;
        w.write_all(CONTAINER_MAGIC)?;
        w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        w.write_all(&self.hurst.to_le_bytes())?;
        w.write_all(&(self.dims() as u32).to_le_bytes())?;
        w.write_all(&(self.steps() as u64).to_le_bytes())?;
        w.write_all(&(self.paths.len() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.series.len() as u32).to_le_bytes())?;
        w.write_all(self.series.as_bytes())?;
        for p in &self.paths {
            for v in p.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, String> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| e.to_string())?;
        let mut pos = 0usize;
        let mut take = |k: usize| -> Result<&[u8], String> {
            let s = buf.get(pos..pos + k).ok_or("truncated container")?;
            pos += k;
            Ok(s)
        };
        if take(4)? != CONTAINER_MAGIC {
            return Err("not a path container (bad magic)".into());
        }
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != CONTAINER_VERSION {
            return Err(format!("unsupported container version {version}"));
        }
        take(2)?;
        let hurst = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let d = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let m = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let tag_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let series = String::from_utf8(take(tag_len)?.to_vec()).map_err(|_| "series tag is not UTF-8")?;
        let per = (n + 1).checked_mul(d).ok_or("header overflow")?;
        let mut paths = Vec::with_capacity(m.min(1 << 16));
        for _ in 0..m {
            let raw = take(per.checked_mul(8).ok_or("header overflow")?)?;
            let vals = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            paths.push(GridPath::from_values(d, n, vals).map_err(|e| e.to_string())?);
        }
        if take(1).is_ok() {
            return Err("trailing bytes after container".into());
        }
        Ok(PathContainer { hurst, seed, series, paths })
    }

    /// Columns `t,path_id,component,value`, with a leading `series` column
    /// when `tagged`.
    pub fn write_csv<W: Write>(&self, w: W, tagged: bool) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        write_path_rows(&mut out, self, tagged, true)?;
        out.flush()?;
        Ok(())
    }

    /// Reads the untagged layout written by `write_csv`.
    pub fn read_csv<R: Read>(r: R, hurst: f64, seed: u64, series: &str) -> Result<Self, String> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(|e| e.to_string())?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "path_id", "component", "value"] {
            return Err(format!("unexpected header {headers:?}"));
        }
        let mut rows: Vec<(f64, usize, usize, f64)> = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let f = |i: usize| rec[i].parse::<f64>().map_err(|_| format!("bad number `{}`", &rec[i]));
            let u = |i: usize| rec[i].parse::<usize>().map_err(|_| format!("bad index `{}`", &rec[i]));
            rows.push((f(0)?, u(1)?, u(2)?, f(3)?));
        }
        let m = rows.iter().map(|r| r.1).max().map_or(0, |v| v + 1);
        let d = rows.iter().map(|r| r.2).max().map_or(0, |v| v + 1);
        if m == 0 || !rows.len().is_multiple_of(m * d) || rows.len() / (m * d) < 2 {
            return Err("rows do not form complete paths".into());
        }
        let n = rows.len() / (m * d) - 1;
        let mut vals = vec![vec![f64::NAN; (n + 1) * d]; m];
        for (t, p, k, v) in rows {
            let i = (t * n as f64).round() as usize;
            if i > n {
                return Err(format!("time {t} is outside [0, 1]"));
            }
            vals[p][i * d + k] = v;
        }
        if vals.iter().flatten().any(|v| v.is_nan()) {
            return Err("missing grid values".into());
        }
        let paths = vals
            .into_iter()
            .map(|v| GridPath::from_values(d, n, v).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        Ok(PathContainer { hurst, seed, series: series.to_string(), paths })
    }
}

fn write_path_rows<W: Write>(
    out: &mut csv::Writer<W>,
    c: &PathContainer,
    tagged: bool,
    header: bool,
) -> csv::Result<()> {
    if header {
        if tagged {
            out.write_record(["series", "t", "path_id", "component", "value"])?;
        } else {
            out.write_record(["t", "path_id", "component", "value"])?;
        }
    }
    for (id, p) in c.paths.iter().enumerate() {
        for i in 0..=p.steps() {
            for k in 0..p.dims() {
                let (t, v) = (p.time(i).to_string(), p.get(i, k).to_string());
                let (id, k) = (id.to_string(), k.to_string());
                if tagged {
                    out.write_record([c.series.as_str(), &t, &id, &k, &v])?;
                } else {
                    out.write_record([t, id, k, v])?;
                }
            }
        }
    }
    Ok(())
}

/// Several tagged containers in one CSV.
pub fn write_tagged_csv<W: Write>(w: W, containers: &[PathContainer]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (i, c) in containers.iter().enumerate() {
        write_path_rows(&mut out, c, true, i == 0)?;
    }
    out.flush()?;
    Ok(())
}

/// `kind,p,q,value`.
pub fn write_lattice_table<W: Write>(w: W, lattices: &[ExponentLattice]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "p", "q", "value"])?;
    for lat in lattices {
        for e in &lat.elements {
            out.write_record([lat.kind.name().to_string(), e.p.to_string(), e.q.to_string(), e.value.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Rows of a lattice table as `(kind, p, q, value)`.
pub fn read_lattice_table<R: Read>(r: R) -> Result<Vec<(String, i64, i64, f64)>, String> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let p = rec[1].parse().map_err(|_| "bad p")?;
        let q = rec[2].parse().map_err(|_| "bad q")?;
        let v = rec[3].parse().map_err(|_| "bad value")?;
        rows.push((rec[0].to_string(), p, q, v));
    }
    Ok(rows)
}

/// `x0,..,x{n-1},value,std_error,half_bandwidth_value,half_bandwidth_std_error`.
pub fn write_density_csv<W: Write>(w: W, est: &DensityEstimate) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = est.eval_points.first().map_or(0, |p| p.len());
    let mut header: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
    header.extend(["value", "std_error", "half_bandwidth_value", "half_bandwidth_std_error"].map(String::from));
    out.write_record(&header)?;
    for (i, p) in est.eval_points.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        for v in [est.values[i], est.std_errors[i], est.half_values[i], est.half_std_errors[i]] {
            row.push(v.to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// `eps,q,value,min_det`.
pub fn write_profile_csv<W: Write>(w: W, p: &NondegeneracyProfile) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["eps", "q", "value", "min_det"])?;
    for (i, e) in p.eps.iter().enumerate() {
        for (j, q) in p.q.iter().enumerate() {
            out.write_record([e.to_string(), q.to_string(), p.values[i][j].to_string(), p.min_det[i].to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `t,raw_estimate,std_error,model_prediction`, the prediction mapped back
/// to raw density units.
pub fn write_report_csv<W: Write>(w: W, points: &[DensityPoint], fit: &SeriesFit) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "raw_estimate", "std_error", "model_prediction"])?;
    for p in points {
        let scale = p.normalized_std_error / p.std_error;
        let pred = if scale.is_finite() && scale > 0.0 { fit.predict(p.t) / scale } else { f64::NAN };
        out.write_record([p.t.to_string(), p.estimate.to_string(), p.std_error.to_string(), pred.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Run manifest written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// Extra command-line arguments beyond the configuration.
    pub arguments: Vec<String>,
    /// Canonical configuration text; feed it back with `--config`.
    pub config: String,
    pub config_hash: String,
    pub outputs: Vec<FileEntry>,
    #[serde(default)]
    pub details: serde_json::Value,
}

/// Writes files into one output directory and tracks them for the manifest.
pub struct OutputDir {
    pub root: PathBuf,
    written: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> AppResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| AppError::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Renders with `f` into memory, then writes and records the file.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> AppResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), Box<dyn std::error::Error>>,
    {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| AppError::format(self.path(name), e))?;
        self.write_bytes(name, &buf)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> AppResult<()> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| AppError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| AppError::io(&path, e))?;
        self.written.retain(|f| f.name != name);
        self.written.push(FileEntry { name: name.into(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> AppResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::format(self.path(name), e))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `config.txt` and `manifest.json`.
    pub fn finish(
        mut self,
        command: &str,
        arguments: &[String],
        cfg: &ExperimentConfig,
        details: serde_json::Value,
    ) -> AppResult<Manifest> {
        self.write_bytes("config.txt", cfg.canonical().as_bytes())?;
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            arguments: arguments.to_vec(),
            config: cfg.canonical(),
            config_hash: cfg.hash(),
            outputs: self.written.clone(),
            details,
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> AppResult<Manifest> {
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| AppError::format(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn container() -> PathContainer {
        let paths = (0..3).map(|m| {
            GridPath::from_fn(2, 4, |t, o| {
                o[0] = t * (m as f64 + 1.0);
                o[1] = (t + m as f64).sin() / 3.0;
            })
        });
        PathContainer { hurst: 0.75, seed: 9, series: "fbm".into(), paths: paths.collect() }
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let c = container();
        let mut buf = Vec::new();
        c.write_binary(&mut buf).unwrap();
        assert_eq!(PathContainer::read_binary(&buf[..]).unwrap(), c);
        assert!(PathContainer::read_binary(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(PathContainer::read_binary(&extra[..]).is_err());
        assert!(PathContainer::read_binary(&b"nope"[..]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = container();
        let mut buf = Vec::new();
        c.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,path_id,component,value\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 5 * 2);
        assert_eq!(PathContainer::read_csv(&buf[..], 0.75, 9, "fbm").unwrap(), c);
    }
}
