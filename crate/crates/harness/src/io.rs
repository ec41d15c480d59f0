//! On-disk formats.
//!
//! Matrices are stored row-major and flattened. Complex entries are
//! interleaved as `re, im`. The measurement payload `y` is a raw little-endian
//! `f64` stream ordered by partition, then column, then sample; its shape is
//! recorded in the accompanying JSON metadata.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use lrpr_core::altmin::{IterationRecord, RunReport};
use lrpr_core::init::SpectralInit;
use lrpr_core::model::GroundTruth;
use lrpr_core::sensing::{MeasurementSet, NoiseSpec, SamplePlan};
use lrpr_core::{DMatrix, Field, Scalar};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{io_err, json_err, HarnessError, Result};

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(json_err(path))?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(json_err(path))
}

fn flatten<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    let per = if T::FIELD == Field::Complex { 2 } else { 1 };
    let mut out = Vec::with_capacity(m.len() * per);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            out.push(v.real());
            if per == 2 {
                out.push(v.imaginary());
            }
        }
    }
    out
}

fn unflatten<T: Scalar>(rows: usize, cols: usize, data: &[f64]) -> Result<DMatrix<T>> {
    let per = if T::FIELD == Field::Complex { 2 } else { 1 };
    if data.len() != rows * cols * per {
        return Err(HarnessError::Invalid(format!(
            "expected {} values for a {rows}x{cols} {} matrix, found {}",
            rows * cols * per,
            T::FIELD,
            data.len()
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        let at = (i * cols + j) * per;
        T::from_parts(data[at], if per == 2 { data[at + 1] } else { 0.0 })
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub field: Field,
    pub sigma: Vec<f64>,
    /// Informational; recomputed on load.
    pub kappa: f64,
    pub mu: f64,
    pub u_star: Vec<f64>,
    pub v_star: Vec<f64>,
}

impl GroundTruthFile {
    pub fn from_truth<T: Scalar>(gt: &GroundTruth<T>) -> Self {
        Self {
            n: gt.n(),
            q: gt.q(),
            r: gt.rank(),
            field: T::FIELD,
            sigma: gt.sigma().to_vec(),
            kappa: gt.kappa(),
            mu: gt.mu(),
            u_star: flatten(gt.u_star()),
            v_star: flatten(gt.v_star()),
        }
    }

    pub fn into_truth<T: Scalar>(&self) -> Result<GroundTruth<T>> {
        if self.field != T::FIELD {
            return Err(HarnessError::Invalid(format!(
                "file holds a {} ground truth, {} requested",
                self.field,
                T::FIELD
            )));
        }
        let u = unflatten(self.n, self.r, &self.u_star)?;
        let v = unflatten(self.q, self.r, &self.v_star)?;
        Ok(GroundTruth::from_parts(u, self.sigma.clone(), v)?)
    }
}

/// Everything about a [`MeasurementSet`] except the `y` payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMeta {
    pub n: usize,
    pub q: usize,
    pub field: Field,
    pub plan: SamplePlan,
    pub master_seed: u64,
    pub noise: NoiseSpec,
    /// `[partition][column]`
    pub noise_norms: Vec<Vec<f64>>,
    /// File holding `y`, relative to the metadata file.
    pub y_file: String,
}

pub fn write_measurements<T: Scalar>(
    ms: &MeasurementSet<T>,
    meta_path: &Path,
    y_path: &Path,
) -> Result<()> {
    let parts = ms.plan().last_partition() + 1;
    let file = File::create(y_path).map_err(io_err(y_path))?;
    let mut w = BufWriter::new(file);
    for tau in 0..parts {
        for k in 0..ms.q() {
            for v in ms.y(tau, k) {
                w.write_all(&v.to_le_bytes()).map_err(io_err(y_path))?;
            }
        }
    }
    w.flush().map_err(io_err(y_path))?;
    let meta = MeasurementMeta {
        n: ms.n(),
        q: ms.q(),
        field: T::FIELD,
        plan: *ms.plan(),
        master_seed: ms.master_seed(),
        noise: *ms.noise(),
        noise_norms: (0..parts).map(|tau| ms.noise_norms(tau).to_vec()).collect(),
        y_file: y_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    write_json(meta_path, &meta)
}

pub fn read_measurements<T: Scalar>(meta_path: &Path) -> Result<MeasurementSet<T>> {
    let meta: MeasurementMeta = read_json(meta_path)?;
    if meta.field != T::FIELD {
        return Err(HarnessError::Invalid(format!(
            "file holds {} measurements, {} requested",
            meta.field,
            T::FIELD
        )));
    }
    let y_path = meta_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&meta.y_file);
    let mut bytes = Vec::new();
    File::open(&y_path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(&y_path))?;
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")));
    let mut y = Vec::new();
    for tau in 0..=meta.plan.last_partition() {
        let m = meta.plan.partition_len(tau)?;
        let cols: Vec<Vec<f64>> = (0..meta.q)
            .map(|_| values.by_ref().take(m).collect())
            .collect();
        y.push(cols);
    }
    let expected = meta.q * meta.plan.m_total();
    if bytes.len() != expected * 8 {
        return Err(HarnessError::Invalid(format!(
            "{}: expected {expected} values, found {} bytes",
            y_path.display(),
            bytes.len()
        )));
    }
    Ok(MeasurementSet::from_raw(
        meta.n,
        meta.plan,
        meta.master_seed,
        meta.noise,
        y,
        meta.noise_norms,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitFile {
    pub eigenvalues: Vec<f64>,
    pub r_hat: usize,
}

impl InitFile {
    pub fn from_init<T: Scalar>(init: &SpectralInit<T>) -> Self {
        Self {
            eigenvalues: init.eigenvalues.clone(),
            r_hat: init.r_hat,
        }
    }
}

pub const TRAJECTORY_HEADER: [&str; 6] = [
    "iter",
    "se2",
    "sef",
    "matdist_rel",
    "t_pr_used",
    "wall_time_ms",
];

/// Scientific notation, empty for a missing value.
pub fn sci(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn trajectory_record(r: &IterationRecord) -> [String; 6] {
    [
        r.iter.to_string(),
        sci(r.se2),
        sci(r.sef),
        sci(r.matdist_rel),
        r.t_pr_used.to_string(),
        sci(Some(r.wall_time_ms)),
    ]
}

pub fn write_trajectory_csv<W: Write>(report: &RunReport, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(TRAJECTORY_HEADER)?;
    for r in &report.trajectory {
        csv.write_record(trajectory_record(r))?;
    }
    csv.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lrpr_core::altmin::{run, NoClock, RunConfig};
    use lrpr_core::init::RankMode;
    use lrpr_core::model::generate_ground_truth;
    use lrpr_core::sensing::measure;
    use lrpr_core::C64;

    fn roundtrip_truth<T: Scalar>() {
        let gt = generate_ground_truth::<T>(7, 9, 3, 3.0, 5).unwrap();
        let file = GroundTruthFile::from_truth(&gt);
        assert_eq!(
            file.u_star.len(),
            7 * 3 * if T::FIELD == Field::Complex { 2 } else { 1 }
        );
        let text = serde_json::to_string(&file).unwrap();
        let back: GroundTruthFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_truth::<T>().unwrap(), gt);
    }

    #[test]
    fn ground_truth_roundtrip() {
        roundtrip_truth::<f64>();
        roundtrip_truth::<C64>();
    }

    #[test]
    fn ground_truth_is_row_major() {
        let gt = generate_ground_truth::<C64>(3, 4, 2, 1.0, 1).unwrap();
        let file = GroundTruthFile::from_truth(&gt);
        let u = gt.u_star();
        assert_eq!(
            file.u_star[..4],
            [u[(0, 0)].re, u[(0, 0)].im, u[(0, 1)].re, u[(0, 1)].im]
        );
        assert!(GroundTruthFile::from_truth(&gt)
            .into_truth::<f64>()
            .is_err());
    }

    #[test]
    fn measurement_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let gt = generate_ground_truth::<C64>(5, 4, 2, 2.0, 2).unwrap();
        let plan = SamplePlan::new(9, 6, 2).unwrap();
        let ms = measure(&gt, plan, NoiseSpec::bounded(0.01), 3).unwrap();
        let meta = dir.path().join("m.json");
        let y = dir.path().join("y.bin");
        write_measurements(&ms, &meta, &y).unwrap();
        assert_eq!(
            fs::metadata(&y).unwrap().len(),
            (4 * plan.m_total() * 8) as u64
        );
        let back = read_measurements::<C64>(&meta).unwrap();
        assert_eq!(back, ms);
        let raw = fs::read(&y).unwrap();
        assert_eq!(
            f64::from_le_bytes(raw[..8].try_into().unwrap()),
            ms.y(0, 0)[0]
        );
        assert!(read_measurements::<f64>(&meta).is_err());
        fs::write(&y, &raw[..raw.len() - 8]).unwrap();
        assert!(read_measurements::<C64>(&meta).is_err());
    }

    #[test]
    fn trajectory_csv_layout() {
        let gt = generate_ground_truth::<f64>(10, 20, 2, 2.0, 4).unwrap();
        let ms = measure(
            &gt,
            SamplePlan::new(200, 30, 2).unwrap(),
            NoiseSpec::NONE,
            4,
        )
        .unwrap();
        let cfg = RunConfig::new(2, RankMode::KnownRank(2), 2, 2.0);
        let report = run(Some(&gt), &ms, &cfg, &NoClock).unwrap().report;
        let mut buf = Vec::new();
        write_trajectory_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter,se2,sef,matdist_rel,t_pr_used,wall_time_ms");
        assert_eq!(lines.len(), 4);
        let init: Vec<&str> = lines[1].split(',').collect();
        assert_eq!((init[0], init[3], init[4], init[5]), ("0", "", "0", "0e0"));
        let row: Vec<&str> = lines[2].split(',').collect();
        assert!(row[2].contains('e'));
        assert_eq!(
            row[2].parse::<f64>().unwrap(),
            report.trajectory[1].sef.unwrap()
        );
    }

    #[test]
    fn report_json_roundtrip() {
        let gt = generate_ground_truth::<f64>(10, 20, 2, 2.0, 4).unwrap();
        let ms = measure(
            &gt,
            SamplePlan::new(200, 30, 1).unwrap(),
            NoiseSpec::NONE,
            4,
        )
        .unwrap();
        let cfg = RunConfig::new(1, RankMode::Threshold(0.01), 2, 2.0);
        let report = run(Some(&gt), &ms, &cfg, &NoClock).unwrap().report;
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("\"final\"") && text.contains("\"T\":1"));
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }
}
