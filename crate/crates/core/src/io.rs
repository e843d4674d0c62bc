//! CSV input and output.
//!
//! Outputs are rendered in memory first and committed together through
//! [`OutputSet`], each file written to a temporary name and renamed, so a
//! failing command leaves no partial files behind.

use std::fs;
use std::path::{Path, PathBuf};

use crate::decompose::Signal;
use crate::error::{CohError, CohResult};
use crate::sim::SweepRecord;

pub const SWEEP_HEADER: [&str; 8] = [
    "c_true", "sigma_n", "snr_db", "c_obs", "p_glm", "p_circ", "p_phase", "f_br_hz",
];

/// Shortest round-trip text for a float; scientific notation outside
/// `[1e-4, 1e15)` so tiny p-values stay short.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Formats an optional value, `NA` when undefined.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_f64)
}

/// Read a one-channel signal.
///
/// Accepts a `time_s,value` header (sampling rate taken from `fs_hz` when
/// given, else from the median time step) or a single `value` column (which
/// needs `fs_hz`).
pub fn read_signal_csv(path: &Path, fs_hz: Option<f64>) -> CohResult<Signal> {
    let load = |msg: String| CohError::DriverLoad(format!("{}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| load(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| load(e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let (value_col, time_col) = match cols.as_slice() {
        ["time_s", "value"] => (1, Some(0)),
        ["value"] => (0, None),
        _ => return Err(load(format!("expected header `time_s,value` or `value`, got `{}`", cols.join(",")))),
    };
    let mut values = Vec::new();
    let mut times = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| load(e.to_string()))?;
        let parse = |i: usize| -> CohResult<f64> {
            let field = row.get(i).unwrap_or("");
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| load(format!("row {}: bad number `{field}`", line + 2)))
        };
        values.push(parse(value_col)?);
        if let Some(t) = time_col {
            times.push(parse(t)?);
        }
    }
    if values.len() < 2 {
        return Err(load("fewer than 2 samples".into()));
    }
    let fs = match (fs_hz, time_col) {
        (Some(fs), _) => fs,
        (None, Some(_)) => {
            let mut steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
            steps.sort_by(f64::total_cmp);
            let dt = steps[steps.len() / 2];
            if !(dt > 0.0) {
                return Err(load("time column is not increasing".into()));
            }
            1.0 / dt
        }
        (None, None) => return Err(load("a `value`-only file needs fs_hz in the config".into())),
    };
    Signal::new(values, fs).map_err(|e| load(e.to_string()))
}

/// Render a signal as `time_s,value`.
pub fn signal_csv(signal: &Signal) -> CohResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time_s", "value"])?;
    let dt = 1.0 / signal.fs_hz();
    for (i, v) in signal.samples().iter().enumerate() {
        w.write_record([fmt_f64(i as f64 * dt), fmt_f64(*v)])?;
    }
    finish(w)
}

pub fn finish(w: csv::Writer<Vec<u8>>) -> CohResult<Vec<u8>> {
    w.into_inner().map_err(|e| CohError::Io(e.into_error()))
}

pub fn sweep_csv(records: &[SweepRecord]) -> CohResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        w.write_record(
            [r.c_true, r.sigma_n, r.snr_db, r.c_obs, r.p_glm, r.p_circ, r.p_phase, r.f_br_hz]
                .iter()
                .map(|v| fmt_f64(*v)),
        )?;
    }
    finish(w)
}

pub fn read_sweep_csv(path: &Path) -> CohResult<Vec<SweepRecord>> {
    let schema = |msg: String| CohError::Schema(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| schema(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| schema(e.to_string()))?.clone();
    if headers.iter().ne(SWEEP_HEADER) {
        return Err(schema(format!(
            "expected header `{}`, got `{}`",
            SWEEP_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<SweepRecord>() {
        let r = row.map_err(|e| schema(e.to_string()))?;
        let p_ok = |p: f64| p > 0.0 && p <= 1.0;
        if !((0.0..=1.0 + 1e-12).contains(&r.c_obs) && r.sigma_n >= 0.0 && p_ok(r.p_glm) && p_ok(r.p_circ) && p_ok(r.p_phase)) {
            return Err(schema(format!("record {} violates value ranges", out.len() + 1)));
        }
        out.push(r);
    }
    if out.is_empty() {
        return Err(CohError::EmptyInput(format!("{}: no sweep records", path.display())));
    }
    Ok(out)
}

/// Files to be written together.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Write every file; on failure, remove whatever this call already wrote.
    pub fn commit(self) -> CohResult<Vec<PathBuf>> {
        let mut written: Vec<PathBuf> = Vec::new();
        for (path, bytes) in &self.files {
            let res = (|| -> std::io::Result<()> {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                let mut tmp = path.clone().into_os_string();
                tmp.push(".partial");
                fs::write(&tmp, bytes)?;
                fs::rename(&tmp, path)
            })();
            if let Err(e) = res {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e.into());
            }
            written.push(path.clone());
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: usize) -> SweepRecord {
        let c = (i + 1) as f64 / 10.0;
        SweepRecord {
            c_true: c,
            sigma_n: 1.0 / c,
            snr_db: -30.0 + c,
            c_obs: c * 0.99,
            p_glm: 1e-300,
            p_circ: 0.5,
            p_phase: 1.0 / 2001.0,
            f_br_hz: 0.3,
        }
    }

    #[test]
    fn float_text_roundtrips() {
        for v in [0.0, 1.0, 0.3, 1e-300, 2.5e-5, -3.75e20, 123456.789, f64::MIN_POSITIVE, 1.0 / 3.0] {
            let t = fmt_f64(v);
            assert_eq!(t.parse::<f64>().unwrap(), v, "{t}");
            assert!(t.len() < 26, "{t}");
        }
        assert_eq!(fmt_f64(1e-300), "1e-300");
        assert_eq!(fmt_opt(None), "NA");
    }

    #[test]
    fn sweep_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let recs: Vec<_> = (0..5).map(rec).collect();
        let bytes = sweep_csv(&recs).unwrap();
        assert!(String::from_utf8_lossy(&bytes).starts_with("c_true,sigma_n,snr_db,c_obs,p_glm,p_circ,p_phase,f_br_hz\n"));
        fs::write(&path, &bytes).unwrap();
        assert_eq!(read_sweep_csv(&path).unwrap(), recs);
    }

    #[test]
    fn sweep_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_sweep_csv(&bad), Err(CohError::Schema(_))));
        let empty = dir.path().join("empty.csv");
        fs::write(&empty, SWEEP_HEADER.join(",") + "\n").unwrap();
        assert!(matches!(read_sweep_csv(&empty), Err(CohError::EmptyInput(_))));
        let range = dir.path().join("range.csv");
        fs::write(&range, SWEEP_HEADER.join(",") + "\n0.5,1,0,0.5,0,0.5,0.5,0.3\n").unwrap();
        assert!(matches!(read_sweep_csv(&range), Err(CohError::Schema(_))));
    }

    #[test]
    fn signal_formats() {
        let dir = tempfile::tempdir().unwrap();
        let sig = Signal::new(vec![0.5, -1.0, 2.0, 0.25], 4.0).unwrap();
        let p = dir.path().join("sig.csv");
        fs::write(&p, signal_csv(&sig).unwrap()).unwrap();
        let back = read_signal_csv(&p, None).unwrap();
        assert_eq!(back.samples(), sig.samples());
        assert!((back.fs_hz() - 4.0).abs() < 1e-12);

        let v = dir.path().join("v.csv");
        fs::write(&v, "value\n1\n2\n3\n").unwrap();
        assert_eq!(read_signal_csv(&v, Some(10.0)).unwrap().len(), 3);
        assert!(matches!(read_signal_csv(&v, None), Err(CohError::DriverLoad(_))));
        assert!(matches!(read_signal_csv(&dir.path().join("missing.csv"), Some(1.0)), Err(CohError::DriverLoad(_))));
        let junk = dir.path().join("junk.csv");
        fs::write(&junk, "value\n1\nabc\n").unwrap();
        assert!(matches!(read_signal_csv(&junk, Some(1.0)), Err(CohError::DriverLoad(_))));
    }

    #[test]
    fn output_set_commits_all() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new();
        out.add(dir.path().join("a/x.csv"), b"1\n".to_vec());
        out.add(dir.path().join("y.csv"), b"2\n".to_vec());
        let written = out.commit().unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(fs::read(dir.path().join("a/x.csv")).unwrap(), b"1\n");
        assert!(!dir.path().join("y.csv.partial").exists());
    }
}
