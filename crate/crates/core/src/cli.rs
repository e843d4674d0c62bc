//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad configuration or input.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{agreement_pairs, power_curve_by, roc, welch_psd, PowerCurve, RocResult, TestMethod};
use crate::bench::{run_bench, BenchReport};
use crate::coherence::coherence;
use crate::config::RunConfig;
use crate::decompose::{BandRep, Decomposer, Signal};
use crate::error::{CohError, CohResult};
use crate::glm::glm_spectrum;
use crate::io::{finish, fmt_f64, fmt_opt, read_signal_csv, read_sweep_csv, sweep_csv, OutputSet};
use crate::par::{set_thread_count, Execution};
use crate::sim::{run_sweep, SweepContext};
use crate::surrogate::{surrogate_spectrum, SurrogateConfig, SurrogateMethod};

#[derive(Debug, Parser)]
#[command(name = "cohglm", version, about = "Coherence significance: complex GLM vs surrogate tests")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the parallel paths.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub nperm: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the coherence sweep; writes sweep.csv and sweep_control.csv.
    Simulate,
    /// Test every band of a recorded pair; writes test.csv and psd.csv.
    Test {
        driver_csv: PathBuf,
        observation_csv: PathBuf,
    },
    /// Detection power per coherence bin; writes power_curve.csv and power_thresholds.csv.
    Power {
        /// Defaults to <out>/sweep.csv.
        sweep_csv: Option<PathBuf>,
    },
    /// ROC of the peak band against the control band; writes roc.csv.
    Roc {
        sweep_csv: Option<PathBuf>,
        /// Defaults to sweep_control.csv next to the sweep file.
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// GLM vs phase-randomization evidence; writes agreement.csv.
    Agreement { sweep_csv: Option<PathBuf> },
    /// Time the three tests; writes bench.csv, bench_summary.csv and bench_meta.csv.
    Bench,
}

/// Exit code for an error: 2 for configuration and input problems, 1 otherwise.
pub fn exit_code(err: &CohError) -> i32 {
    match err {
        CohError::Config(_)
        | CohError::Schema(_)
        | CohError::DriverLoad(_)
        | CohError::EmptyInput(_)
        | CohError::InsufficientData(_) => 2,
        _ => 1,
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_config(g: &GlobalArgs) -> CohResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(n) = g.nperm {
        cfg.surrogate.n_perm = n;
    }
    if let Some(a) = g.alpha {
        cfg.analysis.alpha = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> CohResult<Vec<PathBuf>> {
    let cfg = resolve_config(&cli.global)?;
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(CohError::Config("--threads must be at least 1".into()));
        }
        // the global pool can be built once per process; later calls keep it
        let _ = set_thread_count(t);
    }
    println!("seed: {}", cfg.seed);
    let out = cfg.output_dir.clone();
    let files = match &cli.command {
        Command::Simulate => cmd_simulate(&cfg)?,
        Command::Test { driver_csv, observation_csv } => cmd_test(&cfg, driver_csv, observation_csv)?,
        Command::Power { sweep_csv } => cmd_power(&cfg, &sweep_path(&out, sweep_csv))?,
        Command::Roc { sweep_csv, control } => {
            let sweep = sweep_path(&out, sweep_csv);
            let control = control.clone().unwrap_or_else(|| sweep.with_file_name("sweep_control.csv"));
            cmd_roc(&cfg, &sweep, &control)?
        }
        Command::Agreement { sweep_csv } => cmd_agreement(&cfg, &sweep_path(&out, sweep_csv))?,
        Command::Bench => cmd_bench(&cfg)?,
    };
    files.commit()
}

fn sweep_path(out: &Path, given: &Option<PathBuf>) -> PathBuf {
    given.clone().unwrap_or_else(|| out.join("sweep.csv"))
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn tensor_csv(reps: &[&BandRep]) -> CohResult<Vec<u8>> {
    let mut w = writer();
    w.write_record(["target", "t", "band_hz", "re", "im"])?;
    for (i, rep) in reps.iter().enumerate() {
        for (k, band) in rep.bands().iter().enumerate() {
            let f = fmt_f64(rep.band_centers_hz()[k]);
            for (t, c) in band.iter().enumerate() {
                w.write_record([i.to_string(), t.to_string(), f.clone(), fmt_f64(c.re), fmt_f64(c.im)])?;
            }
        }
    }
    finish(w)
}

pub fn cmd_simulate(cfg: &RunConfig) -> CohResult<OutputSet> {
    let out = run_sweep(&cfg.driver, &cfg.sweep_config())?;
    let dir = &cfg.output_dir;
    let mut files = OutputSet::new();
    files.add(dir.join("sweep.csv"), sweep_csv(&out.records)?);
    if let Some(ctl) = &out.control_records {
        files.add(dir.join("sweep_control.csv"), sweep_csv(ctl)?);
    }
    if let (Some(ax), Some(ay)) = (&out.ax, &out.ay) {
        files.add(dir.join("tensor_x.csv"), tensor_csv(&[ax])?);
        files.add(dir.join("tensor_y.csv"), tensor_csv(&ay.iter().collect::<Vec<_>>())?);
    }
    Ok(files)
}

/// `time_s,value` files carry their own rate (snapped to the configured one
/// when they agree to 1e-6); `value` files use the configured rate.
fn read_with_rate(path: &Path, fs_hz: f64) -> CohResult<Signal> {
    match read_signal_csv(path, None) {
        Ok(s) if ((s.fs_hz() - fs_hz) / fs_hz).abs() < 1e-6 => Signal::new(s.into_samples(), fs_hz),
        Ok(s) => Ok(s),
        Err(_) => read_signal_csv(path, Some(fs_hz)),
    }
}

fn load_pair(cfg: &RunConfig, driver: &Path, observation: &Path) -> CohResult<(Signal, Signal)> {
    let x = read_with_rate(driver, cfg.driver.fs_hz)?;
    let y = read_with_rate(observation, cfg.driver.fs_hz)?;
    if x.len() != y.len() || x.fs_hz() != y.fs_hz() {
        return Err(CohError::DriverLoad(format!(
            "driver and observation differ: {} vs {} samples at {} vs {} Hz",
            x.len(),
            y.len(),
            x.fs_hz(),
            y.fs_hz()
        )));
    }
    Ok((x, y))
}

pub fn cmd_test(cfg: &RunConfig, driver: &Path, observation: &Path) -> CohResult<OutputSet> {
    let (x, y) = load_pair(cfg, driver, observation)?;
    let d = Decomposer::new(cfg.bands, x.fs_hz(), x.len())?;
    let ax = d.decompose(&x)?;
    let ay = d.decompose(&y)?;
    let coh = coherence(&ax, &ay)?;
    let glm = glm_spectrum(&ax, &ay)?;
    let surr = |method| {
        let s = SurrogateConfig { rule: cfg.surrogate.rule, ..SurrogateConfig::new(method, cfg.surrogate.n_perm, cfg.seed) };
        surrogate_spectrum(&ax, &ay, &s)
    };
    let circ = surr(SurrogateMethod::CircularShift)?;
    let phase = surr(SurrogateMethod::PhaseRandomize)?;

    let mut w = writer();
    w.write_record(["band_hz", "c_obs", "p_glm", "p_circ", "p_phase"])?;
    for k in 0..ax.n_bands() {
        w.write_record([
            fmt_f64(ax.band_centers_hz()[k]),
            fmt_f64(coh.values[k]),
            fmt_f64(glm[k].p_value),
            fmt_f64(circ[k].p_value),
            fmt_f64(phase[k].p_value),
        ])?;
    }
    let mut files = OutputSet::new();
    files.add(cfg.output_dir.join("test.csv"), finish(w)?);

    let seg = cfg.analysis.psd_segment_s.min(x.duration_s());
    let (freqs, px) = welch_psd(&x, seg, cfg.analysis.psd_overlap)?;
    let (_, py) = welch_psd(&y, seg, cfg.analysis.psd_overlap)?;
    let mut w = writer();
    w.write_record(["freq_hz", "psd_x", "psd_y"])?;
    for ((f, a), b) in freqs.iter().zip(&px).zip(&py) {
        w.write_record([fmt_f64(*f), fmt_f64(*a), fmt_f64(*b)])?;
    }
    files.add(cfg.output_dir.join("psd.csv"), finish(w)?);
    Ok(files)
}

fn power_csvs(pc: &PowerCurve) -> CohResult<(Vec<u8>, Vec<u8>)> {
    let mut w = writer();
    w.write_record(["method", "bin_center", "n_records", "detection_rate"])?;
    for m in &pc.methods {
        for ((c, n), r) in pc.bin_centers.iter().zip(&pc.counts).zip(&m.detection_rate) {
            w.write_record([m.method.name().to_string(), fmt_f64(*c), n.to_string(), fmt_f64(*r)])?;
        }
    }
    let curve = finish(w)?;
    let mut w = writer();
    w.write_record(["method", "axis", "alpha", "c50", "c80", "c90", "snr_at_80_db"])?;
    for m in &pc.methods {
        w.write_record([
            m.method.name().to_string(),
            pc.axis.name().to_string(),
            fmt_f64(pc.alpha),
            fmt_opt(m.c50),
            fmt_opt(m.c80),
            fmt_opt(m.c90),
            fmt_opt(m.snr_at_80_db),
        ])?;
    }
    Ok((curve, finish(w)?))
}

pub fn cmd_power(cfg: &RunConfig, sweep: &Path) -> CohResult<OutputSet> {
    let records = read_sweep_csv(sweep)?;
    let pc = power_curve_by(&records, cfg.analysis.alpha, cfg.analysis.bin_width, cfg.analysis.axis)?;
    let (curve, thresholds) = power_csvs(&pc)?;
    let mut files = OutputSet::new();
    files.add(cfg.output_dir.join("power_curve.csv"), curve);
    files.add(cfg.output_dir.join("power_thresholds.csv"), thresholds);
    Ok(files)
}

fn roc_csv(curves: &[(TestMethod, RocResult)]) -> CohResult<Vec<u8>> {
    let mut w = writer();
    w.write_record(["method", "threshold", "fpr", "tpr", "auc", "control_freq_hz"])?;
    for (m, r) in curves {
        for i in 0..r.fpr.len() {
            w.write_record([
                m.name().to_string(),
                fmt_f64(r.thresholds[i]),
                fmt_f64(r.fpr[i]),
                fmt_f64(r.tpr[i]),
                fmt_f64(r.auc),
                fmt_f64(r.control_freq_hz),
            ])?;
        }
    }
    finish(w)
}

pub fn cmd_roc(cfg: &RunConfig, sweep: &Path, control: &Path) -> CohResult<OutputSet> {
    let pos = read_sweep_csv(sweep)?;
    let neg = read_sweep_csv(control)?;
    if pos.len() < 2 || neg.len() < 2 {
        return Err(CohError::InsufficientData("ROC needs at least 2 records per class".into()));
    }
    let control_freq = neg[0].f_br_hz;
    let curves = TestMethod::ALL
        .iter()
        .map(|&m| {
            let p: Vec<f64> = pos.iter().map(|r| m.p_value(r)).collect();
            let n: Vec<f64> = neg.iter().map(|r| m.p_value(r)).collect();
            Ok((m, roc(&p, &n, control_freq)?))
        })
        .collect::<CohResult<Vec<_>>>()?;
    let mut files = OutputSet::new();
    files.add(cfg.output_dir.join("roc.csv"), roc_csv(&curves)?);
    Ok(files)
}

pub fn cmd_agreement(cfg: &RunConfig, sweep: &Path) -> CohResult<OutputSet> {
    let records = read_sweep_csv(sweep)?;
    let pairs = agreement_pairs(&records, cfg.surrogate.n_perm)?;
    let mut w = writer();
    w.write_record(["neg_log10_p_glm", "neg_log10_p_phase", "c_obs"])?;
    for p in pairs {
        w.write_record([fmt_f64(p.neg_log10_p_glm), fmt_f64(p.neg_log10_p_phase), fmt_f64(p.c_obs)])?;
    }
    let mut files = OutputSet::new();
    files.add(cfg.output_dir.join("agreement.csv"), finish(w)?);
    Ok(files)
}

/// `count` indices spread evenly over `0..len`.
pub fn subsample_indices(len: usize, count: usize) -> Vec<usize> {
    let count = count.min(len);
    (0..count).map(|i| i * len / count).collect()
}

/// Driver and the subsampled observations used by the benchmark.
pub fn bench_inputs(cfg: &RunConfig) -> CohResult<(BandRep, Vec<BandRep>)> {
    let grid = cfg.c_true_grid();
    let ctx = SweepContext::new(&cfg.driver, &cfg.bands, cfg.seed)?;
    let idx = subsample_indices(grid.len(), cfg.bench.n_coh_sub);
    let ay = Execution::default()
        .map_indexed(idx.len(), |j| ctx.observation_rep(idx[j], grid[idx[j]]))
        .into_iter()
        .collect::<CohResult<Vec<_>>>()?;
    Ok((ctx.ax, ay))
}

fn bench_csvs(report: &BenchReport) -> CohResult<[Vec<u8>; 3]> {
    let mut w = writer();
    w.write_record(["method", "n_perm", "repeat", "seconds"])?;
    for s in &report.samples {
        w.write_record([s.method.name().to_string(), s.n_perm.to_string(), s.repeat.to_string(), fmt_f64(s.seconds)])?;
    }
    let samples = finish(w)?;

    let mut w = writer();
    w.write_record(["method", "setting_n_perm", "n_perm", "median_s", "std_s", "speedup", "wilcoxon_p", "ttest_p"])?;
    for r in &report.summary {
        let n_perm = if r.method == TestMethod::Glm { "NA".to_string() } else { r.setting_n_perm.to_string() };
        w.write_record([
            r.method.name().to_string(),
            r.setting_n_perm.to_string(),
            n_perm,
            fmt_f64(r.median_s),
            fmt_f64(r.std_s),
            fmt_f64(r.speedup),
            fmt_opt(r.wilcoxon_p),
            fmt_opt(r.ttest_p),
        ])?;
    }
    let summary = finish(w)?;

    let mut w = writer();
    w.write_record(["key", "value"])?;
    w.write_record(["input_sha256", report.input_checksum.as_str()])?;
    w.write_record(["threads", report.threads.to_string().as_str()])?;
    for (m, n, d) in &report.output_digests {
        w.write_record([format!("pvalues_sha256_{}_{n}", m.name()).as_str(), d.as_str()])?;
    }
    Ok([samples, summary, finish(w)?])
}

pub fn cmd_bench(cfg: &RunConfig) -> CohResult<OutputSet> {
    let (ax, ay) = bench_inputs(cfg)?;
    let report = run_bench(&ax, &ay, &cfg.bench, cfg.seed)?;
    let [samples, summary, meta] = bench_csvs(&report)?;
    let mut files = OutputSet::new();
    files.add(cfg.output_dir.join("bench.csv"), samples);
    files.add(cfg.output_dir.join("bench_summary.csv"), summary);
    files.add(cfg.output_dir.join("bench_meta.csv"), meta);
    Ok(files)
}
