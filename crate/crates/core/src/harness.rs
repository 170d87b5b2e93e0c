//! Seeded Monte-Carlo trials, parameter sweeps and result export.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amdd::amdd_estimate;
use crate::channel::{derive_effective, sample_channels, BlockErrors, EffectiveChannels, IqParams};
use crate::config::{dbm_to_watts, ExperimentConfig, RunConfig, SystemConfig};
use crate::crb::{pilot_crb, semiblind_crb};
use crate::detect::{ml_detect, Alphabet};
use crate::ecm::ecm_estimate;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::pilot_est::pilot_estimate;
use crate::pilots::PilotPlan;
use crate::synth::{synth_data, synth_training, DataSignals};

/// SplitMix64 output function; a bijection on `u64`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at grid point `point`. Distinct `(point, trial)`
/// pairs (each below 2³²) always receive distinct seeds.
pub fn trial_seed(seed: u64, point: u32, trial: u32) -> u64 {
    let key = ((point as u64) << 32) | trial as u64;
    splitmix64(key ^ splitmix64(seed))
}

/// Independent random streams of one trial.
#[derive(Clone, Copy)]
enum Stream {
    Channel = 1,
    Iq = 2,
    Training = 3,
    Data = 4,
    SerBlock = 5,
}

fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

/// Symbol errors of one detector on the held-out block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymbolErrors {
    pub lu: usize,
    pub tag: usize,
}

/// Symbol errors of every detector on the held-out block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SerCounts {
    pub pilot: SymbolErrors,
    pub amdd: Option<SymbolErrors>,
    pub ecm: Option<SymbolErrors>,
    pub genie: SymbolErrors,
    /// LU symbols in the block; tag symbols are `slots·K`.
    pub slots: usize,
    pub tags: usize,
}

/// Outcome of one full pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    /// `‖θ‖²` of the drawn channels.
    pub theta_norm2: f64,
    pub pilot: BlockErrors,
    pub amdd: Option<BlockErrors>,
    pub ecm: Option<BlockErrors>,
    /// `‖θ̂ − θ‖²` after each ECM iteration, starting with the initial point.
    pub ecm_trace: Vec<f64>,
    pub pcrb: f64,
    pub sbcrb: f64,
    pub ser: Option<SerCounts>,
    /// Effective noise level `σ̃²` of the drawn receive chain.
    pub sigma2: f64,
}

fn symbol_errors(z: &DataSignals, est: &EffectiveChannels, alphabet: &Alphabet) -> SymbolErrors {
    let det = ml_detect(&z.z, &z.c, est, alphabet);
    let (lu, tags) = det.errors(&z.x_idx, &z.d_idx);
    SymbolErrors {
        lu,
        tag: tags.iter().sum(),
    }
}

/// Runs one trial. The result depends only on `(cfg, opts, seed)`.
pub fn run_trial(cfg: &SystemConfig, opts: &RunConfig, seed: u64) -> Result<TrialResult> {
    let plan = PilotPlan::build(cfg)?;
    let alphabet = Alphabet::of(cfg);
    let phys = sample_channels(cfg, &mut stream(seed, Stream::Channel))?;
    let iq = IqParams::sample(&cfg.iq, &mut stream(seed, Stream::Iq));
    let truth = derive_effective(&phys, &iq);
    let sigma2 = cfg.noise_power * iq.noise_gain();

    let sig = synth_training(cfg, &truth, &iq, &plan, &mut stream(seed, Stream::Training));
    let data = synth_data(cfg, &truth, &iq, cfg.block_len, &mut stream(seed, Stream::Data));

    let pilot = pilot_estimate(&sig, &plan)?;
    let amdd = if opts.run_amdd {
        Some(amdd_estimate(&sig, &data.z, &data.c, &plan, &alphabet)?.estimate)
    } else {
        None
    };
    let ecm = if opts.run_ecm {
        Some(ecm_estimate(
            &sig,
            &data.z,
            &data.c,
            &plan,
            &alphabet,
            &pilot.channels,
            cfg.ecm_iterations,
            sigma2,
        )?)
    } else {
        None
    };

    let ser = if opts.measure_ser {
        let block = synth_data(cfg, &truth, &iq, cfg.ser_block_len, &mut stream(seed, Stream::SerBlock));
        Some(SerCounts {
            pilot: symbol_errors(&block, &pilot.channels, &alphabet),
            amdd: amdd.as_ref().map(|e| symbol_errors(&block, &e.channels, &alphabet)),
            ecm: ecm.as_ref().map(|e| symbol_errors(&block, &e.estimate.channels, &alphabet)),
            genie: symbol_errors(&block, &truth, &alphabet),
            slots: cfg.ser_block_len,
            tags: cfg.tags,
        })
    } else {
        None
    };

    Ok(TrialResult {
        seed,
        theta_norm2: truth.theta.norm_squared(),
        pilot: pilot.channels.block_errors(&truth),
        amdd: amdd.map(|e| e.channels.block_errors(&truth)),
        ecm_trace: ecm
            .as_ref()
            .map(|e| e.iterates.iter().map(|it| it.sq_error(&truth)).collect())
            .unwrap_or_default(),
        ecm: ecm.map(|e| e.estimate.channels.block_errors(&truth)),
        pcrb: pilot_crb(&plan, sigma2)?,
        sbcrb: semiblind_crb(&plan, &data.c, &alphabet, sigma2)?,
        ser,
        sigma2,
    })
}

/// Runs one trial and reports its wall-clock time next to the result.
pub fn run_trial_timed(cfg: &SystemConfig, opts: &RunConfig, seed: u64) -> Result<(TrialResult, Duration)> {
    let start = Instant::now();
    let r = run_trial(cfg, opts, seed)?;
    Ok((r, start.elapsed()))
}

/// The swept variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Transmit power in dBm.
    Pt,
    /// Data block length.
    Data,
    /// ECM iteration index.
    Iters,
    /// Number of tags.
    Tags,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Pt => "pt",
            SweepKind::Data => "data",
            SweepKind::Iters => "iters",
            SweepKind::Tags => "tags",
        }
    }

    /// Grid of this sweep as configured.
    pub fn grid(self, cfg: &ExperimentConfig) -> Vec<f64> {
        match self {
            SweepKind::Pt => cfg.sweep.transmit_power_dbm.clone(),
            SweepKind::Data => cfg.sweep.block_len.iter().map(|&d| d as f64).collect(),
            SweepKind::Iters => (0..=cfg.system.ecm_iterations).map(|i| i as f64).collect(),
            SweepKind::Tags => cfg.sweep.tags.iter().map(|&k| k as f64).collect(),
        }
    }

    /// System configuration at grid value `x`.
    pub fn apply(self, base: &SystemConfig, x: f64) -> SystemConfig {
        let mut cfg = base.clone();
        match self {
            SweepKind::Pt => cfg.transmit_power = dbm_to_watts(x),
            SweepKind::Data => cfg.block_len = x as usize,
            SweepKind::Iters => {}
            SweepKind::Tags => cfg.tags = x as usize,
        }
        cfg
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pt" => Ok(SweepKind::Pt),
            "data" => Ok(SweepKind::Data),
            "iters" => Ok(SweepKind::Iters),
            "tags" => Ok(SweepKind::Tags),
            _ => Err(Error::Config(format!("unknown sweep '{s}' (expected pt, data, iters or tags)"))),
        }
    }
}

/// Curves in a sweep, in export order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    Pilot,
    Amdd,
    Ecm,
    Pcrb,
    Sbcrb,
    Genie,
}

impl Series {
    pub const ALL: [Series; 6] = [Series::Pilot, Series::Amdd, Series::Ecm, Series::Pcrb, Series::Sbcrb, Series::Genie];

    pub fn name(self) -> &'static str {
        match self {
            Series::Pilot => "pilot",
            Series::Amdd => "amdd",
            Series::Ecm => "ecm",
            Series::Pcrb => "pcrb",
            Series::Sbcrb => "sbcrb",
            Series::Genie => "genie",
        }
    }

    pub fn parse(s: &str) -> Option<Series> {
        Series::ALL.into_iter().find(|x| x.name() == s)
    }
}

/// One CSV row: a series at a grid point. Missing fields do not apply.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub x: f64,
    pub series: Series,
    pub mse: Option<f64>,
    pub ser_lu: Option<f64>,
    pub ser_tag: Option<f64>,
    pub trials: usize,
}

/// Trial-averaged results at one grid point.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointSummary {
    pub x: f64,
    pub trials: usize,
    pub pilot: BlockErrors,
    pub amdd: Option<BlockErrors>,
    pub ecm: Option<BlockErrors>,
    pub ecm_trace: Vec<f64>,
    pub pcrb: f64,
    pub sbcrb: f64,
    /// `(lu, tag)` symbol error rates per detector.
    pub ser: Option<[(f64, f64); 4]>,
}

impl PointSummary {
    /// Mean over trials, summed in trial order.
    pub fn aggregate(x: f64, trials: &[TrialResult]) -> Self {
        let n = trials.len() as f64;
        let mean_blocks = |f: &dyn Fn(&TrialResult) -> Option<BlockErrors>| -> Option<BlockErrors> {
            let mut acc = BlockErrors::default();
            for t in trials {
                acc.add(&f(t)?);
            }
            acc.scale(1.0 / n);
            Some(acc)
        };
        let mut trace = vec![0.0; trials.first().map_or(0, |t| t.ecm_trace.len())];
        for t in trials {
            for (a, v) in trace.iter_mut().zip(&t.ecm_trace) {
                *a += v / n;
            }
        }
        let ser = trials.iter().map(|t| t.ser).collect::<Option<Vec<_>>>().and_then(|s| {
            let lu_total: usize = s.iter().map(|c| c.slots).sum();
            let tag_total: usize = s.iter().map(|c| c.slots * c.tags).sum();
            let rate = |f: &dyn Fn(&SerCounts) -> Option<SymbolErrors>| -> Option<(f64, f64)> {
                let mut lu = 0;
                let mut tag = 0;
                for c in &s {
                    let e = f(c)?;
                    lu += e.lu;
                    tag += e.tag;
                }
                Some((lu as f64 / lu_total.max(1) as f64, tag as f64 / tag_total.max(1) as f64))
            };
            let nan = (f64::NAN, f64::NAN);
            Some([
                rate(&|c| Some(c.pilot)).unwrap_or(nan),
                rate(&|c| c.amdd).unwrap_or(nan),
                rate(&|c| c.ecm).unwrap_or(nan),
                rate(&|c| Some(c.genie)).unwrap_or(nan),
            ])
        });
        PointSummary {
            x,
            trials: trials.len(),
            pilot: mean_blocks(&|t| Some(t.pilot)).unwrap_or_default(),
            amdd: mean_blocks(&|t| t.amdd),
            ecm: mean_blocks(&|t| t.ecm),
            ecm_trace: trace,
            pcrb: trials.iter().map(|t| t.pcrb).sum::<f64>() / n,
            sbcrb: trials.iter().map(|t| t.sbcrb).sum::<f64>() / n,
            ser,
        }
    }

    fn ser_of(&self, i: usize) -> (Option<f64>, Option<f64>) {
        match self.ser {
            Some(s) if !s[i].0.is_nan() => (Some(s[i].0), Some(s[i].1)),
            _ => (None, None),
        }
    }

    /// Rows of this point in series order. For an iteration sweep, `ecm`
    /// reports the trace entry at index `x`.
    pub fn rows(&self, kind: SweepKind) -> Vec<SeriesRow> {
        let row = |series, mse, (ser_lu, ser_tag): (Option<f64>, Option<f64>)| SeriesRow {
            x: self.x,
            series,
            mse,
            ser_lu,
            ser_tag,
            trials: self.trials,
        };
        let ecm_mse = match kind {
            SweepKind::Iters => self.ecm_trace.get(self.x as usize).copied(),
            _ => self.ecm.map(|e| e.total()),
        };
        let mut out = vec![row(Series::Pilot, Some(self.pilot.total()), self.ser_of(0))];
        if let Some(a) = self.amdd {
            out.push(row(Series::Amdd, Some(a.total()), self.ser_of(1)));
        }
        if ecm_mse.is_some() {
            out.push(row(Series::Ecm, ecm_mse, self.ser_of(2)));
        }
        out.push(row(Series::Pcrb, Some(self.pcrb), (None, None)));
        out.push(row(Series::Sbcrb, Some(self.sbcrb), (None, None)));
        if self.ser.is_some() {
            out.push(row(Series::Genie, None, self.ser_of(3)));
        }
        out
    }
}

/// A completed sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub points: Vec<PointSummary>,
    pub trials: usize,
    pub seed: u64,
    pub config: ExperimentConfig,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SeriesRow> {
        self.points.iter().flat_map(|p| p.rows(self.kind)).collect()
    }

    /// Stable hex digest of the configuration, for matching outputs to inputs.
    pub fn fingerprint(&self) -> String {
        config_fingerprint(&self.config)
    }
}

/// FNV-1a over the canonical JSON form of the configuration.
pub fn config_fingerprint(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(cfg).unwrap_or_default();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn check_grid(kind: SweepKind, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{kind} sweep has an empty grid")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{kind} sweep grid must be strictly increasing")));
    }
    Ok(())
}

/// Runs `trials` seeded trials at every grid point. Trials run on a pool of
/// `threads` workers (0 for the rayon default); results are reduced in trial
/// order, so output does not depend on the worker count.
pub fn run_sweep(cfg: &ExperimentConfig, kind: SweepKind, grid: &[f64], trials: usize, seed: u64, threads: usize) -> Result<SweepResult> {
    check_grid(kind, grid)?;
    if trials == 0 {
        return Err(Error::Config("trial count must be positive".into()));
    }
    let mut opts = cfg.run.clone();
    if kind == SweepKind::Iters {
        opts.run_ecm = true;
    }
    let points_cfg: Vec<SystemConfig> = match kind {
        // one set of trials serves every iteration index
        SweepKind::Iters => vec![cfg.system.clone()],
        _ => grid.iter().map(|&x| kind.apply(&cfg.system, x)).collect(),
    };
    for c in &points_cfg {
        c.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut per_point = Vec::with_capacity(points_cfg.len());
    for (p, sys) in points_cfg.iter().enumerate() {
        let results: Vec<Result<TrialResult>> = pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|t| {
                    run_trial(sys, &opts, trial_seed(seed, p as u32, t as u32))
                        .map_err(|e| Error::Trial { trial: t, source: Box::new(e) })
                })
                .collect()
        });
        per_point.push(results.into_iter().collect::<Result<Vec<_>>>()?);
    }
    let points = match kind {
        SweepKind::Iters => grid.iter().map(|&x| PointSummary::aggregate(x, &per_point[0])).collect(),
        _ => grid.iter().zip(&per_point).map(|(&x, t)| PointSummary::aggregate(x, t)).collect(),
    };
    Ok(SweepResult {
        kind,
        grid: grid.to_vec(),
        points,
        trials,
        seed,
        config: cfg.clone(),
    })
}

/// Pilot-only and semi-blind bounds over the configured transmit-power grid.
///
/// Point `p` uses the I/Q draw and AP data symbols of trial 0 of a `pt`
/// sweep with the same seed, so the values match that sweep's first trial.
pub fn bound_curve(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<SeriesRow>> {
    let grid = &cfg.sweep.transmit_power_dbm;
    check_grid(SweepKind::Pt, grid)?;
    let mut rows = Vec::with_capacity(2 * grid.len());
    for (p, &x) in grid.iter().enumerate() {
        let sys = SweepKind::Pt.apply(&cfg.system, x);
        sys.validate()?;
        let s = trial_seed(seed, p as u32, 0);
        let plan = PilotPlan::build(&sys)?;
        let alphabet = Alphabet::of(&sys);
        let phys = sample_channels(&sys, &mut stream(s, Stream::Channel))?;
        let iq = IqParams::sample(&sys.iq, &mut stream(s, Stream::Iq));
        let truth = derive_effective(&phys, &iq);
        let data = synth_data(&sys, &truth, &iq, sys.block_len, &mut stream(s, Stream::Data));
        let sigma2 = sys.noise_power * iq.noise_gain();
        for (series, v) in [
            (Series::Pcrb, pilot_crb(&plan, sigma2)?),
            (Series::Sbcrb, semiblind_crb(&plan, &data.c, &alphabet, sigma2)?),
        ] {
            rows.push(SeriesRow {
                x,
                series,
                mse: Some(v),
                ser_lu: None,
                ser_tag: None,
                trials: 1,
            });
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: [&str; 6] = ["x", "series", "mse", "ser_lu", "ser_tag", "trials"];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// JSON sidecar written next to the CSV.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub sweep: SweepKind,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub config: ExperimentConfig,
}

/// Output paths of [`export_results`].
#[derive(Debug, Clone)]
pub struct ExportPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// Writes `<dir>/<kind>.csv` and `<dir>/<kind>.json`.
pub fn export_results(result: &SweepResult, dir: &Path) -> Result<ExportPaths> {
    if result.points.is_empty() {
        return Err(Error::Config("refusing to export an empty sweep".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{}.csv", result.kind));
    let json_path = dir.join(format!("{}.json", result.kind));

    write_csv(&csv_path, &result.rows())?;

    let side = Sidecar {
        sweep: result.kind,
        grid: result.grid.clone(),
        trials: result.trials,
        seed: result.seed,
        fingerprint: result.fingerprint(),
        config: result.config.clone(),
    };
    let text = serde_json::to_string_pretty(&side).map_err(|e| Error::Format {
        path: json_path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(ExportPaths {
        csv: csv_path,
        json: json_path,
    })
}

/// Writes rows under [`CSV_HEADER`].
pub fn write_csv(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            format!("{}", r.x),
            r.series.name().to_string(),
            fmt_opt(r.mse),
            fmt_opt(r.ser_lu),
            fmt_opt(r.ser_tag),
            r.trials.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Parses a CSV written by [`export_results`].
pub fn read_csv(path: &Path) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header {:?}", header),
        });
    }
    let bad = |m: String| Error::Format {
        path: path.to_path_buf(),
        message: m,
    };
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad(format!("not a number: '{s}'")))
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        rows.push(SeriesRow {
            x: num(&rec[0])?.ok_or_else(|| bad("missing x".into()))?,
            series: Series::parse(&rec[1]).ok_or_else(|| bad(format!("unknown series '{}'", &rec[1])))?,
            mse: num(&rec[2])?,
            ser_lu: num(&rec[3])?,
            ser_tag: num(&rec[4])?,
            trials: rec[5].parse().map_err(|_| bad(format!("bad trial count '{}'", &rec[5])))?,
        });
    }
    Ok(rows)
}

const DUMP_MAGIC: &[u8; 8] = b"AMBCDUMP";

/// Writes a complex matrix as: the 8-byte magic `AMBCDUMP`, rows and columns
/// as little-endian `u64`, then every entry in column-major order as a
/// little-endian `f64` real part followed by its imaginary part.
pub fn write_dump(path: &Path, m: &CMat) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + 16 * m.len());
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_dump(path: &Path) -> Result<CMat> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Format {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    if bytes.len() < 24 || &bytes[..8] != DUMP_MAGIC {
        return Err(bad("not a matrix dump"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (rows, cols) = (word(8) as usize, word(16) as usize);
    if bytes.len() != 24 + 16 * rows * cols {
        return Err(bad("truncated matrix dump"));
    }
    let f = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let data: Vec<C64> = (0..rows * cols).map(|i| C64::new(f(24 + 16 * i), f(32 + 16 * i))).collect();
    Ok(CMat::from_vec(rows, cols, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference generator seeded with 0
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn sweep_names_round_trip() {
        for k in [SweepKind::Pt, SweepKind::Data, SweepKind::Iters, SweepKind::Tags] {
            assert_eq!(k.name().parse::<SweepKind>().unwrap(), k);
        }
        assert!("power".parse::<SweepKind>().is_err());
    }
}
