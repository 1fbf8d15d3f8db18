//! Command-line front end.
//!
//! Exit codes: 0 clean, 1 a self-test flagged a fault, 2 usage or input
//! error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::array::{ArrayConfig, FaultSite, RegClass, SparsityMode, SystolicArray};
use crate::campaign::{self, CampaignOptions};
use crate::driver::{self, CycleStats, Layer, Workload};
use crate::error::{Error, Result};
use crate::io;
use crate::selftest;
use crate::sparsity::{densify, pack_tile};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_DETECTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sta-selftest", version, about = "Sparse systolic tensor array self-test simulator")]
pub struct Cli {
    #[command(flatten)]
    pub array: ArrayArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Array and run parameters. Flags override values from `--config`.
#[derive(Debug, Default, Args)]
pub struct ArrayArgs {
    /// Flat key=value config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rows: Option<usize>,
    #[arg(long, global = true)]
    pub cols: Option<usize>,
    /// Activation block length M
    #[arg(short = 'm', long = "m", global = true)]
    pub m: Option<usize>,
    /// Weight slots per TPE N
    #[arg(short = 'n', long = "n", global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub data_width: Option<u32>,
    #[arg(long, global = true)]
    pub acc_width: Option<u32>,
    /// Sparsity mode, e.g. 2:4 or 1:4
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prune a dense matrix to N:M and write the packed tile as JSON
    Prune {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the pruned dense matrix as CSV
        #[arg(long)]
        dense_out: Option<PathBuf>,
    },
    /// Tiled A x W on the simulated array
    Matmul {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        w: PathBuf,
        /// on | off
        #[arg(long)]
        testing: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        reports: Option<PathBuf>,
        /// class:row:col:element:bit:stuck (repeatable)
        #[arg(long = "fault")]
        faults: Vec<String>,
    },
    /// Load the tiles of W and run one self-test session per tile
    Selftest {
        #[arg(long)]
        w: PathBuf,
        #[arg(long = "fault")]
        faults: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Exhaustive single stuck-at campaign
    Campaign {
        /// Weight matrix whose tiles form the workload
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Number of synthetic tiles when no weights are given
        #[arg(long, default_value_t = 10)]
        tiles: usize,
        /// Restrict to register classes (comma separated)
        #[arg(long, value_delimiter = ',')]
        classes: Vec<String>,
        /// Random activation matrices per tile for the harmlessness check
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
}

/// Resolved run parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub array: ArrayConfig,
    pub seed: u64,
    pub testing: bool,
    pub output: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub curve: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            array: ArrayConfig::default(),
            seed: 0,
            testing: true,
            output: None,
            stats: None,
            curve: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("`{key}` expects a number, got `{v}`")))
}

fn parse_switch(v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => Err(Error::Parse(format!("expected on/off, got `{other}`"))),
    }
}

/// Maps `a:b` onto the slot mode of a config with `n` slots and block `m`.
fn parse_mode(text: &str, m: usize, n: usize) -> Result<SparsityMode> {
    let bad = || Error::Config(format!("mode `{text}` does not fit n = {n}, m = {m}"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let a: usize = parse_num("mode", a.trim())?;
    let b: usize = parse_num("mode", b.trim())?;
    if b != m {
        return Err(bad());
    }
    if a == n {
        Ok(SparsityMode::Full)
    } else if a == 1 {
        Ok(SparsityMode::Single)
    } else {
        Err(bad())
    }
}

impl RunConfig {
    /// Config file first, then flags.
    pub fn resolve(args: &ArrayArgs) -> Result<Self> {
        let mut rc = RunConfig::default();
        let mut mode: Option<String> = None;
        if let Some(path) = &args.config {
            let text = fs::read_to_string(path)?;
            rc.apply_text(&text, &mut mode)?;
        }
        let a = &mut rc.array;
        if let Some(v) = args.rows {
            a.rows = v;
        }
        if let Some(v) = args.cols {
            a.cols = v;
        }
        if let Some(v) = args.m {
            a.m = v;
        }
        if let Some(v) = args.n {
            a.n = v;
        }
        if let Some(v) = args.data_width {
            a.data_width = v;
        }
        if let Some(v) = args.acc_width {
            a.acc_width = v;
        }
        if let Some(v) = args.seed {
            rc.seed = v;
        }
        if let Some(v) = &args.mode {
            mode = Some(v.clone());
        }
        rc.array.mode = match mode {
            Some(text) => parse_mode(&text, rc.array.m, rc.array.n)?,
            None => SparsityMode::Full,
        };
        rc.array.validate()?;
        Ok(rc)
    }

    fn apply_text(&mut self, text: &str, mode: &mut Option<String>) -> Result<()> {
        for (k, v) in io::parse_key_values(text)? {
            let a = &mut self.array;
            match k.as_str() {
                "rows" => a.rows = parse_num(&k, &v)?,
                "cols" => a.cols = parse_num(&k, &v)?,
                "m" => a.m = parse_num(&k, &v)?,
                "n" => a.n = parse_num(&k, &v)?,
                "data_width" => a.data_width = parse_num(&k, &v)?,
                "acc_width" => a.acc_width = parse_num(&k, &v)?,
                "mode" => *mode = Some(v),
                "seed" => self.seed = parse_num(&k, &v)?,
                "testing" => self.testing = parse_switch(&v)?,
                "output" => self.output = Some(v.into()),
                "stats" => self.stats = Some(v.into()),
                "curve" => self.curve = Some(v.into()),
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }
        Ok(())
    }
}

fn parse_faults(specs: &[String], config: &ArrayConfig) -> Result<Vec<FaultSite>> {
    specs
        .iter()
        .map(|s| {
            let f: FaultSite = s.parse()?;
            f.validate(config)?;
            Ok(f)
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn or_default(path: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> PathBuf {
    path.or_else(|| fallback.clone()).unwrap_or_else(|| PathBuf::from(name))
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_CLEAN };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    let rc = RunConfig::resolve(&cli.array)?;
    match cli.command {
        Command::Prune {
            input,
            output,
            dense_out,
        } => cmd_prune(&rc, &input, or_default(output, &rc.output, "tile.json"), dense_out),
        Command::Matmul {
            a,
            w,
            testing,
            output,
            stats,
            reports,
            faults,
        } => {
            let testing = match testing {
                Some(t) => parse_switch(&t)?,
                None => rc.testing,
            };
            let output = or_default(output, &rc.output, "C.csv");
            let stats = or_default(stats, &rc.stats, "stats.json");
            cmd_matmul(&rc, &a, &w, testing, &faults, &output, &stats, reports.as_deref())
        }
        Command::Selftest { w, faults, output } => {
            cmd_selftest(&rc, &w, &faults, &or_default(output, &rc.output, "report.json"))
        }
        Command::Campaign {
            weights,
            tiles,
            classes,
            trials,
            output,
            curve,
        } => {
            let output = or_default(output, &rc.output, "coverage.json");
            let curve = or_default(curve, &rc.curve, "curve.csv");
            cmd_campaign(&rc, weights.as_deref(), tiles, &classes, trials, &output, &curve)
        }
    }
}

pub fn cmd_prune(rc: &RunConfig, input: &Path, output: PathBuf, dense_out: Option<PathBuf>) -> Result<i32> {
    let dense = io::read_matrix_csv(input)?;
    let tile = pack_tile(&dense, rc.array.m, rc.array.active_slots())?;
    write_json(&output, &tile)?;
    if let Some(path) = dense_out {
        io::write_matrix_csv(&path, &densify(&tile))?;
    }
    println!(
        "packed {}x{} as {} blocks of {}:{}; non-zero ratio {:.4}",
        dense.rows(),
        dense.cols(),
        tile.blocks().len(),
        tile.n(),
        tile.m(),
        tile.nonzero_ratio()
    );
    Ok(EXIT_CLEAN)
}

#[derive(Serialize)]
struct StatsDocument {
    #[serde(flatten)]
    stats: CycleStats,
    testing: bool,
    overhead: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_matmul(
    rc: &RunConfig,
    a: &Path,
    w: &Path,
    testing: bool,
    faults: &[String],
    output: &Path,
    stats_path: &Path,
    reports_path: Option<&Path>,
) -> Result<i32> {
    let faults = parse_faults(faults, &rc.array)?;
    let workload = Workload {
        layers: vec![Layer {
            a: io::read_matrix_csv(a)?,
            w: io::read_matrix_csv(w)?,
        }],
    };
    let out = driver::tiled_matmul(&workload, &rc.array, testing, &faults)?;
    io::write_matrix_csv(output, &out.results[0])?;
    // a run without testing differs only by the session cycles
    let baseline = CycleStats {
        test_cycles: 0,
        total_cycles: out.stats.total_cycles - out.stats.test_cycles,
        ..out.stats
    };
    let overhead = driver::overhead_report(&out.stats, &baseline);
    write_json(
        stats_path,
        &StatsDocument {
            stats: out.stats,
            testing,
            overhead,
        },
    )?;
    if let Some(path) = reports_path {
        write_json(path, &out.reports)?;
    }
    println!(
        "{} tiles, {} cycles ({} load, {} compute, {} test); overhead {:.3}%",
        out.stats.tiles_executed,
        out.stats.total_cycles,
        out.stats.load_cycles,
        out.stats.compute_cycles,
        out.stats.test_cycles,
        overhead * 100.0
    );
    let detected = out.reports.iter().any(|r| r.detected);
    Ok(if detected { EXIT_DETECTED } else { EXIT_CLEAN })
}

pub fn cmd_selftest(rc: &RunConfig, w: &Path, faults: &[String], output: &Path) -> Result<i32> {
    let faults = parse_faults(faults, &rc.array)?;
    let tiles = driver::weight_tiles(&io::read_matrix_csv(w)?, &rc.array)?;
    let mut array = SystolicArray::new(rc.array)?;
    for &f in &faults {
        array.inject(f)?;
    }
    let mut reports = Vec::with_capacity(tiles.len());
    for (t, tile) in tiles.iter().enumerate() {
        array.load_weights(tile)?;
        let golden = selftest::compute_golden(tile, &rc.array)?;
        let report = selftest::run_session(&mut array, &golden, t)?;
        println!(
            "tile {t}: {} {:?}",
            if report.detected { "FAULT" } else { "clean" },
            report.verdicts
        );
        reports.push(report);
    }
    if reports.len() == 1 {
        write_json(output, &reports[0])?;
    } else {
        write_json(output, &reports)?;
    }
    let detected = reports.iter().any(|r| r.detected);
    Ok(if detected { EXIT_DETECTED } else { EXIT_CLEAN })
}

pub fn cmd_campaign(
    rc: &RunConfig,
    weights: Option<&Path>,
    tiles: usize,
    classes: &[String],
    trials: usize,
    output: &Path,
    curve: &Path,
) -> Result<i32> {
    let tiles = match weights {
        Some(path) => driver::weight_tiles(&io::read_matrix_csv(path)?, &rc.array)?,
        None => campaign::synthetic_tiles(&rc.array, tiles, rc.seed),
    };
    let classes = classes
        .iter()
        .map(|c| c.parse::<RegClass>())
        .collect::<Result<Vec<_>>>()?;
    let faults: Vec<FaultSite> = campaign::enumerate_faults(&rc.array)
        .into_iter()
        .filter(|f| classes.is_empty() || classes.contains(&f.class))
        .collect();
    let options = CampaignOptions {
        harmless_trials: trials,
        seed: rc.seed,
        ..CampaignOptions::default()
    };
    let report = campaign::run_campaign(&tiles, &rc.array, &faults, &options)?;
    fs::write(output, report.to_json()? + "\n")?;
    fs::write(curve, report.curve_csv())?;
    println!(
        "{} faults over {} tiles: {} detected, coverage {:.2}%",
        report.total_faults,
        report.tiles,
        report.detected,
        report.coverage * 100.0
    );
    for (class, s) in &report.per_class {
        println!(
            "  {class:<10} {:>6}/{:<6} detected, {} harmless, {} not harmless",
            s.detected, s.total, s.harmless_verified, s.not_harmless
        );
    }
    Ok(EXIT_CLEAN)
}
