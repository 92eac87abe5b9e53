//! The `clgid` command line: run configuration files, the five commands and
//! their exit codes.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{RunConfig, VERSION};

use crate::continual::{run_method, similarity_chain, write_reports, Method, StreamReport};
use crate::error::{Error, Result};
use crate::kv::{self, KvFile};
use crate::ledger::{self, CostConstants};
use crate::restorer::save_state;
use crate::synthdata::{export_dataset, export_stream, make_holdout, make_stream};

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_UNKNOWN_KEY: i32 = 2;
pub const EXIT_MISSING_FILE: i32 = 3;
pub const EXIT_UNKNOWN_METHOD: i32 = 4;

/// Exit status for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownKey(_) => EXIT_UNKNOWN_KEY,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
            EXIT_MISSING_FILE
        }
        Error::UnknownMethod(_) => EXIT_UNKNOWN_METHOD,
        _ => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "clgid", version, about = "Continual de-raining with generative replay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write every dataset of a stream (and the hold-out set) as PPM files.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one method over a stream and write its reports.
    Run(RunArgs),
    /// Print the similarity chain of a stream.
    Similarity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write `similarity.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the cost model and the replay-call accounting.
    Cost {
        /// Dataset sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Generator flags per stage (1 or 0); all 1 by default.
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<u8>>,
        /// `key = value` file of cost constants.
        #[arg(long)]
        constants: Option<PathBuf>,
        /// Largest stream length for the logarithmic-bound check.
        #[arg(long, default_value_t = 64)]
        bound_n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge run directories into one comparison table.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// clgid, clgid-fast, sf or individual.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub no_speedup: bool,
    #[arg(long)]
    pub no_reuse: bool,
    #[arg(long)]
    pub no_selective: bool,
    #[arg(long)]
    pub no_replay: bool,
    #[arg(long)]
    pub no_distill: bool,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

impl RunArgs {
    /// Loads the config file and applies the command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut rc = RunConfig::load(&self.config, self.seed)?;
        if let Some(m) = &self.method {
            rc.set_method(Method::parse(m)?);
        }
        let s = &mut rc.stage;
        if self.no_speedup {
            s.speedup = false;
        }
        s.reuse &= !self.no_reuse;
        s.selective &= !self.no_selective;
        s.replay &= !self.no_replay;
        s.distill &= !self.no_distill;
        if let Some(l) = self.lambda {
            s.lambda = l;
        }
        if let Some(t) = self.threshold {
            s.threshold = t;
        }
        if let Some(i) = self.iterations {
            s.iterations = i;
        }
        rc.normalize();
        rc.stage.validate()?;
        Ok(rc)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Failures print one line to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("clgid: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Gen { config, out, seed } => cmd_gen(&RunConfig::load(config, *seed)?, out),
        Command::Run(args) => cmd_run(&args.resolve()?, &args.out).map(|_| ()),
        Command::Similarity { config, seed, out } => {
            let text = cmd_similarity(&RunConfig::load(config, *seed)?)?;
            print!("{text}");
            match out {
                Some(dir) => write_file(&dir.join("similarity.csv"), &text),
                None => Ok(()),
            }
        }
        Command::Cost {
            sizes,
            deltas,
            constants,
            bound_n,
            out,
        } => {
            let constants = match constants {
                Some(p) => CostConstants::from_kv(&read_kv(p)?)?,
                None => CostConstants::default(),
            };
            let deltas: Option<Vec<bool>> = deltas
                .as_ref()
                .map(|d| d.iter().map(|&x| x != 0).collect());
            let (csv, summary) = cmd_cost(sizes, deltas.as_deref(), &constants, *bound_n)?;
            print!("{summary}");
            match out {
                Some(dir) => {
                    create_dir(dir)?;
                    write_file(&dir.join("cost.csv"), &csv)
                }
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::Compare { runs, out } => {
            let table = cmd_compare(runs)?;
            match out {
                Some(p) => write_file(p, &table),
                None => {
                    let _ = std::io::stdout().write_all(table.as_bytes());
                    Ok(())
                }
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_kv(path: &Path) -> Result<KvFile> {
    KvFile::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Materializes the stream and, when configured, the hold-out set.
pub fn cmd_gen(rc: &RunConfig, out: &Path) -> Result<()> {
    let stream = make_stream(&rc.specs)?;
    export_stream(&stream, out)?;
    if rc.holdout_pairs > 0 {
        export_dataset(&make_holdout(rc.stage.seed, &rc.specs, rc.holdout_pairs)?, out)?;
    }
    write_file(&out.join("manifest.txt"), &rc.to_kv().render())
}

/// Runs the configured method and writes the reports, the final restorer
/// (`restorer.bin`) and `manifest.txt` into `out`.
pub fn cmd_run(rc: &RunConfig, out: &Path) -> Result<StreamReport> {
    create_dir(out)?;
    let stream = make_stream(&rc.specs)?;
    let holdout = if rc.holdout_pairs > 0 {
        Some(make_holdout(rc.stage.seed, &rc.specs, rc.holdout_pairs)?)
    } else {
        None
    };
    let report = run_method(rc.method, &stream, holdout.as_ref(), &rc.stage)?;
    write_reports(&report, out)?;
    save_state(&report.final_state, out.join("restorer.bin"))?;
    write_file(&out.join("manifest.txt"), &rc.to_kv().render())?;
    Ok(report)
}

/// The similarity chain as CSV: one row per stage with every divergence.
pub fn cmd_similarity(rc: &RunConfig) -> Result<String> {
    let stream = make_stream(&rc.specs)?;
    let chain = similarity_chain(&stream, &rc.stage)?;
    let mut out = String::from("stage,dataset,divergences,s,s_hat,nearest\n");
    for (n, r) in chain.iter().enumerate() {
        let divs: Vec<String> = r
            .divergences
            .iter()
            .map(|d| d.map_or_else(|| "-".into(), |d| format!("{d:.6}")))
            .collect();
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{}\n",
            n + 1,
            rc.specs[n].id,
            divs.join(";"),
            r.s,
            r.s_hat,
            r.nearest.map_or_else(String::new, |i| rc.specs[i].id.clone())
        ));
    }
    Ok(out)
}

/// Returns the per-stage cost CSV and a short summary.
pub fn cmd_cost(
    sizes: &[usize],
    deltas: Option<&[bool]>,
    constants: &CostConstants,
    bound_n: usize,
) -> Result<(String, String)> {
    if sizes.is_empty() {
        return Err(Error::Config("no dataset sizes given".into()));
    }
    let all = vec![true; sizes.len()];
    let report = ledger::cost_report(constants, sizes, deltas.unwrap_or(&all))?;
    let m = *sizes.iter().max().unwrap_or(&1);
    let bound = ledger::verify_log_bound(m, bound_n.max(4))?;
    let t = report.total();
    let summary = format!(
        "stages {}\nnaive_calls {}\nreuse_calls {}\nreuse_calls_real {:.3}\n\
         flops_gan {:e}\nflops_replay {:e}\nflops_dnet {:e}\np_gan {:e}\np_dnet {:e}\n\
         log_bound_m {}\nlog_bound_n {}\nlog_bound_constant {:.4}\nlog_bound_pass {}\n",
        sizes.len(),
        ledger::replay_cost_naive(sizes),
        ledger::replay_cost_reuse_closed(sizes),
        ledger::replay_cost_reuse_real(sizes),
        t.flops_gan,
        t.flops_replay,
        t.flops_dnet,
        report.p_gan,
        report.p_dnet,
        m,
        bound_n.max(4),
        bound.constant,
        bound.pass
    );
    Ok((report.csv(), summary))
}

fn read_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn field<T: std::str::FromStr>(row: &[String], i: usize, path: &Path) -> Result<T> {
    let raw = row.get(i).ok_or_else(|| {
        Error::Config(format!("{}: row has no column {i}", path.display()))
    })?;
    kv::parse_value(&path.display().to_string(), raw)
}

/// One row per run directory: each dataset's most recent memory quality,
/// their average, and the final hold-out quality.
pub fn cmd_compare(runs: &[PathBuf]) -> Result<String> {
    let mut ids: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for dir in runs {
        let manifest = read_kv(&dir.join("manifest.txt"))?;
        let method: String = manifest.require("method")?;
        let run_ids: Vec<String> = kv::parse_list("datasets", &manifest.require::<String>("datasets")?)?;
        match &ids {
            None => ids = Some(run_ids.clone()),
            Some(prev) if *prev != run_ids => {
                return Err(Error::Config(format!(
                    "{} covers datasets {run_ids:?}, expected {prev:?}",
                    dir.display()
                )))
            }
            Some(_) => {}
        }
        let mem_path = dir.join("memory.csv");
        let mut latest: Vec<Option<(f64, f64)>> = vec![None; run_ids.len()];
        for row in read_csv(&mem_path)? {
            let d = run_ids
                .iter()
                .position(|id| Some(id) == row.get(1))
                .ok_or_else(|| Error::Config(format!("{}: unknown dataset in {row:?}", mem_path.display())))?;
            latest[d] = Some((field(&row, 2, &mem_path)?, field(&row, 3, &mem_path)?));
        }
        let gen_path = dir.join("generalization.csv");
        let hold = match read_csv(&gen_path)?.last() {
            Some(row) => Some((field::<f64>(row, 1, &gen_path)?, field::<f64>(row, 2, &gen_path)?)),
            None => None,
        };
        rows.push((dir.display().to_string(), method, latest, hold));
    }
    let ids = ids.unwrap_or_default();
    let mut out = String::from("run,method");
    for id in &ids {
        out.push_str(&format!(",{id}_psnr,{id}_ssim"));
    }
    out.push_str(",avg_psnr,avg_ssim,holdout_psnr,holdout_ssim\n");
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.4}"));
    for (run, method, latest, hold) in rows {
        out.push_str(&format!("{run},{method}"));
        for q in &latest {
            out.push_str(&format!(",{},{}", fmt(q.map(|q| q.0)), fmt(q.map(|q| q.1))));
        }
        let seen: Vec<(f64, f64)> = latest.iter().flatten().copied().collect();
        let n = seen.len() as f64;
        let avg = (!seen.is_empty()).then(|| {
            (
                seen.iter().map(|q| q.0).sum::<f64>() / n,
                seen.iter().map(|q| q.1).sum::<f64>() / n,
            )
        });
        out.push_str(&format!(
            ",{},{},{},{}\n",
            fmt(avg.map(|a| a.0)),
            fmt(avg.map(|a| a.1)),
            fmt(hold.map(|h| h.0)),
            fmt(hold.map(|h| h.1))
        ));
    }
    Ok(out)
}
