//! `siattn` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or domain error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attention::{
    attention_metrics, causal_attention, AttentionConfig, Modifier, PRopeRule, PosScheme, DEFAULT_LOCAL_WINDOW,
    DEFAULT_LOGN_S,
};
use crate::error::{Error, Result};
use crate::experiments::{
    chart_for, default_context_lengths, run_fig1, run_fig2, run_qq, run_theorem1, schedule_table, Cell,
    ExperimentReport, Fig1Scheme, ReportKind,
};
use crate::mclab::{log_spaced, McModifier};
use crate::schedule::{resolve_params, DEFAULT_TAU};
use crate::tensorfile::{read_tensor, write_tensor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "siattn", version, about = "Scale-invariant attention lab")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs); never changes outputs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate a_t, m_t and E[A_t].
    Schedule {
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = 100)]
        t_max: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo range sums against closed forms and asymptotes.
    Theorem1 {
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
        delta: Vec<u64>,
        #[arg(long = "t", value_delimiter = ',', default_value = "100,1000,8192")]
        t: Vec<u64>,
        #[command(flatten)]
        mc: McArgs<1024>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic long-context attention metrics on IID Gaussian logits.
    Fig1 {
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<u64>>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "id,logn,si")]
        schemes: Vec<SchemeArg>,
        #[arg(long, default_value_t = DEFAULT_LOGN_S)]
        s: f64,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
        boundaries: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_LOCAL_WINDOW)]
        local_window: usize,
        #[command(flatten)]
        mc: McArgs<512>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Expected range entropy versus scale, with ln t and sqrt(ln t) fits.
    Fig2 {
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
        delta: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        t_min: u64,
        #[arg(long, default_value_t = 100_000)]
        t_max: u64,
        #[arg(long, default_value_t = 16)]
        t_points: usize,
        /// Also run the untransformed (identity) arm.
        #[arg(long)]
        control: bool,
        #[command(flatten)]
        mc: McArgs<2048>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Causal attention over SIAT tensors.
    Attend(AttendArgs),
    /// QQ points of a SIAT tensor's values against the standard normal.
    Qq {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 99)]
        quantiles: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct McArgs<const SAMPLES: usize> {
    #[arg(long, default_value_t = SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Id,
    Logn,
    Si,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PosArg {
    Nope,
    Rope,
    Prope,
    Ntk,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModifierArg {
    Id,
    Si,
    Logn,
    Alibi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PRopeRuleArg {
    Truncate,
    Rebase,
}

#[derive(Debug, Args)]
struct AttendArgs {
    #[arg(long)]
    q: PathBuf,
    #[arg(long)]
    k: PathBuf,
    #[arg(long)]
    v: PathBuf,
    #[arg(long, value_enum, default_value = "nope")]
    pos: PosArg,
    #[arg(long, default_value_t = 10_000.0)]
    theta: f64,
    #[arg(long, default_value_t = 1024.0)]
    effective_base: f64,
    #[arg(long, value_enum, default_value = "truncate")]
    prope_rule: PRopeRuleArg,
    #[arg(long)]
    train_len: Option<u64>,
    #[arg(long)]
    infer_len: Option<u64>,
    #[arg(long, value_enum, default_value = "id")]
    modifier: ModifierArg,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_LOGN_S)]
    logn_s: f64,
    /// Use the sequence length as N for LogN instead of the per-query key count.
    #[arg(long)]
    logn_fixed: bool,
    #[arg(long, default_value_t = 1)]
    heads: usize,
    #[arg(long, default_value_t = 0)]
    head: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
    boundaries: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_LOCAL_WINDOW)]
    local_window: usize,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_USAGE;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_DATA;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn write_outputs(report: &ExperimentReport, out: &Path, svg: Option<&Path>) -> Result<()> {
    report.write_csv(out)?;
    if let Some(path) = svg {
        let chart = chart_for(report).ok_or_else(|| Error::Domain("no chart for this report".into()))?;
        std::fs::write(path, chart.render())?;
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Schedule { tau, t_max, out } => schedule_table(&resolve_params(tau)?, t_max)?.write_csv(&out),
        Command::Theorem1 { tau, delta, t, mc, out } => {
            run_theorem1(&resolve_params(tau)?, &delta, &t, mc.samples, mc.seed)?.write_csv(&out)
        }
        Command::Fig1 {
            lengths,
            schemes,
            s,
            tau,
            boundaries,
            local_window,
            mc,
            out,
            svg,
        } => {
            let params = resolve_params(tau)?;
            let schemes: Vec<Fig1Scheme> = schemes
                .into_iter()
                .map(|a| match a {
                    SchemeArg::Id => Fig1Scheme::Identity,
                    SchemeArg::Logn => Fig1Scheme::LogN { s },
                    SchemeArg::Si => Fig1Scheme::ScaleInvariant(params),
                })
                .collect();
            let lengths = lengths.unwrap_or_else(default_context_lengths);
            let report = run_fig1(&lengths, &schemes, mc.samples, mc.seed, &boundaries, local_window)?;
            write_outputs(&report, &out, svg.as_deref())
        }
        Command::Fig2 {
            tau,
            delta,
            t_min,
            t_max,
            t_points,
            control,
            mc,
            out,
            svg,
        } => {
            let mut arms = vec![McModifier::Schedule(resolve_params(tau)?)];
            if control {
                arms.push(McModifier::Identity);
            }
            let grid = log_spaced(t_min, t_max, t_points)?;
            let report = run_fig2(&delta, &grid, &arms, mc.samples, mc.seed)?;
            write_outputs(&report, &out, svg.as_deref())
        }
        Command::Attend(args) => attend(args),
        Command::Qq { input, quantiles, out } => {
            let tensor = read_tensor(&input)?;
            run_qq(tensor.data(), quantiles)?.write_csv(&out)
        }
    }
}

fn attend(args: AttendArgs) -> Result<()> {
    let q = read_tensor(&args.q)?;
    let k = read_tensor(&args.k)?;
    let v = read_tensor(&args.v)?;
    let (n, head_dim) = q.matrix_dims()?;
    let pos = match args.pos {
        PosArg::Nope => PosScheme::NoPE,
        PosArg::Rope => PosScheme::RoPE { theta: args.theta },
        PosArg::Prope => PosScheme::PRoPE {
            theta: args.theta,
            effective_base: args.effective_base,
            rule: match args.prope_rule {
                PRopeRuleArg::Truncate => PRopeRule::Truncate,
                PRopeRuleArg::Rebase => PRopeRule::Rebase,
            },
        },
        PosArg::Ntk => {
            let train_len = args
                .train_len
                .ok_or_else(|| Error::Domain("--pos ntk needs --train-len".into()))?;
            PosScheme::Ntk {
                theta: args.theta,
                train_len,
                infer_len: args.infer_len.unwrap_or(n as u64),
            }
        }
    };
    let modifier = match args.modifier {
        ModifierArg::Id => Modifier::Identity,
        ModifierArg::Si => Modifier::ScaleInvariant {
            params: resolve_params(args.tau)?,
        },
        ModifierArg::Logn => Modifier::LogN {
            s: args.logn_s,
            per_query: !args.logn_fixed,
        },
        ModifierArg::Alibi => Modifier::Alibi { n_heads: args.heads },
    };
    let mut cfg = AttentionConfig::new(pos, modifier, head_dim, args.heads)?;
    cfg.return_weights = args.weights.is_some() || args.metrics.is_some();
    let result = causal_attention(&q, &k, &v, &cfg, args.head)?;
    write_tensor(&args.out, &result.output)?;
    if let Some(weights) = &result.weights {
        if let Some(path) = &args.weights {
            write_tensor(path, weights)?;
        }
        if let Some(path) = &args.metrics {
            let mut columns = vec!["query".to_string(), "global_entropy".into(), "local_mass".into()];
            for w in args.boundaries.windows(2) {
                columns.push(format!("range_entropy_{}_{}", w[0], w[1]));
            }
            let mut report = ExperimentReport::with_columns(ReportKind::Fig1, columns);
            report.add_meta("source", "attend");
            report.add_meta("local_window", args.local_window as u64);
            for i in 0..n {
                let m = attention_metrics(weights, i, &args.boundaries, args.local_window)?;
                let mut row: Vec<Cell> = vec![(i as u64).into(), m.global_entropy.into(), m.local_mass.into()];
                row.extend(m.range_entropies.into_iter().map(Cell::from));
                report.push_row(row)?;
            }
            report.write_csv(path)?;
        }
    }
    Ok(())
}
