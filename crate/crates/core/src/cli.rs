//! `matchstat` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::combinatorics::{match_pmf, match_tail, poisson_pmf, poisson_tail};
use crate::inference::{matching_test, pearson_test, TestError, TestMode};
use crate::montecarlo::{
    dispersion_experiment, error_sign_experiment, joint_distribution_experiment, power_experiment,
    relative_power_experiment, ConfigError, ExperimentConfig, RejectionRule, Simulator,
    DEFAULT_REPS, POWER_N, POWER_RHO,
};
use crate::rank_stats::{BivariateSample, RankError, TiePolicy};
use crate::table::{ExperimentTable, Field, Format, TableRow};

/// Seed used when neither `--seed` nor `MATCHSTAT_SEED` is given.
pub const DEFAULT_SEED: u64 = 20_190_601;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Test(TestError::SampleTooSmall(_))
            | ConfigError::Test(TestError::Rank(_)) => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TestError> for CliError {
    fn from(e: TestError) -> Self {
        match e {
            TestError::InvalidAlpha(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "matchstat",
    version,
    about = "Matching statistic m: exact distribution, significance test and Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the CSV header row
    #[arg(long)]
    no_header: bool,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Replications per cell
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: u64,
    /// Master seed [env: MATCHSTAT_SEED; default 20190601]
    #[arg(long, env = "MATCHSTAT_SEED", hide_env = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    threads: Option<usize>,
}

impl SimArgs {
    fn simulator(&self) -> Simulator {
        Simulator::new(self.seed.unwrap_or(DEFAULT_SEED)).with_threads(self.threads)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    /// Reject when m >= 4
    #[value(name = "m-ge-4")]
    MGe4,
    /// Reject at the exact critical value for --alpha
    ExactAlpha,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Asymptotic,
    /// Pearson correlation t-test
    TTest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TieArg {
    Reject,
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Probabilities P(m = k) for n = 4..max-n next to the Poisson(1) limit
    Table1 {
        #[arg(long, default_value_t = 7)]
        max_n: usize,
        #[arg(long, default_value_t = 4)]
        min_n: usize,
        /// Decimal places of printed probabilities
        #[arg(long, default_value_t = 4)]
        decimals: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact and Poisson probabilities of m for one n (all k unless --k is given)
    Pmf {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_negative_numbers = true)]
        k: Option<i64>,
        #[arg(long, default_value_t = 6)]
        decimals: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Test independence of a two-column data file
    Test {
        /// Two-column delimited file of (x, y) pairs; header row optional
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "reject")]
        tie_policy: TieArg,
        /// Seed for random tie-breaking [env: MATCHSTAT_SEED]
        #[arg(long, env = "MATCHSTAT_SEED", hide_env = true)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Power of the matching and Pearson tests over an (n, rho) grid
    Power {
        /// Sample size (repeatable) [default: 10 30 50 100 200]
        #[arg(long)]
        n: Vec<usize>,
        /// Population correlation (repeatable) [default: -.7 to .7 in steps of .175]
        #[arg(long, allow_negative_numbers = true)]
        rho: Vec<f64>,
        #[arg(long, value_enum, default_value = "m-ge-4")]
        rule: RuleArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Matching power where the Pearson test has 50/60/70/80% power
    Relpower {
        /// Sample size from {10, 30, 50, 100} (repeatable) [default: all four]
        #[arg(long)]
        n: Vec<usize>,
        #[arg(long, value_enum, default_value = "m-ge-4")]
        rule: RuleArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Null joint distribution of m, Spearman's rho and Kendall's tau
    Rae {
        /// Sample size (repeatable) [default: 10 50]
        #[arg(long)]
        n: Vec<usize>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Null standard deviations of m and Spearman's rho by n
    Dispersion {
        /// Sample size (repeatable) [default: 10 50]
        #[arg(long)]
        n: Vec<usize>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// P(r > rho) given whether m is below, at, or above 1
    Indicator {
        /// Sample size (repeatable) [default: 15]
        #[arg(long)]
        n: Vec<usize>,
        /// Population correlation (repeatable) [default: -.7 to .7 in steps of .175]
        #[arg(long, allow_negative_numbers = true)]
        rho: Vec<f64>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Parsed two-column input file.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTable {
    pub rows: Vec<(f64, f64)>,
    pub header_present: bool,
}

impl InputTable {
    /// Reads comma-delimited `x,y` rows. A first row that does not parse
    /// as two numbers is taken as a header.
    pub fn parse<R: Read>(input: R) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows = Vec::new();
        let mut header_present = false;
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CliError::Data(format!("row {}: {e}", i + 1)))?;
            let line = record.position().map_or(i as u64 + 1, |p| p.line());
            if record.len() != 2 {
                return Err(CliError::Data(format!(
                    "row {line}: expected 2 fields (x,y), found {}",
                    record.len()
                )));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(x), Ok(y)) => {
                    if !x.is_finite() || !y.is_finite() {
                        return Err(CliError::Data(format!("row {line}: non-finite value")));
                    }
                    rows.push((x, y));
                }
                _ if i == 0 => header_present = true,
                _ => {
                    return Err(CliError::Data(format!(
                        "row {line}: cannot parse '{}' as a pair of numbers",
                        record.iter().collect::<Vec<_>>().join(",")
                    )))
                }
            }
        }
        Ok(Self {
            rows,
            header_present,
        })
    }

    pub fn to_sample(&self) -> Result<BivariateSample, CliError> {
        let (x, y): (Vec<f64>, Vec<f64>) = self.rows.iter().copied().unzip();
        BivariateSample::new(x, y).map_err(|e| match e {
            RankError::TooShort(n) => TestError::SampleTooSmall(n).into(),
            e => CliError::Data(e.to_string()),
        })
    }
}

fn format_of(output: &OutputArgs) -> Format {
    match output.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    }
}

fn emit<W: Write>(
    table: &ExperimentTable,
    output: &OutputArgs,
    stdout: &mut W,
) -> Result<(), CliError> {
    let format = format_of(output);
    match &output.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            table.write(&mut f, format, !output.no_header)?;
            f.flush()?;
        }
        None => table.write(&mut *stdout, format, !output.no_header)?,
    }
    Ok(())
}

fn rule_of(rule: RuleArg) -> RejectionRule {
    match rule {
        RuleArg::MGe4 => RejectionRule::FixedMGe4,
        RuleArg::ExactAlpha => RejectionRule::ExactAlpha,
    }
}

fn or_default<T: Clone>(given: Vec<T>, default: &[T]) -> Vec<T> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given
    }
}

fn table1(min_n: usize, max_n: usize, decimals: usize) -> Result<ExperimentTable, CliError> {
    if min_n < 1 || max_n < min_n {
        return Err(CliError::Usage(format!(
            "need 1 <= --min-n <= --max-n, got {min_n} and {max_n}"
        )));
    }
    let columns = std::iter::once("k".to_string())
        .chain((min_n..=max_n).map(|n| format!("n{n}")))
        .chain(std::iter::once("poisson".to_string()));
    let mut t = ExperimentTable::new(columns).with_decimals(decimals);
    for k in 0..=max_n {
        let mut row = vec![Field::Int(k as u64)];
        for n in min_n..=max_n {
            row.push(if k <= n {
                Field::Real(match_pmf(n, k as i64))
            } else {
                Field::Missing
            });
        }
        row.push(Field::Real(poisson_pmf(1.0, k as u64)));
        t.push(row);
    }
    Ok(t)
}

fn pmf_table(n: usize, k: Option<i64>, decimals: usize) -> Result<ExperimentTable, CliError> {
    if n < 1 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let ks: Vec<i64> = match k {
        Some(k) => vec![k],
        None => (0..=n as i64).collect(),
    };
    let mut t = ExperimentTable::new(["n", "k", "pmf", "tail", "poisson_pmf", "poisson_tail"])
        .with_decimals(decimals);
    for k in ks {
        let (pp, pt) = match u64::try_from(k) {
            Ok(ku) => (poisson_pmf(1.0, ku), poisson_tail(1.0, ku)),
            Err(_) => (0.0, 1.0),
        };
        t.push(vec![
            Field::Int(n as u64),
            Field::Text(k.to_string()),
            Field::Real(match_pmf(n, k)),
            Field::Real(match_tail(n, k)),
            Field::Real(pp),
            Field::Real(pt),
        ]);
    }
    Ok(t)
}

fn size_note<E: Write>(
    rule: RejectionRule,
    n_list: &[usize],
    alpha: f64,
    stderr: &mut E,
) -> Result<(), CliError> {
    for &n in n_list {
        if let Ok(c) = rule.threshold(n, alpha) {
            writeln!(
                stderr,
                "n={n}: matching test rejects when m >= {} (exact size {:.6}, Poisson(1) size {:.6})",
                c.m,
                c.achieved_size,
                poisson_tail(1.0, c.m as u64)
            )?;
        }
    }
    Ok(())
}

fn dispatch<W: Write, E: Write>(cli: Cli, stdout: &mut W, stderr: &mut E) -> Result<(), CliError> {
    match cli.command {
        Command::Table1 {
            max_n,
            min_n,
            decimals,
            output,
        } => emit(&table1(min_n, max_n, decimals)?, &output, stdout),
        Command::Pmf {
            n,
            k,
            decimals,
            output,
        } => emit(&pmf_table(n, k, decimals)?, &output, stdout),
        Command::Test {
            input,
            mode,
            alpha,
            tie_policy,
            seed,
            output,
        } => {
            let file = File::open(&input)
                .map_err(|e| CliError::Data(format!("cannot open {}: {e}", input.display())))?;
            let sample = InputTable::parse(file)?.to_sample()?;
            let policy = match tie_policy {
                TieArg::Reject => TiePolicy::Reject,
                TieArg::Random => TiePolicy::Random(seed.unwrap_or(DEFAULT_SEED)),
            };
            let result = match mode {
                ModeArg::TTest => pearson_test(&sample, alpha)?,
                ModeArg::Exact | ModeArg::Asymptotic => {
                    let mode = if matches!(mode, ModeArg::Exact) {
                        TestMode::Exact
                    } else {
                        TestMode::Asymptotic
                    };
                    let ranked = sample.rank(policy).map_err(TestError::from)?;
                    matching_test(&ranked, mode, alpha)?
                }
            };
            emit(&TableRow::table(&[result]), &output, stdout)
        }
        Command::Power {
            n,
            rho,
            rule,
            alpha,
            sim,
            output,
        } => {
            let config = ExperimentConfig {
                n_list: or_default(n, &POWER_N),
                rho_list: or_default(rho, &POWER_RHO),
                reps: sim.reps,
                master_seed: sim.seed.unwrap_or(DEFAULT_SEED),
                alpha,
                rejection_rule: rule_of(rule),
                threads: sim.threads,
            };
            let cells = power_experiment(&config)?;
            size_note(config.rejection_rule, &config.n_list, alpha, stderr)?;
            emit(&TableRow::table(&cells), &output, stdout)
        }
        Command::Relpower {
            n,
            rule,
            alpha,
            sim,
            output,
        } => {
            let config = ExperimentConfig {
                n_list: or_default(n, &[10, 30, 50, 100]),
                rho_list: Vec::new(),
                reps: sim.reps,
                master_seed: sim.seed.unwrap_or(DEFAULT_SEED),
                alpha,
                rejection_rule: rule_of(rule),
                threads: sim.threads,
            };
            let cells = relative_power_experiment(&config)?;
            size_note(config.rejection_rule, &config.n_list, alpha, stderr)?;
            emit(&TableRow::table(&cells), &output, stdout)
        }
        Command::Rae { n, sim, output } => {
            let simulator = sim.simulator();
            let rows = or_default(n, &[10, 50])
                .into_iter()
                .map(|n| joint_distribution_experiment(n, sim.reps, &simulator))
                .collect::<Result<Vec<_>, _>>()?;
            emit(&TableRow::table(&rows), &output, stdout)
        }
        Command::Dispersion { n, sim, output } => {
            let rows =
                dispersion_experiment(&or_default(n, &[10, 50]), sim.reps, &sim.simulator())?;
            emit(&TableRow::table(&rows), &output, stdout)
        }
        Command::Indicator {
            n,
            rho,
            sim,
            output,
        } => {
            let simulator = sim.simulator();
            let rho = or_default(rho, &POWER_RHO);
            let mut rows = Vec::new();
            for n in or_default(n, &[15]) {
                rows.extend(error_sign_experiment(n, &rho, sim.reps, &simulator)?);
            }
            emit(&TableRow::table(&rows), &output, stdout)
        }
    }
}

/// Runs the CLI against the given streams and returns the exit status.
pub fn run_with<I, T, W, E>(argv: I, stdout: &mut W, stderr: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    1
                }
            };
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Runs the CLI on the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = BufWriter::new(stdout.lock());
    let code = run_with(argv, &mut out, &mut stderr.lock());
    if out.flush().is_err() {
        return 2;
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("matchstat").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn input_header_detection() {
        let t = InputTable::parse("x,y\n1,2\n3,4\n".as_bytes()).unwrap();
        assert!(t.header_present);
        assert_eq!(t.rows, vec![(1.0, 2.0), (3.0, 4.0)]);
        let t = InputTable::parse("1,2\n3,4\n".as_bytes()).unwrap();
        assert!(!t.header_present);
    }

    #[test]
    fn input_errors_name_the_row() {
        let e = InputTable::parse("x,y\n1,2\n3,abc\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = InputTable::parse("1,2\n3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
        let e = InputTable::parse("1,2\n3,inf\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("non-finite"), "{e}");
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run_capture(&[]).0, 1);
        assert_eq!(run_capture(&["frobnicate"]).0, 1);
        assert_eq!(run_capture(&["pmf"]).0, 1);
        assert_eq!(run_capture(&["power", "--rho", "1.5", "--reps", "10"]).0, 1);
        assert_eq!(
            run_capture(&["table1", "--max-n", "2", "--min-n", "4"]).0,
            1
        );
    }

    #[test]
    fn help_exits_0_and_lists_flags() {
        let (code, out, _) = run_capture(&["power", "--help"]);
        assert_eq!(code, 0);
        for flag in [
            "--reps",
            "--seed",
            "--n",
            "--rho",
            "--rule",
            "--alpha",
            "--format",
            "--out",
            "--no-header",
        ] {
            assert!(out.contains(flag), "missing {flag}");
        }
    }

    #[test]
    fn pmf_single_cell() {
        let (code, out, _) = run_capture(&["pmf", "--n", "4", "--k", "0"]);
        assert_eq!(code, 0);
        assert_eq!(
            out,
            "n,k,pmf,tail,poisson_pmf,poisson_tail\n4,0,0.375000,1.000000,0.367879,1.000000\n"
        );
    }

    #[test]
    fn small_power_run_and_size_note() {
        let (code, out, err) = run_capture(&[
            "power", "--n", "10", "--rho", "0", "--reps", "200", "--seed", "1",
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(out.starts_with("n,rho,power_matching,power_pearson,reps,mc_stderr\n10,0,"));
        assert!(err.contains("m >= 4"));
    }
}
