//! The `modelkit` command line: expression parsing, evaluation, output
//! and the named examples.

pub mod eval;
pub mod examples;
pub mod output;
pub mod parse;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use eval::{default_params, eval_model_expr, EvalContext, REGISTRY};
pub use examples::{run_example, Check, ExampleOptions, ExampleReport, EXAMPLES};
pub use output::{sig6, Cell, Format, Table};
pub use parse::{parse_model_expr, ModelExpr, Value};

use crate::data::DataSet;
use crate::error::Error;
use crate::stream::RandomStream;

/// Exit status when a `--check` tolerance fails.
pub const EXIT_CHECK_FAILED: i32 = 2;
/// Exit status for usage errors, including an unknown example name.
pub const EXIT_USAGE: i32 = 64;
const EXIT_ERROR: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "modelkit", version, about = "Build, fit and sample composed statistical models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one of the named example pipelines.
    Example {
        /// One of the names listed by `modelkit catalog`.
        name: String,
        #[command(flatten)]
        run: RunArgs,
        /// Exit with status 2 if any tolerance check fails.
        #[arg(long)]
        check: bool,
    },
    /// Build a model from an expression, then fit it to --data and/or
    /// sample --draws rows from it.
    Eval {
        expr: String,
        /// CSV file to estimate on; also backs `pmf` and `ols`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the canonical form of an expression.
    Parse { expr: String },
    /// List model names and examples.
    Catalog,
}

#[derive(clap::Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Main sample size of the run.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Directory for CSV and gnuplot files.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Table,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => Format::Table,
            FormatArg::Csv => Format::Csv,
        }
    }
}

/// Runs the command line with `args` (program name first), writing to
/// `out` and `err`, and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Error::UnknownName(n)) => {
            let _ = writeln!(err, "error: unknown name `{n}`");
            let _ = writeln!(err, "examples: {}", EXAMPLES.join(", "));
            let _ = writeln!(err, "usage: modelkit example <NAME> [--seed N] [--draws N] [--out DIR] [--check]");
            EXIT_USAGE
        }
        Err(e @ (Error::Syntax { .. } | Error::BadKeyword { .. })) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn print_tables(out: &mut dyn Write, tables: &[Table], format: Format) -> crate::Result<()> {
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        out.write_all(t.render(format)?.as_bytes())?;
    }
    Ok(())
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> crate::Result<i32> {
    match cmd {
        Command::Example { name, run, check } => {
            let opts = ExampleOptions {
                seed: run.seed,
                draws: run.draws,
                out: run.out.clone(),
            };
            let report = run_example(&name, &opts)?;
            let mut tables = report.tables.clone();
            tables.push(report.check_table());
            print_tables(out, &tables, run.format.into())?;
            for f in &report.files {
                log::info!("wrote {}", f.display());
            }
            Ok(if check && !report.passed() { EXIT_CHECK_FAILED } else { 0 })
        }
        Command::Eval { expr, data, run } => {
            let ctx = EvalContext {
                data: data.clone(),
                base_dir: None,
            };
            let m = eval_model_expr(&parse_model_expr(&expr)?, &ctx)?;
            let mut tables = Vec::new();
            let mut t = Table::new(format!("{m}"), &["parameter", "value"]);
            let mut params = default_params(&m);
            if let Some(path) = &data {
                let d = DataSet::read_csv_path(path)?;
                let fit = m.estimate(&d)?;
                params = fit.params.clone();
                t.title = format!("{m}, estimated on {} rows", d.len());
                for (name, v) in params.labels().into_iter().zip(params.values()) {
                    t.push(vec![name.into(), (*v).into()]);
                }
                t.push(vec!["log-likelihood".into(), m.log_likelihood(&d, &params)?.into()]);
            } else {
                for (name, v) in params.labels().into_iter().zip(params.values()) {
                    t.push(vec![name.into(), (*v).into()]);
                }
            }
            tables.push(t);
            if let Some(n) = run.draws {
                let d = m.draw_many(&params, n, &mut RandomStream::new(run.seed))?;
                std::fs::create_dir_all(&run.out)?;
                let path = output::write_csv(&run.out.join("draws.csv"), &[], d.rows())?;
                let mut s = Table::new(format!("{n} draws written to {}", path.display()), &["column", "mean"]);
                for j in 0..d.dim().unwrap_or(0) {
                    let c = d.column(j);
                    s.push(vec![format!("{j}").into(), (c.iter().sum::<f64>() / c.len() as f64).into()]);
                }
                tables.push(s);
            }
            print_tables(out, &tables, run.format.into())?;
            Ok(0)
        }
        Command::Parse { expr } => {
            writeln!(out, "{}", parse_model_expr(&expr)?)?;
            Ok(0)
        }
        Command::Catalog => {
            let mut t = Table::new("models", &["name", "example"]);
            for (n, e) in REGISTRY {
                t.push(vec![(*n).into(), (*e).into()]);
            }
            let mut x = Table::new("examples", &["name"]);
            for n in EXAMPLES {
                x.push(vec![(*n).into()]);
            }
            print_tables(out, &[t, x], Format::Table)?;
            Ok(0)
        }
    }
}
