//! Command-line driver. Exit codes: 0 success, 1 runtime failure or failed
//! assertion, 2 configuration or input error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audit::{run_audit, validate_planted_bias, AuditReport, Formats, Mode, RunContext, ValidationError};
use crate::config::{AuditConfig, Overrides};
use crate::format::fmt6_opt;
use crate::providers::{normalize_response, ProviderCache, ScoreCache};

#[derive(Debug, Parser)]
#[command(name = "modaudit", version, about = "Fairness audits of content-moderation scoring services")]
pub struct Cli {
    /// More logging on standard error (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score corpora and templates, then write the full report.
    Audit(RunArgs),
    /// Counterfactual token fairness only.
    Psa(RunArgs),
    /// Check the pipeline against the planted-bias scorer.
    Validate(ValidateArgs),
    /// Inspect or maintain the response cache.
    Cache(CacheArgs),
    /// Print the summary of an existing report, optionally re-emitting it.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Only these provider ids.
    #[arg(long, value_delimiter = ',')]
    pub providers: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "json,csv")]
    pub format: Vec<OutputFormat>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CacheAction {
    List,
    Verify,
    Purge,
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    pub action: CacheAction,
    /// Supplies the cache directory and, for verify, the provider specs.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Provider to purge.
    #[arg(long)]
    pub provider: Option<String>,
    /// Purge without asking.
    #[arg(long)]
    pub yes: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub from: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "json,csv")]
    pub format: Vec<OutputFormat>,
}

/// Output streams and runtime dependencies for one invocation.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
    pub input: &'a mut dyn BufRead,
}

fn formats(list: &[OutputFormat]) -> Formats {
    Formats { json: list.contains(&OutputFormat::Json), csv: list.contains(&OutputFormat::Csv) }
}

/// Parses `args` and runs the command with the process environment.
pub fn run<I, T>(args: I, io: &mut Io<'_>) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, io, &RunContext::default())
}

pub fn run_with<I, T>(args: I, io: &mut Io<'_>, ctx: &RunContext<'_>) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(io.out, "{text}") } else { write!(io.err, "{text}") };
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match cli.command {
        Command::Audit(a) => cmd_run(&a, Mode::Full, io, ctx),
        Command::Psa(a) => cmd_run(&a, Mode::PsaOnly, io, ctx),
        Command::Validate(a) => cmd_validate(&a, io),
        Command::Cache(a) => cmd_cache(&a, io),
        Command::Report(a) => cmd_report(&a, io),
    }
}

macro_rules! fail {
    ($io:expr, $code:expr, $($arg:tt)*) => {{
        let _ = writeln!($io.err, "error: {}", format!($($arg)*));
        return $code;
    }};
}

fn load_config(path: &Path, overrides: &Overrides, io: &mut Io<'_>) -> Result<AuditConfig, u8> {
    let mut config = match AuditConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            return Err(2);
        }
    };
    if let Err(e) = config.apply(overrides) {
        let _ = writeln!(io.err, "error: {e}");
        return Err(2);
    }
    Ok(config)
}

fn cmd_run(a: &RunArgs, mode: Mode, io: &mut Io<'_>, ctx: &RunContext<'_>) -> u8 {
    let overrides = Overrides {
        seed: a.seed,
        budget: a.budget,
        providers: a.providers.clone(),
        output_dir: a.out.clone(),
        cache_dir: a.cache_dir.clone(),
    };
    let config = match load_config(&a.config, &overrides, io) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = match run_audit(&config, mode, ctx) {
        Ok(r) => r,
        Err(e) => fail!(io, e.exit_code(), "{e}"),
    };
    let dir = config.output_dir();
    let files = match report.emit(&dir, formats(&a.format)) {
        Ok(f) => f,
        Err(e) => fail!(io, 1, "cannot write report to {}: {e}", dir.display()),
    };
    print_summary(&report, io.out);
    for f in files {
        let _ = writeln!(io.out, "wrote {}", f.display());
    }
    0
}

fn print_summary(report: &AuditReport, out: &mut dyn Write) {
    if !report.aggregate.is_empty() {
        let _ = writeln!(out, "{:<16} {:<16} {:>6} {:>9} {:>9} {:>9} {:>9}", "provider", "corpus", "n", "roc_auc", "f1", "fpr", "fnr");
        for r in &report.aggregate {
            let _ = writeln!(
                out,
                "{:<16} {:<16} {:>6} {:>9} {:>9} {:>9} {:>9}",
                r.provider,
                r.corpus,
                r.n,
                fmt6_opt(r.roc_auc),
                fmt6_opt(r.f1),
                fmt6_opt(r.fpr),
                fmt6_opt(r.fnr)
            );
        }
    }
    if !report.cft.is_empty() {
        let _ = writeln!(
            out,
            "{:<16} {:<12} {:<10} {:<10} {:>6} {:>10} {:>21}",
            "provider", "source", "group", "slice", "pairs", "mean_cft", "ci_95"
        );
        for r in &report.cft {
            let ci = match (r.ci_low, r.ci_high) {
                (Some(lo), Some(hi)) => format!("[{}, {}]", fmt6_opt(Some(lo)), fmt6_opt(Some(hi))),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "{:<16} {:<12} {:<10} {:<10} {:>6} {:>10} {:>21}",
                r.provider,
                r.source,
                r.group,
                r.toxic_slice,
                r.n_pairs,
                fmt6_opt(Some(r.mean_cft)),
                ci
            );
        }
    }
    let _ = writeln!(out, "errors: {}, skipped sentences: {}", report.errors.len(), report.skips.len());
}

fn cmd_validate(a: &ValidateArgs, io: &mut Io<'_>) -> u8 {
    let config = match load_config(&a.config, &Overrides { seed: a.seed, ..Default::default() }, io) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match validate_planted_bias(&config) {
        Ok(report) => {
            let _ = writeln!(io.out, "{} template pairs", report.n_pairs);
            for assertion in &report.assertions {
                let _ = writeln!(io.out, "{assertion}");
            }
            if report.passed() {
                0
            } else {
                let failed = report.assertions.iter().filter(|a| !a.passed).count();
                fail!(io, 1, "{failed} assertion(s) failed")
            }
        }
        Err(e @ ValidationError::Config(_)) => fail!(io, 2, "{e}"),
        Err(e) => fail!(io, 1, "{e}"),
    }
}

fn cmd_cache(a: &CacheArgs, io: &mut Io<'_>) -> u8 {
    let config = match &a.config {
        Some(p) => match load_config(p, &Overrides { cache_dir: a.cache_dir.clone(), ..Default::default() }, io) {
            Ok(c) => Some(c),
            Err(code) => return code,
        },
        None => None,
    };
    let dir = match (&a.cache_dir, &config) {
        (Some(d), _) => d.clone(),
        (None, Some(c)) => c.cache_dir(),
        (None, None) => fail!(io, 2, "give --cache-dir or --config"),
    };
    if a.action != CacheAction::Purge && !dir.is_dir() {
        fail!(io, 2, "cache directory {} does not exist", dir.display());
    }
    let cache = match ScoreCache::open(&dir) {
        Ok(c) => c,
        Err(e) => fail!(io, 1, "{e}"),
    };
    match a.action {
        CacheAction::List => cache_list(&cache, io),
        CacheAction::Verify => match &config {
            Some(c) => cache_verify(&cache, c, io),
            None => fail!(io, 2, "cache verify needs --config for the provider specs"),
        },
        CacheAction::Purge => cache_purge(&cache, a, io),
    }
}

fn open_provider(cache: &ScoreCache, id: &str, io: &mut Io<'_>) -> Result<std::sync::Arc<ProviderCache>, u8> {
    cache.provider(id).map_err(|e| {
        let _ = writeln!(io.err, "error: {e}");
        1
    })
}

fn cache_list(cache: &ScoreCache, io: &mut Io<'_>) -> u8 {
    let ids = match cache.providers() {
        Ok(ids) => ids,
        Err(e) => fail!(io, 1, "{e}"),
    };
    let mut total = 0;
    for id in ids {
        let pc = match open_provider(cache, &id, io) {
            Ok(pc) => pc,
            Err(code) => return code,
        };
        let versions: BTreeSet<String> = pc.records().into_iter().map(|r| r.model_version).collect();
        let versions: Vec<String> = versions.into_iter().collect();
        total += pc.len();
        let _ = writeln!(io.out, "{id}\t{}\t{}", pc.len(), versions.join(","));
    }
    let _ = writeln!(io.out, "total\t{total}");
    0
}

fn cache_verify(cache: &ScoreCache, config: &AuditConfig, io: &mut Io<'_>) -> u8 {
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for spec in config.providers.iter().filter(|p| p.kind.uses_cache()) {
        if !cache.file_for(&spec.id).exists() {
            continue;
        }
        let pc = match open_provider(cache, &spec.id, io) {
            Ok(pc) => pc,
            Err(code) => return code,
        };
        for (i, record) in pc.records().iter().enumerate() {
            checked += 1;
            match normalize_response(&record.raw_response, spec, &record.key, &record.retrieved_at) {
                Ok(s) if s.hate_score == record.hate_score && s.flagged == record.flagged => {}
                Ok(s) => {
                    mismatches += 1;
                    let _ = writeln!(
                        io.out,
                        "mismatch\t{}\trecord {}\tstored ({}, {})\tnow ({}, {})",
                        spec.id,
                        i + 1,
                        record.hate_score,
                        record.flagged,
                        s.hate_score,
                        s.flagged
                    );
                }
                Err(e) => {
                    mismatches += 1;
                    let _ = writeln!(io.out, "mismatch\t{}\trecord {}\t{e}", spec.id, i + 1);
                }
            }
        }
    }
    let _ = writeln!(io.out, "checked {checked}, mismatches {mismatches}");
    if mismatches > 0 {
        1
    } else {
        0
    }
}

fn cache_purge(cache: &ScoreCache, a: &CacheArgs, io: &mut Io<'_>) -> u8 {
    let Some(id) = &a.provider else { fail!(io, 2, "cache purge needs --provider") };
    if !a.yes {
        let _ = write!(io.err, "delete cached responses of `{id}`? [y/N] ");
        let _ = io.err.flush();
        let mut answer = String::new();
        let _ = io.input.read_line(&mut answer);
        if !matches!(answer.trim(), "y" | "Y" | "yes") {
            let _ = writeln!(io.err, "aborted");
            return 1;
        }
    }
    match cache.purge(id) {
        Ok(true) => {
            let _ = writeln!(io.out, "purged {id}");
            0
        }
        Ok(false) => {
            let _ = writeln!(io.out, "no cache for {id}");
            0
        }
        Err(e) => fail!(io, 1, "{e}"),
    }
}

fn cmd_report(a: &ReportArgs, io: &mut Io<'_>) -> u8 {
    let text = match std::fs::read_to_string(&a.from) {
        Ok(t) => t,
        Err(e) => fail!(io, 2, "cannot read {}: {e}", a.from.display()),
    };
    let report = match AuditReport::from_json(&text) {
        Ok(r) => r,
        Err(e) => fail!(io, 2, "{} is not a report: {e}", a.from.display()),
    };
    print_summary(&report, io.out);
    if let Some(dir) = &a.out {
        match report.emit(dir, formats(&a.format)) {
            Ok(files) => {
                for f in files {
                    let _ = writeln!(io.out, "wrote {}", f.display());
                }
            }
            Err(e) => fail!(io, 1, "cannot write report to {}: {e}", dir.display()),
        }
    }
    0
}
