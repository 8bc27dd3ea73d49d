//! `restruct` command line: audit, transform, compare and serve.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use restruct_core::audit::{diff_reports, run_audit, AuditDiff};
use restruct_core::dom::{parse_bytes, Document};
use restruct_core::extract::extract_accessible;
use restruct_core::llm::Mode;
use restruct_core::pipeline::{transform, Backend, ProviderKind, TransformResult};
use restruct_core::similarity::{aggregated_similarity, find_missing_links, SimilarityReport, DEFAULT_THRESHOLD};
use restruct_service::{error_body, ServiceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "restruct", version, about = "Audit and restructure HTML for screen reader users")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report accessibility violations.
    Audit(AuditArgs),
    /// Rebuild the page as clean semantic HTML.
    Regenerate(TransformArgs),
    /// Patch tags and attributes in place, keeping all content.
    Reorganize(TransformArgs),
    /// Content similarity and audit difference of two pages.
    Compare(CompareArgs),
    /// Run the local HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// HTML file, or "-" for stdin.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Exit with 1 when any violation is found.
    #[arg(long)]
    pub fail_on_violations: bool,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// HTML file, or "-" for stdin.
    pub input: PathBuf,
    /// remote, mock or offline. Defaults to remote when RESTRUCT_API_KEY is set.
    #[arg(long)]
    pub provider: Option<ProviderKind>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Input tokens per model call.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub attempts: Option<u32>,
    /// Where to write the transformed HTML.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the result JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub original: PathBuf,
    pub candidate: PathBuf,
    /// Embedding source. Remote embeds through RESTRUCT_EMBED_MODEL when set.
    #[arg(long)]
    pub provider: Option<ProviderKind>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Overrides RESTRUCT_PORT.
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub similarity: SimilarityReport,
    pub audit_diff: AuditDiff,
}

/// A failure with its exit code and, for JSON output, a body.
#[derive(Debug)]
struct Failure {
    code: i32,
    error: anyhow::Error,
    body: Option<serde_json::Value>,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: EXIT_FAILURE, error: e.into(), body: None }
    }
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: EXIT_USAGE, error, body: None }
}

pub struct Io<'a> {
    pub stdin: &'a mut dyn Read,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parse `args` (program name first) and run, returning the exit code.
pub fn run<I, T>(args: I, config: &ServiceConfig, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(io.stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, config, io) {
        Ok(code) => code,
        Err(f) => {
            if let Some(body) = f.body {
                let _ = writeln!(io.stdout, "{}", to_json(&body));
            }
            let _ = writeln!(io.stderr, "error: {:#}", f.error);
            f.code
        }
    }
}

fn dispatch(command: Command, config: &ServiceConfig, io: &mut Io) -> Result<i32, Failure> {
    match command {
        Command::Audit(args) => audit(args, io),
        Command::Regenerate(args) => run_transform(Mode::Regenerate, args, config, io),
        Command::Reorganize(args) => run_transform(Mode::Reorganize, args, config, io),
        Command::Compare(args) => compare(args, config, io),
        Command::Serve(args) => serve(args, config),
    }
}

fn read_input(path: &Path, stdin: &mut dyn Read) -> Result<Document, Failure> {
    let bytes = if path == Path::new("-") {
        let mut buf = Vec::new();
        stdin.read_to_end(&mut buf).context("reading stdin")?;
        buf
    } else {
        fs::read(path).with_context(|| format!("reading {}", path.display()))?
    };
    Ok(parse_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

fn audit(args: AuditArgs, io: &mut Io) -> Result<i32, Failure> {
    let doc = read_input(&args.input, io.stdin)?;
    let report = run_audit(&doc);
    match args.format {
        Format::Json => writeln!(io.stdout, "{}", to_json(&report))?,
        Format::Text => write!(io.stdout, "{}", report.render_text())?,
    }
    Ok(if args.fail_on_violations && report.instance_count > 0 { EXIT_FAILURE } else { EXIT_OK })
}

fn run_transform(mode: Mode, args: TransformArgs, config: &ServiceConfig, io: &mut Io) -> Result<i32, Failure> {
    let mut opts = config.options(mode, args.provider);
    opts.threshold = args.threshold;
    if let Some(b) = args.budget {
        opts.budget = b;
    }
    if let Some(a) = args.attempts {
        opts.max_attempts = a;
    }
    opts.validate().map_err(|e| usage(e.into()))?;
    let backend = Backend::for_provider(opts.provider, &config.provider)?;
    let doc = read_input(&args.input, io.stdin)?;

    let result: TransformResult = match transform(&doc, &opts, &backend) {
        Ok(r) => r,
        Err(e) => {
            let body = error_body(&e);
            if let Some(path) = &args.report {
                write_file(path, &to_json(&body))?;
            }
            return Err(Failure {
                code: EXIT_FAILURE,
                body: (args.format == Format::Json).then_some(body),
                error: e.into(),
            });
        }
    };

    if let Some(path) = &args.out {
        write_file(path, &result.html)?;
    }
    if let Some(path) = &args.report {
        write_file(path, &to_json(&result))?;
    }
    match args.format {
        Format::Json => writeln!(io.stdout, "{}", to_json(&result))?,
        Format::Text if args.out.is_none() => write!(io.stdout, "{}", result.html)?,
        Format::Text => {}
    }
    writeln!(
        io.stderr,
        "{mode}: similarity {:.4} (threshold {}), violations {} -> {}, attempts {}",
        result.similarity.score,
        result.similarity.threshold,
        result.audit_before.instance_count,
        result.audit_after.instance_count,
        result.attempts,
        mode = mode.as_str(),
    )?;
    Ok(EXIT_OK)
}

fn compare(args: CompareArgs, config: &ServiceConfig, io: &mut Io) -> Result<i32, Failure> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(usage(anyhow!("threshold {} is outside [0, 1]", args.threshold)));
    }
    if args.original == Path::new("-") && args.candidate == Path::new("-") {
        return Err(usage(anyhow!("only one input can come from stdin")));
    }
    let provider = args.provider.unwrap_or(config.default_provider);
    let backend = Backend::for_provider(provider, &config.provider)?;
    let a = read_input(&args.original, io.stdin)?;
    let b = read_input(&args.candidate, io.stdin)?;
    let score = aggregated_similarity(&extract_accessible(&a), &extract_accessible(&b), backend.embedder.as_ref())?;
    let mut similarity = SimilarityReport::new(score, args.threshold, backend.embedder.name());
    similarity.missing_anchors = find_missing_links(&a, &b);
    let report = CompareReport { audit_diff: diff_reports(&run_audit(&a), &run_audit(&b)), similarity };
    match args.format {
        Format::Json => writeln!(io.stdout, "{}", to_json(&report))?,
        Format::Text => {
            let s = &report.similarity;
            let verdict = if s.pass { "pass" } else { "fail" };
            writeln!(io.stdout, "similarity {:.4} ({verdict} at {}, {})", s.score, s.threshold, s.provider)?;
            for m in &s.missing_anchors {
                writeln!(io.stdout, "missing link {} {:?}", m.href, m.text)?;
            }
            let d = &report.audit_diff;
            writeln!(io.stdout, "violations {} -> {} ({:+})", d.before_total, d.after_total, d.total_delta)?;
            for r in d.rules.iter().filter(|r| r.delta != 0) {
                writeln!(io.stdout, "  {:<14} {} -> {} ({:+})", r.rule, r.before, r.after, r.delta)?;
            }
        }
    }
    Ok(if report.similarity.pass { EXIT_OK } else { EXIT_FAILURE })
}

fn serve(args: ServeArgs, config: &ServiceConfig) -> Result<i32, Failure> {
    let mut config = config.clone();
    if let Some(port) = args.port {
        if port == 0 {
            return Err(usage(anyhow!("port must be in 1..=65535")));
        }
        config.port = port;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(restruct_service::serve(config))?;
    Ok(EXIT_OK)
}
