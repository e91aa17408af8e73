use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use babelview::air::{parse_program_with_stubs, render_program, MethodSig};
use babelview::alarms::{aggregate_corpus, emit_report, render_table, AlarmReport};
use babelview::callgraph::build_callgraph;
use babelview::feasibility::scan_http_urls;
use babelview::instrument::instrument;
use babelview::interface::{all_interface_methods, map_webviews};
use babelview::oracle::{explore, DEFAULT_MAX_SEQUENCE, DEFAULT_MAX_STEPS};
use babelview::pipeline::{
    analyze_source, exit_code, AnalyzeOptions, EXIT_ALARMS, EXIT_CLEAN, EXIT_ERROR,
};
use babelview::taint::{RunOptions, SourceSinkConfig};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "babelview",
    version,
    about = "Webview JavaScript bridge analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis on one app and print its report.
    Analyze {
        app: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the app with BabelView classes inserted.
    Instrument {
        app: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "stubs")]
        stubs: Vec<PathBuf>,
    },
    /// Analyze every `.air` file under a directory and aggregate the results.
    Corpus {
        dir: PathBuf,
        /// Corpus summary destination.
        #[arg(long)]
        out: PathBuf,
        /// Directory receiving one report per app.
        #[arg(long)]
        reports: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        /// Also print the per-category table.
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Execute the app concretely under every attacker sequence.
    Oracle {
        app: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_SEQUENCE)]
        max_seq: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
    },
    /// List hard-coded `http://` URLs.
    ScanHttp { app: PathBuf },
}

#[derive(Args, Clone)]
struct AnalysisArgs {
    /// Extra stub files merged with the platform stubs.
    #[arg(long = "stubs")]
    stubs: Vec<PathBuf>,
    /// Source and sink configuration replacing the bundled one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 900.0)]
    timeout_secs: f64,
    #[arg(long, default_value_t = 3)]
    max_access_path: usize,
    #[arg(long, default_value_t = 2)]
    call_depth: usize,
    /// Include phase durations in reports.
    #[arg(long)]
    timings: bool,
}

impl AnalysisArgs {
    fn options(&self) -> Result<AnalyzeOptions> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            bail!("--timeout-secs must be positive");
        }
        let config = match &self.config {
            Some(p) => Some(
                SourceSinkConfig::parse(&read(p)?).with_context(|| format!("{}", p.display()))?,
            ),
            None => None,
        };
        Ok(AnalyzeOptions {
            extra_stubs: self.stubs.iter().map(|p| read(p)).collect::<Result<_>>()?,
            config,
            run: RunOptions {
                max_access_path: self.max_access_path,
                call_depth: self.call_depth,
                timeout: Some(Duration::from_secs_f64(self.timeout_secs)),
                disable_attacker: false,
            },
            timings: self.timings,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn app_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Writes through a temporary sibling file so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes to stdout; a reader that went away early is not an error.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn analyze_file(path: &Path, opts: &AnalyzeOptions) -> Result<AlarmReport> {
    let text = read(path)?;
    let analysis = analyze_source(&app_id(path), &text, opts)
        .with_context(|| format!("{}", path.display()))?;
    Ok(analysis.report)
}

fn air_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(d) = pending.pop() {
        for entry in fs::read_dir(&d).with_context(|| format!("cannot list {}", d.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                pending.push(path);
            } else if path.extension().is_some_and(|e| e == "air") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze { app, analysis, out } => {
            let report = analyze_file(&app, &analysis.options()?)?;
            let json = emit_report(&report);
            match out {
                Some(p) => write_atomic(&p, &json)?,
                None => emit(&json)?,
            }
            if report.stats.timed_out {
                eprintln!(
                    "{}: analysis timed out after {} s",
                    app.display(),
                    analysis.timeout_secs
                );
            }
            Ok(exit_code(&report))
        }
        Command::Instrument { app, out, stubs } => {
            let extra: Vec<String> = stubs.iter().map(|p| read(p)).collect::<Result<_>>()?;
            let refs: Vec<&str> = extra.iter().map(String::as_str).collect();
            let program = parse_program_with_stubs(&read(&app)?, &refs)
                .with_context(|| format!("{}", app.display()))?;
            let graph = build_callgraph(&program)?;
            let map = map_webviews(&program, &graph);
            let inst = instrument(&program, &map)?;
            for note in &inst.notes {
                eprintln!("note: {note}");
            }
            write_atomic(&out, &render_program(&inst.program))?;
            Ok(EXIT_CLEAN)
        }
        Command::Corpus {
            dir,
            out,
            reports,
            jobs,
            table,
            analysis,
        } => {
            let opts = analysis.options()?;
            let files = air_files(&dir)?;
            if files.is_empty() {
                bail!("no .air files under {}", dir.display());
            }
            if let Some(r) = &reports {
                fs::create_dir_all(r).with_context(|| format!("cannot create {}", r.display()))?;
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()?;
            let results: Vec<(PathBuf, Result<AlarmReport>)> = pool.install(|| {
                files
                    .par_iter()
                    .map(|f| (f.clone(), analyze_file(f, &opts)))
                    .collect()
            });
            let mut code = EXIT_CLEAN;
            let mut ok = Vec::new();
            for (path, result) in results {
                match result {
                    Ok(report) => {
                        if let Some(r) = &reports {
                            write_atomic(
                                &r.join(format!("{}.json", report.app)),
                                &emit_report(&report),
                            )?;
                        }
                        code = code.max(exit_code(&report));
                        ok.push(report);
                    }
                    Err(e) => {
                        eprintln!("{}: {e:#}", path.display());
                        code = EXIT_ERROR;
                    }
                }
            }
            let summary = aggregate_corpus(&ok)?;
            let mut json = serde_json::to_string_pretty(&serde_json::to_value(&summary)?)?;
            json.push('\n');
            write_atomic(&out, &json)?;
            if table {
                emit(&render_table(&summary))?;
            }
            Ok(code)
        }
        Command::Oracle {
            app,
            max_seq,
            max_steps,
        } => {
            let program = parse_program_with_stubs(&read(&app)?, &[])
                .with_context(|| format!("{}", app.display()))?;
            let graph = build_callgraph(&program)?;
            let map = map_webviews(&program, &graph);
            let methods: Vec<MethodSig> = all_interface_methods(&program, &map)
                .iter()
                .map(|m| m.owner_sig())
                .collect();
            let config = SourceSinkConfig::default_config().resolve(&program)?;
            let traces = explore(&program, &config, &methods, max_seq, max_steps)?;
            emit(&format!("{}\n", serde_json::to_string_pretty(&traces)?))?;
            let partial = traces.iter().any(|t| t.partial);
            Ok(if partial { EXIT_ERROR } else { EXIT_CLEAN })
        }
        Command::ScanHttp { app } => {
            let program = parse_program_with_stubs(&read(&app)?, &[])
                .with_context(|| format!("{}", app.display()))?;
            let urls = scan_http_urls(&program);
            emit(&format!("{}\n", serde_json::to_string_pretty(&urls)?))?;
            Ok(if urls.is_empty() {
                EXIT_CLEAN
            } else {
                EXIT_ALARMS
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
