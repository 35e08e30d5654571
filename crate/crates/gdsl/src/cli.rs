//! `gdsl` subcommands. Exit codes: 0 success, 1 invalid input or failed
//! operation, 2 I/O failure, 3 the command was not understood (`parse-nl`).

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gdsl_core::infer::{infer_structure, DEFAULT_TOL};
use gdsl_core::model::{document_warnings, GlyphDocument};
use gdsl_core::nlcmd::parse_command;
use gdsl_core::ops::{apply, Operation};
use gdsl_core::render::SvgConfig;

use crate::backend::BackendConfig;
use crate::format::{deserialize_document, deserialize_ops, serialize_document};
use crate::svc::{serve, ServiceConfig};
use crate::svg_import::import_svg;
use crate::{compile, CompileError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_SUGGESTION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gdsl",
    version,
    about = "Glyph DSL compiler, inference and session service"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RenderFlags {
    /// Canvas width
    #[arg(long, default_value_t = 400.0)]
    pub width: f64,
    /// Canvas height
    #[arg(long, default_value_t = 400.0)]
    pub height: f64,
    /// Fractional digits in coordinates (0-8)
    #[arg(long, default_value_t = 4)]
    pub decimals: u8,
    /// Overrides the document's random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tag every element with `data-container-id`
    #[arg(long)]
    pub annotate: bool,
}

impl RenderFlags {
    fn config(&self) -> SvgConfig {
        SvgConfig {
            width: self.width,
            height: self.height,
            decimals: self.decimals,
            annotate: self.annotate,
            ..SvgConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a `.gdsl.json` document to SVG
    Compile {
        doc: PathBuf,
        /// Output file; standard output when omitted
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        render: RenderFlags,
    },
    /// Apply a JSON array of operations to a document
    Apply {
        doc: PathBuf,
        ops: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Overrides the document's random seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover repeater and compositor structure from an SVG file
    Infer {
        svg: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Fit tolerance relative to group size
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Translate an editing command into an operation proposal
    ParseNl {
        text: String,
        #[arg(long)]
        doc: Option<PathBuf>,
        #[arg(long)]
        selection: Option<String>,
    },
    /// Run the session service
    Serve {
        #[arg(long, default_value_t = 8080, env = "GDSL_PORT")]
        port: u16,
        #[arg(long, default_value = "127.0.0.1", env = "GDSL_BIND")]
        bind: String,
        #[arg(long, default_value = "gdsl-sessions", env = "GDSL_DATA_DIR")]
        data_dir: PathBuf,
        /// Origin allowed to call the API from a browser
        #[arg(long, env = "GDSL_CORS_ORIGIN")]
        cors_origin: Option<String>,
        /// Directory served under /ui/
        #[arg(long, env = "GDSL_UI_DIR")]
        ui_dir: Option<PathBuf>,
    },
}

/// Outcome of a subcommand: an exit code plus what to print on stdout and
/// stderr.
#[derive(Debug, Default, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: Vec<u8>) -> Self {
        Outcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: u8, msg: impl Into<String>) -> Self {
        let mut stderr = msg.into();
        stderr.push('\n');
        Outcome {
            code,
            stdout: Vec::new(),
            stderr,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Outcome> {
    fs::read(path).map_err(|e| Outcome::fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn read_doc(path: &Path) -> Result<(Vec<u8>, GlyphDocument), Outcome> {
    let bytes = read(path)?;
    let doc = deserialize_document(&bytes)
        .map_err(|e| Outcome::fail(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    Ok((bytes, doc))
}

/// Writes to `out`, or returns the bytes for stdout.
fn emit(out: &Option<PathBuf>, bytes: Vec<u8>, warnings: String) -> Outcome {
    let mut o = match out {
        Some(p) => match fs::write(p, &bytes) {
            Ok(()) => Outcome::ok(Vec::new()),
            Err(e) => return Outcome::fail(EXIT_IO, format!("{}: {e}", p.display())),
        },
        None => Outcome::ok(bytes),
    };
    o.stderr = warnings;
    o
}

fn warning_lines(doc: &GlyphDocument) -> String {
    document_warnings(doc)
        .iter()
        .map(|w| format!("warning: {w}\n"))
        .collect()
}

fn run_compile(doc: &Path, out: &Option<PathBuf>, flags: &RenderFlags) -> Outcome {
    let (_, d) = match read_doc(doc) {
        Ok(v) => v,
        Err(o) => return o,
    };
    match compile(&d, &flags.config(), flags.seed) {
        Ok(svg) => emit(out, svg.into_bytes(), warning_lines(&d)),
        Err(CompileError::Invalid(v)) => {
            Outcome::fail(EXIT_INVALID, format!("invalid document: {v}"))
        }
        Err(e) => Outcome::fail(EXIT_INVALID, e.to_string()),
    }
}

fn run_apply(doc: &Path, ops: &Path, out: &Option<PathBuf>, seed: Option<u64>) -> Outcome {
    let (input, mut d) = match read_doc(doc) {
        Ok(v) => v,
        Err(o) => return o,
    };
    let raw = match read(ops) {
        Ok(b) => b,
        Err(o) => return o,
    };
    let list: Vec<Operation> = match deserialize_ops(&raw) {
        Ok(l) => l,
        Err(e) => return Outcome::fail(EXIT_INVALID, format!("{}: {e}", ops.display())),
    };
    if list.is_empty() && seed.is_none() {
        // nothing applied: the document passes through untouched
        return emit(out, input, String::new());
    }
    if let Some(s) = seed {
        d.rng_seed = s;
    }
    for (i, op) in list.iter().enumerate() {
        match apply(&d, op) {
            Ok(next) => d = next,
            Err(e) => return Outcome::fail(EXIT_INVALID, format!("operation {i} failed: {e}")),
        }
    }
    emit(out, serialize_document(&d), warning_lines(&d))
}

fn run_infer(svg: &Path, out: &Option<PathBuf>, tol: f64) -> Outcome {
    let bytes = match read(svg) {
        Ok(b) => b,
        Err(o) => return o,
    };
    let text = match String::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => return Outcome::fail(EXIT_INVALID, format!("{}: {e}", svg.display())),
    };
    let elems = match import_svg(&text) {
        Ok(e) => e,
        Err(e) => return Outcome::fail(EXIT_INVALID, e.to_string()),
    };
    match infer_structure(&elems, tol) {
        Ok(doc) => emit(out, serialize_document(&doc), String::new()),
        Err(e) => Outcome::fail(EXIT_INVALID, e.to_string()),
    }
}

fn run_parse_nl(text: &str, doc: &Option<PathBuf>, selection: Option<&str>) -> Outcome {
    let d = match doc {
        Some(p) => {
            let bytes = match read(p) {
                Ok(b) => b,
                Err(o) => return o,
            };
            match deserialize_document(&bytes) {
                Ok(d) => d,
                Err(e) => return Outcome::fail(EXIT_IO, format!("{}: {e}", p.display())),
            }
        }
        None => GlyphDocument::new(),
    };
    let backend = BackendConfig::from_env().build();
    let r = parse_command(text, &d, selection, Some(&*backend));
    let mut out = serde_json::to_vec_pretty(&r).expect("parse result serializes");
    out.push(b'\n');
    Outcome {
        code: if r.is_proposal() {
            EXIT_OK
        } else {
            EXIT_SUGGESTION
        },
        stdout: out,
        stderr: String::new(),
    }
}

fn run_serve(
    port: u16,
    bind: &str,
    data_dir: &Path,
    cors_origin: &Option<String>,
    ui_dir: &Option<PathBuf>,
) -> Outcome {
    let addr: SocketAddr = match format!("{bind}:{port}").parse() {
        Ok(a) => a,
        Err(e) => return Outcome::fail(EXIT_INVALID, format!("bad address: {e}")),
    };
    let config = ServiceConfig {
        data_dir: data_dir.to_path_buf(),
        cors_origin: cors_origin.clone(),
        ui_dir: ui_dir.clone(),
        backend: BackendConfig::from_env(),
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return Outcome::fail(EXIT_IO, e.to_string()),
    };
    eprintln!("gdsl: serving {} on http://{addr}", data_dir.display());
    let result = rt.block_on(serve(config, addr, async {
        let _ = tokio::signal::ctrl_c().await;
    }));
    match result {
        Ok(()) => Outcome::ok(Vec::new()),
        Err(e) => Outcome::fail(EXIT_IO, e.to_string()),
    }
}

/// Runs one parsed invocation.
pub fn execute(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Compile { doc, out, render } => run_compile(doc, out, render),
        Command::Apply {
            doc,
            ops,
            out,
            seed,
        } => run_apply(doc, ops, out, *seed),
        Command::Infer { svg, out, tol } => run_infer(svg, out, *tol),
        Command::ParseNl {
            text,
            doc,
            selection,
        } => run_parse_nl(text, doc, selection.as_deref()),
        Command::Serve {
            port,
            bind,
            data_dir,
            cors_origin,
            ui_dir,
        } => run_serve(*port, bind, data_dir, cors_origin, ui_dir),
    }
}

/// Parses `args`, runs, prints, and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    let o = execute(&cli);
    let _ = std::io::stdout().write_all(&o.stdout);
    eprint!("{}", o.stderr);
    o.code
}
