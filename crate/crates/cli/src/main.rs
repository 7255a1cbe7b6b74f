use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riemann_core::scan::{self, ScanConfig, ScanKind, ScanOutput};
use riemann_core::verify::{render_table, run_oracles, VerifyOptions};
use riemann_core::{EllipsoidType, Error};

/// Existence, ellipticity and normal-form stability scans of Riemann
/// ellipsoids over the shape triangle `0 < y < x < 1`.
#[derive(Parser, Debug)]
#[command(name = "riemann", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Region membership with the boundary function at each grid point.
    Regions(ScanArgs),
    /// Linear stability at each grid point.
    Ellipticity(ScanArgs),
    /// Birkhoff normal form and convexity class at each grid point.
    Classify(ScanArgs),
    /// Resonances of the normal-form spectra over the grid.
    Resonances {
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long)]
        max_order: Option<u32>,
        /// CSV of resonance curve points (`nu,order,x,y`).
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Runs the oracle suite and prints a pass/fail table.
    Verify {
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 10_000)]
        random_samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        /// Builds the chart frames on the wrong axis; the block oracle must fail.
        #[arg(long)]
        wrong_frame_axis: bool,
    },
}

/// Scan settings. Flags override the values read from `--config`.
#[derive(Args, Debug)]
struct ScanArgs {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// S2, S3, I, II or III.
    #[arg(long = "type")]
    kind: Option<String>,
    #[arg(long)]
    branch: Option<String>,
    /// Spacing of the vertical grid lines.
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    points_min: Option<usize>,
    #[arg(long)]
    points_max: Option<usize>,
    /// Explicit points `x:y;x:y;...` instead of grid lines.
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    y_min: Option<f64>,
    #[arg(long)]
    y_max: Option<f64>,
    #[arg(long)]
    tol_ell: Option<f64>,
    #[arg(long)]
    res_tol: Option<f64>,
    #[arg(long)]
    classify_tol: Option<f64>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    near_res_tol: Option<f64>,
    #[arg(long)]
    refine_steps: Option<u32>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Scan CSV; written to stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            Error::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn io_err(what: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", what.display()))
}

impl ScanArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("type", self.kind.clone());
        put("branch", self.branch.clone());
        put("dx", self.dx.map(|v| v.to_string()));
        put("points_min", self.points_min.map(|v| v.to_string()));
        put("points_max", self.points_max.map(|v| v.to_string()));
        put("points", self.points.clone());
        put("x_min", self.x_min.map(|v| v.to_string()));
        put("x_max", self.x_max.map(|v| v.to_string()));
        put("y_min", self.y_min.map(|v| v.to_string()));
        put("y_max", self.y_max.map(|v| v.to_string()));
        put("tol_ell", self.tol_ell.map(|v| v.to_string()));
        put("res_tol", self.res_tol.map(|v| v.to_string()));
        put("classify_tol", self.classify_tol.map(|v| v.to_string()));
        put("n_theta", self.n_theta.map(|v| v.to_string()));
        put("near_res_tol", self.near_res_tol.map(|v| v.to_string()));
        put("refine_steps", self.refine_steps.map(|v| v.to_string()));
        put("g", self.g.map(|v| v.to_string()));
        put("threads", self.threads.map(|v| v.to_string()));
        out
    }

    fn config(&self) -> Result<ScanConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => {
                let mut text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
                // The file may leave the type to the flag.
                if let Some(kind) = &self.kind {
                    text = format!("type = {kind}\n{text}");
                }
                ScanConfig::parse(&text)?
            }
            None => {
                let kind = self
                    .kind
                    .as_deref()
                    .ok_or_else(|| Failure::Usage("`--type` is required without `--config`".into()))?;
                ScanConfig::new(kind.parse::<EllipsoidType>()?)
            }
        };
        for (k, v) in self.overrides() {
            cfg.set(k, &v)?;
        }
        if let Some(p) = &self.csv {
            cfg.csv = Some(p.clone());
        }
        if let Some(p) = &self.svg {
            cfg.svg = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Writes the outputs. When the CSV goes to stdout the summary goes to
/// stderr so the CSV stays parseable.
fn emit(cfg: &ScanConfig, out: &ScanOutput, extra: &str) -> Result<(), Failure> {
    scan::write_outputs(cfg, out)?;
    let summary = format!("type {}\n{}{extra}", cfg.kind, out.summary());
    if cfg.csv.is_none() {
        let stdout = io::stdout().lock();
        out.write_csv(stdout)?;
        eprint!("{summary}");
    } else {
        print!("{summary}");
    }
    Ok(())
}

fn run_scan(args: &ScanArgs, kind: ScanKind) -> Result<(), Failure> {
    let cfg = args.config()?;
    let out = scan::run_scan(&cfg, kind)?;
    emit(&cfg, &out, "")
}

fn run_resonances(args: &ScanArgs, max_order: Option<u32>, curves: Option<&Path>) -> Result<(), Failure> {
    let mut cfg = args.config()?;
    if let Some(m) = max_order {
        cfg.set("max_order", &m.to_string())?;
        cfg.validate()?;
    }
    let (out, report) = scan::run_resonances(&cfg)?;
    if let Some(p) = curves {
        let f = fs::File::create(p).map_err(|e| io_err(p, e))?;
        report.write_csv(io::BufWriter::new(f))?;
    }
    let mut extra = format!(
        "union_spectrum {}\nresonances {}\n",
        report.union_size,
        report.count()
    );
    for (order, n) in report.count_by_order() {
        extra += &format!("resonances_order_{order} {n}\n");
    }
    for c in &report.curves {
        extra += &format!(
            "nu {} order {} points {}\n",
            scan::format_nu(&c.nu),
            c.order,
            c.points.len()
        );
    }
    emit(&cfg, &out, &extra)
}

fn run_verify(opts: VerifyOptions) -> Result<(), Failure> {
    let results = run_oracles(&opts)?;
    let table = render_table(&results);
    let mut stdout = io::stdout().lock();
    stdout
        .write_all(table.as_bytes())
        .map_err(|e| Failure::Io(e.to_string()))?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("oracle failures: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Regions(a) => run_scan(a, ScanKind::Regions),
        Command::Ellipticity(a) => run_scan(a, ScanKind::Ellipticity),
        Command::Classify(a) => run_scan(a, ScanKind::Classify),
        Command::Resonances {
            scan,
            max_order,
            curves,
        } => run_resonances(scan, *max_order, curves.as_deref()),
        Command::Verify {
            samples,
            random_samples,
            seed,
            g,
            wrong_frame_axis,
        } => run_verify(VerifyOptions {
            samples_per_type: *samples,
            random_samples: *random_samples,
            seed: *seed,
            g: *g,
            wrong_frame_axis: *wrong_frame_axis,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) | Failure::Numerical(m) | Failure::Io(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
