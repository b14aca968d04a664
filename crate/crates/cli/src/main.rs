//! `shapespace`: distances, midpoints, geodesics and means of shapes.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use shapespace::convex::{self, ConvexBoundary, NormalField};
use shapespace::domain::{Shape, TailBudget};
use shapespace::geo::{self, Candidates, GeodesicOptions, KarcherOptions, MeanMode};
use shapespace::metrics::{self, MetricConfig, Variant};
use shapespace::profiles::{Profile, Requirements};
use shapespace::rigid::{self, QuotientOptions};
use shapespace::{io, morph, Error};

#[derive(Parser)]
#[command(name = "shapespace", version, about = "Metrics on compact sets via weighted distance functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance ‖φ∘u_A − φ∘u_B‖_p with its error estimate.
    Dist {
        a: PathBuf,
        b: PathBuf,
        /// Also write both embedded fields as text grids.
        #[arg(long)]
        fields: bool,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Hausdorff distance between the sample sets.
    Hausdorff {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Distance modulo rigid motions, with the aligning motion.
    QuotientDist {
        a: PathBuf,
        b: PathBuf,
        /// Search improper motions too.
        #[arg(long)]
        reflections: bool,
        /// Coarse rotation samples (default: 64 angles in 2-D, 576 in 3-D).
        #[arg(long)]
        rotations: Option<usize>,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 4000)]
        max_evaluations: usize,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Hausdorff midpoint (Menger midpoint) at fraction λ from A.
    Midpoint {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Signed-distance blend {t b_B + (1 − t) b_A ≤ 0}.
    Blend {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Average of several masks.
    Average {
        #[arg(required = true, num_args = 2..)]
        shapes: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = AverageMethod::Sdls)]
        method: AverageMethod,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Discrete geodesic with K segments; writes every frame and the sweep history.
    Geodesic {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 8)]
        frames: usize,
        #[arg(long, default_value_t = 200)]
        max_sweeps: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long, default_value_t = 4)]
        patch: usize,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Karcher mean: a shape whose summed squared distance is at most ρ*.
    Mean {
        #[arg(required = true, num_args = 2..)]
        shapes: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Metric)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = CandidateArg::Masks)]
        candidates: CandidateArg,
        #[arg(long, default_value_t = 400)]
        max_evaluations: usize,
        /// Geodesic segments per distance in geodesic mode.
        #[arg(long, default_value_t = 16)]
        geodesic_frames: usize,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Riemannian inner product of two normal speeds on a convex curve.
    Riemann {
        boundary: PathBuf,
        #[arg(long)]
        alpha_file: PathBuf,
        /// Defaults to the alpha file.
        #[arg(long)]
        beta_file: Option<PathBuf>,
        #[arg(long, default_value = "exp:1")]
        profile: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Integrability certificates of a profile.
    CheckProfile {
        profile: String,
        #[arg(long, default_value_t = 2.0, value_parser = parse_p)]
        p: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, value_enum, default_value_t = VariantArg::Unsigned)]
        variant: VariantArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fattened set A + D_r on the window grid.
    Fatten {
        a: PathBuf,
        #[arg(long)]
        r: f64,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args, Serialize)]
struct MetricArgs {
    /// Profile spec: exp:RATE, invpow:K or flattop:K.
    #[arg(long, default_value = "exp:1")]
    profile: String,
    /// Exponent in [1, ∞]; `inf` selects the sup norm.
    #[arg(long, default_value_t = 2.0, value_parser = parse_p)]
    p: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Unsigned)]
    variant: VariantArg,
    /// Grid spacing of the quadrature window.
    #[arg(long, default_value_t = 0.05)]
    h: f64,
    /// Tail budget as a fraction of ‖φ(|x|)‖_p^p.
    #[arg(long, default_value_t = 1e-8)]
    tail: f64,
    /// Largest window, in cells.
    #[arg(long)]
    max_cells: Option<usize>,
}

#[derive(Args, Serialize)]
struct OutArgs {
    /// Output directory for the manifest and any shape files.
    #[arg(long, default_value = "shapespace-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = MaskFormat::Text)]
    mask_format: MaskFormat,
    /// Reserved; no command draws random numbers.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print window and search details to stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum VariantArg {
    Unsigned,
    Signed,
    Sobolev,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Unsigned => Variant::Unsigned,
            VariantArg::Signed => Variant::Signed,
            VariantArg::Sobolev => Variant::Sobolev,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MaskFormat {
    Text,
    Pgm,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum AverageMethod {
    Sdls,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Metric,
    Geodesic,
}

#[derive(Clone, Copy, ValueEnum)]
enum CandidateArg {
    Masks,
    Singletons,
}

fn parse_p(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if p >= 1.0 {
        Ok(p)
    } else {
        Err(format!("p must lie in [1, inf], got {s}"))
    }
}

/// A failed run: validation errors exit with 2, numerical failures with 3.
enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Run<T = ()> = Result<T, Failure>;

fn io_failure(path: &Path, e: impl Display) -> Failure {
    Failure::Numerical(format!("cannot write {}: {e}", path.display()))
}

/// Collects printed results, written files and the manifest of one run.
struct Report<'a> {
    out: &'a OutArgs,
    command: &'static str,
    config: Value,
    inputs: Vec<String>,
    results: serde_json::Map<String, Value>,
    outputs: Vec<String>,
}

impl<'a> Report<'a> {
    fn new(command: &'static str, out: &'a OutArgs, inputs: &[&PathBuf], config: Value) -> Run<Self> {
        fs::create_dir_all(&out.out).map_err(|e| io_failure(&out.out, e))?;
        Ok(Report {
            out,
            command,
            config,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            results: serde_json::Map::new(),
            outputs: Vec::new(),
        })
    }

    fn verbose(&self) -> bool {
        self.out.verbose > 0
    }

    /// Prints `key: value` and records it in the manifest.
    fn put(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("serializable result");
        let text = match &v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        println!("{key}: {text}");
        self.results.insert(key.to_string(), v);
    }

    /// Records a value in the manifest without printing it.
    fn record(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.to_string(), serde_json::to_value(value).expect("serializable result"));
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.out.join(name)
    }

    fn write_shape(&mut self, stem: &str, s: &Shape) -> Run {
        let ext = match (s, self.out.mask_format) {
            (Shape::Points(_), _) => "pts",
            (Shape::Mask(_), MaskFormat::Text) => "txt",
            (Shape::Mask(_), MaskFormat::Pgm) => "pgm",
        };
        let name = format!("{stem}.{ext}");
        let path = self.path(&name);
        io::write_shape(&path, s)?;
        if ext == "pgm" {
            self.outputs.push(format!("{name}.hdr"));
        }
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Run {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io_failure(&path, e))
    }

    fn finish(self) -> Run {
        let manifest = json!({
            "command": self.command,
            "config": self.config,
            "output_options": self.out,
            "inputs": self.inputs,
            "results": self.results,
            "outputs": self.outputs,
        });
        let path = self.out.out.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&path, text).map_err(|e| io_failure(&path, e))
    }
}

fn read(path: &Path) -> Run<Shape> {
    io::read_shape(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn config(m: &MetricArgs, dim: usize) -> Run<MetricConfig> {
    if !(m.tail > 0.0 && m.tail < 1.0) {
        return Err(Failure::Validation(format!("--tail must lie in (0, 1), got {}", m.tail)));
    }
    let pr = Profile::parse(&m.profile, dim, m.p)?;
    let mut cfg = MetricConfig::with_variant(pr, m.h, m.variant.into())?.tail_budget(TailBudget::Relative(m.tail));
    if let Some(c) = m.max_cells {
        cfg = cfg.max_cells(c);
    }
    Ok(cfg)
}

fn echo(m: &MetricArgs, cfg: &MetricConfig) -> Value {
    json!({ "flags": m, "resolved": cfg })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = threads().and_then(|_| run(cli));
    match status {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Caps the worker pool from `SHAPESPACE_THREADS`.
fn threads() -> Run {
    let Ok(v) = std::env::var("SHAPESPACE_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Validation(format!("SHAPESPACE_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Numerical(format!("cannot start {n} threads: {e}")))
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Dist { a, b, fields, metric, out } => {
            let (sa, sb) = (read(&a)?, read(&b)?);
            let cfg = config(&metric, sa.dim())?;
            let mut r = Report::new("dist", &out, &[&a, &b], echo(&metric, &cfg))?;
            let window = cfg.window_for(&[&sa, &sb])?;
            if r.verbose() {
                eprintln!("window: {:?} cells at spacing {}", window.grid().dims(), window.spacing());
            }
            let d = metrics::dist_on(&sa, &sb, &cfg, &window)?;
            r.put("value", d.value);
            r.put("error", d.error);
            r.put("grid_error", d.grid_error);
            r.put("tail_bound", d.tail_bound);
            r.put("tail_budget", window.tail_budget());
            if let Some(t) = d.terms {
                r.put("sobolev_norm", "‖f‖^p = ‖f‖_p^p + Σ_i ‖∂_i f‖_p^p");
                r.record("terms", t);
            }
            r.record("window_dims", window.grid().dims());
            if fields {
                for (name, s) in [("field_a.txt", &sa), ("field_b.txt", &sb)] {
                    let e = metrics::embed_on(s, &cfg, &window)?;
                    let text = io::format_field(window.grid(), e.values());
                    r.write_text(name, &text)?;
                }
            }
            r.finish()
        }
        Command::Hausdorff { a, b, out } => {
            let (sa, sb) = (read(&a)?, read(&b)?);
            let mut r = Report::new("hausdorff", &out, &[&a, &b], Value::Null)?;
            r.put("value", metrics::hausdorff(&sa, &sb)?);
            r.put("error", 0.0);
            r.finish()
        }
        Command::QuotientDist { a, b, reflections, rotations, tolerance, max_evaluations, metric, out } => {
            let (sa, sb) = (read(&a)?, read(&b)?);
            let cfg = config(&metric, sa.dim())?;
            let opts =
                QuotientOptions { reflections, rotations, tolerance, max_evaluations, ..QuotientOptions::default() };
            let mut conf = echo(&metric, &cfg);
            conf["quotient"] = json!(opts);
            let mut r = Report::new("quotient-dist", &out, &[&a, &b], conf)?;
            let q = rigid::quotient_dist(&sa, &sb, &cfg, &opts)?;
            r.put("value", q.value);
            r.put("error", q.error);
            r.put("unaligned", q.unaligned);
            if let Some(theta) = q.motion.angle() {
                r.put("angle", theta);
            } else if let Some((axis, angle)) = q.motion.axis_angle_parts() {
                r.put("axis", axis);
                r.put("angle", angle);
            }
            r.put("proper", q.motion.is_proper());
            r.put("translation", q.motion.translation_part());
            if let Some(c) = &q.certificate {
                r.put("translation_bound", c.bound);
                r.put("certificate_separation", c.separation);
            }
            r.put("evaluations", q.evaluations);
            r.record("rotation", q.motion.rotation());
            r.finish()
        }
        Command::Midpoint { a, b, lambda, metric, out } => {
            let (sa, sb) = (read(&a)?, read(&b)?);
            let cfg = config(&metric, sa.dim())?;
            let mut r = Report::new("midpoint", &out, &[&a, &b], echo(&metric, &cfg))?;
            let window = cfg.window_for(&[&sa, &sb])?;
            let c = morph::menger_midpoint(&sa, &sb, lambda, &window)?;
            let slack = 0.5 * window.spacing() * (sa.dim() as f64).sqrt();
            r.put("lambda", lambda);
            r.put("hausdorff_ab", metrics::hausdorff(&sa, &sb)?);
            r.put("hausdorff_ac", metrics::hausdorff(&sa, &c)?);
            r.put("hausdorff_bc", metrics::hausdorff(&sb, &c)?);
            r.put("error", 2.0 * slack);
            r.write_shape("midpoint", &c)?;
            r.finish()
        }
        Command::Blend { a, b, t, metric, out } => {
            let (sa, sb) = (read(&a)?, read(&b)?);
            let cfg = config(&metric, sa.dim())?;
            let mut r = Report::new("blend", &out, &[&a, &b], echo(&metric, &cfg))?;
            let window = cfg.window_for(&[&sa, &sb])?;
            let c = morph::sd_blend(&sa, &sb, t, &window)?
                .ok_or_else(|| Failure::Numerical(format!("the blend at t = {t} is empty; try a Menger midpoint")))?;
            r.put("t", t);
            r.put("cells", c.as_mask().map_or(0, |m| m.count()));
            r.write_shape("blend", &c)?;
            r.finish()
        }
        Command::Average { shapes, method, metric, out } => {
            let inputs: Vec<Shape> = shapes.iter().map(|p| read(p)).collect::<Run<_>>()?;
            let refs: Vec<&Shape> = inputs.iter().collect();
            let cfg = config(&metric, inputs[0].dim())?;
            let mut conf = echo(&metric, &cfg);
            conf["method"] = json!(method);
            let paths: Vec<&PathBuf> = shapes.iter().collect();
            let mut r = Report::new("average", &out, &paths, conf)?;
            let window = cfg.window_for(&refs)?;
            let avg = morph::sdls_average(&refs, &window)?
                .ok_or_else(|| Failure::Numerical("the signed-distance average is empty".into()))?;
            r.put("cells", avg.as_mask().map_or(0, |m| m.count()));
            r.write_shape("average", &avg)?;
            r.finish()
        }
        Command::Geodesic { a, b, frames, max_sweeps, tolerance, patch, metric, out } => {
            let (sa, sb) = (read(&a)?, read(&b)?);
            let cfg = config(&metric, sa.dim())?;
            let opts = GeodesicOptions { max_sweeps, tolerance, patch };
            let mut conf = echo(&metric, &cfg);
            conf["frames"] = json!(frames);
            conf["solver"] = json!(opts);
            let mut r = Report::new("geodesic", &out, &[&a, &b], conf)?;
            let g = geo::geodesic_solve(&sa, &sb, frames, &cfg, &opts)?;
            let ends = metrics::dist_on(&sa, &sb, &cfg, &g.window)?;
            r.put("endpoint_distance", ends.value);
            r.put("endpoint_error", ends.error);
            r.put("length", g.length);
            r.put("action", g.action);
            r.put("initial_length", g.initial_length);
            r.put("initial_action", g.initial_action);
            r.put("sweeps", g.sweeps);
            r.put("converged", g.converged);
            r.record("segments", &g.segments);
            let residuals: Vec<f64> = g.path.frames()[1..frames]
                .iter()
                .map(|f| {
                    let e = metrics::embed_on(f, &cfg, &g.window)?;
                    geo::nc_membership_residual(e.values(), &g.window, cfg.profile())
                })
                .collect::<Result<_, Error>>()?;
            r.record("eikonal_residuals", &residuals);
            let width = frames.to_string().len().max(3);
            for (i, f) in g.path.frames().iter().enumerate() {
                r.write_shape(&format!("frame_{i:0width$}"), f)?;
            }
            let mut csv = String::from("sweep,action,length,accepted\n");
            for h in &g.history {
                csv.push_str(&format!("{},{},{},{}\n", h.sweep, h.action, h.length, h.accepted));
            }
            r.write_text("history.csv", &csv)?;
            r.finish()
        }
        Command::Mean { shapes, mode, candidates, max_evaluations, geodesic_frames, metric, out } => {
            let inputs: Vec<Shape> = shapes.iter().map(|p| read(p)).collect::<Run<_>>()?;
            let refs: Vec<&Shape> = inputs.iter().collect();
            let cfg = config(&metric, inputs[0].dim())?;
            let opts = KarcherOptions {
                mode: match mode {
                    ModeArg::Metric => MeanMode::Metric,
                    ModeArg::Geodesic => MeanMode::Geodesic,
                },
                candidates: match candidates {
                    CandidateArg::Masks => Candidates::MaskMoves,
                    CandidateArg::Singletons => Candidates::Singletons,
                },
                max_evaluations,
                geodesic_frames,
                ..KarcherOptions::default()
            };
            let mut conf = echo(&metric, &cfg);
            conf["mean"] = json!(opts);
            let paths: Vec<&PathBuf> = shapes.iter().collect();
            let mut r = Report::new("mean", &out, &paths, conf)?;
            let m = geo::karcher_mean(&refs, &cfg, &opts)?;
            r.put("objective", m.objective);
            r.put("rho_star", m.rho_star);
            r.put("initializer", m.initializer);
            r.put("stationary", m.stationary);
            r.put("evaluations", m.evaluations);
            r.write_shape("mean", &m.shape)?;
            r.finish()
        }
        Command::Riemann { boundary, alpha_file, beta_file, profile, out } => {
            let input = io::read_boundary(&boundary)?;
            let alpha = io::read_values(&alpha_file)?;
            let beta = match &beta_file {
                Some(p) => io::read_values(p)?,
                None => alpha.clone(),
            };
            let pr = Profile::parse(&profile, 2, 2.0)?;
            let bd = ConvexBoundary::new(input.clone())?;
            let fa = NormalField::from_samples(&bd, &input, alpha)?;
            let fb = NormalField::from_samples(&bd, &input, beta)?;
            let mut paths = vec![&boundary, &alpha_file];
            if let Some(p) = &beta_file {
                paths.push(p);
            }
            let mut r = Report::new("riemann", &out, &paths, json!({ "profile": pr }))?;
            let (ca, cb) = convex::riem_constants(&pr)?;
            r.put("a", ca);
            r.put("b", cb);
            r.put("inner", convex::riem_inner(&bd, &fa, &fb, &pr)?);
            r.put("inner_polar", convex::riem_inner_polar(&bd, &fa, &fb, &pr)?);
            r.put("length", bd.length());
            r.put("samples", bd.len());
            r.put("resampled", bd.resampled());
            r.finish()
        }
        Command::CheckProfile { profile, p, dim, variant, out } => {
            let pr = Profile::parse(&profile, dim, p)?;
            let req = Requirements {
                sobolev: matches!(variant, VariantArg::Sobolev),
                signed: matches!(variant, VariantArg::Signed),
            };
            let report = pr.certificates(req);
            let mut r = Report::new("check-profile", &out, &[], json!({ "profile": pr, "variant": variant }))?;
            for c in &report.certificates {
                println!("[{}] {}: {}", if c.holds { "ok" } else { "FAIL" }, c.name, c.condition);
            }
            r.record("certificates", &report.certificates);
            r.put("accepted", report.accepted());
            if let Some(n) = report.norm {
                r.put("norm", n);
            }
            r.put("convex_from", report.convex_from);
            r.finish()?;
            pr.validate(req)?;
            Ok(())
        }
        Command::Fatten { a, r: radius, metric, out } => {
            let sa = read(&a)?;
            let cfg = config(&metric, sa.dim())?;
            let mut r = Report::new("fatten", &out, &[&a], echo(&metric, &cfg))?;
            let window = cfg.window_for(&[&sa])?;
            let f = morph::fatten(&sa, radius, &window)?;
            r.put("r", radius);
            r.put("cells", f.as_mask().map_or(0, |m| m.count()));
            r.put("error", 0.5 * window.spacing() * (sa.dim() as f64).sqrt());
            r.write_shape("fattened", &f)?;
            r.finish()
        }
    }
}
