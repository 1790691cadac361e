//! The `fraclab` command line: subcommands, bundle files and exit codes.
//!
//! Exit codes: 0 success, 1 interrupted, 2 usage or configuration,
//! 3 incompatible or unreadable inputs, 4 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::acceptance;
use crate::config::Config;
use crate::constants::{FracParams, unit_ball_volume};
use crate::diagnostics::{self, ExtendedSystem, FreeBoundarySet};
use crate::eigen::{self, EigenBundle};
use crate::error::{Error, Result};
use crate::extension::Extender;
use crate::form::StiffnessForm;
use crate::grid::{BoxGrid, ThinDomain};
use crate::io;
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::shape_opt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERRUPTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_COMPAT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const BUNDLE_FILE: &str = "bundle.json";
pub const MASK_FILE: &str = "mask.bin";

#[derive(Parser, Debug)]
#[command(name = "fraclab", version, about = "Fractional eigenvalue shape optimization and free-boundary diagnostics")]
struct Cli {
    /// worker threads (falls back to FRACLAB_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// suppress informational output on stdout
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print C(n,s), d_s, Λ̃ and the slope constant as JSON
    Constants {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lowest eigenpairs of a configured domain
    Eig(RunArgs),
    /// Extensions of the eigenfunctions of a configured domain
    Extend(RunArgs),
    /// Pixel search for the shape objective
    Optimize(RunArgs),
    /// Free-boundary report for a mask and its eigen bundle
    Diagnose {
        /// directory holding bundle.json and the eigenfield dumps
        #[arg(long)]
        bundle: PathBuf,
        /// mask dump (defaults to the bundle's mask.bin)
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// comma-separated free-boundary point indices
        #[arg(long)]
        points: Option<String>,
    },
    /// Run the acceptance suite
    Verify {
        #[arg(long)]
        out: Option<PathBuf>,
        /// comma-separated criterion numbers (default: all)
        #[arg(long)]
        only: Option<String>,
    },
    /// Re-run a manifest and compare output hashes
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Config { .. } => EXIT_USAGE,
        Error::Compat(_) | Error::Format(_) | Error::Io(_) | Error::Json(_) | Error::DimensionMismatch { .. } => {
            EXIT_COMPAT
        }
        _ => EXIT_NUMERICAL,
    }
}

static QUIET: AtomicBool = AtomicBool::new(false);

macro_rules! say {
    ($($t:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            println!($($t)*);
        }
    };
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    QUIET.store(cli.quiet, Ordering::Relaxed);
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    let stop = install_stop_flag();
    match dispatch(cli.command, &stop) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var("FRACLAB_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| Error::Parameter(format!("FRACLAB_THREADS=`{v}` is not a count")))?),
            Err(_) => None,
        },
    };
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn install_stop_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    #[cfg(unix)]
    for sig in [signal_hook::consts::SIGINT, signal_hook::consts::SIGTERM] {
        let _ = signal_hook::flag::register(sig, Arc::clone(&flag));
    }
    flag
}

fn dispatch(cmd: Command, stop: &AtomicBool) -> Result<i32> {
    match cmd {
        Command::Constants { n, s, lambda, out } => {
            let mut cfg = Config::default();
            cfg.set("n", n);
            cfg.set("s", s);
            cfg.set("lambda", lambda);
            cmd_constants(&cfg, out.as_deref())
        }
        Command::Eig(a) => cmd_eig(&load_config(&a)?, &a.out),
        Command::Extend(a) => cmd_extend(&load_config(&a)?, &a.out),
        Command::Optimize(a) => cmd_optimize(&load_config(&a)?, &a.out, stop),
        Command::Diagnose { bundle, mask, config, out, points } => {
            let cfg = match config {
                Some(p) => Config::load(&p)?,
                None => Config::default(),
            };
            cmd_diagnose(&cfg, &bundle, mask.as_deref(), &out, points.as_deref())
        }
        Command::Verify { out, only } => cmd_verify(out.as_deref(), only.as_deref()),
        Command::Replay { manifest, out } => cmd_replay(&manifest, &out, stop),
    }
}

fn load_config(a: &RunArgs) -> Result<Config> {
    let mut cfg = Config::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.set("seed", seed);
    }
    Ok(cfg)
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn num(x: f64) -> serde_json::Value {
    // NaN and ±∞ are not JSON numbers
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn cmd_constants(cfg: &Config, out: Option<&Path>) -> Result<i32> {
    let params = cfg.params()?;
    let t = params.constants();
    let value = json!({
        "n": params.n(),
        "s": params.s(),
        "lambda": params.lambda_penalty(),
        "c_ns": t.c_ns,
        "d_s": t.d_s,
        "lambda_tilde": params.lambda_tilde(),
        "slope_const": t.slope_const,
        "omega_n": t.omega_n,
    });
    let bytes = json_bytes(&value)?;
    if !QUIET.load(Ordering::Relaxed) {
        print!("{}", String::from_utf8_lossy(&bytes));
    }
    if let Some(dir) = out {
        let mut m = RunManifest::new("constants", cfg.snapshot(), 0);
        m.emit(dir, "constants.json", &bytes)?;
        m.complete = true;
        m.save(dir)?;
    }
    Ok(EXIT_OK)
}

/// Contents of bundle.json.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleMeta {
    pub n: usize,
    pub s: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub residuals: Vec<f64>,
    pub h: f64,
    pub cells: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub fields: Vec<String>,
    pub mask: String,
}

impl BundleMeta {
    pub fn grid(&self) -> Result<BoxGrid> {
        let mut lo = self.lower;
        let mut hi = self.upper;
        if self.n == 1 {
            lo[1] = 0.0;
            hi[1] = 0.0;
        }
        BoxGrid::with_corners(self.n, lo, hi, self.cells)
    }

    pub fn params(&self) -> Result<FracParams> {
        FracParams::new(self.n, self.s, self.lambda)
    }
}

/// Write bundle.json, eig_k.bin (k from 1) and mask.bin.
pub fn write_bundle(dir: &Path, m: &mut RunManifest, bundle: &EigenBundle, params: &FracParams) -> Result<BundleMeta> {
    let grid = bundle.domain().grid();
    let fields: Vec<String> = (1..=bundle.m()).map(|k| format!("eig_{k}.bin")).collect();
    for (k, name) in fields.iter().enumerate() {
        m.emit(dir, name, &io::encode_field(grid, &bundle.full_field(k))?)?;
    }
    m.emit(dir, MASK_FILE, &io::encode_mask(bundle.domain()))?;
    let meta = BundleMeta {
        n: params.n(),
        s: params.s(),
        lambda: params.lambda_penalty(),
        m: bundle.m(),
        lambdas: bundle.lambdas().to_vec(),
        residuals: bundle.residuals().to_vec(),
        h: grid.h(),
        cells: grid.cells(),
        lower: grid.lower(),
        upper: grid.upper(),
        fields,
        mask: MASK_FILE.into(),
    };
    m.emit(dir, BUNDLE_FILE, &json_bytes(&meta)?)?;
    Ok(meta)
}

/// Load a bundle against `mask`; eigenfields must vanish off the mask.
pub fn read_bundle(dir: &Path, mask_path: Option<&Path>) -> Result<(BundleMeta, EigenBundle)> {
    let meta: BundleMeta = serde_json::from_str(&std::fs::read_to_string(dir.join(BUNDLE_FILE))?)?;
    let grid = meta.grid()?;
    if (grid.h() - meta.h).abs() > 1e-12 * meta.h {
        return Err(Error::Compat(format!("bundle h = {} disagrees with its box (h = {})", meta.h, grid.h())));
    }
    let mask_path = mask_path.map(Path::to_path_buf).unwrap_or_else(|| dir.join(&meta.mask));
    let mask = io::read_mask(&mask_path, &grid)?;
    let nodes = mask.nodes();
    let mut vectors = Vec::with_capacity(meta.m);
    for name in &meta.fields {
        let full = io::read_field(&dir.join(name), &grid)?;
        if full.iter().enumerate().any(|(i, v)| *v != 0.0 && !mask.contains_node(i)) {
            return Err(Error::Compat(format!("{name} is nonzero outside the mask {}", mask_path.display())));
        }
        vectors.push(nodes.iter().map(|&i| full[i]).collect());
    }
    let bundle = EigenBundle::from_parts(mask, meta.lambdas.clone(), vectors, meta.residuals.clone())?;
    Ok((meta, bundle))
}

fn required_domain(cfg: &Config, grid: &BoxGrid) -> Result<ThinDomain> {
    cfg.domain(grid)?
        .ok_or_else(|| Error::Config { line: 0, message: "missing required key `domain`".into() })
}

fn spectral_report(bundle: &EigenBundle, params: &FracParams, cfg: &Config) -> Result<serde_json::Value> {
    let l = bundle.lambdas();
    let gap = if l.len() >= 2 { num((l[1] - l[0]) / l[0]) } else { serde_json::Value::Null };
    let v1 = &bundle.vectors()[0];
    let single_signed = v1.iter().all(|x| *x >= 0.0) || v1.iter().all(|x| *x <= 0.0);
    let sup = match cfg.get::<f64>("sup_prefactor")? {
        Some(p) => serde_json::to_value(eigen::sup_bound_check(bundle, params, p))?,
        None => serde_json::Value::Null,
    };
    Ok(json!({
        "relative_gap": gap,
        "ground_state_single_signed": single_signed,
        "clustered": bundle.clustered(),
        "orthonormality_defect": bundle.orthonormality_defect(),
        "component_activity": eigen::component_activity(bundle),
        "support": diagnostics::support_coincidence(bundle),
        "sup_bound": sup,
    }))
}

fn cmd_eig(cfg: &Config, out: &Path) -> Result<i32> {
    let mut m = RunManifest::new("eig", cfg.snapshot(), cfg.seed()?);
    let t = Instant::now();
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let dom = required_domain(cfg, &grid)?;
    let form = StiffnessForm::assemble(&dom, &params)?;
    m.phase("assemble", t.elapsed().as_secs_f64());
    let t = Instant::now();
    let bundle = eigen::lowest_eigenpairs(&form, cfg.get_or("m", 1)?)?;
    m.phase("eigen", t.elapsed().as_secs_f64());
    write_bundle(out, &mut m, &bundle, &params)?;
    m.emit(out, "spectral.json", &json_bytes(&spectral_report(&bundle, &params, cfg)?)?)?;
    m.complete = true;
    m.save(out)?;
    Ok(EXIT_OK)
}

fn cmd_extend(cfg: &Config, out: &Path) -> Result<i32> {
    let mut m = RunManifest::new("extend", cfg.snapshot(), cfg.seed()?);
    let t = Instant::now();
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let dom = required_domain(cfg, &grid)?;
    let bundle = eigen::lowest_eigenpairs(&StiffnessForm::assemble(&dom, &params)?, cfg.get_or("m", 1)?)?;
    m.phase("eigen", t.elapsed().as_secs_f64());
    let t = Instant::now();
    let slab = cfg.slab(&grid, &params)?;
    let ext = Extender::new(slab.clone())?;
    let d_s = params.constants().d_s;
    let mut rows = Vec::new();
    for k in 0..bundle.m() {
        let field = ext.extend(&bundle.full_field(k))?;
        let name = format!("slab_{}.bin", k + 1);
        m.emit(out, &name, &io::encode_slab_field(&field))?;
        let energy = field.energy();
        let seminorm = bundle.lambdas()[k];
        let flagged = field.neumann_trace().flagged.iter().filter(|f| **f).count();
        rows.push(json!({
            "field": name,
            "energy": energy,
            "seminorm_sq": seminorm,
            "identity_rel_error": ((d_s * energy - seminorm) / seminorm).abs(),
            "neumann_flagged": flagged,
        }));
    }
    m.phase("extend", t.elapsed().as_secs_f64());
    let report = json!({
        "layers": slab.layers(),
        "height": slab.height(),
        "gamma": slab.gamma(),
        "d_s": d_s,
        "fields": rows,
    });
    m.emit(out, "extension.json", &json_bytes(&report)?)?;
    m.complete = true;
    m.save(out)?;
    Ok(EXIT_OK)
}

fn cmd_optimize(cfg: &Config, out: &Path, stop: &AtomicBool) -> Result<i32> {
    let mut m = RunManifest::new("optimize", cfg.snapshot(), cfg.seed()?);
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let opt = cfg.optimizer(&grid)?;
    let trace = shape_opt::optimize(&grid, &opt, &params, Some(stop))?;
    m.phase("optimize", trace.wall_time);
    m.emit(out, "trace.csv", trace.to_csv(opt.m).as_bytes())?;
    m.emit(out, "best_mask.bin", &io::encode_mask(&trace.best))?;
    let summary = json!({
        "best_objective": num(trace.best_objective),
        "initial_objective": num(trace.initial_objective),
        "best_measure": trace.best.measure(),
        "best_lambdas": trace.best_lambdas,
        "components": trace.best.components().len(),
        "perimeter": shape_opt::perimeter_estimate(&trace.best),
        "certificate": trace.certificate.map(num),
        "certified": trace.certified(),
        "monotonicity_violations": trace.monotonicity_violations,
        "restarts": opt.restarts,
        "interrupted": trace.interrupted,
        "failure": trace.failure,
    });
    m.emit(out, "optimize.json", &json_bytes(&summary)?)?;
    if trace.interrupted || trace.failure.is_some() {
        m.save(out)?;
        if let Some(f) = &trace.failure {
            eprintln!("error: optimization aborted: {f}");
            return Ok(EXIT_NUMERICAL);
        }
        eprintln!("interrupted: partial trace written to {}", out.display());
        return Ok(EXIT_INTERRUPTED);
    }
    if trace.best.count() >= opt.m {
        let t = Instant::now();
        let bundle = eigen::lowest_eigenpairs(&StiffnessForm::assemble(&trace.best, &params)?, opt.m)?;
        write_bundle(out, &mut m, &bundle, &params)?;
        m.phase("bundle", t.elapsed().as_secs_f64());
    }
    m.complete = true;
    m.save(out)?;
    Ok(EXIT_OK)
}

fn parse_points(list: &str, available: usize) -> Result<Vec<usize>> {
    list.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let i: usize = t.trim().parse().map_err(|_| Error::Parameter(format!("point index `{t}` is not an integer")))?;
            if i >= available {
                return Err(Error::Parameter(format!("point index {i} out of range (0..{available})")));
            }
            Ok(i)
        })
        .collect()
}

const DIAGNOSE_HEADER: &str = "# point: free-boundary point index; x0,x1: point coordinates; ";

fn cmd_diagnose(cfg: &Config, bundle_dir: &Path, mask: Option<&Path>, out: &Path, points: Option<&str>) -> Result<i32> {
    let mut m = RunManifest::new("diagnose", cfg.snapshot(), cfg.seed()?);
    let (meta, bundle) = read_bundle(bundle_dir, mask)?;
    m.args.insert("bundle".into(), bundle_dir.display().to_string());
    if let Some(p) = mask {
        m.args.insert("mask".into(), p.display().to_string());
        m.add_input(p)?;
    }
    m.add_input(&bundle_dir.join(BUNDLE_FILE))?;
    for f in &meta.fields {
        m.add_input(&bundle_dir.join(f))?;
    }
    let params = meta.params()?;
    let grid = meta.grid()?;
    let h = grid.h();
    let n = grid.n();
    let t = Instant::now();
    let slab = cfg.slab(&grid, &params)?;
    let sys = ExtendedSystem::from_bundle(&bundle, &slab)?;
    m.phase("extend", t.elapsed().as_secs_f64());
    let t = Instant::now();
    let fb = FreeBoundarySet::from_mask(bundle.domain());
    let selected = match points {
        Some(list) => {
            m.args.insert("points".into(), list.into());
            parse_points(list, fb.len())?
        }
        None => (0..fb.len()).collect(),
    };
    let radii: Vec<f64> = cfg.radii_cells()?.iter().map(|c| c * h).collect();
    let classify = cfg.classify()?;
    let modulus = sys.modulus_trace();
    let slope_const = params.slope_const();
    let norm = params.lambda_tilde() * unit_ball_volume(n);

    let mut weiss = format!("{DIAGNOSE_HEADER}r: radius; w: Weiss energy; w_normalized: w/(lambda_tilde*omega_n), 1/2 on one-plane profiles\npoint,x0,x1,r,w,w_normalized\n");
    let mut density = format!("{DIAGNOSE_HEADER}r: radius; density: |B_r(x) ∩ Ω|/(omega_n r^n)\npoint,x0,x1,r,density\n");
    let mut slopes = format!("{DIAGNOSE_HEADER}alpha: least-squares slope of |G| against t^s along the inward normal; ratio: alpha/slope_const (empty when under-resolved)\npoint,x0,x1,alpha,ratio\n");
    let mut entries = Vec::new();
    let mut counts = BTreeMap::from([("regular", 0usize), ("singular", 0), ("undetermined", 0)]);
    for &k in &selected {
        let p = fb.points[k];
        let (x0, x1) = (p.x[0], p.x[1]);
        let usable: Vec<f64> = radii
            .iter()
            .copied()
            .filter(|&r| grid.contains_ball(p.x, r) && r < slab.height())
            .collect();
        let curve = diagnostics::weiss_curve(&sys, p.x, &usable, &params, bundle.lambdas())?;
        for d in &curve.details {
            weiss.push_str(&format!("{k},{x0},{x1},{},{},{}\n", d.r, d.w, d.w / norm));
        }
        for &r in &usable {
            let d = diagnostics::density_ratio(bundle.domain(), p.x, r)?;
            density.push_str(&format!("{k},{x0},{x1},{r},{d}\n"));
        }
        let alpha = diagnostics::boundary_slope(&modulus, &grid, p.x, p.inward(), params.s()).ok();
        match alpha {
            Some(a) => slopes.push_str(&format!("{k},{x0},{x1},{a},{}\n", a / slope_const)),
            None => slopes.push_str(&format!("{k},{x0},{x1},,\n")),
        }
        let audit = diagnostics::weiss_monotonicity_audit(&curve, params.s()).ok();
        let nondeg = diagnostics::nondegeneracy_scan(&modulus, &grid, &[p.x], &fb, &usable, params.s()).ok();
        let class = diagnostics::classify(&sys, &p, &params, &classify);
        let (label, detail) = match class {
            Ok(c) => (c.label, serde_json::to_value(&c)?),
            Err(e) => (diagnostics::Label::Undetermined, json!({ "error": e.to_string() })),
        };
        let key = match label {
            diagnostics::Label::Regular => "regular",
            diagnostics::Label::Singular => "singular",
            diagnostics::Label::Undetermined => "undetermined",
        };
        *counts.get_mut(key).expect("known label") += 1;
        entries.push(json!({
            "point": k,
            "x": p.x,
            "normal": p.normal,
            "label": label,
            "classification": detail,
            "slope": alpha.map(num),
            "nondegeneracy": nondeg.map(|r| num(r.min)),
            "sigma_fit": audit.map(|a| num(a.sigma_fit)),
        }));
    }
    m.phase("diagnose", t.elapsed().as_secs_f64());
    let total = selected.len().max(1) as f64;
    let report = json!({
        "free_boundary_points": fb.len(),
        "selected": selected.len(),
        "counts": counts,
        "fraction_regular": counts["regular"] as f64 / total,
        "support": diagnostics::support_coincidence(&bundle),
        "points": entries,
    });
    m.emit(out, "weiss.csv", weiss.as_bytes())?;
    m.emit(out, "density.csv", density.as_bytes())?;
    m.emit(out, "slopes.csv", slopes.as_bytes())?;
    m.emit(out, "classification.json", &json_bytes(&report)?)?;
    m.complete = true;
    m.save(out)?;
    Ok(EXIT_OK)
}

fn cmd_verify(out: Option<&Path>, only: Option<&str>) -> Result<i32> {
    let ids: Vec<usize> = match only {
        Some(list) => list
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::Parameter(format!("criterion `{t}` is not a number"))))
            .collect::<Result<_>>()?,
        None => (1..=acceptance::CRITERIA).collect(),
    };
    let mut reports = Vec::new();
    for id in ids {
        let r = acceptance::run_criterion(id)?;
        say!("{}", r.line());
        reports.push(r);
    }
    if let Some(dir) = out {
        let mut m = RunManifest::new("verify", BTreeMap::new(), 0);
        if let Some(list) = only {
            m.args.insert("only".into(), list.into());
        }
        let stable: Vec<_> = reports.iter().map(|r| r.stable_view()).collect();
        m.emit(dir, "verify.json", &json_bytes(&stable)?)?;
        m.complete = true;
        m.save(dir)?;
    }
    Ok(if reports.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_replay(manifest_path: &Path, out: &Path, stop: &AtomicBool) -> Result<i32> {
    let old = RunManifest::load(manifest_path)?;
    for input in &old.inputs {
        let now = crate::manifest::hash_file(Path::new(&input.path))?;
        if now != input.sha256 {
            return Err(Error::Compat(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let cfg = Config::from_map(&old.config)?;
    let code = match old.command.as_str() {
        "constants" => cmd_constants(&cfg, Some(out))?,
        "eig" => cmd_eig(&cfg, out)?,
        "extend" => cmd_extend(&cfg, out)?,
        "optimize" => cmd_optimize(&cfg, out, stop)?,
        "diagnose" => {
            let bundle = PathBuf::from(old.args.get("bundle").ok_or_else(|| Error::Format("manifest lacks the bundle path".into()))?);
            let mask = old.args.get("mask").map(PathBuf::from);
            cmd_diagnose(&cfg, &bundle, mask.as_deref(), out, old.args.get("points").map(String::as_str))?
        }
        "verify" => cmd_verify(Some(out), old.args.get("only").map(String::as_str))?,
        other => return Err(Error::Format(format!("unknown command `{other}` in manifest"))),
    };
    if code != EXIT_OK {
        return Ok(code);
    }
    let new = RunManifest::load(&out.join(MANIFEST_FILE))?;
    let (a, b) = (old.output_map(), new.output_map());
    let mut same = true;
    for (name, hash) in &a {
        match b.get(name) {
            Some(h) if h == hash => {}
            Some(_) => {
                eprintln!("differs: {name}");
                same = false;
            }
            None => {
                eprintln!("missing: {name}");
                same = false;
            }
        }
    }
    for name in b.keys().filter(|k| !a.contains_key(*k)) {
        eprintln!("extra: {name}");
        same = false;
    }
    if same {
        say!("replay identical: {} outputs", a.len());
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_NUMERICAL)
    }
}
