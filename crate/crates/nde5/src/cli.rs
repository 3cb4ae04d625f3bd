//! The `nde5` command line: one subcommand per computation, each writing CSV/JSON
//! artifacts and a run manifest into the output directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    delta_entropy_test, l1_rate, rh_speed, tv_growth, ExtendedProfile, JumpJets, ShockSide, Window,
};
use crate::asymptotics::{char_exponents, fit_oscillatory_tail, BundleContext};
use crate::bvp::{solve_global, DEFAULT_INTERVALS};
use crate::compactons::{
    explicit_compacton, oscillatory_compacton, robustness_probe, CompactonProfile, ExplicitKind, OscillatoryOptions,
    ProbeOptions,
};
use crate::error::{Error, Result};
use crate::evolution::{
    evolve, mollify, shock_indicator, stable_step, EvolveOptions, FieldTemplate, StepData, SMOOTH_TAIL,
};
use crate::models::{fmt16, NdeKind, Profile, SimilarityParams, DEFAULT_NU};
use crate::parallel::Exec;
use crate::shooting::{polish_shock, shoot_blowup, shoot_shock, shoot_time5, sweep_family, ShootOptions, Time5Options};

/// Exit status for a numerical failure.
pub const EXIT_SOLVER: i32 = 2;
/// Exit status for unusable arguments.
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nde5", version, about = "Shocks, rarefactions, blow-up profiles and compactons of fifth-order dispersion equations")]
pub struct Cli {
    /// Directory receiving CSV, JSON and SVG artifacts.
    #[arg(long, global = true, default_value = "nde5-out")]
    pub out_dir: PathBuf,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plot: bool,
    /// Run sweeps on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CompactonWhich {
    K22,
    Quintic,
    Oscillatory,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RateWhat {
    L1,
    Tv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShockChoice {
    SMinus,
    SPlus,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shock profile by shooting, polished by collocation, with tail fit.
    Profile {
        #[arg(long, value_parser = parse_kind)]
        kind: NdeKind,
        #[arg(long, default_value_t = DEFAULT_NU, value_parser = parse_scalar)]
        nu: f64,
        #[arg(long = "L", default_value_t = 100.0, value_parser = parse_scalar)]
        length: f64,
        #[arg(long, default_value_t = DEFAULT_INTERVALS)]
        intervals: usize,
        #[arg(long, default_value = "-1,1", allow_hyphen_values = true, value_parser = parse_pair)]
        bracket: (f64, f64),
    },
    /// Shooting constant `D = g‴(0)/6` of a shock profile.
    ShootD0 {
        #[arg(long, value_parser = parse_kind)]
        kind: NdeKind,
        #[arg(long, default_value = "-1,1", allow_hyphen_values = true, value_parser = parse_pair)]
        bracket: (f64, f64),
        #[arg(long, default_value_t = DEFAULT_NU, value_parser = parse_scalar)]
        nu: f64,
        #[arg(long, default_value_t = 1e-10, value_parser = parse_scalar)]
        tol: f64,
    },
    /// Blow-up profile by shooting on `f‴(0)`.
    Blowup {
        #[arg(long, value_parser = parse_scalar)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0, value_parser = parse_scalar)]
        c0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = parse_scalar)]
        f0: f64,
        /// Slope at the origin; the profile is computed on `y < 0`.
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true, value_parser = parse_scalar)]
        f1: f64,
        #[arg(long, default_value = "0,0.2", allow_hyphen_values = true, value_parser = parse_pair)]
        bracket: (f64, f64),
        #[arg(long, default_value_t = 1e-10, value_parser = parse_scalar)]
        tol: f64,
    },
    /// Family of global profiles over a grid of `F(0)`.
    GlobalSweep {
        #[arg(long, value_parser = parse_scalar)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0, value_parser = parse_scalar)]
        c0: f64,
        /// `start:stop:count`.
        #[arg(long = "f0-grid", default_value = "1:9:9", allow_hyphen_values = true, value_parser = parse_grid)]
        f0_grid: Grid,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = parse_scalar)]
        f1: f64,
        #[arg(long = "L", default_value_t = 100.0, value_parser = parse_scalar)]
        length: f64,
        #[arg(long, default_value_t = 1000)]
        intervals: usize,
    },
    /// Characteristic roots and bundle dimension of an asymptotic context.
    Roots {
        #[arg(long, value_parser = parse_context)]
        context: BundleContext,
        #[arg(long, default_value = "1/9", value_parser = parse_scalar)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0, value_parser = parse_scalar)]
        c0: f64,
    },
    /// Compacton profiles, explicit or sign-changing, and the robustness probe.
    Compacton {
        #[arg(long, value_enum)]
        which: CompactonWhich,
        #[arg(long, default_value_t = 1)]
        branch: usize,
        #[arg(long, default_value_t = 0.0, value_parser = parse_scalar)]
        nu: f64,
        #[arg(long, default_value_t = 2001)]
        samples: usize,
        /// Also run the nonnegative-compacton robustness probe.
        #[arg(long)]
        probe: bool,
    },
    /// Rankine–Hugoniot speed from one-sided jets.
    Rh {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_jet)]
        minus: [f64; 5],
        #[arg(long, allow_hyphen_values = true, value_parser = parse_jet)]
        plus: [f64; 5],
    },
    /// Convergence rate to the shock (l1) or total-variation growth (tv).
    Rate {
        #[arg(long, value_enum)]
        what: RateWhat,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 1.0, value_parser = parse_scalar)]
        l: f64,
        /// Decades of `−t` (l1) or of `Z` (tv) as `from:to:count`.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_grid)]
        decades: Option<Grid>,
    },
    /// δ-deformation entropy test of a shock.
    EntropyTest {
        #[arg(long, value_enum)]
        shock: ShockChoice,
        #[arg(long)]
        profile: PathBuf,
        /// Decades of δ as `from:to:count`.
        #[arg(long, default_value = "-6:-2:9", allow_hyphen_values = true, value_parser = parse_grid)]
        decades: Grid,
    },
    /// Phase-plane profile of the fifth-order-in-time reduction.
    Time5 {
        #[arg(long = "A", default_value_t = 1.0, value_parser = parse_scalar)]
        a: f64,
        #[arg(long = "B", default_value_t = 0.0, allow_hyphen_values = true, value_parser = parse_scalar)]
        b: f64,
        #[arg(long, default_value_t = 200.0, value_parser = parse_scalar)]
        z_max: f64,
    },
    /// Periodic pseudospectral evolution of mollified step data.
    Evolve {
        #[arg(long, value_parser = parse_kind)]
        kind: NdeKind,
        /// `s-plus`, `s-minus` or a CSV file with a `u` column.
        #[arg(long)]
        data: String,
        #[arg(long, value_parser = parse_scalar)]
        delta: f64,
        #[arg(long = "t-end", value_parser = parse_scalar)]
        t_end: f64,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long = "L", default_value_t = 50.0, value_parser = parse_scalar)]
        length: f64,
        #[arg(long, default_value_t = 1.0, value_parser = parse_scalar)]
        cfl: f64,
        #[arg(long, default_value_t = 4)]
        snapshots: usize,
    },
}

/// Parses a decimal or an exact ratio `p/q`.
pub fn parse_scalar(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("bad numerator in '{s}'"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("bad denominator in '{s}'"))?;
            if q == 0.0 {
                return Err(format!("zero denominator in '{s}'"));
            }
            p / q
        }
        None => s.parse().map_err(|_| format!("not a number: '{s}'"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: '{s}'"))
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(parse_scalar).collect()
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated values, got '{s}'")),
    }
}

fn parse_jet(s: &str) -> std::result::Result<[f64; 5], String> {
    let v = parse_list(s)?;
    v.try_into().map_err(|_| format!("expected five comma-separated values, got '{s}'"))
}

/// Equally spaced values given as `start:stop:count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// `start:stop:count` as equally spaced values.
pub fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:count, got '{s}'"));
    }
    let a = parse_scalar(parts[0])?;
    let b = parse_scalar(parts[1])?;
    let n: usize = parts[2].trim().parse().map_err(|_| format!("bad count in '{s}'"))?;
    match n {
        0 => Err("grid count must be positive".into()),
        1 => Ok(Grid(vec![a])),
        _ => Ok(Grid((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())),
    }
}

fn parse_kind(s: &str) -> std::result::Result<NdeKind, String> {
    s.parse::<NdeKind>().map_err(|e| e.to_string())
}

fn parse_context(s: &str) -> std::result::Result<BundleContext, String> {
    s.parse::<BundleContext>().map_err(|e| e.to_string())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) => EXIT_USAGE,
        _ => EXIT_SOLVER,
    }
}

/// Rounds every number to 16 significant digits.
fn round16(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if !(n.is_i64() || n.is_u64()) => fmt16(x).parse::<f64>().map(|r| json!(r)).unwrap_or(Value::Number(n)),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(round16).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round16(v))).collect()),
        other => other,
    }
}

/// Artifacts and metrics of one subcommand.
struct Run {
    command: &'static str,
    anchor: &'static str,
    dir: PathBuf,
    plot: bool,
    exec: Exec,
    params: BTreeMap<String, Value>,
    outputs: Vec<String>,
    metrics: BTreeMap<String, Value>,
}

impl Run {
    fn param(&mut self, k: &str, v: impl Serialize) {
        self.params.insert(k.into(), json!(v));
    }

    fn metric(&mut self, k: &str, v: impl Serialize) {
        self.metrics.insert(k.into(), json!(v));
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn write_json(&mut self, name: &str, v: impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(&round16(json!(v)))?;
        let p = self.path(name);
        fs::write(p, text + "\n")?;
        Ok(())
    }

    fn write_profile(&mut self, stem: &str, prof: &Profile) -> Result<()> {
        let p = self.path(&format!("{stem}.csv"));
        prof.write_csv(fs::File::create(p)?)?;
        let side = prof.sidecar_json()?;
        let p = self.path(&format!("{stem}.meta.json"));
        fs::write(p, side + "\n")?;
        if self.plot {
            let pts: Vec<(f64, f64)> = prof.mesh.iter().zip(&prof.jets).map(|(z, j)| (*z, j[0])).collect();
            self.write_svg(&format!("{stem}.svg"), stem, &[pts])?;
        }
        Ok(())
    }

    fn write_rows(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(|v| fmt16(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_svg(&mut self, name: &str, title: &str, series: &[Vec<(f64, f64)>]) -> Result<()> {
        let svg = svg_plot(title, series);
        let p = self.path(name);
        fs::write(p, svg)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        let manifest = json!({
            "command": self.command,
            "params": self.params,
            "paper_anchor": self.anchor,
            "outputs": self.outputs.clone(),
            "metrics": self.metrics,
        });
        let name = format!("{}.manifest.json", self.command);
        self.outputs.push(name.clone());
        fs::write(self.dir.join(name), serde_json::to_string_pretty(&round16(manifest))? + "\n")?;
        Ok(())
    }
}

/// Minimal line plot.
fn svg_plot(title: &str, series: &[Vec<(f64, f64)>]) -> String {
    let (w, h, m) = (640.0, 400.0, 40.0);
    let pts = series.iter().flatten().filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"{m}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n"
    );
    for (i, s) in series.iter().enumerate() {
        let path: Vec<String> = s
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| {
                let px = m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
                let py = h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        out += &format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
            colours[i % colours.len()],
            path.join(" ")
        );
    }
    out += &format!(
        "<text x=\"{m}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">x: [{x0:.4e}, {x1:.4e}]  y: [{y0:.4e}, {y1:.4e}]</text>\n</svg>\n",
        h - 10.0
    );
    out
}

fn logspace(decades: &[f64]) -> Vec<f64> {
    decades.iter().map(|d| 10f64.powf(*d)).collect()
}

/// Profile CSV plus its `.meta.json` sidecar when present.
fn load_profile(path: &Path) -> Result<Profile> {
    let file = fs::File::open(path)?;
    let side = path.with_extension("meta.json");
    let text = fs::read_to_string(&side).ok();
    Profile::read_csv(file, text.as_deref())
}

/// Profile with its fitted oscillatory tail attached beyond `0.9 L`.
fn extended(prof: &Profile) -> Result<(ExtendedProfile, Value)> {
    let (lo, _) = prof.span();
    let len = -lo;
    let fit = fit_oscillatory_tail(prof, (-0.9 * len, -0.4 * len), None)?;
    let ext = ExtendedProfile::new(prof, Some(fit.into()), Some(-0.9 * len))?;
    Ok((ext, json!(fit)))
}

fn anchor(cmd: &Command) -> &'static str {
    match cmd {
        Command::Profile { .. } => "similarity shock profile with oscillatory tail about the far-field level",
        Command::ShootD0 { .. } => "shooting constant D0 of the shock profile origin expansion",
        Command::Blowup { .. } => "blow-up similarity profile and its shooting value of f'''(0)",
        Command::GlobalSweep { .. } => "two-parameter family of global extension profiles with square-root far field",
        Command::Roots { .. } => "characteristic polynomials of the asymptotic bundles",
        Command::Compacton { .. } => "explicit and sign-changing compacton travelling waves",
        Command::Rh { .. } => "Rankine-Hugoniot speed for fifth-order divergence-form jumps",
        Command::Rate { .. } => "L1 convergence rate to the shock and divergent total variation",
        Command::EntropyTest { .. } => "delta-deformation entropy test for S- and S+",
        Command::Time5 { .. } => "similarity reduction of the fifth-order-in-time equation",
        Command::Evolve { .. } => "smooth periodic evolution of mollified step data",
    }
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Profile { .. } => "profile",
        Command::ShootD0 { .. } => "shoot-d0",
        Command::Blowup { .. } => "blowup",
        Command::GlobalSweep { .. } => "global-sweep",
        Command::Roots { .. } => "roots",
        Command::Compacton { .. } => "compacton",
        Command::Rh { .. } => "rh",
        Command::Rate { .. } => "rate",
        Command::EntropyTest { .. } => "entropy-test",
        Command::Time5 { .. } => "time5",
        Command::Evolve { .. } => "evolve",
    }
}

/// Parses `args` and runs the subcommand; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("nde5: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command; returns the lines for standard output.
pub fn execute(cli: Cli) -> Result<Vec<String>> {
    fs::create_dir_all(&cli.out_dir)?;
    let mut run = Run {
        command: name(&cli.command),
        anchor: anchor(&cli.command),
        dir: cli.out_dir.clone(),
        plot: cli.plot,
        exec: if cli.sequential { Exec::Sequential } else { Exec::default() },
        params: BTreeMap::new(),
        outputs: Vec::new(),
        metrics: BTreeMap::new(),
    };
    let lines = match cli.command {
        Command::Profile { kind, nu, length, intervals, bracket } => cmd_profile(&mut run, kind, nu, length, intervals, bracket)?,
        Command::ShootD0 { kind, bracket, nu, tol } => cmd_shoot_d0(&mut run, kind, bracket, nu, tol)?,
        Command::Blowup { alpha, c0, f0, f1, bracket, tol } => cmd_blowup(&mut run, alpha, c0, f0, f1, bracket, tol)?,
        Command::GlobalSweep { alpha, c0, f0_grid, f1, length, intervals } => {
            cmd_global_sweep(&mut run, alpha, c0, &f0_grid.0, f1, length, intervals)?
        }
        Command::Roots { context, alpha, c0 } => cmd_roots(&mut run, context, alpha, c0)?,
        Command::Compacton { which, branch, nu, samples, probe } => cmd_compacton(&mut run, which, branch, nu, samples, probe)?,
        Command::Rh { minus, plus } => cmd_rh(&mut run, minus, plus)?,
        Command::Rate { what, profile, l, decades } => cmd_rate(&mut run, what, &profile, l, decades.map(|g| g.0))?,
        Command::EntropyTest { shock, profile, decades } => cmd_entropy(&mut run, shock, &profile, &decades.0)?,
        Command::Time5 { a, b, z_max } => cmd_time5(&mut run, a, b, z_max)?,
        Command::Evolve { kind, data, delta, t_end, n, length, cfl, snapshots } => {
            cmd_evolve(&mut run, kind, &data, delta, t_end, n, length, cfl, snapshots)?
        }
    };
    run.finish()?;
    Ok(lines)
}

fn cmd_profile(run: &mut Run, kind: NdeKind, nu: f64, length: f64, intervals: usize, bracket: (f64, f64)) -> Result<Vec<String>> {
    run.param("kind", kind.name());
    run.param("nu", nu);
    run.param("L", length);
    run.param("intervals", intervals);
    run.param("bracket", [bracket.0, bracket.1]);
    let opts = ShootOptions { nu, ..ShootOptions::default() };
    let p = polish_shock(kind, bracket, length, intervals, opts)?;
    let prof = &p.bvp.profile;
    let d_bvp = prof.eval(0.0)?[3] / 6.0;
    run.metric("D_shooting", p.shooting.value);
    run.metric("D_bvp", d_bvp);
    run.metric("bvp_residual", p.bvp.residual);
    run.metric("newton_iterations", p.bvp.iterations);
    run.metric("trusted_extent", p.shooting.trusted_extent);
    let stem = format!("profile-{}", kind.name());
    run.write_profile(&stem, prof)?;
    let mut lines = vec![format!("D = {}", fmt16(d_bvp))];
    match fit_oscillatory_tail(prof, (-0.9 * length, -0.4 * length), None) {
        Ok(fit) => {
            run.write_json(&format!("tail-fit-{}.json", kind.name()), fit)?;
            run.metric("envelope_exponent", fit.envelope_exponent);
            run.metric("phase_exponent", fit.phase_exponent);
            run.metric("a0_unit_level", fit.a0_unit_level);
            run.metric("level", fit.level);
            lines.push(format!(
                "tail: envelope {} phase {} a0 {} level {}",
                fmt16(fit.envelope_exponent),
                fmt16(fit.phase_exponent),
                fmt16(fit.a0_unit_level),
                fmt16(fit.level)
            ));
        }
        Err(e) => {
            run.metric("tail_fit_error", e.to_string());
            lines.push(format!("tail fit unavailable: {e}"));
        }
    }
    Ok(lines)
}

fn cmd_shoot_d0(run: &mut Run, kind: NdeKind, bracket: (f64, f64), nu: f64, tol: f64) -> Result<Vec<String>> {
    run.param("kind", kind.name());
    run.param("bracket", [bracket.0, bracket.1]);
    run.param("nu", nu);
    run.param("tol", tol);
    let r = shoot_shock(kind, bracket, tol, ShootOptions { nu, ..ShootOptions::default() })?;
    run.metric("D0", r.value);
    run.metric("classification", r.classification.name());
    run.metric("trusted_extent", r.trusted_extent);
    run.metric("bisection_steps", r.history.len());
    run.write_profile(&format!("shoot-{}", kind.name()), &r.profile)?;
    Ok(vec![format!("D0 = {}", fmt16(r.value))])
}

fn cmd_blowup(run: &mut Run, alpha: f64, c0: f64, f0: f64, f1: f64, bracket: (f64, f64), tol: f64) -> Result<Vec<String>> {
    run.param("alpha", alpha);
    run.param("c0", c0);
    run.param("f0", f0);
    run.param("f1", f1);
    run.param("bracket", [bracket.0, bracket.1]);
    let p = SimilarityParams::new(alpha, c0)?;
    let r = shoot_blowup(p, f0, f1, bracket, tol, ShootOptions::default())?;
    run.metric("f3", r.value);
    run.metric("beta", p.beta);
    run.metric("classification", r.classification.name());
    run.metric("trusted_extent", r.trusted_extent);
    run.write_profile("blowup", &r.profile)?;
    Ok(vec![format!("f3 = {}", fmt16(r.value))])
}

fn cmd_global_sweep(
    run: &mut Run,
    alpha: f64,
    c0: f64,
    grid: &[f64],
    f1: f64,
    length: f64,
    intervals: usize,
) -> Result<Vec<String>> {
    run.param("alpha", alpha);
    run.param("c0", c0);
    run.param("f0_grid", grid);
    run.param("f1", f1);
    run.param("L", length);
    run.param("intervals", intervals);
    let p = SimilarityParams::new(alpha, c0)?;
    let results = sweep_family(run.exec, grid, |&f0| solve_global(p, f0, f1, length, intervals, 1e-8));
    let mut rows = Vec::new();
    let mut solved = Vec::new();
    for (f0, r) in &results {
        match r {
            Ok(s) => {
                let e = tail_exponent(&s.profile, length)?;
                rows.push(vec![*f0, 1.0, e, s.iterations as f64, s.residual]);
                run.write_profile(&format!("global-F0-{}", fmt_grid(*f0)), &s.profile)?;
                solved.push(s.profile.clone());
            }
            Err(_) => rows.push(vec![*f0, 0.0, f64::NAN, 0.0, f64::NAN]),
        }
    }
    run.write_rows("global-sweep.csv", &["F0", "converged", "tail_exponent", "iterations", "residual"], &rows)?;
    let fraction = solved.len() as f64 / grid.len().max(1) as f64;
    let separation = min_separation(&solved);
    run.metric("converged_fraction", fraction);
    run.metric("min_pairwise_separation", separation);
    run.metric(
        "failures",
        results.iter().filter_map(|(f0, r)| r.as_ref().err().map(|e| json!({"F0": f0, "error": e.to_string()}))).collect::<Vec<_>>(),
    );
    if run.plot {
        let series: Vec<Vec<(f64, f64)>> =
            solved.iter().map(|p| p.mesh.iter().zip(&p.jets).map(|(z, j)| (*z, j[0])).collect()).collect();
        run.write_svg("global-sweep.svg", "global profiles", &series)?;
    }
    let mut lines = vec![format!("converged {}/{}", solved.len(), grid.len())];
    for r in &rows {
        lines.push(format!("F0 = {} tail exponent {}", fmt16(r[0]), fmt16(r[2])));
    }
    Ok(lines)
}

fn fmt_grid(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

/// Slope of `ln F` against `ln |y|` over `[−0.8 L, −0.4 L]`.
pub fn tail_exponent(prof: &Profile, length: f64) -> Result<f64> {
    let ys: Vec<f64> = (0..9).map(|i| 0.4 * length * 2f64.powf(i as f64 / 8.0)).collect();
    let vals = ys.iter().map(|y| Ok(prof.eval(-y)?[0])).collect::<Result<Vec<f64>>>()?;
    let lx: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let ly: Vec<f64> = vals.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Smallest sup-norm distance between two profiles, sampled on the common span.
pub fn min_separation(profiles: &[Profile]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            let (a, b) = (&profiles[i], &profiles[j]);
            let lo = a.span().0.max(b.span().0);
            let hi = a.span().1.min(b.span().1);
            let d = (0..=400)
                .map(|k| lo + (hi - lo) * k as f64 / 400.0)
                .filter_map(|z| Some((a.eval(z).ok()?[0] - b.eval(z).ok()?[0]).abs()))
                .fold(0.0, f64::max);
            best = best.min(d);
        }
    }
    best
}

fn cmd_roots(run: &mut Run, context: BundleContext, alpha: f64, c0: f64) -> Result<Vec<String>> {
    run.param("context", format!("{context:?}"));
    run.param("alpha", alpha);
    run.param("c0", c0);
    let p = SimilarityParams::new(alpha, c0)?;
    let rep = char_exponents(context, &p)?;
    run.metric("bundle_dimension", rep.bundle_dimension);
    run.metric("root_count", rep.roots.len());
    run.metric("admissible_count", rep.admissible_roots.len());
    for (k, v) in &rep.metrics {
        run.metric(k, v);
    }
    run.write_json("roots.json", &rep)?;
    let roots: Vec<Value> = rep.roots.iter().map(|z| json!([z.re, z.im])).collect();
    let text = serde_json::to_string(&round16(json!({
        "context": format!("{context:?}"),
        "roots": roots,
        "bundle_dimension": rep.bundle_dimension,
    })))?;
    Ok(vec![text])
}

fn cmd_compacton(run: &mut Run, which: CompactonWhich, branch: usize, nu: f64, samples: usize, probe: bool) -> Result<Vec<String>> {
    run.param("which", format!("{which:?}").to_lowercase());
    run.param("branch", branch);
    run.param("nu", nu);
    run.param("samples", samples);
    let mut lines = Vec::new();
    let prof: CompactonProfile = match which {
        CompactonWhich::K22 | CompactonWhich::Quintic => {
            let k = if matches!(which, CompactonWhich::K22) { ExplicitKind::K22 } else { ExplicitKind::Quintic };
            let r = k.residual_sup(4001);
            run.metric("residual_sup", r);
            lines.push(format!("residual = {}", fmt16(r)));
            explicit_compacton(k)
        }
        CompactonWhich::Oscillatory => {
            let opts = OscillatoryOptions { nu, exec: run.exec, ..OscillatoryOptions::default() };
            let c = oscillatory_compacton(branch, None, &opts)?;
            if let Some(o) = &c.oscillation {
                run.metric("sign_changes_near", o.sign_changes_near);
                run.metric("envelope_exponent", o.envelope_exponent);
                run.metric("lobes", o.lobes);
                run.metric("phi_period", o.phi_period);
                lines.push(format!(
                    "sign changes near interface {} envelope exponent {}",
                    o.sign_changes_near,
                    fmt16(o.envelope_exponent)
                ));
            }
            c
        }
    };
    run.metric("y0", prof.y0);
    run.metric("interface_exponent", prof.interface_exponent);
    lines.insert(0, format!("y0 = {}", fmt16(prof.y0)));
    let name = format!("compacton-{}", format!("{which:?}").to_lowercase());
    let csv_path = run.path(&format!("{name}.csv"));
    prof.write_csv(&csv_path, samples)?;
    run.write_json(&format!("{name}.json"), prof.metadata())?;
    if run.plot {
        let pts: Vec<(f64, f64)> = prof.samples(samples).into_iter().map(|(y, _, f)| (y, f)).collect();
        run.write_svg(&format!("{name}.svg"), &name, &[pts])?;
    }
    if probe {
        let opts = ProbeOptions { exec: run.exec, ..ProbeOptions::default() };
        let reports = robustness_probe(&[0.0, 0.05], &opts)?;
        for r in &reports {
            lines.push(format!(
                "probe {} eps {}: min defect {} at y0 {} solvable {}",
                r.equation.name(),
                fmt16(r.epsilon),
                fmt16(r.min_defect),
                fmt16(r.argmin_y0),
                r.solvable
            ));
        }
        run.metric(
            "probe",
            reports
                .iter()
                .map(|r| json!({"equation": r.equation.name(), "epsilon": r.epsilon, "min_defect": r.min_defect, "solvable": r.solvable}))
                .collect::<Vec<_>>(),
        );
        run.write_json("robustness-probe.json", &reports)?;
    }
    Ok(lines)
}

fn cmd_rh(run: &mut Run, minus: [f64; 5], plus: [f64; 5]) -> Result<Vec<String>> {
    run.param("minus", minus);
    run.param("plus", plus);
    let (lambda, bracket) = rh_speed(&JumpJets { minus, plus })?;
    run.metric("lambda", lambda);
    run.metric("flux_bracket", bracket);
    let lam = if lambda == 0.0 { "0".to_string() } else { fmt16(lambda) };
    Ok(vec![format!("lambda = {lam}")])
}

fn cmd_rate(run: &mut Run, what: RateWhat, path: &Path, l: f64, decades: Option<Vec<f64>>) -> Result<Vec<String>> {
    run.param("what", format!("{what:?}").to_lowercase());
    run.param("profile", path.display().to_string());
    run.param("l", l);
    let prof = load_profile(path)?;
    let (ext, fit) = extended(&prof)?;
    run.metric("tail_fit", fit);
    let rep = match what {
        RateWhat::L1 => {
            let d = decades.unwrap_or_else(|| parse_grid("-20:-30:9").unwrap().0);
            run.param("decades", &d);
            let ts: Vec<f64> = logspace(&d).into_iter().map(|t| -t).collect();
            l1_rate(&ext, l, &ts)?
        }
        RateWhat::Tv => {
            let d = decades.unwrap_or_else(|| parse_grid("2:4:9").unwrap().0);
            run.param("decades", &d);
            tv_growth(&ext, &logspace(&d))?
        }
    };
    run.metric("exponent", rep.exponent);
    run.metric("fit_residual", rep.fit_residual);
    let rows: Vec<Vec<f64>> = rep.abscissae.iter().zip(&rep.values).map(|(x, y)| vec![*x, *y]).collect();
    let header = match what {
        RateWhat::L1 => ["minus_t", "l1_distance"],
        RateWhat::Tv => ["Z", "variation"],
    };
    run.write_rows("rate.csv", &header, &rows)?;
    Ok(vec![format!("exponent = {}", fmt16(rep.exponent))])
}

fn cmd_entropy(run: &mut Run, shock: ShockChoice, path: &Path, decades: &[f64]) -> Result<Vec<String>> {
    run.param("shock", format!("{shock:?}"));
    run.param("profile", path.display().to_string());
    run.param("decades", decades);
    let prof = load_profile(path)?;
    let (ext, fit) = extended(&prof)?;
    run.metric("tail_fit", fit);
    let side = match shock {
        ShockChoice::SMinus => ShockSide::SMinusBlowup,
        ShockChoice::SPlus => ShockSide::SPlusRiemann,
    };
    let rep = delta_entropy_test(side, &ext, &logspace(decades), Window::default(), run.exec)?;
    run.metric("verdict", format!("{:?}", rep.verdict));
    run.metric("exponent", rep.exponent);
    let rows: Vec<Vec<f64>> = rep.deltas.iter().zip(&rep.distances).map(|(d, e)| vec![*d, *e]).collect();
    run.write_rows("entropy.csv", &["delta", "distance"], &rows)?;
    Ok(vec![format!("verdict = {:?}", rep.verdict), format!("exponent = {}", fmt16(rep.exponent))])
}

fn cmd_time5(run: &mut Run, a: f64, b: f64, z_max: f64) -> Result<Vec<String>> {
    run.param("A", a);
    run.param("B", b);
    run.param("z_max", z_max);
    let prof = shoot_time5(a, b, Time5Options { z_max, ..Time5Options::default() })?;
    let far = prof.jets[0][0];
    let at50 = if z_max >= 50.0 { Some(prof.eval(-50.0)?[0]) } else { None };
    run.metric("g_far", far);
    run.metric("g_at_minus_50", at50);
    run.write_profile("time5", &prof)?;
    Ok(vec![format!("g(-{}) = {}", z_max, fmt16(far))])
}

#[allow(clippy::too_many_arguments)]
fn cmd_evolve(
    run: &mut Run,
    kind: NdeKind,
    data: &str,
    delta: f64,
    t_end: f64,
    n: usize,
    length: f64,
    cfl: f64,
    snapshots: usize,
) -> Result<Vec<String>> {
    run.param("kind", kind.name());
    run.param("data", data);
    run.param("delta", delta);
    run.param("t_end", t_end);
    run.param("N", n);
    run.param("L", length);
    run.param("cfl", cfl);
    let step = match data {
        "s-plus" => StepData::SPlus,
        "s-minus" => StepData::SMinus,
        file => StepData::Custom(read_samples(Path::new(file))?),
    };
    let m = mollify(&step, delta, FieldTemplate { half_length: length, n })?;
    run.metric("mollifier_width", m.width);
    run.metric("mollifier_distance", m.distance);
    run.metric("abandoned", m.abandoned);
    let tail = m.field.spectral_tail();
    run.metric("initial_spectral_tail", tail);
    if tail >= SMOOTH_TAIL {
        run.metric("status", "unresolved initial data");
        run.finish_partial()?;
        return Err(Error::IntegrationFailed(format!(
            "mollified data unresolved on N = {n}: spectral tail {tail:e} exceeds {SMOOTH_TAIL:e}; increase N or delta"
        )));
    }
    let dt = stable_step(&m.field, cfl);
    run.metric("dt", dt);
    let out = evolve(&m.field, kind, t_end, None, EvolveOptions { cfl, snapshots })?;
    let mut ind = Vec::new();
    let mut lines = Vec::new();
    for (i, f) in out.iter().enumerate() {
        let p = run.path(&format!("evolve-{i:03}.csv"));
        f.write_csv(&p)?;
        let s = shock_indicator(f);
        lines.push(format!("t = {} max|u_x| = {}", fmt16(f.t), fmt16(s.max_gradient)));
        ind.push(json!({"t": f.t, "indicator": s}));
    }
    run.metric("indicators", ind);
    Ok(lines)
}

impl Run {
    /// Manifest for a run stopped before completion.
    fn finish_partial(&mut self) -> Result<()> {
        let manifest = json!({
            "command": self.command,
            "params": self.params,
            "paper_anchor": self.anchor,
            "outputs": self.outputs,
            "metrics": self.metrics,
        });
        fs::write(
            self.dir.join(format!("{}.manifest.json", self.command)),
            serde_json::to_string_pretty(&round16(manifest))? + "\n",
        )?;
        Ok(())
    }
}

/// The `u` column of a CSV file.
fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let mut rd = csv::Reader::from_path(path)?;
    let col = rd
        .headers()?
        .iter()
        .position(|h| h.trim() == "u")
        .ok_or_else(|| Error::InvalidInput(format!("{} has no 'u' column", path.display())))?;
    rd.records()
        .map(|r| {
            let r = r?;
            r.get(col)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_and_grids() {
        assert_eq!(parse_scalar("1/9").unwrap(), 1.0 / 9.0);
        assert_eq!(parse_scalar("-0.5").unwrap(), -0.5);
        assert!(parse_scalar("1/0").is_err());
        assert_eq!(parse_grid("1:9:9").unwrap().0, (1..=9).map(f64::from).collect::<Vec<_>>());
        assert_eq!(parse_pair("-1,1").unwrap(), (-1.0, 1.0));
        assert!(parse_jet("1,2,3").is_err());
    }

    #[test]
    fn rounding_keeps_sixteen_digits() {
        let v = round16(json!({"x": 0.1 + 0.2, "n": 3}));
        assert_eq!(v["x"].as_f64().unwrap(), 0.3);
        assert_eq!(v["n"], json!(3));
    }
}
