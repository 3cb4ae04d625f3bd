//! One-parameter shooting with far-field classification.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use crate::bvp::{solve_bvp, BvpSolution, BvpSpec, LeftClosure, DEFAULT_GRADING};
use crate::error::{Error, Result};
use crate::models::{
    rhs_phase_plane, series_for_model, Jet5, Model, NdeKind, Profile, ProfileKind,
    SimilarityParams,
};
use crate::ode_core::{integrate, IvpSpec, Termination, Trajectory};
use crate::parallel::{self, Exec};

/// Which similarity family a trajectory belongs to; fixes the quintic-growth constant
/// and the algebraic exponent of the far field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Shock profiles: `g ~ −z⁵/120` growth, constant far field.
    Shock,
    /// Blow-up profiles: `f ~ −y⁵/15120` growth, far field `C₀|y|^{α/β}`.
    Blowup { tail_exponent: f64 },
    /// Global profiles: `F ~ y⁵/15120` growth.
    Global { tail_exponent: f64 },
}

impl Family {
    /// `K` in the growing bundle `g ~ K z⁵`.
    pub fn quintic_constant(&self) -> f64 {
        match self {
            Family::Shock => -1.0 / 120.0,
            Family::Blowup { .. } => -1.0 / 15120.0,
            Family::Global { .. } => 1.0 / 15120.0,
        }
    }

    pub fn tail_exponent(&self) -> f64 {
        match *self {
            Family::Shock => 0.0,
            Family::Blowup { tail_exponent } | Family::Global { tail_exponent } => tail_exponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailClass {
    QuinticGrowth,
    SignChange { z0: f64 },
    ProperOscillatory,
    Undecided,
}

impl TailClass {
    fn same_side(&self, other: &TailClass) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }

    pub fn name(&self) -> &'static str {
        match self {
            TailClass::QuinticGrowth => "QuinticGrowth",
            TailClass::SignChange { .. } => "SignChange",
            TailClass::ProperOscillatory => "ProperOscillatory",
            TailClass::Undecided => "Undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEvidence {
    pub last_z: f64,
    pub form: String,
    pub fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub class: TailClass,
    pub evidence: TailEvidence,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Half-width of the admissible band about the far-field level.
    pub eta: f64,
    /// Allowed range of `g/(Kz⁵)` for certified quintic growth.
    pub kappa: (f64, f64),
    /// Index of the degeneracy event in the trajectory's event list.
    pub degeneracy_event: Option<usize>,
    /// Minimal integrated extent for a ProperOscillatory verdict.
    pub z_min: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { eta: 0.5, kappa: (0.5, 2.0), degeneracy_event: Some(0), z_min: 20.0 }
    }
}

/// Classifies the far-field behaviour of a trajectory of the value component.
pub fn classify_tail(traj: &Trajectory, family: Family, opts: &ClassifyOptions) -> Classification {
    let last_z = traj.t_last();
    let ev = |class, form: &str, r| Classification {
        class,
        evidence: TailEvidence { last_z, form: form.to_string(), fit_residual: r },
    };
    match traj.termination {
        Termination::EventFired { index, t } if Some(index) == opts.degeneracy_event => {
            return ev(TailClass::SignChange { z0: t }, "vanishing", 0.0);
        }
        Termination::StepFailure { t } => {
            return degenerate_end(traj, t, "step collapse", ev);
        }
        // derivatives overflowing while the value stays moderate: singular approach
        Termination::StateOverflow { threshold } if traj.y_last()[0].abs() < 1e-3 * threshold => {
            return degenerate_end(traj, last_z, "derivative overflow", ev);
        }
        _ => {}
    }
    let samples: Vec<(f64, f64)> = traj.t.iter().zip(&traj.y).map(|(z, y)| (*z, y[0])).collect();
    classify_samples(&samples, family, opts)
}

fn degenerate_end(
    traj: &Trajectory,
    t: f64,
    what: &str,
    ev: impl Fn(TailClass, &str, f64) -> Classification,
) -> Classification {
    let g = traj.y_last()[0];
    let scale = traj.y.iter().fold(0.0f64, |m, y| m.max(y[0].abs()));
    if g.abs() < 0.1 * scale {
        ev(TailClass::SignChange { z0: t }, &format!("vanishing ({what})"), g.abs())
    } else {
        ev(TailClass::Undecided, what, g.abs())
    }
}

/// [`classify_tail`] on bare `(z, g)` samples that end without an event.
pub fn classify_samples(samples: &[(f64, f64)], family: Family, opts: &ClassifyOptions) -> Classification {
    let last_z = samples.last().map(|s| s.0).unwrap_or(0.0);
    let ev = |class, form: &str, r| Classification {
        class,
        evidence: TailEvidence { last_z, form: form.to_string(), fit_residual: r },
    };
    if samples.len() < 4 {
        return ev(TailClass::Undecided, "too few samples", f64::NAN);
    }
    if let Some((z0, _)) = samples.windows(2).find(|w| w[0].1 * w[1].1 < 0.0).map(|w| w[1]) {
        return ev(TailClass::SignChange { z0 }, "sign change", 0.0);
    }
    // quintic envelope over the last decade of |z|
    let zmax = last_z.abs();
    let k = family.quintic_constant();
    let decade: Vec<&(f64, f64)> =
        samples.iter().filter(|(z, _)| z.abs() >= zmax / 10.0 && z.abs() > 0.0).collect();
    if decade.len() >= 3 && zmax >= 10.0 {
        let ratios: Vec<f64> = decade.iter().map(|(z, g)| g / (k * z.powi(5))).collect();
        let ok = ratios.iter().all(|r| *r >= opts.kappa.0 && *r <= opts.kappa.1);
        if ok {
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let spread = ratios.iter().fold(0.0f64, |m, r| m.max((r - mean).abs()));
            return ev(TailClass::QuinticGrowth, "quintic envelope", spread);
        }
    }
    // band about the far-field level over the outer half of the span
    if zmax >= opts.z_min {
        let p = family.tail_exponent();
        let outer: Vec<f64> = samples
            .iter()
            .filter(|(z, _)| z.abs() >= zmax / 2.0)
            .map(|(z, g)| g / z.abs().powf(p))
            .collect();
        if !outer.is_empty() {
            let level = outer.iter().sum::<f64>() / outer.len() as f64;
            let dev = outer.iter().fold(0.0f64, |m, v| m.max((v - level).abs()));
            if level != 0.0 && dev <= opts.eta * level.abs() {
                return ev(TailClass::ProperOscillatory, "bounded oscillation", dev / level.abs());
            }
        }
    }
    ev(TailClass::Undecided, "no asymptotic form matched", f64::NAN)
}

/// Options shared by the shooting drivers.
#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    pub z_init: f64,
    pub z_max: f64,
    /// State-norm threshold; large enough for the quintic envelope up to `z_max`.
    pub overflow: f64,
    pub nu: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Level at which approach to `g = 0` counts as a sign change.
    pub vanishing_level: f64,
    pub series_order: usize,
    pub max_iter: usize,
    pub classify: ClassifyOptions,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            z_init: 1e-2,
            z_max: 1000.0,
            overflow: 1e15,
            nu: crate::models::DEFAULT_NU,
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            vanishing_level: 1e-3,
            series_order: 9,
            max_iter: 200,
            classify: ClassifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootResult {
    pub parameter_name: String,
    pub bracket: (f64, f64),
    pub value: f64,
    #[serde(skip)]
    pub profile: Profile,
    pub classification: TailClass,
    pub history: Vec<(f64, TailClass)>,
    /// Extent of the profile over which the bracketing orbits agree.
    pub trusted_extent: f64,
}

/// A shooting problem: a launch jet per parameter value and a model.
struct Launcher {
    model: Model,
    family: Family,
    /// sign of the far field on the negative axis
    side_sign: f64,
    opts: ShootOptions,
    jet: Box<dyn Fn(f64) -> Result<(f64, Jet5)> + Sync>,
}

impl Launcher {
    fn run(&self, p: f64) -> Result<Trajectory> {
        let (z0, j0) = (self.jet)(p)?;
        let rhs = self.model.rhs_fn();
        let s = self.side_sign;
        let lvl = self.opts.vanishing_level;
        let spec = IvpSpec::new(rhs, z0, j0.to_vec(), -self.opts.z_max)
            .tolerances(self.opts.rel_tol, self.opts.abs_tol)
            .overflow(self.opts.overflow)
            .event(move |_, y| s * y[0] - lvl);
        integrate(&spec)
    }

    fn classify(&self, p: f64) -> Result<(Classification, Trajectory)> {
        let tr = self.run(p)?;
        Ok((classify_tail(&tr, self.family, &self.opts.classify), tr))
    }
}

fn bisect(
    launcher: &Launcher,
    name: &str,
    bracket: (f64, f64),
    tol: f64,
    head: Option<&crate::models::OriginSeries>,
) -> Result<ShootResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::invalid("bracket must satisfy lo < hi and tol > 0"));
    }
    let (c_lo, _) = launcher.classify(lo)?;
    let (c_hi, _) = launcher.classify(hi)?;
    let mut history = vec![(lo, c_lo.class), (hi, c_hi.class)];
    if c_lo.class.same_side(&c_hi.class) {
        return Err(Error::SameClassAtBracket(c_lo.class.name().to_string()));
    }
    let mut iter = 0;
    while hi - lo > tol && iter < launcher.opts.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (c, _) = launcher.classify(mid)?;
        history.push((mid, c.class));
        if c.class.same_side(&c_lo.class) {
            lo = mid;
        } else if c.class.same_side(&c_hi.class) {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
            break;
        }
        iter += 1;
    }
    let value = 0.5 * (lo + hi);
    let (c_mid, tr) = launcher.classify(value)?;
    let tr_lo = launcher.run(lo)?;
    let tr_hi = launcher.run(hi)?;
    let trusted = agreement_extent(&tr, &tr_lo, &tr_hi);
    let profile = trajectory_profile(launcher, &tr, trusted, head, name, value)?;
    Ok(ShootResult {
        parameter_name: name.to_string(),
        bracket,
        value,
        profile,
        classification: c_mid.class,
        history,
        trusted_extent: trusted,
    })
}

/// Largest |z| up to which the bracketing orbits stay within 10⁻³ of the midpoint orbit.
fn agreement_extent(mid: &Trajectory, lo: &Trajectory, hi: &Trajectory) -> f64 {
    let mut extent = mid.t_first().abs();
    for (z, y) in mid.t.iter().zip(&mid.y) {
        let mut ok = true;
        for other in [lo, hi] {
            match other.dense_eval(*z) {
                Ok(v) => {
                    if (v[0] - y[0]).abs() > 1e-3 * (1.0 + y[0].abs()) {
                        ok = false;
                    }
                }
                Err(_) => ok = false,
            }
        }
        if !ok {
            break;
        }
        extent = z.abs();
    }
    extent
}

fn trajectory_profile(
    launcher: &Launcher,
    tr: &Trajectory,
    extent: f64,
    head: Option<&crate::models::OriginSeries>,
    name: &str,
    value: f64,
) -> Result<Profile> {
    let mut mesh = Vec::new();
    let mut jets = Vec::new();
    for (z, y) in tr.t.iter().zip(&tr.y).rev() {
        if z.abs() <= extent {
            mesh.push(*z);
            jets.push([y[0], y[1], y[2], y[3], y[4]]);
        }
    }
    // refine so the stored mesh is fine enough for residual checks
    let mut fine_mesh = Vec::new();
    let mut fine_jets = Vec::new();
    for w in 0..mesh.len() {
        fine_mesh.push(mesh[w]);
        fine_jets.push(jets[w]);
        if w + 1 < mesh.len() {
            let (a, b) = (mesh[w], mesh[w + 1]);
            let m = ((b - a).abs() / 0.05).ceil() as usize;
            for i in 1..m {
                let z = a + (b - a) * i as f64 / m as f64;
                let v = tr.dense_eval(z)?;
                fine_mesh.push(z);
                fine_jets.push([v[0], v[1], v[2], v[3], v[4]]);
            }
        }
    }
    if let Some(series) = head {
        let z_init = tr.t_first();
        let n = 10;
        for i in 1..=n {
            let z = z_init * (1.0 - i as f64 / n as f64);
            fine_mesh.push(z);
            fine_jets.push(series.jet(z));
        }
    }
    let mut prov = BTreeMap::new();
    prov.insert("method".into(), json!("shooting"));
    prov.insert("parameter".into(), json!(name));
    prov.insert("value".into(), json!(value));
    prov.insert("nu".into(), json!(launcher.model.nu()));
    prov.insert("z_init".into(), json!(launcher.opts.z_init));
    prov.insert("rel_tol".into(), json!(launcher.opts.rel_tol));
    prov.insert("trusted_extent".into(), json!(extent));
    let p = Profile::new(launcher.model.profile_kind(), launcher.model.params(), fine_mesh, fine_jets, prov)?;
    Ok(p.increasing())
}

fn shock_launcher(kind: NdeKind, c: f64, opts: ShootOptions) -> Result<Launcher> {
    let model = crate::models::rhs_shock(kind, opts.nu)?;
    let zi = -opts.z_init.abs();
    let order = opts.series_order;
    Ok(Launcher {
        model,
        family: Family::Shock,
        side_sign: -c.signum(),
        opts,
        jet: Box::new(move |d| {
            let s = series_for_model(model.with_nu(0.0), c, d, order)?;
            Ok((zi, s.jet(zi)))
        }),
    })
}

/// Shooting on `D = g‴(0)/6` for the shock profile with `g′(0) = C` (default `C = −1`).
pub fn shoot_shock(kind: NdeKind, bracket: (f64, f64), tol: f64, opts: ShootOptions) -> Result<ShootResult> {
    shoot_shock_with_slope(kind, -1.0, bracket, tol, opts)
}

pub fn shoot_shock_with_slope(
    kind: NdeKind,
    c: f64,
    bracket: (f64, f64),
    tol: f64,
    opts: ShootOptions,
) -> Result<ShootResult> {
    let launcher = shock_launcher(kind, c, opts)?;
    let mut res = bisect(&launcher, "D", bracket, tol, None)?;
    let series = series_for_model(launcher.model.with_nu(0.0), c, res.value, opts.series_order)?;
    res.profile = trajectory_profile(&launcher, &launcher.run(res.value)?, res.trusted_extent, Some(&series), "D", res.value)?;
    Ok(res)
}

/// Shooting estimate and its collocation polish on `[−length, 0]`.
#[derive(Debug, Clone)]
pub struct PolishedShock {
    pub shooting: ShootResult,
    pub bvp: BvpSolution,
}

/// Shoots for `D` with `g′(0) = −1`, then solves the BVP with `g = g″ = g⁗ = 0`,
/// `g′ = −1` at the origin and the growing mode removed at `−length`.
pub fn polish_shock(
    kind: NdeKind,
    bracket: (f64, f64),
    length: f64,
    intervals: usize,
    opts: ShootOptions,
) -> Result<PolishedShock> {
    let shooting = shoot_shock(kind, bracket, 1e-10, opts)?;
    let model = crate::models::rhs_shock(kind, opts.nu)?;
    let spec = BvpSpec::new(
        model,
        length,
        LeftClosure::OscillatoryDamped { exponent: 0.0 },
        [Some(0.0), Some(-1.0), Some(0.0), None, Some(0.0)],
    )?
    .with_mesh(intervals, DEFAULT_GRADING)?
    .with_tol(1e-9);
    let bvp = solve_bvp(&spec, &shooting.profile)?;
    Ok(PolishedShock { shooting, bvp })
}

/// Classification of a single shock launch (for scans).
pub fn classify_shock_launch(kind: NdeKind, d: f64, opts: ShootOptions) -> Result<Classification> {
    let launcher = shock_launcher(kind, -1.0, opts)?;
    Ok(launcher.classify(d)?.0)
}

fn blowup_launcher(p: SimilarityParams, f0: f64, f1: f64, opts: ShootOptions) -> Result<Launcher> {
    if f1 == 0.0 {
        return Err(Error::invalid("f'(0) must be nonzero"));
    }
    let model = Model::Blowup { params: p, nu: opts.nu };
    let order = opts.series_order;
    let zi = -opts.z_init.abs();
    // far-field sign: the profile leaves the origin with slope f1 towards negative y
    let side = if f0 != 0.0 { f0.signum() } else { -f1.signum() };
    Ok(Launcher {
        model,
        family: Family::Blowup { tail_exponent: p.tail_exponent() },
        side_sign: side,
        opts,
        jet: Box::new(move |f3| {
            if f0 == 0.0 {
                let s = series_for_model(model.with_nu(0.0), f1, f3 / 6.0, order)?;
                Ok((zi, s.jet(zi)))
            } else {
                Ok((0.0, [f0, f1, 0.0, f3, 0.0]))
            }
        }),
    })
}

/// Shooting on `f₃ = f‴(0)` for the blow-up profile with `f(0) = f0`, `f′(0) = f1`.
pub fn shoot_blowup(
    p: SimilarityParams,
    f0: f64,
    f1: f64,
    bracket: (f64, f64),
    tol: f64,
    opts: ShootOptions,
) -> Result<ShootResult> {
    let launcher = blowup_launcher(p, f0, f1, opts)?;
    let mut res = bisect(&launcher, "f3", bracket, tol, None)?;
    if f0 == 0.0 {
        let series = series_for_model(launcher.model.with_nu(0.0), f1, res.value / 6.0, opts.series_order)?;
        res.profile = trajectory_profile(&launcher, &launcher.run(res.value)?, res.trusted_extent, Some(&series), "f3", res.value)?;
    }
    res.profile.provenance.insert("f0".into(), json!(f0));
    res.profile.provenance.insert("f1".into(), json!(f1));
    Ok(res)
}

pub fn classify_blowup_launch(p: SimilarityParams, f0: f64, f1: f64, f3: f64, opts: ShootOptions) -> Result<Classification> {
    Ok(blowup_launcher(p, f0, f1, opts)?.classify(f3)?.0)
}

/// Options for the phase-plane integration.
#[derive(Debug, Clone, Copy)]
pub struct Time5Options {
    pub z_start: f64,
    pub z_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for Time5Options {
    fn default() -> Self {
        Time5Options { z_start: 1e-8, z_max: 200.0, rel_tol: 1e-12, abs_tol: 1e-14 }
    }
}

/// Profile of `gg′ = z⁵g′ + Az + Bz³` on `z < 0` along the branch `g′(0) = −√A`.
pub fn shoot_time5(a: f64, b: f64, opts: Time5Options) -> Result<Profile> {
    let pp = rhs_phase_plane(a, b)?;
    let z0 = -opts.z_start.abs();
    // g² = Az² + (B/2)z⁴ + O(z⁶) near the origin
    let g0 = (a * z0 * z0 + 0.5 * b * z0.powi(4)).sqrt();
    let spec = IvpSpec::new(
        move |z, y, d| {
            let den = y[0] - z.powi(5);
            d[0] = (pp.a * z + pp.b * z.powi(3)) / den;
        },
        z0,
        vec![g0],
        -opts.z_max,
    )
    .tolerances(opts.rel_tol, opts.abs_tol)
    .event(move |z, y| pp.singular(z, y[0]));
    let tr = integrate(&spec)?;
    match tr.termination {
        Termination::ReachedEnd => {}
        Termination::EventFired { t, .. } => {
            return Err(Error::IntegrationFailed(format!("singular manifold g = z^5 reached at z = {t}")))
        }
        other => return Err(Error::IntegrationFailed(format!("phase-plane run ended with {other:?}"))),
    }
    let mut mesh = vec![0.0];
    let mut jets = vec![[0.0, -a.sqrt(), 0.0, 0.0, 0.0]];
    for (z, y) in tr.t.iter().zip(&tr.y) {
        let g = y[0];
        let den = g - z.powi(5);
        let g1 = (a * z + b * z.powi(3)) / den;
        let g2 = ((a + 3.0 * b * z * z) * den - (a * z + b * z.powi(3)) * (g1 - 5.0 * z.powi(4)))
            / (den * den);
        mesh.push(*z);
        jets.push([g, g1, g2, 0.0, 0.0]);
    }
    let mut prov = BTreeMap::new();
    prov.insert("method".into(), json!("phase-plane integration"));
    prov.insert("A".into(), json!(a));
    prov.insert("B".into(), json!(b));
    prov.insert("jet_order".into(), json!(2));
    prov.insert("z_start".into(), json!(opts.z_start));
    let p = Profile::new(ProfileKind::PhasePlane, SimilarityParams::riemann(), mesh, jets, prov)?;
    Ok(p.increasing())
}

/// Odd extension `g(−z) = −g(z)` of a profile given on `z ≤ 0`.
pub fn antisymmetric_extension(prof: &Profile) -> Result<Profile> {
    let p = prof.increasing();
    let mut mesh = p.mesh.clone();
    let mut jets = p.jets.clone();
    for (z, j) in p.mesh.iter().zip(&p.jets).rev() {
        if *z < 0.0 {
            mesh.push(-z);
            jets.push([-j[0], j[1], -j[2], j[3], -j[4]]);
        }
    }
    let mut q = p.clone();
    q.mesh = mesh;
    q.jets = jets;
    q.validate()?;
    Ok(q)
}

/// One independent solve per grid tuple; failures are kept in the report.
pub fn sweep_family<T, R, F>(exec: Exec, grid: &[T], solve: F) -> Vec<(T, Result<R>)>
where
    T: Clone + Sync + Send,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let out = parallel::map(exec, grid, |t| solve(t));
    grid.iter().cloned().zip(out).collect()
}
