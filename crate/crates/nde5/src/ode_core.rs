//! Dormand–Prince 5(4) integration with dense output and event location.

use crate::error::{Error, Result};

pub type RhsFn<'a> = dyn Fn(f64, &[f64], &mut [f64]) + 'a;
pub type EventFn<'a> = dyn Fn(f64, &[f64]) -> f64 + 'a;

pub const DEFAULT_OVERFLOW: f64 = 1e12;

/// An initial-value problem `y' = f(t, y)` on `[t0, t_end]` (either direction).
pub struct IvpSpec<'a> {
    pub rhs: Box<RhsFn<'a>>,
    pub t0: f64,
    pub y0: Vec<f64>,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub events: Vec<Box<EventFn<'a>>>,
    pub overflow: f64,
    pub max_steps: usize,
}

impl<'a> IvpSpec<'a> {
    pub fn new(
        rhs: impl Fn(f64, &[f64], &mut [f64]) + 'a,
        t0: f64,
        y0: Vec<f64>,
        t_end: f64,
    ) -> Self {
        IvpSpec {
            rhs: Box::new(rhs),
            t0,
            y0,
            t_end,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            events: Vec::new(),
            overflow: DEFAULT_OVERFLOW,
            max_steps: 2_000_000,
        }
    }

    pub fn tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    pub fn overflow(mut self, threshold: f64) -> Self {
        self.overflow = threshold;
        self
    }

    /// Adds a terminal event; integration stops at the first sign change.
    pub fn event(mut self, f: impl Fn(f64, &[f64]) -> f64 + 'a) -> Self {
        self.events.push(Box::new(f));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    ReachedEnd,
    EventFired { index: usize, t: f64 },
    StepFailure { t: f64 },
    StateOverflow { threshold: f64 },
}

/// Accepted steps of an integration with their continuous extension.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// Five coefficient vectors per step (Hairer's `rcont1..rcont5`) plus the step size.
    dense: Vec<DenseStep>,
    pub termination: Termination,
}

#[derive(Debug, Clone)]
struct DenseStep {
    t_old: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t_old) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.y[0].len()
    }

    pub fn t_first(&self) -> f64 {
        self.t[0]
    }

    pub fn t_last(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn y_last(&self) -> &[f64] {
        self.y.last().unwrap()
    }

    fn forward(&self) -> bool {
        self.t_last() >= self.t_first()
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.span();
        t >= lo && t <= hi
    }

    pub fn span(&self) -> (f64, f64) {
        let (a, b) = (self.t_first(), self.t_last());
        (a.min(b), a.max(b))
    }

    /// Continuous evaluation inside the integrated span.
    pub fn dense_eval(&self, t: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.span();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfSpan { t, lo, hi });
        }
        let fwd = self.forward();
        // index of the first node at or beyond t in the integration direction
        let k = self.t.partition_point(|&s| if fwd { s < t } else { s > t });
        if k < self.t.len() && self.t[k] == t {
            return Ok(self.y[k].clone());
        }
        let step = &self.dense[k.max(1) - 1];
        let mut out = vec![0.0; self.dim()];
        step.eval(t, &mut out);
        Ok(out)
    }

    /// Samples the dense output at `n` equally spaced points over the span.
    pub fn sample(&self, n: usize) -> Vec<(f64, Vec<f64>)> {
        let (a, b) = (self.t_first(), self.t_last());
        (0..n)
            .map(|i| {
                let t = if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 };
                (t, self.dense_eval(t).expect("inside span"))
            })
            .collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Integrates `spec` until `t_end`, an event, overflow or step-size collapse.
///
/// Step collapse is reported through [`Termination::StepFailure`] with the partial
/// trajectory, since callers classify such runs rather than abort.
pub fn integrate(spec: &IvpSpec) -> Result<Trajectory> {
    let n = spec.y0.len();
    if n == 0 {
        return Err(Error::invalid("empty state vector"));
    }
    if !(spec.t_end != spec.t0 && spec.t0.is_finite() && spec.t_end.is_finite()) {
        return Err(Error::invalid("t_end must differ from t0 and both be finite"));
    }
    if !(spec.rel_tol > 0.0 && spec.abs_tol > 0.0 && spec.max_step > 0.0) {
        return Err(Error::invalid("tolerances and max_step must be positive"));
    }
    if !all_finite(&spec.y0) {
        return Err(Error::invalid("non-finite initial state"));
    }
    let f = &spec.rhs;
    let span = spec.t_end - spec.t0;
    let dir = span.signum();
    let h_min = 1e-14 * span.abs();
    let hmax = spec.max_step.min(span.abs());

    let mut t = spec.t0;
    let mut y = spec.y0.clone();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1);
    if !all_finite(&k1) {
        return Err(Error::invalid("right-hand side not finite at the initial point"));
    }
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err_v = vec![0.0; n];

    let mut traj = Trajectory {
        t: vec![t],
        y: vec![y.clone()],
        dense: Vec::new(),
        termination: Termination::ReachedEnd,
    };
    let mut ev_prev: Vec<f64> = spec.events.iter().map(|e| e(t, &y)).collect();

    let mut h = initial_step(spec, &y, &k1).min(hmax);
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0usize;
    const BETA: f64 = 0.04;
    const EXPO1: f64 = 0.2 - BETA * 0.75;
    const SAFE: f64 = 0.9;
    const FACC1: f64 = 1.0 / 0.2;
    const FACC2: f64 = 1.0 / 10.0;

    loop {
        if steps >= spec.max_steps {
            traj.termination = Termination::StepFailure { t };
            return Ok(traj);
        }
        let remaining = (spec.t_end - t) * dir;
        if remaining <= 0.0 {
            traj.termination = Termination::ReachedEnd;
            return Ok(traj);
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < h_min {
            traj.termination = Termination::StepFailure { t };
            return Ok(traj);
        }
        let hs = h * dir;
        steps += 1;

        for i in 0..n {
            ys[i] = y[i] + hs * A21 * k1[i];
        }
        f(t + C2 * hs, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hs, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hs, &ys, &mut k4);
        for i in 0..n {
            ys[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hs, &ys, &mut k5);
        for i in 0..n {
            ys[i] = y[i]
                + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { spec.t_end } else { t + hs };
        f(t + hs, &ys, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t_new, &y_new, &mut k7);

        let finite = all_finite(&y_new) && all_finite(&k7);
        let mut err = f64::INFINITY;
        if finite {
            let mut acc = 0.0;
            for i in 0..n {
                err_v[i] = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sk = spec.abs_tol + spec.rel_tol * y[i].abs().max(y_new[i].abs());
                acc += (err_v[i] / sk).powi(2);
            }
            err = (acc / n as f64).sqrt();
        }

        if !err.is_finite() {
            h *= 0.1;
            last_rejected = true;
            continue;
        }
        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let mut fac = fac11 / facold.powf(BETA);
            fac = (fac / SAFE).clamp(FACC2, FACC1);
            let mut h_new = h / fac;
            facold = err.max(1e-4);

            let r2: Vec<f64> = (0..n).map(|i| y_new[i] - y[i]).collect();
            let r3: Vec<f64> = (0..n).map(|i| hs * k1[i] - r2[i]).collect();
            let r4: Vec<f64> = (0..n).map(|i| r2[i] - hs * k7[i] - r3[i]).collect();
            let r5: Vec<f64> = (0..n)
                .map(|i| {
                    hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i])
                })
                .collect();
            let step = DenseStep { t_old: t, h: t_new - t, r: [y.clone(), r2, r3, r4, r5] };

            // events: earliest sign change within the step
            let mut fired: Option<(usize, f64)> = None;
            if !spec.events.is_empty() {
                let ev_new: Vec<f64> = spec.events.iter().map(|e| e(t_new, &y_new)).collect();
                for (idx, ev) in spec.events.iter().enumerate() {
                    let (a, b) = (ev_prev[idx], ev_new[idx]);
                    if a != 0.0 && (a * b < 0.0 || b == 0.0) {
                        let ts = locate_event(ev.as_ref(), &step, t, t_new, a);
                        if fired.map_or(true, |(_, tf)| (ts - tf) * dir < 0.0) {
                            fired = Some((idx, ts));
                        }
                    }
                }
                ev_prev = ev_new;
            }
            if let Some((index, ts)) = fired {
                let mut ye = vec![0.0; n];
                step.eval(ts, &mut ye);
                traj.dense.push(step);
                if (ts - t) * dir > 0.0 {
                    traj.t.push(ts);
                    traj.y.push(ye);
                } else {
                    traj.dense.pop();
                }
                traj.termination = Termination::EventFired { index, t: ts };
                return Ok(traj);
            }

            traj.dense.push(step);
            traj.t.push(t_new);
            traj.y.push(y_new.clone());
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);

            if inf_norm(&y) > spec.overflow {
                traj.termination = Termination::StateOverflow { threshold: spec.overflow };
                return Ok(traj);
            }
            if last {
                traj.termination = Termination::ReachedEnd;
                return Ok(traj);
            }
            if h_new > hmax {
                h_new = hmax;
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            h /= FACC1.min(fac11 / SAFE);
            last_rejected = true;
        }
    }
}

fn locate_event(ev: &EventFn, step: &DenseStep, ta: f64, tb: f64, va: f64) -> f64 {
    let mut buf = vec![0.0; step.r[0].len()];
    let (mut a, mut b) = (ta, tb);
    let mut fa = va;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs()).min(10.0) {
            break;
        }
        let m = 0.5 * (a + b);
        step.eval(m, &mut buf);
        let fm = ev(m, &buf);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    b
}

fn initial_step(spec: &IvpSpec, y0: &[f64], f0: &[f64]) -> f64 {
    let n = y0.len();
    let sk: Vec<f64> = y0.iter().map(|y| spec.abs_tol + spec.rel_tol * y.abs()).collect();
    let dnf = (0..n).map(|i| (f0[i] / sk[i]).powi(2)).sum::<f64>() / n as f64;
    let dny = (0..n).map(|i| (y0[i] / sk[i]).powi(2)).sum::<f64>() / n as f64;
    let span = (spec.t_end - spec.t0).abs();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    h = h.min(spec.max_step).min(span);
    let dir = (spec.t_end - spec.t0).signum();
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h * dir * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    (spec.rhs)(spec.t0 + h * dir, &y1, &mut f1);
    if !all_finite(&f1) {
        return (h * 1e-3).max(1e-14 * span);
    }
    let der2 = ((0..n).map(|i| ((f1[i] - f0[i]) / sk[i]).powi(2)).sum::<f64>() / n as f64)
        .sqrt()
        / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    (100.0 * h).min(h1).min(spec.max_step).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let spec = IvpSpec::new(|_, y, d| d[0] = -y[0], 0.0, vec![1.0], 1.0);
        let tr = integrate(&spec).unwrap();
        assert_eq!(tr.termination, Termination::ReachedEnd);
        assert!((tr.y_last()[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn backward_direction() {
        let spec = IvpSpec::new(|_, y, d| d[0] = y[0], 0.0, vec![1.0], -2.0);
        let tr = integrate(&spec).unwrap();
        assert!((tr.y_last()[0] - (-2.0f64).exp()).abs() < 1e-9);
        assert!(tr.t.windows(2).all(|w| w[1] < w[0]));
        let mid = tr.dense_eval(-1.3).unwrap()[0];
        assert!((mid - (-1.3f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn nodes_reproduced_by_dense_output() {
        let spec = IvpSpec::new(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            0.0,
            vec![1.0, 0.0],
            5.0,
        );
        let tr = integrate(&spec).unwrap();
        for (t, y) in tr.t.iter().zip(&tr.y) {
            assert_eq!(&tr.dense_eval(*t).unwrap(), y);
        }
    }

    #[test]
    fn out_of_span_rejected() {
        let spec = IvpSpec::new(|_, _, d| d[0] = 1.0, 0.0, vec![0.0], 1.0);
        let tr = integrate(&spec).unwrap();
        assert!(matches!(tr.dense_eval(1.5), Err(Error::OutOfSpan { .. })));
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = IvpSpec::new(|_, _, d| d[0] = 1.0, 0.0, vec![0.0], 0.0);
        assert!(integrate(&spec).is_err());
        let spec = IvpSpec::new(|_, _, d| d[0] = f64::NAN, 0.0, vec![0.0], 1.0);
        assert!(integrate(&spec).is_err());
    }

    #[test]
    fn overflow_detected() {
        let spec = IvpSpec::new(|_, y, d| d[0] = y[0] * y[0], 0.0, vec![1.0], 2.0);
        let tr = integrate(&spec).unwrap();
        assert!(matches!(tr.termination, Termination::StateOverflow { .. }));
        assert!(tr.t_last() < 1.0);
    }

    #[test]
    fn step_failure_at_singularity() {
        // y' = -1/(2y), y(0) = 1: y = sqrt(1 - t) has a square-root singularity at t = 1
        let spec = IvpSpec::new(|_, y, d| d[0] = -0.5 / y[0], 0.0, vec![1.0], 2.0).overflow(1e300);
        let tr = integrate(&spec).unwrap();
        match tr.termination {
            Termination::StepFailure { t } => assert!((t - 1.0).abs() < 1e-3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
