use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::compiled::Flow;
use crate::error::{Result, VslqError};

/// Stage times are kept this far inside each segment so envelopes with steps
/// at the segment edges are sampled on the correct side.
const EDGE_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fixed-step RK4.
    Rk4Fixed,
    /// Dormand–Prince 5(4) with step-size control.
    Rk45Adaptive,
    /// Fixed-step RK4 in the interaction picture of the static diagonal
    /// Hamiltonian (integrating-factor / Lawson RK4).
    Rk4Interaction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step (fixed methods) or initial step (adaptive), ns.
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Expectation sampling stride, ns.
    pub sample_every: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { method: Method::Rk4Interaction, dt: 0.25, rtol: 1e-9, atol: 1e-11, sample_every: 1.0 }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        Self { method: Method::Rk4Fixed, dt, ..Self::default() }
    }

    pub fn interaction(dt: f64) -> Self {
        Self { method: Method::Rk4Interaction, dt, ..Self::default() }
    }

    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        Self { method: Method::Rk45Adaptive, dt: 0.05, rtol, atol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(VslqError::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.sample_every > 0.0) {
            return Err(VslqError::InvalidParameter("sample_every must be positive".into()));
        }
        if self.method == Method::Rk45Adaptive && !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(VslqError::InvalidParameter("adaptive tolerances must be positive".into()));
        }
        Ok(())
    }
}

fn axpy(y: &mut [C64], a: f64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn combine(out: &mut [C64], base: &[C64], a: f64, x: &[C64]) {
    for ((o, b), xi) in out.iter_mut().zip(base).zip(x) {
        *o = b + a * xi;
    }
}

/// Integrates `flow` from `t0` to `t1`, splitting at envelope breakpoints and
/// at every `sample` time, where `observe(t, x)` is called (also at `t0`).
pub fn integrate<F: Flow>(
    flow: &mut F,
    x: &mut [C64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    samples: &[f64],
    mut observe: impl FnMut(f64, &[C64]) -> Result<()>,
) -> Result<()> {
    cfg.validate()?;
    if !(t1 >= t0) {
        return Err(VslqError::InvalidParameter(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    if cfg.method != Method::Rk4Interaction && flow.has_linear() {
        return Err(VslqError::InvalidParameter(format!("{:?} cannot integrate a split linear part", cfg.method)));
    }
    let mut edges = vec![t0];
    edges.extend(flow.breakpoints(t0, t1));
    let sample_set: Vec<f64> = samples.iter().copied().filter(|&s| s > t0 && s < t1).collect();
    edges.extend(&sample_set);
    edges.push(t1);
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let is_sample = |t: f64| samples.iter().any(|&s| (s - t).abs() < 1e-9);
    if is_sample(t0) {
        observe(t0, x)?;
    }
    let mut work = Work::new(flow.len());
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        match cfg.method {
            Method::Rk45Adaptive => dopri_segment(flow, x, a, b, cfg, &mut work)?,
            Method::Rk4Fixed | Method::Rk4Interaction => {
                let steps = ((b - a) / cfg.dt - 1e-9).ceil().max(1.0) as usize;
                let h = (b - a) / steps as f64;
                for k in 0..steps {
                    let t = a + k as f64 * h;
                    let clamp = |s: f64| s.clamp(a + EDGE_GUARD.min(h / 4.0), b - EDGE_GUARD.min(h / 4.0));
                    if cfg.method == Method::Rk4Interaction && flow.has_linear() {
                        lawson_step(flow, x, t, h, clamp, &mut work);
                    } else {
                        rk4_step(flow, x, t, h, clamp, &mut work);
                    }
                    flow.finish_step(x);
                }
            }
        }
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(VslqError::IntegrationDiverged { time: b, reason: "non-finite state".into() });
        }
        if is_sample(b) {
            observe(b, x)?;
        }
    }
    Ok(())
}

struct Work {
    k: Vec<C64>,
    acc: Vec<C64>,
    y: Vec<C64>,
    extra: Vec<Vec<C64>>,
}

impl Work {
    fn new(len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        Self { k: z.clone(), acc: z.clone(), y: z, extra: Vec::new() }
    }
}

fn rk4_step<F: Flow>(flow: &mut F, x: &mut [C64], t: f64, h: f64, clamp: impl Fn(f64) -> f64, w: &mut Work) {
    let Work { k, acc, y, .. } = w;
    flow.rhs(clamp(t), x, k);
    combine(acc, x, h / 6.0, k);
    combine(y, x, h / 2.0, k);
    flow.rhs(clamp(t + h / 2.0), y, k);
    axpy(acc, h / 3.0, k);
    combine(y, x, h / 2.0, k);
    flow.rhs(clamp(t + h / 2.0), y, k);
    axpy(acc, h / 3.0, k);
    combine(y, x, h, k);
    flow.rhs(clamp(t + h), y, k);
    combine(x, acc, h / 6.0, k);
}

/// Lawson RK4: classical RK4 on `v = e^{−A(t−t_n)} x`, written in terms of
/// the untransformed variables so only half-step propagators are needed.
fn lawson_step<F: Flow>(flow: &mut F, x: &mut [C64], t: f64, h: f64, clamp: impl Fn(f64) -> f64, w: &mut Work) {
    let Work { k, acc, y, .. } = w;
    let half = h / 2.0;
    flow.rhs(clamp(t), x, k);
    combine(acc, x, h / 6.0, k);
    combine(y, x, half, k);
    flow.propagate_linear(half, acc);
    flow.propagate_linear(half, y);
    flow.propagate_linear(half, x);
    flow.rhs(clamp(t + half), y, k);
    axpy(acc, h / 3.0, k);
    combine(y, x, half, k);
    flow.rhs(clamp(t + half), y, k);
    axpy(acc, h / 3.0, k);
    combine(y, x, h, k);
    flow.propagate_linear(half, y);
    flow.rhs(clamp(t + h), y, k);
    flow.propagate_linear(half, acc);
    combine(x, acc, h / 6.0, k);
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dopri_segment<F: Flow>(flow: &mut F, x: &mut [C64], a: f64, b: f64, cfg: &IntegratorConfig, w: &mut Work) -> Result<()> {
    let len = x.len();
    if w.extra.len() < 7 {
        w.extra = (0..7).map(|_| vec![C64::new(0.0, 0.0); len]).collect();
    }
    let mut t = a;
    let mut h = cfg.dt.min(b - a);
    let mut guard = 0usize;
    while t < b - 1e-12 {
        guard += 1;
        if guard > 10_000_000 {
            return Err(VslqError::IntegrationDiverged { time: t, reason: "adaptive step limit reached".into() });
        }
        h = h.min(b - t);
        let clamp = |s: f64| s.clamp(a + EDGE_GUARD.min(h / 4.0), b - EDGE_GUARD.min(h / 4.0));
        let ks = &mut w.extra;
        for s in 0..7 {
            w.y.copy_from_slice(x);
            for (j, kj) in ks.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    axpy(&mut w.y, h * A[s][j], kj);
                }
            }
            flow.rhs(clamp(t + C[s] * h), &w.y, &mut w.k);
            ks[s].copy_from_slice(&w.k);
        }
        // ks[6] was evaluated at the fifth-order solution, held in w.y.
        let mut err: f64 = 0.0;
        for i in 0..len {
            let e: C64 = (0..7).map(|s| E[s] * ks[s][i]).sum::<C64>() * h;
            let scale = cfg.atol + cfg.rtol * x[i].norm().max(w.y[i].norm());
            err = err.max(e.norm() / scale);
        }
        if !err.is_finite() {
            return Err(VslqError::IntegrationDiverged { time: t, reason: "non-finite error estimate".into() });
        }
        if err <= 1.0 {
            t += h;
            x.copy_from_slice(&w.y);
            flow.finish_step(x);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-12 {
            return Err(VslqError::IntegrationDiverged { time: t, reason: "step size underflow".into() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar oscillator `ẋ = −iωx + f(t)` with `ω` in the linear part.
    struct Scalar {
        omega: f64,
        forcing: f64,
        split: bool,
    }

    impl Flow for Scalar {
        fn len(&self) -> usize {
            1
        }
        fn rhs(&mut self, _t: f64, x: &[C64], out: &mut [C64]) {
            let w = if self.split { 0.3 } else { 0.3 + self.omega };
            out[0] = C64::new(0.0, -w) * x[0] + self.forcing;
        }
        fn has_linear(&self) -> bool {
            self.split
        }
        fn propagate_linear(&self, h: f64, x: &mut [C64]) {
            x[0] *= C64::new(0.0, -self.omega * h).exp();
        }
        fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
            Vec::new()
        }
    }

    #[test]
    fn lawson_is_exact_for_pure_linear_part() {
        // One Lawson step multiplies by e^{−iωh}·R(−0.3ih), R the RK4 stability polynomial.
        let run = |omega: f64| {
            let mut f = Scalar { omega, forcing: 0.0, split: true };
            let mut x = vec![C64::new(1.0, 0.0)];
            integrate(&mut f, &mut x, 0.0, 10.0, &IntegratorConfig::interaction(0.5), &[], |_, _| Ok(())).unwrap();
            x[0]
        };
        let z = C64::new(0.0, -0.3 * 0.5);
        let r = C64::new(1.0, 0.0) + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
        for omega in [0.0, 50.0] {
            let expected = C64::new(0.0, -omega * 10.0).exp() * r.powu(20);
            assert!((run(omega) - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn methods_agree_with_forced_solution() {
        // ẋ = −i(ω + 0.3)x + F, x(0) = 0 → x = F(1 − e^{−iΩt})/(iΩ).
        let (omega, forcing) = (2.0, 0.7);
        let big = omega + 0.3;
        let exact = forcing * (C64::new(1.0, 0.0) - C64::new(0.0, -big * 3.0).exp()) / C64::new(0.0, big);
        for cfg in [IntegratorConfig::interaction(0.01), IntegratorConfig::adaptive(1e-10, 1e-12)] {
            let split = cfg.method == Method::Rk4Interaction;
            let mut f = Scalar { omega, forcing, split };
            let mut x = vec![C64::new(0.0, 0.0)];
            integrate(&mut f, &mut x, 0.0, 3.0, &cfg, &[], |_, _| Ok(())).unwrap();
            assert!((x[0] - exact).norm() < 1e-8, "{:?}: {} vs {}", cfg.method, x[0], exact);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut f = Scalar { omega: 1.0, forcing: 0.0, split: true };
        let mut x = vec![C64::new(1.0, 0.0)];
        assert!(integrate(&mut f, &mut x, 0.0, 1.0, &IntegratorConfig::rk4(0.1), &[], |_, _| Ok(())).is_err());
        assert!(integrate(&mut f, &mut x, 0.0, 1.0, &IntegratorConfig::rk4(0.0), &[], |_, _| Ok(())).is_err());
        assert!(integrate(&mut f, &mut x, 1.0, 0.0, &IntegratorConfig::rk4(0.1), &[], |_, _| Ok(())).is_err());
    }
}
