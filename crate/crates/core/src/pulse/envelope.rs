use serde::{Deserialize, Serialize};

use crate::error::{Result, VslqError};

/// Scalar time profile. Times are in ns; amplitudes are in MHz for drives and
/// 1/µs for collapse rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Constant {
        amplitude: f64,
    },
    /// Gaussian truncated to `[start, end]` with the straight line through its
    /// edge values subtracted, so it vanishes continuously at both edges.
    /// `amplitude` is the peak of the subtracted profile.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
        start: f64,
        end: f64,
    },
    /// `amplitude · ¼(1 + tanh((t − rise)/steepness))(1 − tanh((t − fall)/steepness))`.
    TanhWindow {
        amplitude: f64,
        rise: f64,
        fall: f64,
        steepness: f64,
    },
    /// `amplitude · 4x(1 − x)` with `x = (t − start)/(end − start)`, zero outside.
    QuadraticArch {
        amplitude: f64,
        start: f64,
        end: f64,
    },
    /// Linear interpolation over uniform samples starting at `t0`; held
    /// constant beyond either end.
    Piecewise {
        t0: f64,
        dt: f64,
        samples: Vec<f64>,
    },
    /// Piecewise-constant: `values[k]` on `[times[k-1], times[k])`, with
    /// `values.len() == times.len() + 1`.
    Steps {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    /// `inner` repeated with the given period, `count` times starting at 0.
    Periodic {
        period: f64,
        count: usize,
        inner: Box<Envelope>,
    },
    Scaled {
        factor: f64,
        inner: Box<Envelope>,
    },
    Sum {
        terms: Vec<Envelope>,
    },
}

fn gauss(t: f64, center: f64, width: f64) -> f64 {
    (-(t - center).powi(2) / (2.0 * width * width)).exp()
}

impl Envelope {
    pub fn constant(amplitude: f64) -> Self {
        Envelope::Constant { amplitude }
    }

    pub fn zero() -> Self {
        Envelope::constant(0.0)
    }

    pub fn scaled(self, factor: f64) -> Self {
        match self {
            Envelope::Scaled { factor: f, inner } => Envelope::Scaled { factor: f * factor, inner },
            other => Envelope::Scaled { factor, inner: Box::new(other) },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VslqError::InvalidParameter(m));
        match self {
            Envelope::Gaussian { width, start, end, center, .. } => {
                if !(*width > 0.0) || !(end > start) || !(center > start && center < end) {
                    return bad(format!("gaussian needs width > 0 and start < center < end, got {self:?}"));
                }
            }
            Envelope::TanhWindow { rise, fall, steepness, .. } => {
                if !(*steepness > 0.0) || !(fall > rise) {
                    return bad("tanh window needs steepness > 0 and rise < fall".into());
                }
            }
            Envelope::QuadraticArch { start, end, .. } => {
                if !(end > start) {
                    return bad("quadratic arch needs start < end".into());
                }
            }
            Envelope::Piecewise { dt, samples, .. } => {
                if !(*dt > 0.0) || samples.is_empty() {
                    return bad("piecewise envelope needs dt > 0 and samples".into());
                }
            }
            Envelope::Steps { times, values } => {
                if values.len() != times.len() + 1 || times.windows(2).any(|w| w[1] < w[0]) {
                    return bad("steps need sorted times and one more value than times".into());
                }
            }
            Envelope::Periodic { period, inner, .. } => {
                if !(*period > 0.0) {
                    return bad("period must be positive".into());
                }
                inner.validate()?;
            }
            Envelope::Scaled { inner, .. } => inner.validate()?,
            Envelope::Sum { terms } => terms.iter().try_for_each(Envelope::validate)?,
            Envelope::Constant { .. } => {}
        }
        if self.params_finite() {
            Ok(())
        } else {
            bad("envelope parameters must be finite".into())
        }
    }

    fn params_finite(&self) -> bool {
        match self {
            Envelope::Constant { amplitude } => amplitude.is_finite(),
            Envelope::Gaussian { amplitude, center, width, start, end } => {
                [amplitude, center, width, start, end].iter().all(|v| v.is_finite())
            }
            Envelope::TanhWindow { amplitude, rise, fall, steepness } => {
                [amplitude, rise, fall, steepness].iter().all(|v| v.is_finite())
            }
            Envelope::QuadraticArch { amplitude, start, end } => [amplitude, start, end].iter().all(|v| v.is_finite()),
            Envelope::Piecewise { t0, dt, samples } => {
                t0.is_finite() && dt.is_finite() && samples.iter().all(|v| v.is_finite())
            }
            Envelope::Steps { times, values } => times.iter().chain(values).all(|v| v.is_finite()),
            Envelope::Periodic { inner, .. } => inner.params_finite(),
            Envelope::Scaled { factor, inner } => factor.is_finite() && inner.params_finite(),
            Envelope::Sum { terms } => terms.iter().all(Envelope::params_finite),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { amplitude } => *amplitude,
            Envelope::Gaussian { amplitude, center, width, start, end } => {
                if t < *start || t > *end {
                    return 0.0;
                }
                let (g0, g1) = (gauss(*start, *center, *width), gauss(*end, *center, *width));
                let line = |s: f64| g0 + (g1 - g0) * (s - start) / (end - start);
                amplitude * (gauss(t, *center, *width) - line(t)) / (1.0 - line(*center))
            }
            Envelope::TanhWindow { amplitude, rise, fall, steepness } => {
                amplitude * 0.25 * (1.0 + ((t - rise) / steepness).tanh()) * (1.0 - ((t - fall) / steepness).tanh())
            }
            Envelope::QuadraticArch { amplitude, start, end } => {
                if t < *start || t > *end {
                    return 0.0;
                }
                let x = (t - start) / (end - start);
                amplitude * 4.0 * x * (1.0 - x)
            }
            Envelope::Piecewise { t0, dt, samples } => {
                let u = (t - t0) / dt;
                if u <= 0.0 {
                    return samples[0];
                }
                let k = u.floor() as usize;
                if k + 1 >= samples.len() {
                    return *samples.last().unwrap();
                }
                let frac = u - k as f64;
                samples[k] * (1.0 - frac) + samples[k + 1] * frac
            }
            Envelope::Steps { times, values } => values[times.partition_point(|&s| s <= t)],
            Envelope::Periodic { period, count, inner } => {
                if t < 0.0 {
                    return 0.0;
                }
                let k = (t / period).floor();
                if k as usize >= *count {
                    // The closing edge of the last period belongs to it.
                    if *count > 0 && t <= period * *count as f64 {
                        return inner.eval(*period);
                    }
                    return 0.0;
                }
                inner.eval(t - k * period)
            }
            Envelope::Scaled { factor, inner } => factor * inner.eval(t),
            Envelope::Sum { terms } => terms.iter().map(|e| e.eval(t)).sum(),
        }
    }

    /// Points in `(lo, hi)` where the envelope or its derivative jumps.
    /// Integrators split their steps there.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breakpoints(lo, hi, &mut out);
        out.retain(|&b| b > lo && b < hi);
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        out
    }

    fn collect_breakpoints(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        match self {
            Envelope::Gaussian { start, end, .. } | Envelope::QuadraticArch { start, end, .. } => {
                out.extend([*start, *end]);
            }
            Envelope::Steps { times, .. } => out.extend(times.iter().copied()),
            Envelope::Periodic { period, count, inner } => {
                let first = ((lo / period).floor().max(0.0)) as usize;
                let last = ((hi / period).ceil().max(0.0) as usize).min(*count);
                for k in first..last {
                    let shift = k as f64 * period;
                    let mut local = Vec::new();
                    inner.collect_breakpoints(lo - shift, hi - shift, &mut local);
                    out.extend(local.into_iter().filter(|&b| (0.0..*period).contains(&b)).map(|b| b + shift));
                    out.push(shift);
                }
                out.push(*count as f64 * period);
            }
            Envelope::Scaled { inner, .. } => inner.collect_breakpoints(lo, hi, out),
            Envelope::Sum { terms } => terms.iter().for_each(|e| e.collect_breakpoints(lo, hi, out)),
            // Piecewise is continuous; its sample kinks are left to the step size.
            Envelope::Constant { .. } | Envelope::TanhWindow { .. } | Envelope::Piecewise { .. } => {}
        }
    }

    /// `∫_a^b e(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        integrate(|t| self.eval(t), a, b, &self.breakpoints(a, b))
    }

    /// `∫_a^b e(t)² dt`.
    pub fn integral_of_square(&self, a: f64, b: f64) -> f64 {
        integrate(|t| self.eval(t).powi(2), a, b, &self.breakpoints(a, b))
    }

    /// Largest `|e(t)|` on a fine grid over `[a, b]`.
    pub fn peak(&self, a: f64, b: f64) -> f64 {
        let n = 4000;
        (0..=n).map(|k| self.eval(a + (b - a) * k as f64 / n as f64).abs()).fold(0.0, f64::max)
    }
}

const GL_NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            GL_NODES.iter().zip(&GL_WEIGHTS).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// Composite 5-point Gauss–Legendre between breakpoints, refined until the
/// estimate stops changing.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges
        .windows(2)
        .map(|w| {
            let mut pieces = 16;
            let mut prev = gauss_legendre(&f, w[0], w[1], pieces);
            loop {
                pieces *= 2;
                let next = gauss_legendre(&f, w[0], w[1], pieces);
                if (next - prev).abs() <= 1e-14 * next.abs().max(1e-300) || pieces >= 1 << 14 {
                    return next;
                }
                prev = next;
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ec_like() -> Envelope {
        Envelope::Gaussian { amplitude: 2.0, center: 35.0, width: 15.0, start: 0.0, end: 70.0 }
    }

    #[test]
    fn gaussian_vanishes_at_edges_and_peaks_at_amplitude() {
        let g = ec_like();
        assert!(g.eval(0.0).abs() < 1e-15 && g.eval(70.0).abs() < 1e-14);
        assert!((g.eval(35.0) - 2.0).abs() < 1e-14);
        assert_eq!(g.eval(-1.0), 0.0);
        assert_eq!(g.eval(80.0), 0.0);
    }

    #[test]
    fn arch_integrals_match_closed_form() {
        let q = Envelope::QuadraticArch { amplitude: 3.0, start: 10.0, end: 210.0 };
        // ∫ 4x(1−x) = 2/3 and ∫ 16x²(1−x)² = 8/15 over the unit interval.
        assert!((q.integral(0.0, 300.0) - 3.0 * 200.0 * 2.0 / 3.0).abs() < 1e-9);
        assert!((q.integral_of_square(0.0, 300.0) - 9.0 * 200.0 * 8.0 / 15.0).abs() < 1e-9);
    }

    #[test]
    fn steps_and_breakpoints() {
        let s = Envelope::Steps { times: vec![70.0], values: vec![1.0, 25.0] };
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(s.eval(70.0), 25.0);
        let p = Envelope::Periodic { period: 100.0, count: 2, inner: Box::new(s) };
        assert_eq!(p.eval(90.0), 25.0);
        assert_eq!(p.eval(110.0), 1.0);
        assert_eq!(p.breakpoints(0.0, 200.0), vec![70.0, 100.0, 170.0]);
        assert!((p.integral(0.0, 200.0) - 2.0 * (70.0 + 25.0 * 30.0)).abs() < 1e-9);
    }

    #[test]
    fn piecewise_interpolates() {
        let p = Envelope::Piecewise { t0: 0.0, dt: 2.0, samples: vec![0.0, 2.0, 0.0] };
        assert!((p.eval(1.0) - 1.0).abs() < 1e-15);
        assert!((p.eval(3.0) - 1.0).abs() < 1e-15);
        assert_eq!(p.eval(10.0), 0.0);
    }

    #[test]
    fn serde_round_trip() {
        let e = Envelope::Sum { terms: vec![ec_like(), Envelope::constant(1.0).scaled(2.0)] };
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<Envelope>(&text).unwrap(), e);
    }

    proptest! {
        #[test]
        fn quadrature_is_converged(amp in 0.1f64..10.0, center in 20.0f64..50.0, width in 3.0f64..20.0) {
            let g = Envelope::Gaussian { amplitude: amp, center, width, start: 0.0, end: 70.0 };
            let fine = g.integral(0.0, 70.0);
            let coarse = gauss_legendre(&|t| g.eval(t), 0.0, 70.0, 200);
            prop_assert!((fine - coarse).abs() < 1e-9);
        }

        #[test]
        fn scaling_is_linear(k in -5.0f64..5.0, t in 0.0f64..100.0) {
            let g = ec_like();
            prop_assert!((g.clone().scaled(k).eval(t) - k * g.eval(t)).abs() < 1e-12);
        }
    }
}
