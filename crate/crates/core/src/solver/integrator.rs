//! Adaptive explicit Runge–Kutta (Dormand–Prince 5(4)).

use crate::error::{Error, Result};

/// Error-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step; `f64::INFINITY` for none.
    pub max_step: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: f64::INFINITY,
        }
    }
}

impl Tolerance {
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
            max_step: self.max_step,
        }
    }
}

/// Step statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are A[6]; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand–Prince integrator for `y' = f(t, y)` with first-same-as-last reuse.
pub struct DormandPrince<F> {
    rhs: F,
    tol: Tolerance,
    k: [Vec<f64>; 7],
    scratch: Vec<f64>,
    step: Option<f64>,
    fsal_valid: bool,
    pub stats: Stats,
}

impl<F: FnMut(f64, &[f64], &mut [f64])> DormandPrince<F> {
    pub fn new(dim: usize, tol: Tolerance, rhs: F) -> Self {
        Self {
            rhs,
            tol,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            scratch: vec![0.0; dim],
            step: None,
            fsal_valid: false,
            stats: Stats::default(),
        }
    }

    fn initial_step(&mut self, t: f64, y: &[f64], span: f64) -> f64 {
        let scale = |v: f64| self.tol.atol + self.tol.rtol * v.abs();
        let d0 = rms(y.iter().map(|&v| v / scale(v)));
        let d1 = rms(y.iter().zip(&self.k[0]).map(|(&v, &f)| f / scale(v)));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span.abs());
        for (s, (&v, &f)) in self.scratch.iter_mut().zip(y.iter().zip(&self.k[0])) {
            *s = v + h0 * f;
        }
        (self.rhs)(t + h0, &self.scratch, &mut self.k[1]);
        self.stats.evaluations += 1;
        let d2 = rms(
            y.iter()
                .zip(self.k[1].iter().zip(&self.k[0]))
                .map(|(&v, (&f1, &f0))| (f1 - f0) / scale(v)),
        ) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.tol.max_step)
    }

    /// Advances `y` from `t0` to exactly `t1`.
    pub fn integrate(&mut self, t0: f64, t1: f64, y: &mut [f64]) -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        let mut t = t0;
        if !self.fsal_valid {
            (self.rhs)(t, y, &mut self.k[0]);
            self.stats.evaluations += 1;
            self.fsal_valid = true;
        }
        let mut h = match self.step {
            Some(h) => h,
            None => self.initial_step(t, y, t1 - t0),
        };
        let n = y.len();
        while t < t1 {
            h = h.min(self.tol.max_step);
            let last = t + h >= t1 || (t1 - t - h) < 1e-12 * t1.abs().max(1.0);
            let hh = if last { t1 - t } else { h };
            if hh < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepCollapse { time: t, step: hh });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (r, a) in A[s].iter().enumerate().take(s) {
                        acc += hh * a * self.k[r][i];
                    }
                    self.scratch[i] = acc;
                }
                let (_, tail) = self.k.split_at_mut(s);
                (self.rhs)(t + C[s] * hh, &self.scratch, &mut tail[0]);
                self.stats.evaluations += 1;
            }
            // scratch holds the fifth-order solution (stage 7 node)
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (r, w) in E.iter().enumerate() {
                    e += w * self.k[r][i];
                }
                let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(self.scratch[i].abs());
                let r = hh * e / sc;
                err += r * r;
            }
            let err = (err / n.max(1) as f64).sqrt();
            if err <= 1.0 {
                t = if last { t1 } else { t + hh };
                y.copy_from_slice(&self.scratch);
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || hh >= h {
                    h = hh * fac;
                }
            } else {
                self.stats.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = hh * fac;
            }
        }
        self.step = Some(h.min(self.tol.max_step));
        Ok(())
    }

    /// Forgets the cached derivative, e.g. after `y` was modified externally.
    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// Integrates `y' = f(t, y)` and records `y` at each of `times` (ascending,
/// starting at the initial time).
pub fn solve_at(
    rhs: impl FnMut(f64, &[f64], &mut [f64]),
    y0: &[f64],
    times: &[f64],
    tol: Tolerance,
) -> Result<Vec<Vec<f64>>> {
    let mut solver = DormandPrince::new(y0.len(), tol, rhs);
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(times.len());
    let mut t = times.first().copied().unwrap_or(0.0);
    for &tm in times {
        solver.integrate(t, tm, &mut y)?;
        t = tm;
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let out = solve_at(|_, y, d| d[0] = -y[0], &[1.0], &times, Tolerance::default()).unwrap();
        for (t, y) in times.iter().zip(&out) {
            assert!((y[0] - (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn harmonic_oscillator() {
        let times = [0.0, 10.0];
        let out = solve_at(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            &[1.0, 0.0],
            &times,
            Tolerance::default(),
        )
        .unwrap();
        assert!((out[1][0] - 10f64.cos()).abs() < 1e-7);
        assert!((out[1][1] + 10f64.sin()).abs() < 1e-7);
    }

    #[test]
    fn riccati_matches_closed_form() {
        // N' = -N²/2, N(0) = 1 → N = 2/(2+t)
        let times: Vec<f64> = (0..=5).map(|k| k as f64).collect();
        let out = solve_at(|_, y, d| d[0] = -0.5 * y[0] * y[0], &[1.0], &times, Tolerance::default()).unwrap();
        for (t, y) in times.iter().zip(&out) {
            assert!((y[0] - 2.0 / (2.0 + t)).abs() < 1e-8);
        }
    }
}
