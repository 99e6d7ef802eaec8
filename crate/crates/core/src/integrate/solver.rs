//! Adaptive DOP853 stepper for autonomous systems with fixed dimension.

use super::tableau::{A, B, D, E3, E5, STAGES, STAGES_EXTENDED};

/// Autonomous ODE y' = f(y) of fixed dimension.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, y: &[f64; N]) -> [f64; N];

    /// Inspect an accepted state; returning a status stops integration.
    fn check(&self, _y: &[f64; N]) -> Option<Status> {
        None
    }

    /// Pull an accepted state back onto an invariant manifold; returns
    /// whether the state changed.
    fn project(&self, _y: &mut [f64; N]) -> bool {
        false
    }
}

/// Why an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed,
    /// Step size fell below the floating-point resolution of t.
    StepUnderflow,
    /// The trajectory reached r ≤ 0.
    Collision,
    MaxSteps,
    NonFinite,
    /// An observer asked to stop early.
    Stopped,
}

impl Status {
    pub fn is_failure(self) -> bool {
        !matches!(self, Status::Completed | Status::Stopped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

/// Seventh-order continuous extension over one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t_old: f64,
    pub h: f64,
    y_old: [f64; N],
    coeffs: [[f64; N]; 7],
}

impl<const N: usize> DenseStep<N> {
    pub fn t_new(&self) -> f64 {
        self.t_old + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let x = (t - self.t_old) / self.h;
        let mut y = [0.0; N];
        for (i, c) in self.coeffs.iter().rev().enumerate() {
            let w = if i % 2 == 0 { x } else { 1.0 - x };
            for j in 0..N {
                y[j] = (y[j] + c[j]) * w;
            }
        }
        for j in 0..N {
            y[j] += self.y_old[j];
        }
        y
    }
}

#[inline]
fn rms_norm<const N: usize>(v: &[f64; N], scale: &[f64; N]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(a, b)| (a / b) * (a / b)).sum();
    (s / N as f64).sqrt()
}

/// Adaptive stepper. Integrates forward in its own time variable; callers
/// reverse the field for backward integration.
pub struct Stepper<'a, S, const N: usize> {
    sys: &'a S,
    ctl: StepControl,
    pub t: f64,
    pub y: [f64; N],
    f: [f64; N],
    h_abs: f64,
    t_old: f64,
    y_old: [f64; N],
    h_prev: f64,
    k: [[f64; N]; STAGES_EXTENDED],
    dense_ready: bool,
    pub steps: usize,
    pub evaluations: usize,
}

impl<'a, S: OdeSystem<N>, const N: usize> Stepper<'a, S, N> {
    pub fn new(sys: &'a S, t0: f64, y0: [f64; N], ctl: StepControl, horizon: f64) -> Self {
        let f = sys.rhs(&y0);
        let mut st = Self {
            sys,
            ctl,
            t: t0,
            y: y0,
            f,
            h_abs: 0.0,
            t_old: t0,
            y_old: y0,
            h_prev: 0.0,
            k: [[0.0; N]; STAGES_EXTENDED],
            dense_ready: false,
            steps: 0,
            evaluations: 1,
        };
        st.h_abs = st.initial_step(horizon);
        st
    }

    fn initial_step(&mut self, horizon: f64) -> f64 {
        if horizon <= 0.0 {
            return 0.0;
        }
        let (rtol, atol) = (self.ctl.rel_tol, self.ctl.abs_tol);
        let mut scale = [0.0; N];
        for j in 0..N {
            scale[j] = atol + self.y[j].abs() * rtol;
        }
        let d0 = rms_norm(&self.y, &scale);
        let d1 = rms_norm(&self.f, &scale);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(horizon);
        let mut y1 = self.y;
        for j in 0..N {
            y1[j] += h0 * self.f[j];
        }
        let f1 = self.sys.rhs(&y1);
        self.evaluations += 1;
        let mut diff = [0.0; N];
        for j in 0..N {
            diff[j] = f1[j] - self.f[j];
        }
        let d2 = rms_norm(&diff, &scale) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(horizon).min(self.ctl.max_step)
    }

    fn stage_input(&self, s: usize, h: f64) -> [f64; N] {
        let mut y = self.y_old;
        for (i, a) in A[s][..s].iter().enumerate() {
            if *a != 0.0 {
                for j in 0..N {
                    y[j] += h * a * self.k[i][j];
                }
            }
        }
        y
    }

    /// Take one accepted step, not passing `t_bound`.
    pub fn step(&mut self, t_bound: f64) -> Result<(), Status> {
        if self.steps >= self.ctl.max_steps {
            return Err(Status::MaxSteps);
        }
        let min_step = 10.0 * (next_up(self.t) - self.t);
        let mut h_abs = self.h_abs.min(self.ctl.max_step).max(min_step);
        let mut rejected = false;
        self.y_old = self.y;
        self.t_old = self.t;
        loop {
            if h_abs < min_step {
                return Err(Status::StepUnderflow);
            }
            let mut t_new = self.t_old + h_abs;
            if t_new > t_bound {
                t_new = t_bound;
            }
            let h = t_new - self.t_old;
            h_abs = h;

            self.k[0] = self.f;
            for s in 1..STAGES {
                let ys = self.stage_input(s, h);
                self.k[s] = self.sys.rhs(&ys);
            }
            let mut y_new = self.y_old;
            for (i, b) in B.iter().enumerate() {
                if *b != 0.0 {
                    for j in 0..N {
                        y_new[j] += h * b * self.k[i][j];
                    }
                }
            }
            let f_new = self.sys.rhs(&y_new);
            self.k[STAGES] = f_new;
            self.evaluations += STAGES;

            let mut scale = [0.0; N];
            let mut err5 = [0.0; N];
            let mut err3 = [0.0; N];
            for j in 0..N {
                scale[j] = self.ctl.abs_tol + self.y_old[j].abs().max(y_new[j].abs()) * self.ctl.rel_tol;
                for i in 0..=STAGES {
                    err5[j] += E5[i] * self.k[i][j];
                    err3[j] += E3[i] * self.k[i][j];
                }
            }
            let e5: f64 = (0..N).map(|j| (err5[j] / scale[j]).powi(2)).sum();
            let e3: f64 = (0..N).map(|j| (err3[j] / scale[j]).powi(2)).sum();
            let error_norm = if e5 == 0.0 && e3 == 0.0 {
                0.0
            } else {
                h * e5 / ((e5 + 0.01 * e3) * N as f64).sqrt()
            };

            if !error_norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                h_abs *= MIN_FACTOR;
                rejected = true;
                continue;
            }
            if error_norm < 1.0 {
                let mut factor = if error_norm == 0.0 {
                    MAX_FACTOR
                } else {
                    MAX_FACTOR.min(SAFETY * error_norm.powf(ERROR_EXPONENT))
                };
                if rejected {
                    factor = factor.min(1.0);
                }
                self.h_abs = h_abs * factor;
                self.h_prev = h;
                let mut y_new = y_new;
                let mut f_new = f_new;
                if self.sys.project(&mut y_new) {
                    f_new = self.sys.rhs(&y_new);
                    self.evaluations += 1;
                }
                self.t = t_new;
                self.y = y_new;
                self.f = f_new;
                self.steps += 1;
                self.dense_ready = false;
                return Ok(());
            }
            h_abs *= MIN_FACTOR.max(SAFETY * error_norm.powf(ERROR_EXPONENT));
            rejected = true;
        }
    }

    /// Continuous extension of the last accepted step.
    pub fn dense(&mut self) -> DenseStep<N> {
        let h = self.h_prev;
        if !self.dense_ready {
            for s in (STAGES + 1)..STAGES_EXTENDED {
                let ys = self.stage_input(s, h);
                self.k[s] = self.sys.rhs(&ys);
            }
            self.evaluations += STAGES_EXTENDED - STAGES - 1;
            self.dense_ready = true;
        }
        let mut coeffs = [[0.0; N]; 7];
        for j in 0..N {
            let dy = self.y[j] - self.y_old[j];
            coeffs[0][j] = dy;
            coeffs[1][j] = h * self.k[0][j] - dy;
            coeffs[2][j] = 2.0 * dy - h * (self.f[j] + self.k[0][j]);
            for (row, d) in D.iter().enumerate() {
                let mut acc = 0.0;
                for (i, di) in d.iter().enumerate() {
                    acc += di * self.k[i][j];
                }
                coeffs[3 + row][j] = h * acc;
            }
        }
        DenseStep { t_old: self.t_old, h, y_old: self.y_old, coeffs }
    }

    pub fn derivative(&self) -> [f64; N] {
        self.f
    }

    pub fn previous(&self) -> (f64, [f64; N]) {
        (self.t_old, self.y_old)
    }
}

fn next_up(t: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        f64::from_bits(1)
    } else {
        f64::from_bits(t.to_bits() + 1)
    }
}

/// Result of [`propagate`].
#[derive(Debug, Clone, Copy)]
pub struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub status: Status,
    pub steps: usize,
}

/// Integrate `sys` from `y0` over `[0, duration]`. The observer sees the
/// stepper after every accepted step and may stop integration by returning
/// `false`.
pub fn propagate<S, const N: usize>(
    sys: &S,
    y0: [f64; N],
    duration: f64,
    ctl: StepControl,
    mut observer: impl FnMut(&mut Stepper<'_, S, N>) -> bool,
) -> Outcome<N>
where
    S: OdeSystem<N>,
{
    let mut st = Stepper::new(sys, 0.0, y0, ctl, duration);
    if duration <= 0.0 {
        return Outcome { t: 0.0, y: y0, status: Status::Completed, steps: 0 };
    }
    let status = loop {
        if st.t >= duration {
            break Status::Completed;
        }
        if let Err(status) = st.step(duration) {
            break status;
        }
        if let Some(status) = sys.check(&st.y) {
            break status;
        }
        if !observer(&mut st) {
            break Status::Stopped;
        }
    };
    Outcome { t: st.t, y: st.y, status, steps: st.steps }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;

    impl OdeSystem<2> for Oscillator {
        fn rhs(&self, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -y[0]]
        }
    }

    fn ctl(tol: f64) -> StepControl {
        StepControl { rel_tol: tol, abs_tol: tol, max_step: f64::INFINITY, max_steps: 100_000 }
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let out = propagate(&Oscillator, [1.0, 0.0], 10.0, ctl(1e-12), |_| true);
        assert_eq!(out.status, Status::Completed);
        assert!((out.y[0] - 10f64.cos()).abs() < 1e-10);
        assert!((out.y[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_interior_points() {
        let mut worst: f64 = 0.0;
        propagate(&Oscillator, [1.0, 0.0], 6.0, ctl(1e-10), |st| {
            let d = st.dense();
            for k in 1..8 {
                let t = d.t_old + d.h * k as f64 / 8.0;
                let y = d.eval(t);
                worst = worst.max((y[0] - t.cos()).abs());
            }
            true
        });
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn dense_output_matches_endpoints() {
        propagate(&Oscillator, [0.3, 0.9], 3.0, ctl(1e-9), |st| {
            let d = st.dense();
            let (t0, y0) = st.previous();
            let a = d.eval(t0);
            let b = d.eval(st.t);
            assert!((a[0] - y0[0]).abs() < 1e-14 && (b[0] - st.y[0]).abs() < 1e-14);
            true
        });
    }

    #[test]
    fn zero_duration_is_identity() {
        let out = propagate(&Oscillator, [0.4, 0.1], 0.0, ctl(1e-9), |_| true);
        assert_eq!(out.y, [0.4, 0.1]);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn blow_up_reports_failure() {
        struct Blow;
        impl OdeSystem<1> for Blow {
            fn rhs(&self, y: &[f64; 1]) -> [f64; 1] {
                [y[0] * y[0]]
            }
        }
        let out = propagate(&Blow, [1.0], 2.0, ctl(1e-10), |_| true);
        assert!(out.status.is_failure(), "{:?}", out.status);
    }
}
