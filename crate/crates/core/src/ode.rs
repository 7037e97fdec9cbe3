//! Scalar initial value problems: classical RK4 and Dormand–Prince 4(5).

use crate::error::{Error, Result};
use crate::grid::TimeSeries;
use crate::scalar::Real;

/// `y' = rhs(t, y)`, `y(t0) = y0`, integrated up to `t_end`.
#[derive(Clone, Copy, Debug)]
pub struct OdeProblem<T, F> {
    pub rhs: F,
    pub t0: T,
    pub t_end: T,
    pub y0: T,
}

impl<T: Real, F: Fn(T, T) -> T> OdeProblem<T, F> {
    pub fn new(rhs: F, t0: T, t_end: T, y0: T) -> Result<Self> {
        if !(t_end > t0) {
            return Err(Error::InvalidArgument("t_end must exceed t0".into()));
        }
        Ok(Self { rhs, t0, t_end, y0 })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptiveSettings<T> {
    pub rtol: T,
    pub atol: T,
    pub h_init: T,
    pub h_min: T,
    pub max_steps: usize,
}

impl<T: Real> AdaptiveSettings<T> {
    /// `rtol = 1e-6`, `atol = 1e-9`, initial step a hundredth of the span.
    pub fn for_span(t0: T, t_end: T) -> Self {
        let span = t_end - t0;
        Self {
            rtol: T::lit(1e-6),
            atol: T::lit(1e-9),
            h_init: span / T::lit(100.0),
            h_min: span * T::lit(1e-14),
            max_steps: 100_000,
        }
    }

    pub fn with_tolerances(mut self, rtol: T, atol: T) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    fn validate(&self) -> Result<()> {
        let ok = self.rtol >= T::lit(1e-14)
            && self.atol > T::zero()
            && self.h_min > T::zero()
            && self.h_min <= self.h_init
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid adaptive settings {self:?}")))
        }
    }
}

/// Fixed-step RK4 with `n_steps` uniform steps; returns `n_steps + 1` samples.
pub fn rk4_integrate<T: Real, F: Fn(T, T) -> T>(
    problem: &OdeProblem<T, F>,
    n_steps: usize,
) -> Result<TimeSeries<T>> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let f = &problem.rhs;
    let h = (problem.t_end - problem.t0) / T::from_usize(n_steps);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let sixth = T::lit(1.0 / 6.0);

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut y = problem.y0;
    times.push(problem.t0);
    values.push(y);
    for i in 0..n_steps {
        let t = problem.t0 + T::from_usize(i) * h;
        let k1 = f(t, y);
        let k2 = f(t + half * h, y + half * h * k1);
        let k3 = f(t + half * h, y + half * h * k2);
        let k4 = f(t + h, y + h * k3);
        y = y + h * sixth * (k1 + two * k2 + two * k3 + k4);
        if !(k1.is_finite() && k2.is_finite() && k3.is_finite() && k4.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite { context: "rk4_integrate", step: i + 1 });
        }
        times.push(if i + 1 == n_steps { problem.t_end } else { problem.t0 + T::from_usize(i + 1) * h });
        values.push(y);
    }
    Ok(TimeSeries { times, values })
}

/// One accepted adaptive step: its size, embedded error estimate and the
/// tolerance it was held to.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord<T> {
    pub t: T,
    pub h: T,
    pub err: T,
    pub tol: T,
}

// Dormand–Prince 5(4) tableau.
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
// Fifth-order weights equal the last row of A (FSAL); E = b5 − b4.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand–Prince integration. Samples are the accepted steps; the
/// last step is shortened to land on `t_end`.
pub fn dp45_integrate<T: Real, F: Fn(T, T) -> T>(
    problem: &OdeProblem<T, F>,
    settings: &AdaptiveSettings<T>,
) -> Result<TimeSeries<T>> {
    dp45_integrate_traced(problem, settings).map(|(s, _)| s)
}

/// As [`dp45_integrate`], also returning the accepted-step records.
pub fn dp45_integrate_traced<T: Real, F: Fn(T, T) -> T>(
    problem: &OdeProblem<T, F>,
    settings: &AdaptiveSettings<T>,
) -> Result<(TimeSeries<T>, Vec<StepRecord<T>>)> {
    settings.validate()?;
    let f = &problem.rhs;
    let c: [T; 7] = C.map(T::lit);
    let e: [T; 7] = E.map(T::lit);
    let a: [[T; 6]; 7] = A.map(|row| row.map(T::lit));
    let safety = T::lit(0.9);
    let (fac_min, fac_max) = (T::lit(0.2), T::lit(5.0));
    let fifth = T::lit(0.2);

    let mut t = problem.t0;
    let mut y = problem.y0;
    let mut h = settings.h_init.min(problem.t_end - problem.t0);
    let mut times = vec![t];
    let mut values = vec![y];
    let mut records = Vec::new();
    let mut k = [T::zero(); 7];
    k[0] = f(t, y);
    let mut steps = 0usize;

    while t < problem.t_end {
        if steps >= settings.max_steps {
            return Err(Error::MaxStepsExceeded { max_steps: settings.max_steps, t: t.to_f64().unwrap_or(f64::NAN) });
        }
        steps += 1;
        let remaining = problem.t_end - t;
        let last = h >= remaining;
        let h_step = if last { remaining } else { h };

        for s in 1..7 {
            let mut acc = T::zero();
            for j in 0..s {
                acc = acc + a[s][j] * k[j];
            }
            k[s] = f(t + c[s] * h_step, y + h_step * acc);
        }
        // k[6] was evaluated at the fifth-order solution
        let mut y_new = y;
        for j in 0..6 {
            y_new = y_new + h_step * a[6][j] * k[j];
        }
        let mut err = T::zero();
        for j in 0..7 {
            err = err + e[j] * k[j];
        }
        err = (h_step * err).abs();
        if !y_new.is_finite() || !err.is_finite() {
            return Err(Error::NonFinite { context: "dp45_integrate", step: steps });
        }
        let tol = settings.atol + settings.rtol * y.abs().max(y_new.abs());
        let fac = if err.is_zero() {
            fac_max
        } else {
            (safety * (tol / err).powf(fifth)).max(fac_min).min(fac_max)
        };

        if err <= tol {
            records.push(StepRecord { t, h: h_step, err, tol });
            t = if last { problem.t_end } else { t + h_step };
            y = y_new;
            times.push(t);
            values.push(y);
            k[0] = k[6];
            if !last {
                h = h_step * fac;
            }
        } else {
            h = h_step * fac;
            if h < settings.h_min {
                return Err(Error::StepUnderflow {
                    t: t.to_f64().unwrap_or(f64::NAN),
                    h: h.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok((TimeSeries { times, values }, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_problem() -> OdeProblem<f64, impl Fn(f64, f64) -> f64> {
        OdeProblem::new(|_t: f64, y: f64| y, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn rk4_constant_and_exponential() {
        let p = OdeProblem::new(|_t: f64, _y: f64| 0.0, 0.0, 3.0, 7.0).unwrap();
        let s = rk4_integrate(&p, 13).unwrap();
        assert_eq!(s.len(), 14);
        assert!(s.values.iter().all(|&v| v == 7.0));

        let s = rk4_integrate(&exp_problem(), 100).unwrap();
        assert_eq!(*s.times.last().unwrap(), 1.0);
        assert!((s.values[100] - std::f64::consts::E).abs() <= 1e-8);
        assert!(rk4_integrate(&exp_problem(), 0).is_err());
    }

    #[test]
    fn rk4_fourth_order() {
        let errs: Vec<f64> = [10usize, 20, 40, 80]
            .iter()
            .map(|&n| (rk4_integrate(&exp_problem(), n).unwrap().values[n] - std::f64::consts::E).abs())
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn rk4_reports_blowup() {
        let p = OdeProblem::new(|_t: f64, y: f64| y * y, 0.0, 2.0, 1.0).unwrap();
        assert!(matches!(rk4_integrate(&p, 1000), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn rk4_single_precision() {
        let p = OdeProblem::new(|_t: f32, y: f32| y, 0.0f32, 1.0, 1.0).unwrap();
        let s = rk4_integrate(&p, 50).unwrap();
        assert!((s.values[50] - std::f32::consts::E).abs() < 1e-5);
    }

    #[test]
    fn dp45_exponential_and_tolerance_record() {
        let settings = AdaptiveSettings::for_span(0.0, 1.0).with_tolerances(1e-8, 1e-8);
        let (s, rec) = dp45_integrate_traced(&exp_problem(), &settings).unwrap();
        let (t_last, y_last) = s.last().unwrap();
        assert_eq!(t_last, 1.0);
        assert!((y_last - std::f64::consts::E).abs() <= 1e-7);
        assert!(rec.iter().all(|r| r.err <= r.tol));
        assert_eq!(rec.len() + 1, s.len());
    }

    #[test]
    fn dp45_constant() {
        let p = OdeProblem::new(|_t: f64, _y: f64| 0.0, 0.0, 1.0, 3.0).unwrap();
        let s = dp45_integrate(&p, &AdaptiveSettings::for_span(0.0, 1.0)).unwrap();
        assert!(s.values.iter().all(|&v| v == 3.0));
        assert_eq!(s.last().unwrap().0, 1.0);
    }

    #[test]
    fn dp45_limits() {
        let p = exp_problem();
        let mut st = AdaptiveSettings::for_span(0.0, 1.0);
        st.max_steps = 3;
        assert!(matches!(dp45_integrate(&p, &st), Err(Error::MaxStepsExceeded { .. })));

        // finite-time blowup at t = 1 forces ever smaller steps
        let q = OdeProblem::new(|_t: f64, y: f64| y * y, 0.0, 2.0, 1.0).unwrap();
        let mut st = AdaptiveSettings::for_span(0.0, 2.0).with_tolerances(1e-10, 1e-10);
        st.h_min = 1e-6;
        let r = dp45_integrate(&q, &st);
        assert!(matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::NonFinite { .. })), "{r:?}");
    }
}
