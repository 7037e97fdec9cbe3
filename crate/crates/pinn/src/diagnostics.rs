//! Finite-difference audits of the hand-written derivatives, and random
//! small problems to run them on.

use inversa_core::logistic::LogisticParams;
use inversa_core::pme::barenblatt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::collocation::{CollocationSets, Domain, SetSizes};
use crate::loss::{loss_and_grad, Exponent, InverseUnknowns, LogisticDirectLoss, LogisticInverseLoss, PinnLoss, PmeLoss};
use crate::mlp::{Mlp, Need, OutputActivation, Tape};
use crate::Result;

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Fourth-order central difference of `f` at `x` with step `h`.
pub fn fd4(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn fd4_second(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
}

/// Per-coordinate comparison of an analytic gradient with finite differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCheck {
    pub n: usize,
    /// Coordinates with relative difference at most the tolerance.
    pub n_within: usize,
    pub max_rel: f64,
    /// Largest analytic magnitude among the coordinates outside tolerance.
    pub max_failing_abs: f64,
}

impl GradientCheck {
    /// At least `fraction` of coordinates agree and every disagreement sits
    /// where the gradient is below `tiny`.
    pub fn passes(&self, fraction: f64, tiny: f64) -> bool {
        self.n_within as f64 >= fraction * self.n as f64 && self.max_failing_abs < tiny
    }
}

/// Checks `loss_and_grad` against differences of the loss itself.
pub fn check_loss_gradient(loss: &dyn PinnLoss, net: &Mlp, params: &[f64], tol: f64) -> Result<GradientCheck> {
    let mut grad = vec![0.0; params.len()];
    loss_and_grad(loss, net, params, Some(&mut grad))?;
    let mut x = params.to_vec();
    let mut check = GradientCheck { n: params.len(), n_within: 0, max_rel: 0.0, max_failing_abs: 0.0 };
    for i in 0..params.len() {
        let x0 = params[i];
        let h = 1e-3 * x0.abs().max(1.0);
        let fd = fd4(
            |v| {
                x[i] = v;
                loss_and_grad(loss, net, &x, None).map(|l| l.total).unwrap_or(f64::NAN)
            },
            x0,
            h,
        );
        x[i] = x0;
        let rel = rel_diff(grad[i], fd);
        check.max_rel = check.max_rel.max(rel);
        if rel <= tol {
            check.n_within += 1;
        } else {
            check.max_failing_abs = check.max_failing_abs.max(grad[i].abs());
        }
    }
    Ok(check)
}

/// Largest relative difference between the forward jets (`u_t`, `u_x`,
/// `u_xx`) and finite differences of the network value; magnitudes below
/// `floor` are compared absolutely.
pub fn check_input_derivatives(net: &Mlp, points: &[[f64; 2]], floor: f64) -> f64 {
    let dim = net.input_dim();
    let need = if dim == 1 { Need::T } else { Need::T_XX };
    let mut tape = Tape::default();
    let h = 1e-3;
    let mut worst = 0.0f64;
    for p in points {
        let e = net.eval(&net.theta, &p[..dim], need, &mut tape);
        let along = |axis: usize| {
            move |v: f64| {
                let mut q = *p;
                q[axis] = v;
                net.value(&q[..dim])
            }
        };
        let mut pairs = vec![(e.ut, fd4(along(0), p[0], h))];
        if dim == 2 {
            pairs.push((e.ux, fd4(along(1), p[1], h)));
            pairs.push((e.uxx, fd4_second(along(1), p[1], h)));
        }
        for (a, f) in pairs {
            worst = worst.max((a - f).abs() / a.abs().max(f.abs()).max(floor));
        }
    }
    worst
}

/// Which loss a random problem exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    LogisticDirect,
    LogisticInverse,
    PmeDirect,
    PmeInverse,
}

impl LossKind {
    pub const ALL: [LossKind; 4] =
        [LossKind::LogisticDirect, LossKind::LogisticInverse, LossKind::PmeDirect, LossKind::PmeInverse];
}

/// A small random problem: loss, network and a parameter vector.
pub struct RandomProblem {
    pub loss: Box<dyn PinnLoss>,
    pub net: Mlp,
    pub params: Vec<f64>,
}

fn random_hidden(rng: &mut StdRng) -> Vec<usize> {
    (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(3..=8)).collect()
}

/// Builds a random instance of `kind`, reproducible from `seed`.
pub fn random_problem(kind: LossKind, seed: u64) -> Result<RandomProblem> {
    let mut rng = StdRng::seed_from_u64(seed);
    let hidden = random_hidden(&mut rng);
    let (input, loss): (usize, Box<dyn PinnLoss>) = match kind {
        LossKind::LogisticDirect | LossKind::LogisticInverse => {
            let k = rng.gen_range(1.0..100.0);
            let p = LogisticParams { r: rng.gen_range(0.05..1.0), k, p0: rng.gen_range(0.1..2.0) * k, t0: 0.0 };
            let scale = if rng.gen_bool(0.5) { 1.0 } else { k };
            let colloc: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..5.0)).collect();
            let loss: Box<dyn PinnLoss> = if kind == LossKind::LogisticDirect {
                Box::new(LogisticDirectLoss::new(p.r, p.k, p.p0, p.t0, &colloc, scale)?)
            } else {
                let unknowns = if rng.gen_bool(0.5) { InverseUnknowns::ROnly } else { InverseUnknowns::RAndK };
                let data: Vec<(f64, f64)> = (0..5)
                    .map(|_| {
                        let t = rng.gen_range(0.0..5.0);
                        (t, p.exact(t))
                    })
                    .collect();
                let r_init = rng.gen_range(0.1..1.0);
                let k_init = rng.gen_range(0.5..2.0) * k;
                Box::new(LogisticInverseLoss::new(
                    unknowns,
                    k_init,
                    r_init,
                    p.p0,
                    p.t0,
                    &colloc,
                    &data,
                    rng.gen_range(0.5..2.0),
                    scale,
                )?)
            };
            (1, loss)
        }
        LossKind::PmeDirect | LossKind::PmeInverse => {
            let domain = Domain::default();
            let delta = rng.gen_range(0.5..2.0);
            let exact = |t: f64, x: f64| barenblatt(t, x, delta);
            let sizes = SetSizes { n_int: 12, n_sb: 3, n_tb: 3 };
            let mut sets = CollocationSets::pme(domain, sizes, exact)?;
            let exponent = if kind == LossKind::PmeDirect {
                Exponent::Fixed { beta: rng.gen_range(2.0..4.0) }
            } else {
                sets = sets.with_grid_measurements(domain, 3, 3, exact)?;
                Exponent::Trainable { beta0: rng.gen_range(2.0..4.0) }
            };
            (2, Box::new(PmeLoss::new(exponent, &sets, rng.gen_range(1.0..10.0), rng.gen_range(1.0..10.0))?))
        }
    };
    let output = if input == 1 && rng.gen_bool(0.5) { OutputActivation::Sigmoid } else { OutputActivation::Linear };
    let sizes: Vec<usize> = std::iter::once(input).chain(hidden).chain([1]).collect();
    let net = Mlp::xavier(&sizes, output, rng.gen())?;
    let params = net.theta.iter().copied().chain(loss.scalar_init()).collect();
    Ok(RandomProblem { loss, net, params })
}
