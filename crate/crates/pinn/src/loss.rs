//! Composite physics-informed losses.
//!
//! A loss is a set of point groups plus a per-point term. Each term returns its
//! contribution to the objective and the partial derivatives with respect to
//! the point evaluation `(u, u_t, u_x, u_xx)` and the trainable scalars. The
//! driver ([`loss_and_grad`]) sums the terms in a fixed order, optionally takes
//! `log10`, and pulls the point adjoints back through the network one point at
//! a time.

use serde::{Deserialize, Serialize};

use crate::collocation::{CollocationSets, Target};
use crate::mlp::{Mlp, Need, PointEval, Tape};
use crate::{PinnError, Result};

/// Floor added inside the logarithm of log-scaled losses.
pub const LOG_FLOOR: f64 = 1e-30;

#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub term: &'static str,
    pub points: Vec<[f64; 2]>,
    pub need: Need,
}

/// Loss value with its per-term breakdown (before any log transform).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub terms: Vec<(String, f64)>,
}

impl LossValue {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

pub trait PinnLoss {
    /// 1 for `u(t)`, 2 for `u(t, x)`.
    fn input_dim(&self) -> usize;
    fn groups(&self) -> &[Group];
    fn scalar_names(&self) -> Vec<&'static str>;
    /// Raw starting values of the trainable scalars.
    fn scalar_init(&self) -> Vec<f64>;
    /// Trainable scalars in physical units (after any transform).
    fn scalar_values(&self, raw: &[f64]) -> Vec<f64> {
        raw.to_vec()
    }
    fn log_scaled(&self) -> bool {
        false
    }
    /// Contribution of point `i` of group `g`; partials w.r.t. the raw scalars
    /// are added to `sgrad`.
    fn point_term(&self, g: usize, i: usize, e: &PointEval, scalars: &[f64], sgrad: &mut [f64]) -> (f64, PointEval);
}

/// Loss and, if `grad` is given, its gradient with respect to
/// `params = [network parameters, raw scalars]`.
pub fn loss_and_grad(loss: &dyn PinnLoss, net: &Mlp, params: &[f64], grad: Option<&mut [f64]>) -> Result<LossValue> {
    let np = net.n_params();
    if params.len() != np + loss.scalar_names().len() || net.input_dim() != loss.input_dim() {
        return Err(PinnError::Config("parameter vector does not match network and loss".into()));
    }
    let (theta, scalars) = params.split_at(np);
    let mut tape = Tape::default();
    let mut local = vec![0.0; np];
    let mut sgrad = vec![0.0; scalars.len()];
    let want_grad = grad.is_some();
    let mut grad_buf = vec![0.0; if want_grad { params.len() } else { 0 }];
    let mut terms = Vec::with_capacity(loss.groups().len());
    let mut total = 0.0;
    let dim = loss.input_dim();

    for (g, group) in loss.groups().iter().enumerate() {
        let mut sum = 0.0;
        for (i, p) in group.points.iter().enumerate() {
            let e = net.eval(theta, &p[..dim], group.need, &mut tape);
            let (v, adj) = loss.point_term(g, i, &e, scalars, &mut sgrad);
            sum += v;
            if want_grad {
                net.backprop(theta, &tape, &adj, &mut local);
            }
        }
        if !sum.is_finite() {
            return Err(PinnError::NonFinite { term: group.term.into(), epoch: 0 });
        }
        terms.push((group.term.to_string(), sum));
        total += sum;
    }
    if want_grad {
        grad_buf[..np].copy_from_slice(&local);
        grad_buf[np..].copy_from_slice(&sgrad);
    }
    let total = finish(loss, total, want_grad.then_some(&mut grad_buf[..]));
    if let Some(out) = grad {
        out.copy_from_slice(&grad_buf);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(PinnError::NonFinite { term: "gradient".into(), epoch: 0 });
        }
    }
    Ok(LossValue { total, terms })
}

/// Loss with the network replaced by an arbitrary evaluator, e.g. an exact
/// solution with its derivatives.
pub fn loss_with_oracle(loss: &dyn PinnLoss, oracle: impl Fn(&[f64]) -> PointEval, scalars: &[f64]) -> LossValue {
    let mut sgrad = vec![0.0; scalars.len()];
    let mut terms = Vec::new();
    let mut total = 0.0;
    for (g, group) in loss.groups().iter().enumerate() {
        let sum: f64 = group
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| loss.point_term(g, i, &oracle(&p[..loss.input_dim()]), scalars, &mut sgrad).0)
            .sum();
        terms.push((group.term.to_string(), sum));
        total += sum;
    }
    LossValue { total: finish(loss, total, None), terms }
}

fn finish(loss: &dyn PinnLoss, total: f64, grad: Option<&mut [f64]>) -> f64 {
    if !loss.log_scaled() {
        return total;
    }
    let s = total + LOG_FLOOR;
    if let Some(g) = grad {
        let k = 1.0 / (s * std::f64::consts::LN_10);
        g.iter_mut().for_each(|v| *v *= k);
    }
    s.log10()
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse of softplus, for initializing raw scalars.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn squared_error(e: &PointEval, target: f64, w: f64) -> (f64, PointEval) {
    let d = e.u - target;
    (w * d * d, PointEval { u: 2.0 * w * d, ..PointEval::default() })
}

/// Logistic residual `u' − r u (1 − s u / K)` for network output `u = p / s`.
#[inline]
fn logistic_residual(e: &PointEval, r: f64, k: f64, s: f64) -> (f64, f64) {
    let q = s * e.u / k;
    (e.ut - r * e.u * (1.0 - q), -r * (1.0 - 2.0 * q))
}

/// Direct logistic problem. With `scale = K` the network learns `p / K`.
#[derive(Clone, Debug)]
pub struct LogisticDirectLoss {
    pub r: f64,
    pub k: f64,
    pub p0: f64,
    pub t0: f64,
    pub scale: f64,
    groups: Vec<Group>,
}

impl LogisticDirectLoss {
    pub fn new(r: f64, k: f64, p0: f64, t0: f64, colloc: &[f64], scale: f64) -> Result<Self> {
        if colloc.is_empty() {
            return Err(PinnError::Config("collocation set is empty".into()));
        }
        if !(k > 0.0 && scale > 0.0) {
            return Err(PinnError::Config("K and the output scale must be positive".into()));
        }
        let groups = vec![
            Group { term: "ode", points: colloc.iter().map(|&t| [t, 0.0]).collect(), need: Need::T },
            Group { term: "ic", points: vec![[t0, 0.0]], need: Need::VALUE },
        ];
        Ok(Self { r, k, p0, t0, scale, groups })
    }
}

impl PinnLoss for LogisticDirectLoss {
    fn input_dim(&self) -> usize {
        1
    }
    fn groups(&self) -> &[Group] {
        &self.groups
    }
    fn scalar_names(&self) -> Vec<&'static str> {
        Vec::new()
    }
    fn scalar_init(&self) -> Vec<f64> {
        Vec::new()
    }
    fn point_term(&self, g: usize, _i: usize, e: &PointEval, _s: &[f64], _sg: &mut [f64]) -> (f64, PointEval) {
        if g == 1 {
            return squared_error(e, self.p0 / self.scale, 1.0);
        }
        let w = 1.0 / self.groups[0].points.len() as f64;
        let (res, dres_du) = logistic_residual(e, self.r, self.k, self.scale);
        let a = 2.0 * w * res;
        (w * res * res, PointEval { u: a * dres_du, ut: a, ..PointEval::default() })
    }
}

/// Unknowns of the inverse logistic problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseUnknowns {
    /// `r` trained directly, `K` known.
    ROnly,
    /// `r = softplus(ρ_r)`, `K = softplus(ρ_K)`.
    RAndK,
}

#[derive(Clone, Debug)]
pub struct LogisticInverseLoss {
    pub unknowns: InverseUnknowns,
    /// Known carrying capacity, or the starting value when it is trained.
    pub k: f64,
    pub r_init: f64,
    pub p0: f64,
    pub t0: f64,
    pub lambda_data: f64,
    pub scale: f64,
    data: Vec<f64>,
    groups: Vec<Group>,
}

impl LogisticInverseLoss {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        unknowns: InverseUnknowns,
        k: f64,
        r_init: f64,
        p0: f64,
        t0: f64,
        colloc: &[f64],
        data: &[(f64, f64)],
        lambda_data: f64,
        scale: f64,
    ) -> Result<Self> {
        if colloc.is_empty() || data.is_empty() {
            return Err(PinnError::Config("collocation and data sets must be nonempty".into()));
        }
        if !(k > 0.0 && scale > 0.0 && lambda_data >= 0.0) {
            return Err(PinnError::Config("K and scale must be positive, lambda_data nonnegative".into()));
        }
        if unknowns == InverseUnknowns::RAndK && !(r_init > 0.0) {
            return Err(PinnError::Config("softplus parameters need positive starting values".into()));
        }
        let groups = vec![
            Group { term: "ode", points: colloc.iter().map(|&t| [t, 0.0]).collect(), need: Need::T },
            Group { term: "ic", points: vec![[t0, 0.0]], need: Need::VALUE },
            Group { term: "data", points: data.iter().map(|&(t, _)| [t, 0.0]).collect(), need: Need::VALUE },
        ];
        let data = data.iter().map(|&(_, p)| p).collect();
        Ok(Self { unknowns, k, r_init, p0, t0, lambda_data, scale, data, groups })
    }

    /// `(r, K)` and their derivatives with respect to the raw scalars.
    fn physical(&self, raw: &[f64]) -> (f64, f64, f64, f64) {
        match self.unknowns {
            InverseUnknowns::ROnly => (raw[0], self.k, 1.0, 0.0),
            InverseUnknowns::RAndK => (softplus(raw[0]), softplus(raw[1]), sigmoid(raw[0]), sigmoid(raw[1])),
        }
    }
}

impl PinnLoss for LogisticInverseLoss {
    fn input_dim(&self) -> usize {
        1
    }
    fn groups(&self) -> &[Group] {
        &self.groups
    }
    fn scalar_names(&self) -> Vec<&'static str> {
        match self.unknowns {
            InverseUnknowns::ROnly => vec!["r"],
            InverseUnknowns::RAndK => vec!["r", "K"],
        }
    }
    fn scalar_init(&self) -> Vec<f64> {
        match self.unknowns {
            InverseUnknowns::ROnly => vec![self.r_init],
            InverseUnknowns::RAndK => vec![softplus_inv(self.r_init), softplus_inv(self.k)],
        }
    }
    fn scalar_values(&self, raw: &[f64]) -> Vec<f64> {
        let (r, k, _, _) = self.physical(raw);
        match self.unknowns {
            InverseUnknowns::ROnly => vec![r],
            InverseUnknowns::RAndK => vec![r, k],
        }
    }
    fn point_term(&self, g: usize, i: usize, e: &PointEval, raw: &[f64], sgrad: &mut [f64]) -> (f64, PointEval) {
        match g {
            1 => squared_error(e, self.p0 / self.scale, 1.0),
            2 => {
                let w = self.lambda_data / self.data.len() as f64;
                squared_error(e, self.data[i] / self.scale, w)
            }
            _ => {
                let (r, k, dr, dk) = self.physical(raw);
                let w = 1.0 / self.groups[0].points.len() as f64;
                let (res, dres_du) = logistic_residual(e, r, k, self.scale);
                let a = 2.0 * w * res;
                let q = self.scale * e.u / k;
                sgrad[0] += a * (-e.u * (1.0 - q)) * dr;
                if self.unknowns == InverseUnknowns::RAndK {
                    sgrad[1] += a * (-r * e.u * q / k) * dk;
                }
                (w * res * res, PointEval { u: a * dres_du, ut: a, ..PointEval::default() })
            }
        }
    }
}

/// Exponent of the porous medium equation: fixed, or trained from a start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exponent {
    Fixed { beta: f64 },
    Trainable { beta0: f64 },
}

/// `log10(λ_u (L_b + L_t) + L_PDE + λ_s L_meas)` for `u_t = (|u|^{β−1} u)_xx`.
#[derive(Clone, Debug)]
pub struct PmeLoss {
    pub exponent: Exponent,
    pub lambda_u: f64,
    pub lambda_s: f64,
    targets: Vec<Vec<f64>>,
    groups: Vec<Group>,
}

const U_FLOOR: f64 = 1e-12;

/// `A = φ'(u)`, `B = φ''(u)` for `φ(u) = |u|^{β−1} u`, with their derivatives
/// in `u` and `β`: `(A, B, B', A_β, B_β)`.
#[inline]
fn pme_coefficients(u: f64, beta: f64) -> (f64, f64, f64, f64, f64) {
    let a = u.abs().max(U_FLOOR);
    let sgn = if u < 0.0 { -1.0 } else { 1.0 };
    let ln = a.ln();
    let p1 = a.powf(beta - 1.0);
    let p2 = p1 / a;
    let p3 = p2 / a;
    let big_a = beta * p1;
    let big_b = beta * (beta - 1.0) * p2 * sgn;
    let db_du = beta * (beta - 1.0) * (beta - 2.0) * p3;
    let da_dbeta = p1 * (1.0 + beta * ln);
    let db_dbeta = sgn * p2 * ((2.0 * beta - 1.0) + beta * (beta - 1.0) * ln);
    (big_a, big_b, db_du, da_dbeta, db_dbeta)
}

/// PDE residual `u_t − A u_xx − B u_x²` and its partials:
/// `(R, ∂R/∂u, ∂R/∂u_x, ∂R/∂u_xx, ∂R/∂β)` (`∂R/∂u_t = 1`).
pub fn pme_residual_point(e: &PointEval, beta: f64) -> (f64, f64, f64, f64, f64) {
    let (a, b, db_du, da_db, db_db) = pme_coefficients(e.u, beta);
    let ux2 = e.ux * e.ux;
    let res = e.ut - a * e.uxx - b * ux2;
    (res, -b * e.uxx - db_du * ux2, -2.0 * b * e.ux, -a, -da_db * e.uxx - db_db * ux2)
}

impl PmeLoss {
    pub fn new(exponent: Exponent, sets: &CollocationSets, lambda_u: f64, lambda_s: f64) -> Result<Self> {
        if sets.interior.is_empty() || sets.spatial_boundary.is_empty() || sets.temporal_boundary.is_empty() {
            return Err(PinnError::Config("PME point sets must be nonempty".into()));
        }
        if !(lambda_u >= 0.0 && lambda_s >= 0.0) {
            return Err(PinnError::Config("loss weights must be nonnegative".into()));
        }
        let split = |v: &[Target]| -> (Vec<[f64; 2]>, Vec<f64>) {
            (v.iter().map(|t| t.point).collect(), v.iter().map(|t| t.value).collect())
        };
        let (sb, sb_t) = split(&sets.spatial_boundary);
        let (tb, tb_t) = split(&sets.temporal_boundary);
        let mut groups = vec![
            Group { term: "pde", points: sets.interior.clone(), need: Need::T_XX },
            Group { term: "spatial_boundary", points: sb, need: Need::VALUE },
            Group { term: "temporal_boundary", points: tb, need: Need::VALUE },
        ];
        let mut targets = vec![Vec::new(), sb_t, tb_t];
        if !sets.measurements.is_empty() {
            let (m, m_t) = split(&sets.measurements);
            groups.push(Group { term: "measurements", points: m, need: Need::VALUE });
            targets.push(m_t);
        }
        Ok(Self { exponent, lambda_u, lambda_s, targets, groups })
    }

    pub fn beta(&self, raw: &[f64]) -> f64 {
        match self.exponent {
            Exponent::Fixed { beta } => beta,
            Exponent::Trainable { .. } => raw[0],
        }
    }
}

impl PinnLoss for PmeLoss {
    fn input_dim(&self) -> usize {
        2
    }
    fn groups(&self) -> &[Group] {
        &self.groups
    }
    fn scalar_names(&self) -> Vec<&'static str> {
        match self.exponent {
            Exponent::Fixed { .. } => Vec::new(),
            Exponent::Trainable { .. } => vec!["beta"],
        }
    }
    fn scalar_init(&self) -> Vec<f64> {
        match self.exponent {
            Exponent::Fixed { .. } => Vec::new(),
            Exponent::Trainable { beta0 } => vec![beta0],
        }
    }
    fn log_scaled(&self) -> bool {
        true
    }
    fn point_term(&self, g: usize, i: usize, e: &PointEval, raw: &[f64], sgrad: &mut [f64]) -> (f64, PointEval) {
        let n = self.groups[g].points.len() as f64;
        match g {
            0 => {
                let (res, d_u, d_ux, d_uxx, d_beta) = pme_residual_point(e, self.beta(raw));
                let a = 2.0 * res / n;
                if let Exponent::Trainable { .. } = self.exponent {
                    sgrad[0] += a * d_beta;
                }
                (res * res / n, PointEval { u: a * d_u, ut: a, ux: a * d_ux, uxx: a * d_uxx })
            }
            1 | 2 => squared_error(e, self.targets[g][i], self.lambda_u / n),
            _ => squared_error(e, self.targets[g][i], self.lambda_s / n),
        }
    }
}
