use inversa_pinn::collocation::Domain;
use inversa_pinn::loss::Group;
use inversa_pinn::{PinnLoss, PointEval};
use inversa_pinn::diagnostics::{check_input_derivatives, check_loss_gradient, random_problem, LossKind};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn loss_gradients_match_finite_differences() {
    for kind in LossKind::ALL {
        for seed in 0..20 {
            let p = random_problem(kind, seed).unwrap();
            let c = check_loss_gradient(p.loss.as_ref(), &p.net, &p.params, 1e-4).unwrap();
            assert!(c.passes(0.95, 1e-8), "{kind:?} seed {seed}: {c:?}");
        }
    }
}

#[test]
fn input_derivatives_match_finite_differences() {
    let mut rng = StdRng::seed_from_u64(11);
    let d = Domain::default();
    for kind in LossKind::ALL {
        for seed in 0..20 {
            let p = random_problem(kind, seed).unwrap();
            let pts: Vec<[f64; 2]> =
                (0..10).map(|_| d.map([rng.gen::<f64>(), rng.gen::<f64>()])).collect();
            let worst = check_input_derivatives(&p.net, &pts, 1e-8);
            assert!(worst <= 1e-5, "{kind:?} seed {seed}: {worst:e}");
        }
    }
}

/// Delegates to a correct loss but returns a slightly wrong adjoint.
struct Skewed(Box<dyn PinnLoss>);

impl PinnLoss for Skewed {
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }
    fn groups(&self) -> &[Group] {
        self.0.groups()
    }
    fn scalar_names(&self) -> Vec<&'static str> {
        self.0.scalar_names()
    }
    fn scalar_init(&self) -> Vec<f64> {
        self.0.scalar_init()
    }
    fn point_term(&self, g: usize, i: usize, e: &PointEval, s: &[f64], sg: &mut [f64]) -> (f64, PointEval) {
        let (v, mut adj) = self.0.point_term(g, i, e, s, sg);
        adj.ut *= 1.01;
        (v, adj)
    }
}

#[test]
fn audit_rejects_a_wrong_adjoint() {
    let p = random_problem(LossKind::LogisticDirect, 0).unwrap();
    let skewed = Skewed(p.loss);
    let c = check_loss_gradient(&skewed, &p.net, &p.params, 1e-4).unwrap();
    assert!(!c.passes(0.95, 1e-8), "{c:?}");
}
