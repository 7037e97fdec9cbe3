use inversa_core::logistic::LogisticParams;
use inversa_pinn::checkpoint::Checkpoint;
use inversa_pinn::collocation::SetSizes;
use inversa_pinn::experiments::{LogisticDirectPinn, LogisticInversePinn, PmePinn};
use inversa_pinn::loss::Exponent;
use inversa_pinn::{Phase, TrainSchedule};

#[test]
fn short_logistic_run_learns_and_reloads() {
    let cfg = LogisticDirectPinn {
        schedule: TrainSchedule { adam_epochs: 2000, ..LogisticDirectPinn::default().schedule },
        n_eval: 50,
        ..Default::default()
    };
    let run = cfg.run().unwrap();
    assert!(run.rel_l2 < 1e-2, "{}", run.rel_l2);
    assert_eq!(run.train.history.len(), 2000);
    assert!(run.train.history.last().unwrap().loss < 1e-2 * run.train.history[0].loss);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    run.checkpoint.save(&path).unwrap();
    let net = Checkpoint::load(&path).unwrap().to_mlp().unwrap();
    for (p, y) in run.eval_points.iter().zip(&run.predicted) {
        assert_eq!(net.value(p), *y);
    }
}

#[test]
fn logistic_inverse_moves_r_towards_truth() {
    let params = LogisticParams { r: 0.05, k: 90.0, p0: 10.0, t0: 0.0 };
    let cfg = LogisticInversePinn {
        params,
        schedule: TrainSchedule { adam_epochs: 3000, ..LogisticInversePinn::default().schedule },
        ..Default::default()
    };
    let run = cfg.run().unwrap();
    let r = run.scalars["r"];
    assert!((r - 0.05).abs() < (0.5 - 0.05) / 10.0, "{r}");
}

#[test]
fn pme_schedule_runs_both_phases() {
    let cfg = PmePinn {
        sizes: SetSizes { n_int: 32, n_sb: 8, n_tb: 8 },
        hidden: vec![8, 8],
        n_test: 500,
        exponent: Exponent::Fixed { beta: 3.0 },
        schedule: TrainSchedule { adam_epochs: 100, lbfgs_max_iter: 30, early_stopping: false, ..Default::default() },
        ..Default::default()
    };
    let run = cfg.run().unwrap();
    let h = &run.train.history;
    assert!(h[..100].iter().all(|e| e.phase == Phase::Adam));
    assert!(h[100..].iter().all(|e| e.phase == Phase::Lbfgs));
    assert!(run.train.final_state.loss <= run.train.after_adam.loss);
    assert!(run.rel_l2.is_finite() && run.rel_l2_adam.is_finite());

    let again = cfg.run().unwrap();
    assert_eq!(again.train.history, run.train.history);
    assert_eq!(again.predicted, run.predicted);
}

#[test]
fn pme_inverse_reports_beta() {
    let mut cfg = PmePinn::inverse(2.0);
    cfg.sizes = SetSizes { n_int: 32, n_sb: 8, n_tb: 8 };
    cfg.measurements = Some([5, 5]);
    cfg.hidden = vec![8];
    cfg.n_test = 100;
    cfg.schedule.adam_epochs = 50;
    let run = cfg.run().unwrap();
    let beta = run.scalars["beta"];
    assert!(beta > 1.0 && beta < 5.0, "{beta}");
    assert_eq!(run.checkpoint.scalars["beta"], beta);
}
