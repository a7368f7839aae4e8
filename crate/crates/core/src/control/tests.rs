use super::*;
use crate::hopgd::testing::analytic_surrogate;
use crate::postproc::ned;

#[test]
fn ned_inversion_matches_postproc() {
    let c = ProcessConstants::default();
    let n = ned(0.28, 300.0, c.speed, c.hatch, c.layer, c.density, c.specific_heat, c.t_liquidus, c.t_0).unwrap();
    assert!((n - 2.148).abs() < 1e-3);
    assert!((c.absorbed_power(n) - 84.0).abs() < 1e-9);
    assert!((c.ned(84.0) - n).abs() < 1e-12);
}

#[test]
fn lag_plant_converges_to_steady_state() {
    let s = analytic_surrogate();
    let b = CommandBox::default();
    let mut p = SurrogatePlant::new(&s, ProcessConstants::default(), 0.5, &b.center()).unwrap();
    let target = Command { ned: 4.0, radius: 5e-5, depth: 1e-4 };
    let ss = p.steady(&target).unwrap();
    let mut o = p.initial();
    for _ in 0..60 {
        o = p.apply(&target).unwrap();
    }
    assert!((o[0] - ss[0]).abs() < 1e-15 && (o[1] - ss[1]).abs() < 1e-15);
}

fn small_dataset(seed: u64) -> WindowedDataset {
    let s = analytic_surrogate();
    let b = CommandBox::default();
    let traces = generate_traces(|c| SurrogatePlant::new(&s, ProcessConstants::default(), 0.5, c), &b, 12, 60, seed).unwrap();
    build_dataset(&traces, WINDOW, seed).unwrap()
}

#[test]
fn normalizers_use_training_rows_only() {
    let ds = small_dataset(1);
    let all: Vec<Vec<f64>> = ds
        .train
        .inputs
        .iter()
        .chain(&ds.val.inputs)
        .chain(&ds.test.inputs)
        .map(|x| ds.input_norm.denormalize(x))
        .collect();
    assert_ne!(MinMax::fit(&all).unwrap(), ds.input_norm);
}

#[test]
fn constant_target_is_learned() {
    let mut ds = small_dataset(2);
    for t in ds.train.targets.iter_mut().chain(ds.val.targets.iter_mut()) {
        *t = vec![0.3, 0.6, 0.45];
    }
    let cfg = TrainConfig { epochs: 200, width: 16, learning_rate: 1e-2, ..Default::default() };
    let (model, curve) = train(&ds, &cfg).unwrap();
    assert!(curve.last().unwrap().train < 1e-4, "{:?}", curve.last());
    assert_eq!(model.epochs_run, 200);
}

#[test]
fn seeded_training_is_reproducible() {
    let ds = small_dataset(3);
    let cfg = TrainConfig { epochs: 5, width: 16, ..Default::default() };
    let (a, ca) = train(&ds, &cfg).unwrap();
    let (b, cb) = train(&ds, &cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(loss_csv(&ca), loss_csv(&cb));
    assert_eq!(ControlModel::from_json(&a.to_json().unwrap()).unwrap(), a);
}

#[test]
fn patience_stops_early() {
    let ds = small_dataset(4);
    let cfg = TrainConfig { epochs: 400, width: 8, learning_rate: 0.5, patience: Some(3), ..Default::default() };
    let (m, curve) = train(&ds, &cfg).unwrap();
    assert!(curve.len() < 400);
    assert_eq!(m.epochs_run, curve.len());
}

#[test]
fn perfect_predictor_scores_zero() {
    let ds = small_dataset(5);
    let cfg = TrainConfig { epochs: 1, width: 4, ..Default::default() };
    let (model, _) = train(&ds, &cfg).unwrap();
    // Replace the test targets with the model's own predictions.
    let mut rows = ds.test.clone();
    rows.targets = rows.inputs.iter().map(|x| model.net.forward(x).unwrap()).collect();
    let r = evaluate(&model, &rows).unwrap();
    assert!(r.max < 1e-12);
}

#[test]
fn closed_loop_runs_from_cold_history() {
    let s = analytic_surrogate();
    let ds = small_dataset(6);
    let cfg = TrainConfig { epochs: 3, width: 8, ..Default::default() };
    let (model, _) = train(&ds, &cfg).unwrap();
    let b = CommandBox::default();
    let mut plant = SurrogatePlant::new(&s, ProcessConstants::default(), 0.5, &b.center()).unwrap();
    let w = plant.initial()[0];
    let targets = sigmoid_targets(w, 9e-5, 1.2e-4, 20, 2.0);
    let steps = closed_loop(&model, &mut plant, &targets).unwrap();
    assert_eq!(steps.len(), 20);
    for s in &steps {
        for (c, (lo, hi)) in s.command.as_array().iter().zip(model.target_norm.lo.iter().zip(&model.target_norm.hi)) {
            assert!(*c >= *lo && *c <= *hi);
        }
    }
    assert!(loop_csv(&steps).lines().count() == 21);
}

#[test]
fn trace_csv_has_header_and_rows() {
    let t = ControlTrace {
        observations: vec![[1e-4, 1e-4], [1.1e-4, 1.2e-4]],
        commands: vec![Command { ned: 3.0, radius: 5e-5, depth: 1e-4 }],
    };
    let csv = t.to_csv();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("step,W,D,NED,r_b,d\n0,"));
}
