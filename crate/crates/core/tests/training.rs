mod common;

use shapematch::nn::{train_from, train_phase, ModelWeights, ParamGroup};

fn group_bytes(net: &ModelWeights, g: ParamGroup) -> Vec<u32> {
    net.group_tensors(g).iter().flat_map(|t| t.iter().map(|v| v.to_bits())).collect()
}

#[test]
fn phase_one_freezes_backbones_and_phase_two_moves_them() {
    let cfg = common::tiny_config();
    let (arch, ex) = common::tiny_examples(&cfg, 2);
    let tcfg = common::train_cfg(&cfg);
    let init = ModelWeights::init(&arch, 1).unwrap();
    let mut net = init.clone();
    train_phase(&mut net, &ex, &tcfg, 1, 0).unwrap();
    for g in [ParamGroup::ImageBackbone, ParamGroup::PointBackbone] {
        assert_eq!(group_bytes(&net, g), group_bytes(&init, g), "{g:?} moved in phase 1");
    }
    for g in [ParamGroup::ImageHead, ParamGroup::JointHead] {
        assert_ne!(group_bytes(&net, g), group_bytes(&init, g), "{g:?} frozen in phase 1");
    }
    let after1 = net.clone();
    train_phase(&mut net, &ex, &tcfg, 2, tcfg.phase1_epochs).unwrap();
    for g in ParamGroup::ALL {
        assert_ne!(group_bytes(&net, g), group_bytes(&after1, g), "{g:?} frozen in phase 2");
    }
}

#[test]
fn split_phases_match_train_from() {
    let cfg = common::tiny_config();
    let (arch, ex) = common::tiny_examples(&cfg, 1);
    let tcfg = common::train_cfg(&cfg);
    let init = ModelWeights::init(&arch, 1).unwrap();
    let (whole, report) = train_from(init.clone(), &ex, &[], &tcfg).unwrap();
    let mut net = init;
    let mut epochs = train_phase(&mut net, &ex, &tcfg, 1, 0).unwrap();
    epochs.extend(train_phase(&mut net, &ex, &tcfg, 2, epochs.len()).unwrap());
    assert_eq!(epochs, report.epochs);
    for g in ParamGroup::ALL {
        assert_eq!(group_bytes(&net, g), group_bytes(&whole, g));
    }
}

#[test]
fn overfit_suite_fits_and_loss_is_monotone_after_warmup() {
    let cfg = common::tiny_config();
    let (arch, ex) = common::tiny_examples(&cfg, 2);
    let tcfg = common::train_cfg(&cfg);
    let (net, report) = train_from(ModelWeights::init(&arch, 1).unwrap(), &ex, &ex, &tcfg).unwrap();
    let losses: Vec<f64> = report.epochs.iter().map(|e| e.loss).collect();
    for (i, w) in losses.windows(2).enumerate().skip(4) {
        assert!(w[1] <= w[0], "loss rose at epoch {}: {losses:?}", i + 2);
    }
    assert!(losses.last().unwrap() < &losses[0]);
    let v = report.validation.unwrap();
    assert_eq!(v.accuracy, 1.0, "{:?} vs {:?}", v.predictions, v.truth);
    assert_eq!(net.arch.classes.len(), 3);
}

#[test]
fn phase_numbers_other_than_one_and_two_are_rejected() {
    let cfg = common::tiny_config();
    let (arch, ex) = common::tiny_examples(&cfg, 1);
    let mut net = ModelWeights::init(&arch, 1).unwrap();
    assert!(train_phase(&mut net, &ex, &common::train_cfg(&cfg), 3, 0).is_err());
}
