use std::sync::Arc;

use klom::data::{GaussianMixture, LabeledDataset};
use klom::forget::ForgetSpec;
use klom::metrics::{klom_set, Split};
use klom::model::{ModelParams, TrainConfig};
use klom::orchestrator::{
    baseline_klom, DatasetSource, Experiment, ExperimentPlan, ForgetDef, ForgetSource,
};
use klom::store::{read_manifest, EnsembleKind, Status};
use klom::unlearn::{MethodRegistry, UnlearnConfig, FINETUNE_RETAIN};
use klom::Error;

fn plan(n_models: usize) -> ExperimentPlan {
    ExperimentPlan {
        dataset: DatasetSource::GaussianMixture(GaussianMixture {
            n_train: 120,
            n_val: 40,
            dim: 4,
            classes: 3,
            separation: 3.0,
            label_noise: 0.1,
            seed: 9,
        }),
        hidden: vec![6],
        train: TrainConfig {
            epochs: 4,
            ..TrainConfig::default()
        },
        seed: 100,
        n_models,
        forget_sets: vec![
            ForgetDef {
                id: "a".into(),
                source: ForgetSource::Random { size: 12, seed: 1 },
            },
            ForgetDef {
                id: "b".into(),
                source: ForgetSource::Pca { size: 8 },
            },
        ],
        methods: Vec::new(),
    }
}

fn quick(name: &str) -> UnlearnConfig {
    UnlearnConfig {
        steps: 15,
        seed: 3,
        ..UnlearnConfig::for_method(name)
    }
}

#[test]
fn smoke_plan_trains_distinct_members_and_caches() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::open(plan(2), dir.path(), 1, false).unwrap();
    let pre = exp.train_pretrain_ensemble().unwrap();
    assert_eq!(pre.computed, 2);
    assert_eq!(pre.seeds, vec![100, 101]);
    let arch = exp.architecture().clone();
    let m0 = exp
        .store()
        .load_checkpoint(&EnsembleKind::Pretrain, None, 0, &arch)
        .unwrap();
    let m1 = exp
        .store()
        .load_checkpoint(&EnsembleKind::Pretrain, None, 1, &arch)
        .unwrap();
    assert_ne!(m0.values(), m1.values());
    let manifest_path = exp.store().root().join("manifest.json");
    let first = std::fs::read(&manifest_path).unwrap();
    drop(exp);

    let again = Experiment::open(plan(2), dir.path(), 1, false).unwrap();
    let pre2 = again.train_pretrain_ensemble().unwrap();
    assert_eq!(pre2.computed, 0);
    assert_eq!(
        again
            .store()
            .load_checkpoint(&EnsembleKind::Pretrain, None, 0, &arch)
            .unwrap(),
        m0
    );
    assert_eq!(std::fs::read(&manifest_path).unwrap(), first);
}

#[test]
fn growing_the_ensemble_reuses_existing_members() {
    let dir = tempfile::tempdir().unwrap();
    let small = Experiment::open(plan(2), dir.path(), 1, false).unwrap();
    small.train_pretrain_ensemble().unwrap();
    drop(small);
    let big = Experiment::open(plan(4), dir.path(), 1, false).unwrap();
    assert_eq!(big.train_pretrain_ensemble().unwrap().computed, 2);
    let rec = big.store().record("pretrain/full/checkpoints").unwrap();
    assert_eq!((rec.n_models, rec.status), (4, Status::Complete));
}

#[test]
fn force_recomputes_identically() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::open(plan(2), dir.path(), 1, false).unwrap();
    exp.train_pretrain_ensemble().unwrap();
    let before = exp.store().manifest().artifacts.clone();
    drop(exp);
    let forced = Experiment::open(plan(2), dir.path(), 1, true).unwrap();
    assert_eq!(forced.train_pretrain_ensemble().unwrap().computed, 2);
    assert_eq!(forced.store().manifest().artifacts, before);
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let manifest_for = |workers| {
        let dir = tempfile::tempdir().unwrap();
        let exp = Experiment::open(plan(4), dir.path(), workers, false).unwrap();
        exp.run(&quick(FINETUNE_RETAIN), "a").unwrap();
        let bytes = std::fs::read(exp.store().root().join("manifest.json")).unwrap();
        (dir, bytes)
    };
    let (_d1, seq) = manifest_for(1);
    let (_d3, par) = manifest_for(3);
    assert_eq!(seq, par);
}

#[test]
fn seed_sets_are_disjoint_and_oracles_differ_per_forget_set() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::open(plan(3), dir.path(), 1, false).unwrap();
    let pre = exp.train_pretrain_ensemble().unwrap();
    let oa = exp.train_oracle_ensemble("a").unwrap();
    let ob = exp.train_oracle_ensemble("b").unwrap();
    for s in oa.seeds.iter().chain(&ob.seeds) {
        assert!(!pre.seeds.contains(s));
    }
    assert_eq!(oa.forget_id.as_deref(), Some("a"));
    assert!(pre.forget_id.is_none());
    let arch = exp.architecture();
    let a0 = exp
        .store()
        .load_checkpoint(&EnsembleKind::Oracle, Some("a"), 0, arch)
        .unwrap();
    let b0 = exp
        .store()
        .load_checkpoint(&EnsembleKind::Oracle, Some("b"), 0, arch)
        .unwrap();
    assert_ne!(a0.values(), b0.values());
}

#[test]
fn margins_respect_split_coherence_and_clipping() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::open(plan(3), dir.path(), 1, false).unwrap();
    let pre = exp.train_pretrain_ensemble().unwrap();
    for id in ["a", "b"] {
        let spec = exp.forget_spec(id).unwrap();
        let f = exp.extract_margins(&pre, Split::Forget, id).unwrap();
        let r = exp.extract_margins(&pre, Split::Retain, id).unwrap();
        assert_eq!(f.n_points(), spec.indices.len());
        assert_eq!(f.n_points() + r.n_points(), exp.train_set().len());
        assert!(f
            .values()
            .iter()
            .chain(r.values())
            .all(|v| v.abs() <= 100.0));
        assert_eq!(f.n_models(), 3);
    }
    let val_a = exp.extract_margins(&pre, Split::Val, "a").unwrap();
    let val_b = exp.extract_margins(&pre, Split::Val, "b").unwrap();
    assert_eq!(val_a, val_b);
    assert_eq!(val_a.n_points(), exp.val_set().len());

    let oracle = exp.train_oracle_ensemble("a").unwrap();
    let om = exp.extract_margins(&oracle, Split::Val, "a").unwrap();
    let zero = baseline_klom(&om, &om, 3).unwrap();
    assert!(zero.per_point.iter().all(|&v| v == 0.0));
    assert!(exp.extract_margins(&oracle, Split::Val, "b").is_err());
}

#[test]
fn zero_step_unlearning_reproduces_pretrain_margins() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::open(plan(2), dir.path(), 1, false).unwrap();
    let pre = exp.train_pretrain_ensemble().unwrap();
    let config = UnlearnConfig {
        steps: 0,
        ..quick(FINETUNE_RETAIN)
    };
    let un = exp.apply_unlearning(&pre, &config, "a").unwrap();
    assert_eq!(un.kind, EnsembleKind::Unlearned(FINETUNE_RETAIN.into()));
    for split in Split::ALL {
        assert_eq!(
            exp.extract_margins(&un, split, "a").unwrap().values(),
            exp.extract_margins(&pre, split, "a").unwrap().values()
        );
    }
}

#[test]
fn empty_forget_set_oracles_match_pretrain_with_the_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = plan(2);
    p.forget_sets
        .push(ForgetDef::from_spec(&ForgetSpec::empty("none")));
    let exp = Experiment::open(p, dir.path(), 1, false).unwrap();
    let pre = exp.train_pretrain_ensemble().unwrap();
    let retrained = exp
        .apply_unlearning(&pre, &UnlearnConfig::for_method("retrain"), "none")
        .unwrap();
    let arch = exp.architecture();
    for i in 0..2 {
        assert_eq!(
            exp.store()
                .load_checkpoint(&retrained.kind, Some("none"), i, arch)
                .unwrap(),
            exp.store()
                .load_checkpoint(&EnsembleKind::Pretrain, None, i, arch)
                .unwrap()
        );
    }
}

#[test]
fn run_reports_every_split_and_is_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::open(plan(3), dir.path(), 1, false).unwrap();
    let report = exp.run(&quick(FINETUNE_RETAIN), "a").unwrap();
    assert_eq!(report.splits.len(), 3);
    let forget = report.split(Split::Forget).unwrap();
    assert_eq!(forget.method.per_point.len(), 12);
    assert!(forget.baseline.mean >= 0.0);
    assert_eq!(exp.reports("a").unwrap(), vec![report.clone()]);

    let pre = exp.train_pretrain_ensemble().unwrap();
    let oracle = exp.train_oracle_ensemble("a").unwrap();
    let direct = klom_set(
        &exp.extract_margins(&oracle, Split::Forget, "a").unwrap(),
        &exp.extract_margins(&pre, Split::Forget, "a").unwrap(),
        3,
    )
    .unwrap();
    assert_eq!(direct, forget.baseline);
}

#[test]
fn lookups_fail_with_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::open(plan(2), dir.path(), 1, false).unwrap();
    match exp.train_oracle_ensemble("zzz") {
        Err(Error::NotFound { available, .. }) => assert_eq!(available, vec!["a", "b"]),
        other => panic!("unexpected {other:?}"),
    }
    let pre = exp.train_pretrain_ensemble().unwrap();
    assert!(matches!(
        exp.apply_unlearning(&pre, &UnlearnConfig::for_method("nope"), "a"),
        Err(Error::NotFound { .. })
    ));
    assert!(Experiment::open(plan(1), dir.path(), 1, false).is_err());
}

#[test]
fn member_failure_aborts_and_marks_the_group_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let mut registry = MethodRegistry::with_builtins();
    registry
        .register(
            "fails_on_odd",
            Arc::new(
                |p: &ModelParams, _: &LabeledDataset, _: &ForgetSpec, c: &UnlearnConfig| {
                    if p.seed() % 2 == 1 {
                        Err(Error::UnlearningDiverged {
                            method: c.method_name.clone(),
                            step: 0,
                        })
                    } else {
                        Ok(p.clone())
                    }
                },
            ),
        )
        .unwrap();
    let exp = Experiment::with_registry(plan(2), dir.path(), 1, false, registry).unwrap();
    let pre = exp.train_pretrain_ensemble().unwrap();
    match exp.apply_unlearning(&pre, &UnlearnConfig::for_method("fails_on_odd"), "a") {
        Err(Error::MemberFailed { model_id, seed, .. }) => {
            assert_eq!(model_id, 1);
            assert_eq!(seed, klom_seed_of(&exp, 1));
        }
        other => panic!("unexpected {other:?}"),
    }
    let manifest = read_manifest(exp.store().root()).unwrap();
    let rec = &manifest.ensembles["unlearned-fails_on_odd/a/checkpoints"];
    assert_eq!(rec.status, Status::Incomplete);
    assert_eq!(rec.n_models, 1);
}

fn klom_seed_of(exp: &Experiment, i: usize) -> u64 {
    exp.store()
        .record("unlearned-fails_on_odd/a/checkpoints")
        .unwrap()
        .seeds[i]
}

#[test]
fn corrupted_checkpoints_are_retrained() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::open(plan(2), dir.path(), 1, false).unwrap();
    exp.train_pretrain_ensemble().unwrap();
    let path = exp
        .store()
        .root()
        .join("pretrain/full/checkpoints/model_1.ckpt");
    let mut bytes = std::fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 3] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    assert_eq!(exp.train_pretrain_ensemble().unwrap().computed, 1);
    assert!(exp.store().has_checkpoint(&EnsembleKind::Pretrain, None, 1));
}
