use std::collections::BTreeMap;
use std::path::Path;

use lingseq::corpus::CohortSpec;
use lingseq::pipeline::{run_all, run_stage, Artifacts, PipelineConfig, Stage};
use lingseq::Error;

fn config(out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.seed = Some(31);
    c.paths.output = out.to_path_buf();
    c.synth = CohortSpec {
        n_per_label: [10, 10, 10],
        n_background: 90,
        span_days: [70, 130],
        ..Default::default()
    };
    c.cluster.restarts = 2;
    c.train.cv.folds = 4;
    c.train.influence_repeats = 2;
    c.report.features = vec!["punctuation_parenth".into()];
    c
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn rerun_after_deleting_downstream_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path());
    run_all(&c).unwrap();
    let before = snapshot(dir.path());

    let art = Artifacts::new(dir.path());
    std::fs::remove_dir_all(art.models()).unwrap();
    std::fs::remove_dir_all(art.report()).unwrap();
    for f in [art.nominal(), art.cart(), art.gbm(), art.influence()] {
        std::fs::remove_file(f).unwrap();
    }
    for stage in &Stage::ALL[Stage::ALL
        .iter()
        .position(|s| *s == Stage::Cluster)
        .unwrap()..]
    {
        run_stage(*stage, &c).unwrap();
    }
    assert_eq!(before, snapshot(dir.path()));
}

#[test]
fn missing_upstream_names_the_producing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path());
    for (stage, producer) in [
        (Stage::Extract, "ingest"),
        (Stage::Assign, "cluster"),
        (Stage::Train, "assign"),
    ] {
        match run_stage(stage, &c) {
            Err(Error::MissingArtifact { stage: s, .. }) => assert_eq!(s, producer, "{stage}"),
            other => panic!("{stage}: {other:?}"),
        }
    }
}

#[test]
fn seed_changes_stochastic_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = config(a.path());
    let mut cb = config(b.path());
    cb.seed = Some(32);
    for c in [&ca, &cb] {
        run_stage(Stage::Synth, c).unwrap();
    }
    let read = |p: &Path| std::fs::read(Artifacts::new(p).corpus()).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
}

#[test]
fn config_paths_resolve_against_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("conf");
    std::fs::create_dir(&sub).unwrap();
    std::fs::write(sub.join("posts.jsonl"), "").unwrap();
    std::fs::write(
        sub.join("c.toml"),
        "seed = 1\n[paths]\noutput = \"../out\"\ncorpus = \"posts.jsonl\"\n",
    )
    .unwrap();
    let c = PipelineConfig::load(&sub.join("c.toml")).unwrap();
    assert_eq!(c.paths.output, sub.join("../out"));
    assert_eq!(
        c.paths.corpus.as_deref(),
        Some(sub.join("posts.jsonl").as_path())
    );
}
