mod common;

use jointrep::trainer::{train_from, Hyperparams, Model};
use jointrep::{build_cooccurrence, compose_embeddings, train, CoocMatrix, RelationSet, Vocabulary};
use proptest::prelude::*;

fn toy() -> (Vocabulary, CoocMatrix) {
    let lines = common::toy_corpus(4_000, 8);
    let vocab = Vocabulary::build(&lines, 3).unwrap();
    let cooc = build_cooccurrence(&lines, &vocab, 10).unwrap();
    (vocab, cooc)
}

fn small_hp() -> Hyperparams {
    Hyperparams {
        dim: 12,
        epochs: 4,
        lambda: 100.0,
        seed: 5,
        ..Hyperparams::default()
    }
}

#[test]
fn training_is_reproducible_for_a_seed() {
    let (_, cooc) = toy();
    let rel = RelationSet::from_pairs("r", cooc.vocab_size(), vec![(0, 1), (2, 3)]).unwrap();
    let a = train(&cooc, &rel, &small_hp()).unwrap();
    let b = train(&cooc, &rel, &small_hp()).unwrap();
    assert_eq!(a.model, b.model);
    let c = train(&cooc, &rel, &Hyperparams { seed: 6, ..small_hp() }).unwrap();
    assert_ne!(a.model.w, c.model.w);
}

#[test]
fn accumulators_only_grow_across_epochs() {
    let (_, cooc) = toy();
    let rel = RelationSet::from_pairs("r", cooc.vocab_size(), vec![(0, 5)]).unwrap();
    let mut model = Model::init(cooc.vocab_size(), 12, 1);
    for _ in 0..3 {
        let before = model.clone();
        model = train_from(
            model,
            &cooc,
            &rel,
            &Hyperparams {
                epochs: 1,
                ..small_hp()
            },
            |_| {},
        )
        .unwrap()
        .model;
        for (old, new) in [
            (&before.acc_w, &model.acc_w),
            (&before.acc_wt, &model.acc_wt),
            (&before.acc_b, &model.acc_b),
            (&before.acc_bt, &model.acc_bt),
        ] {
            assert!(old.iter().zip(new).all(|(a, b)| b >= a));
        }
    }
}

#[test]
fn checkpoint_resume_continues_from_saved_state() {
    let (_, cooc) = toy();
    let rel = RelationSet::empty("none", cooc.vocab_size());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    let first = train(&cooc, &rel, &small_hp()).unwrap();
    first.model.save(&path, true).unwrap();
    let resumed = Model::load(&path).unwrap();
    assert_eq!(resumed, first.model);
    let more = train_from(
        resumed,
        &cooc,
        &rel,
        &Hyperparams {
            epochs: 2,
            ..small_hp()
        },
        |_| {},
    )
    .unwrap();
    let last = first.history.last().unwrap().objective.total;
    assert!(more.history[1].objective.total < last);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let (vocab, cooc) = toy();
    let small_rel = RelationSet::empty("none", 3);
    assert!(train(&cooc, &small_rel, &small_hp()).is_err());
    let empty = CoocMatrix::from_entries(4, Vec::new()).unwrap();
    assert!(train(&empty, &RelationSet::empty("none", 4), &small_hp()).is_err());
    let model = Model::init(vocab.len() + 1, 4, 0);
    assert!(compose_embeddings(&model, &vocab).is_err());
}

#[test]
fn composed_embeddings_follow_vocabulary_order() {
    let (vocab, cooc) = toy();
    let trained = train(&cooc, &RelationSet::empty("none", vocab.len()), &small_hp()).unwrap();
    let emb = compose_embeddings(&trained.model, &vocab).unwrap();
    assert_eq!(emb.words(), vocab.words());
    let id = vocab.id("king").unwrap();
    let expected: Vec<f64> = trained
        .model
        .w_row(id)
        .iter()
        .zip(trained.model.wt_row(id))
        .map(|(a, b)| a + b)
        .collect();
    assert_eq!(emb.vector("king").unwrap(), expected.as_slice());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cooc_matches_brute_force(
        lines in prop::collection::vec(prop::collection::vec(0usize..12, 0..30), 1..12),
        window in 1usize..=12,
        min_count in 1u64..3,
    ) {
        let lines: Vec<String> = lines
            .iter()
            .map(|l| l.iter().map(|k| format!("v{k}")).collect::<Vec<_>>().join(" "))
            .collect();
        let Ok(vocab) = Vocabulary::build(&lines, min_count) else {
            return Ok(());
        };
        let got = build_cooccurrence(&lines, &vocab, window).unwrap();
        let expected = common::brute_force_cooc(&lines, |w| vocab.id(w), window);
        prop_assert_eq!(got.nnz(), expected.len());
        for (e, ((i, j), frac)) in got.entries().iter().zip(&expected) {
            prop_assert_eq!((e.i, e.j), (*i, *j));
            prop_assert_eq!(e.x.to_bits(), frac.to_f64().to_bits());
        }
    }

    #[test]
    fn window_monotonicity(
        lines in prop::collection::vec(prop::collection::vec(0usize..8, 0..25), 1..8),
        window in 1usize..10,
    ) {
        let lines: Vec<String> = lines
            .iter()
            .map(|l| l.iter().map(|k| format!("v{k}")).collect::<Vec<_>>().join(" "))
            .collect();
        let vocab = Vocabulary::build(&lines, 1);
        prop_assume!(vocab.is_ok());
        let vocab = vocab.unwrap();
        let narrow = build_cooccurrence(&lines, &vocab, window).unwrap();
        let wide = build_cooccurrence(&lines, &vocab, window + 1).unwrap();
        for e in narrow.entries() {
            let w = wide.get(e.i, e.j);
            prop_assert!(w.is_some_and(|w| w >= e.x));
        }
    }
}
