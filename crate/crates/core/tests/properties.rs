mod common;

use std::path::Path;

use common::*;
use lexilearn::cind::{log_transform_cind, CooccurrenceNetwork};
use lexilearn::deep::{expand_token_schedule, finite_difference_check, train_fiddl, DeepMap, FiddlConfig};
use lexilearn::encoding::{build_cue_inventory, build_form_matrix, CueInventory};
use lexilearn::lexicon::{EmbeddingTable, FrequencyTable, LemmaFormTable};
use lexilearn::linear::{predict_semantics, solve_endstate, solve_fil, train_widrow_hoff};
use lexilearn::measures::{target_correlations, token_accuracy, type_accuracy};
use lexilearn::predictors::{paradigm_size, transform_predictors, NeighborIndex};
use lexilearn::semantic::SemanticMatrix;
use lexilearn::Matrix;
use proptest::prelude::*;

fn label() -> &'static Path {
    Path::new("<test>")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frequency_lines_are_cumulated(lines in prop::collection::vec(("[a-c]{1,3}", 1u64..1000), 1..40)) {
        let text: String = lines.iter().map(|(w, c)| format!("{w}\t{c}\n")).collect();
        let table = FrequencyTable::from_reader(text.as_bytes(), label()).unwrap();
        for (w, _) in &lines {
            let want: u64 = lines.iter().filter(|(v, _)| v == w).map(|(_, c)| c).sum();
            prop_assert_eq!(table.get(w), Some(want));
        }
        let again = FrequencyTable::from_reader(text.as_bytes(), label()).unwrap();
        prop_assert_eq!(table, again);
    }

    #[test]
    fn embeddings_round_trip_bit_exact(rows in prop::collection::vec(prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 3), 1..10)) {
        let mut table = EmbeddingTable::new(3);
        for (i, v) in rows.iter().enumerate() {
            table.insert(format!("w{i}"), v.clone()).unwrap();
        }
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        let back = EmbeddingTable::from_reader(buf.as_slice(), label()).unwrap();
        for (i, v) in rows.iter().enumerate() {
            let got = back.get(&format!("w{i}")).unwrap();
            prop_assert!(got.iter().zip(v).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn form_matrix_is_binary_and_deterministic(words in prop::collection::vec("[abõš]{1,6}", 1..15)) {
        let inv = build_cue_inventory(&words).unwrap();
        let c = build_form_matrix(&words, &inv).unwrap();
        let again = build_form_matrix(&words, &CueInventory::build(&words, 3).unwrap()).unwrap();
        prop_assert_eq!(&c, &again);
        prop_assert!(c.to_dense().as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn fil_is_frequency_scale_invariant(seed in 0u64..1000, factor in 1u64..1_000_000) {
        let t = random_task(seed, 12, &['a', 'b', 'c'], 2, 5, 4, 30);
        let base = solve_fil(&t.c, t.s.values(), &t.freq, 0.0).unwrap();
        let scaled: FrequencyTable = t.words.iter().map(|w| (w.clone(), factor * t.freq.get(w).unwrap())).collect();
        let other = solve_fil(&t.c, t.s.values(), &scaled, 0.0).unwrap();
        prop_assert!(base.weights().max_abs_diff(other.weights()) <= 1e-10);
    }

    #[test]
    fn endstate_residual_gradient_vanishes(seed in 0u64..1000, ridge in prop::sample::select(vec![0.0, 0.01, 0.5, 3.0]), n in 4usize..20) {
        let t = random_task(seed, n, &['a', 'b'], 2, 6, 4, 10);
        let f = solve_endstate(&t.c, t.s.values(), ridge).unwrap();
        let cd = t.c.to_dense();
        let resid = {
            let mut r = cd.matmul(f.weights()).unwrap();
            for (x, s) in r.as_mut_slice().iter_mut().zip(t.s.values().as_slice()) {
                *x -= s;
            }
            r
        };
        let mut grad = cd.transpose().matmul(&resid).unwrap().scaled(2.0);
        for (g, w) in grad.as_mut_slice().iter_mut().zip(f.weights().as_slice()) {
            *g += 2.0 * ridge * w;
        }
        let worst = grad.as_slice().iter().fold(0.0f64, |m, g| m.max(g.abs()));
        prop_assert!(worst <= 1e-6, "gradient {}", worst);
    }

    #[test]
    fn prediction_of_stacked_rows_is_stacked(seed in 0u64..1000) {
        let t = random_task(seed, 10, &['a', 'b', 'c'], 2, 5, 3, 10);
        let f = solve_fil(&t.c, t.s.values(), &t.freq, 0.1).unwrap();
        let top = t.c.select_rows(&[0, 1, 2, 3]);
        let bottom = t.c.select_rows(&[4, 5, 6, 7, 8, 9]);
        let whole = predict_semantics(&top.stack(&bottom).unwrap(), &f).unwrap();
        let a = predict_semantics(&top, &f).unwrap();
        let b = predict_semantics(&bottom, &f).unwrap();
        let mut joined = a.as_slice().to_vec();
        joined.extend_from_slice(b.as_slice());
        prop_assert_eq!(whole.as_slice(), joined.as_slice());
    }

    #[test]
    fn widrow_hoff_single_pair(eta in 1e-6f64..=1.0, k in 1usize..=10_000) {
        let c = lexilearn::encoding::FormMatrix::from_rows(1, vec![vec![0]], vec!["a".into()]).unwrap();
        let s = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let w = train_widrow_hoff(&c, &s, &vec![0; k], eta).unwrap().weights()[(0, 0)];
        let expected = -((k as f64) * (-eta).ln_1p()).exp_m1();
        prop_assert!((w - expected).abs() <= 1e-12, "{} vs {}", w, expected);
    }

    #[test]
    fn uniform_token_accuracy_is_type_accuracy(seed in 0u64..1000, f in 1u64..1000) {
        let t = random_task(seed, 15, &['a', 'b'], 2, 6, 5, 10);
        let fil = solve_fil(&t.c, t.s.values(), &t.freq, 0.0).unwrap();
        let pred = predict_semantics(&t.c, &fil).unwrap();
        let uniform: FrequencyTable = t.words.iter().map(|w| (w.clone(), f)).collect();
        let a = type_accuracy(&pred, &t.s).unwrap();
        let b = token_accuracy(&pred, &t.s, &uniform).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn target_correlation_ignores_positive_affine_maps(seed in 0u64..1000, alpha in 0.01f64..100.0, beta in -50.0f64..50.0) {
        let t = random_task(seed, 10, &['a', 'b', 'c'], 2, 5, 6, 10);
        let fil = solve_fil(&t.c, t.s.values(), &t.freq, 0.0).unwrap();
        let pred = predict_semantics(&t.c, &fil).unwrap();
        let mut moved = pred.clone();
        moved.as_mut_slice().iter_mut().for_each(|x| *x = alpha * *x + beta);
        let r0 = target_correlations(&pred, &t.s).unwrap();
        let r1 = target_correlations(&moved, &t.s).unwrap();
        for (a, b) in r0.iter().zip(&r1) {
            prop_assert!((a.unwrap() - b.unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn endstate_on_full_row_rank_is_fully_accurate(seed in 0u64..1000) {
        // four-letter alphabet and long words give more cues than rows
        let t = random_task(seed, 8, &['a', 'b', 'c', 'd'], 4, 7, 5, 10);
        let f = solve_endstate(&t.c, t.s.values(), 0.0).unwrap();
        let pred = predict_semantics(&t.c, &f).unwrap();
        if f.metadata().rank.is_none_or(|r| r == t.c.rows()) {
            prop_assert_eq!(type_accuracy(&pred, &t.s).unwrap(), 1.0);
        }
    }

    #[test]
    fn rescorla_wagner_moves_toward_target(
        history in prop::collection::vec(prop::collection::vec(0usize..8, 1..4), 0..30),
        utt in prop::collection::vec(0usize..8, 1..4),
        lambda in 0.001f64..0.6,
    ) {
        let name = |i: &usize| format!("w{i}");
        let mut net = CooccurrenceNetwork::new(lambda).unwrap();
        for h in &history {
            let words: Vec<String> = h.iter().map(name).collect();
            net.update(&words).unwrap();
        }
        let words: Vec<String> = utt.iter().map(name).collect();
        let mut cues = words.clone();
        cues.sort();
        cues.dedup();
        let activation = |net: &CooccurrenceNetwork, o: &str| cues.iter().map(|c| net.weight(c, o)).sum::<f64>();
        let outcomes: Vec<String> = (0..8).map(|i| name(&i)).collect();
        let before: Vec<f64> = outcomes.iter().map(|o| activation(&net, o)).collect();
        net.update(&words).unwrap();
        for (o, a0) in outcomes.iter().zip(before) {
            let target = if cues.contains(o) { 1.0 } else { 0.0 };
            let a1 = activation(&net, o);
            if (a0 - target).abs() > 1e-9 {
                prop_assert!((a1 - target).abs() < (a0 - target).abs(), "{}: {} -> {}", o, a0, a1);
            }
        }
    }

    #[test]
    fn rescorla_wagner_sparse_matches_dense(utts in prop::collection::vec(prop::collection::vec(0usize..10, 1..5), 1..80)) {
        let mut sparse = CooccurrenceNetwork::new(0.07).unwrap();
        let mut dense = DenseRw::new(0.07);
        for u in &utts {
            let words: Vec<String> = u.iter().map(|i| format!("x{i}")).collect();
            sparse.update(&words).unwrap();
            dense.update(&words);
        }
        for a in sparse.words() {
            for b in sparse.words() {
                prop_assert_eq!(sparse.weight(a, b).to_bits(), dense.weight(a, b).to_bits());
            }
        }
    }

    #[test]
    fn ncount_is_symmetric(words in prop::collection::vec("[abc]{2,4}", 2..100)) {
        let index = NeighborIndex::new(words.clone());
        for a in &words {
            prop_assert_eq!(index.ncount(a), brute_ncount(a, &words));
            for b in &words {
                if a.chars().count() == b.chars().count() {
                    prop_assert_eq!(
                        brute_ncount(a, std::slice::from_ref(b)),
                        brute_ncount(b, std::slice::from_ref(a))
                    );
                }
            }
        }
    }

    #[test]
    fn paradigm_size_ignores_order_and_repeats(mut pairs in prop::collection::vec(("[ab]{1,2}", "[a-d]{1,3}"), 1..30), extra in 0usize..30) {
        let render = |p: &[(String, String)]| p.iter().map(|(l, f)| format!("{l}\t{f}\n")).collect::<String>();
        let a = LemmaFormTable::from_reader(render(&pairs).as_bytes(), label()).unwrap();
        let dup = pairs[extra % pairs.len()].clone();
        pairs.push(dup);
        pairs.reverse();
        let b = LemmaFormTable::from_reader(render(&pairs).as_bytes(), label()).unwrap();
        for lemma in a.lemmas() {
            prop_assert_eq!(paradigm_size(lemma, &a), paradigm_size(lemma, &b));
        }
    }

    #[test]
    fn transforms_are_strictly_monotone(x in 1u64..1_000_000, y in 1u64..1_000_000) {
        prop_assume!(x < y);
        let (tx, ty) = (
            transform_predictors(x, x as usize, x as usize).unwrap(),
            transform_predictors(y, y as usize, y as usize).unwrap(),
        );
        prop_assert!(tx.log_frequency < ty.log_frequency);
        prop_assert!(tx.paradigm_size_sqrt < ty.paradigm_size_sqrt);
        prop_assert!(tx.ncount_log < ty.ncount_log);
        let (cx, cy) = (x as f64 / 1e6, y as f64 / 1e6);
        prop_assert!(log_transform_cind(cx, 1e-9).unwrap() < log_transform_cind(cy, 1e-9).unwrap());
    }
}

#[test]
fn ncount_and_transforms_at_zero() {
    let t = transform_predictors(1, 0, 0).unwrap();
    assert_eq!((t.log_frequency, t.paradigm_size_sqrt, t.ncount_log), (0.0, 0.0, 0.0));
    assert!(transform_predictors(0, 0, 0).is_err());
}

#[test]
fn cind_single_pass_is_deterministic() {
    let corpus = "a b c\nb c\n\nc d a a\nd\n".repeat(20);
    let run = || {
        let mut net = CooccurrenceNetwork::new(0.01).unwrap();
        lexilearn::cind::train_cind(
            &mut net,
            lexilearn::lexicon::UtteranceStream::new(corpus.as_bytes(), "<c>", true),
        )
        .unwrap();
        let mut out = Vec::new();
        net.write_triplets(&mut out).unwrap();
        out
    };
    assert_eq!(run(), run());
}

fn toy_network() -> (Task, DeepMap) {
    let t = fiddl_toy();
    let schedule = expand_token_schedule(&t.freq, &t.words, FIDDL_TOY_SCALE, FIDDL_TOY_SEED).unwrap();
    let config = FiddlConfig {
        hidden: FIDDL_TOY_HIDDEN,
        rate: FIDDL_TOY_RATE,
        batch: FIDDL_TOY_BATCH,
        ..FiddlConfig::new(FIDDL_TOY_EPOCHS, FIDDL_TOY_SEED)
    };
    let net = train_fiddl(&t.c, t.s.values(), &schedule, &config).unwrap();
    (t, net)
}

#[test]
fn fiddl_loss_trends_down() {
    let (_, net) = toy_network();
    let losses = net.epoch_losses();
    let q = losses.len() / 4;
    let first: f64 = losses[..q].iter().sum::<f64>() / q as f64;
    let last: f64 = losses[losses.len() - q..].iter().sum::<f64>() / q as f64;
    assert!(last <= first, "last quarter {last} above first quarter {first}");
}

#[test]
fn gradient_check_holds_for_every_group() {
    let (t, trained) = toy_network();
    let fresh = DeepMap::init(7, 3, &FiddlConfig { hidden: 4, ..FiddlConfig::new(0, 5) }).unwrap();
    let check = finite_difference_check(&fresh, &[0, 3, 6], &[0.5, -0.25, 1.5], 1e-5, 100, 2).unwrap();
    assert!(check.per_group.iter().all(|g| g.is_some_and(|e| e <= 1e-4)), "{check:?}");

    let row = t.c.row(3).to_vec();
    let check = finite_difference_check(&trained, &row, t.s.row(3), 1e-5, 300, 9).unwrap();
    for (name, err) in lexilearn::deep::GROUP_NAMES.iter().zip(check.per_group) {
        if let Some(e) = err {
            assert!(e <= 1e-4, "{name}: {e}");
        }
    }
}

#[test]
fn semantic_rows_must_vary() {
    let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 3.0]]).unwrap();
    assert!(SemanticMatrix::new(m, strings(&["a", "b"])).is_err());
}
