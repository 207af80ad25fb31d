mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstkit::crf::{edus_to_labels, labels_to_edus, Boundary};
use rstkit::decode::{decode, oracle_provider, DecodeConfig};
use rstkit::eval::{end_to_end_eval, parseval, segmentation_f1, Metric, ParsevalCounts};
use rstkit::{DocumentRecord, Language, RstTree, Span, Split, Token};

#[test]
fn fast_matcher_equals_all_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let inv = inventory();
    let mut total = ParsevalCounts::default();
    for _ in 0..300 {
        let n = rng.gen_range(1..=30);
        let edus = random_edus(&mut rng, n, 3);
        let gold = RstTree::build(&random_desc(&mut rng, 0, n, &inv), &edus).unwrap();
        let pred = RstTree::build(&random_desc(&mut rng, 0, n, &inv), &edus).unwrap();
        let c = parseval(&gold, &pred).unwrap();
        assert_eq!(c.matched, all_pairs_matches(&gold, &pred));
        assert_eq!(c.gold, 2 * (n - 1));
        for m in Metric::ALL {
            assert!(c.matched(Metric::Full) <= c.matched(m));
        }
        total += c;
    }
    // micro scores come from summed counts
    let f = total.score(Metric::S);
    assert_eq!(f.precision, 100.0 * total.matched[0] as f64 / total.predicted as f64);
}

#[test]
fn constituent_enumeration_matches_hand_rules() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let inv = inventory();
    for _ in 0..200 {
        let n = rng.gen_range(1..=15);
        let t = random_tree(&mut rng, n, &inv);
        let mut a = t.constituents();
        let mut b = constituents_by_hand(&t);
        let key = |c: &rstkit::Constituent| (c.span.first, c.span.last);
        a.sort_by_key(key);
        b.sort_by_key(key);
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * n - 2);
    }
}

fn doc_for(tree: &RstTree, id: &str) -> DocumentRecord {
    let n = tree.tokens().last + 1;
    DocumentRecord {
        id: id.into(),
        genre: "g".into(),
        language: Language::En,
        tokens: (0..n).map(|i| Token { text: format!("t{i}"), char_start: 3 * i, index: i }).collect(),
        edus: tree.edu_spans(),
        tree: Some(tree.clone()),
        sentence_boundaries: None,
        split: Split::Test,
    }
}

/// Removes one boundary (merging two EDUs) and decodes with the oracle of a
/// gold-shaped tree over the merged EDUs.
#[test]
fn gold_edus_score_at_least_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let inv = inventory();
    for _ in 0..200 {
        let n = rng.gen_range(3..=12);
        let gold = random_tree(&mut rng, n, &inv);
        let doc = doc_for(&gold, "d");
        let mut boundaries = edus_to_labels(&doc.edus, doc.tokens.len());
        let starts: Vec<usize> = doc.edus.iter().skip(1).map(|e| e.first).collect();
        boundaries[starts[rng.gen_range(0..starts.len())]] = Boundary::I;
        let pred_edus = labels_to_edus(&boundaries);
        let pred_tree = RstTree::build(&random_desc(&mut rng, 0, pred_edus.len(), &inv), &pred_edus).unwrap();
        let (seg, e2e) = end_to_end_eval(&doc, &pred_edus, &pred_tree).unwrap();
        assert_eq!((seg.matched, seg.gold, seg.predicted), (n - 2, n - 1, n - 2));

        let oracle = oracle_provider(&gold, &inv).unwrap();
        let on_gold = parseval(&gold, &decode(&doc.edus, &oracle, &DecodeConfig::greedy(inv.clone())).unwrap()).unwrap();
        assert!(e2e.matched(Metric::S) < on_gold.matched(Metric::S));
        for m in Metric::ALL {
            assert!(e2e.score(m).f1 <= on_gold.score(m).f1);
        }
    }
}

#[test]
fn segmentation_counts_by_set_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..200 {
        let n = rng.gen_range(1..=40);
        let a: Vec<Boundary> = (0..n).map(|_| if rng.gen_bool(0.3) { Boundary::B } else { Boundary::I }).collect();
        let b: Vec<Boundary> = (0..n).map(|_| if rng.gen_bool(0.3) { Boundary::B } else { Boundary::I }).collect();
        let c = segmentation_f1(&labels_to_edus(&a), &labels_to_edus(&b), n).unwrap();
        let both = (1..n).filter(|&t| a[t] == Boundary::B && b[t] == Boundary::B).count();
        let ga = (1..n).filter(|&t| a[t] == Boundary::B).count();
        let pb = (1..n).filter(|&t| b[t] == Boundary::B).count();
        assert_eq!((c.matched, c.gold, c.predicted), (both, ga, pb));
    }
    let single = vec![Span { first: 0, last: 9 }];
    let gold = vec![Span { first: 0, last: 4 }, Span { first: 5, last: 9 }];
    let c = segmentation_f1(&gold, &single, 10).unwrap();
    assert_eq!((c.score().recall, c.score().f1), (0.0, 0.0));
}
