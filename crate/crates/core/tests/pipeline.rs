mod common;

use common::fixture;
use rstkit::canonical::{read_canonical, write_canonical};
use rstkit::eval::corpus_stats;
use rstkit::preprocess::{genre_from_file_name, load_rs3_dir, preprocess_corpus, DocMeta, PreprocessError, PreprocessOptions, RemapTable};
use rstkit::{Corpus, Language, Split};

fn meta(language: Language) -> impl FnMut(&str) -> DocMeta {
    move |stem| DocMeta { genre: genre_from_file_name(stem).unwrap_or_else(|| "unknown".into()), language, split: Split::Train }
}

fn rrt() -> Corpus {
    let docs = load_rs3_dir(&fixture("rrt_forest"), meta(Language::Ru)).unwrap();
    Corpus::new("rrt", docs).unwrap()
}

#[test]
fn forest_fixture_counts() {
    let corpus = rrt();
    assert_eq!(corpus.len(), 117);
    assert!(corpus.documents.iter().any(|d| d.id == "news_01"));
    assert!(corpus.documents.iter().any(|d| d.id == "blogs_02_part_8"));

    let options = PreprocessOptions { remap: Some(RemapTable::rrt_default()), drop_single_edu: true };
    let (out, report) = preprocess_corpus(corpus, &options).unwrap();
    assert_eq!((report.documents_in, report.trees_extracted, report.single_edu_dropped, report.documents_out), (10, 117, 23, 94));
    assert_eq!(report.trees_per_document(), 11.7);
    let small = out.documents.iter().filter(|d| (2..=4).contains(&d.edus.len())).count();
    assert_eq!(small, 12);
    assert_eq!(report.histogram_after.len(), 24);
    let stats = corpus_stats(&out.documents).unwrap();
    assert_eq!((stats.classes, stats.docs, stats.trees, stats.genres), (24, 10, 94, 2));
    // every retired name is gone after remapping
    for old in ["antithesis", "cause", "effect", "motivation", "evaluation", "interpretation", "restatement", "background_NS"] {
        assert!(!report.histogram_after.keys().any(|k| k.starts_with(&format!("{old}_")) || k == old), "{old} survived");
    }
    let rules_applied: usize = report.rule_counts.iter().map(|(_, n)| n).sum();
    let changed: usize = report.histogram_before.iter().filter(|(k, _)| !report.histogram_after.contains_key(*k)).map(|(_, n)| n).sum();
    assert!(rules_applied >= changed);
}

#[test]
fn canonical_file_round_trip() {
    let corpus = rrt();
    let mut buf = Vec::new();
    write_canonical(&mut buf, &corpus.documents).unwrap();
    let back = read_canonical("rrt", buf.as_slice()).unwrap();
    assert_eq!(back.documents, corpus.documents);
    let mut again = Vec::new();
    write_canonical(&mut again, &back.documents).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn gum_like_documents_are_single_trees() {
    let docs = load_rs3_dir(&fixture("gum_like"), meta(Language::En)).unwrap();
    let ids: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["GUM_news_alpha", "GUM_news_gamma", "GUM_speech_beta"]);
    let edus: Vec<usize> = docs.iter().map(|d| d.edus.len()).collect();
    assert_eq!(edus, [9, 12, 6]);
    let stats = corpus_stats(&docs).unwrap();
    assert_eq!((stats.docs, stats.genres, stats.edus, stats.relation_pairs), (3, 2, 27, 24));
}

#[test]
fn broken_files_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.rs3"), "<rst><body><segment id=\"1\" parent=\"9\" relname=\"x\">a</segment></body></rst>").unwrap();
    let err = load_rs3_dir(dir.path(), meta(Language::En)).unwrap_err();
    assert!(matches!(err, PreprocessError::InFile { .. }));
    assert!(err.to_string().contains("bad.rs3"));
    assert!(load_rs3_dir(&dir.path().join("missing"), meta(Language::En)).is_err());
}
