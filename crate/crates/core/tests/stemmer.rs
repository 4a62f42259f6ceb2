use agt_core::textprep::stem;

fn golden() -> Vec<(String, String)> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/stemmer_golden.tsv");
    std::fs::read_to_string(path)
        .expect("golden stems")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (w, s) = l.split_once('\t').expect("word<TAB>stem");
            (w.to_string(), s.to_string())
        })
        .collect()
}

#[test]
fn stems_match_reference_outputs() {
    let pairs = golden();
    assert!(pairs.len() >= 20);
    for (word, want) in &pairs {
        assert_eq!(&stem(word), want, "stem({word})");
    }
}

#[test]
fn stems_of_the_lexicon_are_fixed_points() {
    for (_, s) in golden() {
        assert_eq!(stem(&s), s);
    }
}
