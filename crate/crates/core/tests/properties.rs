mod common;

use std::collections::{BTreeSet, HashMap};

use agt_core::eval::{make_fold_plan, metrics, ConfusionMatrix};
use agt_core::features::stats::{chi_squared, chi_squared_sf, entropy, HOURS, SIXTY};
use agt_core::features::{max_entropy, timeline_properties, ChiSquaredInput, SourceTaxonomy};
use agt_core::fetcher::{max_admissions_in_window, FetchQueue};
use agt_core::learners::{fit_nb, fit_rf, Attribute, Dataset, FeatureSchema, ForestConfig, NbConfig};
use agt_core::sim::{simulate, SimConfig, SimEvent};
use agt_core::textprep::{normalize, Vocabulary, WordSet};
use agt_core::tweetio::{parse_labeled_record, Entities};
use agt_core::{Label, LabeledTweet};
use proptest::prelude::*;

fn events() -> impl Strategy<Value = Vec<SimEvent>> {
    prop::collection::vec((0i64..20 * 86_400, 0u64..30), 1..200)
        .prop_map(|v| v.into_iter().map(|(at, user)| SimEvent { at, user }).collect())
}

proptest! {
    #[test]
    fn entropy_is_bounded(samples in prop::collection::vec(0u32..60, 1..300)) {
        let h = entropy(&samples, SIXTY).unwrap();
        prop_assert!((0.0..=max_entropy() + 1e-12).contains(&h));
        let hours: Vec<u32> = samples.iter().map(|s| s % 15).collect();
        prop_assert!(entropy(&hours, HOURS).unwrap() <= max_entropy() + 1e-12);
    }

    #[test]
    fn chi_squared_p_value_is_a_probability(samples in prop::collection::vec(0u32..60, 1..300)) {
        let c = chi_squared(&samples, SIXTY).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.p_value));
        prop_assert!(c.statistic >= 0.0);
    }

    #[test]
    fn chi_squared_tail_decreases(a in 0.0f64..200.0, b in 0.0f64..200.0, df in 1u32..40) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(chi_squared_sf(hi, df as f64) <= chi_squared_sf(lo, df as f64) + 1e-15);
    }

    #[test]
    fn f_measure_lies_between_precision_and_recall(tp in 1u64..5000, fn_ in 0u64..5000, fp in 0u64..5000, tn in 0u64..5000) {
        let m = metrics(&ConfusionMatrix::new(tp, fn_, fp, tn)).unwrap();
        prop_assert!(m.f_measure >= m.precision.min(m.recall) - 1e-12);
        prop_assert!(m.f_measure <= m.precision.max(m.recall) + 1e-12);
    }

    #[test]
    fn max_window_matches_brute_force(mut times in prop::collection::vec(0u64..10_000, 1..120), w in 1u64..3_000) {
        times.sort_unstable();
        let brute = times.iter().map(|&t| times.iter().filter(|&&x| x >= t && x < t + w).count()).max().unwrap();
        prop_assert_eq!(max_admissions_in_window(&times, w), brute);
    }

    #[test]
    fn queue_pops_by_priority_then_arrival(items in prop::collection::vec((0u64..20, 0u32..5), 1..60)) {
        let q = FetchQueue::unbounded();
        let mut best: HashMap<u64, (u32, usize)> = HashMap::new();
        for (i, &(user, pri)) in items.iter().enumerate() {
            q.enqueue(user, pri).unwrap();
            let e = best.entry(user).or_insert((pri, i));
            e.0 = e.0.max(pri);
        }
        let mut want: Vec<(u64, (u32, usize))> = best.into_iter().collect();
        want.sort_by_key(|&(_, (p, seq))| (std::cmp::Reverse(p), seq));
        let mut got = Vec::new();
        while let Some((u, p)) = q.try_pop() {
            got.push((u, p));
        }
        let want: Vec<(u64, u32)> = want.into_iter().map(|(u, (p, _))| (u, p)).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn replay_accounts_for_every_tweet(ev in events(), n in 1u32..6) {
        let r = simulate(&ev, &SimConfig { thresholds: vec![n], ..SimConfig::default() }).unwrap();
        let s = r.summary(n).unwrap();
        prop_assert_eq!(s.profile_tweets + s.no_profile_tweets, ev.len() as u64);
        prop_assert_eq!(r.days_for(n).map(|d| d.tweets).sum::<u64>(), ev.len() as u64);
        prop_assert!((0.0..=100.0).contains(&s.coverage));
        prop_assert!(s.fetches <= r.total_users);
    }

    #[test]
    fn source_ratios_sum_to_one(srcs in prop::collection::vec(0usize..5, 1..80)) {
        let names = ["Twitter for iPhone", "IFTTT", "Twitter Web Client", "dlvr.it", "some unknown app"];
        let tl: Vec<_> = srcs.iter().enumerate()
            .map(|(i, &s)| common::tweet(5, 1_483_228_800 + 97 * i as i64, names[s], "x"))
            .collect();
        let p = timeline_properties(&tl, &SourceTaxonomy::builtin(), ChiSquaredInput::PostingTime).unwrap();
        prop_assert!((p.source_ratios.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vocabulary_encoding_is_binary_and_sized(docs in prop::collection::vec("[a-e][a-e ]{0,29}", 1..40), max in 1usize..20) {
        let sets: Vec<WordSet> = docs.iter().map(|d| normalize(d, &Entities::default())).collect();
        let v = Vocabulary::build(&sets, max, 1).unwrap();
        prop_assert!(v.size() <= max);
        let blank = [normalize("   ", &Entities::default())];
        prop_assert!(Vocabulary::build(&blank, max, 1).is_err());
        let mut text = Vec::new();
        v.write_to(&mut text).unwrap();
        prop_assert_eq!(&Vocabulary::parse(std::str::from_utf8(&text).unwrap()).unwrap(), &v);
        for s in &sets {
            let x = v.encode(s);
            prop_assert_eq!(x.len(), v.size());
            prop_assert!(x.iter().all(|&b| b == 0.0 || b == 1.0));
        }
    }

    #[test]
    fn tweet_records_round_trip(text in "[a-zA-Z0-9 #@.]{1,60}", ts in 1_300_000_000i64..1_700_000_000, user in 1u64..1_000_000) {
        prop_assume!(!text.trim().is_empty());
        let t = common::tweet(user, ts, "Twitter for Android", &text);
        let l = LabeledTweet { tweet: t.clone(), label: Label::Hgt };
        let (back, label) = parse_labeled_record(&l.to_record()).unwrap();
        prop_assert_eq!(back, t);
        prop_assert_eq!(label, Some(Label::Hgt));
    }

    #[test]
    fn learner_probabilities_are_probabilities(rows in prop::collection::vec((-50.0f64..50.0, any::<bool>(), any::<bool>()), 4..60)) {
        let schema = FeatureSchema::new(vec![Attribute::numeric("x"), Attribute::binary("b")]).unwrap();
        let mut d = Dataset::new(schema);
        for (i, &(x, b, agt)) in rows.iter().enumerate() {
            // keep both classes present
            let label = if i < 2 { if i == 0 { Label::Agt } else { Label::Hgt } } else if agt { Label::Agt } else { Label::Hgt };
            d.push(vec![x, b as u8 as f64], label).unwrap();
        }
        let nb = fit_nb(&d, &NbConfig::default()).unwrap();
        let rf = fit_rf(&d, &ForestConfig { n_trees: 5, ..ForestConfig::default() }).unwrap();
        for &(x, b, _) in &rows {
            for m in [&nb, &rf] {
                let p = m.predict_proba(&[x, b as u8 as f64]).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn folds_partition_users(users in prop::collection::btree_set(0u64..10_000, 10..200), k in 2usize..10) {
        let tweets: Vec<LabeledTweet> = users.iter().enumerate()
            .map(|(i, &u)| LabeledTweet {
                tweet: common::tweet(u, 1_483_228_800 + i as i64, "web", "x"),
                label: if i % 2 == 0 { Label::Agt } else { Label::Hgt },
            })
            .collect();
        let plan = make_fold_plan(&tweets, k, 1).unwrap();
        prop_assert_eq!(plan.k(), k);
        let mut all = BTreeSet::new();
        for f in &plan.folds {
            for u in f {
                prop_assert!(all.insert(*u));
            }
        }
        prop_assert_eq!(all, users);
    }
}
