mod common;

use std::collections::HashMap;

use agt_core::fetcher::{max_admissions_in_window, simulate_throughput, EventKind, FetchPolicy, MICROS};
use agt_core::sim::{
    events_from_posts, nts_like_world, simulate, simulate_world, FetchMode, SimConfig, SimError, SimEvent,
    SyntheticWorld, UserKind, WorldConfig,
};
use agt_core::tweetio::write_labeled;
use agt_core::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-day (tweets, new fetches, profile tweets) under instantaneous fetching.
fn oracle(events: &[SimEvent], n: u32) -> HashMap<i64, (u64, u64, u64)> {
    let mut sorted = events.to_vec();
    sorted.sort();
    let first_day = sorted[0].at.div_euclid(86_400);
    let mut seen: HashMap<u64, u32> = HashMap::new();
    let mut days: HashMap<i64, (u64, u64, u64)> = HashMap::new();
    for e in &sorted {
        let c = seen.entry(e.user).or_default();
        *c += 1;
        let row = days.entry(e.at.div_euclid(86_400) - first_day).or_default();
        row.0 += 1;
        if *c == n {
            row.1 += 1;
        }
        if *c > n {
            row.2 += 1;
        }
    }
    days
}

#[test]
fn instantaneous_replay_matches_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let events: Vec<SimEvent> = (0..rng.random_range(1..300))
            .map(|_| SimEvent { at: rng.random_range(1_000_000..1_000_000 + 10 * 86_400), user: rng.random_range(0..40) })
            .collect();
        let cfg = SimConfig { thresholds: vec![1, 2, 3, 5], ..SimConfig::default() };
        let r = simulate(&events, &cfg).unwrap();
        for &n in &cfg.thresholds {
            let want = oracle(&events, n);
            let rows: Vec<_> = r.days_for(n).collect();
            assert_eq!(rows.len() as u32, r.days);
            for row in rows {
                let (t, f, p) = want.get(&(row.day as i64)).copied().unwrap_or_default();
                assert_eq!((row.tweets, row.new_users, row.profile_tweets), (t, f, p), "N={n} day {}", row.day);
                assert_eq!(row.profiles_completed, row.new_users);
                assert_eq!(row.backlog, 0);
            }
        }
    }
}

#[test]
fn third_tweet_triggers_the_fetch_when_n_is_three() {
    let at = |k: i64| 1_483_228_800 + k * 60;
    let mut events = vec![SimEvent { at: at(0), user: 1 }, SimEvent { at: at(1), user: 1 }];
    let cfg = SimConfig { thresholds: vec![3], ..SimConfig::default() };
    let s = simulate(&events, &cfg).unwrap().summaries[0].clone();
    assert_eq!((s.fetches, s.profile_tweets), (0, 0));

    events.push(SimEvent { at: at(2), user: 1 });
    let s = simulate(&events, &cfg).unwrap().summaries[0].clone();
    assert_eq!((s.fetches, s.profile_tweets, s.no_profile_tweets), (1, 0, 3));

    events.push(SimEvent { at: at(3), user: 1 });
    let s = simulate(&events, &cfg).unwrap().summaries[0].clone();
    assert_eq!((s.fetches, s.profile_tweets, s.no_profile_tweets), (1, 1, 3));
}

#[test]
fn empty_stream_and_bad_thresholds_are_errors() {
    assert!(matches!(simulate(&[], &SimConfig::default()), Err(SimError::EmptyStream)));
    let e = [SimEvent { at: 0, user: 1 }];
    assert!(simulate(&e, &SimConfig { thresholds: vec![0], ..SimConfig::default() }).is_err());
    assert!(simulate(&e, &SimConfig { thresholds: vec![], ..SimConfig::default() }).is_err());
}

#[test]
fn horizon_limits_the_replay() {
    let world = SyntheticWorld::new(WorldConfig { users: 100, days: 5, ..WorldConfig::default() }).unwrap();
    let full = simulate_world(&world, &SimConfig::default()).unwrap();
    let cut = simulate_world(&world, &SimConfig { horizon_days: Some(2), ..SimConfig::default() }).unwrap();
    assert_eq!(full.days, 5);
    assert_eq!(cut.days, 2);
    let first_two: u64 = full.days_for(1).take(2).map(|r| r.tweets).sum();
    assert_eq!(cut.total_tweets, first_two);
}

#[test]
fn regenerated_sample_is_byte_identical_to_the_fixture() {
    let cfg = common::fixture_world();
    let world = SyntheticWorld::new(cfg.clone()).unwrap();
    let mut out = Vec::new();
    write_labeled(&mut out, &world.sample(10_000, cfg.seed)).unwrap();
    let fixture = std::fs::read(common::fixtures().join("synthetic_corpus.jsonl")).unwrap();
    assert!(out == fixture, "fixture differs from a fresh generation");
}

#[test]
fn same_seed_same_stream_other_seed_other_stream() {
    let cfg = WorldConfig { users: 150, days: 3, ..WorldConfig::default() };
    let a = SyntheticWorld::new(cfg.clone()).unwrap().stream();
    let b = SyntheticWorld::new(cfg.clone()).unwrap().stream();
    let c = SyntheticWorld::new(WorldConfig { seed: 9, ..cfg }).unwrap().stream();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn no_bots_means_no_bot_tweets() {
    let world = SyntheticWorld::new(WorldConfig { bot_fraction: 0.0, users: 400, days: 4, ..WorldConfig::default() })
        .unwrap();
    assert!(world.users().iter().all(|u| !matches!(u.kind, UserKind::Bot { .. })));
    // dlvr.it is left out: news accounts post through it too
    let bot_sources = ["WeatherLink Station", "Trendsmap Alerting", "SpotifyNowPlaying", "LiikenneBot", "twittbot.net"];
    assert!(world.stream().iter().all(|t| !bot_sources.contains(&t.tweet.source.as_str())));
}

#[test]
fn default_world_agt_share_is_near_the_observed_rate() {
    for seed in [1, 2, 3] {
        let world = SyntheticWorld::new(WorldConfig { seed, ..WorldConfig::default() }).unwrap();
        let s = world.stream();
        let agt = 100.0 * s.iter().filter(|t| t.label == Label::Agt).count() as f64 / s.len() as f64;
        assert!((agt - 22.5).abs() <= 3.0, "seed {seed}: {agt:.2}% AGT");
    }
}

#[test]
fn timelines_are_newest_first_and_respect_max_id() {
    let world = SyntheticWorld::new(WorldConfig { users: 50, days: 6, ..WorldConfig::default() }).unwrap();
    let as_of = world.end() - 1;
    for u in world.users().iter().take(20) {
        let page = world.timeline(u.id, as_of, 200, None);
        assert!(page.windows(2).all(|w| w[0].id > w[1].id));
        if let Some(last) = page.last() {
            let next = world.timeline(u.id, as_of, 200, Some(last.id));
            assert!(next.iter().all(|t| t.id < last.id));
        }
    }
}

#[test]
fn regional_stream_coverage_drops_a_few_points_from_n1_to_n3() {
    let world = SyntheticWorld::new(nts_like_world(agt_core::DEFAULT_SEED)).unwrap();
    let r = simulate_world(&world, &SimConfig::default()).unwrap();
    let (c1, c3) = (r.summary(1).unwrap().coverage, r.summary(3).unwrap().coverage);
    assert!(c1 > c3, "N=1 {c1:.2}% vs N=3 {c3:.2}%");
    assert!((0.5..=8.0).contains(&(c1 - c3)), "N=1 {c1:.2}% vs N=3 {c3:.2}%");
    assert!(r.summary(3).unwrap().fetches < r.summary(1).unwrap().fetches);
}

#[test]
fn rate_limited_replay_never_beats_the_scheduler() {
    let policy = FetchPolicy::full_timeline();
    let log = simulate_throughput(&policy, 48.0 * 3600.0, 11, true);
    let profiles: Vec<u64> = log.events.iter().filter(|e| e.kind == EventKind::Profile).map(|e| e.at).collect();
    let cap = max_admissions_in_window(&profiles, (86_400.0 * MICROS) as u64) as u64;

    // far more new users on day one than a day of full-timeline fetching can serve
    let world =
        SyntheticWorld::new(WorldConfig { users: 9_000, days: 3, human_rate_median: 1.0, ..WorldConfig::default() })
            .unwrap();
    let events = events_from_posts(&world.posts());
    let cfg = SimConfig { thresholds: vec![1], fetch: FetchMode::RateLimited(policy), ..SimConfig::default() };
    let r = simulate(&events, &cfg).unwrap();
    let days: Vec<_> = r.days_for(1).collect();
    assert!(days[0].backlog > 0, "day one should leave a backlog");
    for d in &days {
        assert!(d.profiles_completed <= cap, "day {}: {} > {cap}", d.day, d.profiles_completed);
    }
    let instant = simulate(&events, &SimConfig { thresholds: vec![1], ..SimConfig::default() }).unwrap();
    assert!(r.summary(1).unwrap().profile_tweets < instant.summary(1).unwrap().profile_tweets);
}

#[test]
fn invalid_world_configs_are_rejected() {
    assert!(SyntheticWorld::new(WorldConfig { bot_fraction: 1.5, ..WorldConfig::default() }).is_err());
    assert!(SyntheticWorld::new(WorldConfig { days: 0, ..WorldConfig::default() }).is_err());
    assert!(SyntheticWorld::new(WorldConfig { start: "yesterday".into(), ..WorldConfig::default() }).is_err());
}
