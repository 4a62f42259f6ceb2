use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use agt_core::eval::{cfs_select, cross_validate, make_fold_plan, CfsConfig};
use agt_core::features::TimelineAttr;
use agt_core::fetcher::{
    max_admissions_in_window, simulate_throughput, to_micros, write_event_log, FetchPolicy, FetchQueue, Fetcher,
    ProfileBuilder, ReplaySource, TimelineSource,
};
use agt_core::pipeline::{
    prefetch_profiles, profile_dataset, split_halves, train_bundle, BundleTrainer, ClassifierBundle, Pipeline,
    Verdict, VerdictFormat,
};
use agt_core::profiles::{ProfileStore, StoreConfig};
use agt_core::sim::{
    events_from_posts, events_from_tweets, simulate, FetchMode, SimConfig, SyntheticWorld, WorldConfig, WorldSource,
};
use agt_core::tweetio::{parse_labeled_record, read_labeled_file, read_tweets, write_labeled, Strictness, Tweet};
use agt_core::{Label, LabeledTweet};
use anyhow::{bail, Context, Result};

use crate::config::{load_world, require_dir, require_file, require_output, FetchChoice, RunConfig};
use crate::{Cli, Command, ModeArg, TimelineArgs};

const QUEUE_CAP: usize = 1_000_000;

pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { world, sample, seed, output } => generate(&cfg, world.as_deref(), sample, seed, &output),
        Command::Train { input, model_dir, source, learner, seed } => {
            require_file(&input, "input")?;
            let source = timeline_source(&cfg, &source)?;
            let tc = cfg.train_config(learner, seed)?;
            let labeled = read_labeled_file(&input, Strictness::Strict).context("reading training input")?;
            let bundle = train_bundle(&labeled, source.as_ref(), &tc)?;
            std::fs::create_dir_all(&model_dir).with_context(|| format!("creating {}", model_dir.display()))?;
            bundle.save(&model_dir)?;
            let (a, b) = split_halves(&labeled, tc.seed);
            let agt = labeled.iter().filter(|l| l.label == Label::Agt).count();
            println!(
                "trained {} on {} tweets ({} AGT): text half {}, decision half {}, vocabulary {} tokens, {} timeline attributes",
                tc.learner,
                labeled.len(),
                agt,
                a.len(),
                b.len(),
                bundle.vocabulary.tokens().len(),
                tc.features.timeline_attrs.len()
            );
            println!("wrote {}", model_dir.display());
            Ok(())
        }
        Command::Classify {
            model_dir,
            input,
            output,
            format,
            fetch_threshold,
            source,
            prefetch,
            follow,
            idle_exit,
            lenient,
        } => {
            let opts = ClassifyOpts {
                fetch_threshold: fetch_threshold.or(cfg.fetch_threshold).unwrap_or(1),
                format: format.into(),
                prefetch,
                follow,
                idle_exit: idle_exit.map(Duration::from_secs_f64),
                strictness: if lenient { Strictness::Lenient } else { Strictness::Strict },
            };
            classify(&cfg, &model_dir, &input, output.as_deref(), &source, &opts)
        }
        Command::Evaluate { input, source, folds, learner, seed, output } => {
            require_file(&input, "input")?;
            if let Some(o) = &output {
                require_output(o)?;
            }
            let source = timeline_source(&cfg, &source)?;
            let tc = cfg.train_config(learner, seed)?;
            let labeled = read_labeled_file(&input, Strictness::Strict).context("reading input")?;
            let k = folds.or(cfg.folds).unwrap_or(10);
            let plan = make_fold_plan(&labeled, k, tc.seed)?;
            let trainer = BundleTrainer { timelines: source, config: tc };
            let report = cross_validate(&labeled, &plan, &trainer)?;
            print!("{}", report.summary());
            if let Some(o) = output {
                report.write_csv(BufWriter::new(create(&o)?))?;
            }
            Ok(())
        }
        Command::SelectAttributes { input, source, learner, seed, output } => {
            require_file(&input, "input")?;
            if let Some(o) = &output {
                require_output(o)?;
            }
            let source = timeline_source(&cfg, &source)?;
            let tc = cfg.train_config(learner, seed)?;
            let labeled = read_labeled_file(&input, Strictness::Strict).context("reading input")?;
            let bundle = train_bundle(&labeled, source.as_ref(), &tc)?;
            let (_, b) = split_halves(&labeled, tc.seed);
            let half: Vec<LabeledTweet> = b.iter().map(|&i| labeled[i].clone()).collect();
            let data = profile_dataset(&bundle, &half, source.as_ref(), &TimelineAttr::ALL)?;
            let r = cfs_select(&data, &CfsConfig::default())?;
            println!("merit {:.4} after {} expansions", r.merit, r.expansions);
            for n in &r.names {
                println!("{n}");
            }
            if let Some(o) = output {
                let mut w = BufWriter::new(create(&o)?);
                for n in r.names.iter().filter(|n| TimelineAttr::parse(n).is_ok()) {
                    writeln!(w, "{n}")?;
                }
                w.flush()?;
            }
            Ok(())
        }
        Command::Simulate { input, world, thresholds, fetch, horizon_days, seed, output } => {
            let events = match (&input, &world) {
                (Some(i), _) => {
                    require_file(i, "input")?;
                    events_from_tweets(&read_tweets(i, Strictness::Strict).context("reading input")?)
                }
                (None, w) => {
                    let wc = world_config(&cfg, w.as_deref(), seed)?;
                    events_from_posts(&SyntheticWorld::new(wc)?.posts())
                }
            };
            if let Some(o) = &output {
                require_output(o)?;
            }
            let fetch = match fetch.or(cfg.simulate.fetch).unwrap_or(FetchChoice::Instantaneous) {
                FetchChoice::Instantaneous => FetchMode::Instantaneous,
                FetchChoice::Recent => FetchMode::RateLimited(FetchPolicy::recent_timeline()),
                FetchChoice::Full => FetchMode::RateLimited(FetchPolicy::full_timeline()),
                FetchChoice::Policy => FetchMode::RateLimited(cfg.fetch_policy()?),
            };
            let thresholds = if thresholds.is_empty() {
                cfg.simulate.thresholds.clone().unwrap_or_else(|| SimConfig::default().thresholds)
            } else {
                thresholds
            };
            let sc = SimConfig {
                thresholds,
                fetch,
                horizon_days: horizon_days.or(cfg.simulate.horizon_days),
                seed: cfg.seed(seed),
            };
            let report = simulate(&events, &sc)?;
            match output {
                Some(o) => report.write_csv(BufWriter::new(create(&o)?))?,
                None => report.write_csv(io::stdout().lock())?,
            }
            report.write_summary(io::stderr().lock())?;
            Ok(())
        }
        Command::Throughput { mode, hours, seed, log } => {
            if let Some(l) = &log {
                require_output(l)?;
            }
            let policy = match mode {
                ModeArg::Recent => FetchPolicy::recent_timeline(),
                ModeArg::Full => FetchPolicy::full_timeline(),
                ModeArg::Policy => cfg.fetch_policy()?,
            };
            if !(hours > 0.0) {
                bail!("--hours must be positive");
            }
            let r = simulate_throughput(&policy, hours * 3600.0, cfg.seed(seed), true);
            let admissions: Vec<u64> = r.admissions().collect();
            let window = r.burst_spans().into_iter().min().map(|s| s + policy.pause_micros());
            println!("{} profiles completed in {hours} h", r.profiles_completed);
            println!("{:.1} profiles per day", r.profiles_completed as f64 * 24.0 / hours);
            println!("{} requests admitted, {} completed, {} pauses", r.requests_admitted, r.requests_completed, r.pauses);
            if let Some(w) = window {
                println!("max admissions in a burst+pause window: {}", max_admissions_in_window(&admissions, w));
            }
            println!(
                "max admissions in a 900 s window: {}",
                max_admissions_in_window(&admissions, to_micros(agt_core::fetcher::API_WINDOW_SECS))
            );
            if let Some(l) = log {
                let mut w = BufWriter::new(create(&l)?);
                write_event_log(&mut w, &r.events)?;
                w.flush()?;
            }
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn world_config(cfg: &RunConfig, path: Option<&Path>, seed: Option<u64>) -> Result<WorldConfig> {
    let mut wc = match path {
        Some(p) => load_world(p)?,
        None => cfg.world.clone().unwrap_or_default(),
    };
    if let Some(s) = seed {
        wc.seed = s;
    }
    Ok(wc)
}

fn generate(cfg: &RunConfig, world: Option<&Path>, sample: Option<usize>, seed: Option<u64>, output: &Path) -> Result<()> {
    if let Some(w) = world {
        require_file(w, "world config")?;
    }
    require_output(output)?;
    let wc = world_config(cfg, world, seed)?;
    let w = SyntheticWorld::new(wc.clone())?;
    let tweets = match sample {
        Some(n) => w.sample(n, wc.seed),
        None => w.stream(),
    };
    let mut out = BufWriter::new(create(output)?);
    write_labeled(&mut out, &tweets)?;
    out.flush()?;
    let agt = tweets.iter().filter(|t| t.label == Label::Agt).count();
    let users: HashSet<_> = tweets.iter().map(|t| t.tweet.user_id).collect();
    println!(
        "wrote {} tweets from {} users ({} AGT, {:.1}%) to {}",
        tweets.len(),
        users.len(),
        agt,
        100.0 * agt as f64 / tweets.len().max(1) as f64,
        output.display()
    );
    Ok(())
}

/// Resolves the timeline source: `--timelines`, then `--world`, then the config's `[world]`.
fn timeline_source(cfg: &RunConfig, args: &TimelineArgs) -> Result<Arc<dyn TimelineSource>> {
    if let Some(p) = &args.timelines {
        require_file(p, "timelines")?;
        return Ok(Arc::new(ReplaySource::from_file(p).context("reading timelines")?));
    }
    let wc = match (&args.world, &cfg.world) {
        (Some(p), _) => {
            require_file(p, "world config")?;
            load_world(p)?
        }
        (None, Some(w)) => w.clone(),
        (None, None) => {
            log::warn!("no timeline source given; every user gets a one-tweet timeline");
            return Ok(Arc::new(ReplaySource::new(Vec::new())));
        }
    };
    Ok(Arc::new(WorldSource::at_end(Arc::new(SyntheticWorld::new(wc)?))))
}

struct ClassifyOpts {
    fetch_threshold: u32,
    format: VerdictFormat,
    prefetch: bool,
    follow: bool,
    idle_exit: Option<Duration>,
    strictness: Strictness,
}

fn classify(
    cfg: &RunConfig,
    model_dir: &Path,
    input: &Path,
    output: Option<&Path>,
    args: &TimelineArgs,
    opts: &ClassifyOpts,
) -> Result<()> {
    require_dir(model_dir, "model directory")?;
    require_file(input, "input")?;
    if let Some(o) = output {
        require_output(o)?;
    }
    let bundle = Arc::new(ClassifierBundle::load(model_dir)?);
    let have_source = args.timelines.is_some() || args.world.is_some() || cfg.world.is_some();
    let source = timeline_source(cfg, args)?;
    let store = Arc::new(ProfileStore::new(StoreConfig::default()));
    let queue = Arc::new(FetchQueue::new(QUEUE_CAP));
    let builder = ProfileBuilder::new(bundle.taxonomy.clone(), bundle.features.chi_squared_input);
    let policy = cfg.fetch_policy()?;
    // without a source nothing can be fetched, so every tweet takes the no-profile path
    let threshold = if have_source { opts.fetch_threshold } else { u32::MAX };
    let pipeline = Pipeline::new(bundle, store.clone(), queue.clone(), threshold);

    let mut out: Box<dyn Write> = match output {
        Some(o) => Box::new(BufWriter::new(create(o)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    if opts.format == VerdictFormat::Csv {
        writeln!(out, "{}", Verdict::CSV_HEADER)?;
    }
    let emit = |out: &mut dyn Write, v: &Verdict| -> io::Result<()> {
        match opts.format {
            VerdictFormat::Json => writeln!(out, "{}", v.to_json()),
            VerdictFormat::Csv => writeln!(out, "{}", v.to_csv()),
        }
    };

    let started = Instant::now();
    let mut n = 0u64;
    if opts.follow {
        let fetcher = have_source.then(|| {
            Fetcher::spawn(policy.clone(), queue.clone(), source.clone(), store.clone(), builder.clone())
        });
        follow_file(input, opts.idle_exit, opts.strictness, |t| {
            let v = pipeline.classify(&t);
            emit(&mut *out, &v)?;
            out.flush()?;
            n += 1;
            Ok(())
        })?;
        drop(fetcher);
    } else {
        let tweets = read_tweets(input, opts.strictness).context("reading input")?;
        if opts.prefetch && have_source {
            let users: Vec<_> = {
                let mut seen = HashSet::new();
                tweets.iter().map(|t| t.user_id).filter(|u| seen.insert(*u)).collect()
            };
            let now = tweets.iter().map(|t| t.created_at).max().unwrap_or_else(chrono::Utc::now);
            let k = prefetch_profiles(&store, source.as_ref(), &builder, &policy, users, now)?;
            log::info!("prefetched {k} profiles in {:.2?}", started.elapsed());
        }
        let fetcher = have_source.then(|| {
            Fetcher::spawn(policy.clone(), queue.clone(), source.clone(), store.clone(), builder.clone())
        });
        for t in &tweets {
            emit(&mut *out, &pipeline.classify(t))?;
            n += 1;
        }
        drop(fetcher);
    }
    out.flush()?;
    let (np, p) = pipeline.counts.get();
    eprintln!(
        "classified {n} tweets in {:.2?}: {np} no-profile, {p} profile, {} profiles cached",
        started.elapsed(),
        store.len()
    );
    Ok(())
}

/// Reads tweets from `path` as it grows. Stops after `idle_exit` without new lines, if set.
fn follow_file(
    path: &Path,
    idle_exit: Option<Duration>,
    strictness: Strictness,
    mut on_tweet: impl FnMut(Tweet) -> Result<()>,
) -> Result<()> {
    let mut reader = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut line = String::new();
    let mut last = Instant::now();
    let mut line_no = 0usize;
    loop {
        let got = reader.read_line(&mut line)?;
        if got == 0 || !line.ends_with('\n') {
            if idle_exit.is_some_and(|d| last.elapsed() >= d) {
                break;
            }
            thread::sleep(Duration::from_millis(50));
            continue;
        }
        last = Instant::now();
        line_no += 1;
        let text = std::mem::take(&mut line);
        if text.trim().is_empty() {
            continue;
        }
        match parse_labeled_record(text.trim_end()) {
            Ok((t, _)) => on_tweet(t)?,
            Err(e) => match strictness {
                Strictness::Strict => bail!("line {line_no}: {e}"),
                Strictness::Lenient => log::warn!("skipping line {line_no}: {e}"),
            },
        }
    }
    // a final line without a newline is still a record
    if !line.trim().is_empty() {
        if let Ok((t, _)) = parse_labeled_record(line.trim_end()) {
            on_tweet(t)?;
        }
    }
    Ok(())
}
