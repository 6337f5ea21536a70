//! Dev tool: sweep seeds on a synthetic corpus and print mean NMI per
//! (model, threshold), plus model win counts. Useful when retuning the
//! generator defaults.
//!
//!     cargo run --release --example sweep -- [seeds] [bias] [topics_per_event] \
//!         [vocab] [tweets_lo-hi] [len_lo-hi] [cross_interest] [base_share]

use std::collections::BTreeMap;

use linkgauge::graph::ModelKind;
use linkgauge::pipeline::{run, PipelineConfig, DEFAULT_THRESHOLDS};
use linkgauge::synth::SynthConfig;
use linkgauge::Scope;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seeds: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(10);
    let bias: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.8);
    let topics_per_event: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let vocab_size: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(400);
    let span = |s: Option<&String>, default: (usize, usize)| -> (usize, usize) {
        s.and_then(|s| {
            let (a, b) = s.split_once('-')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })
        .unwrap_or(default)
    };
    let tweets_per_user = span(args.get(4), (3, 8));
    let tweet_len = span(args.get(5), (6, 12));
    let cross_interest_rate: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.35);
    let base_vocab_share: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let p_in: f64 = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(0.3);

    let synth = SynthConfig {
        n_users: 100,
        n_communities: 4,
        p_in,
        p_out: 0.02,
        community_vocab_bias: bias,
        topics_per_event,
        vocab_size,
        tweets_per_user,
        tweet_len,
        cross_interest_rate,
        base_vocab_share,
        ..SynthConfig::default()
    };
    println!("generator: {}", serde_json::to_string(&synth).unwrap());

    // (model, scope-kind, threshold) -> per-seed nmi_sym
    let mut series: BTreeMap<(ModelKind, bool, u64), Vec<f64>> = BTreeMap::new();
    for seed in 0..seeds {
        let cfg = PipelineConfig {
            synth: Some(SynthConfig { seed, ..synth.clone() }),
            topic_scopes: topics_per_event > 0,
            dump_partitions: false,
            seed,
            ..PipelineConfig::default()
        };
        let out = run(&cfg).expect("pipeline");
        // Mean over same-scope cells first so each seed contributes once.
        let mut cell: BTreeMap<(ModelKind, bool, u64), (f64, usize)> = BTreeMap::new();
        for s in &out.scores {
            let key = (s.model, matches!(s.scope, Scope::Topic(_)), s.threshold_pct as u64);
            let e = cell.entry(key).or_insert((0.0, 0));
            e.0 += s.nmi_sym;
            e.1 += 1;
        }
        for (key, (sum, n)) in cell {
            series.entry(key).or_default().push(sum / n as f64);
        }
        if !out.manifest.failures.is_empty() {
            println!("seed {seed}: {} failed cells", out.manifest.failures.len());
        }
        print!(".");
        use std::io::Write;
        std::io::stdout().flush().ok();
    }
    println!();

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("{:<10} {:>6} {:>7} {:>22}", "model", "scope", "thresh", "mean nmi_sym (n seeds)");
    for ((model, topical, t), vals) in &series {
        println!(
            "{:<10} {:>6} {:>7} {:>10.4} ({})",
            model.to_string(),
            if *topical { "topic" } else { "event" },
            t,
            mean(vals),
            vals.len()
        );
    }

    // Win counts: unigram vs others at event scope, per threshold.
    for rival in [ModelKind::Bigram, ModelKind::Lda] {
        println!("\nunigram vs {rival} wins per threshold (event scope):");
        for &t in &DEFAULT_THRESHOLDS {
            let u = &series[&(ModelKind::Unigram, false, t as u64)];
            if let Some(r) = series.get(&(rival, false, t as u64)) {
                let wins = u.iter().zip(r).filter(|(a, b)| a > b).count();
                println!("  t={t:>2}: {wins}/{} (u={:.4} vs {:.4})", u.len(), mean(u), mean(r));
            }
        }
    }

    if topics_per_event > 0 {
        println!("\ntopic-scope vs event-scope (unigram), per seed mean over thresholds:");
        let collect = |topical: bool| -> Vec<f64> {
            let per_thresh: Vec<&Vec<f64>> = DEFAULT_THRESHOLDS
                .iter()
                .filter_map(|&t| series.get(&(ModelKind::Unigram, topical, t as u64)))
                .collect();
            (0..seeds as usize)
                .map(|i| {
                    let vals: Vec<f64> =
                        per_thresh.iter().filter_map(|v| v.get(i).copied()).collect();
                    mean(&vals)
                })
                .collect()
        };
        let topic = collect(true);
        let event = collect(false);
        let wins = topic.iter().zip(&event).filter(|(a, b)| a > b).count();
        println!(
            "  topic wins {wins}/{} (topic mean {:.4} vs event mean {:.4})",
            seeds,
            mean(&topic),
            mean(&event)
        );
    }
}
