//! Generative invariants over the library's numeric core.

use alphadesk::dsl::{self, BinOp, Expr, Func};
use alphadesk::env::{normalize_weights, run_backtest, EnvConfig, ThresholdMode, TradingEnv, OBS_DIM};
use alphadesk::frame::{FeatureFrame, OhlcvSeries};
use alphadesk::indicators;
use alphadesk::metrics;
use alphadesk::ppo::{self, Minibatch, ObsNormalizer, PolicyParams, PpoConfig};
use chrono::NaiveDate;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ------------------------------------------------------------ DSL

fn ident_strategy() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_]{0,8}"
        .prop_filter("function names are not identifiers", |s| {
            !matches!(s.as_str(), "min" | "max" | "abs")
        })
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0..1000.0f64).prop_map(Expr::Number),
        ident_strategy().prop_map(Expr::Ident),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div)
                ],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Call(Func::Min, vec![a, b])),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
            inner.clone().prop_map(|a| Expr::Call(Func::Abs, vec![a])),
        ]
    })
}

proptest! {
    /// Rendering with minimal parentheses loses nothing: the reparsed tree
    /// is the original tree.
    #[test]
    fn expr_print_reparse_is_identity(expr in expr_strategy()) {
        let rendered = expr.to_string();
        let back = dsl::parse_expr(&rendered).unwrap();
        prop_assert_eq!(back, expr, "render was {}", rendered);
    }

    /// Same round trip through a whole definition line.
    #[test]
    fn alpha_line_round_trips(name in ident_strategy(), expr in expr_strategy()) {
        let def = dsl::AlphaDef { name, expr };
        let back = dsl::parse_alpha(&def.render()).unwrap();
        prop_assert_eq!(back, def);
    }
}

// ------------------------------------------------------------ weights

proptest! {
    #[test]
    fn weight_normalization_invariants(raw in prop::collection::vec(-10.0..10.0f64, 1..60)) {
        let w = normalize_weights(&raw).unwrap();
        let l1: f64 = w.normalized.iter().map(|v| v.abs()).sum();
        prop_assert!(l1 <= 1.0);
        for ((r, c), n) in raw.iter().zip(&w.clipped).zip(&w.normalized) {
            prop_assert_eq!(*c, r.clamp(-1.0, 1.0));
            // scaling never flips a sign, and no single entry can dominate
            prop_assert!(c * n >= 0.0);
            prop_assert!(n.abs() < 1.0);
        }
        if w.clipped.iter().any(|&c| c != 0.0) {
            prop_assert!(l1 >= 1.0 - 1e-6);
        } else {
            prop_assert_eq!(l1, 0.0);
        }
    }
}

// ------------------------------------------------------------ metrics

proptest! {
    #[test]
    fn cumulative_return_is_compounding(returns in prop::collection::vec(-0.4..0.4f64, 1..80)) {
        let cum = metrics::cumulative_return(&returns).unwrap();
        let product: f64 = returns.iter().map(|r| 1.0 + r).product();
        let denom = product.abs().max(1.0);
        prop_assert!((cum - (product - 1.0)).abs() <= 1e-12 * denom);
    }

    /// Rank correlation only sees order, so any strictly increasing map of
    /// one side leaves it untouched.
    #[test]
    fn ic_ignores_monotone_transforms(xs in prop::collection::vec(-50.0..50.0f64, 5..60)) {
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        prop_assume!(sorted.len() == xs.len());
        let ys: Vec<f64> = xs.iter().rev().cloned().collect();
        let warped: Vec<f64> = xs.iter().map(|v| (v / 25.0).exp() * 3.0 + 1.0).collect();
        let mut wsorted = warped.clone();
        wsorted.sort_by(f64::total_cmp);
        wsorted.dedup();
        prop_assume!(wsorted.len() == warped.len());
        let base = metrics::information_coefficient(&xs, &ys).unwrap();
        let same = metrics::information_coefficient(&warped, &ys).unwrap();
        match (base, same) {
            (Some(a), Some(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn mi_is_symmetric_and_non_negative(
        pairs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 24..120),
        bins in 2usize..6,
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ab = metrics::mutual_information(&xs, &ys, bins).unwrap();
        let ba = metrics::mutual_information(&ys, &xs, bins).unwrap();
        prop_assert!(ab >= -1e-12);
        prop_assert!((ab - ba).abs() <= 1e-12, "{} vs {}", ab, ba);
    }

    #[test]
    fn drawdown_and_sharpe_ignore_scale(
        returns in prop::collection::vec(-0.05..0.05f64, 4..100),
        scale in 0.1..50.0f64,
    ) {
        let mut values = vec![1.0f64];
        for r in &returns {
            let last = *values.last().unwrap();
            values.push(last * (1.0 + r));
        }
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let a = metrics::max_drawdown(&values).unwrap();
        let b = metrics::max_drawdown(&scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!(a <= 0.0);

        let scaled_returns: Vec<f64> = returns.iter().map(|r| r * 0.5).collect();
        let s1 = metrics::sharpe_ratio_daily(&returns).unwrap();
        let s2 = metrics::sharpe_ratio_daily(&scaled_returns).unwrap();
        match (s1, s2) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0)),
            (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
        }
    }
}

// ------------------------------------------------------------ indicators

proptest! {
    /// Trailing-only: changing the future never changes the past.
    #[test]
    fn indicators_ignore_later_rows(
        seed in 0u64..1000,
        split in 30usize..90,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 120;
        let mut close = vec![100.0f64];
        for _ in 1..n {
            let r: f64 = rng.gen_range(-0.03..0.03);
            let last = *close.last().unwrap();
            close.push(last * (1.0 + r));
        }
        let mut altered = close.clone();
        for v in altered.iter_mut().skip(split) {
            *v *= rng.gen_range(1.5..3.0);
        }
        let volume: Vec<f64> = (0..n).map(|_| rng.gen_range(1e3..1e5)).collect();

        let pairs: [(Vec<f64>, Vec<f64>); 5] = [
            (indicators::sma(&close, 20).unwrap(), indicators::sma(&altered, 20).unwrap()),
            (indicators::ema(&close, 10).unwrap(), indicators::ema(&altered, 10).unwrap()),
            (indicators::rsi(&close, 14).unwrap(), indicators::rsi(&altered, 14).unwrap()),
            (indicators::momentum(&close, 10).unwrap(), indicators::momentum(&altered, 10).unwrap()),
            (indicators::obv(&close, &volume).unwrap(), indicators::obv(&altered, &volume).unwrap()),
        ];
        for (a, b) in &pairs {
            for t in 0..split {
                prop_assert_eq!(a[t].to_bits(), b[t].to_bits(), "row {}", t);
            }
        }
    }
}

// ------------------------------------------------------------ environment

fn random_env_frame(rng: &mut ChaCha8Rng, n: usize) -> FeatureFrame {
    let close: Vec<f64> = (0..n).map(|_| rng.gen_range(50.0..150.0)).collect();
    let series = OhlcvSeries {
        dates: (0..n)
            .map(|i| NaiveDate::from_ymd_opt(2022, 3, 1).unwrap() + chrono::Days::new(i as u64))
            .collect(),
        open: close.clone(),
        high: close.iter().map(|c| c + 1.0).collect(),
        low: close.iter().map(|c| c - 1.0).collect(),
        close,
        volume: (0..n).map(|_| rng.gen_range(1e3..1e5)).collect(),
    };
    let mut frame = FeatureFrame::from_ohlcv(series);
    let regime: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2))).collect();
    let sigma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.5)).collect();
    let tau_lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..-0.05)).collect();
    let tau_up: Vec<f64> = tau_lo.iter().map(|lo| -lo).collect();
    let mut fr: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.02..0.02)).collect();
    fr[n - 1] = f64::NAN;
    frame.set_column("regime", regime).unwrap();
    frame.set_column("sigma_daily", vec![0.01; n]).unwrap();
    frame.set_column("sigma_annual", sigma).unwrap();
    frame.set_column("tau_upper", tau_up).unwrap();
    frame.set_column("tau_lower", tau_lo).unwrap();
    frame.set_column("future_return", fr).unwrap();
    frame
}

proptest! {
    /// Steps before a cutoff cannot see data after it: rewrite everything
    /// from the cutoff on and the early ledger is bit-identical.
    #[test]
    fn env_steps_are_blind_to_the_future(seed in 0u64..500) {
        let n = 80;
        let cut = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame_a = random_env_frame(&mut rng, n);
        let alpha_a: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();

        // same prefix, everything after the cutoff resampled
        let mut rng_b = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
        let frame_b_full = random_env_frame(&mut rng_b, n);
        let mut frame_b = frame_a.clone();
        for name in frame_b_full.column_names().map(str::to_string).collect::<Vec<_>>() {
            let mut col = frame_a.require(&name).unwrap().to_vec();
            let donor = frame_b_full.require(&name).unwrap();
            col[cut..].copy_from_slice(&donor[cut..]);
            frame_b.set_column(&name, col).unwrap();
        }
        let mut alpha_b = alpha_a.clone();
        for v in alpha_b.iter_mut().skip(cut) {
            *v += 1.0;
        }

        for mode in [ThresholdMode::PriceQuantile, ThresholdMode::AlphaQuantile] {
            let config = EnvConfig { threshold_mode: mode, ..EnvConfig::default() };
            let mut env_a = TradingEnv::new(
                vec!["x".into()], vec![alpha_a.clone()], &frame_a, config.clone(),
            ).unwrap();
            let mut env_b = TradingEnv::new(
                vec!["x".into()], vec![alpha_b.clone()], &frame_b, config,
            ).unwrap();
            prop_assert_eq!(env_a.window().0, 0);
            env_a.set_window(0, cut).unwrap();
            env_b.set_window(0, cut).unwrap();

            let mut wrng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
            let weights: Vec<Vec<f64>> = (0..cut).map(|_| vec![wrng.gen_range(-1.5..1.5)]).collect();
            let mut k = 0usize;
            let report_a = run_backtest(&mut env_a, |_| { let w = weights[k].clone(); k += 1; w }).unwrap();
            let mut k = 0usize;
            let report_b = run_backtest(&mut env_b, |_| { let w = weights[k].clone(); k += 1; w }).unwrap();

            for (ra, rb) in report_a.steps.iter().zip(&report_b.steps) {
                prop_assert_eq!(ra.position.to_bits(), rb.position.to_bits());
                prop_assert_eq!(ra.reward.to_bits(), rb.reward.to_bits());
                prop_assert_eq!(ra.value.to_bits(), rb.value.to_bits());
            }
        }
    }

    /// The tracked portfolio value is exactly the compounded rewards.
    #[test]
    fn env_value_compounds_rewards(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_env_frame(&mut rng, 60);
        let alphas: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..60).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let mut env = TradingEnv::new(
            vec!["x".into(), "y".into()],
            alphas,
            &frame,
            EnvConfig { threshold_mode: ThresholdMode::PriceQuantile, ..EnvConfig::default() },
        ).unwrap();
        let mut wrng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));
        let report = run_backtest(&mut env, |_| {
            vec![wrng.gen_range(-1.5..1.5), wrng.gen_range(-1.5..1.5)]
        }).unwrap();
        let mut value = 1.0f64;
        let mut peak = 1.0f64;
        for row in &report.steps {
            value *= 1.0 + row.reward;
            prop_assert!((row.value - value).abs() <= 1e-12 * value.abs().max(1.0));
            peak = peak.max(value);
            prop_assert!(row.drawdown <= 1e-15);
            prop_assert!((row.drawdown - (value / peak - 1.0)).abs() <= 1e-12);
        }
        prop_assert!((report.summary.cum_return - (value - 1.0)).abs() <= 1e-9);
    }
}

// ------------------------------------------------------------ normalizer

proptest! {
    #[test]
    fn normalizer_standardizes_its_fit_set(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(8..40);
        let observations: Vec<[f64; OBS_DIM]> = (0..m)
            .map(|_| {
                let mut o = [0.0; OBS_DIM];
                for v in o.iter_mut().take(OBS_DIM - 1) {
                    *v = rng.gen_range(-100.0..100.0);
                }
                o[OBS_DIM - 1] = 42.0; // constant dimension
                o
            })
            .collect();
        let norm = ObsNormalizer::fit(&observations).unwrap();
        for d in 0..OBS_DIM - 1 {
            let col: Vec<f64> = observations.iter().map(|o| norm.apply(o)[d]).collect();
            let mean = col.iter().sum::<f64>() / m as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (m as f64 - 1.0);
            prop_assert!(mean.abs() <= 1e-9, "dim {} mean {}", d, mean);
            prop_assert!((var.sqrt() - 1.0).abs() <= 1e-9, "dim {} std {}", d, var.sqrt());
        }
        // the degenerate dimension pins to zero instead of exploding
        for o in &observations {
            prop_assert_eq!(norm.apply(o)[OBS_DIM - 1], 0.0);
        }
    }
}

// ------------------------------------------------------------ ppo loss

/// With an enormous clip band the surrogate reduces to the plain
/// importance-weighted policy gradient objective.
#[test]
fn huge_clip_recovers_vanilla_surrogate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for _ in 0..20 {
        let params = PolicyParams::init(3, 2, &[4, 3], &mut rng);
        let m = 8;
        let observations: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let actions: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect();
        let advantages: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let returns: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let old_log_probs: Vec<f64> = (0..m).map(|_| rng.gen_range(-4.0..0.0)).collect();
        let batch = Minibatch {
            observations: &observations,
            actions: &actions,
            old_log_probs: &old_log_probs,
            advantages: &advantages,
            returns: &returns,
        };
        let wide = PpoConfig {
            clip_epsilon: 1e9,
            value_coef: 0.0,
            entropy_coef: 0.0,
            ..PpoConfig::default()
        };
        let (loss, _) = ppo::ppo_loss(&params, &batch, &wide).unwrap();
        assert_eq!(loss.clip_fraction, 0.0);

        let mut manual = 0.0;
        for i in 0..m {
            let (mean, std, _) = params.forward(&observations[i]).unwrap();
            let ratio = (ppo::log_prob(&mean, &std, &actions[i]) - old_log_probs[i]).exp();
            manual += ratio * advantages[i];
        }
        manual = -(manual / m as f64);
        assert!(
            (loss.policy - manual).abs() <= 1e-12 * manual.abs().max(1.0),
            "{} vs {}",
            loss.policy,
            manual
        );
        assert_eq!(loss.total, loss.policy);
    }
}
