use std::collections::HashSet;

use chrono::NaiveDate;
use ftcp_rating::evaluate::{rating_correlation, summarize_matches};
use ftcp_rating::sparse::{cgls, LeastSquares};
use ftcp_rating::synthetic::{generate, SyntheticConfig};
use ftcp_rating::{
    age_interpolation, evaluate_ratings, fit, split_half_correlation, Corpus, Mode, PlayerInfo, RatingParams,
    SegmentRecord,
};
use proptest::prelude::*;

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

fn segment(match_id: &str, segment: u32, home: Vec<String>, away: Vec<String>, goals: (u32, u32)) -> SegmentRecord {
    SegmentRecord {
        match_id: match_id.into(),
        date: date(2015, 5, 1),
        competition: "ENG".into(),
        home_team: "H".into(),
        away_team: "A".into(),
        segment,
        duration: 90.0,
        home_players: home,
        away_players: away,
        home_goals: goals.0,
        away_goals: goals.1,
        start_diff: 0,
        home_reds: 0,
        away_reds: 0,
        home_advantage: true,
    }
}

fn roster(ids: &[String], birth: NaiveDate, league: &str) -> Vec<PlayerInfo> {
    ids.iter()
        .map(|id| PlayerInfo {
            id: id.clone(),
            name: id.clone(),
            birth,
            leagues: vec![league.into()],
        })
        .collect()
}

/// Two 11-a-side clubs with every player born on `birth`.
fn same_age_corpus(birth: NaiveDate) -> Corpus {
    let (h, a) = (names("h", 11), names("a", 11));
    let mut players = roster(&h, birth, "L1");
    players.extend(roster(&a, birth, "L1"));
    let mut red = segment("m2", 1, a.clone(), h[..10].to_vec(), (1, 0));
    red.away_reds = 1;
    Corpus {
        players,
        segments: vec![
            segment("m1", 0, h.clone(), a.clone(), (2, 1)),
            segment("m2", 0, a.clone(), h.clone(), (0, 0)),
            red,
        ],
    }
}

proptest! {
    #[test]
    fn interpolation_reconstructs_clamped_age(age in 0.0f64..70.0, lo in 10u32..30, span in 1u32..30) {
        let hi = lo + span;
        let terms: Vec<(u32, f64)> = age_interpolation(age, lo, hi).terms().collect();
        prop_assert!(!terms.is_empty() && terms.len() <= 2);
        if terms.len() == 2 {
            prop_assert_eq!(terms[1].0, terms[0].0 + 1);
        }
        let total: f64 = terms.iter().map(|t| t.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(terms.iter().all(|t| t.1 > 0.0 && t.1 <= 1.0 && (lo..=hi).contains(&t.0)));
        let back: f64 = terms.iter().map(|&(y, u)| u * y as f64).sum();
        prop_assert!((back - age.clamp(lo as f64, hi as f64)).abs() < 1e-9);
    }

    #[test]
    fn age_shift_cancels_in_same_age_corpus(
        birth_year in 1975i32..2000,
        shift in -5.0f64..5.0,
        coefs in proptest::collection::vec(-1.0f64..1.0, 80),
    ) {
        let corpus = same_age_corpus(date(birth_year, 3, 17));
        let model = fit(&corpus, &RatingParams::default(), Mode::Novel).unwrap();
        let base: Vec<f64> = (0..model.index.ncols()).map(|j| coefs[j % coefs.len()]).collect();
        let mut shifted = base.clone();
        for y in model.index.age_min..=model.index.age_max {
            shifted[model.index.age(y)] += shift;
        }
        for seg in &corpus.segments {
            let a = model.predict_with(seg, &base).unwrap();
            let b = model.predict_with(seg, &shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        }
    }
}

#[test]
fn rating_is_individual_plus_age_plus_league() {
    let corpus = same_age_corpus(date(1990, 5, 1));
    let mut model = fit(&corpus, &RatingParams::default(), Mode::Novel).unwrap();
    model.coefficients.iter_mut().for_each(|c| *c = 0.0);
    let idx = &model.index;
    let (p, l) = (idx.player("h3").unwrap(), idx.league("L1").unwrap());
    let (a24, a25) = (idx.age(24), idx.age(25));
    model.coefficients[p] = 0.10;
    model.coefficients[a24] = 0.05;
    model.coefficients[a25] = 0.05;
    model.coefficients[l] = 0.02;
    let r = model.player_rating("h3", date(2015, 5, 1)).unwrap();
    assert!((r - 0.17).abs() < 1e-12, "{r}");
}

#[test]
fn short_side_is_scaled_up_and_red_terms_follow_the_net_count() {
    let corpus = same_age_corpus(date(1990, 5, 1));
    let model = fit(&corpus, &RatingParams::default(), Mode::Novel).unwrap();
    let idx = &model.index;
    let n = idx.ncols();
    let unit = |j: usize| {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        v
    };
    // Away side of the red segment has ten players.
    let red = &corpus.segments[2];
    let ten = model.predict_with(red, &unit(idx.player("h0").unwrap())).unwrap();
    assert!((ten + 11.0 / 10.0).abs() < 1e-12);
    let eleven = model.predict_with(red, &unit(idx.player("a0").unwrap())).unwrap();
    assert!((eleven - 1.0).abs() < 1e-12);
    // Away short: r = -1 on the away-red column.
    assert!((model.predict_with(red, &unit(idx.away_red(1))).unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(model.predict_with(red, &unit(idx.home_red(1))).unwrap(), 0.0);
    // Two home reds against one away red count as the home side one short.
    let mut net = red.clone();
    net.home_reds = 2;
    net.home_players.truncate(9);
    assert!((model.predict_with(&net, &unit(idx.home_red(1))).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(model.predict_with(&net, &unit(idx.away_red(1))).unwrap(), 0.0);
}

#[test]
fn plain_ratings_shrink_as_lambda_grows() {
    let (cfg_corpus, _) = generate(&SyntheticConfig {
        teams: 6,
        seasons: 1,
        ..Default::default()
    });
    let mut last = f64::INFINITY;
    for lambda in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let params = RatingParams {
            lambda,
            cg_tolerance: 1e-12,
            ..Default::default()
        };
        let m = fit(&cfg_corpus, &params, Mode::Plain).unwrap();
        let norm: f64 = m.coefficients.iter().map(|c| c * c).sum();
        assert!(norm < last, "lambda {lambda}: {norm} >= {last}");
        last = norm;
    }
}

#[test]
fn cgls_solves_a_small_square_system() {
    let mut ls = LeastSquares::new(2);
    ls.push_row(&[(0, 2.0), (1, 1.0)], 3.0);
    ls.push_row(&[(0, 1.0), (1, 3.0)], 5.0);
    let (x, report) = cgls(&ls, 1e-14, 100);
    assert!(report.converged);
    assert!((x[0] - 0.8).abs() < 1e-10 && (x[1] - 1.4).abs() < 1e-10, "{x:?}");
}

#[test]
fn peak_ignores_ages_without_minutes() {
    let corpus = same_age_corpus(date(1990, 5, 1));
    let mut model = fit(&corpus, &RatingParams::default(), Mode::Novel).unwrap();
    let (a25, a40) = (model.index.age(25), model.index.age(40));
    model.coefficients[a25] = 0.3;
    model.coefficients[a40] = 9.0;
    assert_eq!(model.peak_age(), Some(25));
}

fn split_by_date(corpus: &Corpus, cut: NaiveDate) -> (Corpus, Corpus) {
    let before: HashSet<String> = corpus.segments.iter().filter(|s| s.date < cut).map(|s| s.match_id.clone()).collect();
    let after: HashSet<String> = corpus.segments.iter().filter(|s| s.date >= cut).map(|s| s.match_id.clone()).collect();
    (corpus.restrict(&before), corpus.restrict(&after))
}

#[test]
fn ratings_beat_the_frequency_baseline_out_of_sample() {
    let cfg = SyntheticConfig {
        teams: 16,
        seasons: 3,
        ..Default::default()
    };
    let (corpus, _) = generate(&cfg);
    let cut = date(cfg.first_season + 2, 7, 1);
    let (train, test) = split_by_date(&corpus, cut);
    let model = fit(&train, &RatingParams::default(), Mode::Novel).unwrap();
    let eval = evaluate_ratings(&model, &summarize_matches(&test)).unwrap();
    assert!(eval.matches > 200);
    assert!(eval.loss < eval.baseline_loss, "{} vs {}", eval.loss, eval.baseline_loss);
}

#[test]
fn identical_ratings_correlate_perfectly() {
    let (corpus, _) = generate(&SyntheticConfig {
        teams: 8,
        seasons: 1,
        ..Default::default()
    });
    let m = fit(&corpus, &RatingParams::default(), Mode::Novel).unwrap();
    assert!((rating_correlation(&m, &m).unwrap() - 1.0).abs() < 1e-12);
    let r = split_half_correlation(&corpus, &RatingParams::default(), Mode::Novel, 2, 7).unwrap();
    assert!(r > 0.0 && r <= 1.0, "{r}");
}
