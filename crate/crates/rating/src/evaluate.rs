//! Match-outcome evaluation of ratings: ordered logit on the rating gap,
//! quadratic loss, and split-half reliability.

use std::collections::{HashMap, HashSet};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{fit, RatingModel};
use crate::segment::Corpus;
use crate::{Mode, RatingError, RatingParams};

/// Final score and starting lineups of one match.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSummary {
    pub match_id: String,
    pub date: NaiveDate,
    pub home_players: Vec<String>,
    pub away_players: Vec<String>,
    pub home_goals: u32,
    pub away_goals: u32,
}

impl MatchSummary {
    /// 0 away win, 1 draw, 2 home win.
    pub fn outcome(&self) -> usize {
        match self.home_goals.cmp(&self.away_goals) {
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => 1,
            std::cmp::Ordering::Greater => 2,
        }
    }
}

/// Collapses segments into matches; lineups are taken from the first segment.
pub fn summarize_matches(corpus: &Corpus) -> Vec<MatchSummary> {
    let mut order = Vec::new();
    let mut by_id: HashMap<&str, (u32, MatchSummary)> = HashMap::new();
    for s in &corpus.segments {
        let entry = by_id.entry(s.match_id.as_str()).or_insert_with(|| {
            order.push(s.match_id.as_str());
            (
                s.segment,
                MatchSummary {
                    match_id: s.match_id.clone(),
                    date: s.date,
                    home_players: s.home_players.clone(),
                    away_players: s.away_players.clone(),
                    home_goals: 0,
                    away_goals: 0,
                },
            )
        });
        if s.segment < entry.0 {
            entry.0 = s.segment;
            entry.1.home_players = s.home_players.clone();
            entry.1.away_players = s.away_players.clone();
        }
        entry.1.home_goals += s.home_goals;
        entry.1.away_goals += s.away_goals;
    }
    order.into_iter().map(|id| by_id.remove(id).expect("recorded").1).collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Three-outcome ordered logit `P(y <= k) = sigmoid(c_k - slope * x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderedLogit {
    pub slope: f64,
    pub cut_low: f64,
    pub cut_high: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Set when the likelihood has no finite maximizer (e.g. a single
    /// outcome class) and the cutpoints were capped.
    pub degenerate: bool,
}

/// Magnitude beyond which parameters are treated as diverging.
const PARAM_CAP: f64 = 30.0;

impl OrderedLogit {
    pub fn probabilities(&self, x: f64) -> [f64; 3] {
        let f1 = sigmoid(self.cut_low - self.slope * x);
        let f2 = sigmoid(self.cut_high - self.slope * x);
        [f1, (f2 - f1).max(0.0), 1.0 - f2]
    }

    /// Maximum likelihood by Newton steps with a gradient-ascent fallback,
    /// stopping when the mean-log-likelihood gradient norm drops below 1e-8.
    pub fn fit(x: &[f64], y: &[usize]) -> OrderedLogit {
        assert_eq!(x.len(), y.len());
        let n = x.len().max(1) as f64;
        // theta = (slope, c1, log(c2 - c1))
        let counts = [0, 1, 2].map(|k| y.iter().filter(|&&v| v == k).count() as f64 + 0.5);
        let total: f64 = counts.iter().sum();
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let c1 = logit(counts[0] / total);
        let c2 = logit((counts[0] + counts[1]) / total);
        let mut theta = [0.0, c1, (c2 - c1).max(1e-3).ln()];

        let loglik = |t: &[f64; 3]| -> f64 {
            let (b, c1, c2) = (t[0], t[1], t[1] + t[2].exp());
            x.iter()
                .zip(y)
                .map(|(&xi, &yi)| {
                    let f1 = sigmoid(c1 - b * xi);
                    let f2 = sigmoid(c2 - b * xi);
                    let p = match yi {
                        0 => f1,
                        1 => f2 - f1,
                        _ => 1.0 - f2,
                    };
                    p.max(1e-300).ln()
                })
                .sum::<f64>()
                / n
        };
        let grad = |t: &[f64; 3]| -> [f64; 3] {
            let (b, c1, e) = (t[0], t[1], t[2].exp());
            let c2 = c1 + e;
            let mut g = [0.0; 3];
            for (&xi, &yi) in x.iter().zip(y) {
                let f1 = sigmoid(c1 - b * xi);
                let f2 = sigmoid(c2 - b * xi);
                let (d1, d2) = match yi {
                    0 => (1.0 - f1, 0.0),
                    1 => {
                        let p = (f2 - f1).max(1e-300);
                        (-f1 * (1.0 - f1) / p, f2 * (1.0 - f2) / p)
                    }
                    _ => (0.0, -f2),
                };
                g[0] -= xi * (d1 + d2);
                g[1] += d1 + d2;
                g[2] += d2 * e;
            }
            g.map(|v| v / n)
        };
        let norm = |g: &[f64; 3]| g.iter().map(|v| v * v).sum::<f64>().sqrt();

        let mut g = grad(&theta);
        let mut iterations = 0;
        // With an outcome class missing the likelihood keeps rising as the
        // cutpoints run off; the loop then stops on the cap or a vanishing gradient.
        let mut degenerate = counts.iter().any(|&c| c < 1.0);
        while norm(&g) >= 1e-8 && iterations < 500 {
            iterations += 1;
            let step = newton_step(&theta, &g, &grad).unwrap_or(g);
            let ascent = step.iter().zip(&g).map(|(s, gi)| s * gi).sum::<f64>() > 0.0;
            let dir = if ascent { step } else { g };
            let base = loglik(&theta);
            let mut t = 1.0;
            let mut next = theta;
            loop {
                for k in 0..3 {
                    next[k] = theta[k] + t * dir[k];
                }
                if loglik(&next) >= base || t < 1e-12 {
                    break;
                }
                t *= 0.5;
            }
            theta = next;
            if theta.iter().any(|v| v.abs() > PARAM_CAP) {
                degenerate = true;
                theta = theta.map(|v| v.clamp(-PARAM_CAP, PARAM_CAP));
                g = grad(&theta);
                break;
            }
            g = grad(&theta);
        }
        OrderedLogit {
            slope: theta[0],
            cut_low: theta[1],
            cut_high: theta[1] + theta[2].exp(),
            iterations,
            gradient_norm: norm(&g),
            degenerate: degenerate || norm(&g) >= 1e-8,
        }
    }
}

/// Newton direction `-H^{-1} g` with the Hessian from central differences of
/// the analytic gradient; `None` if the Hessian is singular.
fn newton_step(theta: &[f64; 3], g: &[f64; 3], grad: &dyn Fn(&[f64; 3]) -> [f64; 3]) -> Option<[f64; 3]> {
    let h = 1e-5;
    let mut hess = [[0.0; 3]; 3];
    for k in 0..3 {
        let mut up = *theta;
        let mut dn = *theta;
        up[k] += h;
        dn[k] -= h;
        let (gu, gd) = (grad(&up), grad(&dn));
        for i in 0..3 {
            hess[i][k] = (gu[i] - gd[i]) / (2.0 * h);
        }
    }
    for i in 0..3 {
        for k in 0..i {
            let avg = 0.5 * (hess[i][k] + hess[k][i]);
            hess[i][k] = avg;
            hess[k][i] = avg;
        }
    }
    // Solve hess * d = -g by Gaussian elimination with partial pivoting.
    let mut a = hess;
    let mut b = g.map(|v| -v);
    for col in 0..3 {
        let piv = (col..3).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut d = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * d[c]).sum();
        d[r] = (b[r] - s) / a[r][r];
    }
    d.iter().all(|v| v.is_finite()).then_some(d)
}

/// Mean over matches of the squared distance between predicted outcome
/// probabilities and the one-hot result.
pub fn quadratic_loss(predictions: &[[f64; 3]], outcomes: &[usize]) -> f64 {
    let total: f64 = predictions
        .iter()
        .zip(outcomes)
        .map(|(p, &y)| (0..3).map(|k| (p[k] - if k == y { 1.0 } else { 0.0 }).powi(2)).sum::<f64>())
        .sum();
    total / outcomes.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub matches: usize,
    pub loss: f64,
    /// Loss of always predicting the held-out outcome frequencies.
    pub baseline_loss: f64,
    pub logit: OrderedLogit,
    /// Lineup slots filled by players the model has never seen (rated 0).
    pub unrated_slots: usize,
}

fn mean_rating(model: &RatingModel, players: &[String], date: NaiveDate, unrated: &mut usize) -> f64 {
    let total: f64 = players
        .iter()
        .map(|p| {
            model.player_rating(p, date).unwrap_or_else(|_| {
                *unrated += 1;
                0.0
            })
        })
        .sum();
    total / players.len().max(1) as f64
}

/// Rating gap (home minus away average) for each held-out match.
pub fn rating_gaps(model: &RatingModel, matches: &[MatchSummary]) -> (Vec<f64>, usize) {
    let mut unrated = 0;
    let gaps = matches
        .iter()
        .map(|m| {
            mean_rating(model, &m.home_players, m.date, &mut unrated)
                - mean_rating(model, &m.away_players, m.date, &mut unrated)
        })
        .collect();
    (gaps, unrated)
}

/// Fits the ordered logit on the held-out matches and scores its predictions.
pub fn evaluate_ratings(model: &RatingModel, heldout: &[MatchSummary]) -> Result<Evaluation, RatingError> {
    if heldout.is_empty() {
        return Err(RatingError::EmptyCorpus);
    }
    let (gaps, unrated_slots) = rating_gaps(model, heldout);
    let outcomes: Vec<usize> = heldout.iter().map(MatchSummary::outcome).collect();
    let logit = OrderedLogit::fit(&gaps, &outcomes);
    let predictions: Vec<[f64; 3]> = gaps.iter().map(|&x| logit.probabilities(x)).collect();
    let n = outcomes.len() as f64;
    let freq = [0, 1, 2].map(|k| outcomes.iter().filter(|&&y| y == k).count() as f64 / n);
    Ok(Evaluation {
        matches: heldout.len(),
        loss: quadratic_loss(&predictions, &outcomes),
        baseline_loss: quadratic_loss(&vec![freq; outcomes.len()], &outcomes),
        logit,
        unrated_slots,
    })
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 2 || n != b.len() {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Correlation of ratings at each model's reference time over shared players.
pub fn rating_correlation(a: &RatingModel, b: &RatingModel) -> Option<f64> {
    let rb: HashMap<String, f64> = b.ratings().into_iter().collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .ratings()
        .into_iter()
        .filter_map(|(p, r)| rb.get(&p).map(|&s| (r, s)))
        .unzip();
    pearson(&xs, &ys)
}

/// Splits the training matches at random into halves, rates each half and
/// averages the rating correlation over `repetitions` splits.
pub fn split_half_correlation(
    corpus: &Corpus,
    params: &RatingParams,
    mode: Mode,
    repetitions: usize,
    seed: u64,
) -> Result<f64, RatingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = corpus.match_ids();
    let mut params = params.clone();
    // Both halves are rated at the same instant.
    params.reference = params.reference.or(corpus.latest_date());
    let mut total = 0.0;
    let mut count = 0;
    for _ in 0..repetitions {
        let mut shuffled = ids.clone();
        shuffled.shuffle(&mut rng);
        let half = shuffled.len() / 2;
        let first: HashSet<String> = shuffled[..half].iter().cloned().collect();
        let second: HashSet<String> = shuffled[half..].iter().cloned().collect();
        let a = fit(&corpus.restrict(&first), &params, mode)?;
        let b = fit(&corpus.restrict(&second), &params, mode)?;
        if let Some(r) = rating_correlation(&a, &b) {
            total += r;
            count += 1;
        }
    }
    if count == 0 {
        return Err(RatingError::EmptyCorpus);
    }
    Ok(total / count as f64)
}
