//! Scoring metrics against human judgments.
//!
//! * 2-AFC: a metric picks the alternative closer to the reference and
//!   earns the fraction of subjects who agreed with it.
//! * JND: pairs are ranked by distance; the fraction of subjects judging a
//!   pair identical is soft positive mass, and the score is the step-wise
//!   area under the resulting precision-recall curve.
//! * Neighborhood sweep: prediction error and 2-AFC score as the
//!   neighborhood grows.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::metric::MetricId;
use crate::par;
use crate::sum;
use crate::wls::{predict, solve_embeddings, LasiConfig};

/// A reference, two alternatives, and the fraction `p` of subjects who
/// judged `alt1` closer to the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoAfcExample {
    pub reference: ImageTensor,
    pub alt0: ImageTensor,
    pub alt1: ImageTensor,
    pub p: f64,
}

/// Two images and the fraction `p` of subjects who judged them identical.
#[derive(Debug, Clone, PartialEq)]
pub struct JndExample {
    pub img_a: ImageTensor,
    pub img_b: ImageTensor,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfcDecision {
    pub d0: f64,
    pub d1: f64,
    /// 1 when `alt1` is closer, 0 when `alt0` is, 0.5 on a tie.
    pub a: f64,
    pub credit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoAfcResult {
    pub score: f64,
    /// Mean of `max(p, 1 - p)`: the best attainable score.
    pub majority_bound: f64,
    /// Mean of `p^2 + (1 - p)^2`: agreement of two random subjects.
    pub human_level: f64,
    pub per_example: Vec<AfcDecision>,
}

fn check_p(p: f64, index: usize) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::DegenerateDataset(alloc::format!("example {index}: p = {p} outside [0, 1]")))
    }
}

/// 2-AFC score from precomputed `(d0, d1, p)` triples.
pub fn score_2afc_distances(triples: &[(f64, f64, f64)]) -> Result<TwoAfcResult> {
    if triples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut per_example = Vec::with_capacity(triples.len());
    for (i, &(d0, d1, p)) in triples.iter().enumerate() {
        check_p(p, i)?;
        if d0.is_nan() || d1.is_nan() {
            return Err(Error::NonFinite("2-AFC distance"));
        }
        let (a, credit) = if d1 < d0 {
            (1.0, p)
        } else if d0 < d1 {
            (0.0, 1.0 - p)
        } else {
            (0.5, 0.5)
        };
        per_example.push(AfcDecision { d0, d1, a, credit });
    }
    let mean = |it: &mut dyn Iterator<Item = f64>| sum::mean(it).unwrap_or(0.0);
    Ok(TwoAfcResult {
        score: mean(&mut per_example.iter().map(|d| d.credit)),
        majority_bound: mean(&mut triples.iter().map(|t| t.2.max(1.0 - t.2))),
        human_level: mean(&mut triples.iter().map(|t| t.2 * t.2 + (1.0 - t.2) * (1.0 - t.2))),
        per_example,
    })
}

/// Scores `metric` on a 2-AFC dataset. Examples are evaluated in parallel.
pub fn score_2afc(examples: &[TwoAfcExample], metric: &MetricId) -> Result<TwoAfcResult> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    metric.validate()?;
    let triples: Vec<Result<(f64, f64, f64)>> = par::map_range(examples.len(), |i| {
        let e = &examples[i];
        Ok((metric.distance(&e.alt0, &e.reference)?, metric.distance(&e.alt1, &e.reference)?, e.p))
    });
    score_2afc_distances(&triples.into_iter().collect::<Result<Vec<_>>>()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JndResult {
    pub map_score: f64,
    /// `(recall, precision)` after each ranked pair.
    pub pr_curve: Vec<(f64, f64)>,
}

/// Mean average precision from precomputed `(distance, p)` pairs.
///
/// Pairs are ranked by ascending distance (closest is "most likely judged
/// identical"); equal distances keep their input order.
pub fn score_jnd_distances(pairs: &[(f64, f64)]) -> Result<JndResult> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (i, &(d, p)) in pairs.iter().enumerate() {
        check_p(p, i)?;
        if d.is_nan() {
            return Err(Error::NonFinite("JND distance"));
        }
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].0.total_cmp(&pairs[b].0));
    let mut cumulative = Vec::with_capacity(pairs.len());
    let mut running = 0.0;
    for &i in &order {
        running += pairs[i].1;
        cumulative.push(running);
    }
    let total = running;
    if total <= 0.0 {
        return Err(Error::DegenerateDataset("every pair has p = 0; recall is undefined".into()));
    }
    let mut pr_curve = Vec::with_capacity(pairs.len());
    let mut map_score = 0.0;
    let mut prev_recall = 0.0;
    for (t, &tp) in cumulative.iter().enumerate() {
        let precision = tp / (t + 1) as f64;
        let recall = tp / total;
        map_score += (recall - prev_recall) * precision;
        prev_recall = recall;
        pr_curve.push((recall, precision));
    }
    Ok(JndResult { map_score, pr_curve })
}

/// Scores `metric` on a JND dataset.
pub fn score_jnd(examples: &[JndExample], metric: &MetricId) -> Result<JndResult> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    metric.validate()?;
    let pairs: Vec<Result<(f64, f64)>> = par::map_range(examples.len(), |i| {
        let e = &examples[i];
        Ok((metric.distance(&e.img_a, &e.img_b)?, e.p))
    });
    score_jnd_distances(&pairs.into_iter().collect::<Result<Vec<_>>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    /// Mean over references of the mean squared prediction residual.
    pub prediction_mse: f64,
    /// Mean over references of the attained weighted training objective.
    pub train_loss: f64,
    pub afc_score: f64,
}

/// Prediction error on the references and LASI 2-AFC score for each
/// neighborhood size in `n_values`.
pub fn sweep_n(examples: &[TwoAfcExample], n_values: &[usize], template: &LasiConfig) -> Result<Vec<SweepRow>> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("neighborhood sizes must be strictly ascending".into()));
    }
    n_values
        .iter()
        .map(|&n| {
            let cfg = LasiConfig { n, ..*template };
            cfg.validate()?;
            let per_ref: Vec<Result<(f64, f64)>> = par::map_range(examples.len(), |i| {
                let r = &examples[i].reference;
                let pred = predict(r, &solve_embeddings(r, &cfg)?, &cfg)?;
                let loss = sum::mean(pred.train_loss.data.iter().copied()).unwrap_or(0.0);
                Ok((pred.mse(), loss))
            });
            let per_ref = per_ref.into_iter().collect::<Result<Vec<_>>>()?;
            let afc = score_2afc(examples, &MetricId::Lasi(cfg))?;
            Ok(SweepRow {
                n,
                prediction_mse: sum::mean(per_ref.iter().map(|v| v.0)).unwrap_or(0.0),
                train_loss: sum::mean(per_ref.iter().map(|v| v.1)).unwrap_or(0.0),
                afc_score: afc.score,
            })
        })
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ranks = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = alloc::vec![0.0; v.len()];
        let mut s = 0;
        while s < idx.len() {
            let mut e = s;
            while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[s]] {
                e += 1;
            }
            let avg = (s + e) as f64 / 2.0;
            for &i in &idx[s..=e] {
                r[i] = avg;
            }
            s = e + 1;
        }
        r
    };
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / crate::math::sqrt(va * vb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_example_credit() {
        let r = score_2afc_distances(&[(0.5, 0.2, 0.8)]).unwrap();
        assert_eq!(r.score, 0.8);
        let r = score_2afc_distances(&[(0.2, 0.5, 0.8)]).unwrap();
        assert!((r.score - 0.2).abs() < 1e-15);
    }

    #[test]
    fn undecided_subjects_score_one_half() {
        let t = [(0.1, 0.2, 0.5), (0.3, 0.2, 0.5), (0.4, 0.4, 0.5)];
        let r = score_2afc_distances(&t).unwrap();
        assert_eq!(r.score, 0.5);
        assert_eq!(r.majority_bound, 0.5);
        assert_eq!(r.human_level, 0.5);
    }

    #[test]
    fn hand_computed_fixture() {
        // a = 1, 0, tie
        let t = [(0.5, 0.1, 0.9), (0.1, 0.5, 0.6), (0.3, 0.3, 0.5)];
        let r = score_2afc_distances(&t).unwrap();
        assert!((r.score - 0.6).abs() < 1e-15);
        let a: Vec<f64> = r.per_example.iter().map(|d| d.a).collect();
        assert_eq!(a, [1.0, 0.0, 0.5]);
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert_eq!(score_2afc_distances(&[]), Err(Error::EmptyDataset));
        assert_eq!(score_jnd_distances(&[]), Err(Error::EmptyDataset));
    }

    #[test]
    fn jnd_perfect_and_reversed_rankings() {
        let r = score_jnd_distances(&[(0.1, 1.0), (0.9, 0.0)]).unwrap();
        assert_eq!(r.map_score, 1.0);
        assert_eq!(r.pr_curve, [(1.0, 1.0), (1.0, 0.5)]);
        let r = score_jnd_distances(&[(0.9, 1.0), (0.1, 0.0)]).unwrap();
        assert_eq!(r.map_score, 0.5);
        assert_eq!(r.pr_curve, [(0.0, 0.0), (1.0, 0.5)]);
    }

    #[test]
    fn jnd_without_positives_is_degenerate() {
        assert!(matches!(
            score_jnd_distances(&[(0.1, 0.0), (0.2, 0.0)]),
            Err(Error::DegenerateDataset(_))
        ));
    }

    #[test]
    fn out_of_range_p_is_rejected() {
        assert!(matches!(score_2afc_distances(&[(0.1, 0.2, 1.2)]), Err(Error::DegenerateDataset(_))));
    }

    #[test]
    fn spearman_signs() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
    }
}
