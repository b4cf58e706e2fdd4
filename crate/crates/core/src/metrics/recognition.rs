//! Verification and identification metrics over labeled similarity scores.
//!
//! All quantities are rank-based: the ROC is swept over the distinct score
//! values, so any strictly increasing transform of the scores leaves every
//! metric unchanged.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matching::{PairLabel, ScoreSet};

/// Verification summary: best-threshold accuracy, equal error rate, area
/// under the ROC and recall at two false-accept operating points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    pub accuracy: f64,
    pub eer: f64,
    pub auc: f64,
    pub tar_at_far10: f64,
    pub tar_at_far1: f64,
}

/// One swept ROC operating point.
#[derive(Debug, Clone, Copy)]
struct RocPoint {
    fpr: f64,
    tpr: f64,
}

fn roc_points(scores: &[(f64, bool)], positives: usize, negatives: usize) -> Vec<RocPoint> {
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        // Group equal scores into one threshold step so ties contribute a
        // diagonal segment (half credit under the trapezoid rule).
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }
    points
}

fn interpolate_tar(points: &[RocPoint], far: f64) -> f64 {
    // Last point at or below the requested FAR; vertical ROC segments at
    // equal FPR collapse onto their topmost TPR.
    let mut anchor = 0;
    for (k, p) in points.iter().enumerate() {
        if p.fpr <= far {
            anchor = k;
        }
    }
    if points[anchor].fpr == far || anchor + 1 == points.len() {
        return points[anchor].tpr;
    }
    let a = points[anchor];
    let b = points[anchor + 1];
    a.tpr + (far - a.fpr) / (b.fpr - a.fpr) * (b.tpr - a.tpr)
}

fn equal_error_rate(points: &[RocPoint]) -> f64 {
    // FPR rises and FNR = 1 - TPR falls along the sweep; find the sign
    // change of (FPR - FNR) and interpolate linearly within the segment.
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ga = a.fpr - (1.0 - a.tpr);
        let gb = b.fpr - (1.0 - b.tpr);
        if ga > 0.0 {
            // Crossing happened before the first point (degenerate).
            return a.fpr;
        }
        if gb >= 0.0 {
            let denom = gb - ga;
            let s = if denom.abs() < f64::EPSILON { 0.5 } else { -ga / denom };
            return a.fpr + s * (b.fpr - a.fpr);
        }
    }
    points.last().map(|p| p.fpr).unwrap_or(0.0)
}

/// Computes ROC-derived verification metrics from labeled scores.
///
/// The score set must contain at least one `same` and one `diff` entry.
/// AUC uses trapezoidal integration over the threshold sweep (equivalent to
/// tie-corrected pair counting); EER and TAR at FAR 10% / 1% are linearly
/// interpolated between adjacent operating points; accuracy is the best
/// single-threshold accuracy.
pub fn verification_metrics(scores: &ScoreSet) -> Result<VerificationReport> {
    let labeled: Vec<(f64, bool)> = scores
        .entries
        .iter()
        .map(|e| (e.score, e.label == PairLabel::Same))
        .collect();
    if labeled.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::NonFinite("similarity scores"));
    }
    let positives = labeled.iter().filter(|(_, same)| *same).count();
    let negatives = labeled.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }

    let points = roc_points(&labeled, positives, negatives);

    let mut auc = 0.0;
    for w in points.windows(2) {
        auc += (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0;
    }

    let total = (positives + negatives) as f64;
    let mut accuracy = 0.0f64;
    for p in &points {
        let correct = p.tpr * positives as f64 + (1.0 - p.fpr) * negatives as f64;
        accuracy = accuracy.max(correct / total);
    }

    Ok(VerificationReport {
        accuracy,
        eer: equal_error_rate(&points),
        auc,
        tar_at_far10: interpolate_tar(&points, 0.10),
        tar_at_far1: interpolate_tar(&points, 0.01),
    })
}

/// Gallery/probe score matrix with identity labels.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationScores {
    /// Unique per-entry gallery item ids (rank tie-break key).
    pub gallery_ids: Vec<String>,
    /// Identity label of each gallery item.
    pub gallery_identities: Vec<String>,
    pub probe_ids: Vec<String>,
    /// True identity of each probe; must match exactly one gallery item.
    pub probe_identities: Vec<String>,
    /// `probes x gallery` similarity scores.
    pub scores: DMatrix<f64>,
}

impl IdentificationScores {
    pub fn validate(&self) -> Result<()> {
        let g = self.gallery_ids.len();
        let p = self.probe_ids.len();
        if g == 0 || p == 0 {
            return Err(Error::EmptyInput("identification scores"));
        }
        if self.gallery_identities.len() != g {
            return Err(Error::dims("gallery identities", g, self.gallery_identities.len()));
        }
        if self.probe_identities.len() != p {
            return Err(Error::dims("probe identities", p, self.probe_identities.len()));
        }
        if self.scores.nrows() != p || self.scores.ncols() != g {
            return Err(Error::dims("score matrix rows", p, self.scores.nrows()));
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("identification scores"));
        }
        Ok(())
    }
}

/// Cumulative matching characteristic: `rates[k - 1]` is the fraction of
/// probes whose mated gallery item ranks within the top `k` under
/// descending score order (ties broken by gallery id).
pub fn cmc(scores: &IdentificationScores) -> Result<Vec<f64>> {
    scores.validate()?;
    let gallery_size = scores.gallery_ids.len();
    let mut rank_hits = vec![0usize; gallery_size];

    for p in 0..scores.probe_ids.len() {
        let identity = &scores.probe_identities[p];
        let mates: Vec<usize> = (0..gallery_size)
            .filter(|&g| &scores.gallery_identities[g] == identity)
            .collect();
        if mates.len() != 1 {
            return Err(Error::ProbeMateCount {
                probe: scores.probe_ids[p].clone(),
                mates: mates.len(),
            });
        }
        let mate = mates[0];

        let mut order: Vec<usize> = (0..gallery_size).collect();
        order.sort_by(|&a, &b| {
            scores.scores[(p, b)]
                .partial_cmp(&scores.scores[(p, a)])
                .expect("finite scores")
                .then_with(|| scores.gallery_ids[a].cmp(&scores.gallery_ids[b]))
        });
        let rank = order.iter().position(|&g| g == mate).expect("mate is in the order") + 1;
        rank_hits[rank - 1] += 1;
    }

    let n = scores.probe_ids.len() as f64;
    let mut rates = Vec::with_capacity(gallery_size);
    let mut cumulative = 0usize;
    for hits in rank_hits {
        cumulative += hits;
        rates.push(cumulative as f64 / n);
    }
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::LabeledScore;

    fn score_set(entries: &[(f64, bool)]) -> ScoreSet {
        ScoreSet {
            entries: entries
                .iter()
                .enumerate()
                .map(|(i, &(score, same))| LabeledScore {
                    id_a: format!("a{i}"),
                    id_b: format!("b{i}"),
                    label: if same { PairLabel::Same } else { PairLabel::Diff },
                    score,
                })
                .collect(),
        }
    }

    #[test]
    fn perfectly_separated_scores() {
        let scores = score_set(&[(0.9, true), (0.8, true), (0.2, false), (0.1, false)]);
        let report = verification_metrics(&scores).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.auc, 1.0);
        assert_eq!(report.eer, 0.0);
        assert_eq!(report.tar_at_far10, 1.0);
        assert_eq!(report.tar_at_far1, 1.0);
    }

    #[test]
    fn hand_case_auc_by_pair_counting() {
        // same: 0.9, 0.8; diff: 0.8, 0.1 -> three ordered pairs plus one
        // tie at half credit: AUC = 3.5 / 4 = 0.875.
        let scores = score_set(&[(0.9, true), (0.8, true), (0.8, false), (0.1, false)]);
        let report = verification_metrics(&scores).unwrap();
        assert!((report.auc - 0.875).abs() < 1e-15);

        // Without the tie (diff score 0.85) pair counting gives 3 / 4.
        let scores = score_set(&[(0.9, true), (0.8, true), (0.85, false), (0.1, false)]);
        let report = verification_metrics(&scores).unwrap();
        assert!((report.auc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_rejected() {
        let scores = score_set(&[(0.9, true), (0.8, true)]);
        assert!(matches!(
            verification_metrics(&scores),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn tied_scores_earn_half_credit() {
        // One positive and one negative sharing a score: AUC = 0.5.
        let scores = score_set(&[(0.5, true), (0.5, false)]);
        let report = verification_metrics(&scores).unwrap();
        assert!((report.auc - 0.5).abs() < 1e-15);
    }

    fn identification(
        gallery: &[(&str, &str)],
        probes: &[(&str, &str)],
        scores: Vec<Vec<f64>>,
    ) -> IdentificationScores {
        IdentificationScores {
            gallery_ids: gallery.iter().map(|g| g.0.to_string()).collect(),
            gallery_identities: gallery.iter().map(|g| g.1.to_string()).collect(),
            probe_ids: probes.iter().map(|p| p.0.to_string()).collect(),
            probe_identities: probes.iter().map(|p| p.1.to_string()).collect(),
            scores: DMatrix::from_fn(probes.len(), gallery.len(), |i, j| scores[i][j]),
        }
    }

    #[test]
    fn cmc_mate_on_top_gives_rank1() {
        let scores = identification(
            &[("g0", "alice"), ("g1", "bob")],
            &[("p0", "alice"), ("p1", "bob")],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        );
        let rates = cmc(&scores).unwrap();
        assert_eq!(rates, vec![1.0, 1.0]);
    }

    #[test]
    fn cmc_hand_ranking_third_of_five() {
        let gallery: Vec<(String, String)> = (0..5)
            .map(|i| (format!("g{i}"), format!("id{i}")))
            .collect();
        let gallery_refs: Vec<(&str, &str)> = gallery
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        // Mate (id2) scores third-highest.
        let scores = identification(
            &gallery_refs,
            &[("p0", "id2")],
            vec![vec![0.9, 0.8, 0.7, 0.6, 0.5]],
        );
        let rates = cmc(&scores).unwrap();
        assert_eq!(rates, vec![0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn cmc_requires_exactly_one_mate() {
        let scores = identification(
            &[("g0", "alice"), ("g1", "alice")],
            &[("p0", "alice")],
            vec![vec![0.9, 0.8]],
        );
        assert!(matches!(cmc(&scores), Err(Error::ProbeMateCount { .. })));
        let scores = identification(
            &[("g0", "alice")],
            &[("p0", "carol")],
            vec![vec![0.9]],
        );
        assert!(matches!(cmc(&scores), Err(Error::ProbeMateCount { .. })));
    }

    #[test]
    fn cmc_breaks_ties_by_gallery_id() {
        // Equal scores: g0 sorts before g1, so a mate at g1 ranks second.
        let scores = identification(
            &[("g0", "alice"), ("g1", "bob")],
            &[("p0", "bob")],
            vec![vec![0.5, 0.5]],
        );
        let rates = cmc(&scores).unwrap();
        assert_eq!(rates, vec![0.0, 1.0]);
    }
}
