//! Closed-form theory checks (best-response threshold, the d*/lambda*
//! exclusion condition) and empirical classification of simulation outcomes
//! (population averages, regime labels, variance-peak threshold estimation).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::PopulationState;
use crate::netgen::TwoLayerNetwork;

/// Default half-width of the plateau bands used by [`classify_regime`].
pub const DEFAULT_PLATEAU_BAND: f64 = 0.2;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("commitment lambda = {0} must be < 1 for the threshold form; use the raw payoff difference at lambda = 1")]
    FullCommitment(f64),
    #[error("lambda = {0} outside [0, 1)")]
    LambdaOutOfRange(f64),
    #[error("innovator {0} has no influence-layer neighbors")]
    InnovatorIsolated(usize),
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error("empty lambda grid")]
    EmptyGrid,
    #[error("grid has {grid} points but {rows} fraction rows")]
    GridMismatch { grid: usize, rows: usize },
    #[error("lambda = {lambda} has {count} replicates; at least 2 are needed for a variance")]
    TooFewReplicates { lambda: f64, count: usize },
    #[error("adoption fraction {value} at lambda = {lambda} outside [0, 1]")]
    FractionOutOfRange { lambda: f64, value: f64 },
}

/// Qualitative outcome of one run at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    ParadigmShift,
    UnpopularNorm,
    PopularDisadvantageousNorm,
    Undetermined,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 4] = [
        RegimeLabel::ParadigmShift,
        RegimeLabel::UnpopularNorm,
        RegimeLabel::PopularDisadvantageousNorm,
        RegimeLabel::Undetermined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeLabel::ParadigmShift => "paradigm_shift",
            RegimeLabel::UnpopularNorm => "unpopular_norm",
            RegimeLabel::PopularDisadvantageousNorm => "popular_disadvantageous_norm",
            RegimeLabel::Undetermined => "undetermined",
        }
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed-form exclusion report for a realized network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    /// Minimum influence-layer degree among the innovator's neighbors.
    pub d_star: usize,
    /// Commitment threshold; `null` when alpha >= d* - 2 (hypothesis fails).
    pub lambda_star: Option<f64>,
    /// Whether alpha < d* - 2 holds.
    pub condition_alpha_ok: bool,
    /// True iff both hypotheses hold, so no paradigm shift under full rationality.
    pub paradigm_shift_excluded: bool,
    pub alpha: f64,
    pub lambda: f64,
}

/// Population averages (<x>, <y>).
pub fn averages(state: &PopulationState) -> (f64, f64) {
    let n = state.n() as f64;
    let sx: i64 = state.x().iter().map(|&a| a as i64).sum();
    let sy: f64 = state.y().iter().sum();
    (sx as f64 / n, sy / n)
}

/// Neighbor-average level above which +1 is the strict best response:
/// -(alpha + 2*lambda*y/(1-lambda)) / (2+alpha).
pub fn best_response_threshold(lambda: f64, y: f64, alpha: f64) -> Result<f64, AnalysisError> {
    if lambda == 1.0 {
        return Err(AnalysisError::FullCommitment(lambda));
    }
    if !(0.0..1.0).contains(&lambda) {
        return Err(AnalysisError::LambdaOutOfRange(lambda));
    }
    Ok(-(alpha + 2.0 * lambda / (1.0 - lambda) * y) / (2.0 + alpha))
}

/// Minimum influence-layer degree among the innovator's influence neighbors.
pub fn compute_d_star(net: &TwoLayerNetwork, s: usize) -> Result<usize, AnalysisError> {
    d_star_of(net.influence(), s)
}

/// [`compute_d_star`] on a bare influence layer (no communication weights needed).
pub fn d_star_of(layer: &crate::netgen::InfluenceLayer, s: usize) -> Result<usize, AnalysisError> {
    if s >= layer.n() {
        return Err(AnalysisError::NodeOutOfRange(s));
    }
    let nbrs = layer.neighbors(s);
    if nbrs.is_empty() {
        return Err(AnalysisError::InnovatorIsolated(s));
    }
    Ok(nbrs.iter().map(|&j| layer.degree(j as usize)).min().unwrap())
}

/// Commitment threshold 1/2 - (2+alpha)/(4d* - 4 - 2alpha), defined only when
/// alpha < d* - 2; `None` means the exclusion hypothesis fails.
pub fn lambda_star(d_star: usize, alpha: f64) -> Option<f64> {
    if alpha < d_star as f64 - 2.0 {
        Some(0.5 - (2.0 + alpha) / (4.0 * d_star as f64 - 4.0 - 2.0 * alpha))
    } else {
        None
    }
}

/// Full exclusion check for a homogeneous commitment level.
pub fn theorem_check(
    net: &TwoLayerNetwork,
    s: usize,
    alpha: f64,
    lambda: f64,
) -> Result<TheoryReport, AnalysisError> {
    let d_star = compute_d_star(net, s)?;
    let ls = lambda_star(d_star, alpha);
    Ok(TheoryReport {
        d_star,
        lambda_star: ls,
        condition_alpha_ok: ls.is_some(),
        paradigm_shift_excluded: ls.is_some_and(|v| lambda < v),
        alpha,
        lambda,
    })
}

/// Maps final averages to a regime label. `plateau_band` is how far from the
/// extremes +-1 an average may sit and still count as a plateau.
pub fn classify_regime(avg_x: f64, avg_y: f64, plateau_band: f64) -> RegimeLabel {
    debug_assert!(plateau_band > 0.0 && plateau_band < 1.0);
    if avg_x >= 1.0 - plateau_band && avg_y > 0.0 {
        RegimeLabel::ParadigmShift
    } else if avg_x <= -1.0 + plateau_band && avg_y > 0.0 {
        RegimeLabel::UnpopularNorm
    } else if avg_x <= -1.0 + plateau_band && avg_y < 0.0 {
        RegimeLabel::PopularDisadvantageousNorm
    } else {
        RegimeLabel::Undetermined
    }
}

/// Variance curve over the commitment grid and the argmax estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub grid: Vec<f64>,
    /// Per-grid-point adoption fractions, one entry per replicate.
    pub adoption_fractions: Vec<Vec<f64>>,
    pub mean_fraction: Vec<f64>,
    /// Unbiased sample variance of the adoption fraction per grid point.
    pub variance: Vec<f64>,
    /// Grid value with maximal variance; exact ties go to the smallest lambda.
    pub lambda_hat: f64,
}

/// Computes per-lambda variance of the adoption fractions and picks the peak.
pub fn estimate_lambda_hat(
    grid: &[f64],
    fractions: &[Vec<f64>],
) -> Result<ThresholdEstimate, AnalysisError> {
    if grid.is_empty() {
        return Err(AnalysisError::EmptyGrid);
    }
    if grid.len() != fractions.len() {
        return Err(AnalysisError::GridMismatch { grid: grid.len(), rows: fractions.len() });
    }
    let mut mean_fraction = Vec::with_capacity(grid.len());
    let mut variance = Vec::with_capacity(grid.len());
    for (&lambda, row) in grid.iter().zip(fractions) {
        if row.len() < 2 {
            return Err(AnalysisError::TooFewReplicates { lambda, count: row.len() });
        }
        for &f in row {
            if !(0.0..=1.0).contains(&f) {
                return Err(AnalysisError::FractionOutOfRange { lambda, value: f });
            }
        }
        let k = row.len() as f64;
        let mean = row.iter().sum::<f64>() / k;
        let var = row.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (k - 1.0);
        mean_fraction.push(mean);
        variance.push(var);
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if variance[i] > variance[best] || (variance[i] == variance[best] && grid[i] < grid[best])
        {
            best = i;
        }
    }
    Ok(ThresholdEstimate {
        grid: grid.to_vec(),
        adoption_fractions: fractions.to_vec(),
        mean_fraction,
        variance,
        lambda_hat: grid[best],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{payoff, AgentParams, PopulationState, Rationality};
    use crate::netgen::{build_random_walk_weights, generate_ba, generate_rr, GraphFamily, InfluenceLayer, TopologySpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn averages_with_single_innovator() {
        let n = 25;
        let mut x = vec![-1i8; n];
        x[0] = 1;
        let state = PopulationState::new(x, vec![0.0; n]).unwrap();
        let (ax, ay) = averages(&state);
        assert_eq!(ax, -1.0 + 2.0 / n as f64);
        assert_eq!(ay, 0.0);
    }

    #[test]
    fn averages_balanced_actions_cancel() {
        let state = PopulationState::new(vec![1, 1, -1, -1], vec![0.0; 4]).unwrap();
        assert_eq!(averages(&state), (0.0, 0.0));
    }

    #[test]
    fn threshold_reference_points() {
        // lam = 0 reduces to the coordination-game threshold -alpha/(2+alpha)
        let t = best_response_threshold(0.0, 0.3, 0.5).unwrap();
        assert!((t - (-0.2)).abs() < 1e-15);
        assert_eq!(best_response_threshold(0.0, 0.0, 0.0).unwrap(), 0.0);
        let t = best_response_threshold(0.2, 0.5, 0.5).unwrap();
        assert!((t - (-0.3)).abs() < 1e-15);
        assert!(best_response_threshold(1.0, 0.5, 0.5).is_err());
        assert!(best_response_threshold(1.2, 0.5, 0.5).is_err());
    }

    #[test]
    fn threshold_margin_sign_matches_payoff_difference() {
        // Appendix-B style equivalence: neighbor average above the threshold
        // iff pi(+1) > pi(-1), with the ties matching under scaled bands
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..5000 {
            let d = rng.gen_range(1..=10usize);
            let n = d + 1;
            let edges = (1..=d as u32).map(|j| (0, j)).collect();
            let g = InfluenceLayer::from_edges(n, edges).unwrap();
            let w = build_random_walk_weights(&g).unwrap();
            let net = TwoLayerNetwork::new(g, w).unwrap();
            let lam: f64 = rng.gen_range(0.0..0.99);
            let alpha: f64 = rng.gen_range(0.0..3.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            let actions: Vec<i8> = (0..n).map(|_| if rng.gen() { 1 } else { -1 }).collect();
            let mut ys = vec![0.0; n];
            ys[0] = y;
            let state = PopulationState::new(actions.clone(), ys).unwrap();
            let mut params =
                AgentParams::homogeneous(n, 0.0, lam, Rationality::Finite(1.0), alpha).unwrap();
            params.set_agent(0, 0.0, lam, Rationality::Finite(1.0)).unwrap();

            let diff = payoff(0, 1, &state, &net, &params).unwrap()
                - payoff(0, -1, &state, &net, &params).unwrap();
            let thr = best_response_threshold(lam, y, alpha).unwrap();
            let margin =
                actions[1..].iter().map(|&a| a as f64).sum::<f64>() / d as f64 - thr;
            // pi(+1) - pi(-1) = (1-lam)(2+alpha)/2 * margin exactly
            let scale = (1.0 - lam) * (2.0 + alpha) / 2.0;
            let band = 1e-10;
            let sign_of = |v: f64, tol: f64| {
                if v.abs() <= tol {
                    0
                } else if v > 0.0 {
                    1
                } else {
                    -1
                }
            };
            assert_eq!(
                sign_of(diff, band * scale),
                sign_of(margin, band),
                "lam={lam} alpha={alpha} y={y} d={d}"
            );
        }
    }

    #[test]
    fn d_star_on_synthetic_graphs() {
        // star centered at the innovator: leaves have degree 1
        let star = InfluenceLayer::from_edges(5, vec![(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let w = build_random_walk_weights(&star).unwrap();
        let net = TwoLayerNetwork::new(star, w).unwrap();
        assert_eq!(compute_d_star(&net, 0).unwrap(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rr = generate_rr(&TopologySpec::new(GraphFamily::Rr, 40, 8, None), &mut rng).unwrap();
        let w = build_random_walk_weights(&rr).unwrap();
        let net = TwoLayerNetwork::new(rr, w).unwrap();
        assert_eq!(compute_d_star(&net, 0).unwrap(), 8);

        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ba =
                generate_ba(&TopologySpec::new(GraphFamily::Ba, 100, 8, None), &mut rng).unwrap();
            let w = build_random_walk_weights(&ba).unwrap();
            let net = TwoLayerNetwork::new(ba, w).unwrap();
            assert!(compute_d_star(&net, 0).unwrap() >= 4);
        }
    }

    #[test]
    fn d_star_rejects_isolated_innovator() {
        let g = InfluenceLayer::from_edges(3, vec![(1, 2)]).unwrap();
        let w = crate::netgen::CommunicationLayer::from_rows(
            3,
            vec![vec![(0, 1.0)], vec![(2, 1.0)], vec![(1, 1.0)]],
        )
        .unwrap();
        let net = TwoLayerNetwork::new(g, w).unwrap();
        assert!(matches!(compute_d_star(&net, 0), Err(AnalysisError::InnovatorIsolated(0))));
    }

    #[test]
    fn lambda_star_reference_values() {
        assert!((lambda_star(8, 0.5).unwrap() - 0.4074074074074074).abs() < 1e-12);
        assert!((lambda_star(4, 0.5).unwrap() - 0.2727272727272727).abs() < 1e-12);
        assert_eq!(lambda_star(3, 1.5), None); // alpha >= d*-2
        assert_eq!(lambda_star(2, 0.0), None);
    }

    #[test]
    fn lambda_star_increases_with_d_star_toward_half() {
        for &alpha in &[0.0f64, 0.5, 1.5] {
            let start = (2.0 + alpha).ceil() as usize + 1;
            let mut prev = lambda_star(start, alpha).unwrap();
            assert!(prev > 0.0 && prev < 0.5);
            for d in start + 1..200 {
                let cur = lambda_star(d, alpha).unwrap();
                assert!(cur > prev, "lambda* must increase strictly in d*");
                prev = cur;
            }
            assert!((lambda_star(1_000_000, alpha).unwrap() - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn theorem_check_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rr = generate_rr(&TopologySpec::new(GraphFamily::Rr, 40, 8, None), &mut rng).unwrap();
        let w = build_random_walk_weights(&rr).unwrap();
        let net = TwoLayerNetwork::new(rr, w).unwrap();

        let r = theorem_check(&net, 0, 0.5, 0.2).unwrap();
        assert_eq!(r.d_star, 8);
        assert!(r.condition_alpha_ok);
        assert!(r.paradigm_shift_excluded);

        let r = theorem_check(&net, 0, 0.5, 0.45).unwrap();
        assert!(!r.paradigm_shift_excluded); // lambda above lambda*

        let r = theorem_check(&net, 0, 6.0, 0.1).unwrap();
        assert!(!r.condition_alpha_ok);
        assert_eq!(r.lambda_star, None);
        assert!(!r.paradigm_shift_excluded);
    }

    #[test]
    fn regime_classification_examples() {
        assert_eq!(classify_regime(0.98, 0.9, 0.2), RegimeLabel::ParadigmShift);
        assert_eq!(classify_regime(-0.97, 0.4, 0.2), RegimeLabel::UnpopularNorm);
        assert_eq!(
            classify_regime(-0.97, -0.8, 0.2),
            RegimeLabel::PopularDisadvantageousNorm
        );
        assert_eq!(classify_regime(0.0, 0.0, 0.2), RegimeLabel::Undetermined);
        // adopted-but-unpopular (never observed in practice) stays undetermined
        assert_eq!(classify_regime(0.95, -0.5, 0.2), RegimeLabel::Undetermined);
        // zero average opinion never counts as support either way
        assert_eq!(classify_regime(-0.95, 0.0, 0.2), RegimeLabel::Undetermined);
    }

    #[test]
    fn lambda_hat_flat_curve_breaks_ties_downward() {
        let grid = [0.1, 0.2, 0.3];
        let rows = vec![vec![0.5, 0.5, 0.5]; 3];
        let est = estimate_lambda_hat(&grid, &rows).unwrap();
        assert_eq!(est.variance, vec![0.0, 0.0, 0.0]);
        assert_eq!(est.lambda_hat, 0.1);
    }

    #[test]
    fn lambda_hat_peaks_at_bimodal_point() {
        // all-0 below, 50/50 split at 0.16, all-1 above; direct variance
        // formula gives k/(4(k-1)) at the split and 0 elsewhere
        let grid = [0.14, 0.16, 0.18];
        let rows = vec![
            vec![0.0; 10],
            (0..10).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect(),
            vec![1.0; 10],
        ];
        let est = estimate_lambda_hat(&grid, &rows).unwrap();
        assert_eq!(est.lambda_hat, 0.16);
        assert!((est.variance[1] - 10.0 / 36.0).abs() < 1e-15);
        assert_eq!(est.mean_fraction[1], 0.5);
    }

    #[test]
    fn lambda_hat_variance_bound() {
        // fractions live in [0, 1], so the unbiased variance is at most
        // k/(4(k-1)) (0.25 in the population limit)
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let k = rng.gen_range(2..12usize);
            let rows: Vec<Vec<f64>> =
                (0..4).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
            let est = estimate_lambda_hat(&[0.0, 0.1, 0.2, 0.3], &rows).unwrap();
            let bound = k as f64 / (4.0 * (k as f64 - 1.0));
            for &v in &est.variance {
                assert!(v >= 0.0 && v <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn lambda_hat_input_validation() {
        assert!(matches!(estimate_lambda_hat(&[], &[]), Err(AnalysisError::EmptyGrid)));
        assert!(estimate_lambda_hat(&[0.1], &[vec![0.5]]).is_err());
        assert!(estimate_lambda_hat(&[0.1], &[vec![0.5, 1.2]]).is_err());
        assert!(estimate_lambda_hat(&[0.1, 0.2], &[vec![0.5, 0.5]]).is_err());
    }
}
