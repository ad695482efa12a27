//! Weighted Gaussian kernel density estimate of the homophily distribution.
//!
//! Every node with a defined homophily value contributes one sample at H(v)
//! with weight 1/p (inverse class frequency), so each class carries equal
//! total mass. The curve is evaluated on a fixed 200-point grid over [0, 1]
//! and renormalized to unit trapezoidal mass on that interval.

use serde::Serialize;

use super::{class_homophily_variance, RelationView};
use crate::error::{Error, Result};
use crate::graph::MultiRelationGraph;

pub const GRID_POINTS: usize = 200;
const FALLBACK_BANDWIDTH: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// True when a degenerate sample forced the fallback bandwidth.
    pub bandwidth_fallback: bool,
    /// Human-readable note on the class-balancing weights used.
    pub weights_note: String,
}

impl DensityCurve {
    /// Trapezoidal mass over [0, 1]; unit by construction.
    pub fn trapezoid_mass(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

fn trapezoid(grid: &[f64], density: &[f64]) -> f64 {
    let mut mass = 0.0;
    for i in 1..grid.len() {
        mass += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
    }
    mass
}

/// Weighted quantile with cumulative-weight crossing.
fn weighted_quantile(sorted: &[(f64, f64)], total_weight: f64, q: f64) -> f64 {
    let target = q * total_weight;
    let mut acc = 0.0;
    for &(x, w) in sorted {
        acc += w;
        if acc >= target {
            return x;
        }
    }
    sorted.last().map(|&(x, _)| x).unwrap_or(0.0)
}

/// Silverman's rule on a weighted sample, with the Kish effective sample
/// size standing in for n.
fn silverman_bandwidth(samples: &[f64], weights: &[f64]) -> f64 {
    let w_sum: f64 = weights.iter().sum();
    let mean = samples.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / w_sum;
    let var = samples
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - mean) * (x - mean))
        .sum::<f64>()
        / w_sum;
    let std = var.sqrt();

    let mut sorted: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .zip(weights.iter().copied())
        .collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let iqr = weighted_quantile(&sorted, w_sum, 0.75) - weighted_quantile(&sorted, w_sum, 0.25);

    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    let w_sq_sum: f64 = weights.iter().map(|w| w * w).sum();
    let n_eff = w_sum * w_sum / w_sq_sum;
    0.9 * spread * n_eff.powf(-0.2)
}

/// Weighted Gaussian KDE on the fixed grid. `bandwidth = None` selects
/// Silverman's rule; a degenerate (zero-spread) sample falls back to 0.05.
pub fn weighted_kde(
    samples: &[f64],
    weights: &[f64],
    bandwidth: Option<f64>,
) -> Result<DensityCurve> {
    if samples.len() < 2 {
        return Err(Error::validation(format!(
            "density curve needs >= 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.len() != weights.len() {
        return Err(Error::validation("samples and weights differ in length"));
    }
    if let Some(b) = bandwidth {
        if b <= 0.0 {
            return Err(Error::validation(format!(
                "bandwidth must be positive, got {b}"
            )));
        }
    }
    let mut fallback = false;
    let bw = match bandwidth {
        Some(b) => b,
        None => {
            let b = silverman_bandwidth(samples, weights);
            if b > 0.0 && b.is_finite() {
                b
            } else {
                fallback = true;
                FALLBACK_BANDWIDTH
            }
        }
    };

    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let w_sum: f64 = weights.iter().sum();
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * bw * w_sum);
    let mut density: Vec<f64> = grid
        .iter()
        .map(|&x| {
            samples
                .iter()
                .zip(weights)
                .map(|(&s, &w)| {
                    let z = (x - s) / bw;
                    w * (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();

    // Renormalize so the mass on [0, 1] is exactly one (the Gaussian tails
    // outside the interval would otherwise leak mass).
    let mass = trapezoid(&grid, &density);
    if mass <= 0.0 {
        return Err(Error::numeric("density curve has zero mass"));
    }
    for d in &mut density {
        *d /= mass;
    }

    Ok(DensityCurve {
        grid,
        density,
        bandwidth: bw,
        bandwidth_fallback: fallback,
        weights_note: "per-node weight 1/p, p = class fraction among nodes with defined homophily"
            .to_string(),
    })
}

/// Density curve of the homophily values under `view`, class-balanced.
pub fn weighted_density_curve(
    graph: &MultiRelationGraph,
    view: RelationView,
    bandwidth: Option<f64>,
) -> Result<DensityCurve> {
    let profile = class_homophily_variance(graph, view)?;
    let mut counts = vec![0usize; graph.label_arity()];
    for (v, h) in profile.per_node.iter().enumerate() {
        if h.is_some() {
            if let Some(l) = graph.label(v) {
                counts[l] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    let mut samples = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for (v, h) in profile.per_node.iter().enumerate() {
        if let (Some(l), Some(h)) = (graph.label(v), h) {
            samples.push(*h);
            weights.push(total as f64 / counts[l] as f64);
        }
    }
    weighted_kde(&samples, &weights, bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_peaks_at_the_sample() {
        let samples = vec![0.5; 10];
        let weights = vec![1.0; 10];
        let curve = weighted_kde(&samples, &weights, Some(0.05)).unwrap();
        let argmax = curve
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        // The grid point nearest 0.5.
        let nearest = curve
            .grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 0.5).abs().partial_cmp(&(b.1 - 0.5).abs()).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, nearest);
    }

    #[test]
    fn degenerate_sample_falls_back_to_default_bandwidth() {
        let samples = vec![0.3; 5];
        let weights = vec![1.0; 5];
        let curve = weighted_kde(&samples, &weights, None).unwrap();
        assert!(curve.bandwidth_fallback);
        assert!((curve.bandwidth - 0.05).abs() < 1e-15);
    }

    #[test]
    fn mass_is_unit_after_renormalization() {
        let samples = vec![0.1, 0.2, 0.8, 0.9, 0.95];
        let weights = vec![1.0, 2.0, 1.0, 0.5, 1.5];
        let curve = weighted_kde(&samples, &weights, None).unwrap();
        let mass = curve.trapezoid_mass();
        assert!((0.98..=1.02).contains(&mass), "mass {mass}");
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_is_200_points_spanning_unit_interval() {
        let curve = weighted_kde(&[0.2, 0.4], &[1.0, 1.0], Some(0.1)).unwrap();
        assert_eq!(curve.grid.len(), GRID_POINTS);
        assert_eq!(curve.grid[0], 0.0);
        assert_eq!(*curve.grid.last().unwrap(), 1.0);
    }
}
