//! Earth mover's distance between temperature distributions.
//!
//! In one dimension with cost `|c_i - c_j|` the optimal plan is the monotone
//! (north-west corner) coupling, and its cost equals the integral of the
//! absolute CDF difference. Both are exposed so callers can inspect the flows.

use crate::error::{contract, Result};
use crate::grid::Grid2D;
use crate::metrics::MetricsConfig;

/// Normalized histogram over explicit bin edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if edges.len() != masses.len() + 1 || masses.is_empty() {
            return Err(contract("histogram needs B masses and B+1 edges"));
        }
        if edges.windows(2).any(|e| !(e[1] > e[0])) {
            return Err(contract("histogram edges must be strictly increasing"));
        }
        if masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(contract("histogram masses must be non-negative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(contract(format!("histogram masses sum to {total}, not 1")));
        }
        Ok(Self { edges, masses })
    }

    /// `bins` uniform bins over `[lo, hi]`; values at `hi` land in the last bin.
    pub fn uniform(values: &[f32], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(contract("histogram of no values"));
        }
        if bins < 2 || !(hi > lo) {
            return Err(contract(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let i = (((v as f64 - lo) / (hi - lo)) * bins as f64).floor();
            counts[(i.max(0.0) as usize).min(bins - 1)] += 1;
        }
        let n = values.len() as f64;
        Ok(Self { edges, masses: counts.into_iter().map(|c| c as f64 / n).collect() })
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }
}

/// Flows `f[i][j]` moving mass from source bin `i` to target bin `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    bins: usize,
    flows: Vec<f64>,
}

impl TransportPlan {
    /// Monotone coupling of two histograms on the same bins.
    pub fn monotone(a: &Histogram, b: &Histogram) -> Result<Self> {
        if a.edges != b.edges {
            return Err(contract("histograms must share bin edges"));
        }
        let n = a.bins();
        let mut flows = vec![0.0; n * n];
        let (mut ra, mut rb) = (a.masses.clone(), b.masses.clone());
        let (mut i, mut j) = (0, 0);
        while i < n && j < n {
            let m = ra[i].min(rb[j]);
            flows[i * n + j] += m;
            ra[i] -= m;
            rb[j] -= m;
            // advance whichever side is exhausted; ties advance both
            if ra[i] <= 1e-15 {
                i += 1;
            }
            if rb[j] <= 1e-15 {
                j += 1;
            }
        }
        Ok(Self { bins: n, flows })
    }

    pub fn flow(&self, i: usize, j: usize) -> f64 {
        self.flows[i * self.bins + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.flows.chunks(self.bins).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.bins).map(|j| (0..self.bins).map(|i| self.flow(i, j)).sum()).collect()
    }

    /// `Σ f_ij · |c_i - c_j|`.
    pub fn cost(&self, centers: &[f64]) -> f64 {
        let n = self.bins;
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.flow(i, j) * (centers[i] - centers[j]).abs())
            .sum()
    }
}

/// Exact 1-D transport cost between histograms on shared bins.
pub fn emd_histograms(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.edges != b.edges {
        return Err(contract("histograms must share bin edges"));
    }
    let c = a.centers();
    let (mut ca, mut cb) = (0.0, 0.0);
    let mut total = 0.0;
    for i in 0..a.bins() - 1 {
        ca += a.masses[i];
        cb += b.masses[i];
        total += (ca - cb).abs() * (c[i + 1] - c[i]);
    }
    Ok(total)
}

/// EMD between the value distributions of two maps, binned uniformly over their joint range.
pub fn emd(a: &Grid2D, b: &Grid2D, cfg: &MetricsConfig) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(contract("emd of empty grids"));
    }
    if cfg.emd_bins < 2 {
        return Err(contract("emd needs at least 2 bins"));
    }
    let lo = a.min().min(b.min()) as f64;
    let hi = a.max().max(b.max()) as f64;
    if !(hi > lo) {
        return Ok(0.0);
    }
    let ha = Histogram::uniform(a.values(), lo, hi, cfg.emd_bins)?;
    let hb = Histogram::uniform(b.values(), lo, hi, cfg.emd_bins)?;
    emd_histograms(&ha, &hb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Unit;

    fn onehot(bins: usize, k: usize) -> Histogram {
        let mut m = vec![0.0; bins];
        m[k] = 1.0;
        Histogram::new((0..=bins).map(|i| i as f64 * 0.5).collect(), m).unwrap()
    }

    #[test]
    fn single_flow() {
        let a = onehot(8, 0);
        for j in 0..8 {
            let b = onehot(8, j);
            let c = a.centers();
            assert!((emd_histograms(&a, &b).unwrap() - (c[0] - c[j]).abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn plan_marginals_and_cost() {
        let e: Vec<f64> = (0..=4).map(|i| i as f64).collect();
        let a = Histogram::new(e.clone(), vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let b = Histogram::new(e, vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        let plan = TransportPlan::monotone(&a, &b).unwrap();
        for (x, y) in plan.row_sums().iter().zip(a.masses()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in plan.col_sums().iter().zip(b.masses()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((plan.cost(&a.centers()) - emd_histograms(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn grids() {
        let cfg = MetricsConfig::default();
        let a = Grid2D::from_fn(4, 4, Unit::Celsius, |y, x| (y * 4 + x) as f32);
        assert_eq!(emd(&a, &a, &cfg).unwrap(), 0.0);
        // a permutation of the same values has the same distribution
        assert_eq!(emd(&a, &a.rotate180(), &cfg).unwrap(), 0.0);
        let b = a.map(|v| v + 2.0);
        let d = emd(&a, &b, &cfg).unwrap();
        assert!((d - 2.0).abs() < 0.1, "{d}");
        assert!(Histogram::new(vec![0.0, 1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(Histogram::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.6]).is_err());
    }
}
