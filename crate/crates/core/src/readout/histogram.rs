use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{IqPoint, ReadoutError};

pub const DEFAULT_BINS: usize = 81;

/// Counts of the I coordinate over equal-width bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn empty(bins: usize, lo: f64, hi: f64) -> Result<Self, ReadoutError> {
        if bins < 2 {
            return Err(ReadoutError::InvalidHistogram(format!("need at least 2 bins, got {bins}")));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(ReadoutError::InvalidHistogram(format!("range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let bin_edges = (0..=bins).map(|k| lo + width * k as f64).collect();
        Ok(Self { bin_edges, counts: vec![0; bins], total: 0 })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Index of the bin containing `x`; values outside the range are
    /// clamped to the edge bins.
    pub fn bin_index(&self, x: f64) -> usize {
        let lo = self.bin_edges[0];
        let hi = *self.bin_edges.last().unwrap();
        let k = ((x - lo) / (hi - lo) * self.bins() as f64).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(self.bins() - 1)
        }
    }

    pub fn add(&mut self, x: f64) {
        let k = self.bin_index(x);
        self.counts[k] += 1;
        self.total += 1;
    }

    /// Adds the counts of another histogram with identical edges.
    pub fn merge(&mut self, other: &Histogram) -> Result<(), ReadoutError> {
        if self.bin_edges != other.bin_edges {
            return Err(ReadoutError::InvalidHistogram("bin edges differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }
}

/// Histogram of the I coordinates over the data range (or a unit range
/// around a single repeated value).
pub fn build_histogram(points: &[IqPoint], bins: usize) -> Result<Histogram, ReadoutError> {
    let lo = points.iter().map(|p| p.i).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.i).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if points.is_empty() {
        (-1.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    };
    build_histogram_in(points, bins, lo, hi)
}

pub fn build_histogram_in(points: &[IqPoint], bins: usize, lo: f64, hi: f64) -> Result<Histogram, ReadoutError> {
    let mut h = Histogram::empty(bins, lo, hi)?;
    for p in points {
        h.add(p.i);
    }
    Ok(h)
}

/// Two-component Gaussian mixture fitted to one-dimensional data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeFit {
    /// Centers, high mode first.
    pub centers: [f64; 2],
    pub center_errors: [f64; 2],
    pub sigma: f64,
    pub weights: [f64; 2],
    pub iterations: usize,
}

/// Fits two Gaussian modes with a common width by expectation
/// maximization, seeded by splitting the data at `split`.
pub fn fit_two_modes(values: &[f64], split: f64) -> Result<ModeFit, ReadoutError> {
    let (hi_part, lo_part): (Vec<f64>, Vec<f64>) = values.iter().partition(|&&v| v > split);
    if hi_part.len() < 2 || lo_part.len() < 2 {
        return Err(ReadoutError::InvalidHistogram("each mode needs at least two samples".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut mu = [mean(&hi_part), mean(&lo_part)];
    let n = values.len() as f64;
    let mut var = values
        .iter()
        .map(|&v| {
            let m = if v > split { mu[0] } else { mu[1] };
            (v - m).powi(2)
        })
        .sum::<f64>()
        / n;
    let mut w = [hi_part.len() as f64 / n, lo_part.len() as f64 / n];
    let mut iterations = 0;
    let mut resp0 = vec![0.0; values.len()];
    for it in 1..=500 {
        iterations = it;
        let var_floor = var.max(1e-300);
        for (r, &v) in resp0.iter_mut().zip(values) {
            let a = w[0] * (-(v - mu[0]).powi(2) / (2.0 * var_floor)).exp();
            let b = w[1] * (-(v - mu[1]).powi(2) / (2.0 * var_floor)).exp();
            *r = if a + b > 0.0 { a / (a + b) } else if v > split { 1.0 } else { 0.0 };
        }
        let n0: f64 = resp0.iter().sum();
        let n1 = n - n0;
        let new_mu = [
            resp0.iter().zip(values).map(|(r, v)| r * v).sum::<f64>() / n0,
            resp0.iter().zip(values).map(|(r, v)| (1.0 - r) * v).sum::<f64>() / n1,
        ];
        var = resp0
            .iter()
            .zip(values)
            .map(|(r, v)| r * (v - new_mu[0]).powi(2) + (1.0 - r) * (v - new_mu[1]).powi(2))
            .sum::<f64>()
            / n;
        w = [n0 / n, n1 / n];
        let shift = (new_mu[0] - mu[0]).abs().max((new_mu[1] - mu[1]).abs());
        mu = new_mu;
        if shift < 1e-10 * (1.0 + var.sqrt()) {
            break;
        }
    }
    let sigma = var.sqrt();
    Ok(ModeFit {
        centers: mu,
        center_errors: [sigma / (w[0] * n).sqrt(), sigma / (w[1] * n).sqrt()],
        sigma,
        weights: w,
        iterations,
    })
}

pub fn write_histogram_csv<W: Write>(h: &Histogram, mut out: W) -> std::io::Result<()> {
    writeln!(out, "bin_center,count")?;
    for (c, n) in h.centers().iter().zip(&h.counts) {
        writeln!(out, "{c},{n}")?;
    }
    Ok(())
}

pub fn write_scatter_csv<W: Write>(points: &[(IqPoint, u8)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "i,q,state_label")?;
    for (p, label) in points {
        writeln!(out, "{},{},{}", p.i, p.q, label)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_list_gives_zero_counts() {
        let h = build_histogram(&[], DEFAULT_BINS).unwrap();
        assert_eq!(h.total, 0);
        assert!(h.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn single_value_single_bin() {
        let pts = vec![IqPoint::new(1.25, 0.0); 17];
        let h = build_histogram(&pts, 10).unwrap();
        let nonzero: Vec<_> = h.counts.iter().enumerate().filter(|(_, &c)| c > 0).collect();
        assert_eq!(nonzero.len(), 1);
        let k = nonzero[0].0;
        assert!(h.bin_edges[k] <= 1.25 && 1.25 <= h.bin_edges[k + 1]);
        assert_eq!(*nonzero[0].1, 17);
    }

    #[test]
    fn too_few_bins_rejected() {
        assert!(build_histogram(&[], 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let h = build_histogram_in(&[IqPoint::new(0.1, 0.0)], 2, 0.0, 1.0).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&h, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bin_center,count\n0.25,1\n0.75,0\n");
    }
}
