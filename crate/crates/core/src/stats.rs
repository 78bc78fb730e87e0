//! Empirical quantiles and Tukey boxplot statistics.

/// Linearly interpolated quantile of already sorted data (the usual
/// "type 7" definition). `p` is clamped to `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantiles(values: &[f64], levels: &[f64]) -> Vec<f64> {
    let s = sorted(values);
    levels.iter().map(|&p| quantile_sorted(&s, p)).collect()
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boxplot {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme observations within 1.5 IQR of the quartiles.
    pub lo_whisker: f64,
    pub hi_whisker: f64,
    pub outliers: Vec<f64>,
}

impl Boxplot {
    pub fn new(values: &[f64]) -> Self {
        let s = sorted(values);
        let q1 = quantile_sorted(&s, 0.25);
        let q3 = quantile_sorted(&s, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside = s.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence);
        let lo_whisker = inside.clone().fold(f64::INFINITY, f64::min);
        let hi_whisker = inside.fold(f64::NEG_INFINITY, f64::max);
        Self {
            median: quantile_sorted(&s, 0.5),
            q1,
            q3,
            lo_whisker,
            hi_whisker,
            outliers: s.iter().copied().filter(|&x| x < lo_fence || x > hi_fence).collect(),
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(quantiles(&v, &[0.0, 0.25, 0.5, 1.0]), vec![1.0, 2.0, 3.0, 5.0]);
        assert_eq!(quantile_sorted(&[1.0, 2.0], 0.5), 1.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn boxplot_flags_outliers() {
        let mut v: Vec<f64> = (1..=9).map(f64::from).collect();
        v.push(100.0);
        let b = Boxplot::new(&v);
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.hi_whisker, 9.0);
        assert_eq!(b.lo_whisker, 1.0);
        assert_eq!(b.median, 5.5);
    }

    #[test]
    fn single_sample_collapses() {
        let b = Boxplot::new(&[2.5]);
        assert_eq!((b.q1, b.median, b.q3, b.lo_whisker, b.hi_whisker), (2.5, 2.5, 2.5, 2.5, 2.5));
        assert!(b.outliers.is_empty());
    }
}
