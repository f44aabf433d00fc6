//! Empirical joint law of normalized crossing pairs and the distances used
//! to compare it with a limit law.

use serde::{Deserialize, Serialize};

use crate::crossing::CrossingSample;
use crate::error::{Error, Result};
use crate::limits::LimitLaw;
use crate::scalar::Real;

/// Which coordinate of `(x̂_Υ, x̂_τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinate {
    Upsilon,
    Tau,
}

/// A univariate distribution function, possibly computed numerically.
pub trait Cdf<T> {
    fn cdf(&self, x: T) -> Result<T>;

    /// `lim_{s ↑ x} F(s)`; equal to `cdf` for continuous laws.
    fn cdf_left(&self, x: T) -> Result<T> {
        self.cdf(x)
    }
}

impl<T, F: Fn(T) -> T> Cdf<T> for F {
    fn cdf(&self, x: T) -> Result<T> {
        Ok(self(x))
    }
}

/// A bivariate distribution function.
pub trait JointCdf<T> {
    fn joint_cdf(&self, x: T, y: T) -> Result<T>;
}

impl<T: Real> JointCdf<T> for LimitLaw<T> {
    fn joint_cdf(&self, x: T, y: T) -> Result<T> {
        LimitLaw::joint_cdf(self, x, y)
    }
}

/// Marginal of a limit law, usable wherever a [`Cdf`] is expected.
#[derive(Debug, Clone, Copy)]
pub struct Marginal<'a, T>(pub &'a LimitLaw<T>);

impl<T: Real> Cdf<T> for Marginal<'_, T> {
    fn cdf(&self, x: T) -> Result<T> {
        self.0.marginal_cdf(x)
    }
}

/// A closure `(x, y) -> F(x, y)` as a [`JointCdf`].
pub struct JointFn<F>(pub F);

impl<T, F: Fn(T, T) -> T> JointCdf<T> for JointFn<F> {
    fn joint_cdf(&self, x: T, y: T) -> Result<T> {
        Ok((self.0)(x, y))
    }
}

/// Square evaluation grid `{lo + k (hi - lo) / (points - 1)}²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: -3.0,
            hi: 3.0,
            points: 21,
        }
    }
}

impl GridSpec {
    pub fn nodes<T: Real>(&self) -> Vec<T> {
        if self.points <= 1 {
            return vec![T::c(self.lo)];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|k| T::c(self.lo + step * k as f64)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite()) || self.points < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs lo < hi and at least 2 points, got [{}, {}] with {}",
                self.lo, self.hi, self.points
            )));
        }
        Ok(())
    }
}

/// The retained pairs `(x̂_Υ, x̂_τ)` and how many replications were dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalJointLaw<T> {
    pub pairs: Vec<(T, T)>,
    /// Replications dropped for truncation or no exceedance.
    pub excluded_count: usize,
}

impl<T: Real> EmpiricalJointLaw<T> {
    pub fn new(pairs: Vec<(T, T)>, excluded_count: usize) -> Self {
        Self { pairs, excluded_count }
    }

    /// Keeps the normalized pairs and counts everything else as excluded.
    pub fn from_samples(samples: &[CrossingSample<T>]) -> Self {
        let pairs: Vec<(T, T)> = samples.iter().filter_map(|s| s.normalized).collect();
        let excluded_count = samples.len() - pairs.len();
        Self { pairs, excluded_count }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total(&self) -> usize {
        self.pairs.len() + self.excluded_count
    }

    pub fn exclusion_rate(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            total => self.excluded_count as f64 / total as f64,
        }
    }

    fn coordinate(&self, which: Coordinate) -> impl Iterator<Item = T> + '_ {
        self.pairs.iter().map(move |&(u, t)| match which {
            Coordinate::Upsilon => u,
            Coordinate::Tau => t,
        })
    }

    fn nonempty(&self) -> Result<()> {
        if self.pairs.is_empty() {
            Err(Error::EmptySample)
        } else {
            Ok(())
        }
    }

    /// Sorted values of one coordinate.
    pub fn sorted(&self, which: Coordinate) -> Vec<T> {
        let mut values: Vec<T> = self.coordinate(which).collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("normalized pairs are not NaN"));
        values
    }

    /// Pearson correlation of the two coordinates.
    pub fn correlation(&self) -> Result<T> {
        self.nonempty()?;
        let n = T::from_count(self.len());
        let (su, st) = self
            .pairs
            .iter()
            .fold((T::zero(), T::zero()), |(a, b), &(u, t)| (a + u, b + t));
        let (mu, mt) = (su / n, st / n);
        let (mut cov, mut vu, mut vt) = (T::zero(), T::zero(), T::zero());
        for &(u, t) in &self.pairs {
            cov = cov + (u - mu) * (t - mt);
            vu = vu + (u - mu) * (u - mu);
            vt = vt + (t - mt) * (t - mt);
        }
        Ok(cov / (vu * vt).sqrt())
    }
}

/// Fraction of pairs with `x̂_Υ <= x` and `x̂_τ <= y`.
pub fn ecdf_joint<T: Real>(law: &EmpiricalJointLaw<T>, x: T, y: T) -> Result<T> {
    law.nonempty()?;
    let count = law.pairs.iter().filter(|&&(u, t)| u <= x && t <= y).count();
    Ok(T::from_count(count) / T::from_count(law.len()))
}

/// Fraction of pairs whose chosen coordinate is `<= x`.
pub fn ecdf_marginal<T: Real>(law: &EmpiricalJointLaw<T>, which: Coordinate, x: T) -> Result<T> {
    law.nonempty()?;
    let count = law.coordinate(which).filter(|&v| v <= x).count();
    Ok(T::from_count(count) / T::from_count(law.len()))
}

impl<T: Real> JointCdf<T> for EmpiricalJointLaw<T> {
    fn joint_cdf(&self, x: T, y: T) -> Result<T> {
        ecdf_joint(self, x, y)
    }
}

/// Step-function ECDF of a sample, with exact left limits.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf<T> {
    sorted: Vec<T>,
}

impl<T: Real> Ecdf<T> {
    pub fn new(mut values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("sample is not NaN"));
        Ok(Self { sorted: values })
    }

    fn fraction(&self, count: usize) -> T {
        T::from_count(count) / T::from_count(self.sorted.len())
    }
}

impl<T: Real> Cdf<T> for Ecdf<T> {
    fn cdf(&self, x: T) -> Result<T> {
        Ok(self.fraction(self.sorted.partition_point(|&v| v <= x)))
    }

    fn cdf_left(&self, x: T) -> Result<T> {
        Ok(self.fraction(self.sorted.partition_point(|&v| v < x)))
    }
}

/// `sup_x |F_n(x) - F(x)|` for a sorted sample, checking both sides of every jump.
pub fn ks_statistic<T: Real, C: Cdf<T> + ?Sized>(sorted: &[T], cdf: &C) -> Result<T> {
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = T::from_count(sorted.len());
    let mut worst = T::zero();
    let mut start = 0;
    while start < sorted.len() {
        let value = sorted[start];
        let end = start + sorted[start..].partition_point(|&v| v <= value);
        let below = T::from_count(start) / n;
        let upto = T::from_count(end) / n;
        worst = worst
            .max((upto - cdf.cdf(value)?).abs())
            .max((below - cdf.cdf_left(value)?).abs());
        start = end;
    }
    Ok(worst)
}

/// KS distance between one coordinate's ECDF and a theoretical marginal.
pub fn ks_marginal<T: Real, C: Cdf<T> + ?Sized>(law: &EmpiricalJointLaw<T>, which: Coordinate, cdf: &C) -> Result<T> {
    law.nonempty()?;
    ks_statistic(&law.sorted(which), cdf)
}

fn marginal_table<T: Real>(law: &EmpiricalJointLaw<T>, which: Coordinate, nodes: &[T]) -> Vec<T> {
    let sorted = law.sorted(which);
    let n = T::from_count(sorted.len());
    nodes
        .iter()
        .map(|&x| T::from_count(sorted.partition_point(|&v| v <= x)) / n)
        .collect()
}

/// `sup` over the grid of `|F_n(x, y) - F_n^Υ(x) F_n^τ(y)|`.
pub fn independence_gap_on<T: Real>(law: &EmpiricalJointLaw<T>, grid: &GridSpec) -> Result<T> {
    law.nonempty()?;
    let nodes = grid.nodes::<T>();
    let fu = marginal_table(law, Coordinate::Upsilon, &nodes);
    let ft = marginal_table(law, Coordinate::Tau, &nodes);
    let mut worst = T::zero();
    for (i, &x) in nodes.iter().enumerate() {
        for (j, &y) in nodes.iter().enumerate() {
            worst = worst.max((ecdf_joint(law, x, y)? - fu[i] * ft[j]).abs());
        }
    }
    Ok(worst)
}

/// [`independence_gap_on`] over the 21 × 21 grid on `[-3, 3]²`.
pub fn independence_gap<T: Real>(law: &EmpiricalJointLaw<T>) -> Result<T> {
    independence_gap_on(law, &GridSpec::default())
}

/// `sup` over the grid of `|F_n(x, y) - F(x, y)|`.
pub fn joint_distance_on<T: Real, L: JointCdf<T> + ?Sized>(law: &EmpiricalJointLaw<T>, limit: &L, grid: &GridSpec) -> Result<T> {
    law.nonempty()?;
    let nodes = grid.nodes::<T>();
    let mut worst = T::zero();
    for &x in &nodes {
        for &y in &nodes {
            worst = worst.max((ecdf_joint(law, x, y)? - limit.joint_cdf(x, y)?).abs());
        }
    }
    Ok(worst)
}

/// [`joint_distance_on`] over the 21 × 21 grid on `[-3, 3]²`.
pub fn joint_distance<T: Real, L: JointCdf<T> + ?Sized>(law: &EmpiricalJointLaw<T>, limit: &L) -> Result<T> {
    joint_distance_on(law, limit, &GridSpec::default())
}

/// One row of the empirical-versus-theoretical grid dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow<T> {
    pub x: T,
    pub y: T,
    pub empirical: T,
    pub theoretical: T,
}

/// Both joint CDFs on every grid node, `x` major.
pub fn cdf_grid<T: Real, L: JointCdf<T> + ?Sized>(law: &EmpiricalJointLaw<T>, limit: &L, grid: &GridSpec) -> Result<Vec<GridRow<T>>> {
    let nodes = grid.nodes::<T>();
    let mut rows = Vec::with_capacity(nodes.len() * nodes.len());
    for &x in &nodes {
        for &y in &nodes {
            rows.push(GridRow {
                x,
                y,
                empirical: ecdf_joint(law, x, y)?,
                theoretical: limit.joint_cdf(x, y)?,
            });
        }
    }
    Ok(rows)
}

/// Half-width of the Dvoretzky–Kiefer–Wolfowitz band at level `1 - alpha`.
pub fn dkw_half_width(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::gumbel_cdf;
    use proptest::prelude::*;

    fn law(pairs: &[(f64, f64)]) -> EmpiricalJointLaw<f64> {
        EmpiricalJointLaw::new(pairs.to_vec(), 0)
    }

    #[test]
    fn joint_ecdf_counts() {
        assert_eq!(ecdf_joint(&law(&[(0.0, 0.0)]), 0.0, 0.0).unwrap(), 1.0);
        let two = law(&[(-1.0, 2.0), (3.0, -4.0)]);
        assert_eq!(ecdf_joint(&two, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(ecdf_joint(&two, f64::INFINITY, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(ecdf_marginal(&two, Coordinate::Tau, 0.0).unwrap(), 0.5);
        assert!(matches!(ecdf_joint(&law(&[]), 0.0, 0.0), Err(Error::EmptySample)));
    }

    #[test]
    fn ks_of_two_points_against_uniform() {
        let l = law(&[(0.25, 0.0), (0.75, 0.0)]);
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert!((ks_marginal(&l, Coordinate::Upsilon, &uniform).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_against_own_ecdf_is_zero() {
        let l = law(&[(0.3, 1.0), (0.3, 2.0), (-1.0, 0.0), (2.5, 0.5)]);
        let own = Ecdf::new(l.pairs.iter().map(|p| p.0).collect()).unwrap();
        assert_eq!(ks_marginal(&l, Coordinate::Upsilon, &own).unwrap(), 0.0);
        assert_eq!(joint_distance(&l, &l.clone()).unwrap(), 0.0);
    }

    #[test]
    fn ks_handles_ties() {
        // F_n jumps from 0 to 1 at 0; against Φ the gap is 1/2 on both sides.
        let l = law(&[(0.0, 0.0), (0.0, 0.0)]);
        let d = ks_marginal(&l, Coordinate::Tau, &|x: f64| crate::numerics::phi_cdf(x)).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn comonotone_pairs_have_large_gap() {
        // Pairs (v, v) with v uniform on [0, 1]: gap -> max over grid of min(u, v) - uv.
        let n = 20_000;
        let pairs: Vec<(f64, f64)> = (0..n).map(|k| (k as f64 + 0.5) / n as f64)
            .map(|v| (v, v))
            .collect();
        let gap = independence_gap(&law(&pairs)).unwrap();
        // Grid nodes nearest 1/2 are 0.3 and 0.6, so the grid supremum is 0.24.
        assert!((gap - 0.24).abs() < 1e-3, "{gap}");
        let single = independence_gap(&law(&[(0.1, 0.2)])).unwrap();
        assert!(single <= 1.0);
    }

    #[test]
    fn distance_ignores_order() {
        let mut pairs: Vec<(f64, f64)> = (0..50).map(|k| ((k as f64 * 0.37).sin() * 2.0, (k as f64 * 0.11).cos())).collect();
        let gumbel = LimitLaw::ProductGumbel;
        let a = joint_distance(&law(&pairs), &gumbel).unwrap();
        pairs.reverse();
        pairs.swap(3, 17);
        assert_eq!(a, joint_distance(&law(&pairs), &gumbel).unwrap());
    }

    #[test]
    fn grid_dump_size_and_marginals() {
        let l = law(&[(0.0, 0.1), (1.0, -1.0)]);
        let rows = cdf_grid(&l, &LimitLaw::ProductGumbel, &GridSpec::default()).unwrap();
        assert_eq!(rows.len(), 441);
        assert_eq!(rows[0].x, -3.0);
        assert_eq!(rows[440].y, 3.0);
        let d = ks_marginal(&l, Coordinate::Upsilon, &Marginal(&LimitLaw::ProductGumbel)).unwrap();
        let direct = ks_marginal(&l, Coordinate::Upsilon, &|x: f64| gumbel_cdf(x)).unwrap();
        assert!((d - direct).abs() < 1e-15);
    }

    #[test]
    fn correlation_and_rates() {
        let l = EmpiricalJointLaw::new(vec![(1.0, 2.0), (2.0, 4.0), (3.0, 6.5)], 1);
        assert!(l.correlation().unwrap() > 0.99);
        assert_eq!(l.exclusion_rate(), 0.25);
        assert!((dkw_half_width(10_000, 0.001) - 0.01950).abs() < 1e-4);
    }

    #[test]
    fn single_precision_law() {
        let l = EmpiricalJointLaw::new(vec![(0.0f32, 0.5f32), (1.0, -0.5)], 0);
        assert_eq!(ecdf_joint(&l, 0.5, 0.5).unwrap(), 0.5);
        assert!(independence_gap(&l).unwrap() <= 1.0);
    }

    proptest! {
        #[test]
        fn ecdf_is_monotone_and_bounded(
            pairs in proptest::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 1..60),
            x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, y1 in -5.0f64..5.0, y2 in -5.0f64..5.0,
        ) {
            let l = law(&pairs);
            let (xl, xh) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            let (yl, yh) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
            let low = ecdf_joint(&l, xl, yl).unwrap();
            let high = ecdf_joint(&l, xh, yh).unwrap();
            prop_assert!((0.0..=1.0).contains(&low) && (0.0..=1.0).contains(&high));
            prop_assert!(low <= high);
            prop_assert!(ecdf_joint(&l, xh, yl).unwrap() <= ecdf_marginal(&l, Coordinate::Upsilon, xh).unwrap());
        }

        #[test]
        fn distances_lie_in_unit_interval(pairs in proptest::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 1..40)) {
            let l = law(&pairs);
            let gap = independence_gap(&l).unwrap();
            let dist = joint_distance(&l, &LimitLaw::FullyMixed).unwrap();
            let ks = ks_marginal(&l, Coordinate::Tau, &|x: f64| gumbel_cdf(x)).unwrap();
            for v in [gap, dist, ks] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
