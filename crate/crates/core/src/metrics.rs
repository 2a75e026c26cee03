//! Distributional estimators: energy score, energy distance, 1-D Wasserstein-1,
//! empirical quantiles, exceedance probabilities and ECDF contrasts.

use serde::{Deserialize, Serialize};

use crate::error::{DcmaError, Result};
use crate::numcore::{Matrix, RngStream};

/// Empirical sample: one draw per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    points: Matrix,
}

impl SampleSet {
    pub fn new(points: Matrix) -> Self {
        SampleSet { points }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Ok(SampleSet {
            points: Matrix::column_vector(values)?,
        })
    }

    pub fn empty(dim: usize) -> Self {
        SampleSet {
            points: Matrix::zeros(0, dim),
        }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    /// Values of a one-dimensional sample.
    pub fn values(&self) -> Result<&[f64]> {
        self.require_1d()?;
        Ok(self.points.as_slice())
    }

    fn require_1d(&self) -> Result<()> {
        if self.dim() != 1 {
            return Err(DcmaError::Unsupported(format!(
                "operation needs a one-dimensional sample, got dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            return Err(DcmaError::arg(format!("{what}: empty sample")));
        }
        Ok(())
    }
}

#[inline]
fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Monte Carlo energy score of the predictive sample `generated` at `observation`:
/// `1/(2K(K-1)) Σ_{k≠k'} ‖U_k − U_k'‖ − 1/K Σ_k ‖U_k − y‖`. Larger is better.
pub fn energy_score_mc(generated: &SampleSet, observation: &[f64]) -> Result<f64> {
    let k = generated.len();
    if k < 2 {
        return Err(DcmaError::arg(format!(
            "energy score needs at least 2 draws, got {k}"
        )));
    }
    if observation.len() != generated.dim() {
        return Err(DcmaError::arg(format!(
            "observation has dimension {}, draws have {}",
            observation.len(),
            generated.dim()
        )));
    }
    let pts = generated.points();
    let mut pair = 0.0;
    for a in 0..k {
        for b in 0..k {
            if a != b {
                pair += euclid(pts.row(a), pts.row(b));
            }
        }
    }
    let data: f64 = pts.iter_rows().map(|r| euclid(r, observation)).sum();
    let kf = k as f64;
    Ok(pair / (2.0 * kf * (kf - 1.0)) - data / kf)
}

/// Sum of `|v_i - v_j|` over all ordered pairs of a sorted slice.
fn sorted_within_sum(sorted: &[f64]) -> f64 {
    // Σ_{i<j} (v_j − v_i) = Σ_j v_j (2j − n + 1), doubled for ordered pairs.
    let n = sorted.len() as f64;
    let s: f64 = sorted
        .iter()
        .enumerate()
        .map(|(j, v)| v * (2.0 * j as f64 - n + 1.0))
        .sum();
    2.0 * s
}

/// Sum of `|x_i − y_j|` over all pairs, both slices sorted.
fn sorted_cross_sum(x: &[f64], y: &[f64]) -> f64 {
    // For each x_i: Σ_j |x_i − y_j| = x_i·c − S_below + (S_total − S_below) − x_i·(m − c)
    // where c = #{y_j ≤ x_i} and S_below their sum.
    let total: f64 = y.iter().sum();
    let m = y.len() as f64;
    let mut c = 0usize;
    let mut below = 0.0;
    let mut acc = 0.0;
    for &xi in x {
        while c < y.len() && y[c] <= xi {
            below += y[c];
            c += 1;
        }
        let cf = c as f64;
        acc += xi * cf - below + (total - below) - xi * (m - cf);
    }
    acc
}

fn sorted_copy(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Stable order on samples so that `f(x, y)` and `f(y, x)` run identical
/// floating-point operations.
fn canonical_pair<'a>(x: &'a SampleSet, y: &'a SampleSet) -> (&'a SampleSet, &'a SampleSet) {
    let swap = match x.len().cmp(&y.len()) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => x
            .points()
            .as_slice()
            .iter()
            .zip(y.points().as_slice())
            .find(|(a, b)| a.to_bits() != b.to_bits())
            .is_some_and(|(a, b)| a.total_cmp(b).is_gt()),
    };
    if swap {
        (y, x)
    } else {
        (x, y)
    }
}

/// Energy distance `2E‖X−Y‖ − E‖X−X′‖ − E‖Y−Y′‖` with V-statistic
/// (all ordered pairs, self-pairs included) within-sample terms.
///
/// One-dimensional inputs use an exact O(n log n) evaluation of the same
/// pairwise sums; higher dimensions use the direct double loop.
pub fn energy_distance(x: &SampleSet, y: &SampleSet) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(DcmaError::arg(format!(
            "energy distance between dimensions {} and {}",
            x.dim(),
            y.dim()
        )));
    }
    x.require_non_empty("energy distance")?;
    y.require_non_empty("energy distance")?;
    let (x, y) = canonical_pair(x, y);
    let (n, m) = (x.len() as f64, y.len() as f64);

    let (cross, wx, wy) = if x.dim() == 1 {
        let xs = sorted_copy(x.points().as_slice());
        let ys = sorted_copy(y.points().as_slice());
        (
            sorted_cross_sum(&xs, &ys),
            sorted_within_sum(&xs),
            sorted_within_sum(&ys),
        )
    } else {
        let (px, py) = (x.points(), y.points());
        let mut cross = 0.0;
        for a in px.iter_rows() {
            for b in py.iter_rows() {
                cross += euclid(a, b);
            }
        }
        let within = |p: &Matrix| {
            let mut s = 0.0;
            for a in p.iter_rows() {
                for b in p.iter_rows() {
                    s += euclid(a, b);
                }
            }
            s
        };
        (cross, within(px), within(py))
    };
    Ok(2.0 * cross / (n * m) - wx / (n * n) - wy / (m * m))
}

/// Uniform subsample without replacement of at most `max_points` rows, drawn
/// from `stream`. Returns the input unchanged when it is small enough.
pub fn subsample(x: &SampleSet, max_points: usize, stream: &mut RngStream) -> SampleSet {
    if x.len() <= max_points {
        return x.clone();
    }
    let mut idx = stream.permutation(x.len());
    idx.truncate(max_points);
    idx.sort_unstable();
    SampleSet::new(x.points().select_rows(&idx))
}

/// Energy distance for evaluation: exact in one dimension, otherwise on
/// subsamples of at most `max_points` drawn with a fixed seed.
pub fn energy_distance_eval(x: &SampleSet, y: &SampleSet, max_points: usize, seed: u64) -> Result<f64> {
    if x.dim() == 1 {
        return energy_distance(x, y);
    }
    let root = RngStream::new(seed, 0x5eed);
    let xs = subsample(x, max_points, &mut root.split(0));
    let ys = subsample(y, max_points, &mut root.split(1));
    energy_distance(&xs, &ys)
}

/// Wasserstein-1 distance between one-dimensional empirical laws, computed
/// exactly as `∫₀¹ |F_x⁻¹(u) − F_y⁻¹(u)| du` on the merged step grid.
pub fn wasserstein1_1d(x: &SampleSet, y: &SampleSet) -> Result<f64> {
    x.require_1d()?;
    y.require_1d()?;
    x.require_non_empty("wasserstein distance")?;
    y.require_non_empty("wasserstein distance")?;
    let (x, y) = canonical_pair(x, y);
    let xs = sorted_copy(x.points().as_slice());
    let ys = sorted_copy(y.points().as_slice());
    let (n, m) = (xs.len(), ys.len());
    if n == m {
        let s: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).sum();
        return Ok(s / n as f64);
    }
    // Walk breakpoints i/n and j/m in integer arithmetic over the common
    // denominator n·m.
    let (nn, mm) = (n as u128, m as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos: u128 = 0;
    let total = nn * mm;
    let mut acc = 0.0;
    while pos < total {
        let next_x = (i as u128 + 1) * mm;
        let next_y = (j as u128 + 1) * nn;
        let next = next_x.min(next_y);
        acc += (next - pos) as f64 * (xs[i] - ys[j]).abs();
        pos = next;
        if next == next_x {
            i += 1;
        }
        if next == next_y {
            j += 1;
        }
    }
    Ok(acc / total as f64)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(DcmaError::arg(format!("quantile level tau = {tau} is outside (0, 1)")));
    }
    Ok(())
}

/// Linear-interpolation quantile of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if sorted.is_empty() {
        return Err(DcmaError::arg("quantile of an empty sample"));
    }
    let n = sorted.len();
    // 1-based position h = (n − 1)τ + 1
    let h = (n - 1) as f64 * tau + 1.0;
    let lo = h.floor();
    let idx = (lo as usize).clamp(1, n) - 1;
    let frac = h - lo;
    if idx + 1 >= n {
        return Ok(sorted[n - 1]);
    }
    Ok(sorted[idx] + frac * (sorted[idx + 1] - sorted[idx]))
}

pub fn empirical_quantile(x: &SampleSet, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let v = x.values()?;
    if v.is_empty() {
        return Err(DcmaError::arg("quantile of an empty sample"));
    }
    // two order statistics suffice; avoid a full sort for large samples
    let n = v.len();
    let h = (n - 1) as f64 * tau;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let mut work = v.to_vec();
    let (_, &mut a, upper) = work.select_nth_unstable_by(lo, f64::total_cmp);
    if lo + 1 >= n {
        return Ok(a);
    }
    let b = upper.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(a + frac * (b - a))
}

/// Fraction of points with value `>= c`.
pub fn exceedance(x: &SampleSet, c: f64) -> Result<f64> {
    let v = x.values()?;
    if v.is_empty() {
        return Err(DcmaError::arg("exceedance of an empty sample"));
    }
    Ok(v.iter().filter(|&&t| t >= c).count() as f64 / v.len() as f64)
}

/// Empirical CDF at `c`: fraction of points with value `<= c`.
pub fn ecdf(x: &SampleSet, c: f64) -> Result<f64> {
    let v = x.values()?;
    if v.is_empty() {
        return Err(DcmaError::arg("ecdf of an empty sample"));
    }
    Ok(v.iter().filter(|&&t| t <= c).count() as f64 / v.len() as f64)
}

pub fn mean(x: &SampleSet) -> Result<f64> {
    let v = x.values()?;
    if v.is_empty() {
        return Err(DcmaError::arg("mean of an empty sample"));
    }
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Local maxima of a Gaussian kernel density estimate with fixed
/// `bandwidth`, found on a binned grid of `grid` points. Maxima below
/// `min_height` times the global maximum are dropped. Returns mode
/// locations in increasing order.
pub fn kde_modes(x: &SampleSet, bandwidth: f64, grid: usize, min_height: f64) -> Result<Vec<f64>> {
    let v = x.values()?;
    if v.is_empty() {
        return Err(DcmaError::arg("mode search on an empty sample"));
    }
    if !(bandwidth > 0.0) || grid < 3 {
        return Err(DcmaError::arg("bandwidth must be positive and grid >= 3"));
    }
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let (lo, hi) = (lo - 3.0 * bandwidth, hi + 3.0 * bandwidth);
    let step = (hi - lo) / (grid - 1) as f64;
    // linear binning, then convolution with the sampled kernel
    let mut counts = vec![0.0; grid];
    for &t in v {
        let pos = (t - lo) / step;
        let k = (pos.floor() as usize).min(grid - 2);
        let w = pos - k as f64;
        counts[k] += 1.0 - w;
        counts[k + 1] += w;
    }
    let reach = ((4.0 * bandwidth / step).ceil() as usize).min(grid);
    let kernel: Vec<f64> = (0..=reach)
        .map(|j| {
            let u = j as f64 * step / bandwidth;
            (-0.5 * u * u).exp()
        })
        .collect();
    let density: Vec<f64> = (0..grid)
        .map(|i| {
            let a = i.saturating_sub(reach);
            let b = (i + reach).min(grid - 1);
            (a..=b).map(|j| counts[j] * kernel[i.abs_diff(j)]).sum()
        })
        .collect();
    let top = density.iter().copied().fold(0.0, f64::max);
    let mut modes = Vec::new();
    let mut i = 1;
    while i + 1 < grid {
        if density[i] > density[i - 1] {
            // walk across flat tops
            let mut j = i;
            while j + 1 < grid && density[j + 1] == density[i] {
                j += 1;
            }
            if j + 1 < grid && density[j + 1] < density[i] && density[i] >= min_height * top {
                modes.push(lo + step * (i + j) as f64 / 2.0);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok(modes)
}

/// Summary functional applied to a pair of interventional distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalSpec {
    Mean,
    Quantile { tau: f64 },
    Exceedance { threshold: f64 },
    /// Energy distance.
    Ed,
    /// One-dimensional Wasserstein-1 distance.
    W1,
    /// Difference of CDFs at a point.
    DtePoint { threshold: f64 },
    QteCurve { taus: Vec<f64> },
}

impl FunctionalSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionalSpec::Quantile { tau } => check_tau(*tau),
            FunctionalSpec::Exceedance { threshold } | FunctionalSpec::DtePoint { threshold } => {
                if threshold.is_finite() {
                    Ok(())
                } else {
                    Err(DcmaError::arg("threshold must be finite"))
                }
            }
            FunctionalSpec::QteCurve { taus } => {
                if taus.is_empty() {
                    return Err(DcmaError::arg("quantile grid is empty"));
                }
                for &t in taus {
                    check_tau(t)?;
                }
                if taus.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(DcmaError::arg("quantile grid must be strictly increasing"));
                }
                Ok(())
            }
            FunctionalSpec::Mean | FunctionalSpec::Ed | FunctionalSpec::W1 => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FunctionalSpec::Mean => "mean",
            FunctionalSpec::Quantile { .. } => "quantile",
            FunctionalSpec::Exceedance { .. } => "exceedance",
            FunctionalSpec::Ed => "ed",
            FunctionalSpec::W1 => "w1",
            FunctionalSpec::DtePoint { .. } => "dte_point",
            FunctionalSpec::QteCurve { .. } => "qte_curve",
        }
    }

    /// Parameter string used in tabular output.
    pub fn params_label(&self) -> String {
        match self {
            FunctionalSpec::Quantile { tau } => format!("tau={tau}"),
            FunctionalSpec::Exceedance { threshold } | FunctionalSpec::DtePoint { threshold } => {
                format!("c={threshold}")
            }
            FunctionalSpec::QteCurve { taus } => format!(
                "taus={}",
                taus.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";")
            ),
            _ => String::new(),
        }
    }

    /// Discrepancies (ed, w1) are symmetric; the rest are signed contrasts.
    pub fn is_discrepancy(&self) -> bool {
        matches!(self, FunctionalSpec::Ed | FunctionalSpec::W1)
    }
}

/// Value of a functional contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Contrast {
    Scalar(f64),
    Curve(Vec<f64>),
}

impl Contrast {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Contrast::Scalar(v) => Some(*v),
            Contrast::Curve(_) => None,
        }
    }

    pub fn curve(&self) -> Option<&[f64]> {
        match self {
            Contrast::Curve(c) => Some(c),
            Contrast::Scalar(_) => None,
        }
    }

    /// Scalars as a one-element slice, curves as-is.
    pub fn components(&self) -> Vec<f64> {
        match self {
            Contrast::Scalar(v) => vec![*v],
            Contrast::Curve(c) => c.clone(),
        }
    }
}

/// `Ψ(p, q)`: `T(p) − T(q)` for contrast functionals, the discrepancy itself
/// for `ed` and `w1`.
pub fn apply_functional_contrast(spec: &FunctionalSpec, p: &SampleSet, q: &SampleSet) -> Result<Contrast> {
    spec.validate()?;
    let out = match spec {
        FunctionalSpec::Mean => Contrast::Scalar(mean(p)? - mean(q)?),
        FunctionalSpec::Quantile { tau } => {
            Contrast::Scalar(empirical_quantile(p, *tau)? - empirical_quantile(q, *tau)?)
        }
        FunctionalSpec::Exceedance { threshold } => {
            Contrast::Scalar(exceedance(p, *threshold)? - exceedance(q, *threshold)?)
        }
        FunctionalSpec::DtePoint { threshold } => {
            Contrast::Scalar(ecdf(p, *threshold)? - ecdf(q, *threshold)?)
        }
        FunctionalSpec::Ed => Contrast::Scalar(energy_distance(p, q)?),
        FunctionalSpec::W1 => Contrast::Scalar(wasserstein1_1d(p, q)?),
        FunctionalSpec::QteCurve { taus } => {
            let ps = sorted_copy(p.values()?);
            let qs = sorted_copy(q.values()?);
            let curve = taus
                .iter()
                .map(|&t| Ok(quantile_sorted(&ps, t)? - quantile_sorted(&qs, t)?))
                .collect::<Result<Vec<_>>>()?;
            Contrast::Curve(curve)
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> SampleSet {
        SampleSet::from_values(v.to_vec()).unwrap()
    }

    #[test]
    fn energy_score_hand_values() {
        assert!((energy_score_mc(&s(&[0.0, 2.0]), &[1.0]).unwrap()).abs() < 1e-15);
        assert!((energy_score_mc(&s(&[0.0, 2.0]), &[0.0]).unwrap()).abs() < 1e-15);
        assert_eq!(energy_score_mc(&s(&[1.5; 5]), &[1.5]).unwrap(), 0.0);
    }

    #[test]
    fn energy_score_argument_errors() {
        assert!(energy_score_mc(&s(&[1.0]), &[1.0]).is_err());
        assert!(energy_score_mc(&s(&[1.0, 2.0]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn energy_distance_hand_values() {
        assert_eq!(energy_distance(&s(&[0.0, 2.0]), &s(&[1.0])).unwrap(), 1.0);
        assert_eq!(energy_distance(&s(&[0.0]), &s(&[1.0])).unwrap(), 2.0);
        let x = s(&[0.3, -1.2, 4.0, 2.2]);
        assert!(energy_distance(&x, &x).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn energy_distance_sorted_route_matches_double_loop() {
        let mut rs = RngStream::root(4);
        let x: Vec<f64> = (0..37).map(|_| rs.standard_normal()).collect();
        let y: Vec<f64> = (0..23).map(|_| 0.5 + 2.0 * rs.standard_normal()).collect();
        let mut cross = 0.0;
        for a in &x {
            for b in &y {
                cross += (a - b).abs();
            }
        }
        let within = |v: &[f64]| v.iter().map(|a| v.iter().map(|b| (a - b).abs()).sum::<f64>()).sum::<f64>();
        let (n, m) = (x.len() as f64, y.len() as f64);
        let naive = 2.0 * cross / (n * m) - within(&x) / (n * n) - within(&y) / (m * m);
        let fast = energy_distance(&s(&x), &s(&y)).unwrap();
        assert!((naive - fast).abs() < 1e-12, "{naive} vs {fast}");
    }

    #[test]
    fn energy_distance_dimension_mismatch() {
        let a = SampleSet::new(Matrix::zeros(3, 2));
        assert!(energy_distance(&a, &s(&[1.0])).is_err());
    }

    #[test]
    fn wasserstein_hand_values() {
        assert_eq!(wasserstein1_1d(&s(&[1.0, 3.0]), &s(&[2.0, 4.0])).unwrap(), 1.0);
        assert_eq!(wasserstein1_1d(&s(&[0.0; 4]), &s(&[1.0])).unwrap(), 1.0);
        let x = s(&[0.1, 5.0, -2.0]);
        assert_eq!(wasserstein1_1d(&x, &x).unwrap(), 0.0);
        // {0, 1} vs {0, 0, 3}: grid 1/3, 1/2, 2/3, 1 gives
        // 1/3·0 + 1/6·0 + 1/6·1 + 1/3·2 = 5/6
        let w = wasserstein1_1d(&s(&[0.0, 1.0]), &s(&[0.0, 0.0, 3.0])).unwrap();
        assert!((w - 5.0 / 6.0).abs() < 1e-15, "{w}");
    }

    #[test]
    fn wasserstein_rejects_multivariate() {
        let a = SampleSet::new(Matrix::zeros(3, 2));
        assert!(matches!(wasserstein1_1d(&a, &a), Err(DcmaError::Unsupported(_))));
    }

    #[test]
    fn quantile_hand_values() {
        assert_eq!(empirical_quantile(&s(&[5.0, 1.0, 3.0, 2.0, 4.0]), 0.5).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&s(&[0.0, 10.0]), 0.25).unwrap(), 2.5);
        assert_eq!(empirical_quantile(&s(&[7.0; 9]), 0.33).unwrap(), 7.0);
        assert!(empirical_quantile(&s(&[1.0]), 0.0).is_err());
        assert!(empirical_quantile(&s(&[1.0]), 1.0).is_err());
        assert_eq!(empirical_quantile(&s(&[4.0]), 0.9).unwrap(), 4.0);
    }

    #[test]
    fn quantile_select_matches_sorted() {
        let mut rs = RngStream::root(9);
        let v: Vec<f64> = (0..101).map(|_| rs.standard_normal()).collect();
        let sorted = sorted_copy(&v);
        for tau in [0.01, 0.1, 0.37, 0.5, 0.9, 0.999] {
            assert_eq!(
                empirical_quantile(&s(&v), tau).unwrap(),
                quantile_sorted(&sorted, tau).unwrap()
            );
        }
    }

    #[test]
    fn exceedance_values() {
        let x = s(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(exceedance(&x, 3.0).unwrap(), 0.5);
        assert_eq!(exceedance(&x, -10.0).unwrap(), 1.0);
        assert_eq!(exceedance(&x, 10.0).unwrap(), 0.0);
        assert_eq!(ecdf(&x, 2.0).unwrap(), 0.5);
    }

    #[test]
    fn contrasts() {
        let c = apply_functional_contrast(&FunctionalSpec::Mean, &s(&[1.0, 3.0]), &s(&[0.0, 2.0])).unwrap();
        assert_eq!(c, Contrast::Scalar(1.0));
        let p = s(&[0.5, 1.0, 9.0]);
        assert_eq!(
            apply_functional_contrast(&FunctionalSpec::Ed, &p, &p).unwrap(),
            Contrast::Scalar(0.0)
        );
        let q = s(&[3.0, -1.0, 0.2, 8.0, 4.4]);
        let p: Vec<f64> = q.values().unwrap().iter().map(|v| v + 2.0).collect();
        let spec = FunctionalSpec::QteCurve {
            taus: vec![0.1, 0.25, 0.5, 0.8, 0.95],
        };
        let curve = apply_functional_contrast(&spec, &s(&p), &q).unwrap();
        for v in curve.curve().unwrap() {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn functional_validation() {
        assert!(FunctionalSpec::Quantile { tau: 1.2 }.validate().is_err());
        assert!(FunctionalSpec::QteCurve { taus: vec![] }.validate().is_err());
        assert!(FunctionalSpec::QteCurve { taus: vec![0.5, 0.5] }.validate().is_err());
        assert!(FunctionalSpec::QteCurve { taus: vec![0.2, 0.5] }.validate().is_ok());
    }

    #[test]
    fn subsample_caps_size() {
        let x = SampleSet::from_values((0..100).map(f64::from).collect()).unwrap();
        let mut st = RngStream::root(1);
        let sub = subsample(&x, 10, &mut st);
        assert_eq!(sub.len(), 10);
        assert_eq!(subsample(&x, 1000, &mut st), x);
    }
    #[test]
    fn kde_modes_separate_mixture_components() {
        let mut rs = RngStream::root(11);
        let uni: Vec<f64> = (0..4000).map(|_| rs.standard_normal()).collect();
        let modes = kde_modes(&SampleSet::from_values(uni).unwrap(), 0.5, 512, 0.05).unwrap();
        assert_eq!(modes.len(), 1);
        assert!(modes[0].abs() < 0.3);
        let bi: Vec<f64> = (0..4000)
            .map(|i| rs.standard_normal() + if i % 2 == 0 { 2.0 } else { 6.0 })
            .collect();
        let modes = kde_modes(&SampleSet::from_values(bi).unwrap(), 0.5, 512, 0.05).unwrap();
        assert_eq!(modes.len(), 2);
        assert!((modes[1] - modes[0] - 4.0).abs() < 0.5);
    }
}
