//! Ridge regression on standardized features, min-max baselines and the
//! Pearson/MSE report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::WordFeatures;
use crate::corpus::{read_lines, write_file, WordLevelCounts};
use crate::error::{Error, Result};
use crate::scalar::{fmt_exact, parse_exact, Scalar};

pub const MAX_COMPLEXITY: f64 = 4.0;

pub(crate) fn clamp_complexity<T: Scalar>(x: T) -> T {
    x.max(T::zero()).min(T::lit(MAX_COMPLEXITY))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    /// Coefficients in standardized feature space.
    pub weights: Vec<T>,
    pub bias: T,
    pub feature_means: Vec<T>,
    pub feature_scales: Vec<T>,
    pub ridge_lambda: T,
}

impl<T: Scalar> LinearModel<T> {
    /// Constant predictor, mostly useful in tests.
    pub fn constant(n_features: usize, bias: T) -> Self {
        Self {
            weights: vec![T::zero(); n_features],
            bias,
            feature_means: vec![T::zero(); n_features],
            feature_scales: vec![T::one(); n_features],
            ridge_lambda: T::zero(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// Unclamped linear prediction.
    pub fn predict_raw(&self, x: &[T]) -> T {
        let mut y = self.bias;
        for j in 0..self.weights.len() {
            y = y + self.weights[j] * (x[j] - self.feature_means[j]) / self.feature_scales[j];
        }
        y
    }

    /// Coefficients and intercept in the original feature units.
    pub fn coefficients(&self) -> (Vec<T>, T) {
        let coef: Vec<T> = self
            .weights
            .iter()
            .zip(&self.feature_scales)
            .map(|(&w, &s)| w / s)
            .collect();
        let intercept = self.bias
            - coef
                .iter()
                .zip(&self.feature_means)
                .map(|(&c, &m)| c * m)
                .sum::<T>();
        (coef, intercept)
    }

    /// Standardizes one row with the fitted means/scales.
    pub fn standardize(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.feature_means.iter().zip(&self.feature_scales))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let join = |v: &[T]| v.iter().map(|&x| fmt_exact(x)).collect::<Vec<_>>().join(" ");
        let text = format!(
            "linear-model v1\nlambda {}\nbias {}\nweights {}\nmeans {}\nscales {}\n",
            fmt_exact(self.ridge_lambda),
            fmt_exact(self.bias),
            join(&self.weights),
            join(&self.feature_means),
            join(&self.feature_scales),
        );
        write_file(path, &text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let lines = read_lines(path)?;
        let bad = |line: usize, msg: &str| Error::parse(path, line, msg);
        if lines.first().map(|l| l.1.as_str()) != Some("linear-model v1") {
            return Err(bad(1, "missing `linear-model v1` header"));
        }
        let mut fields = std::collections::HashMap::new();
        for (lineno, line) in &lines[1..] {
            let (key, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
            let values = rest
                .split_whitespace()
                .map(parse_exact::<T>)
                .collect::<Option<Vec<T>>>()
                .ok_or_else(|| bad(*lineno, "invalid number"))?;
            fields.insert(key.to_string(), (*lineno, values));
        }
        let mut take = |key: &str| {
            fields
                .remove(key)
                .map(|(_, v)| v)
                .ok_or_else(|| bad(0, &format!("missing `{key}` line")))
        };
        let scalar = |v: Vec<T>, key: &str| {
            if v.len() == 1 {
                Ok(v[0])
            } else {
                Err(bad(0, &format!("`{key}` must hold one value")))
            }
        };
        let ridge_lambda = scalar(take("lambda")?, "lambda")?;
        let bias = scalar(take("bias")?, "bias")?;
        let model = Self {
            weights: take("weights")?,
            bias,
            feature_means: take("means")?,
            feature_scales: take("scales")?,
            ridge_lambda,
        };
        let n = model.weights.len();
        if model.feature_means.len() != n || model.feature_scales.len() != n {
            return Err(bad(0, "weights/means/scales length mismatch"));
        }
        if model.feature_scales.iter().any(|&s| s <= T::zero()) {
            return Err(bad(0, "feature scales must be positive"));
        }
        Ok(model)
    }
}

/// Closed-form ridge regression.
///
/// Features are standardized (zero mean, unit population variance; constant
/// columns keep scale 1), the bias is the mean target and is not penalized,
/// and `(ZᵀZ + λI) w = Zᵀ(y - ȳ)` is solved by Gaussian elimination.
pub fn fit_ridge_regression<T: Scalar>(x: &[Vec<T>], y: &[T], lambda: T) -> Result<LinearModel<T>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("ridge regression needs at least 2 rows"));
    }
    if y.len() != n {
        return Err(Error::invalid("feature/label row count mismatch"));
    }
    if lambda < T::zero() || !lambda.is_finite() {
        return Err(Error::invalid("ridge lambda must be finite and >= 0"));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::invalid("ragged feature matrix"));
    }
    if x.iter().flatten().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN in regression input"));
    }
    let nf = T::from_usize_lossy(n);
    let mut means = vec![T::zero(); p];
    for row in x {
        for j in 0..p {
            means[j] = means[j] + row[j];
        }
    }
    for m in &mut means {
        *m = *m / nf;
    }
    let mut scales = vec![T::zero(); p];
    for row in x {
        for j in 0..p {
            let d = row[j] - means[j];
            scales[j] = scales[j] + d * d;
        }
    }
    for s in &mut scales {
        *s = (*s / nf).sqrt();
        if *s <= T::epsilon() {
            *s = T::one();
        }
    }
    let y_mean = y.iter().copied().sum::<T>() / nf;
    let z: Vec<Vec<T>> = x
        .iter()
        .map(|r| (0..p).map(|j| (r[j] - means[j]) / scales[j]).collect())
        .collect();

    let mut a = vec![vec![T::zero(); p]; p];
    let mut b = vec![T::zero(); p];
    for (row, &yi) in z.iter().zip(y) {
        let yc = yi - y_mean;
        for i in 0..p {
            b[i] = b[i] + row[i] * yc;
            for j in i..p {
                a[i][j] = a[i][j] + row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
        a[i][i] = a[i][i] + lambda;
    }
    let weights = solve_linear(a, b).ok_or_else(|| {
        Error::Numeric("singular normal equations; use a ridge lambda > 0".into())
    })?;
    Ok(LinearModel {
        weights,
        bias: y_mean,
        feature_means: means,
        feature_scales: scales,
        ridge_lambda: lambda,
    })
}

/// Gaussian elimination with partial pivoting. `None` when singular.
pub(crate) fn solve_linear<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(T::zero(), |m, v| m.max(v.abs()))
        .max(T::one());
    let tol = scale * T::epsilon() * T::from_usize_lossy(n.max(1)) * T::lit(16.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() <= tol {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

/// Linear prediction clamped to `[0, 4]`.
pub fn predict_word_complexity<T: Scalar>(model: &LinearModel<T>, features: &WordFeatures<T>) -> T {
    clamp_complexity(model.predict_raw(&features.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Longer words are more complex.
    Length,
    /// Log corpus frequency mapped directly.
    Frequency,
}

impl BaselineKind {
    pub fn feature<T: Scalar>(self, word: &str, counts: &WordLevelCounts) -> T {
        match self {
            BaselineKind::Length => T::from_usize_lossy(word.chars().count()),
            BaselineKind::Frequency => T::lit(counts.total(word) as f64 + 1.0).ln(),
        }
    }
}

/// Min-max normalization of a single feature onto `[0, 4]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxBaseline<T> {
    pub min: T,
    pub max: T,
}

impl<T: Scalar> MinMaxBaseline<T> {
    /// Learns min/max from training-set feature values.
    pub fn fit(values: impl IntoIterator<Item = T>) -> Result<Self> {
        let mut it = values.into_iter().peekable();
        if it.peek().is_none() {
            return Err(Error::invalid("baseline needs at least one training value"));
        }
        let (min, max) = it.fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Ok(Self { min, max })
    }

    /// Midpoint 2.0 when the training range is degenerate.
    pub fn predict(&self, value: T) -> T {
        if self.max <= self.min {
            return T::lit(2.0);
        }
        clamp_complexity(T::lit(MAX_COMPLEXITY) * (value - self.min) / (self.max - self.min))
    }
}

pub fn baseline_predict<T: Scalar>(
    kind: BaselineKind,
    word: &str,
    stats: &MinMaxBaseline<T>,
    counts: &WordLevelCounts,
) -> T {
    stats.predict(kind.feature(word, counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub pearson: f64,
    pub mse: f64,
}

/// Pearson correlation and mean squared error.
///
/// Constant predictions have correlation 0 by convention; constant gold
/// values are an error.
pub fn evaluate_predictor<T: Scalar>(predictions: &[T], gold: &[T]) -> Result<RegressionReport> {
    if predictions.len() != gold.len() {
        return Err(Error::invalid("prediction/gold length mismatch"));
    }
    let n = gold.len();
    if n < 2 {
        return Err(Error::invalid("need at least 2 points to evaluate"));
    }
    let p: Vec<f64> = predictions.iter().map(|v| v.as_f64()).collect();
    let g: Vec<f64> = gold.iter().map(|v| v.as_f64()).collect();
    let nf = n as f64;
    let mp = p.iter().sum::<f64>() / nf;
    let mg = g.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy, mut se) = (0.0, 0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(&g) {
        sxy += (a - mp) * (b - mg);
        sxx += (a - mp) * (a - mp);
        syy += (b - mg) * (b - mg);
        se += (a - b) * (a - b);
    }
    if syy <= 0.0 {
        return Err(Error::invalid("gold values have zero variance"));
    }
    let pearson = if sxx <= 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    };
    Ok(RegressionReport {
        pearson,
        mse: se / nf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_linear_data() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.5 - 1.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0]).collect();
        let m = fit_ridge_regression(&x, &y, 0.0).unwrap();
        let (coef, intercept) = m.coefficients();
        assert!((coef[0] - 2.0).abs() < 1e-9);
        assert!(intercept.abs() < 1e-9);
        let pred: Vec<f64> = x.iter().map(|r| m.predict_raw(r)).collect();
        assert!(evaluate_predictor(&pred, &y).unwrap().mse < 1e-18);
    }

    #[test]
    fn huge_lambda_predicts_mean() {
        let x: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![2.0, 1.0], vec![3.0, 5.0], vec![4.0, 2.0]];
        let y: Vec<f64> = vec![0.0, 1.0, 3.0, 4.0];
        let m = fit_ridge_regression(&x, &y, 1e9).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6));
        for r in &x {
            assert!((m.predict_raw(r) - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_without_ridge() {
        // duplicated column
        let x = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let y = vec![1.0, 2.0, 3.0];
        assert!(matches!(fit_ridge_regression(&x, &y, 0.0), Err(Error::Numeric(_))));
        assert!(fit_ridge_regression(&x, &y, 0.1).is_ok());
        assert!(fit_ridge_regression(&x[..1], &y[..1], 0.1).is_err());
        assert!(fit_ridge_regression(&[vec![f64::NAN], vec![1.0]], &[1.0, 2.0], 1.0).is_err());
    }

    /// Gradient descent on the same penalized objective, written independently.
    fn ridge_by_gradient_descent(z: &[Vec<f64>], yc: &[f64], lambda: f64) -> Vec<f64> {
        let p = z[0].len();
        let mut w = vec![0.0; p];
        for _ in 0..200_000 {
            let mut g = vec![0.0; p];
            for (row, y) in z.iter().zip(yc) {
                let r: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - y;
                for j in 0..p {
                    g[j] += 2.0 * r * row[j];
                }
            }
            for j in 0..p {
                g[j] += 2.0 * lambda * w[j];
                w[j] -= 0.01 * g[j];
            }
        }
        w
    }

    #[test]
    fn three_point_system_matches_gradient_descent() {
        let x = vec![vec![1.0, 2.0], vec![2.0, 0.5], vec![4.0, 3.0]];
        let y = vec![1.0, 2.5, 3.0];
        let lambda = 0.5;
        let m = fit_ridge_regression(&x, &y, lambda).unwrap();
        let z: Vec<Vec<f64>> = x.iter().map(|r| m.standardize(r)).collect();
        let yc: Vec<f64> = y.iter().map(|v| v - m.bias).collect();
        let w = ridge_by_gradient_descent(&z, &yc, lambda);
        for (a, b) in m.weights.iter().zip(&w) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn prediction_clamps() {
        let m = LinearModel::constant(2, 2.0f64);
        let f = WordFeatures {
            length: 5,
            syllables: 2,
            log_frequency: 3.0,
            embedding: vec![],
        };
        let m3 = LinearModel::constant(3, 2.0f64);
        assert_eq!(predict_word_complexity(&m3, &f), 2.0);
        assert_eq!(m.n_features(), 2);
        let high = LinearModel::constant(3, 4.7f64);
        assert_eq!(predict_word_complexity(&high, &f), 4.0);
        let low = LinearModel::constant(3, -0.2f64);
        assert_eq!(predict_word_complexity(&low, &f), 0.0);
    }

    #[test]
    fn baseline_endpoints() {
        let b = MinMaxBaseline::fit([3.0f64, 13.0, 7.0]).unwrap();
        assert_eq!(b.predict(13.0), 4.0);
        assert_eq!(b.predict(3.0), 0.0);
        assert!((b.predict(8.0) - 2.0).abs() < 1e-12);
        assert!((b.predict(5.5) - 1.0).abs() < 1e-12);
        assert_eq!(b.predict(30.0), 4.0);
        let flat = MinMaxBaseline::fit([5.0f64, 5.0]).unwrap();
        assert_eq!(flat.predict(9.0), 2.0);
        assert!(MinMaxBaseline::<f64>::fit([]).is_err());
    }

    #[test]
    fn baseline_features() {
        let counts = WordLevelCounts::from_rows([("cat", [1, 1, 1, 1, 0])]).unwrap();
        assert_eq!(BaselineKind::Length.feature::<f64>("cat", &counts), 3.0);
        assert!((BaselineKind::Frequency.feature::<f64>("cat", &counts) - 5f64.ln()).abs() < 1e-15);
        let stats = MinMaxBaseline { min: 1.0, max: 5.0 };
        assert_eq!(baseline_predict(BaselineKind::Length, "cat", &stats, &counts), 2.0);
    }

    #[test]
    fn report_cases() {
        let g = [1.0, 2.0, 3.0, 4.0];
        let r = evaluate_predictor(&g, &g).unwrap();
        assert!((r.pearson - 1.0).abs() < 1e-12 && r.mse == 0.0);
        let neg = [-1.0, -2.0, -3.0, -4.0];
        assert!((evaluate_predictor(&neg, &g).unwrap().pearson + 1.0).abs() < 1e-12);
        // hand: x = (1,2,3), y = (2,2.5,4): sxy = 2, sxx = 2, syy = 13/6
        let r = evaluate_predictor(&[1.0, 2.0, 3.0], &[2.0, 2.5, 4.0]).unwrap();
        let expected_r = 2.0 / (2.0f64.sqrt() * (13.0f64 / 6.0).sqrt());
        assert!((r.pearson - expected_r).abs() < 1e-12);
        assert!((r.mse - (1.0 + 0.25 + 1.0) / 3.0).abs() < 1e-12);
        assert!(evaluate_predictor(&[1.0, 2.0], &[3.0, 3.0]).is_err());
        assert!(evaluate_predictor(&[1.0], &[3.0]).is_err());
        assert_eq!(evaluate_predictor(&[1.0, 1.0], &[1.0, 3.0]).unwrap().pearson, 0.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let x = vec![vec![1.0f32, 2.0], vec![2.0, 0.5], vec![4.0, 3.0], vec![0.3, 0.1]];
        let y = vec![1.0f32, 2.5, 3.0, 0.2];
        let m = fit_ridge_regression(&x, &y, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        m.save(&p).unwrap();
        assert_eq!(LinearModel::<f32>::load(&p).unwrap(), m);
        std::fs::write(&p, "nonsense\n").unwrap();
        assert!(LinearModel::<f32>::load(&p).is_err());
    }

    proptest! {
        #[test]
        fn normal_equation_residual(rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 6..30),
                                    lambda in 0.01f64..10.0) {
            let y: Vec<f64> = rows.iter().map(|r| r[0] - 0.5 * r[2] + r[3] * r[1]).collect();
            let m = fit_ridge_regression(&rows, &y, lambda).unwrap();
            let z: Vec<Vec<f64>> = rows.iter().map(|r| m.standardize(r)).collect();
            let p = 4;
            for i in 0..p {
                let mut lhs = lambda * m.weights[i];
                let mut rhs = 0.0;
                for (zr, yi) in z.iter().zip(&y) {
                    lhs += zr[i] * zr.iter().zip(&m.weights).map(|(a, b)| a * b).sum::<f64>();
                    rhs += zr[i] * yi;
                }
                prop_assert!((lhs - rhs).abs() < 1e-8, "row {}: {} vs {}", i, lhs, rhs);
            }
        }

        #[test]
        fn pearson_affine_invariant(pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..20),
                                    a in 0.1f64..10.0, b in -10.0f64..10.0) {
            let p: Vec<f64> = pairs.iter().map(|x| x.0).collect();
            let g: Vec<f64> = pairs.iter().map(|x| x.1).collect();
            let gvar = g.iter().map(|v| (v - g[0]).abs()).fold(0.0, f64::max);
            prop_assume!(gvar > 1e-3);
            let r1 = evaluate_predictor(&p, &g).unwrap().pearson;
            let q: Vec<f64> = p.iter().map(|v| a * v + b).collect();
            let r2 = evaluate_predictor(&q, &g).unwrap().pearson;
            prop_assert!((r1 - r2).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r1));
        }
    }
}
