//! Soft-margin RBF support vector machines trained by sequential minimal
//! optimization with second-order working-set selection, combined one-vs-one.

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterAssignment, GREY};
use crate::ensemble::Ensemble;
use crate::par;
use crate::{Error, Result};

const TAU: f64 = 1e-12;
const EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Misclassification cost.
    #[serde(rename = "C")]
    pub c: f64,
    /// RBF width in `exp(-gamma * |x - y|^2)`.
    pub gamma: f64,
}

impl SvmConfig {
    /// `C = 10`, `gamma = 1 / parameter count`.
    pub fn default_for(parameter_count: usize) -> Self {
        Self {
            c: 10.0,
            gamma: 1.0 / parameter_count.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Invalid(format!("C must be positive, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Binary machine for the class pair `(positive, negative)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Machine {
    positive: u32,
    negative: u32,
    /// Indices into the model's support points.
    support: Vec<usize>,
    /// `alpha_i * y_i` per support index.
    coef: Vec<f64>,
    rho: f64,
}

impl Machine {
    fn decision(&self, gamma: f64, points: &[Vec<f64>], x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(&s, &c)| c * rbf(gamma, &points[s], x))
            .sum::<f64>()
            - self.rho
    }
}

/// Solves the dual for labels `y` in {+1, -1} over the kernel `k` of the given points.
/// Returns `(alpha, rho)`.
fn solve(k: &[f64], n: usize, y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let max_iter = (100 * n).max(10_000_000);
    for _ in 0..max_iter {
        // first index: maximal violation among I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = -y[t] * g[t];
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        // second index: largest objective decrease among I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * g[t];
            gmax2 = gmax2.max(v);
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let quad = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < EPS || j == usize::MAX {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        if y[i] != y[j] {
            let quad = (k[i * n + i] + k[j * n + j] + 2.0 * qij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[i * n + i] + k[j * n + j] - 2.0 * qij).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, gt) in g.iter_mut().enumerate() {
            *gt += q(i, t) * di + q(j, t) * dj;
        }
    }
    // offset from free variables, else the midpoint of the feasible range
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { 0.5 * (ub + lb) };
    (alpha, rho)
}

/// One-vs-one multi-class SVM over normalized parameter vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SvmModel {
    pub config: SvmConfig,
    /// Ensemble parameter indices the model was trained on, in grid axis order.
    pub axes: Vec<usize>,
    /// Sorted class ids.
    pub classes: Vec<u32>,
    /// Runs whose own prediction disagrees with their cluster label.
    pub training_misclassifications: Vec<String>,
    points: Vec<Vec<f64>>,
    machines: Vec<Machine>,
}

impl SvmModel {
    /// Predicts the class at a point in normalized coordinates over [`Self::axes`].
    /// Majority vote; ties go to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> u32 {
        let mut votes = vec![0usize; self.classes.len()];
        for m in &self.machines {
            let winner = if m.decision(self.config.gamma, &self.points, x) > 0.0 {
                m.positive
            } else {
                m.negative
            };
            votes[self.classes.binary_search(&winner).expect("known class")] += 1;
        }
        let mut best = 0;
        for (k, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = k;
            }
        }
        self.classes[best]
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }
}

/// Trains on all parameter axes. Runs labelled [`GREY`] are left out.
pub fn train_svm(
    ensemble: &Ensemble,
    labels: &ClusterAssignment,
    cfg: SvmConfig,
) -> Result<SvmModel> {
    let axes: Vec<usize> = (0..ensemble.parameter_names().len()).collect();
    train_svm_on(ensemble, labels, cfg, &axes)
}

/// Trains on the parameter axes listed in `axes`.
pub fn train_svm_on(
    ensemble: &Ensemble,
    labels: &ClusterAssignment,
    cfg: SvmConfig,
    axes: &[usize],
) -> Result<SvmModel> {
    cfg.validate()?;
    let p = ensemble.parameter_names().len();
    if axes.is_empty() {
        return Err(Error::Invalid("at least one parameter axis is required".into()));
    }
    if let Some(&bad) = axes.iter().find(|&&a| a >= p) {
        return Err(Error::AxisOutOfRange(bad));
    }
    if labels.labels.len() != ensemble.runs().len() {
        return Err(Error::LengthMismatch {
            left: labels.labels.len(),
            right: ensemble.runs().len(),
        });
    }
    let normalized = ensemble.normalized_parameters();
    let mut points = Vec::new();
    let mut y_all = Vec::new();
    let mut names = Vec::new();
    for (r, &label) in labels.labels.iter().enumerate() {
        if label == GREY {
            continue;
        }
        let x: Vec<f64> = axes.iter().map(|&a| normalized[r][a]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        points.push(x);
        y_all.push(label);
        names.push(ensemble.runs()[r].name.clone());
    }
    let mut classes = y_all.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let n = points.len();
    let kernel: Vec<f64> = par::map_range(n, |i| {
        (0..n).map(|j| rbf(cfg.gamma, &points[i], &points[j])).collect::<Vec<f64>>()
    })
    .concat();
    let pairs: Vec<(u32, u32)> = classes
        .iter()
        .enumerate()
        .flat_map(|(a, &ca)| classes[a + 1..].iter().map(move |&cb| (ca, cb)))
        .collect();
    let machines = par::map_slice(&pairs, |&(pos, neg)| {
        let idx: Vec<usize> = (0..n).filter(|&i| y_all[i] == pos || y_all[i] == neg).collect();
        let m = idx.len();
        let y: Vec<f64> = idx.iter().map(|&i| if y_all[i] == pos { 1.0 } else { -1.0 }).collect();
        let mut k = vec![0.0; m * m];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                k[a * m + b] = kernel[i * n + j];
            }
        }
        let (alpha, rho) = solve(&k, m, &y, cfg.c);
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for a in 0..m {
            if alpha[a] > 0.0 {
                support.push(idx[a]);
                coef.push(alpha[a] * y[a]);
            }
        }
        Machine {
            positive: pos,
            negative: neg,
            support,
            coef,
            rho,
        }
    });
    // keep only support points and remap
    let mut used: Vec<usize> = machines.iter().flat_map(|m| m.support.iter().copied()).collect();
    used.sort_unstable();
    used.dedup();
    let mut model = SvmModel {
        config: cfg,
        axes: axes.to_vec(),
        classes,
        training_misclassifications: Vec::new(),
        points: used.iter().map(|&i| points[i].clone()).collect(),
        machines: machines
            .into_iter()
            .map(|mut m| {
                m.support = m
                    .support
                    .iter()
                    .map(|s| used.binary_search(s).expect("support point kept"))
                    .collect();
                m
            })
            .collect(),
    };
    model.training_misclassifications = (0..n)
        .filter(|&i| model.predict(&points[i]) != y_all[i])
        .map(|i| names[i].clone())
        .collect();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Run, ScalarField, Timestep};

    pub(crate) fn ensemble_1d(xs: &[f64]) -> Ensemble {
        let field = ScalarField::new(vec![2, 2], vec![0.0; 4]).unwrap();
        let runs = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| Run {
                name: format!("r{i}"),
                parameters: vec![x],
                timesteps: vec![Timestep {
                    t: 0.0,
                    field: field.clone(),
                }],
            })
            .collect();
        Ensemble::new(vec!["x".into()], runs).unwrap()
    }

    fn assignment(labels: Vec<u32>) -> ClusterAssignment {
        let count = labels.iter().filter(|&&l| l != GREY).max().map_or(0, |&m| m as usize + 1);
        ClusterAssignment {
            pruning_height: 0.0,
            cluster_count: count,
            nodes: (0..count).collect(),
            labels,
        }
    }

    #[test]
    fn separable_1d() {
        let e = ensemble_1d(&[0.0, 0.1, 0.2, 0.3, 0.7, 0.8, 0.9, 1.0]);
        let a = assignment(vec![0, 0, 0, 0, 1, 1, 1, 1]);
        for c in [1.0, 10.0, 1000.0] {
            let m = train_svm(&e, &a, SvmConfig { c, gamma: 1.0 }).unwrap();
            assert!(m.training_misclassifications.is_empty(), "C = {c}");
            assert_eq!(m.predict(&[0.1]), 0);
            assert_eq!(m.predict(&[0.9]), 1);
            assert_eq!(m.predict(&[0.05]), 0);
            assert_eq!(m.predict(&[0.95]), 1);
        }
    }

    #[test]
    fn three_classes_vote() {
        let e = ensemble_1d(&[0.0, 0.1, 0.45, 0.55, 0.9, 1.0]);
        let a = assignment(vec![2, 2, 0, 0, 1, 1]);
        let m = train_svm(&e, &a, SvmConfig { c: 100.0, gamma: 20.0 }).unwrap();
        assert_eq!(m.classes, vec![0, 1, 2]);
        assert!(m.training_misclassifications.is_empty());
        assert_eq!(m.predict(&[0.05]), 2);
        assert_eq!(m.predict(&[0.5]), 0);
        assert_eq!(m.predict(&[0.95]), 1);
    }

    #[test]
    fn reports_misclassifications() {
        // an isolated label inside the other class cannot be fit with a tiny C
        let e = ensemble_1d(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0]);
        let a = assignment(vec![0, 0, 0, 1, 0, 1, 1, 1]);
        let m = train_svm(&e, &a, SvmConfig { c: 0.01, gamma: 1.0 }).unwrap();
        assert!(m.training_misclassifications.contains(&"r3".to_string()));
    }

    #[test]
    fn errors() {
        let e = ensemble_1d(&[0.0, 1.0]);
        assert!(matches!(
            train_svm(&e, &assignment(vec![0, 0]), SvmConfig::default_for(1)),
            Err(Error::SingleClass)
        ));
        assert!(train_svm(&e, &assignment(vec![0, 1]), SvmConfig { c: 0.0, gamma: 1.0 }).is_err());
        assert!(train_svm(&e, &assignment(vec![0, 1]), SvmConfig { c: 1.0, gamma: -1.0 }).is_err());
        let grey = assignment(vec![0, GREY]);
        assert!(matches!(train_svm(&e, &grey, SvmConfig::default_for(1)), Err(Error::SingleClass)));
    }

    #[test]
    fn defaults() {
        let c = SvmConfig::default_for(4);
        assert_eq!(c.c, 10.0);
        assert_eq!(c.gamma, 0.25);
        let json = serde_json::to_value(c).unwrap();
        assert_eq!(json["C"], 10.0);
    }
}
