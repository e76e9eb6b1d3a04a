use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::lanczos_top;
use crate::par;
use crate::similarity::DistanceMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdsOptions {
    pub dim: usize,
    pub max_iter: usize,
    /// Stops once the relative stress decrease of one iteration falls below this.
    pub tol: f64,
    /// Extra runs from random starts; the lowest stress wins.
    pub restarts: usize,
    pub seed: u64,
}

impl MdsOptions {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            max_iter: 300,
            tol: 1e-9,
            restarts: 0,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Invalid(format!("embedding dim must be 1, 2 or 3, got {}", self.dim)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Invalid("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Result of a SMACOF run.
#[derive(Debug, Clone, PartialEq)]
pub struct Smacof {
    pub points: Vec<Vec<f64>>,
    /// Normalized stress-1 after the start configuration and each accepted iteration.
    pub history: Vec<f64>,
}

impl Smacof {
    pub fn stress(&self) -> f64 {
        *self.history.last().expect("history holds the initial stress")
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Normalized stress-1: `sqrt(sum (d_ij - delta_ij)^2 / sum delta_ij^2)` over pairs.
pub fn normalized_stress(delta: &DistanceMatrix, points: &[Vec<f64>]) -> f64 {
    let (raw, norm) = raw_stress(delta, points);
    if norm == 0.0 {
        0.0
    } else {
        (raw / norm).sqrt()
    }
}

fn raw_stress(delta: &DistanceMatrix, x: &[Vec<f64>]) -> (f64, f64) {
    let n = delta.len();
    let rows = par::map_range(n, |i| {
        let mut s = 0.0;
        let mut q = 0.0;
        for j in i + 1..n {
            let t = delta.get(i, j);
            let r = distance(&x[i], &x[j]) - t;
            s += r * r;
            q += t * t;
        }
        (s, q)
    });
    rows.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// One pass: raw stress of `x` and its Guttman transform.
fn guttman(delta: &DistanceMatrix, x: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let n = delta.len();
    let dim = x[0].len();
    let rows = par::map_range(n, |i| {
        let mut out = vec![0.0; dim];
        let mut s = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let t = delta.get(i, j);
            let d = distance(&x[i], &x[j]);
            if j > i {
                s += (d - t) * (d - t);
            }
            if d > 0.0 {
                let w = t / d;
                for k in 0..dim {
                    out[k] += w * (x[i][k] - x[j][k]);
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= n as f64);
        (s, out)
    });
    let mut stress = 0.0;
    let mut next = Vec::with_capacity(n);
    for (s, p) in rows {
        stress += s;
        next.push(p);
    }
    (stress, next)
}

fn center(x: &mut [Vec<f64>]) {
    if x.is_empty() {
        return;
    }
    let dim = x[0].len();
    for k in 0..dim {
        let m = x.iter().map(|p| p[k]).sum::<f64>() / x.len() as f64;
        x.iter_mut().for_each(|p| p[k] -= m);
    }
}

/// Stress majorization from the configuration `init`. Each accepted iteration
/// does not increase the stress; a rounding-level increase ends the run.
pub fn smacof(delta: &DistanceMatrix, init: Vec<Vec<f64>>, max_iter: usize, tol: f64) -> Smacof {
    let (_, norm) = raw_stress(delta, &init);
    if norm == 0.0 || init.len() < 2 {
        let dim = init.first().map_or(0, Vec::len);
        return Smacof {
            points: vec![vec![0.0; dim]; init.len()],
            history: vec![0.0],
        };
    }
    let scale = |raw: f64| (raw / norm).sqrt();
    let mut x = init;
    center(&mut x);
    let (mut s, mut next) = guttman(delta, &x);
    let mut history = vec![scale(s)];
    for _ in 0..max_iter {
        if s == 0.0 {
            break;
        }
        let (s_next, after) = guttman(delta, &next);
        if s_next > s {
            break;
        }
        x = next;
        next = after;
        history.push(scale(s_next));
        let done = s - s_next <= tol * s;
        s = s_next;
        if done {
            break;
        }
    }
    center(&mut x);
    Smacof { points: x, history }
}

/// Torgerson scaling: the top eigenvectors of the double-centered squared
/// distances, scaled by the square roots of their eigenvalues.
pub fn classical_scaling(delta: &DistanceMatrix, dim: usize) -> Vec<Vec<f64>> {
    let n = delta.len();
    let sq: Vec<f64> = delta.entries().iter().map(|v| v * v).collect();
    let centered = |v: &[f64]| -> Vec<f64> {
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter().map(|x| x - m).collect()
    };
    let apply = |v: &[f64]| -> Vec<f64> {
        let w = centered(v);
        let u = par::map_range(n, |i| {
            sq[i * n..(i + 1) * n].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        });
        centered(&u).into_iter().map(|x| -0.5 * x).collect()
    };
    let steps = n.min((4 * dim + 40).max(60));
    let (vals, vecs) = lanczos_top(n, dim, steps, apply);
    let mut x = vec![vec![0.0; dim]; n];
    for (k, (l, v)) in vals.iter().zip(&vecs).enumerate() {
        let s = l.max(0.0).sqrt();
        for i in 0..n {
            x[i][k] = s * v[i];
        }
    }
    x
}

fn random_start(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect()
}

/// SMACOF initialized by classical scaling, plus optional seeded random restarts.
pub fn mds_embed(delta: &DistanceMatrix, opts: &MdsOptions) -> Result<Smacof> {
    opts.validate()?;
    if delta.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("distance matrix"));
    }
    let n = delta.len();
    if n == 0 {
        return Ok(Smacof {
            points: Vec::new(),
            history: vec![0.0],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut init = classical_scaling(delta, opts.dim);
    if init.iter().all(|p| p.iter().all(|&v| v == 0.0)) {
        // no positive spectrum; start from a deterministic random layout
        init = random_start(n, opts.dim, &mut rng);
    }
    let mut best = smacof(delta, init, opts.max_iter, opts.tol);
    for _ in 0..opts.restarts {
        let run = smacof(delta, random_start(n, opts.dim, &mut rng), opts.max_iter, opts.tol);
        if run.stress() < best.stress() {
            best = run;
        }
    }
    Ok(best)
}
