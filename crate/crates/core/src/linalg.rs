//! Small dense symmetric eigen-solvers: cyclic Jacobi for small matrices and
//! Lanczos with full reorthogonalization for the leading eigenpairs of large
//! implicit operators.

/// Eigenpairs of a dense symmetric `n x n` matrix (row-major), sorted by
/// decreasing eigenvalue. Eigenvectors are unit length with their largest
/// magnitude component positive.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y * n + y].total_cmp(&m[x * n + x]).then(x.cmp(&y)));
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<f64> = (0..n).map(|i| v[i * n + k]).collect();
            fix_sign(&mut col);
            col
        })
        .collect();
    (values, vectors)
}

/// Flips `v` so that its largest-magnitude component (first on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The `k` algebraically largest eigenpairs of the symmetric operator `apply`
/// on `R^n`, from a Krylov space of at most `steps` vectors. Deterministic.
pub fn lanczos_top(
    n: usize,
    k: usize,
    steps: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m_max = steps.clamp(k.min(n), n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut q = start_vector(n, 0);
    let mut restart = 1;
    while basis.len() < m_max {
        let mut w = apply(&q);
        let a = dot(&w, &q);
        alpha.push(a);
        basis.push(q);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        if basis.len() == m_max {
            break;
        }
        let mut nb = norm(&w);
        if nb <= 1e-10 * (alpha.iter().map(|x| x.abs()).fold(0.0, f64::max) + 1e-300) {
            // invariant subspace: continue with a fresh orthogonal direction
            nb = 0.0;
            while restart <= n {
                w = start_vector(n, restart);
                restart += 1;
                for _ in 0..2 {
                    for b in &basis {
                        let c = dot(&w, b);
                        w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                    }
                }
                let wn = norm(&w);
                if wn > 1e-8 {
                    w.iter_mut().for_each(|x| *x /= wn);
                    break;
                }
            }
            if restart > n && norm(&w) <= 1e-8 {
                break;
            }
            beta.push(nb);
            q = w;
            continue;
        }
        w.iter_mut().for_each(|x| *x /= nb);
        beta.push(nb);
        q = w;
    }
    let m = basis.len();
    let mut t = vec![0.0; m * m];
    for i in 0..m {
        t[i * m + i] = alpha[i];
        if i + 1 < m {
            t[i * m + i + 1] = beta[i];
            t[(i + 1) * m + i] = beta[i];
        }
    }
    let (vals, vecs) = symmetric_eigen(&t, m);
    let take = k.min(m);
    let mut out_vecs = Vec::with_capacity(take);
    for y in vecs.iter().take(take) {
        let mut x = vec![0.0; n];
        for (b, &c) in basis.iter().zip(y) {
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
        }
        let xn = norm(&x);
        if xn > 0.0 {
            x.iter_mut().for_each(|v| *v /= xn);
        }
        fix_sign(&mut x);
        out_vecs.push(x);
    }
    (vals[..take].to_vec(), out_vecs)
}

/// Deterministic unit start vectors without special structure.
fn start_vector(n: usize, salt: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let h = (i as u64 + 1)
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((salt as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
            let h = (h ^ (h >> 31)).wrapping_mul(0x94D0_49BB_1331_11EB);
            ((h >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect();
    let vn = norm(&v);
    v.iter_mut().for_each(|x| *x /= vn);
    v
}
