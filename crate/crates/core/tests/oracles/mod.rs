//! Independent reference implementations used by the integration and
//! acceptance tests. None of this calls into the library under test.
#![allow(dead_code)]

/// Euclidean projection onto `{a : sum(a) = 1, 0 <= a_i <= cap}`.
///
/// Bisection on the shift `tau` of `clip(v - tau, 0, cap)`.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let mass = |tau: f64| v.iter().map(|&x| (x - tau).clamp(0.0, cap)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - tau).clamp(0.0, cap)).collect()
}

pub fn quad_form(gram: &[f64], l: usize, a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..l {
        for j in 0..l {
            s += a[i] * a[j] * gram[i * l + j];
        }
    }
    s
}

fn gradient(gram: &[f64], l: usize, a: &[f64]) -> Vec<f64> {
    (0..l)
        .map(|i| 2.0 * (0..l).map(|j| gram[i * l + j] * a[j]).sum::<f64>())
        .collect()
}

/// Minimise `a' K a` on the capped simplex with accelerated projected
/// gradient (FISTA with function-value restart).
///
/// Stops once the projected-gradient step moves the iterate by less than
/// `stationarity` in the max norm. Returns the minimiser, `a' K a` and the
/// final residual.
pub fn qp_oracle(gram: &[f64], l: usize, cap: f64, stationarity: f64) -> (Vec<f64>, f64, f64) {
    // Gershgorin bound on the largest eigenvalue of 2K
    let lipschitz = 2.0
        * (0..l)
            .map(|i| (0..l).map(|j| gram[i * l + j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let pg_step = |y: &[f64]| {
        let g = gradient(gram, l, y);
        let moved: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - step * gi).collect();
        project_capped_simplex(&moved, cap)
    };

    let mut x = project_capped_simplex(&vec![1.0 / l as f64; l], cap);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = quad_form(gram, l, &x);
    let mut restarted = false;
    let mut residual = f64::INFINITY;
    for _ in 0..1_000_000 {
        let x_next = pg_step(&y);
        let f_next = quad_form(gram, l, &x_next);
        // restart momentum; a plain step from x may still rise by rounding
        if f_next > fx && !restarted {
            y = x.clone();
            t = 1.0;
            restarted = true;
            continue;
        }
        restarted = false;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = x_next
            .iter()
            .zip(&x)
            .map(|(xn, xo)| xn + (t - 1.0) / t_next * (xn - xo))
            .collect();
        x = x_next;
        fx = f_next;
        t = t_next;

        let probe = pg_step(&x);
        residual = probe.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        if residual < stationarity {
            break;
        }
    }
    (x, fx, residual)
}

/// Plateau by enumeration of every index interval.
pub fn brute_plateau(values: &[f64], rel_tol: f64) -> Option<(usize, usize)> {
    let finite: Vec<f64> = values.iter().cloned().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    let vmin = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let thr = vmin + rel_tol * (vmax - vmin);
    let ok = |i: usize| values[i].is_finite() && values[i] <= thr;
    let n = values.len();
    let mut best: Option<(usize, usize)> = None;
    for s in 0..n {
        for e in s..n {
            let all_ok = (s..=e).all(ok);
            let maximal = (s == 0 || !ok(s - 1)) && (e + 1 == n || !ok(e + 1));
            let has_min = (s..=e).any(|i| values[i] == vmin);
            if all_ok && maximal && has_min {
                let better = match best {
                    None => true,
                    Some((bs, be)) => e - s > be - bs || (e - s == be - bs && s > bs),
                };
                if better {
                    best = Some((s, e));
                }
            }
        }
    }
    best
}

/// `p[i][b]` by a triple loop over methods, betas and tasks.
pub fn brute_dolan_more(q: &[Vec<f64>], betas: &[f64]) -> Vec<Vec<f64>> {
    let tasks = q[0].len();
    let mut out = vec![vec![0.0; betas.len()]; q.len()];
    for (i, row) in q.iter().enumerate() {
        for (b, &beta) in betas.iter().enumerate() {
            let mut count = 0;
            for t in 0..tasks {
                let mut best = q[0][t];
                for other in q {
                    if other[t] > best {
                        best = other[t];
                    }
                }
                if row[t] >= best / beta {
                    count += 1;
                }
            }
            out[i][b] = count as f64 / tasks as f64;
        }
    }
    out
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let ap: Vec<f64> = a.iter().zip(p).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    a.iter()
        .zip(&ab)
        .zip(p)
        .map(|((ai, di), pi)| (ai + t * di - pi).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Whether `candidate` is among the `k` nearest other points of `source`
/// (any point tied with the k-th distance counts).
pub fn is_k_nearest(points: &[Vec<f64>], source: usize, candidate: usize, k: usize) -> bool {
    if candidate == source {
        return false;
    }
    let d = |j: usize| -> f64 { points[source].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum() };
    let mut dists: Vec<f64> = (0..points.len()).filter(|&j| j != source).map(d).collect();
    dists.sort_by(f64::total_cmp);
    d(candidate) <= dists[k.min(dists.len()) - 1]
}

/// Gaussian kernel written out directly.
pub fn gauss(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    (-x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / gamma).exp()
}

/// `-sum_ij y_i y_j K_ij` by the full double loop.
pub fn naive_polarization(points: &[(Vec<f64>, f64)], gamma: f64) -> f64 {
    let mut s = 0.0;
    for (xi, yi) in points {
        for (xj, yj) in points {
            s += yi * yj * gauss(xi, xj, gamma);
        }
    }
    -s
}
