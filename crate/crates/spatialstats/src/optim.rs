//! Derivative-free simplex (Nelder-Mead) minimizer used by the parameter fits.

pub(crate) struct SimplexOptions {
    pub max_iters: usize,
    /// relative tolerance on the spread of function values across the simplex
    pub ftol_rel: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_iters: 500, ftol_rel: 1e-8 }
    }
}

pub(crate) struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0` with initial per-coordinate steps `steps`.
///
/// Standard coefficients (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). Non-finite objective values are treated as +inf, so the
/// simplex backs away from invalid regions.
pub(crate) fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(steps.len(), n);
    let mut eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // initial simplex: x0 plus one perturbed vertex per coordinate
    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    verts.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        verts.push(v);
    }
    let mut fvals: Vec<f64> = verts.iter().map(|v| eval(v)).collect();

    let mut converged = false;
    for _ in 0..opts.max_iters {
        // order vertices by objective
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread = fvals[worst] - fvals[best];
        let size = verts
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&verts[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        let xscale = verts[best].iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if spread.is_finite()
            && spread <= opts.ftol_rel * (1.0 + fvals[best].abs())
            && size <= opts.ftol_rel.sqrt() * xscale
        {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for (k, v) in verts.iter().enumerate() {
            if k == worst {
                continue;
            }
            for i in 0..n {
                centroid[i] += v[i];
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let blend = |a: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + a * (centroid[i] - verts[worst][i]))
                .collect()
        };

        let reflected = blend(1.0);
        let f_r = eval(&reflected);
        if f_r < fvals[best] {
            let expanded = blend(2.0);
            let f_e = eval(&expanded);
            if f_e < f_r {
                verts[worst] = expanded;
                fvals[worst] = f_e;
            } else {
                verts[worst] = reflected;
                fvals[worst] = f_r;
            }
        } else if f_r < fvals[second_worst] {
            verts[worst] = reflected;
            fvals[worst] = f_r;
        } else {
            let contracted = if f_r < fvals[worst] { blend(0.5) } else { blend(-0.5) };
            let f_c = eval(&contracted);
            if f_c < fvals[worst].min(f_r) {
                verts[worst] = contracted;
                fvals[worst] = f_c;
            } else {
                // shrink toward the best vertex
                let best_v = verts[best].clone();
                for (k, v) in verts.iter_mut().enumerate() {
                    if k == best {
                        continue;
                    }
                    for i in 0..n {
                        v[i] = best_v[i] + 0.5 * (v[i] - best_v[i]);
                    }
                    fvals[k] = eval(v);
                }
            }
        }
    }

    let (mut bi, mut bf) = (0, fvals[0]);
    for (k, &v) in fvals.iter().enumerate() {
        if v < bf {
            bi = k;
            bf = v;
        }
    }
    SimplexResult { x: verts[bi].clone(), fx: bf, converged }
}

/// Runs Nelder-Mead from each start and polishes the winner with a
/// second pass using a tighter initial simplex.
pub(crate) fn multi_start<F>(
    mut f: F,
    starts: &[Vec<f64>],
    steps: &[f64],
    opts: &SimplexOptions,
) -> Option<SimplexResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best: Option<SimplexResult> = None;
    for s in starts {
        let r = nelder_mead(&mut f, s, steps, opts);
        if r.fx.is_finite() && best.as_ref().is_none_or(|b| r.fx < b.fx) {
            best = Some(r);
        }
    }
    let best = best?;
    let polish_steps: Vec<f64> = steps.iter().map(|s| s * 0.05).collect();
    let polished = nelder_mead(&mut f, &best.x, &polish_steps, opts);
    Some(if polished.fx <= best.fx { polished } else { best })
}
