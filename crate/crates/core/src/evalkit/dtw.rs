use super::EvalError;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Cost and length of the cheapest monotone alignment.
fn align<A: AsRef<[f64]>, B: AsRef<[f64]>>(a: &[A], b: &[B]) -> Result<(f64, usize), EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Input("dtw of an empty sequence".into()));
    }
    let d = a[0].as_ref().len();
    if a.iter().any(|x| x.as_ref().len() != d) || b.iter().any(|x| x.as_ref().len() != d) {
        return Err(EvalError::Input("dtw inputs must share one dimension".into()));
    }
    let m = b.len();
    // Row-by-row DP with (cost, path length) per cell.
    let mut prev: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); m];
    let mut cur = prev.clone();
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            let c = dist(ai.as_ref(), bj.as_ref());
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, 0);
                if i > 0 && j > 0 {
                    best = prev[j - 1];
                }
                if i > 0 && prev[j].0 < best.0 {
                    best = prev[j];
                }
                if j > 0 && cur[j - 1].0 < best.0 {
                    best = cur[j - 1];
                }
                best
            };
            cur[j] = (best.0 + c, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Dynamic time warping with Euclidean local cost, unnormalised.
pub fn dtw<A: AsRef<[f64]>, B: AsRef<[f64]>>(a: &[A], b: &[B]) -> Result<f64, EvalError> {
    Ok(align(a, b)?.0)
}

/// DTW cost divided by the number of aligned pairs on the optimal path.
pub fn dtw_normalized<A: AsRef<[f64]>, B: AsRef<[f64]>>(a: &[A], b: &[B]) -> Result<f64, EvalError> {
    let (c, n) = align(a, b)?;
    Ok(c / n as f64)
}
