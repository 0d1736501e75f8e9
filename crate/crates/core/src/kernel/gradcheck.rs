use super::{KernelError, NodeId, Tape, Tensor};

/// Compares reverse-mode gradients of a scalar function against central
/// differences with step `h`.
///
/// `f` records the function on a fresh tape given the input leaf and
/// returns the scalar output node. The result is
/// `max_i |analytic_i − numeric_i| / max(|analytic_i|, |numeric_i|, 1e-8)`.
pub fn grad_check<F>(f: F, x0: &Tensor, h: f64) -> Result<f64, KernelError>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId, KernelError>,
{
    if !(h > 0.0) {
        return Err(KernelError::Numeric(format!("finite-difference step {h} must be positive")));
    }
    let eval = |x: &Tensor| -> Result<f64, KernelError> {
        let mut tape = Tape::new();
        let xn = tape.constant(x.clone());
        let out = f(&mut tape, xn)?;
        let v = tape
            .value(out)
            .item()
            .ok_or_else(|| KernelError::NonScalarLoss(tape.value(out).shape().to_vec()))?;
        if !v.is_finite() {
            return Err(KernelError::NonFinite(format!("function value {v}")));
        }
        Ok(v)
    };

    let mut tape = Tape::new();
    let xn = tape.param(x0.clone());
    let out = f(&mut tape, xn)?;
    let analytic = tape.backprop(out)?.get(xn).cloned().expect("input leaf requires grad");

    let mut worst: f64 = 0.0;
    let base = x0.to_vec();
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += h;
        let mut minus = base.clone();
        minus[i] -= h;
        let fp = eval(&Tensor::new(x0.shape().to_vec(), plus)?)?;
        let fm = eval(&Tensor::new(x0.shape().to_vec(), minus)?)?;
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Outcome of checking one op over several random points.
#[derive(Clone, Debug, PartialEq)]
pub struct OpCheck {
    pub name: &'static str,
    /// Worst relative error over all points.
    pub max_rel_error: f64,
}

type Build = fn(&mut Tape, NodeId, NodeId) -> Result<NodeId, KernelError>;

// Each case maps the checked input `x` (3×4) and a constant `k` (3×4) to a
// tensor; the harness reduces it with a fixed random weighting.
const CASES: &[(&str, Build)] = &[
    ("matmul_lhs", |t, x, k| {
        let kt = t.slice_cols(k, 0, 3)?;
        let m = t.gather_rows(kt, &[0, 1, 2, 0])?;
        t.matmul(x, m)
    }),
    ("matmul_rhs", |t, x, k| {
        let m = t.slice_cols(k, 0, 3)?;
        t.matmul(m, x)
    }),
    ("add_row", |t, x, k| {
        let bias = t.gather_rows(x, &[1])?;
        t.add_row(k, bias)
    }),
    ("add", |t, x, k| t.add(x, k)),
    ("sub", |t, x, k| t.sub(k, x)),
    ("mul", |t, x, k| t.mul(x, k)),
    ("scale", |t, x, _| Ok(t.scale(x, -1.7))),
    ("tanh", |t, x, _| Ok(t.tanh(x))),
    ("sigmoid", |t, x, _| Ok(t.sigmoid(x))),
    ("softmax", |t, x, _| Ok(t.softmax(x))),
    ("sum", |t, x, k| {
        let p = t.mul(x, k)?;
        let s = t.sum(p);
        Ok(t.tanh(s))
    }),
    ("slice_cols", |t, x, _| t.slice_cols(x, 1, 2)),
    ("gather_rows", |t, x, _| t.gather_rows(x, &[2, 0, 2, 1])),
    ("select_rows", |t, x, k| {
        let a = t.select_rows(x, k, &[true, false, true])?;
        let b = t.select_rows(k, x, &[true, false, true])?;
        let b = t.scale(b, 0.5);
        t.add(a, b)
    }),
    ("lstm_cell_gates", |t, x, k| {
        let gates = t.add(x, k)?;
        let c = t.slice_cols(k, 1, 1)?;
        t.lstm_cell(gates, c)
    }),
    ("lstm_cell_state", |t, x, k| {
        let c = t.slice_cols(x, 0, 1)?;
        t.lstm_cell(k, c)
    }),
    ("nll", |t, x, _| {
        let p = t.softmax(x);
        t.nll(p, &[3, 0, 2], &[0.5, 0.25, 0.25])
    }),
    ("sq_err", |t, x, k| t.sq_err(x, k, &[0.5, 0.0, 1.5])),
    ("pair_dist", |t, x, k| t.pair_dist(x, k)),
    ("margin_rank", |t, x, k| {
        // The constant offset keeps most hinges away from their kinks.
        let d = t.slice_cols(x, 0, 3)?;
        let off = t.slice_cols(k, 0, 3)?;
        let off = t.mul(off, off)?;
        let off = t.scale(off, 2.0);
        let d = t.add(d, off)?;
        t.margin_rank(d, 1.0)
    }),
    ("loss_dsc", |t, x, k| {
        // Two decoder steps over a 4-word vocabulary, batch 3.
        let w = t.slice_cols(k, 0, 4)?;
        let w = t.gather_rows(w, &[0, 1, 2, 0])?;
        let h1 = t.tanh(x);
        let l1 = t.matmul(h1, w)?;
        let p1 = t.softmax(l1);
        let a = t.nll(p1, &[1, 2, 3], &[1.0 / 6.0; 3])?;
        let h2 = t.sigmoid(x);
        let l2 = t.matmul(h2, w)?;
        let p2 = t.softmax(l2);
        let b = t.nll(p2, &[3, 3, 0], &[1.0 / 6.0; 3])?;
        t.add(a, b)
    }),
    ("loss_act", |t, x, k| {
        let w = t.slice_cols(k, 0, 3)?;
        let w = t.gather_rows(w, &[2, 1, 0, 1])?;
        let delta = t.matmul(x, w)?;
        let frames = t.slice_cols(k, 1, 3)?;
        let pred = t.add(frames, delta)?;
        t.sq_err(pred, frames, &[1.0 / 3.0; 3])
    }),
    ("loss_shr", |t, x, k| {
        let d = t.pair_dist(x, k)?;
        t.margin_rank(d, 1.0)
    }),
];

/// Runs [`grad_check`] on every differentiable tape op and on small
/// compositions shaped like the three training losses, `points` random
/// inputs each.
pub fn gradcheck_suite(points: u64, h: f64) -> Result<Vec<OpCheck>, KernelError> {
    use rand::Rng;
    let random = |seed: u64, scale: f64| {
        let mut rng = crate::rng::SeedTree::new(seed).child("gradcheck").rng();
        Tensor::from_raw(vec![3, 4], (0..12).map(|_| rng.random_range(-scale..scale)).collect())
    };
    let mut out = Vec::with_capacity(CASES.len());
    for (i, &(name, build)) in CASES.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for p in 0..points {
            let seed = (i as u64) << 32 | p;
            let k0 = random(seed.wrapping_mul(3), 1.0);
            let r0 = random(seed.wrapping_mul(3) + 1, 1.0);
            let x0 = random(seed.wrapping_mul(3) + 2, 1.0);
            let f = |t: &mut Tape, x: NodeId| -> Result<NodeId, KernelError> {
                let k = t.constant(k0.clone());
                let y = build(t, x, k)?;
                if t.value(y).len() == 1 {
                    return Ok(y);
                }
                let shape = t.value(y).shape().to_vec();
                let n = t.value(y).len();
                let r = t.constant(Tensor::from_raw(shape, r0.data().iter().cycle().take(n).copied().collect()));
                let w = t.mul(y, r)?;
                Ok(t.sum(w))
            };
            worst = worst.max(grad_check(f, &x0, h)?);
        }
        out.push(OpCheck { name, max_rel_error: worst });
    }
    Ok(out)
}
