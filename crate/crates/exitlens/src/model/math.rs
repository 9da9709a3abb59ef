//! Scalar numeric kernels. All math is f32 with f32 accumulation; golden
//! tests compare against an independent path at 1e-5 to absorb the
//! order-of-summation drift that allows.

/// y = x · W, with W stored row-major as [in, out].
pub(crate) fn matvec(x: &[f32], w: &[f32], out_dim: usize, y: &mut [f32]) {
    debug_assert_eq!(w.len(), x.len() * out_dim);
    debug_assert_eq!(y.len(), out_dim);
    y.fill(0.0);
    for (i, &xi) in x.iter().enumerate() {
        let row = &w[i * out_dim..(i + 1) * out_dim];
        for (yj, &wij) in y.iter_mut().zip(row) {
            *yj += xi * wij;
        }
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// RMS normalization: x / rms(x) * gain, with eps inside the square root.
pub(crate) fn rms_norm(x: &[f32], gain: &[f32], eps: f32, y: &mut [f32]) {
    let ss: f32 = x.iter().map(|v| v * v).sum();
    let inv = 1.0 / (ss / x.len() as f32 + eps).sqrt();
    for ((yi, &xi), &gi) in y.iter_mut().zip(x).zip(gain) {
        *yi = xi * inv * gi;
    }
}

/// tanh-approximated GELU.
pub(crate) fn gelu(x: f32) -> f32 {
    const SQRT_2_OVER_PI: f32 = 0.797_884_6;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044715 * x * x * x)).tanh())
}

/// Numerically stable in-place softmax.
pub(crate) fn softmax_in_place(scores: &mut [f32]) {
    let max = scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Rotate query/key pairs in place; `vec` is one position's projection laid
/// out head-major, pairs (2i, 2i+1) within each head. Angles are computed in
/// f64 to keep the trig stable at large positions.
pub(crate) fn apply_rope(vec: &mut [f32], num_heads: usize, head_dim: usize, pos: usize) {
    const BASE: f64 = 10000.0;
    for h in 0..num_heads {
        let head = &mut vec[h * head_dim..(h + 1) * head_dim];
        for i in 0..head_dim / 2 {
            let theta = BASE.powf(-2.0 * i as f64 / head_dim as f64);
            let angle = pos as f64 * theta;
            let (sin, cos) = (angle.sin() as f32, angle.cos() as f32);
            let (a, b) = (head[2 * i], head[2 * i + 1]);
            head[2 * i] = a * cos - b * sin;
            head[2 * i + 1] = a * sin + b * cos;
        }
    }
}

/// Index of the maximum value; exact ties resolve to the lowest index, so
/// greedy decoding stays deterministic under equal logits.
pub(crate) fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    let mut best_val = f32::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}
