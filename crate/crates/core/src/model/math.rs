//! f32 kernels shared by the forward pass and generation. Accumulation
//! order is fixed left-to-right everywhere; do not reorder.

/// out = W x, with W row-major [out_dim x in_dim].
pub fn matvec(w: &[f32], x: &[f32], out_dim: usize, in_dim: usize) -> Vec<f32> {
    debug_assert_eq!(w.len(), out_dim * in_dim);
    debug_assert_eq!(x.len(), in_dim);
    let mut out = Vec::with_capacity(out_dim);
    for row in 0..out_dim {
        let base = row * in_dim;
        let mut acc = 0.0f32;
        for col in 0..in_dim {
            acc += w[base + col] * x[col];
        }
        out.push(acc);
    }
    out
}

pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f32;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// RMS normalization with learned scale.
pub fn rms_norm(x: &[f32], weight: &[f32], eps: f32) -> Vec<f32> {
    debug_assert_eq!(x.len(), weight.len());
    let mut sum_sq = 0.0f32;
    for &v in x {
        sum_sq += v * v;
    }
    let inv_rms = 1.0 / (sum_sq / x.len() as f32 + eps).sqrt();
    x.iter()
        .zip(weight)
        .map(|(&v, &w)| v * inv_rms * w)
        .collect()
}

pub fn silu(x: f32) -> f32 {
    x / (1.0 + (-x).exp())
}

/// In-place max-stabilized softmax.
pub fn softmax(scores: &mut [f32]) {
    let max = scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Rotate query/key pairs in place: interleaved (even, odd) lanes per head.
///
/// `cos`/`sin` hold `head_dim / 2` values for this position.
pub fn apply_rope(vec: &mut [f32], n_heads: usize, head_dim: usize, cos: &[f32], sin: &[f32]) {
    debug_assert_eq!(vec.len(), n_heads * head_dim);
    debug_assert_eq!(cos.len(), head_dim / 2);
    for head in 0..n_heads {
        let base = head * head_dim;
        for j in 0..head_dim / 2 {
            let a = vec[base + 2 * j];
            let b = vec[base + 2 * j + 1];
            vec[base + 2 * j] = a * cos[j] - b * sin[j];
            vec[base + 2 * j + 1] = a * sin[j] + b * cos[j];
        }
    }
}

/// cos/sin tables for one position. Angles are computed in f64 and rounded
/// once, so tables are identical however the position is reached.
pub fn rope_tables(position: usize, head_dim: usize, theta: f64) -> (Vec<f32>, Vec<f32>) {
    let half = head_dim / 2;
    let mut cos = Vec::with_capacity(half);
    let mut sin = Vec::with_capacity(half);
    for j in 0..half {
        let inv_freq = theta.powf(-2.0 * j as f64 / head_dim as f64);
        let angle = position as f64 * inv_freq;
        cos.push(angle.cos() as f32);
        sin.push(angle.sin() as f32);
    }
    (cos, sin)
}

/// Argmax with ties broken by the lowest index.
pub fn argmax_lowest(values: &[f32]) -> usize {
    let mut best = 0;
    let mut best_val = values[0];
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_identity() {
        let w = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(matvec(&w, &[3.0, -2.0], 2, 2), vec![3.0, -2.0]);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut s = vec![1.0, 2.0, 3.0, -1.0];
        softmax(&mut s);
        let sum: f32 = s.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rope_preserves_pair_norm() {
        let (cos, sin) = rope_tables(7, 8, 10_000.0);
        let mut v: Vec<f32> = (0..8).map(|i| i as f32 - 3.5).collect();
        let before: f32 = v.iter().map(|x| x * x).sum();
        apply_rope(&mut v, 1, 8, &cos, &sin);
        let after: f32 = v.iter().map(|x| x * x).sum();
        assert!((before - after).abs() < 1e-4);
    }

    #[test]
    fn rope_at_position_zero_is_identity() {
        let (cos, sin) = rope_tables(0, 4, 10_000.0);
        let mut v = vec![1.0, 2.0, 3.0, 4.0];
        apply_rope(&mut v, 1, 4, &cos, &sin);
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax_lowest(&[5.0]), 0);
    }
}
