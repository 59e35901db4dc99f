/// L2 projection onto non-decreasing sequences (pool adjacent violators).
pub fn isotonic_inference(noisy: &[f64]) -> Vec<f64> {
    // (sum, count) per pooled block
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(noisy.len());
    for &y in noisy {
        blocks.push((y, 1));
        while blocks.len() > 1 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 <= s2 / c2 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1 + s2, c1 + c2);
        }
    }
    let mut out = Vec::with_capacity(noisy.len());
    for (s, c) in blocks {
        out.extend(std::iter::repeat_n(s / c as f64, c));
    }
    out
}

/// Projection onto non-decreasing, non-negative sequences.
pub fn isotonic_inference_nonneg(noisy: &[f64]) -> Vec<f64> {
    isotonic_inference(noisy).into_iter().map(|v| v.max(0.0)).collect()
}
