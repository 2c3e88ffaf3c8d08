use crate::taxonomy::NUM_CATEGORIES;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy over the categories. With
/// `-ln σ(z) = softplus(-z)` and `-ln(1 - σ(z)) = softplus(z)`, each term is
/// `t·softplus(-z) + (1-t)·softplus(z)`.
pub fn bce_loss(logits: &[f64; NUM_CATEGORIES], targets: &[f64; NUM_CATEGORIES]) -> f64 {
    logits.iter().zip(targets).map(|(&z, &t)| t * softplus(-z) + (1.0 - t) * softplus(z)).sum::<f64>()
        / NUM_CATEGORIES as f64
}

/// d loss / d z_c = (σ(z_c) - t_c) / 13.
pub fn bce_grad(logits: &[f64; NUM_CATEGORIES], targets: &[f64; NUM_CATEGORIES]) -> [f64; NUM_CATEGORIES] {
    let mut g = [0.0; NUM_CATEGORIES];
    for c in 0..NUM_CATEGORIES {
        g[c] = (sigmoid(logits[c]) - targets[c]) / NUM_CATEGORIES as f64;
    }
    g
}
