use crate::error::{check_dim, Result};

pub const PROB_CLAMP: f64 = 1e-7;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Masked binary cross-entropy, summed over entries.
///
/// Entries with `mask == 0` contribute exactly zero loss and zero gradient.
/// Returns the loss and its gradient w.r.t. `p`.
pub fn bce_loss(p: &[f64], target: &[f64], mask: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim("bce targets", p.len(), target.len())?;
    check_dim("bce mask", p.len(), mask.len())?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p.len()];
    for (i, ((&p, &t), &m)) in p.iter().zip(target).zip(mask).enumerate() {
        if m == 0.0 {
            continue;
        }
        let q = clamp_probability(p);
        loss += m * (-t * q.ln() - (1.0 - t) * (1.0 - q).ln());
        grad[i] = m * (q - t) / (q * (1.0 - q));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_probability() {
        let (loss, _) = bce_loss(&[0.5], &[1.0], &[1.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn fully_masked() {
        let (loss, grad) = bce_loss(&[0.3], &[1.0], &[0.0]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad, vec![0.0]);
    }

    #[test]
    fn two_entries() {
        let (loss, _) = bce_loss(&[0.9, 0.2], &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        let expected = -(0.9f64.ln()) - 0.8f64.ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 0.3285).abs() < 1e-4);
    }

    #[test]
    fn clamps_extremes() {
        let (loss, grad) = bce_loss(&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(loss.is_finite());
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn gradient_matches_difference() {
        let (p, t) = (0.37, 1.0);
        let (_, g) = bce_loss(&[p], &[t], &[1.0]).unwrap();
        let h = 1e-6;
        let up = bce_loss(&[p + h], &[t], &[1.0]).unwrap().0;
        let down = bce_loss(&[p - h], &[t], &[1.0]).unwrap().0;
        assert!((g[0] - (up - down) / (2.0 * h)).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn masked_entries_have_zero_gradient(
            p in proptest::collection::vec(0.0f64..1.0, 1..8),
            seed in any::<u64>(),
        ) {
            let n = p.len();
            let t: Vec<f64> = (0..n).map(|i| ((seed >> i) & 1) as f64).collect();
            let mask: Vec<f64> = (0..n).map(|i| ((seed >> (i + 16)) & 1) as f64).collect();
            let (_, grad) = bce_loss(&p, &t, &mask).unwrap();
            for i in 0..n {
                if mask[i] == 0.0 {
                    prop_assert_eq!(grad[i], 0.0);
                }
            }
        }
    }
}
