use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Trace, TraceError};
use crate::scalar::Scalar;

/// `count` noisy copies of a normalized trace: i.i.d. `N(0, noise_std^2)`
/// added per cell, clipped to `[0, 1]`.
pub fn augment<T: Scalar, R: Rng + ?Sized>(
    t: &Trace<T>,
    count: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<Vec<Trace<T>>, TraceError> {
    if noise_std.is_nan() || noise_std < 0.0 {
        return Err(TraceError::NegativeNoise(noise_std));
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut copy = t.clone();
        copy.id = format!("{}#aug{}", t.id, k);
        if noise_std > 0.0 {
            let normal = Normal::new(0.0, noise_std).expect("valid std");
            for v in copy.values_mut() {
                let noisy = v.as_f64() + normal.sample(rng);
                *v = T::lit(noisy.clamp(0.0, 1.0));
            }
        }
        out.push(copy);
    }
    Ok(out)
}
