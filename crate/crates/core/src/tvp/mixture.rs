//! Seven-component normal mixture approximating the log χ²(1) distribution
//! (Kim, Shephard and Chib, 1998).

use rand::{Rng, RngExt};

pub const COMPONENTS: usize = 7;

pub const PROBABILITIES: [f64; COMPONENTS] =
    [0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750];

pub const MEANS: [f64; COMPONENTS] = [
    -10.12999, -3.97281, -8.56686, 2.77786, 0.61942, 1.79518, -1.08819,
];

pub const VARIANCES: [f64; COMPONENTS] =
    [5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261];

/// Offset so that component means approximate `E[log ε²] = -1.2704`.
pub const MEAN_SHIFT: f64 = 1.2704;

/// Mean of component `j` (0-based) on the `log ε²` scale.
pub fn component_mean(j: usize) -> f64 {
    MEANS[j] - MEAN_SHIFT
}

/// Draws a 1-based component for the residual `z = y* - 2σ`.
pub fn draw_indicator<R: Rng + ?Sized>(z: f64, rng: &mut R) -> u8 {
    let mut logw = [0.0; COMPONENTS];
    for j in 0..COMPONENTS {
        let d = z - component_mean(j);
        logw[j] = PROBABILITIES[j].ln() - 0.5 * VARIANCES[j].ln() - 0.5 * d * d / VARIANCES[j];
    }
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w = [0.0; COMPONENTS];
    let mut total = 0.0;
    for j in 0..COMPONENTS {
        w[j] = (logw[j] - max).exp();
        total += w[j];
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        acc += wj;
        if u < acc {
            return j as u8 + 1;
        }
    }
    COMPONENTS as u8
}
