use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{ActivationSpec, Matrix, Rng};
use crate::scalar::Scalar;

/// Single-hidden-layer class with `||w_m||_2 <= c3` and `|v_m| <= c4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    pub c3: f64,
    pub c4: f64,
    pub width: usize,
    pub activation: ActivationSpec,
}

pub const MAX_SAMPLES: usize = 64;
pub const MAX_WIDTH: usize = 16;
const REFINE_STEPS: usize = 200;

fn correlation(w: &[f64], xs: &[Vec<f64>], sigma: &[f64], act: &ActivationSpec) -> f64 {
    xs.iter()
        .zip(sigma)
        .map(|(x, s)| s * act.eval(w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()))
        .sum()
}

fn project(w: &mut [f64], radius: f64) {
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        let k = radius / norm;
        w.iter_mut().for_each(|v| *v *= k);
    }
}

/// Monte-Carlo lower estimate of the empirical Rademacher complexity of a
/// [`ModelSpace`] on the rows of `ds_sample`.
///
/// For a fixed sign vector `sigma`, the supremum over `v` is attained at
/// `v_m = c4 * sign(g(w_m))` with `g(w) = sum_i sigma_i rho(w . x_i)`, and then
/// every unit should use the same maximizer of `|g|`, so the inner supremum
/// is `M c4 max_w |g(w)| / N`. The maximum over `w` is searched by taking the
/// best of `n_models * M` random unit vectors (uniform in the ball, or on its
/// boundary for every other draw), then hill-climbing from it with Gaussian
/// steps that shrink geometrically and are projected back into the ball.
/// Any feasible `w` gives a value no larger than the true supremum, so the
/// mean over `n_sigma` sign draws underestimates the complexity.
pub fn mc_rademacher<T: Scalar>(
    space: &ModelSpace,
    ds_sample: &Matrix<T>,
    n_sigma: usize,
    n_models: usize,
    seed: u64,
) -> Result<f64> {
    if !(space.c3.is_finite() && space.c4.is_finite()) || space.c3 < 0.0 || space.c4 < 0.0 {
        return Err(Error::invalid("constraint radii must be finite and non-negative"));
    }
    if space.width == 0 || space.width > MAX_WIDTH {
        return Err(Error::invalid(format!("width must be in 1..={MAX_WIDTH}")));
    }
    let n = ds_sample.rows();
    if n == 0 || n > MAX_SAMPLES {
        return Err(Error::invalid(format!("sample count must be in 1..={MAX_SAMPLES}, got {n}")));
    }
    if n_sigma == 0 || n_models == 0 {
        return Err(Error::invalid("n_sigma and n_models must be at least 1"));
    }
    let xs: Vec<Vec<f64>> = ds_sample
        .row_iter()
        .map(|r| r.iter().map(|v| v.to_f64_lossy()).collect())
        .collect();
    let d = ds_sample.cols();
    let act = space.activation;
    let mut rng = Rng::new(seed);
    let mut total = 0.0;
    for _ in 0..n_sigma {
        let sigma: Vec<f64> = (0..n).map(|_| rng.sign()).collect();
        let mut best_w = vec![0.0; d];
        let mut best = correlation(&best_w, &xs, &sigma, &act).abs();
        for k in 0..n_models * space.width {
            let mut w: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let radius = if k % 2 == 0 { space.c3 } else { space.c3 * rng.uniform().powf(1.0 / d as f64) };
            w.iter_mut().for_each(|v| *v *= radius / norm);
            let g = correlation(&w, &xs, &sigma, &act).abs();
            if g > best {
                best = g;
                best_w = w;
            }
        }
        let mut step = 0.5 * space.c3;
        for _ in 0..REFINE_STEPS {
            let mut w: Vec<f64> = best_w.iter().map(|v| v + step * rng.normal()).collect();
            project(&mut w, space.c3);
            let g = correlation(&w, &xs, &sigma, &act).abs();
            if g > best {
                best = g;
                best_w = w;
            } else {
                step *= 0.97;
            }
        }
        total += space.width as f64 * space.c4 * best / n as f64;
    }
    Ok(total / n_sigma as f64)
}
