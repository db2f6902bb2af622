use serde::{Deserialize, Serialize};

use super::{
    full_batch_step_check, gradient_check, mc_rademacher, naive_pairwise_diversity, verify_monotonicity, verify_sup_f, verify_sup_f_multilayer,
    verify_sup_loss, ModelSpace, VerificationReport, EQUIVALENCE_REL,
};
use crate::bounds::{
    bound_thm1, bound_thm4_multivariate, compute_j, estimate_constants, rademacher_bound_f, ConstantsReport, Theorem,
};
use crate::data::{make_synthetic, Dataset, Task};
use crate::diversity::{estimate_dmin, per_sample_diversity};
use crate::error::{Error, Result};
use crate::model::{forward, init_model, LossKind};
use crate::numkit::{ActivationSpec, Matrix, Rng};

/// Sizes of the standard verification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Sampled inputs per model for the sup checks.
    pub trials: usize,
    pub models: usize,
    pub rademacher_spaces: usize,
    pub diversity_matrices: usize,
    pub max_width: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 10_000,
            models: 20,
            rademacher_spaces: 10,
            diversity_matrices: 100,
            max_width: 512,
        }
    }
}

fn rel_margin(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() - EQUIVALENCE_REL * expected.abs()
}

fn activation_for(k: usize) -> ActivationSpec {
    if k % 2 == 0 {
        ActivationSpec::relu()
    } else {
        ActivationSpec::sigmoid()
    }
}

fn diversity_check(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let mut rng = Rng::with_stream(cfg.seed, 1);
    let mut report = VerificationReport::new("diversity_fast_vs_naive", cfg.seed);
    for k in 0..cfg.diversity_matrices {
        let m = if k == 0 { cfg.max_width } else { 2 + rng.below(cfg.max_width as u64 - 1) as usize };
        let f = Matrix::<f64>::random_uniform(4, m, -1.0, 2.0, &mut rng);
        let fast = per_sample_diversity(&f)?;
        let naive = naive_pairwise_diversity(&f)?;
        for (a, b) in fast.iter().zip(&naive) {
            report.record(rel_margin(*a, *b), 0.0);
        }
    }
    Ok(report)
}

fn fixture_check(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("bound_fixtures", cfg.seed);
    // c4 = 1, M = 3, c5 = 2, d = 1: J = 3*4 + 6*(4 - 1) = 30
    let c = ConstantsReport::single_layer(2.0, 0.5, 1.0, 1.0, ActivationSpec::relu(), 3, 100, 1);
    report.record(rel_margin(compute_j(&c, 1.0)?, 30.0), 0.0);
    report.record(rel_margin(compute_j(&c, 0.0)?, 36.0), 0.0);
    report.record(rel_margin(compute_j(&c, 4.0)?, 12.0), 0.0);
    // 2 * 1 * (2 * 1 * 1) * 3 / sqrt(100)
    report.record(rel_margin(rademacher_bound_f(&c, 100)?, 1.2), 0.0);
    let a = bound_thm1(&c, 1.0, 100, 0.05)?;
    let b = bound_thm4_multivariate(&c, 1.0, 100, 0.05, 1)?;
    report.record(if a.total == b.total { 0.0 } else { f64::INFINITY }, 0.0);
    Ok(report)
}

fn sup_checks(cfg: &SuiteConfig) -> Result<(VerificationReport, VerificationReport)> {
    let mut rng = Rng::with_stream(cfg.seed, 2);
    let mut sup_f = VerificationReport::new("sup_f", cfg.seed);
    let mut sup_loss = VerificationReport::new("sup_loss", cfg.seed);
    let mut gaps = Vec::new();
    for k in 0..cfg.models {
        let d_in = 2 + rng.below(6) as usize;
        let width = 2 + rng.below(15) as usize;
        let sub = rng.next_u64();
        let ds = make_synthetic::<f64>(Task::ScalarRegression, 64, d_in, 1, sub)?;
        let model = init_model::<f64>(&[width], d_in, 1, activation_for(k), sub)?;
        let consts = estimate_constants(&model, &ds)?;
        let d = estimate_dmin(&model, &ds, 0, 64)?.d_min_sq;
        let f = verify_sup_f(&model, &consts, d, cfg.trials, sub)?;
        sup_loss.absorb(&verify_sup_loss(&model, &consts, d, cfg.trials, sub)?);
        sup_f.absorb(&f);
        gaps.push(f.detail);
    }
    sup_f.detail = format!("{} models; first: {}", cfg.models, gaps.first().map(String::as_str).unwrap_or(""));
    Ok((sup_f, sup_loss))
}

fn multilayer_check(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let mut rng = Rng::with_stream(cfg.seed, 3);
    let mut report = VerificationReport::new("sup_f_multilayer", cfg.seed);
    for k in 0..(cfg.models / 4).max(1) {
        let d_in = 2 + rng.below(4) as usize;
        let depth = 2 + rng.below(2) as usize;
        let widths: Vec<usize> = (0..depth).map(|_| 2 + rng.below(7) as usize).collect();
        let d_out = 1 + rng.below(3) as usize;
        let sub = rng.next_u64();
        let ds = make_synthetic::<f64>(Task::MultivariateRegression, 64, d_in, d_out, sub)?;
        let model = init_model::<f64>(&widths, d_in, d_out, activation_for(k), sub)?;
        let consts = estimate_constants(&model, &ds)?;
        let ds_per = (0..depth)
            .map(|l| estimate_dmin(&model, &ds, l, 64).map(|r| r.d_min_sq))
            .collect::<Result<Vec<_>>>()?;
        report.absorb(&verify_sup_f_multilayer(&model, &consts, &ds_per, cfg.trials / 4 + 1, sub)?);
    }
    Ok(report)
}

fn rademacher_check(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let mut rng = Rng::with_stream(cfg.seed, 4);
    let mut report = VerificationReport::new("mc_rademacher_below_bound", cfg.seed);
    for k in 0..cfg.rademacher_spaces {
        let n = 8 + rng.below(25) as usize;
        let width = 2 + rng.below(7) as usize;
        let d_in = 2 + rng.below(5) as usize;
        let space = ModelSpace {
            c3: rng.uniform_range(0.5, 2.0),
            c4: rng.uniform_range(0.2, 2.0),
            width,
            activation: activation_for(k),
        };
        let x = Matrix::<f64>::random_uniform(n, d_in, -1.0, 1.0, &mut rng);
        let c1 = x.norms().l2_per_row.into_iter().fold(0.0, f64::max);
        let consts =
            ConstantsReport::single_layer(c1, 1.0, space.c3, space.c4, space.activation, width, n, 1);
        let est = mc_rademacher(&space, &x, 50, 20, rng.next_u64())?;
        report.record(est - rademacher_bound_f(&consts, n)?, 0.0);
    }
    Ok(report)
}

const LOSSES: [LossKind; 4] = [LossKind::Mse, LossKind::Hinge, LossKind::Logistic, LossKind::CrossEntropy];

fn loss_dataset(loss: LossKind, n: usize, d_in: usize, seed: u64) -> Result<Dataset<f64>> {
    Ok(match loss {
        LossKind::Mse => make_synthetic(Task::MultivariateRegression, n, d_in, 2, seed)?,
        LossKind::Hinge | LossKind::Logistic => make_synthetic(Task::BinaryClassification, n, d_in, 1, seed)?,
        LossKind::CrossEntropy => make_synthetic(Task::MulticlassClassification, n, d_in, 3, seed)?,
    })
}

/// Central differences on smooth activations, one and two hidden layers, every loss.
fn gradient_checks(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let mut rng = Rng::with_stream(cfg.seed, 5);
    let mut report = VerificationReport::new("gradients_vs_finite_differences", cfg.seed);
    for loss in LOSSES {
        for depth in 1..=2 {
            for act in [ActivationSpec::tanh(), ActivationSpec::sigmoid()] {
                let sub = rng.next_u64();
                let ds = loss_dataset(loss, 6, 4, sub)?;
                let widths: Vec<usize> = (0..depth).map(|_| 3 + rng.below(4) as usize).collect();
                let model = init_model::<f64>(&widths, 4, ds.output_dim(), act, sub)?;
                if loss == LossKind::Hinge {
                    // differences across the hinge kink are not derivatives; skip such draws
                    let out = forward(&model, ds.inputs())?.outputs;
                    let near = (0..ds.len()).any(|r| (1.0 - ds.targets().get(r, 0) * out.get(r, 0)).abs() < 1e-3);
                    if near {
                        continue;
                    }
                }
                report.absorb(&gradient_check(&model, ds.inputs(), ds.targets(), loss)?);
            }
        }
    }
    Ok(report)
}

fn full_batch_checks(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let mut rng = Rng::with_stream(cfg.seed, 6);
    let mut report = VerificationReport::new("full_batch_epoch_vs_step", cfg.seed);
    for (k, loss) in LOSSES.into_iter().enumerate() {
        let sub = rng.next_u64();
        let ds = loss_dataset(loss, 32, 5, sub)?;
        let model = init_model::<f64>(&[7, 5], 5, ds.output_dim(), activation_for(k), sub)?;
        report.absorb(&full_batch_step_check(&model, &ds, loss, 0.1)?);
    }
    Ok(report)
}

fn monotonicity_checks(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let ds = make_synthetic::<f64>(Task::MulticlassClassification, 64, 5, 10, cfg.seed)?;
    let model = init_model::<f64>(&[8, 6], 5, 10, ActivationSpec::relu(), cfg.seed)?;
    let consts = estimate_constants(&model, &ds)?;
    let grid: Vec<f64> = (0..50).map(|k| consts.c5_sq() * k as f64 / 49.0).collect();
    Theorem::ALL
        .into_iter()
        .map(|t| {
            let mut r = verify_monotonicity(t, &consts, 1000, 0.05, &grid, 10)?;
            r.seed = cfg.seed;
            Ok(r)
        })
        .collect()
}

/// Runs every verifier and returns one aggregated report per check.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if cfg.max_width < 2 {
        return Err(Error::invalid("max_width must be at least 2"));
    }
    let mut out = vec![diversity_check(cfg)?, fixture_check(cfg)?];
    let (f, l) = sup_checks(cfg)?;
    out.push(f);
    out.push(l);
    out.push(multilayer_check(cfg)?);
    out.push(rademacher_check(cfg)?);
    out.push(gradient_checks(cfg)?);
    out.push(full_batch_checks(cfg)?);
    out.extend(monotonicity_checks(cfg)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_is_deterministic() {
        let cfg = SuiteConfig {
            seed: 3,
            trials: 200,
            models: 4,
            rademacher_spaces: 2,
            diversity_matrices: 5,
            max_width: 32,
        };
        let a = run_suite(&cfg).unwrap();
        assert!(a.iter().all(|r| r.passed), "{a:#?}");
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a, b);
    }
}
