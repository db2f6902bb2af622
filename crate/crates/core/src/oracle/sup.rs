use super::{VerificationReport, INEQUALITY_SLACK};
use crate::bounds::{bound_multilayer, compute_j, ConstantsReport, MultilayerVariant};
use crate::diversity::per_sample_diversity;
use crate::error::{Error, Result};
use crate::model::{forward, MlpModel};
use crate::numkit::{Matrix, Rng};
use crate::scalar::Scalar;

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn push_scaled(rows: &mut Vec<Vec<f64>>, dir: &[f64], radius: f64) {
    let norm = l2(dir);
    if norm > 0.0 {
        rows.push(dir.iter().map(|x| x * radius / norm).collect());
        rows.push(dir.iter().map(|x| -x * radius / norm).collect());
    }
}

/// Leading right singular vector of `w` by power iteration on `w^T w`.
fn top_singular_vector(w: &Matrix<f64>, rng: &mut Rng) -> Vec<f64> {
    let d = w.cols();
    let mut x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    for _ in 0..200 {
        let wx: Vec<f64> = w.row_iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        let mut next = vec![0.0; d];
        for (r, s) in w.row_iter().zip(&wx) {
            for (n, a) in next.iter_mut().zip(r) {
                *n += a * s;
            }
        }
        let norm = l2(&next);
        if norm == 0.0 {
            break;
        }
        x = next.into_iter().map(|v| v / norm).collect();
    }
    x
}

/// `trials` points uniform in the L2 ball of radius `c1` (every fourth one on
/// the sphere), followed by adversarial corners built from the first layer:
/// the top singular direction of `W`, each unit direction `w_m`, and the
/// directions `W^T 1` and (single hidden layer only) `W^T v`, all at norm `c1` with both signs.
///
/// Returns the points and the number of random (non-corner) rows.
fn probe_inputs(model: &MlpModel<f64>, c1: f64, trials: usize, rng: &mut Rng) -> Result<(Matrix<f64>, usize)> {
    let d = model.input_dim();
    let mut rows = Vec::with_capacity(trials + 2 * model.widths()[0] + 8);
    for t in 0..trials {
        let dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let radius = if t % 4 == 3 { c1 } else { c1 * rng.uniform().powf(1.0 / d as f64) };
        let norm = l2(&dir);
        rows.push(dir.iter().map(|x| x * radius / norm).collect());
    }
    let w = &model.hidden_weights()[0];
    push_scaled(&mut rows, &top_singular_vector(w, rng), c1);
    for r in w.row_iter() {
        push_scaled(&mut rows, r, c1);
    }
    let mut wt1 = vec![0.0; d];
    for r in w.row_iter() {
        for j in 0..d {
            wt1[j] += r[j];
        }
    }
    push_scaled(&mut rows, &wt1, c1);
    if model.depth() == 1 {
        let v = model.output_weights();
        let mut wtv = vec![0.0; d];
        for (m, r) in w.row_iter().enumerate() {
            let vm: f64 = (0..v.rows()).map(|k| v.get(k, m)).sum();
            for j in 0..d {
                wtv[j] += vm * r[j];
            }
        }
        push_scaled(&mut rows, &wtv, c1);
    }
    Ok((Matrix::from_rows(&rows)?, trials))
}

fn check_common<T: Scalar>(model: &MlpModel<T>, trials: usize) -> Result<MlpModel<f64>> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if !model.activation().is_nonnegative() {
        return Err(Error::invalid(format!(
            "the sup bound needs a non-negative activation, got {}",
            model.activation().kind()
        )));
    }
    if model.includes_bias() {
        return Err(Error::invalid("the sup bound covers bias-free networks only"));
    }
    Ok(model.cast())
}

fn check_single_layer(model: &MlpModel<f64>, consts: &ConstantsReport) -> Result<()> {
    if model.depth() != 1 || model.output_dim() != 1 {
        return Err(Error::invalid("this check needs a single-hidden-layer model with one output"));
    }
    let covers = |bound: f64, actual: f64| actual <= bound * (1.0 + 1e-12);
    let c3 = model.hidden_weights()[0].norms().l2_per_row.into_iter().fold(0.0, f64::max);
    let c4 = model.output_weights().norms().linf;
    let act = model.activation();
    if consts.m != model.widths()[0]
        || !covers(consts.c3, c3)
        || !covers(consts.c4, c4)
        || consts.l_rho != act.lipschitz()
        || consts.phi0 != act.at_zero()
    {
        return Err(Error::invalid("constants do not describe this model"));
    }
    Ok(())
}

struct SupSetup {
    random_rows: usize,
    outputs: Vec<f64>,
    j: f64,
    detail: String,
}

fn sup_setup(
    model: &MlpModel<f64>,
    consts: &ConstantsReport,
    d_min_sq: f64,
    trials: usize,
    rng: &mut Rng,
) -> Result<SupSetup> {
    check_single_layer(model, consts)?;
    let (inputs, random_rows) = probe_inputs(model, consts.c1, trials, rng)?;
    let trace = forward(model, &inputs)?;
    let sampled_min = per_sample_diversity(&trace.features[0])?.into_iter().fold(f64::INFINITY, f64::min);
    let d_used = d_min_sq.min(sampled_min);
    let j = compute_j(consts, d_used)?;
    let detail = format!(
        "supplied d_min^2 {d_min_sq:.4e}, sampled minimum {sampled_min:.4e}, sqrt(J) {:.4e}",
        j.sqrt()
    );
    Ok(SupSetup {
        outputs: trace.outputs.into_vec(),
        random_rows,
        j,
        detail,
    })
}

/// Checks `|f(x)| <= sqrt(J)` on sampled inputs with `||x||_2 <= c1`.
///
/// `J` is evaluated with the smaller of `d_min_sq` and the minimum diversity
/// over the sampled inputs themselves, since the lemma's assumption must hold
/// at every point where it is tested.
pub fn verify_sup_f<T: Scalar>(
    model: &MlpModel<T>,
    consts: &ConstantsReport,
    d_min_sq: f64,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let model = check_common(model, trials)?;
    let mut rng = Rng::new(seed);
    let s = sup_setup(&model, consts, d_min_sq, trials, &mut rng)?;
    let bound = s.j.sqrt();
    let mut report = VerificationReport::new("sup_f", seed);
    for f in &s.outputs {
        report.record(f.abs() - bound, INEQUALITY_SLACK);
    }
    report.detail = s.detail;
    Ok(report)
}

/// Checks `1/2 (f(x) - y)^2 <= 1/2 (sqrt(J) + c2)^2` with `|y| <= c2`.
///
/// Random inputs get uniform targets; corner inputs get the target of
/// magnitude `c2` opposite in sign to `f(x)`.
pub fn verify_sup_loss<T: Scalar>(
    model: &MlpModel<T>,
    consts: &ConstantsReport,
    d_min_sq: f64,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let model = check_common(model, trials)?;
    let mut rng = Rng::new(seed);
    let s = sup_setup(&model, consts, d_min_sq, trials, &mut rng)?;
    let k = s.j.sqrt() + consts.c2;
    let bound = 0.5 * k * k;
    let mut report = VerificationReport::new("sup_loss", seed);
    for (i, &f) in s.outputs.iter().enumerate() {
        let y = if i < s.random_rows {
            rng.uniform_range(-consts.c2, consts.c2)
        } else if f >= 0.0 {
            -consts.c2
        } else {
            consts.c2
        };
        let loss = 0.5 * (f - y) * (f - y);
        report.record(loss - bound, INEQUALITY_SLACK);
    }
    report.detail = s.detail;
    Ok(report)
}

/// Checks `||f(x)||_2 <= sqrt(J^P)` for the norm-consistent layer recursion.
///
/// Each layer's `d_min^2` is lowered to the minimum over the sampled inputs,
/// as in [`verify_sup_f`].
pub fn verify_sup_f_multilayer<T: Scalar>(
    model: &MlpModel<T>,
    consts: &ConstantsReport,
    d_min_sq_per_layer: &[f64],
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let model = check_common(model, trials)?;
    let norms: Vec<f64> = model.layer_weights().iter().map(|w| w.max_abs_row_sum()).collect();
    if norms.len() != consts.c3_layers.len()
        || norms.iter().zip(&consts.c3_layers).any(|(a, b)| *a > b * (1.0 + 1e-12))
    {
        return Err(Error::invalid("layer constants do not describe this model"));
    }
    if d_min_sq_per_layer.len() != model.depth() {
        return Err(Error::invalid(format!(
            "expected {} per-layer d_min^2 values, got {}",
            model.depth(),
            d_min_sq_per_layer.len()
        )));
    }
    let mut rng = Rng::new(seed);
    let (inputs, _) = probe_inputs(&model, consts.c1, trials, &mut rng)?;
    let trace = forward(&model, &inputs)?;
    let mut d_used = Vec::with_capacity(model.depth());
    for (feats, &d) in trace.features.iter().zip(d_min_sq_per_layer) {
        let sampled = per_sample_diversity(feats)?.into_iter().fold(f64::INFINITY, f64::min);
        d_used.push(d.min(sampled));
    }
    let j = bound_multilayer(consts, &d_used, 1, 0.5, MultilayerVariant::NormConsistent)?.j;
    let bound = j.sqrt();
    let mut report = VerificationReport::new("sup_f_multilayer", seed);
    for row in trace.outputs.row_iter() {
        report.record(l2(row) - bound, INEQUALITY_SLACK);
    }
    report.detail = format!("sqrt(J^P) {bound:.4e}, per-layer d_min^2 used {d_used:?}");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::estimate_constants;
    use crate::data::{make_synthetic, Task};
    use crate::diversity::estimate_dmin;
    use crate::model::init_model;
    use crate::numkit::ActivationSpec;

    #[test]
    fn zero_model_passes() {
        let w = Matrix::<f64>::zeros(3, 2);
        let v = Matrix::<f64>::zeros(1, 3);
        let model = MlpModel::from_weights(vec![w, v], ActivationSpec::relu()).unwrap();
        let consts = ConstantsReport::single_layer(1.0, 0.0, 0.0, 0.0, ActivationSpec::relu(), 3, 1, 1);
        let r = verify_sup_f(&model, &consts, 0.0, 100, 1).unwrap();
        assert!(r.passed);
        assert_eq!(r.worst_margin, 0.0);
        let r = verify_sup_loss(&model, &consts, 0.0, 100, 1).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn hand_two_unit_relu() {
        // W = [[1, 0], [0, 1]], v = [1, 1], c1 = 1: f(x) = relu(x0) + relu(x1) <= sqrt(2).
        // c5 = 1, c4 = 1, M = 2 and d = 0 give J = 4, so sqrt(J) = 2.
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let model = MlpModel::from_weights(vec![w, v], ActivationSpec::relu()).unwrap();
        let consts = ConstantsReport::single_layer(1.0, 1.0, 1.0, 1.0, ActivationSpec::relu(), 2, 1, 1);
        let r = verify_sup_f(&model, &consts, 0.0, 1000, 3).unwrap();
        assert!(r.passed);
        // the corner along W^T v reaches f = sqrt(2)
        assert!((r.worst_margin - (2f64.sqrt() - 2.0)).abs() < 1e-12, "{}", r.worst_margin);
    }

    #[test]
    fn random_models_hold() {
        for (seed, act) in [(0, ActivationSpec::relu()), (1, ActivationSpec::sigmoid())] {
            let ds = make_synthetic::<f64>(Task::ScalarRegression, 50, 4, 1, seed).unwrap();
            let model = init_model::<f64>(&[6], 4, 1, act, seed).unwrap();
            let consts = estimate_constants(&model, &ds).unwrap();
            let d = estimate_dmin(&model, &ds, 0, 64).unwrap().d_min_sq;
            assert!(verify_sup_f(&model, &consts, d, 2000, seed).unwrap().passed);
            assert!(verify_sup_loss(&model, &consts, d, 2000, seed).unwrap().passed);
        }
    }

    #[test]
    fn multilayer_norm_consistent_holds() {
        let ds = make_synthetic::<f64>(Task::MultivariateRegression, 50, 3, 2, 4).unwrap();
        let model = init_model::<f64>(&[5, 4], 3, 2, ActivationSpec::relu(), 4).unwrap();
        let consts = estimate_constants(&model, &ds).unwrap();
        let ds_per: Vec<f64> = (0..2).map(|l| estimate_dmin(&model, &ds, l, 64).unwrap().d_min_sq).collect();
        let r = verify_sup_f_multilayer(&model, &consts, &ds_per, 2000, 4).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn rejects_tanh_bias_and_zero_trials() {
        let model = init_model::<f64>(&[3], 2, 1, ActivationSpec::tanh(), 0).unwrap();
        let consts = ConstantsReport::single_layer(1.0, 1.0, 1.0, 1.0, ActivationSpec::tanh(), 3, 1, 1);
        assert!(verify_sup_f(&model, &consts, 0.0, 10, 0).is_err());
        let relu = init_model::<f64>(&[3], 2, 1, ActivationSpec::relu(), 0).unwrap();
        assert!(verify_sup_f(&relu, &consts, 0.0, 0, 0).is_err());
        assert!(verify_sup_f(&relu.clone().with_biases(), &consts, 0.0, 10, 0).is_err());
    }

    #[test]
    fn understated_constants_rejected() {
        let model = init_model::<f64>(&[3], 2, 1, ActivationSpec::relu(), 0).unwrap();
        let consts = ConstantsReport::single_layer(1.0, 1.0, 1e-3, 1.0, ActivationSpec::relu(), 3, 1, 1);
        assert!(verify_sup_f(&model, &consts, 0.0, 10, 0).is_err());
    }
}
