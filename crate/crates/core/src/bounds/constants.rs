use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::MlpModel;
use crate::numkit::ActivationSpec;
use crate::scalar::Scalar;

/// Empirical bounding constants of a model on a dataset.
///
/// * `c1`: max input L2 norm
/// * `c2`: max target L2 norm (`max |y|` for one output); `c2_per_coordinate`
///   is the max absolute target entry
/// * `c3`: max L2 norm of a first-layer unit vector `w_m`
/// * `c4`: max absolute output weight
/// * `c5 = l_rho * c1 * c3 + phi0`, `c134 = c1 * c3 * c4`
///
/// For the layer-recursive bound, `c3_layers[p]` is the induced infinity norm
/// (max absolute row sum) of weight matrix `p`, hidden layers first and the
/// output layer last; `c3_layers_l2` gives max row L2 norms for comparison and
/// `m_layers` the matching row counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub c1: f64,
    pub c2: f64,
    pub c2_per_coordinate: f64,
    pub c3: f64,
    pub c4: f64,
    pub l_rho: f64,
    pub phi0: f64,
    pub c5: f64,
    pub c134: f64,
    pub m: usize,
    pub n: usize,
    pub d_out: usize,
    pub c3_layers: Vec<f64>,
    pub c3_layers_l2: Vec<f64>,
    pub m_layers: Vec<usize>,
}

impl ConstantsReport {
    /// Constants of a single-hidden-layer class given directly.
    ///
    /// The layer lists are filled as if `c3` and `c4` were also the layer norms.
    #[allow(clippy::too_many_arguments)]
    pub fn single_layer(
        c1: f64,
        c2: f64,
        c3: f64,
        c4: f64,
        activation: ActivationSpec,
        m: usize,
        n: usize,
        d_out: usize,
    ) -> Self {
        let l_rho = activation.lipschitz();
        let phi0 = activation.at_zero();
        Self {
            c1,
            c2,
            c2_per_coordinate: c2,
            c3,
            c4,
            l_rho,
            phi0,
            c5: l_rho * c1 * c3 + phi0,
            c134: c1 * c3 * c4,
            m,
            n,
            d_out,
            c3_layers: vec![c3, c4],
            c3_layers_l2: vec![c3, c4],
            m_layers: vec![m, d_out],
        }
    }

    pub fn c5_sq(&self) -> f64 {
        self.c5 * self.c5
    }

    /// Number of hidden layers described by the layer lists.
    pub fn depth(&self) -> usize {
        self.c3_layers.len().saturating_sub(1)
    }

    pub fn check(&self) -> Result<()> {
        let scalars = [
            self.c1, self.c2, self.c3, self.c4, self.l_rho, self.phi0, self.c5, self.c134,
        ];
        if scalars.iter().chain(&self.c3_layers).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("bound constants must be finite and non-negative"));
        }
        if self.m == 0 {
            return Err(Error::invalid("layer width M must be positive"));
        }
        Ok(())
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

pub fn estimate_constants<T: Scalar>(model: &MlpModel<T>, ds: &Dataset<T>) -> Result<ConstantsReport> {
    if ds.is_empty() {
        return Err(Error::invalid("cannot estimate constants on an empty dataset"));
    }
    if ds.input_dim() != model.input_dim() {
        return Err(Error::invalid(format!(
            "dataset has {} inputs, model expects {}",
            ds.input_dim(),
            model.input_dim()
        )));
    }
    let f = |v: T| v.to_f64_lossy();
    let c1 = max_of(ds.inputs().norms().l2_per_row.into_iter().map(f));
    let target_norms = ds.targets().norms();
    let c2 = max_of(target_norms.l2_per_row.into_iter().map(f));
    let c2_per_coordinate = f(target_norms.linf);
    let first = &model.hidden_weights()[0];
    let c3 = max_of(first.norms().l2_per_row.into_iter().map(f));
    let c4 = f(model.output_weights().norms().linf);
    let act = model.activation();
    let (l_rho, phi0) = (act.lipschitz(), act.at_zero());
    let c3_layers = model.layer_weights().iter().map(|w| f(w.max_abs_row_sum())).collect();
    let c3_layers_l2 = model
        .layer_weights()
        .iter()
        .map(|w| max_of(w.norms().l2_per_row.into_iter().map(f)))
        .collect();
    let m_layers = model.layer_weights().iter().map(|w| w.rows()).collect();
    Ok(ConstantsReport {
        c1,
        c2,
        c2_per_coordinate,
        c3,
        c4,
        l_rho,
        phi0,
        c5: l_rho * c1 * c3 + phi0,
        c134: c1 * c3 * c4,
        m: model.widths()[0],
        n: ds.len(),
        d_out: model.output_dim(),
        c3_layers,
        c3_layers_l2,
        m_layers,
    })
}
