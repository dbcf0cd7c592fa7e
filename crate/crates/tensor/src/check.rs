//! Central finite-difference verification of analytic gradients.

use crate::params::{Gradients, ParamId, ParamStore};

/// Max relative error for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub elements: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

/// Denominator floor for the relative error; below it the comparison is
/// effectively absolute.
pub const REL_ERR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares `analytic` against central differences of `loss` for every
/// element of every parameter in `store`.
///
/// `loss` must be a pure function of the store.
pub fn check_gradients<F>(
    store: &mut ParamStore,
    analytic: &Gradients,
    epsilon: f64,
    mut loss: F,
) -> GradCheckReport
where
    F: FnMut(&ParamStore) -> f64,
{
    let ids: Vec<ParamId> = store.ids().collect();
    let mut tensors = Vec::with_capacity(ids.len());
    for id in ids {
        let len = store.get(id).len();
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for i in 0..len {
            let original = flat(store, id, i);
            set_flat(store, id, i, original + epsilon);
            let plus = loss(store);
            set_flat(store, id, i, original - epsilon);
            let minus = loss(store);
            set_flat(store, id, i, original);
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic
                .get(id)
                .map(|g| g.iter().nth(i).copied().unwrap_or(0.0))
                .unwrap_or(0.0);
            max_rel = max_rel.max(relative_error(a, numeric));
            max_abs = max_abs.max((a - numeric).abs());
        }
        tensors.push(TensorCheck {
            name: store.name(id).to_string(),
            elements: len,
            max_rel_err: max_rel,
            max_abs_err: max_abs,
        });
    }
    GradCheckReport { epsilon, tensors }
}

fn flat(store: &ParamStore, id: ParamId, i: usize) -> f64 {
    let t = store.get(id);
    let cols = t.ncols();
    t[[i / cols, i % cols]]
}

fn set_flat(store: &mut ParamStore, id: ParamId, i: usize, value: f64) {
    let t = store.get_mut(id);
    let cols = t.ncols();
    t[[i / cols, i % cols]] = value;
}
