//! Central finite-difference verification of [`Graph::backward`](super::Graph::backward).

use rand::{Rng, SeedableRng};

use super::{Graph, NnError, ParamId, ParamStore, Var};

pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Compares analytic and numeric gradients on `coords` random trainable coordinates.
pub fn gradcheck<F>(store: &ParamStore, coords: usize, seed: u64, loss: F) -> Result<GradCheckReport, NnError>
where
    F: Fn(&mut Graph<'_>) -> Result<Var, NnError>,
{
    let eval = |s: &ParamStore| -> Result<f64, NnError> {
        let mut g = Graph::new(s);
        let l = loss(&mut g)?;
        Ok(g.value(l).item())
    };
    let grads = {
        let mut g = Graph::new(store);
        let l = loss(&mut g)?;
        g.backward(l)?
    };
    let ids: Vec<ParamId> = store.ids().filter(|id| store.is_trainable(*id) && !store.get(*id).is_empty()).collect();
    let total: usize = ids.iter().map(|id| store.get(*id).len()).sum();
    let mut rng = crate::seed::Rng::seed_from_u64(seed);
    let mut work = store.clone();
    let mut report = GradCheckReport { checked: 0, max_rel_error: 0.0, worst: None };
    for _ in 0..coords.min(total) {
        let mut k = rng.random_range(0..total);
        let id = *ids
            .iter()
            .find(|id| {
                let n = store.get(**id).len();
                if k < n {
                    true
                } else {
                    k -= n;
                    false
                }
            })
            .expect("coordinate in range");
        let orig = store.get(id).data()[k];
        work.get_mut(id).data_mut()[k] = orig + STEP;
        let plus = eval(&work)?;
        work.get_mut(id).data_mut()[k] = orig - STEP;
        let minus = eval(&work)?;
        work.get_mut(id).data_mut()[k] = orig;
        let numeric = (plus - minus) / (2.0 * STEP);
        let analytic = grads.get(id).map_or(0.0, |t| t.data()[k]);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
        report.checked += 1;
        if rel >= report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = Some((store.name(id).to_string(), k, analytic, numeric));
        }
    }
    Ok(report)
}
