use serde::Serialize;

use super::{ParamStore, Tape, TensorError, Var};

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Adds `delta` to one analytic gradient entry (parameter name, flat
    /// index) before comparison. Used to confirm the harness notices errors.
    pub corrupt: Option<(String, usize, f64)>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { eps: 1e-5, corrupt: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupError {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    /// Largest `|analytic - numeric|`; central differences are only good to
    /// roughly `|loss| * 1e-16 / eps` in absolute terms.
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub loss: f64,
    pub groups: Vec<GroupError>,
    pub max_rel_error: f64,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn eval<E, F>(store: &ParamStore, build: &mut F) -> Result<f64, E>
where
    E: From<TensorError>,
    F: FnMut(&mut Tape<'_>) -> Result<Var, E>,
{
    let mut tape = Tape::new(store);
    let loss = build(&mut tape)?;
    let v = tape.value(loss);
    if v.len() != 1 {
        return Err(TensorError::NotScalar(v.shape().to_vec()).into());
    }
    Ok(v.item())
}

/// Compares reverse-mode gradients of `build`'s scalar output against
/// central differences for every entry of every trainable parameter.
///
/// `build` must be deterministic; two differing baseline evaluations are
/// reported as an error.
pub fn grad_check<E, F>(store: &mut ParamStore, opts: &GradCheckOptions, mut build: F) -> Result<GradCheckReport, E>
where
    E: From<TensorError>,
    F: FnMut(&mut Tape<'_>) -> Result<Var, E>,
{
    let (loss, mut grads) = {
        let mut tape = Tape::new(store);
        let loss = build(&mut tape)?;
        (tape.value(loss).item(), tape.backward(loss)?)
    };
    let again = eval(store, &mut build)?;
    if loss.to_bits() != again.to_bits() {
        return Err(TensorError::NonDeterministic { first: loss, second: again }.into());
    }

    if let Some((name, idx, delta)) = &opts.corrupt {
        let id = store.id(name)?;
        let shape = store.value(id).shape().to_vec();
        let slot = grads.slot(id, &shape);
        let n = slot.len();
        slot.data_mut()[*idx % n] += delta;
    }

    let ids: Vec<_> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    let mut groups = Vec::with_capacity(ids.len());
    let mut overall: f64 = 0.0;
    for id in ids {
        let analytic = grads.get(id).map(|t| t.data().to_vec());
        let entries = store.value(id).len();
        let mut worst: f64 = 0.0;
        let mut worst_abs: f64 = 0.0;
        for k in 0..entries {
            let original = store.value(id).data()[k];
            store.get_mut(id).value.data_mut()[k] = original + opts.eps;
            let plus = eval(store, &mut build);
            store.get_mut(id).value.data_mut()[k] = original - opts.eps;
            let minus = eval(store, &mut build);
            store.get_mut(id).value.data_mut()[k] = original;
            let numeric = (plus? - minus?) / (2.0 * opts.eps);
            let a = analytic.as_ref().map_or(0.0, |g| g[k]);
            worst = worst.max(relative_error(a, numeric));
            worst_abs = worst_abs.max((a - numeric).abs());
        }
        overall = overall.max(worst);
        groups.push(GroupError { name: store.get(id).name.clone(), entries, max_rel_error: worst, max_abs_error: worst_abs });
    }
    Ok(GradCheckReport { loss, groups, max_rel_error: overall })
}
