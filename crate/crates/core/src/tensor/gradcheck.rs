//! Central finite-difference gradient verification.

use super::graph::{Graph, NodeId};
use super::params::ParamStore;
use super::{Tensor, TensorError};

/// Compare the analytic gradient of `f` at `points` against central finite
/// differences. `f` receives a fresh graph and one tracked leaf per point
/// and must return a scalar loss node.
///
/// Returns the worst relative error over every coordinate:
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn gradient_check<F>(f: F, points: &[Tensor], epsilon: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId, TensorError>,
{
    let mut graph = Graph::new();
    let ids: Vec<NodeId> = points.iter().map(|p| graph.input(p.clone())).collect();
    let loss = f(&mut graph, &ids)?;
    graph.backward(loss)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .zip(points)
        .map(|(&id, p)| {
            graph
                .grad(id)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; p.len()])
        })
        .collect();

    let eval = |point_idx: usize, coord: usize, delta: f64| -> Result<f64, TensorError> {
        let mut graph = Graph::new();
        let ids: Vec<NodeId> = points
            .iter()
            .enumerate()
            .map(|(qi, q)| {
                let mut t = q.clone();
                if qi == point_idx {
                    t.data_mut()[coord] += delta;
                }
                graph.constant(t)
            })
            .collect();
        let loss = f(&mut graph, &ids)?;
        Ok(graph.value(loss).item())
    };

    let mut worst: f64 = 0.0;
    for (pi, point) in points.iter().enumerate() {
        for ci in 0..point.len() {
            let numeric = (eval(pi, ci, epsilon)? - eval(pi, ci, -epsilon)?) / (2.0 * epsilon);
            let a = analytic[pi][ci];
            let err = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// Same check, but over every coordinate of every parameter in `store`.
/// `f` must rebuild the loss from the store's current values on each call.
/// Parameters the loss never touches count as zero analytic gradient.
pub fn gradient_check_params<F>(
    store: &mut ParamStore,
    f: F,
    epsilon: f64,
) -> Result<f64, TensorError>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<NodeId, TensorError>,
{
    store.zero_grads();
    let mut graph = Graph::new();
    let loss = f(&mut graph, store)?;
    graph.backward(loss)?;
    graph.grads_into(store);
    let analytic: Vec<Option<Vec<f64>>> = store
        .ids()
        .map(|id| store.grad(id).map(|t| t.data().to_vec()))
        .collect();

    let eval = |store: &ParamStore| -> Result<f64, TensorError> {
        let mut graph = Graph::new();
        let loss = f(&mut graph, store)?;
        Ok(graph.value(loss).item())
    };

    let mut worst: f64 = 0.0;
    let ids: Vec<_> = store.ids().collect();
    for (slot, id) in ids.into_iter().enumerate() {
        for ci in 0..store.value(id).len() {
            let orig = store.value(id).data()[ci];
            store.value_mut(id).data_mut()[ci] = orig + epsilon;
            let plus = eval(store)?;
            store.value_mut(id).data_mut()[ci] = orig - epsilon;
            let minus = eval(store)?;
            store.value_mut(id).data_mut()[ci] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[slot].as_ref().map_or(0.0, |v| v[ci]);
            let err = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
            worst = worst.max(err);
        }
    }
    store.zero_grads();
    Ok(worst)
}
