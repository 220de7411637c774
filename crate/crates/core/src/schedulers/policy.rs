use super::laps::{laps_order, laps_weights};
use super::public::PublicView;
use super::{PolicyConfig, PolicyKind, RateSnapshot, SimError};
use crate::rate_program::{build_rate_graph_with, solve_rates};

/// Rates for the current waiting set. Sees only the public view.
pub(crate) fn decide(cfg: &PolicyConfig, view: &PublicView<'_>) -> Result<RateSnapshot, SimError> {
    let public = view.public;
    let graph = build_rate_graph_with(view.waiting, &public.topology, public.machines)?;
    let (weights, laps): (Vec<_>, _) = match cfg.kind {
        PolicyKind::Ct | PolicyKind::Ft => (
            graph.right.iter().map(|&id| public.job(id).weight.clone()).collect(),
            None,
        ),
        PolicyKind::FtLaps => {
            let k = cfg.k().expect("validated config has epsilon");
            let order = laps_order(public, view.waiting, view.completed, cfg.order_mode);
            let waiting_order: Vec<_> = order
                .into_iter()
                .filter(|id| graph.right_idx(*id).is_some())
                .map(|id| (id, public.job(id).weight.clone()))
                .collect();
            let lw = laps_weights(&waiting_order, &k);
            let map = lw.as_map();
            (graph.right.iter().map(|id| map[id].clone()).collect(), Some(lw))
        }
    };
    let solution = solve_rates(&graph, &weights)?;
    Ok(RateSnapshot {
        segment: 0,
        graph,
        weights,
        solution,
        laps,
    })
}
