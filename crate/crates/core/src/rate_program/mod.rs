//! Snapshot graph and the Nash-welfare rate program.

mod flow;
mod graph;
mod kkt;
mod oracle;
mod solver;

use serde_json::{json, Value};

use crate::exact::format_rational;

pub use graph::{build_rate_graph, build_rate_graph_with, BipartiteRateGraph, RateEdge};
pub(crate) use kkt::Checker;
pub use kkt::{kkt_audit, AuditCheck, AuditReport};
pub use oracle::{brute_oracle_rates, OraclePrimal, ORACLE_THRESHOLD};
pub use solver::{cp_objective, find_tight_set, solve_rates, Phase, PhaseKind, PhaseLog, RateSolution};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RateError {
    #[error("waiting set is empty")]
    EmptyWaiting,
    #[error("malformed rate graph: {0}")]
    Malformed(String),
    #[error("a waiting job has zero rate")]
    ZeroRate,
}

/// JSON form of a solution keyed by job ids, rationals as `"num/den"`.
pub fn solution_to_json(g: &BipartiteRateGraph, sol: &RateSolution) -> Value {
    let edges: Vec<Value> = (0..g.edges.len())
        .map(|k| {
            let (a, b) = g.edge_ids(k);
            json!({
                "left": a,
                "right": b,
                "z": format_rational(&sol.z[k]),
                "nu": format_rational(&sol.nu[k]),
            })
        })
        .collect();
    let left: Vec<Value> = g
        .left
        .iter()
        .enumerate()
        .map(|(i, id)| {
            json!({
                "job": id,
                "load": format_rational(&sol.l[i]),
                "theta": format_rational(&sol.theta[i]),
            })
        })
        .collect();
    let right: Vec<Value> = g
        .right
        .iter()
        .enumerate()
        .map(|(j, id)| json!({ "job": id, "rate": format_rational(&sol.r[j]) }))
        .collect();
    json!({
        "machines": g.machines,
        "eta": format_rational(&sol.eta),
        "left": left,
        "right": right,
        "edges": edges,
        "phases": sol.phases,
    })
}
