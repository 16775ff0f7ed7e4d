use std::collections::BTreeMap;

use coedit_core::metrics::{bipartite_metrics, coedit_metrics, BIPARTITE_COLUMNS, METRIC_COLUMNS};
use coedit_core::networks::{build_bipartite, build_coedit, BipartiteNetwork, CoEditNetwork, TimeWindow};
use coedit_core::provenance::EventLog;
use coedit_core::study::history_window;
use coedit_core::{BipartiteMetricVector, MetricVector};
use rayon::prelude::*;
use serde_json::json;

use super::Pipeline;
use crate::repos::safe_name;
use crate::tables::{csv_string, ts};
use crate::PipelineError;

/// Span from first to last recorded activity, or all time for an empty log.
pub(crate) fn log_window(log: &EventLog) -> TimeWindow {
    let times = log.activity_times();
    match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => history_window(a, b),
        _ => TimeWindow::all_time(),
    }
}

pub(crate) struct Networks {
    pub coedit: CoEditNetwork,
    pub bipartite: BipartiteNetwork,
    pub m: MetricVector,
    pub b: BipartiteMetricVector,
}

pub(crate) fn networks(log: &EventLog, window: TimeWindow, include_bots: bool) -> Networks {
    let coedit = build_coedit(log, window, include_bots);
    let bipartite = build_bipartite(log, window, include_bots);
    let m = coedit_metrics::<f64>(&coedit);
    let b = bipartite_metrics::<f64>(&bipartite);
    Networks { coedit, bipartite, m, b }
}

pub(crate) fn metric_header(lead: &[&'static str]) -> Vec<&'static str> {
    lead.iter().copied().chain(METRIC_COLUMNS).chain(BIPARTITE_COLUMNS).collect()
}

pub(crate) fn metric_fields(n: &Networks) -> Vec<String> {
    n.m.csv_fields().into_iter().chain(n.b.csv_fields()).collect()
}

impl Pipeline {
    /// Whole-history networks and metrics for every mined repository.
    pub fn metrics(&mut self) -> Result<(), PipelineError> {
        self.mine()?;
        let inputs = Self::prefixed("mine", self.manifest.outputs_of("mine"));
        let settings = json!({ "include_bots": self.cfg.mining.include_bots });
        self.stage("metrics", settings, inputs, &["metrics"], |p, outs| {
            let repos = p.mined();
            let logs = p.load_logs("metrics", &repos)?;
            let include_bots = p.cfg.mining.include_bots;
            let nets: Vec<(TimeWindow, Networks)> = p.pool.install(|| {
                logs.par_iter()
                    .map(|log| {
                        let w = log_window(log);
                        (w, networks(log, w, include_bots))
                    })
                    .collect()
            });
            let mut coedit_rows = Vec::new();
            let mut bip_rows = Vec::new();
            for (r, (w, n)) in repos.iter().zip(&nets) {
                let lead = [r.full_name.clone(), ts(w.start), ts(w.end)];
                coedit_rows.push(lead.iter().cloned().chain(n.m.csv_fields()).collect::<Vec<_>>());
                bip_rows.push(lead.iter().cloned().chain(n.b.csv_fields()).collect::<Vec<_>>());
                let stem = format!("metrics/networks/{}", safe_name(&r.full_name));
                outs.write(&format!("{stem}.coedit.csv"), n.coedit.to_edge_csv())?;
                outs.write(&format!("{stem}.coedit.json"), n.coedit.sidecar_json() + "\n")?;
                outs.write(&format!("{stem}.bipartite.csv"), n.bipartite.to_edge_csv())?;
                outs.write(&format!("{stem}.bipartite.json"), n.bipartite.sidecar_json() + "\n")?;
            }
            let lead = ["repo", "window_start", "window_end"];
            let coedit_header: Vec<&str> = lead.iter().copied().chain(METRIC_COLUMNS).collect();
            let bip_header: Vec<&str> = lead.iter().copied().chain(BIPARTITE_COLUMNS).collect();
            outs.write("metrics/coedit.csv", csv_string(&coedit_header, coedit_rows))?;
            outs.write("metrics/bipartite.csv", csv_string(&bip_header, bip_rows))?;
            Ok((BTreeMap::new(), format!("networks for {} repositories", repos.len())))
        })
    }
}
