use std::collections::BTreeMap;
use std::fmt::Write;

use chrono::Duration;
use coedit_core::metrics::METRIC_COLUMNS;
use coedit_core::networks::{build_coedit, TimeWindow};
use coedit_core::metrics::coedit_metrics;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::metrics::log_window;
use super::study::RESULTS_CSV;
use super::Pipeline;
use crate::tables::{csv_string, ts};
use crate::PipelineError;

/// Width of the windows in the per-project metric series.
pub const SERIES_DAYS: i64 = 91;

fn read_table(path: &std::path::Path) -> Result<(Vec<String>, Vec<Vec<String>>), PipelineError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| PipelineError::Stage { stage: "report", detail: format!("{}: {e}", path.display()) })?;
    let header = rdr.headers().map(|h| h.iter().map(str::to_string).collect()).unwrap_or_default();
    let rows = rdr
        .records()
        .filter_map(Result::ok)
        .map(|r| r.iter().map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

fn column<'a>(header: &[String], row: &'a [String], name: &str) -> &'a str {
    header.iter().position(|h| h == name).and_then(|i| row.get(i)).map_or("", String::as_str)
}

impl Pipeline {
    /// Markdown summary and plot-ready tables.
    pub fn report(&mut self) -> Result<(), PipelineError> {
        self.mine()?;
        self.detect()?;
        self.study()?;
        let mut inputs = BTreeMap::new();
        for stage in ["mine", "detect", "study"] {
            inputs.extend(Self::prefixed(stage, self.manifest.outputs_of(stage)));
        }
        let settings = json!({ "include_bots": self.cfg.mining.include_bots, "series_days": SERIES_DAYS });
        self.stage("report", settings, inputs, &["report"], |p, outs| {
            let repos = p.mined();
            let logs = p.load_logs("report", &repos)?;
            let include_bots = p.cfg.mining.include_bots;
            let series: Vec<Vec<Vec<String>>> = p.pool.install(|| {
                repos
                    .par_iter()
                    .zip(logs.par_iter())
                    .map(|(r, log)| {
                        let span = log_window(log);
                        if span == TimeWindow::all_time() {
                            return Vec::new();
                        }
                        let mut rows = Vec::new();
                        let mut start = span.start;
                        while start < span.end {
                            let w = TimeWindow { start, end: start + Duration::days(SERIES_DAYS) };
                            let m = coedit_metrics::<f64>(&build_coedit(log, w, include_bots));
                            let mut row = vec![r.full_name.clone(), ts(w.start), ts(w.end)];
                            row.extend(m.csv_fields());
                            rows.push(row);
                            start = w.end;
                        }
                        rows
                    })
                    .collect()
            });
            let header: Vec<&str> = ["repo", "window_start", "window_end"].into_iter().chain(METRIC_COLUMNS).collect();
            outs.write("report/metric_series.csv", csv_string(&header, series.into_iter().flatten()))?;

            let top = std::fs::read(p.out.join("detect/top20.csv")).map_err(|e| PipelineError::io(&p.out.join("detect/top20.csv"), e))?;
            outs.write("report/census_bars.csv", &top)?;
            let md = p.summary_markdown(repos.len())?;
            outs.write("report/summary.md", md)?;
            Ok((BTreeMap::new(), "summary.md, metric_series.csv, census_bars.csv".into()))
        })
    }

    fn summary_markdown(&self, mined: usize) -> Result<String, PipelineError> {
        let mut md = String::new();
        let m = &self.manifest;
        let _ = writeln!(md, "# Study run summary\n");
        let _ = writeln!(md, "- tool version: {}", m.tool_version);
        let _ = writeln!(md, "- configuration hash: `{}`", m.config_hash);
        let _ = writeln!(md, "- seed: {}", m.seed);
        let _ = writeln!(
            md,
            "- data span: {} to {}",
            m.data_span.first_event.as_deref().unwrap_or("n/a"),
            m.data_span.last_event.as_deref().unwrap_or("n/a")
        );

        let _ = writeln!(md, "\n## Corpus\n");
        let _ = writeln!(md, "- repositories listed: {}", self.repos.len());
        let _ = writeln!(md, "- mined: {mined}, failed: {}", self.repos.len() - mined);

        let census: Value = std::fs::read_to_string(self.out.join("detect/census_summary.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or(Value::Null);
        let _ = writeln!(md, "\n## Actions census\n");
        let _ = writeln!(
            md,
            "- repositories using actions: {} of {} ({}%)",
            census["repos_with_actions"], census["total_repos"], census["share_with_actions_pct"].as_str().unwrap_or("n/a")
        );
        let _ = writeln!(
            md,
            "- distinct actions per using repository: min {}, median {}, max {}",
            census["min_actions"], census["median_actions"], census["max_actions"]
        );
        if let Some(cats) = census["categories"].as_object() {
            for (cat, t) in cats {
                let _ = writeln!(md, "- `{cat}` catalog actions: {} occurrences", t["occurrences"]);
            }
        }
        let (h, top) = read_table(&self.out.join("detect/top20.csv"))?;
        if !top.is_empty() {
            let _ = writeln!(md, "\n| rank | action | repositories | share % |\n|---:|---|---:|---:|");
            for r in top.iter().take(10) {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} |",
                    column(&h, r, "rank"),
                    column(&h, r, "action"),
                    column(&h, r, "count"),
                    column(&h, r, "share_pct")
                );
            }
        }

        let study = m.stages.get("study").map(|r| r.summary.clone()).unwrap_or_default();
        let _ = writeln!(md, "\n## Study\n");
        for key in ["eligible", "treated", "matched_pairs"] {
            let _ = writeln!(md, "- {}: {}", key.replace('_', " "), study.get(key).cloned().unwrap_or(Value::from(0)));
        }
        let (h, rows) = read_table(&self.out.join(RESULTS_CSV))?;
        let _ = writeln!(md, "\n| hypothesis | metric | method | p | p (BH) | effect | n1 | n2 | flags |\n|---|---|---|---:|---:|---:|---:|---:|---|");
        for r in &rows {
            let cells: Vec<&str> =
                ["hypothesis", "metric", "method", "p", "p_adjusted", "effect_size", "n1", "n2", "flags"].iter().map(|c| column(&h, r, c)).collect();
            let _ = writeln!(md, "| {} |", cells.join(" | "));
        }
        let _ = writeln!(
            md,
            "\nAdjusted p-values control the false discovery rate within each hypothesis. \
             A p-value just below 0.05 is weak evidence on its own; read it together with the effect size \
             and the placebo comparison."
        );
        Ok(md)
    }
}
