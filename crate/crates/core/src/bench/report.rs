use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::write_atomic;
use crate::error::{Error, Result};

use super::rank::RankingTable;
use super::svg::bar_chart;
use super::ScoreRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Svg => "svg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            "svg" => Some(ReportFormat::Svg),
            _ => None,
        }
    }
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// One row per method: its rank on every metric, then the mean rank.
pub fn ranking_csv(table: &RankingTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_string()];
    header.extend(table.metrics.iter().cloned());
    header.push("average_rank".into());
    w.write_record(&header).map_err(csv_err)?;
    for m in &table.methods {
        let mut rec = vec![m.clone()];
        for metric in &table.metrics {
            rec.push(table.per_metric_ranks[m][metric].to_string());
        }
        rec.push(table.aggregate[m].to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

pub fn ranking_json(table: &RankingTable) -> Result<String> {
    serde_json::to_string_pretty(table).map_err(|e| Error::InvalidInput(format!("json: {e}")))
}

pub fn ranking_svg(table: &RankingTable) -> String {
    let bars: Vec<(String, f64)> = table
        .ordered_methods()
        .into_iter()
        .map(|m| (m.to_string(), table.aggregate[m]))
        .collect();
    bar_chart("Average rank (lower is better)", &bars)
}

/// Writes `table` to `path` in `format`.
pub fn emit_report(table: &RankingTable, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    if table.methods.is_empty() {
        return Err(Error::InvalidInput("empty ranking table".into()));
    }
    let text = match format {
        ReportFormat::Csv => ranking_csv(table)?,
        ReportFormat::Json => ranking_json(table)?,
        ReportFormat::Svg => ranking_svg(table),
    };
    write_atomic(path, text.as_bytes())
}

pub fn load_ranking(path: impl AsRef<Path>) -> Result<RankingTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Score rows as CSV: method, model, dataset, instance_index, metric, score, flagged.
pub fn scores_csv(rows: &[ScoreRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    if rows.is_empty() {
        w.write_record(["method", "model", "dataset", "instance_index", "metric", "score", "flagged"])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

pub fn read_scores_csv(text: &str, origin: &Path) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(|e| Error::parse(origin, e))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::rank::rank_methods;
    use crate::metrics::Direction;

    fn table(n: usize) -> RankingTable {
        let mut rows = Vec::new();
        for m in 0..n {
            for (k, metric) in ["a", "b"].iter().enumerate() {
                rows.push(ScoreRow {
                    method: format!("method{m}"),
                    model: "g".into(),
                    dataset: "d".into(),
                    instance_index: 0,
                    metric: metric.to_string(),
                    score: (m * (k + 1)) as f64 / 3.0,
                    flagged: false,
                });
            }
        }
        rank_methods(&rows, |_| Some(Direction::LowerBetter)).unwrap()
    }

    #[test]
    fn csv_has_one_row_per_method() {
        let csv = ranking_csv(&table(8)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "method,a,b,average_rank");
        assert_eq!(lines[1], "method0,1,1,1");
    }

    #[test]
    fn json_round_trip() {
        let t = table(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        emit_report(&t, ReportFormat::Json, &path).unwrap();
        assert_eq!(load_ranking(&path).unwrap(), t);
    }

    #[test]
    fn svg_is_xml_with_one_bar_per_method() {
        let svg = ranking_svg(&table(8));
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let bars = doc
            .descendants()
            .filter(|n| n.has_tag_name("rect") && n.attribute("class") == Some("bar"))
            .count();
        assert_eq!(bars, 8);
    }

    #[test]
    fn scores_round_trip() {
        let rows = vec![ScoreRow {
            method: "lime(sparsity=0.5)".into(),
            model: "gtm_dataset1".into(),
            dataset: "dataset1".into(),
            instance_index: 8012,
            metric: "complexity".into(),
            score: 0.1 + 0.2,
            flagged: false,
        }];
        let text = scores_csv(&rows).unwrap();
        assert!(text.starts_with("method,model,dataset,instance_index,metric,score,flagged\n"));
        let back = read_scores_csv(&text, Path::new("s.csv")).unwrap();
        assert_eq!(back, rows);
    }
}
