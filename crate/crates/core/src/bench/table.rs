//! Comparison table: CSV emission/parsing and an aligned text rendering.

use serde::{Deserialize, Serialize};

use super::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub policy: String,
    pub seeds: usize,
    pub mean_profit: f64,
    pub std_profit: f64,
    pub mean_served: f64,
    pub mean_operating_cost: f64,
    pub percent_of_oracle: f64,
    pub median_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row).map_err(|e| BenchError::Csv(e.to_string()))?;
        }
        let bytes = writer.into_inner().map_err(|e| BenchError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| BenchError::Csv(e.to_string()))
    }

    /// Fixed-width text rendering, rows already sorted by (scenario, policy).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:<14} {:>5} {:>14} {:>12} {:>10} {:>10} {:>9} {:>12}\n",
            "scenario", "policy", "seeds", "profit($)", "std($)", "served", "opcost($)", "%oracle", "latency(s)"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<12} {:<14} {:>5} {:>14.2} {:>12.2} {:>10.1} {:>10.2} {:>9.1} {:>12.6}\n",
                r.scenario,
                r.policy,
                r.seeds,
                r.mean_profit,
                r.std_profit,
                r.mean_served,
                r.mean_operating_cost,
                r.percent_of_oracle,
                r.median_latency_s
            ));
        }
        out
    }
}

pub fn parse_table_csv(text: &str) -> Result<ComparisonTable, BenchError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record.map_err(|e| BenchError::Csv(e.to_string()))?);
    }
    Ok(ComparisonTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_table() -> ComparisonTable {
        ComparisonTable {
            rows: vec![
                ComparisonRow {
                    scenario: "synth-4".into(),
                    policy: "empty-to-full".into(),
                    seeds: 30,
                    mean_profit: 1234.5678,
                    std_profit: 45.25,
                    mean_served: 110.4,
                    mean_operating_cost: 87.125,
                    percent_of_oracle: 36.75,
                    median_latency_s: 0.00125,
                },
                ComparisonRow {
                    scenario: "synth-4".into(),
                    policy: "mpc-oracle".into(),
                    seeds: 30,
                    mean_profit: 3359.0,
                    std_profit: 51.5,
                    mean_served: 280.0,
                    mean_operating_cost: 120.0,
                    percent_of_oracle: 100.0,
                    median_latency_s: 2.25,
                },
            ],
        }
    }

    #[test]
    fn csv_round_trips_exactly() {
        let table = sample_table();
        let csv = table.to_csv().unwrap();
        let parsed = parse_table_csv(&csv).unwrap();
        assert_eq!(parsed, table);
    }

    #[test]
    fn text_render_is_deterministic_and_aligned() {
        let table = sample_table();
        let a = table.to_text();
        let b = table.to_text();
        assert_eq!(a, b);
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("scenario"));
        assert!(lines[1].contains("empty-to-full"));
    }
}
