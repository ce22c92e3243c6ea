//! Report serialization: CSV for plotting, JSON for machines, aligned text
//! tables for people. Floats are printed in shortest round-trip form so
//! identical inputs always produce identical bytes.

use cimnet_core::cost::{Breakdown, CostKind, CostReport};
use cimnet_core::ir::{param_count, NetworkSpec};
use cimnet_core::mapper::MappingReport;
use cimnet_core::rank::RankProfile;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::FormatError;

pub fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>) -> Result<String, FormatError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    let bytes = w.into_inner().map_err(|e| FormatError::Schema(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8"))
}

fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

/// Left-aligned first column, right-aligned numbers.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// mapping
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRow {
    pub node_id: String,
    pub kind: String,
    pub num_crossbars: u64,
    pub used_cells: u64,
    pub total_cells: u64,
    pub utilization: f64,
}

pub fn mapping_rows(report: &MappingReport) -> Vec<MappingRow> {
    report
        .per_layer
        .iter()
        .map(|l| MappingRow {
            node_id: l.node_id.clone(),
            kind: l.op.name().to_string(),
            num_crossbars: l.num_crossbars(),
            used_cells: l.used_cells(),
            total_cells: l.total_cells(),
            utilization: ratio_f64(l.utilization()),
        })
        .collect()
}

/// `node_id,kind,num_crossbars,used_cells,total_cells,utilization`
pub fn mapping_csv(report: &MappingReport) -> Result<String, FormatError> {
    csv_string(|w| {
        for row in mapping_rows(report) {
            w.serialize(row)?;
        }
        Ok(())
    })
}

pub fn parse_mapping_csv(text: &str) -> Result<Vec<MappingRow>, FormatError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingDoc {
    pub crossbar: [usize; 3],
    pub num_crossbars: u64,
    pub used_cells: u64,
    pub total_cells: u64,
    pub utilization: f64,
    pub layers: Vec<MappingRow>,
}

pub fn mapping_json(report: &MappingReport) -> String {
    let a = &report.aggregate;
    json_string(&MappingDoc {
        crossbar: [report.xbar.rows, report.xbar.cols, report.xbar.cells_per_weight],
        num_crossbars: a.num_crossbars,
        used_cells: a.used_cells,
        total_cells: a.total_cells,
        utilization: ratio_f64(a.utilization()),
        layers: mapping_rows(report),
    })
}

pub fn mapping_table(report: &MappingReport) -> String {
    let rows: Vec<Vec<String>> = mapping_rows(report)
        .into_iter()
        .map(|r| {
            vec![
                r.node_id,
                r.kind,
                r.num_crossbars.to_string(),
                r.used_cells.to_string(),
                r.total_cells.to_string(),
                format!("{:.4}", r.utilization),
            ]
        })
        .collect();
    let a = &report.aggregate;
    let mut out = text_table(&["node", "kind", "crossbars", "used", "total", "util"], &rows);
    out.push_str(&format!(
        "total: {} crossbars, utilization {:.4}\n",
        a.num_crossbars,
        ratio_f64(a.utilization())
    ));
    out
}

// ---------------------------------------------------------------------------
// cost
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownDoc {
    pub crossbar: f64,
    pub adc: f64,
    pub concat: f64,
    pub add: f64,
    pub pool: f64,
}

impl From<&Breakdown> for BreakdownDoc {
    fn from(b: &Breakdown) -> Self {
        Self {
            crossbar: b.crossbar,
            adc: b.adc,
            concat: b.concat,
            add: b.add,
            pool: b.pool,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCostDoc {
    pub node_id: String,
    pub op: String,
    pub latency: f64,
    pub energy: f64,
    pub latency_breakdown: BreakdownDoc,
    pub energy_breakdown: BreakdownDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostDoc {
    pub total_latency: f64,
    pub total_energy: f64,
    pub latency: BreakdownDoc,
    pub energy: BreakdownDoc,
    pub layers: Vec<LayerCostDoc>,
}

pub fn cost_doc(report: &CostReport) -> CostDoc {
    CostDoc {
        total_latency: report.total_latency(),
        total_energy: report.total_energy(),
        latency: (&report.latency).into(),
        energy: (&report.energy).into(),
        layers: report
            .per_layer
            .iter()
            .map(|l| LayerCostDoc {
                node_id: l.node_id.clone(),
                op: l.op.to_string(),
                latency: l.total_latency(),
                energy: l.total_energy(),
                latency_breakdown: (&l.latency).into(),
                energy_breakdown: (&l.energy).into(),
            })
            .collect(),
    }
}

pub fn cost_json(report: &CostReport) -> String {
    json_string(&cost_doc(report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub node_id: String,
    pub op: String,
    pub latency: f64,
    pub energy: f64,
}

/// `node_id,op,latency,energy`
pub fn cost_csv(report: &CostReport) -> Result<String, FormatError> {
    csv_string(|w| {
        for l in &report.per_layer {
            w.serialize(CostRow {
                node_id: l.node_id.clone(),
                op: l.op.to_string(),
                latency: l.total_latency(),
                energy: l.total_energy(),
            })?;
        }
        Ok(())
    })
}

pub fn parse_cost_csv(text: &str) -> Result<Vec<CostRow>, FormatError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn cost_table(report: &CostReport) -> String {
    let rows: Vec<Vec<String>> = CostKind::ALL
        .iter()
        .map(|&k| {
            let (lat, en) = (report.latency.get(k), report.energy.get(k));
            let share = |x: f64, t: f64| if t > 0.0 { format!("{:.2}%", 100.0 * x / t) } else { "-".into() };
            vec![
                k.name().to_string(),
                format!("{lat:.3}"),
                share(lat, report.total_latency()),
                format!("{en:.6e}"),
                share(en, report.total_energy()),
            ]
        })
        .collect();
    let mut out = text_table(&["kind", "latency", "share", "energy", "share"], &rows);
    out.push_str(&format!(
        "total: latency {:.3}, energy {:.6e}\n",
        report.total_latency(),
        report.total_energy()
    ));
    out
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub arch: String,
    pub params: u64,
    pub crossbars: u64,
    pub utilization: f64,
    pub latency: f64,
    pub energy: f64,
}

impl CompareRow {
    pub fn new(arch: impl Into<String>, net: &NetworkSpec, mapping: &MappingReport, cost: &CostReport) -> Self {
        Self {
            arch: arch.into(),
            params: param_count(net),
            crossbars: mapping.aggregate.num_crossbars,
            utilization: ratio_f64(mapping.aggregate.utilization()),
            latency: cost.total_latency(),
            energy: cost.total_energy(),
        }
    }
}

/// Ascending energy; ties broken by latency, then name.
pub fn sort_by_energy(rows: &mut [CompareRow]) {
    rows.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.latency.total_cmp(&b.latency))
            .then_with(|| a.arch.cmp(&b.arch))
    });
}

/// `arch,params,crossbars,utilization,latency,energy`
pub fn compare_csv(rows: &[CompareRow]) -> Result<String, FormatError> {
    csv_string(|w| {
        for r in rows {
            w.serialize(r)?;
        }
        Ok(())
    })
}

pub fn parse_compare_csv(text: &str) -> Result<Vec<CompareRow>, FormatError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn compare_json(rows: &[CompareRow]) -> String {
    json_string(&rows)
}

pub fn compare_table(rows: &[CompareRow]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.arch.clone(),
                r.params.to_string(),
                r.crossbars.to_string(),
                format!("{:.4}", r.utilization),
                format!("{:.3}", r.latency),
                format!("{:.6e}", r.energy),
            ]
        })
        .collect();
    text_table(&["arch", "params", "crossbars", "util", "latency", "energy"], &cells)
}

// ---------------------------------------------------------------------------
// rank
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub channel: usize,
    pub avg_rank: f64,
}

/// `channel,avg_rank`
pub fn rank_csv(profile: &RankProfile) -> Result<String, FormatError> {
    csv_string(|w| {
        for (channel, &avg_rank) in profile.per_channel_rank.iter().enumerate() {
            w.serialize(RankRow { channel, avg_rank })?;
        }
        Ok(())
    })
}

pub fn parse_rank_csv(text: &str) -> Result<Vec<RankRow>, FormatError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDoc {
    pub per_channel_rank: Vec<f64>,
    pub quarter_means: [f64; 4],
}

pub fn rank_json(profile: &RankProfile) -> String {
    json_string(&RankDoc {
        per_channel_rank: profile.per_channel_rank.clone(),
        quarter_means: profile.quarter_means,
    })
}

pub fn rank_table(profile: &RankProfile) -> String {
    let rows: Vec<Vec<String>> = profile
        .quarter_means
        .iter()
        .enumerate()
        .map(|(q, m)| vec![format!("Q{}", q + 1), format!("{m:.4}")])
        .collect();
    text_table(&["quarter", "mean_rank"], &rows)
}

pub fn suite_json(report: &crate::suite::SuiteReport) -> String {
    json_string(report)
}
