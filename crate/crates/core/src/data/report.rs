//! Experiment artifacts: CSV tables, JSON reports, a Markdown summary and a
//! manifest. Every file is written to a temporary name and renamed into
//! place, and CSV headers are written even when a table has no rows.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentResult;
use crate::error::{Error, Result};
use crate::files::{read_to_string, write_atomic};
use crate::trust::TrustReport;

pub const DISTRIBUTION_CSV: &str = "distribution.csv";
pub const PAIRS_CSV: &str = "pairs.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const PLOT_CSV: &str = "plot_long.csv";
pub const LOSS_CSV: &str = "loss_history.csv";
pub const SEPARATION_CSV: &str = "separation.csv";
pub const REPORTS_JSON: &str = "reports.json";
pub const SUMMARY_MD: &str = "summary.md";
pub const MANIFEST_JSON: &str = "manifest.json";

pub const MANIFEST_FORMAT: &str = "hypertrust-experiment";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub complete: bool,
    pub error: Option<String>,
    pub dataset: String,
    pub seed: u64,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn csv_bytes<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let fail = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    write_atomic(path, &csv_bytes(path, header, rows)?)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

/// Header and rows of a CSV file, as strings.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = read_to_string(path)?;
    let parse = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(parse)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(parse)?;
    Ok((header, rows))
}

/// One trust report as `initiator,initiator_id,target,target_id,trust,trusted`.
pub fn write_trust_csv(report: &TrustReport, ids: &[u64], path: &Path) -> Result<()> {
    let rows = report.scores.iter().map(|s| {
        (
            report.initiator,
            ids[report.initiator],
            s.device,
            ids[s.device],
            s.trust,
            s.trust >= report.threshold,
        )
    });
    write_csv(
        path,
        &["initiator", "initiator_id", "target", "target_id", "trust", "trusted"],
        rows,
    )
}

fn distribution_rows(r: &ExperimentResult) -> Vec<(usize, u64, usize, u64, f64, f64, bool)> {
    let mut rows = Vec::new();
    for (rep, base) in r.reports.iter().zip(&r.baseline_reports) {
        let i = rep.initiator;
        for j in (0..r.ids.len()).filter(|&j| j != i) {
            let t = rep.trust_of(j).unwrap_or(f64::NAN);
            rows.push((i, r.ids[i], j, r.ids[j], t, base.trust_of(j).unwrap_or(f64::NAN), t >= r.threshold));
        }
    }
    rows
}

fn plot_rows(r: &ExperimentResult) -> Vec<(&'static str, &'static str, String, f64, f64)> {
    let mut rows = Vec::new();
    for (rep, base) in r.reports.iter().zip(&r.baseline_reports) {
        let init = r.ids[rep.initiator].to_string();
        for (series, report) in [("hscl", rep), ("baseline", base)] {
            for s in &report.scores {
                rows.push(("distribution", series, init.clone(), r.ids[s.device] as f64, s.trust));
            }
        }
    }
    for s in &r.sweep {
        rows.push(("sweep", "hscl", s.initiator_id.to_string(), s.num_devices as f64, s.most_trusted.trust));
    }
    for e in &r.loss_history {
        rows.push(("loss", "total", String::new(), e.epoch as f64, e.loss.total));
    }
    rows
}

fn summary_markdown(r: &ExperimentResult, complete: bool, error: Option<&str>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Experiment `{}`\n", r.dataset);
    let _ = writeln!(s, "- seed: {}", r.seed);
    let _ = writeln!(s, "- devices: {}", r.ids.len());
    let _ = writeln!(s, "- threshold: {}", r.threshold);
    if let Some(h) = &r.hypergraph {
        let _ = writeln!(
            s,
            "- hyperedges: {} (physical {}, interest {}, friendship {}, collaboration {})",
            h.num_hyperedges, h.physical, h.interest, h.friendship, h.collaboration
        );
    }
    if let Some(last) = r.loss_history.last() {
        let _ = writeln!(s, "- final loss: {:.6} after {} epochs", last.loss.total, r.loss_history.len());
    }
    if !complete {
        let _ = writeln!(s, "- status: incomplete{}", error.map(|e| format!(" ({e})")).unwrap_or_default());
    }

    if !r.reports.is_empty() {
        let _ = writeln!(s, "\n## Trusted devices per initiator\n");
        let _ = writeln!(s, "| initiator | trusted | untrusted | most trusted | baseline most trusted | baseline trusted |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for ((rep, base), pair) in r.reports.iter().zip(&r.baseline_reports).zip(&r.pairs) {
            let trusted = rep.trusted_set.len();
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} ({:.4}) | {} ({:.4}) | {} |",
                pair.initiator_id,
                trusted,
                rep.scores.len() - trusted,
                pair.hscl_label(),
                pair.hscl.trust,
                pair.baseline_label(),
                pair.baseline.trust,
                base.trusted_set.len()
            );
        }
    }

    if !r.separation.is_empty() {
        let _ = writeln!(s, "\n## Community separation\n");
        let _ = writeln!(s, "| method | intra mean | inter mean | separation | accuracy |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for st in &r.separation {
            let _ = writeln!(
                s,
                "| {} | {:.4} | {:.4} | {:.4} | {:.3} |",
                st.method, st.intra_mean, st.inter_mean, st.separation, st.accuracy
            );
        }
    }

    if !r.sweep.is_empty() {
        let _ = writeln!(s, "\n## Most trusted device by network size\n");
        let _ = writeln!(s, "| devices | pair | trust |");
        let _ = writeln!(s, "|---|---|---|");
        for p in &r.sweep {
            let _ = writeln!(s, "| {} | {} | {:.4} |", p.num_devices, p.label(), p.most_trusted.trust);
        }
    }
    s
}

#[derive(Serialize)]
struct ReportsFile<'a> {
    dataset: &'a str,
    seed: u64,
    ids: &'a [u64],
    threshold: f64,
    hypergraph: &'a Option<super::experiment::HypergraphSummary>,
    hscl: &'a [TrustReport],
    baseline: &'a [TrustReport],
    pairs: &'a [super::experiment::PairRecord],
    sweep: &'a [super::experiment::SweepRecord],
    separation: &'a [super::experiment::SeparationStats],
}

/// Write every artifact of `r` into `dir`; the manifest goes last.
pub fn write_experiment(r: &ExperimentResult, dir: &Path, complete: bool, error: Option<&str>) -> Result<()> {
    write_csv(
        &dir.join(DISTRIBUTION_CSV),
        &["initiator", "initiator_id", "target", "target_id", "trust", "baseline", "trusted"],
        distribution_rows(r),
    )?;
    write_csv(
        &dir.join(PAIRS_CSV),
        &[
            "initiator",
            "initiator_id",
            "hscl_target_id",
            "hscl_trust",
            "hscl_pair",
            "baseline_target_id",
            "baseline_trust",
            "baseline_pair",
        ],
        r.pairs.iter().map(|p| {
            (
                p.initiator,
                p.initiator_id,
                p.hscl_id,
                p.hscl.trust,
                p.hscl_label(),
                p.baseline_id,
                p.baseline.trust,
                p.baseline_label(),
            )
        }),
    )?;
    write_csv(
        &dir.join(SWEEP_CSV),
        &["num_devices", "initiator_id", "most_trusted_id", "trust", "pair"],
        r.sweep
            .iter()
            .map(|s| (s.num_devices, s.initiator_id, s.most_trusted_id, s.most_trusted.trust, s.label())),
    )?;
    write_csv(&dir.join(PLOT_CSV), &["figure", "series", "initiator", "x", "y"], plot_rows(r))?;
    write_csv(
        &dir.join(LOSS_CSV),
        &["epoch", "total", "device", "hyperedge", "membership", "skipped_sides"],
        r.loss_history.iter().map(|e| {
            (
                e.epoch,
                e.loss.total,
                e.loss.device,
                e.loss.hyperedge,
                e.loss.membership,
                e.skipped_sides,
            )
        }),
    )?;
    write_csv(
        &dir.join(SEPARATION_CSV),
        &["method", "intra_mean", "inter_mean", "separation", "initiator", "accuracy"],
        r.separation
            .iter()
            .map(|s| (&s.method, s.intra_mean, s.inter_mean, s.separation, s.initiator, s.accuracy)),
    )?;
    write_json(
        &dir.join(REPORTS_JSON),
        &ReportsFile {
            dataset: &r.dataset,
            seed: r.seed,
            ids: &r.ids,
            threshold: r.threshold,
            hypergraph: &r.hypergraph,
            hscl: &r.reports,
            baseline: &r.baseline_reports,
            pairs: &r.pairs,
            sweep: &r.sweep,
            separation: &r.separation,
        },
    )?;
    write_atomic(&dir.join(SUMMARY_MD), summary_markdown(r, complete, error).as_bytes())?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        complete,
        error: error.map(String::from),
        dataset: r.dataset.clone(),
        seed: r.seed,
        files: [
            DISTRIBUTION_CSV,
            PAIRS_CSV,
            SWEEP_CSV,
            PLOT_CSV,
            LOSS_CSV,
            SEPARATION_CSV,
            REPORTS_JSON,
            SUMMARY_MD,
        ]
        .map(String::from)
        .to_vec(),
    };
    write_json(&dir.join(MANIFEST_JSON), &manifest)
}
