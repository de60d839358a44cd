//! Result export (CSV / JSON lines), Pareto filtering and static SVG
//! accuracy-versus-cost plots.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::LabelSet;
use crate::error::{Error, Result};
use crate::experiment::ExperimentRecord;

/// Column order of every exported results file.
pub const COLUMNS: [&str; 12] = [
    "dataset",
    "fingerprint",
    "iExponent",
    "kClusters",
    "L",
    "D",
    "kNeighbors",
    "accuracyPercent",
    "distanceComputations",
    "centroidComponent",
    "refSetComponent",
    "convergenceCapped",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    /// `.jsonl` / `.json` select JSON lines; anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Format::JsonLines,
            _ => Format::Csv,
        }
    }
}

/// One exported record. Conventional baselines leave the grid columns
/// empty (`null` in JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub dataset: String,
    pub fingerprint: String,
    #[serde(rename = "iExponent")]
    pub i_exponent: Option<u32>,
    #[serde(rename = "kClusters")]
    pub k_clusters: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    #[serde(rename = "kNeighbors")]
    pub k_neighbors: usize,
    /// Rounded to four decimal places.
    #[serde(rename = "accuracyPercent")]
    pub accuracy_percent: f64,
    #[serde(rename = "distanceComputations")]
    pub distance_computations: u64,
    #[serde(rename = "centroidComponent")]
    pub centroid_component: u64,
    #[serde(rename = "refSetComponent")]
    pub ref_set_component: u64,
    #[serde(rename = "convergenceCapped")]
    pub convergence_capped: bool,
}

fn round4(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0
}

impl From<&ExperimentRecord> for ExportRow {
    fn from(r: &ExperimentRecord) -> Self {
        let grid = r.classifier.grid();
        ExportRow {
            dataset: r.dataset.clone(),
            fingerprint: r.fingerprint.clone(),
            i_exponent: grid.and_then(|g| g.i_exponent),
            k_clusters: grid.map(|g| g.k_clusters),
            l: grid.map(|g| g.l),
            d: grid.map(|g| g.d),
            k_neighbors: r.classifier.k_neighbors(),
            accuracy_percent: round4(r.accuracy_percent),
            distance_computations: r.distance_computations,
            centroid_component: r.centroid_component,
            ref_set_component: r.ref_set_component,
            convergence_capped: r.convergence_capped,
        }
    }
}

impl ExportRow {
    pub fn is_baseline(&self) -> bool {
        self.k_clusters.is_none()
    }

    pub fn cost_millions(&self) -> f64 {
        self.distance_computations as f64 / 1e6
    }

    fn csv_fields(&self) -> [String; 12] {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        [
            self.dataset.clone(),
            self.fingerprint.clone(),
            opt(&self.i_exponent),
            opt(&self.k_clusters),
            opt(&self.l),
            opt(&self.d),
            self.k_neighbors.to_string(),
            format!("{:.4}", self.accuracy_percent),
            self.distance_computations.to_string(),
            self.centroid_component.to_string(),
            self.ref_set_component.to_string(),
            self.convergence_capped.to_string(),
        ]
    }

    fn from_csv_fields(fields: &csv::StringRecord) -> std::result::Result<Self, String> {
        fn req<T: std::str::FromStr>(s: &str, col: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("bad {col} value {s:?}"))
        }
        fn opt<T: std::str::FromStr>(s: &str, col: &str) -> std::result::Result<Option<T>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                req(s, col).map(Some)
            }
        }
        if fields.len() != COLUMNS.len() {
            return Err(format!("expected {} columns, found {}", COLUMNS.len(), fields.len()));
        }
        let f = |i: usize| &fields[i];
        Ok(ExportRow {
            dataset: f(0).to_owned(),
            fingerprint: f(1).to_owned(),
            i_exponent: opt(f(2), COLUMNS[2])?,
            k_clusters: opt(f(3), COLUMNS[3])?,
            l: opt(f(4), COLUMNS[4])?,
            d: opt(f(5), COLUMNS[5])?,
            k_neighbors: req(f(6), COLUMNS[6])?,
            accuracy_percent: req(f(7), COLUMNS[7])?,
            distance_computations: req(f(8), COLUMNS[8])?,
            centroid_component: req(f(9), COLUMNS[9])?,
            ref_set_component: req(f(10), COLUMNS[10])?,
            convergence_capped: req(f(11), COLUMNS[11])?,
        })
    }
}

pub fn write_rows<W: Write>(rows: &[ExportRow], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(COLUMNS)?;
            for row in rows {
                w.write_record(row.csv_fields())?;
            }
            w.flush().map_err(|e| Error::io("<records>", e))?;
        }
        Format::JsonLines => {
            let mut out = out;
            for row in rows {
                serde_json::to_writer(&mut out, row)?;
                out.write_all(b"\n").map_err(|e| Error::io("<records>", e))?;
            }
            out.flush().map_err(|e| Error::io("<records>", e))?;
        }
    }
    Ok(())
}

/// Writes `records` to `path` in the schema-stable column set.
pub fn export_records(records: &[ExperimentRecord], path: &Path, format: Format) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("nothing to export".into()));
    }
    let rows: Vec<ExportRow> = records.iter().map(ExportRow::from).collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(&rows, format, BufWriter::new(file))
}

pub fn read_rows<R: BufRead>(input: R, format: Format, origin: &Path) -> Result<Vec<ExportRow>> {
    let malformed = |message: String| Error::MalformedRecords {
        path: origin.to_owned(),
        message,
    };
    match format {
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
            let header = reader.headers()?.clone();
            if header.iter().ne(COLUMNS) {
                return Err(malformed(format!(
                    "unexpected header {:?}",
                    header.iter().collect::<Vec<_>>()
                )));
            }
            reader
                .records()
                .map(|r| {
                    let r = r?;
                    ExportRow::from_csv_fields(&r).map_err(&malformed)
                })
                .collect()
        }
        Format::JsonLines => input
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| {
                let l = l.map_err(|e| Error::io(origin, e))?;
                serde_json::from_str(&l).map_err(|e| malformed(e.to_string()))
            })
            .collect(),
    }
}

pub fn read_records(path: &Path) -> Result<Vec<ExportRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows(BufReader::new(file), Format::from_path(path), path)
}

/// Per-item predictions: one row per (classifier, test item).
pub fn export_predictions(
    records: &[ExperimentRecord],
    test_labels: &[crate::dataset::Label],
    labels: &LabelSet,
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record([
        "dataset",
        "iExponent",
        "kClusters",
        "L",
        "D",
        "kNeighbors",
        "testIndex",
        "actual",
        "predicted",
    ])?;
    for r in records {
        let row = ExportRow::from(r);
        let fields = row.csv_fields();
        for (i, (pred, actual)) in r.predictions.iter().zip(test_labels).enumerate() {
            w.write_record([
                fields[0].as_str(),
                &fields[2],
                &fields[3],
                &fields[4],
                &fields[5],
                &fields[6],
                &i.to_string(),
                labels.name(*actual),
                labels.name(*pred),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Indices of rows not dominated by any other row, where `a` dominates `b`
/// when it costs no more, is no less accurate, and is strictly better in
/// one of the two. Returned in ascending cost order.
pub fn pareto_front(rows: &[ExportRow]) -> Vec<usize> {
    let dominates = |a: &ExportRow, b: &ExportRow| {
        a.distance_computations <= b.distance_computations
            && a.accuracy_percent >= b.accuracy_percent
            && (a.distance_computations < b.distance_computations || a.accuracy_percent > b.accuracy_percent)
    };
    let mut front: Vec<usize> = (0..rows.len())
        .filter(|&i| !rows.iter().any(|other| dominates(other, &rows[i])))
        .collect();
    front.sort_by(|&a, &b| {
        rows[a]
            .distance_computations
            .cmp(&rows[b].distance_computations)
            .then(a.cmp(&b))
    });
    front
}

/// Fixed-width text table with cost in raw counts and in millions.
pub fn format_table(rows: &[ExportRow]) -> String {
    let front = pareto_front(rows);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3} {:>9} {:>3} {:>4} {:>3} {:>9} {:>14} {:>10} {:>11} {:>12}  pareto",
        "i", "kClusters", "L", "D", "k", "accuracy", "distances", "millions", "centroid", "refSet"
    );
    for (idx, r) in rows.iter().enumerate() {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>3} {:>9} {:>3} {:>4} {:>3} {:>9.4} {:>14} {:>10.4} {:>11} {:>12}  {}",
            opt(r.i_exponent.map(|v| v.to_string())),
            opt(r.k_clusters.map(|v| v.to_string())),
            opt(r.l.map(|v| v.to_string())),
            opt(r.d.map(|v| v.to_string())),
            r.k_neighbors,
            r.accuracy_percent,
            r.distance_computations,
            r.cost_millions(),
            r.centroid_component,
            r.ref_set_component,
            if front.contains(&idx) { "*" } else { "" }
        );
    }
    out
}

impl std::fmt::Display for ExportRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} accuracy={:.4}% distances={} ({:.2}M)",
            self.dataset,
            self.accuracy_percent,
            self.distance_computations,
            self.cost_millions()
        )
    }
}

// ---------------------------------------------------------------- plotting

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions covering [lo, hi] with a 1/2/5 step.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_owned()
}

/// Writes a scatter of accuracy against cost (millions of distance
/// computations), one series per D value, Pareto-optimal points ringed, the
/// baseline as dashed reference lines. The exported rows are embedded
/// verbatim as CSV inside the SVG's `<desc>` element.
pub fn emit_plot(rows: &[ExportRow], baseline: Option<&ExportRow>, title: &str, path: &Path) -> Result<()> {
    let svg = render_plot(rows, baseline, title)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

pub fn render_plot(rows: &[ExportRow], baseline: Option<&ExportRow>, title: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("nothing to plot".into()));
    }

    let mut xs: Vec<f64> = rows.iter().map(ExportRow::cost_millions).collect();
    let mut ys: Vec<f64> = rows.iter().map(|r| r.accuracy_percent).collect();
    if let Some(b) = baseline {
        xs.push(b.cost_millions());
        ys.push(b.accuracy_percent);
    }
    let x_hi = xs.iter().cloned().fold(0.0, f64::max) * 1.05;
    let x_hi = if x_hi > 0.0 { x_hi } else { 1.0 };
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((y_max - y_min) * 0.08).max(0.5);
    let (y_lo, y_hi) = ((y_min - pad).max(0.0), (y_max + pad).min(100.0));
    let (y_lo, y_hi) = if y_hi > y_lo {
        (y_lo, y_hi)
    } else {
        (y_lo - 1.0, y_hi + 1.0)
    };

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + x / x_hi * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut table = Vec::new();
    let mut data_rows: Vec<ExportRow> = rows.to_vec();
    if let Some(b) = baseline {
        data_rows.push(b.clone());
    }
    write_rows(&data_rows, Format::Csv, &mut table)?;
    let table = String::from_utf8(table).expect("csv output is utf-8");

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<desc id=\"data\">\n{}</desc>", escape(&table));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    // axes and grid
    for t in ticks(0.0, x_hi, 8) {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y_lo, y_hi, 8) {
        let y = py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">distance computations (millions)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(22 {:.2}) rotate(-90)" text-anchor="middle">accuracy (%)</text>"#,
        TOP + plot_h / 2.0
    );

    if let Some(b) = baseline {
        let (bx, by) = (px(b.cost_millions()), py(b.accuracy_percent));
        let _ = writeln!(
            s,
            r##"<g stroke="#555" stroke-dasharray="6 4"><line x1="{LEFT}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}"/><line x1="{bx:.2}" y1="{TOP}" x2="{bx:.2}" y2="{:.2}"/></g>"##,
            LEFT + plot_w,
            TOP + plot_h
        );
    }

    // Pareto staircase
    let front = pareto_front(rows);
    if front.len() > 1 {
        let pts: Vec<String> = front
            .iter()
            .map(|&i| format!("{:.2},{:.2}", px(xs[i]), py(ys[i])))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#999" stroke-width="1"/>"##,
            pts.join(" ")
        );
    }

    // one series per D value, in first-seen order
    let mut series: Vec<Option<f64>> = Vec::new();
    for r in rows {
        let key = r.d;
        if !series.iter().any(|k| k.map(f64::to_bits) == key.map(f64::to_bits)) {
            series.push(key);
        }
    }
    for (si, key) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let _ = writeln!(s, r#"<g fill="{color}">"#);
        for (i, r) in rows.iter().enumerate() {
            if r.d.map(f64::to_bits) != key.map(f64::to_bits) {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4"><title>{}</title></circle>"#,
                px(xs[i]),
                py(ys[i]),
                escape(&point_label(r))
            );
        }
        let _ = writeln!(s, "</g>");
        let ly = TOP + 10.0 + 20.0 * si as f64;
        let name = key.map_or_else(|| "conv-k-NN".to_owned(), |d| format!("D = {d}"));
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{ly:.2}" r="4" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            WIDTH - RIGHT + 20.0,
            WIDTH - RIGHT + 30.0,
            ly + 4.0,
            escape(&name)
        );
    }
    for &i in &front {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="7" fill="none" stroke="black" stroke-width="1.5"/>"#,
            px(xs[i]),
            py(ys[i])
        );
    }
    let legend_y = TOP + 10.0 + 20.0 * series.len() as f64;
    let _ = writeln!(
        s,
        r#"<circle cx="{:.2}" cy="{legend_y:.2}" r="7" fill="none" stroke="black" stroke-width="1.5"/><text x="{:.2}" y="{:.2}">Pareto front</text>"#,
        WIDTH - RIGHT + 20.0,
        WIDTH - RIGHT + 30.0,
        legend_y + 4.0
    );
    if baseline.is_some() {
        let y = legend_y + 20.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#555" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}">conv-k-NN</text>"##,
            WIDTH - RIGHT + 12.0,
            WIDTH - RIGHT + 28.0,
            WIDTH - RIGHT + 30.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

fn point_label(r: &ExportRow) -> String {
    match (r.i_exponent, r.k_clusters, r.l, r.d) {
        (i, Some(k), Some(l), Some(d)) => format!(
            "{}kClusters={k} L={l} D={d}: {:.4}% at {:.4}M",
            i.map(|i| format!("i={i} ")).unwrap_or_default(),
            r.accuracy_percent,
            r.cost_millions()
        ),
        _ => format!(
            "conv-k-NN k={}: {:.4}% at {:.4}M",
            r.k_neighbors,
            r.accuracy_percent,
            r.cost_millions()
        ),
    }
}

/// Extracts the CSV data table embedded by [`render_plot`].
pub fn embedded_table(svg: &str) -> Option<String> {
    let start = svg.find("<desc id=\"data\">\n")? + "<desc id=\"data\">\n".len();
    let end = start + svg[start..].find("</desc>")?;
    Some(
        svg[start..end]
            .replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&amp;", "&"),
    )
}
