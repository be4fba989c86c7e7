//! CSV tables and the MI chart.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::corpus::LoadDiagnostics;
use crate::grouping::{Kappa, Partition};
use crate::relext::{RelationInstance, RelationType};
use crate::stats::{format_mi, ContingencyTable, PmiMatrix, GROUPS, RELATIONS};

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn into_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_ingest_summary<W: Write>(w: W, d: &LoadDiagnostics) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["metric", "value"]).map_err(into_io)?;
    for (k, v) in [
        ("cases", d.cases),
        ("utterances", d.utterances),
        ("justice_utterances", d.justice_utterances),
        ("lawyer_utterances", d.lawyer_utterances),
        ("exchanges", d.exchanges),
    ] {
        out.write_record([k, &v.to_string()]).map_err(into_io)?;
    }
    out.flush()
}

/// `pool,case_id,utterance_index`, one row per membership.
pub fn write_pools<W: Write>(w: W, p: &Partition) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["pool", "case_id", "utterance_index"]).map_err(into_io)?;
    for k in Kappa::ALL {
        for r in p.pool(k) {
            out.write_record([k.as_str(), &r.case_id, &r.utterance_index.to_string()])
                .map_err(into_io)?;
        }
    }
    out.flush()
}

/// `pool,utterances,lawsuits`, plus an `excluded` row for turns with no pool.
pub fn write_pool_diagnostics<W: Write>(w: W, p: &Partition) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["pool", "utterances", "lawsuits"]).map_err(into_io)?;
    for (k, s) in p.stats() {
        out.write_record([k.as_str(), &s.utterances.to_string(), &s.lawsuits.to_string()])
            .map_err(into_io)?;
    }
    let excluded_cases = crate::corpus::distinct_cases(&p.excluded);
    out.write_record(["excluded", &p.excluded.len().to_string(), &excluded_cases.to_string()])
        .map_err(into_io)?;
    out.flush()
}

pub const RELATIONS_HEADER: [&str; 7] = ["relation", "left", "right", "case_id", "utt", "sent", "pattern_id"];

/// Streams relation rows; call [`RelationWriter::write`] per batch.
pub struct RelationWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> RelationWriter<W> {
    pub fn new(w: W) -> io::Result<Self> {
        let mut out = csv_writer(w);
        out.write_record(RELATIONS_HEADER).map_err(into_io)?;
        Ok(RelationWriter { out })
    }

    pub fn write(&mut self, instances: &[RelationInstance]) -> io::Result<()> {
        for i in instances {
            self.out
                .write_record([
                    i.relation.as_str(),
                    &i.left,
                    &i.right,
                    &i.case_id,
                    &i.utterance_index.to_string(),
                    &i.sentence_index.to_string(),
                    &i.pattern_id,
                ])
                .map_err(into_io)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// `relation,kappa,count,mi`. With no matrix (empty table) only the header is written.
pub fn write_mi<W: Write>(w: W, table: &ContingencyTable, matrix: Option<&PmiMatrix>) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["relation", "kappa", "count", "mi"]).map_err(into_io)?;
    if let Some(m) = matrix {
        for r in RelationType::ALL {
            for k in Kappa::ALL {
                out.write_record([
                    r.as_str(),
                    k.as_str(),
                    &table.get(r, k).to_string(),
                    &format_mi(m.get(r, k)),
                ])
                .map_err(into_io)?;
            }
        }
    }
    out.flush()
}

/// `margin,label,total`: one row per relation, per pool, and the grand total.
pub fn write_marginals<W: Write>(w: W, table: &ContingencyTable) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["margin", "label", "total"]).map_err(into_io)?;
    if table.total() > 0 {
        for r in RelationType::ALL {
            out.write_record(["relation", r.as_str(), &table.row_total(r).to_string()])
                .map_err(into_io)?;
        }
        for k in Kappa::ALL {
            out.write_record(["kappa", k.as_str(), &table.col_total(k).to_string()])
                .map_err(into_io)?;
        }
        out.write_record(["all", "N", &table.total().to_string()]).map_err(into_io)?;
    }
    out.flush()
}

/// Parses a `relation,kappa,count,mi` table back into counts and MI values.
pub fn read_mi(text: &str) -> Result<(ContingencyTable, [[f64; GROUPS]; RELATIONS]), String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut table = ContingencyTable::new();
    let mut values = [[f64::NAN; GROUPS]; RELATIONS];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = i + 2;
        if rec.len() != 4 {
            return Err(format!("row {row}: expected relation,kappa,count,mi"));
        }
        let r: RelationType = rec[0].parse().map_err(|e| format!("row {row}: {e}"))?;
        let k: Kappa = rec[1].parse().map_err(|e| format!("row {row}: {e}"))?;
        let c: u64 = rec[2].parse().map_err(|_| format!("row {row}: bad count {:?}", &rec[2]))?;
        let v = match &rec[3] {
            "-inf" => f64::NEG_INFINITY,
            s => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("row {row}: bad mi {s:?}"))?,
        };
        table.add(r, k, c);
        values[r.index()][k.index()] = v;
    }
    if values.iter().flatten().any(|v| v.is_nan()) {
        return Err("table must list all 28 relation/pool cells".into());
    }
    Ok((table, values))
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 740.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 370.0;

fn color(k: Kappa) -> &'static str {
    match k {
        Kappa::A => "#1f77b4",
        Kappa::B => "#d62728",
        Kappa::C => "#2ca02c",
        Kappa::D => "#e6b800",
    }
}

fn marker(k: Kappa, x: f64, y: f64, attrs: &str) -> String {
    let c = color(k);
    let s = 6.0;
    match k {
        Kappa::A => format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="{s:.2}" fill="{c}"{attrs}/>"#),
        Kappa::B => format!(
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{c}"{attrs}/>"#,
            x - s,
            y - s,
            2.0 * s,
            2.0 * s
        ),
        Kappa::C => format!(
            r#"<polygon points="{:.2},{y:.2} {:.2},{:.2} {:.2},{:.2}" fill="{c}"{attrs}/>"#,
            x - s,
            x + s,
            y - s,
            x + s,
            y + s
        ),
        Kappa::D => format!(
            r#"<polygon points="{:.2},{y:.2} {:.2},{:.2} {:.2},{:.2}" fill="{c}"{attrs}/>"#,
            x + s,
            x - s,
            y - s,
            x - s,
            y + s
        ),
    }
}

/// Renders the 7×4 MI matrix as a standalone SVG stem chart.
///
/// Each relation gets a slot on the x axis with one marker per pool, drawn
/// on a stem from zero. Zero-count cells (`-inf`) are drawn as a down arrow
/// below the plot area. Every marker carries `data-relation`, `data-kappa`,
/// `data-value` and `data-y` attributes.
pub fn render_mi_chart(m: &PmiMatrix) -> String {
    let finite: Vec<f64> = m.values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let hi = finite.iter().copied().fold(0.0f64, f64::max);
    let lo = finite.iter().copied().fold(0.0f64, f64::min);
    let (lo, hi) = if hi - lo < 1e-9 {
        (-1.0, 1.0)
    } else {
        let pad = (hi - lo) * 0.08;
        (lo - pad, hi + pad)
    };
    let y_of = |v: f64| BOTTOM - (v - lo) / (hi - lo) * (BOTTOM - TOP);
    let zero = y_of(0.0);
    let slot = (RIGHT - LEFT) / RELATIONS as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">MI(R, κ), log base {}</text>"#,
        WIDTH / 2.0,
        m.config.log_base
    );

    // y ticks
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{RIGHT}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{zero:.2}" x2="{RIGHT}" y2="{zero:.2}" stroke="#000" data-role="zero"/>"##
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{BOTTOM}" stroke="#000"/>"##
    );

    for r in RelationType::ALL {
        let center = LEFT + slot * (r.index() as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{center:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            BOTTOM + 40.0,
            r.as_str()
        );
        for k in Kappa::ALL {
            let x = center + (k.index() as f64 - 1.5) * slot / 5.0;
            let v = m.get(r, k);
            if v.is_finite() {
                let y = y_of(v);
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x:.2}" y1="{zero:.2}" x2="{x:.2}" y2="{y:.2}" stroke="{}" stroke-width="1.5"/>"#,
                    color(k)
                );
                let attrs = format!(
                    r#" data-relation="{}" data-kappa="{}" data-value="{}" data-y="{y:.2}""#,
                    r.as_str(),
                    k.as_str(),
                    format_mi(v)
                );
                let _ = writeln!(svg, "{}", marker(k, x, y, &attrs));
            } else {
                let y = BOTTOM + 6.0;
                let _ = writeln!(
                    svg,
                    r#"<path d="M{x:.2},{:.2} L{x:.2},{:.2} M{:.2},{:.2} L{x:.2},{:.2} L{:.2},{:.2}" stroke="{c}" stroke-width="2" fill="none" data-relation="{}" data-kappa="{}" data-value="-inf" data-y="{y:.2}"/>"#,
                    y - 14.0,
                    y,
                    x - 4.0,
                    y - 5.0,
                    y,
                    x + 4.0,
                    y - 5.0,
                    r.as_str(),
                    k.as_str(),
                    c = color(k)
                );
            }
        }
    }

    for k in Kappa::ALL {
        let x = LEFT + 20.0 + k.index() as f64 * 90.0;
        let y = HEIGHT - 14.0;
        let _ = writeln!(svg, "{}", marker(k, x, y - 4.0, ""));
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{y:.2}">κ = {}</text>"#, x + 12.0, k.as_str());
    }
    svg.push_str("</svg>\n");
    svg
}
