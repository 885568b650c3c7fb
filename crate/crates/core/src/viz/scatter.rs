use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Projection, VizError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotFormat {
    Csv,
    Svg,
}

impl PlotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            PlotFormat::Csv => "csv",
            PlotFormat::Svg => "svg",
        }
    }
}

impl FromStr for PlotFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(PlotFormat::Csv),
            "svg" => Ok(PlotFormat::Svg),
            other => Err(format!("unknown plot format {other:?} (expected csv or svg)")),
        }
    }
}

// matplotlib's default cycle
const COLORS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Clone, Copy)]
enum Marker {
    Circle,
    Cross,
    Square,
    Plus,
    Triangle,
    Diamond,
    TriangleDown,
}

const MARKERS: [Marker; 7] = [
    Marker::Circle,
    Marker::Cross,
    Marker::Square,
    Marker::Plus,
    Marker::Triangle,
    Marker::Diamond,
    Marker::TriangleDown,
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;
const LEGEND_WIDTH: f64 = 160.0;
const R: f64 = 4.0;

fn check_lengths(
    projection: &Projection,
    gold: &[String],
    clusters: Option<&[usize]>,
) -> Result<(), VizError> {
    let n = projection.coords.nrows();
    if gold.len() != n {
        return Err(VizError::LengthMismatch {
            what: "frame labels",
            expected: n,
            found: gold.len(),
        });
    }
    if let Some(c) = clusters {
        if c.len() != n {
            return Err(VizError::LengthMismatch {
                what: "cluster labels",
                expected: n,
                found: c.len(),
            });
        }
    }
    Ok(())
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn marker_svg(out: &mut String, marker: Marker, color: &str, x: f64, y: f64) {
    let _ = match marker {
        Marker::Circle => writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{R}" fill="{color}"/>"#),
        Marker::Square => writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{}" height="{}" fill="{color}"/>"#,
            x - R,
            y - R,
            2.0 * R,
            2.0 * R
        ),
        Marker::Cross => writeln!(
            out,
            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            x - R, y - R, x + R, y + R, x - R, y + R, x + R, y - R
        ),
        Marker::Plus => writeln!(
            out,
            r#"<path d="M{:.2},{y:.2}L{:.2},{y:.2}M{x:.2},{:.2}L{x:.2},{:.2}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            x - R, x + R, y - R, y + R
        ),
        Marker::Triangle => writeln!(
            out,
            r#"<polygon points="{x:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
            y - R, x - R, y + R, x + R, y + R
        ),
        Marker::TriangleDown => writeln!(
            out,
            r#"<polygon points="{x:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
            y + R, x - R, y - R, x + R, y - R
        ),
        Marker::Diamond => writeln!(
            out,
            r#"<polygon points="{x:.2},{:.2} {:.2},{y:.2} {x:.2},{:.2} {:.2},{y:.2}" fill="{color}"/>"#,
            y - R, x + R, y + R, x - R
        ),
    };
}

/// Self-contained SVG scatter plot: one marker style per frame, the cluster
/// number written next to each point, and a legend.
pub fn render_svg(
    projection: &Projection,
    gold: &[String],
    clusters: Option<&[usize]>,
    title: &str,
) -> Result<String, VizError> {
    check_lengths(projection, gold, clusters)?;
    let frames: BTreeMap<&str, usize> = {
        let mut labels: Vec<&str> = gold.iter().map(String::as_str).collect();
        labels.sort_unstable();
        labels.dedup();
        labels.into_iter().enumerate().map(|(i, f)| (f, i)).collect()
    };
    let coords = &projection.coords;
    let (mut min_x, mut max_x, mut min_y, mut max_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for row in coords.rows() {
        min_x = min_x.min(row[0]);
        max_x = max_x.max(row[0]);
        min_y = min_y.min(row[1]);
        max_y = max_y.max(row[1]);
    }
    let plot_w = WIDTH - LEGEND_WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let span_x = (max_x - min_x).max(1e-12);
    let span_y = (max_y - min_y).max(1e-12);
    let to_px = |x: f64, y: f64| {
        (
            MARGIN + (x - min_x) / span_x * plot_w,
            HEIGHT - MARGIN - (y - min_y) / span_y * plot_h,
        )
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="24" font-size="14">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#cccccc"/>"##
    );
    out.push_str("<g>\n");
    for (i, row) in coords.rows().into_iter().enumerate() {
        let (px, py) = to_px(row[0], row[1]);
        let f = frames[gold[i].as_str()];
        marker_svg(&mut out, MARKERS[f % MARKERS.len()], COLORS[f % COLORS.len()], px, py);
        if let Some(c) = clusters {
            let _ = writeln!(
                out,
                r##"<text x="{:.2}" y="{:.2}" font-size="9" fill="#333333">{}</text>"##,
                px + R + 1.0,
                py - R,
                c[i]
            );
        }
    }
    out.push_str("</g>\n<g>\n");
    let legend_x = WIDTH - LEGEND_WIDTH - MARGIN / 2.0 + 10.0;
    for (k, (frame, &f)) in frames.iter().enumerate() {
        let y = MARGIN + 10.0 + 18.0 * k as f64;
        marker_svg(&mut out, MARKERS[f % MARKERS.len()], COLORS[f % COLORS.len()], legend_x, y);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            legend_x + 10.0,
            y + 4.0,
            escape(frame)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// CSV with header `x,y,frame,cluster`; the cluster column is empty when
/// no clustering is given.
pub fn write_csv(
    projection: &Projection,
    gold: &[String],
    clusters: Option<&[usize]>,
    path: &Path,
) -> Result<(), VizError> {
    check_lengths(projection, gold, clusters)?;
    let csv_err = |source| VizError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(["x", "y", "frame", "cluster"]).map_err(csv_err)?;
    for (i, row) in projection.coords.rows().into_iter().enumerate() {
        let cluster = clusters.map(|c| c[i].to_string()).unwrap_or_default();
        writer
            .write_record([row[0].to_string(), row[1].to_string(), gold[i].clone(), cluster])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|source| VizError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_scatter(
    projection: &Projection,
    gold: &[String],
    clusters: Option<&[usize]>,
    path: &Path,
    format: PlotFormat,
) -> Result<(), VizError> {
    match format {
        PlotFormat::Csv => write_csv(projection, gold, clusters, path),
        PlotFormat::Svg => {
            let title = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let svg = render_svg(projection, gold, clusters, &title)?;
            fs::write(path, svg).map_err(|source| VizError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> (Projection, Vec<String>) {
        let projection = Projection {
            coords: array![[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]],
            initial_kl: 1.0,
            final_kl: 0.5,
            perplexity: 1.0,
        };
        let gold = vec!["Supporting".to_string(), "Evidence".into(), "Supporting".into()];
        (projection, gold)
    }

    #[test]
    fn csv_has_header_and_rows() {
        let (p, gold) = tiny();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("support.csv");
        emit_scatter(&p, &gold, Some(&[0, 1, 0]), &path, PlotFormat::Csv).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,frame,cluster");
        assert_eq!(lines.len(), 4);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
        assert_eq!(lines[2], "2,-1,Evidence,1");
    }

    #[test]
    fn csv_without_clusters_leaves_column_empty() {
        let (p, gold) = tiny();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("support.csv");
        emit_scatter(&p, &gold, None, &path, PlotFormat::Csv).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().skip(1).all(|l| l.ends_with(',')));
    }

    #[test]
    fn svg_is_well_formed() {
        let (p, mut gold) = tiny();
        gold[1] = "A&B <\"odd\">".into();
        let svg = render_svg(&p, &gold, Some(&[0, 1, 0]), "fire").unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let texts: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
        assert!(texts.contains(&"A&B <\"odd\">"));
        assert!(texts.contains(&"1"));

        let bare = render_svg(&p, &gold, None, "fire").unwrap();
        roxmltree::Document::parse(&bare).unwrap();
        assert!(!bare.contains("font-size=\"9\""));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let (p, gold) = tiny();
        assert!(matches!(
            render_svg(&p, &gold[..2], None, ""),
            Err(VizError::LengthMismatch { .. })
        ));
        assert!(matches!(
            render_svg(&p, &gold, Some(&[0]), ""),
            Err(VizError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn unwritable_path_fails() {
        let (p, gold) = tiny();
        let path = Path::new("/nonexistent-dir/x.svg");
        assert!(matches!(
            emit_scatter(&p, &gold, None, path, PlotFormat::Svg),
            Err(VizError::Io { .. })
        ));
    }
}
