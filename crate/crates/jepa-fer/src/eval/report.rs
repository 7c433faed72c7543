//! File emission for evaluation artifacts: metrics.json, confusion CSVs
//! (summed counts and fold-averaged), SVG heatmaps, and pca.csv.
//! All writes go through the write-temp-then-rename pattern.

use super::{ConfusionMatrix, MetricsReport};
use crate::error::{Error, Result};
use std::path::Path;

fn write_atomic(path: &Path, body: &[u8]) -> Result<()> {
    let tmp = path.with_extension("new");
    std::fs::write(&tmp, body).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_metrics_json(report: &MetricsReport, path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(report)
        .map_err(|e| Error::protocol(format!("metrics serialization: {e}")))?;
    write_atomic(path, body.as_bytes())
}

/// K+1 by K+1 CSV: header row/column carry class names, rows are truth.
pub fn write_confusion_csv(cm: &ConfusionMatrix, path: &Path) -> Result<()> {
    let mut body = String::new();
    body.push_str("truth\\pred");
    for name in &cm.classes {
        body.push(',');
        body.push_str(name);
    }
    body.push('\n');
    for (t, name) in cm.classes.iter().enumerate() {
        body.push_str(name);
        for p in 0..cm.k() {
            body.push(',');
            body.push_str(&cm.count(t, p).to_string());
        }
        body.push('\n');
    }
    write_atomic(path, body.as_bytes())
}

/// Fold-averaged variant: mean count per cell over `folds` matrices.
pub fn write_confusion_avg_csv(folds: &[ConfusionMatrix], path: &Path) -> Result<()> {
    let first = folds
        .first()
        .ok_or_else(|| Error::protocol("averaging zero confusion matrices"))?;
    let k = first.k();
    let mut body = String::new();
    body.push_str("truth\\pred");
    for name in &first.classes {
        body.push(',');
        body.push_str(name);
    }
    body.push('\n');
    for (t, name) in first.classes.iter().enumerate() {
        body.push_str(name);
        for p in 0..k {
            let mean: f64 =
                folds.iter().map(|m| m.count(t, p) as f64).sum::<f64>() / folds.len() as f64;
            body.push(',');
            body.push_str(&format!("{mean:.4}"));
        }
        body.push('\n');
    }
    write_atomic(path, body.as_bytes())
}

/// Standalone row-normalized heatmap, one cell per confusion entry.
pub fn write_confusion_svg(cm: &ConfusionMatrix, title: &str, path: &Path) -> Result<()> {
    let k = cm.k();
    let cell = 42usize;
    let margin = 90usize;
    let width = margin + k * cell + 20;
    let height = margin + k * cell + 40;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"monospace\" font-size=\"11\">\n"
    ));
    s.push_str(&format!(
        "<text x=\"{margin}\" y=\"20\" font-size=\"14\">{title}</text>\n"
    ));
    for (t, name) in cm.classes.iter().enumerate() {
        let row_total = cm.support(t).max(1) as f64;
        s.push_str(&format!(
            "<text x=\"4\" y=\"{}\">{}</text>\n",
            margin + t * cell + cell / 2 + 4,
            name
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" transform=\"rotate(-60 {} {})\">{}</text>\n",
            margin + t * cell + cell / 2,
            margin - 8,
            margin + t * cell + cell / 2,
            margin - 8,
            name
        ));
        for p in 0..k {
            let frac = cm.count(t, p) as f64 / row_total;
            let shade = (255.0 - frac * 205.0) as u8;
            let x = margin + p * cell;
            let y = margin + t * cell;
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"rgb({shade},{shade},255)\" stroke=\"#888\"/>\n"
            ));
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                x + cell / 2,
                y + cell / 2 + 4,
                cm.count(t, p)
            ));
        }
    }
    s.push_str("</svg>\n");
    write_atomic(path, s.as_bytes())
}

/// `x,y,label` rows for external plotting.
pub fn write_pca_csv(coords: &[[f64; 2]], labels: &[String], path: &Path) -> Result<()> {
    if coords.len() != labels.len() {
        return Err(Error::Dimension {
            op: "pca csv",
            lhs: vec![coords.len()],
            rhs: vec![labels.len()],
        });
    }
    let mut body = String::from("x,y,label\n");
    for (c, l) in coords.iter().zip(labels) {
        body.push_str(&format!("{},{},{}\n", c[0], c[1], l));
    }
    write_atomic(path, body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_csv_layout() {
        let mut cm = ConfusionMatrix::new(vec!["a".into(), "b".into()]);
        cm.add(0, 0);
        cm.add(0, 1);
        cm.add(1, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("confusion.csv");
        write_confusion_csv(&cm, &path).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = body.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "truth\\pred,a,b");
        assert_eq!(lines[1], "a,1,1");
        assert_eq!(lines[2], "b,0,1");
    }

    #[test]
    fn svg_contains_counts() {
        let mut cm = ConfusionMatrix::new(vec!["x".into(), "y".into()]);
        cm.add(0, 0);
        cm.add(1, 0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("confusion.svg");
        write_confusion_svg(&cm, "demo", &path).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        assert!(body.starts_with("<svg"));
        assert!(body.contains("demo"));
    }
}
