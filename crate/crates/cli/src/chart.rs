//! Deterministic SVG line charts for training-curve CSVs.

use std::fmt::Write as _;

#[derive(Debug)]
pub enum ChartError {
    SchemaMismatch(String),
}

impl std::fmt::Display for ChartError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChartError::SchemaMismatch(msg) => write!(f, "curve CSV schema mismatch: {msg}"),
        }
    }
}

impl std::error::Error for ChartError {}

const HEADER: &str = "checkpoint,collision_rate,shield_failure_rate,reached_rate";

pub struct Curves {
    pub checkpoints: Vec<f64>,
    pub collision: Vec<f64>,
    pub shield_failure: Vec<f64>,
    pub reached: Vec<f64>,
}

pub fn parse_curves(csv: &str) -> Result<Curves, ChartError> {
    let mut lines = csv.lines();
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        other => {
            return Err(ChartError::SchemaMismatch(format!(
                "expected header `{HEADER}`, found {other:?}"
            )))
        }
    }
    let mut c = Curves {
        checkpoints: Vec::new(),
        collision: Vec::new(),
        shield_failure: Vec::new(),
        reached: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(ChartError::SchemaMismatch(format!(
                "row {} has {} fields",
                i + 2,
                cells.len()
            )));
        }
        let mut vals = [0.0f64; 4];
        for (k, cell) in cells.iter().enumerate() {
            vals[k] = cell.trim().parse().map_err(|_| {
                ChartError::SchemaMismatch(format!("row {}: bad number `{cell}`", i + 2))
            })?;
        }
        c.checkpoints.push(vals[0]);
        c.collision.push(vals[1]);
        c.shield_failure.push(vals[2]);
        c.reached.push(vals[3]);
    }
    if c.checkpoints.is_empty() {
        return Err(ChartError::SchemaMismatch("no data rows".to_string()));
    }
    Ok(c)
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MX: f64 = 60.0; // margins
const MY: f64 = 40.0;

fn polyline(out: &mut String, xs: &[f64], ys: &[f64], xmax: f64, color: &str) {
    let mut pts = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let px = MX + (W - 2.0 * MX) * (x / xmax.max(1.0));
        let py = H - MY - (H - 2.0 * MY) * y.clamp(0.0, 1.0);
        let _ = write!(pts, "{px:.2},{py:.2} ");
    }
    let _ = writeln!(
        out,
        "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
        pts.trim_end()
    );
}

/// Render the curves as an SVG document. The shield-failure polyline is
/// omitted when identically zero.
pub fn render_chart(c: &Curves) -> String {
    let xmax = c.checkpoints.iter().cloned().fold(0.0, f64::max);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(
        out,
        "  <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>"
    );
    // axes
    let _ = writeln!(
        out,
        "  <line x1=\"{MX}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - MY,
        W - MX,
        H - MY
    );
    let _ = writeln!(
        out,
        "  <line x1=\"{MX}\" y1=\"{MY}\" x2=\"{MX}\" y2=\"{}\" stroke=\"black\"/>",
        H - MY
    );
    let _ = writeln!(
        out,
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">episodes</text>",
        W / 2.0,
        H - 8.0
    );
    let _ = writeln!(
        out,
        "  <text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">rate</text>",
        H / 2.0,
        H / 2.0
    );
    polyline(&mut out, &c.checkpoints, &c.collision, xmax, "#d62728");
    let sf_nonzero = c.shield_failure.iter().any(|&v| v != 0.0);
    if sf_nonzero {
        polyline(&mut out, &c.checkpoints, &c.shield_failure, xmax, "#ff7f0e");
    }
    polyline(&mut out, &c.checkpoints, &c.reached, xmax, "#2ca02c");
    // legend
    let mut ly = MY;
    for (name, color, show) in [
        ("collision", "#d62728", true),
        ("shield_failure", "#ff7f0e", sf_nonzero),
        ("reached", "#2ca02c", true),
    ] {
        if !show {
            continue;
        }
        let _ = writeln!(
            out,
            "  <line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            W - MX - 150.0,
            W - MX - 120.0
        );
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" font-size=\"12\">{name}</text>",
            W - MX - 112.0,
            ly + 4.0
        );
        ly += 18.0;
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_chart() {
        let csv = "checkpoint,collision_rate,shield_failure_rate,reached_rate\n100,0.5,0,0.25\n";
        let c = parse_curves(csv).unwrap();
        let svg = render_chart(&c);
        assert!(svg.starts_with("<svg"));
        assert!(!svg.contains("#ff7f0e"), "all-zero shield_failure omitted");
        assert_eq!(render_chart(&c), svg, "deterministic output");
    }

    #[test]
    fn empty_body_rejected() {
        let csv = "checkpoint,collision_rate,shield_failure_rate,reached_rate\n";
        assert!(matches!(
            parse_curves(csv),
            Err(ChartError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn bad_header_rejected() {
        assert!(parse_curves("a,b,c,d\n1,2,3,4\n").is_err());
    }
}
