//! CSV emission (with the resolved-configuration header line) and the
//! hand-rolled SVG line charts. Everything here is pure string building so
//! identical inputs produce byte-identical files.

use std::fmt::Display;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

/// The `# config:` header: resolved key=value pairs in insertion order,
/// prefixed by the build's git-describable version.
pub struct ConfigLine {
    parts: Vec<(String, String)>,
}

impl ConfigLine {
    pub fn new(subcommand: &str, seed: u64) -> ConfigLine {
        let mut line = ConfigLine { parts: Vec::new() };
        line.push("version", format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("SEQLAB_GIT_DESC")));
        line.push("subcommand", subcommand);
        line.push("seed", seed);
        line
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.parts.push((key.to_string(), value.to_string()));
    }

    pub fn push_list<T: Display>(&mut self, key: &str, values: &[T]) {
        let joined =
            values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.parts.push((key.to_string(), joined));
    }

    fn render(&self) -> String {
        let mut out = String::from("# config:");
        for (k, v) in &self.parts {
            let _ = write!(out, " {k}={v}");
        }
        out
    }
}

/// In-memory CSV buffer flushed in one write, so partial files never appear
/// and repeated runs are byte-comparable.
pub struct CsvFile {
    path: PathBuf,
    buf: String,
}

impl CsvFile {
    pub fn create(dir: &Path, name: &str, config: &ConfigLine, header: &str) -> CsvFile {
        let mut buf = config.render();
        buf.push('\n');
        buf.push_str(header);
        buf.push('\n');
        CsvFile { path: dir.join(name), buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.buf, "# {text}");
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        write_file(&self.path, &self.buf)?;
        Ok(self.path)
    }
}

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::Failure(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    std::fs::write(path, content)
        .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}

/// One polyline of an [`svg_line_chart`].
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && (a >= 10000.0 || a < 1e-3) {
        format!("{v:.1e}")
    } else if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Minimal line chart: log-ready x axis, linear y axis, one colored polyline
/// with point markers per series, legend on the right margin.
pub fn svg_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    log_x: bool,
    series: &[Series],
) -> String {
    const W: f64 = 680.0;
    const H: f64 = 440.0;
    const ML: f64 = 78.0;
    const MR: f64 = 170.0;
    const MT: f64 = 46.0;
    const MB: f64 = 56.0;

    let tx = |x: f64| if log_x { x.log10() } else { x };
    let mut xs: Vec<f64> = Vec::new();
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            xs.push(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    if xs.is_empty() || !ymin.is_finite() || !ymax.is_finite() {
        ymin = 0.0;
        ymax = 1.0;
        xs.push(1.0);
    }
    if (ymax - ymin).abs() < 1e-300 {
        ymax = ymin + 1.0;
    }
    let pad = 0.06 * (ymax - ymin);
    let (ylo, yhi) = (ymin - pad, ymax + pad);
    let (xlo, xhi) = (tx(xs[0]), tx(*xs.last().unwrap()));
    let xspan = if (xhi - xlo).abs() < 1e-300 { 1.0 } else { xhi - xlo };

    let px = |x: f64| ML + (tx(x) - xlo) / xspan * (W - ML - MR);
    let py = |y: f64| H - MB - (y - ylo) / (yhi - ylo) * (H - MT - MB);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(svg, "<text x=\"{ML}\" y=\"24\" font-size=\"14\">{title}</text>");

    // Axes.
    let _ = writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        H - MB,
        W - MR
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB
    );

    // X ticks at the data points themselves (grids are small); cap at 10.
    let step = xs.len().div_ceil(10);
    for x in xs.iter().step_by(step.max(1)) {
        let sx = px(*x);
        let _ = writeln!(
            svg,
            "<line x1=\"{sx:.2}\" y1=\"{0}\" x2=\"{sx:.2}\" y2=\"{1}\" stroke=\"black\"/>",
            H - MB,
            H - MB + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{sx:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            H - MB + 20.0,
            fmt_tick(*x)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>",
        (ML + W - MR) / 2.0,
        H - 12.0
    );

    // Five linear y ticks.
    for i in 0..=4 {
        let y = ylo + (yhi - ylo) * f64::from(i) / 4.0;
        let sy = py(y);
        let _ = writeln!(
            svg,
            "<line x1=\"{0}\" y1=\"{sy:.2}\" x2=\"{ML}\" y2=\"{sy:.2}\" stroke=\"black\"/>",
            ML - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            ML - 9.0,
            sy + 4.0,
            fmt_tick(y)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.2}\" transform=\"rotate(-90 16 {0:.2})\" \
         text-anchor=\"middle\">{y_label}</text>",
        (MT + H - MB) / 2.0
    );

    // Series polylines, markers, legend.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for &(x, y) in &s.points {
            let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.trim_end()
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                px(x),
                py(y)
            );
        }
        let ly = MT + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{0}\" y1=\"{ly:.2}\" x2=\"{1}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            W - MR + 10.0,
            W - MR + 30.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.2}\">{}</text>",
            W - MR + 36.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Median of a non-empty slice (averages the middle pair on even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
