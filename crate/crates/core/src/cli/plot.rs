use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use plotters::prelude::*;

use super::run::{RunManifest, KRYLOV_B_FILE, MANIFEST_FILE, METRICS_FILE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panel {
    Fidelity,
    Entropy,
    Fisher,
    Rank,
    Krylov,
}

impl Panel {
    pub fn name(self) -> &'static str {
        match self {
            Panel::Fidelity => "fidelity",
            Panel::Entropy => "entropy",
            Panel::Fisher => "fisher",
            Panel::Rank => "rank",
            Panel::Krylov => "krylov",
        }
    }
}

impl FromStr for Panel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fidelity" => Ok(Panel::Fidelity),
            "entropy" => Ok(Panel::Entropy),
            "fisher" => Ok(Panel::Fisher),
            "rank" => Ok(Panel::Rank),
            "krylov" => Ok(Panel::Krylov),
            other => Err(Error::Config(format!("unknown panel '{other}'"))),
        }
    }
}

struct Table {
    columns: BTreeMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
        let columns: BTreeMap<String, usize> =
            reader.headers().map_err(csv_err)?.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
        let missing: Vec<String> = required.iter().filter(|c| !columns.contains_key(**c)).map(|c| c.to_string()).collect();
        if !missing.is_empty() {
            return Err(Error::MissingColumns(missing));
        }
        let rows = reader.records().collect::<std::result::Result<_, _>>().map_err(csv_err)?;
        Ok(Self { columns, rows })
    }

    fn get<'a>(&self, row: &'a csv::StringRecord, col: &str) -> &'a str {
        row.get(self.columns[col]).unwrap_or("")
    }

    fn num(&self, row: &csv::StringRecord, col: &str) -> f64 {
        self.get(row, col).parse().unwrap_or(f64::NAN)
    }

    /// Rows grouped by (model, L, chaos_param), in order of first appearance.
    fn series(&self, x: &str, y: impl Fn(&Self, &csv::StringRecord) -> f64) -> Vec<Series> {
        let mut out: Vec<Series> = Vec::new();
        for row in &self.rows {
            let key = (self.get(row, "model").to_string(), self.get(row, "L").to_string(), self.get(row, "chaos_param").to_string());
            let point = (self.num(row, x), y(self, row));
            match out.iter_mut().find(|s| s.key == key) {
                Some(s) => s.points.push(point),
                None => out.push(Series { key, points: vec![point] }),
            }
        }
        for s in &mut out {
            s.points.retain(|(a, b)| a.is_finite() && b.is_finite());
        }
        out
    }
}

struct Series {
    key: (String, String, String),
    points: Vec<(f64, f64)>,
}

impl Series {
    fn label(&self, sweep: &str) -> String {
        let param: f64 = self.key.2.parse().unwrap_or(f64::NAN);
        format!("{} L={} {sweep}={param}", self.key.0, self.key.1)
    }

    fn sites(&self) -> Option<u32> {
        self.key.1.parse().ok()
    }
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn bounds(series: &[Series], extra_y: &[f64]) -> ((f64, f64), (f64, f64)) {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(extra_y.iter().copied());
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let pad = |lo: f64, hi: f64| {
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let p = 0.05 * (hi - lo);
            (lo - p, hi + p)
        }
    };
    (pad(x0, x1), pad(y0, y1))
}

struct PanelSpec<'a> {
    title: String,
    x_desc: &'a str,
    y_desc: String,
    /// Horizontal reference lines with labels.
    references: Vec<(f64, String)>,
    /// Point markers with labels.
    markers: Vec<((f64, f64), String)>,
}

fn draw(path: &Path, series: &[Series], sweep: &str, spec: &PanelSpec<'_>) -> Result<()> {
    let ref_y: Vec<f64> = spec.references.iter().map(|r| r.0).collect();
    let ((x0, x1), (y0, y1)) = bounds(series, &ref_y);
    let root = SVGBackend::new(path, (900, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&spec.title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(spec.x_desc).y_desc(spec.y_desc.as_str()).draw().map_err(plot_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(s.label(sweep))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    for (y, label) in &spec.references {
        chart
            .draw_series(DashedLineSeries::new(vec![(x0, *y), (x1, *y)], 6, 4, BLACK.stroke_width(1)))
            .map_err(plot_err)?
            .label(label.clone())
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK));
    }
    for ((x, y), label) in &spec.markers {
        chart
            .draw_series(std::iter::once(Circle::new((*x, *y), 5, RED.filled())))
            .map_err(plot_err)?;
        chart
            .draw_series(std::iter::once(Text::new(label.clone(), (*x, *y), ("sans-serif", 14))))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::LowerRight)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Renders one SVG per panel from the CSV files in `dir`. Returns the
/// written paths.
pub fn plot(dir: &Path, panels: &[Panel], out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let out = out.unwrap_or(dir);
    fs::create_dir_all(out)?;
    let manifest = fs::read_to_string(dir.join(MANIFEST_FILE)).ok().and_then(|t| RunManifest::from_json(&t).ok());
    let sweep = manifest.as_ref().map(|m| m.conventions.sweep_param.clone()).unwrap_or_else(|| "param".into());
    let (dt, rank_tol, zero_tol) = manifest
        .as_ref()
        .map(|m| (m.conventions.time_step, m.conventions.rank_threshold, m.conventions.zero_tol))
        .unwrap_or((1.0, crate::evolve::RANK_THRESHOLD, crate::krylov::DEFAULT_ZERO_TOL));
    let x_desc = format!("n (records, step {dt})");

    let mut written = Vec::new();
    for &panel in panels {
        let path = out.join(format!("{}.svg", panel.name()));
        match panel {
            Panel::Krylov => {
                let t = Table::read(&dir.join(KRYLOV_B_FILE), &["model", "L", "chaos_param", "k", "b"])?;
                let series = t.series("k", |t, r| t.num(r, "b"));
                let markers = series
                    .iter()
                    .map(|s| {
                        let k = s.points.iter().map(|p| p.0).fold(0.0, f64::max) + 1.0;
                        ((k, 0.0), format!("K={k}"))
                    })
                    .collect();
                let spec = PanelSpec {
                    title: "Lanczos coefficients".into(),
                    x_desc: "k",
                    y_desc: format!("b_k (stop at b_k <= {zero_tol:e} b_1)"),
                    references: Vec::new(),
                    markers,
                };
                draw(&path, &series, &sweep, &spec)?;
            }
            _ => {
                let (col, title, y_desc) = match panel {
                    Panel::Fidelity => ("mean_fidelity", "Average reconstruction fidelity", "<F>".to_string()),
                    Panel::Entropy => ("S_c", "Covariance-spectrum entropy", "S_c (nats)".to_string()),
                    Panel::Fisher => ("J", "Fisher information", "log10 J".to_string()),
                    Panel::Rank => ("R", "Covariance rank", format!("R (relative threshold {rank_tol:e})")),
                    Panel::Krylov => unreachable!(),
                };
                let t = Table::read(&dir.join(METRICS_FILE), &["n", "model", "L", "chaos_param", col])?;
                let series = if panel == Panel::Fisher {
                    t.series("n", |t, r| t.num(r, "J").log10())
                } else {
                    t.series("n", |t, r| t.num(r, col))
                };
                let mut references = Vec::new();
                if panel == Panel::Rank {
                    let mut sites: Vec<u32> = series.iter().filter_map(Series::sites).collect();
                    sites.sort_unstable();
                    sites.dedup();
                    for l in sites {
                        let d = 2f64.powi(l as i32);
                        references.push((d * d - d + 1.0, format!("d^2-d+1 (L={l})")));
                    }
                }
                let spec = PanelSpec { title: title.into(), x_desc: &x_desc, y_desc, references, markers: Vec::new() };
                draw(&path, &series, &sweep, &spec)?;
            }
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_columns_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(METRICS_FILE), "n,model,L\n1,tki,2\n").unwrap();
        match plot(dir.path(), &[Panel::Entropy], None) {
            Err(Error::MissingColumns(cols)) => assert_eq!(cols, vec!["chaos_param".to_string(), "S_c".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rank_panel_has_ceiling_and_three_curves() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("n,model,L,chaos_param,R\n");
        for p in ["0", "0.4", "1.4"] {
            for n in 1..5 {
                text += &format!("{n},tki,2,{p},{}\n", n * 3);
            }
        }
        fs::write(dir.path().join(METRICS_FILE), text).unwrap();
        let out = plot(dir.path(), &[Panel::Rank], None).unwrap();
        let svg = fs::read_to_string(&out[0]).unwrap();
        assert!(svg.contains("d^2-d+1 (L=2)"));
        assert_eq!(svg.matches("tki L=2").count(), 3);
    }
}
