//! Report emission: fc matrix CSV and table, per-combination match and PR
//! CSVs, and raster charts. CSVs are the contract; PNGs are convenience.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::artifact::write_atomic;
use crate::error::{Error, Result};
use crate::retrieval::{Combination, EvalReport, MatchResult, PrPoint};

pub const FC_MATRIX: &str = "fc_matrix.csv";
pub const FC_TABLE: &str = "fc_table.txt";
pub const PR_PLOT: &str = "pr_curves.png";

pub fn matches_file(input: &str, reference: &str) -> String {
    format!("matches_{input}_{reference}.csv")
}

pub fn pr_file(input: &str, reference: &str) -> String {
    format!("pr_{input}_{reference}.csv")
}

pub fn bars_file(reference: &str) -> String {
    format!("fc_bars_{reference}.png")
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    w.into_inner().map_err(|e| Error::data(format!("csv buffer: {e}")))
}

pub fn fc_matrix_csv(report: &EvalReport) -> Result<Vec<u8>> {
    csv_bytes(&["input", "reference", "fc"], |w| {
        for c in &report.combinations {
            w.write_record([c.input.as_str(), c.reference.as_str(), &c.fc.to_string()])?;
        }
        Ok(())
    })
}

pub fn matches_csv(matches: &[MatchResult]) -> Result<Vec<u8>> {
    csv_bytes(&["query", "retrieved", "distance", "correct"], |w| {
        for m in matches {
            w.write_record([
                m.query_index.to_string(),
                m.retrieved_index.to_string(),
                m.distance.to_string(),
                u8::from(m.correct).to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn pr_csv(curve: &[PrPoint]) -> Result<Vec<u8>> {
    csv_bytes(&["threshold", "precision", "recall"], |w| {
        for p in curve {
            w.write_record([p.threshold.to_string(), p.precision.to_string(), p.recall.to_string()])?;
        }
        Ok(())
    })
}

/// Rows are input seasons, columns reference seasons; the diagonal is `-`.
pub fn fc_table(report: &EvalReport) -> String {
    let width = report.seasons.iter().map(|s| s.len()).max().unwrap_or(0).max(8) + 2;
    let mut out = format!("{:<width$}", "in \\ ref");
    for s in &report.seasons {
        out.push_str(&format!("{s:>width$}"));
    }
    out.push('\n');
    for q in &report.seasons {
        out.push_str(&format!("{q:<width$}"));
        for r in &report.seasons {
            let cell = match report.fc(q, r) {
                Some(fc) => format!("{fc:.4}"),
                None => "-".to_string(),
            };
            out.push_str(&format!("{cell:>width$}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("\nmean cross-season fc: {:.4}\n", report.mean_fc()));
    out
}

const PALETTE: [[u8; 3]; 8] = [
    [46, 139, 87],
    [210, 105, 30],
    [70, 130, 180],
    [218, 165, 32],
    [148, 0, 211],
    [178, 34, 34],
    [0, 139, 139],
    [105, 105, 105],
];

// 3x5 glyphs, one row per nibble (bit 2 = left column).
fn glyph(c: char) -> Option<[u8; 5]> {
    Some(match c {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 1, 1],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        '.' => [0, 0, 0, 0, 2],
        _ => return None,
    })
}

struct Canvas {
    img: RgbImage,
}

impl Canvas {
    fn new(w: u32, h: u32) -> Self {
        Canvas {
            img: RgbImage::from_pixel(w, h, Rgb([255, 255, 255])),
        }
    }

    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, Rgb(c));
        }
    }

    fn rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: [u8; 3]) {
        for y in y0.min(y1)..=y0.max(y1) {
            for x in x0.min(x1)..=x0.max(x1) {
                self.put(x, y, c);
            }
        }
    }

    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
        for s in 0..=steps {
            let x = x0 + (x1 - x0) * s / steps;
            let y = y0 + (y1 - y0) * s / steps;
            self.put(x, y, c);
        }
    }

    fn text(&mut self, x: i64, y: i64, s: &str, scale: i64, c: [u8; 3]) {
        for (k, ch) in s.chars().enumerate() {
            let Some(g) = glyph(ch) else { continue };
            let gx = x + k as i64 * 4 * scale;
            for (row, bits) in g.iter().enumerate() {
                for col in 0..3 {
                    if bits & (4 >> col) != 0 {
                        let px = gx + col * scale;
                        let py = y + row as i64 * scale;
                        self.rect(px, py, px + scale - 1, py + scale - 1, c);
                    }
                }
            }
        }
    }

    fn png(self) -> Result<Vec<u8>> {
        let mut buf = std::io::Cursor::new(Vec::new());
        self.img.write_to(&mut buf, image::ImageFormat::Png)?;
        Ok(buf.into_inner())
    }
}

const W: i64 = 480;
const H: i64 = 320;
const MARGIN: i64 = 40;

fn axes(cv: &mut Canvas) {
    let black = [0, 0, 0];
    cv.line((MARGIN, MARGIN), (MARGIN, H - MARGIN), black);
    cv.line((MARGIN, H - MARGIN), (W - MARGIN, H - MARGIN), black);
    for k in 0..=4 {
        let y = H - MARGIN - (H - 2 * MARGIN) * k / 4;
        cv.line((MARGIN - 4, y), (MARGIN, y), black);
        cv.text(4, y - 4, &format!("{:.2}", k as f64 / 4.0), 2, black);
    }
}

/// fc per input season for one reference season; bar colors follow season order.
pub fn bar_chart(report: &EvalReport, reference: &str) -> Result<Vec<u8>> {
    let bars: Vec<(usize, f64)> = report
        .seasons
        .iter()
        .enumerate()
        .filter_map(|(k, s)| report.fc(s, reference).map(|fc| (k, fc)))
        .collect();
    if bars.is_empty() {
        return Err(Error::data(format!("no combinations with reference `{reference}`")));
    }
    let mut cv = Canvas::new(W as u32, H as u32);
    axes(&mut cv);
    let slot = (W - 2 * MARGIN) / bars.len() as i64;
    let plot_h = (H - 2 * MARGIN) as f64;
    for (j, &(k, fc)) in bars.iter().enumerate() {
        let x0 = MARGIN + j as i64 * slot + slot / 5;
        let x1 = MARGIN + (j as i64 + 1) * slot - slot / 5;
        let top = H - MARGIN - (fc.clamp(0.0, 1.0) * plot_h).round() as i64;
        cv.rect(x0, top, x1, H - MARGIN - 1, PALETTE[k % PALETTE.len()]);
        cv.text(x0, top - 14, &format!("{fc:.3}"), 2, [0, 0, 0]);
    }
    cv.png()
}

/// All PR curves on one plot: recall on x, precision on y, colored by input season.
pub fn pr_plot(report: &EvalReport) -> Result<Vec<u8>> {
    let mut cv = Canvas::new(W as u32, H as u32);
    axes(&mut cv);
    let span = (W - 2 * MARGIN) as f64;
    let plot_h = (H - 2 * MARGIN) as f64;
    let to_px = |p: &PrPoint| {
        (
            MARGIN + (p.recall.clamp(0.0, 1.0) * span).round() as i64,
            H - MARGIN - (p.precision.clamp(0.0, 1.0) * plot_h).round() as i64,
        )
    };
    for c in &report.combinations {
        let k = report.seasons.iter().position(|s| *s == c.input).unwrap_or(0);
        let color = PALETTE[k % PALETTE.len()];
        for w in c.pr_curve.windows(2) {
            cv.line(to_px(&w[0]), to_px(&w[1]), color);
        }
    }
    cv.png()
}

fn check(report: &EvalReport) -> Result<()> {
    if report.combinations.is_empty() {
        return Err(Error::data("report has no combinations"));
    }
    for c in &report.combinations {
        if c.matches.is_empty() || c.pr_curve.is_empty() {
            return Err(Error::data(format!(
                "combination {} -> {} has no matches or an empty PR curve",
                c.input, c.reference
            )));
        }
    }
    Ok(())
}

fn render(report: &EvalReport, charts: bool) -> Result<Vec<(String, Vec<u8>)>> {
    check(report)?;
    let mut files: Vec<(String, Vec<u8>)> = vec![(FC_MATRIX.into(), fc_matrix_csv(report)?)];
    for c in &report.combinations {
        files.push((matches_file(&c.input, &c.reference), matches_csv(&c.matches)?));
        files.push((pr_file(&c.input, &c.reference), pr_csv(&c.pr_curve)?));
    }
    if charts {
        files.push((FC_TABLE.into(), fc_table(report).into_bytes()));
        for r in &report.seasons {
            if report.combinations.iter().any(|c| c.reference == *r) {
                files.push((bars_file(r), bar_chart(report, r)?));
            }
        }
        files.push((PR_PLOT.into(), pr_plot(report)?));
    }
    Ok(files)
}

fn write_all(files: Vec<(String, Vec<u8>)>, outdir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = outdir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Render every output in memory, then write them atomically. Returns the
/// written paths in a fixed order. Nothing is written if the report is empty.
pub fn emit_report(report: &EvalReport, outdir: &Path) -> Result<Vec<PathBuf>> {
    write_all(render(report, true)?, outdir)
}

/// The CSV subset of [`emit_report`]: fc matrix, match and PR files.
pub fn emit_csvs(report: &EvalReport, outdir: &Path) -> Result<Vec<PathBuf>> {
    write_all(render(report, false)?, outdir)
}

fn read_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(f))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::data(format!("{}: bad field {i} in {:?}", path.display(), rec)))
}

/// Rebuild a report from the CSVs written by [`emit_report`].
pub fn load_report(dir: &Path) -> Result<EvalReport> {
    let path = dir.join(FC_MATRIX);
    let mut seasons: Vec<String> = Vec::new();
    let mut combinations = Vec::new();
    for rec in read_csv(&path)?.records() {
        let rec = rec?;
        let input: String = field(&rec, 0, &path)?;
        let reference: String = field(&rec, 1, &path)?;
        let fc: f64 = field(&rec, 2, &path)?;
        for s in [&input, &reference] {
            if !seasons.contains(s) {
                seasons.push(s.clone());
            }
        }

        let mpath = dir.join(matches_file(&input, &reference));
        let mut matches = Vec::new();
        for r in read_csv(&mpath)?.records() {
            let r = r?;
            matches.push(MatchResult {
                query_index: field(&r, 0, &mpath)?,
                retrieved_index: field(&r, 1, &mpath)?,
                distance: field(&r, 2, &mpath)?,
                correct: field::<u8>(&r, 3, &mpath)? != 0,
            });
        }
        let ppath = dir.join(pr_file(&input, &reference));
        let mut pr_curve = Vec::new();
        for r in read_csv(&ppath)?.records() {
            let r = r?;
            pr_curve.push(PrPoint {
                threshold: field(&r, 0, &ppath)?,
                precision: field(&r, 1, &ppath)?,
                recall: field(&r, 2, &ppath)?,
            });
        }
        combinations.push(Combination {
            input,
            reference,
            fc,
            matches,
            pr_curve,
        });
    }
    Ok(EvalReport { seasons, combinations })
}

/// `(input, reference) -> fc` from an fc matrix CSV.
pub fn load_fc_matrix(path: &Path) -> Result<BTreeMap<(String, String), f64>> {
    let mut out = BTreeMap::new();
    for rec in read_csv(path)?.records() {
        let rec = rec?;
        out.insert((field(&rec, 0, path)?, field(&rec, 1, path)?), field(&rec, 2, path)?);
    }
    Ok(out)
}
