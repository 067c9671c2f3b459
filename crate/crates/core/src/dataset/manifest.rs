//! CSV traverse manifests: `index,timestamp,lat,lon,speed,image_path`.
//!
//! `image_path` is resolved relative to the manifest's directory. Rows with
//! unparseable or out-of-range GPS fields are dropped and counted.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::traverse::{Frame, Traverse};
use crate::error::{Error, Result};
use crate::image::Image;

pub const MANIFEST_HEADER: [&str; 6] = ["index", "timestamp", "lat", "lon", "speed", "image_path"];

/// Corpus-wide image geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub rows: usize,
    pub dropped_gps: usize,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    #[allow(dead_code)]
    index: String,
    timestamp: String,
    lat: String,
    lon: String,
    speed: String,
    image_path: String,
}

/// Load a traverse from a manifest. Frames come out sorted by timestamp and
/// re-indexed from 0.
pub fn load_traverse(path: &Path, season: &str, shape: ImageShape) -> Result<(Traverse, IngestStats)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != MANIFEST_HEADER {
        return Err(Error::data(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            MANIFEST_HEADER,
            header
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut stats = IngestStats::default();
    let mut rows = Vec::new();
    for (line, rec) in reader.deserialize::<RawRow>().enumerate() {
        let rec = rec?;
        stats.rows += 1;
        let timestamp: i64 = rec.timestamp.parse().map_err(|_| {
            Error::data(format!(
                "{}: row {}: bad timestamp `{}`",
                path.display(),
                line + 1,
                rec.timestamp
            ))
        })?;
        let gps = (rec.lat.parse::<f64>(), rec.lon.parse::<f64>(), rec.speed.parse::<f64>());
        let (Ok(lat), Ok(lon), Ok(speed)) = gps else {
            log::warn!("{}: row {}: unparseable GPS, dropped", path.display(), line + 1);
            stats.dropped_gps += 1;
            continue;
        };
        if !Frame::gps_valid(lat, lon, speed) {
            log::warn!("{}: row {}: GPS out of range, dropped", path.display(), line + 1);
            stats.dropped_gps += 1;
            continue;
        }
        rows.push((timestamp, lat, lon, speed, PathBuf::from(rec.image_path)));
    }
    if rows.is_empty() {
        return Err(Error::data(format!("{}: no valid rows", path.display())));
    }
    let mut seen = HashSet::new();
    for r in &rows {
        if !seen.insert(r.0) {
            return Err(Error::data(format!("{}: duplicate timestamp {}", path.display(), r.0)));
        }
    }
    rows.sort_by_key(|r| r.0);

    let mut frames = Vec::with_capacity(rows.len());
    for (index, (timestamp, lat, lon, speed, image_path)) in rows.into_iter().enumerate() {
        let image = Image::load(&base.join(&image_path), shape.channels, shape.height, shape.width)?;
        frames.push(Frame {
            index,
            timestamp,
            lat,
            lon,
            speed,
            image,
            image_path,
        });
    }
    let source_id = path.display().to_string();
    Ok((Traverse::new(season, source_id, frames)?, stats))
}

/// Write every frame image as PNG under `dir/<season>/` and a manifest at
/// `dir/<season>.csv`. Image paths in the manifest are relative to `dir`.
pub fn save_traverse(t: &Traverse, dir: &Path) -> Result<PathBuf> {
    let img_dir = dir.join(&t.season);
    fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let manifest = dir.join(format!("{}.csv", t.season));
    let mut w = csv::Writer::from_path(&manifest)?;
    w.write_record(MANIFEST_HEADER)?;
    for f in &t.frames {
        let rel = PathBuf::from(&t.season).join(format!("{:06}.png", f.index));
        f.image.save_png(&dir.join(&rel))?;
        w.write_record([
            f.index.to_string(),
            f.timestamp.to_string(),
            f.lat.to_string(),
            f.lon.to_string(),
            f.speed.to_string(),
            rel.to_string_lossy().into_owned(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SHAPE: ImageShape = ImageShape {
        height: 2,
        width: 3,
        channels: 1,
    };

    fn write_fixture(dir: &Path, rows: &[(i64, &str, &str, &str)]) -> PathBuf {
        let img = Image::new(1, 2, 3, vec![0.5; 6]).unwrap();
        img.save_png(&dir.join("f.png")).unwrap();
        let mut text = String::from("index,timestamp,lat,lon,speed,image_path\n");
        for (i, (ts, lat, lon, speed)) in rows.iter().enumerate() {
            text.push_str(&format!("{i},{ts},{lat},{lon},{speed},f.png\n"));
        }
        let path = dir.join("m.csv");
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn loads_valid_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_fixture(
            dir.path(),
            &[(10, "63.4", "10.4", "50"), (11, "63.5", "10.4", "50"), (12, "63.6", "10.4", "50")],
        );
        let (t, stats) = load_traverse(&p, "summer", SHAPE).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(stats.dropped_gps, 0);
        assert_eq!(t.frames.iter().map(|f| f.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn drops_out_of_range_gps() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_fixture(
            dir.path(),
            &[(10, "63.4", "10.4", "50"), (11, "999", "10.4", "50"), (12, "63.6", "10.4", "50")],
        );
        let (t, stats) = load_traverse(&p, "summer", SHAPE).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(stats.dropped_gps, 1);
    }

    #[test]
    fn rejects_duplicates_missing_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_fixture(dir.path(), &[(10, "63.4", "10.4", "50"), (10, "63.5", "10.4", "50")]);
        assert!(matches!(load_traverse(&p, "s", SHAPE), Err(Error::Data(_))));

        let p = write_fixture(dir.path(), &[(10, "x", "10.4", "50")]);
        assert!(matches!(load_traverse(&p, "s", SHAPE), Err(Error::Data(_))));

        let missing = dir.path().join("nope.csv");
        assert!(matches!(load_traverse(&missing, "s", SHAPE), Err(Error::Io { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn shuffled_timestamps_are_sorted(perm in Just((0..12i64).collect::<Vec<_>>()).prop_shuffle()) {
            let dir = tempfile::tempdir().unwrap();
            let rows: Vec<(i64, String)> = perm.iter().map(|&t| (1000 + t, format!("{}", 60.0 + t as f64 * 0.001))).collect();
            let borrowed: Vec<(i64, &str, &str, &str)> = rows.iter().map(|(t, lat)| (*t, lat.as_str(), "10", "40")).collect();
            let p = write_fixture(dir.path(), &borrowed);
            let (t, _) = load_traverse(&p, "s", SHAPE).unwrap();
            // sort oracle
            let mut expected: Vec<i64> = perm.iter().map(|t| 1000 + t).collect();
            expected.sort_unstable();
            let got: Vec<i64> = t.frames.iter().map(|f| f.timestamp).collect();
            prop_assert_eq!(got, expected);
            for f in &t.frames {
                prop_assert!((f.lat - (60.0 + (f.timestamp - 1000) as f64 * 0.001)).abs() < 1e-12);
            }
        }
    }
}
