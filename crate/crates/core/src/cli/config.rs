//! Run configuration: flat `section.key = value` text, overridable per key.
//!
//! Relative paths are resolved against the working directory.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::backbone::BackboneSpec;
use crate::dataset::partition::parse_segments;
#[cfg(test)]
use crate::dataset::partition::DEFAULT_BUFFER;
use crate::dataset::{FilterThresholds, ImageShape, PlaceLabeling, SynthConfig};
use crate::error::{Error, Result};
use crate::metric::{LossKind, TrainConfig};
use crate::retrieval::Representation;

/// Every recognised key with its default (empty means "no default").
pub const KEYS: &[(&str, &str)] = &[
    ("run.out_dir", "run"),
    ("seed", "0"),
    ("corpus.source", "synth"),
    ("corpus.manifests", ""),
    ("corpus.image", "32x48x3"),
    ("synth.n_places", "500"),
    ("synth.n_conditions", "4"),
    ("synth.place_step", "4"),
    ("filter.speed_min", "15"),
    ("filter.darkness_min", "0.2"),
    ("align.tol_m", "25"),
    ("partition.test_segments", ""),
    ("partition.buffer", "141"),
    ("labeling.same_place_sep", "3"),
    ("labeling.window", "5"),
    ("mine.n_pairs", "20000"),
    ("mine.n_triplets", "20000"),
    ("mine.negative_exclusion", "3"),
    ("train.loss", "triplet"),
    ("train.epochs", "5"),
    ("train.batch_size", "32"),
    ("train.lr", ""),
    ("train.margin", "1"),
    ("train.fine_tune", "false"),
    ("backbone.kind", "desk"),
    ("backbone.widths", "8,16,32,32"),
    ("backbone.tap", "pool4"),
    ("eval.tolerance", "2"),
    ("eval.representation", "embedding"),
];

#[derive(Clone, Debug, PartialEq)]
pub enum CorpusSource {
    Synth(SynthConfig),
    /// `(season, manifest path)` in traverse order.
    Manifests(Vec<(String, PathBuf)>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BackboneKind {
    Desk([usize; 4]),
    Vgg16,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub corpus: CorpusSource,
    pub image: ImageShape,
    pub filter: FilterThresholds,
    pub align_tol_m: f64,
    pub test_segments: Vec<Range<usize>>,
    pub buffer: usize,
    pub labeling: PlaceLabeling,
    pub loss: LossKind,
    pub n_pairs: usize,
    pub n_triplets: usize,
    pub train: TrainConfig,
    pub backbone: BackboneKind,
    pub tap: String,
    pub tolerance: usize,
    pub representation: Representation,
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, found `{line}`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Raw key-value store with defaults, file values, then overrides.
#[derive(Clone, Debug)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl Default for ConfigMap {
    fn default() -> Self {
        ConfigMap {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl ConfigMap {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.to_string();
                Ok(())
            }
            None => Err(Error::config(format!("unknown config key `{key}`"))),
        }
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override `{kv}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| Error::config(format!("`{key}` has invalid value `{v}`")))
    }

    /// Canonical text form; parsing it back gives the same map.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let seed: u64 = self.parse("seed")?;
        let image = parse_shape(self.get("corpus.image"))?;
        let corpus = match self.get("corpus.source") {
            "synth" => {
                let mut s = SynthConfig::new(self.parse("synth.n_places")?, self.parse("synth.n_conditions")?, seed);
                s.image = image;
                s.place_step = self.parse("synth.place_step")?;
                CorpusSource::Synth(s)
            }
            "manifests" => CorpusSource::Manifests(parse_manifests(self.get("corpus.manifests"))?),
            other => return Err(Error::config(format!("corpus.source `{other}` is not synth|manifests"))),
        };
        let test_segments = match self.get("partition.test_segments") {
            "" => Vec::new(),
            s => parse_segments(s).map_err(|e| Error::config(e.to_string()))?,
        };
        let fine_tune: bool = self.parse("train.fine_tune")?;
        let learning_rate = match self.get("train.lr") {
            "" => TrainConfig::default_learning_rate(fine_tune),
            _ => self.parse("train.lr")?,
        };
        let train = TrainConfig {
            epochs: self.parse("train.epochs")?,
            batch_size: self.parse("train.batch_size")?,
            learning_rate,
            margin: self.parse("train.margin")?,
            fine_tune,
            seed,
            negative_exclusion: self.parse("mine.negative_exclusion")?,
        };
        train.validate()?;
        let backbone = match self.get("backbone.kind") {
            "desk" => {
                let w: Vec<usize> = parse_list(self.get("backbone.widths"), "backbone.widths")?;
                let w: [usize; 4] = w
                    .try_into()
                    .map_err(|_| Error::config("backbone.widths needs four values"))?;
                BackboneKind::Desk(w)
            }
            "vgg16" => BackboneKind::Vgg16,
            other => return Err(Error::config(format!("backbone.kind `{other}` is not desk|vgg16"))),
        };
        let representation = match self.get("eval.representation") {
            "embedding" => Representation::Embedding,
            "tap" => Representation::Tap(self.get("backbone.tap").to_string()),
            other => return Err(Error::config(format!("eval.representation `{other}` is not embedding|tap"))),
        };
        let cfg = RunConfig {
            out_dir: PathBuf::from(self.get("run.out_dir")),
            seed,
            corpus,
            image,
            filter: FilterThresholds {
                speed_min: self.parse("filter.speed_min")?,
                darkness_min: self.parse("filter.darkness_min")?,
            },
            align_tol_m: self.parse("align.tol_m")?,
            test_segments,
            buffer: self.parse("partition.buffer")?,
            labeling: PlaceLabeling::new(self.parse("labeling.same_place_sep")?, self.parse("labeling.window")?)
                .map_err(|e| Error::config(e.to_string()))?,
            loss: self.parse("train.loss")?,
            n_pairs: self.parse("mine.n_pairs")?,
            n_triplets: self.parse("mine.n_triplets")?,
            train,
            backbone,
            tap: self.get("backbone.tap").to_string(),
            tolerance: self.parse("eval.tolerance")?,
            representation,
        };
        if cfg.out_dir.as_os_str().is_empty() {
            return Err(Error::config("run.out_dir is empty"));
        }
        if !(cfg.align_tol_m > 0.0) {
            return Err(Error::config("align.tol_m must be positive"));
        }
        cfg.backbone_spec()?.tap_position(&cfg.tap)?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn backbone_spec(&self) -> Result<BackboneSpec> {
        let input = [self.image.channels, self.image.height, self.image.width];
        match self.backbone {
            BackboneKind::Desk(w) => BackboneSpec::desk(input, w),
            BackboneKind::Vgg16 => BackboneSpec::vgg16(input),
        }
    }

    /// Paths named in the config that must exist before any stage runs.
    pub fn check_paths(&self) -> Result<()> {
        if let CorpusSource::Manifests(m) = &self.corpus {
            for (_, p) in m {
                if !p.is_file() {
                    return Err(Error::config(format!("manifest {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

fn parse_list<T: FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::config(format!("`{key}` has invalid entry `{x}`")))
        })
        .collect()
}

/// `HxWxC`.
fn parse_shape(s: &str) -> Result<ImageShape> {
    let v: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse().ok().filter(|&n| n > 0))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::config(format!("corpus.image `{s}` is not HxWxC")))?;
    match v[..] {
        [height, width, channels] if channels == 1 || channels == 3 => Ok(ImageShape {
            height,
            width,
            channels,
        }),
        _ => Err(Error::config(format!("corpus.image `{s}` is not HxWxC with C in {{1, 3}}"))),
    }
}

/// `season=path,season=path`.
fn parse_manifests(s: &str) -> Result<Vec<(String, PathBuf)>> {
    let out: Vec<(String, PathBuf)> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), PathBuf::from(v.trim())))
                .ok_or_else(|| Error::config(format!("corpus.manifests entry `{p}` is not season=path")))
        })
        .collect::<Result<_>>()?;
    if out.len() < 2 {
        return Err(Error::config("corpus.manifests needs at least two traverses"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = ConfigMap::default().resolve().unwrap();
        assert_eq!(cfg.buffer, DEFAULT_BUFFER);
        assert_eq!(cfg.tolerance, 2);
        assert_eq!(cfg.train.learning_rate, 1e-3);
        assert_eq!(cfg.backbone_spec().unwrap().tap_dim("pool4").unwrap(), 192);
    }

    #[test]
    fn file_then_override() {
        let mut m = ConfigMap::default();
        m.apply_text("# comment\ntrain.lr = 0.01\ntrain.fine_tune = true  # trailing\n").unwrap();
        assert_eq!(m.resolve().unwrap().train.learning_rate, 0.01);
        m.apply_override("train.lr=0.5").unwrap();
        let cfg = m.resolve().unwrap();
        assert_eq!(cfg.train.learning_rate, 0.5);
        assert!(cfg.train.fine_tune);
    }

    #[test]
    fn fine_tune_changes_default_lr() {
        let mut m = ConfigMap::default();
        m.set("train.fine_tune", "true").unwrap();
        assert_eq!(m.resolve().unwrap().train.learning_rate, 1e-4);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut m = ConfigMap::default();
        assert!(m.apply_text("nope = 1").is_err());
        assert!(m.apply_text("train.epochs").is_err());
        m.set("train.epochs", "x").unwrap();
        assert!(matches!(m.resolve(), Err(Error::Config(_))));
        let mut m = ConfigMap::default();
        m.set("backbone.tap", "conv9").unwrap();
        assert!(m.resolve().is_err());
        let mut m = ConfigMap::default();
        m.set("corpus.image", "32x48x2").unwrap();
        assert!(m.resolve().is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut m = ConfigMap::default();
        m.set("partition.test_segments", "10:20,40:50").unwrap();
        let mut back = ConfigMap::default();
        back.apply_text(&m.to_text()).unwrap();
        assert_eq!(back.resolve().unwrap(), m.resolve().unwrap());
        assert_eq!(back.resolve().unwrap().test_segments, vec![10..20, 40..50]);
    }
}
