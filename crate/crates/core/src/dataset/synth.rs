//! Procedural multi-condition corpora.
//!
//! A long horizontal strip of scenery is generated once from the seed; place
//! `i` is the window starting at column `i * place_step`, so neighbouring
//! places overlap and look alike. Each condition then applies its own
//! appearance transform (hue rotation, brightness shift, snow-like whitening
//! patches, per-image noise) to every place.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::manifest::ImageShape;
use super::traverse::{AlignedCorpus, Frame, Traverse};
use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_SEASONS: [&str; 4] = ["summer", "fall", "winter", "spring"];

/// Appearance transform of one condition. All-zero is the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionAppearance {
    /// Additive intensity offset, in `[-0.5, 0.5]`.
    pub brightness: f32,
    /// Rotation about the gray axis in radians, in `[-pi, pi]`.
    pub hue_shift: f32,
    /// Standard deviation of per-pixel Gaussian noise, in `[0, 0.5]`.
    pub noise: f32,
    /// Fraction of the scene covered by white patches, in `[0, 1]`.
    pub whitening: f32,
}

impl ConditionAppearance {
    pub const IDENTITY: ConditionAppearance = ConditionAppearance {
        brightness: 0.0,
        hue_shift: 0.0,
        noise: 0.0,
        whitening: 0.0,
    };

    /// Default look of condition `k`, cycling through four seasons.
    pub fn preset(k: usize) -> Self {
        let base = match k % 4 {
            0 => ConditionAppearance {
                brightness: 0.0,
                hue_shift: 0.0,
                noise: 0.03,
                whitening: 0.0,
            },
            1 => ConditionAppearance {
                brightness: -0.1,
                hue_shift: 0.7,
                noise: 0.05,
                whitening: 0.0,
            },
            2 => ConditionAppearance {
                brightness: 0.12,
                hue_shift: -0.3,
                noise: 0.05,
                whitening: 0.45,
            },
            _ => ConditionAppearance {
                brightness: 0.06,
                hue_shift: 0.3,
                noise: 0.07,
                whitening: 0.1,
            },
        };
        // later cycles drift further
        let cycle = (k / 4) as f32;
        ConditionAppearance {
            brightness: (base.brightness + 0.05 * cycle).clamp(-0.5, 0.5),
            hue_shift: (base.hue_shift + 0.2 * cycle).clamp(-std::f32::consts::PI, std::f32::consts::PI),
            ..base
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = (-0.5..=0.5).contains(&self.brightness)
            && (-std::f32::consts::PI..=std::f32::consts::PI).contains(&self.hue_shift)
            && (0.0..=0.5).contains(&self.noise)
            && (0.0..=1.0).contains(&self.whitening);
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("appearance parameters out of range: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_places: usize,
    pub n_conditions: usize,
    pub image: ImageShape,
    /// One entry per condition.
    pub conditions: Vec<ConditionAppearance>,
    /// Strip columns between consecutive places.
    pub place_step: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_places: usize, n_conditions: usize, seed: u64) -> Self {
        SynthConfig {
            n_places,
            n_conditions,
            image: ImageShape {
                height: 32,
                width: 48,
                channels: 3,
            },
            conditions: (0..n_conditions).map(ConditionAppearance::preset).collect(),
            place_step: 4,
            seed,
        }
    }

    /// Same geometry with every condition set to the identity transform.
    pub fn identity(mut self) -> Self {
        self.conditions = vec![ConditionAppearance::IDENTITY; self.n_conditions];
        self
    }

    pub fn season_name(k: usize) -> String {
        match DEFAULT_SEASONS.get(k) {
            Some(s) => s.to_string(),
            None => format!("cond{k}"),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_places == 0 || self.n_conditions == 0 {
            return Err(Error::config("synthetic corpus needs at least one place and one condition"));
        }
        if self.conditions.len() != self.n_conditions {
            return Err(Error::config(format!(
                "{} appearance entries for {} conditions",
                self.conditions.len(),
                self.n_conditions
            )));
        }
        if self.image.height < 4 || self.image.width < 4 || !matches!(self.image.channels, 1 | 3) {
            return Err(Error::config("synthetic images must be at least 4x4 with 1 or 3 channels"));
        }
        if self.place_step == 0 {
            return Err(Error::config("place_step must be positive"));
        }
        self.conditions.iter().try_for_each(ConditionAppearance::validate)
    }
}

/// Smooth 2-D value noise in `[0, 1]` on a `height x width` grid.
fn value_noise(rng: &mut ChaCha8Rng, height: usize, width: usize, cell: usize) -> Vec<f32> {
    let gh = height / cell + 2;
    let gw = width / cell + 2;
    let lattice: Vec<f32> = (0..gh * gw).map(|_| rng.random::<f32>()).collect();
    let smooth = |t: f32| t * t * (3.0 - 2.0 * t);
    let mut out = vec![0.0; height * width];
    for y in 0..height {
        let gy = y / cell;
        let ty = smooth((y % cell) as f32 / cell as f32);
        for x in 0..width {
            let gx = x / cell;
            let tx = smooth((x % cell) as f32 / cell as f32);
            let v00 = lattice[gy * gw + gx];
            let v01 = lattice[gy * gw + gx + 1];
            let v10 = lattice[(gy + 1) * gw + gx];
            let v11 = lattice[(gy + 1) * gw + gx + 1];
            let top = v00 + (v01 - v00) * tx;
            let bottom = v10 + (v11 - v10) * tx;
            out[y * width + x] = top + (bottom - top) * ty;
        }
    }
    out
}

/// Scenery strip, planar RGB (or luma), `height x length`.
fn scenery_strip(rng: &mut ChaCha8Rng, height: usize, length: usize, channels: usize) -> Image {
    let mut strip = Image::zeros(channels, height, length);
    let horizon_field = value_noise(rng, 1, length, 24);
    let texture = value_noise(rng, height, length, 6);
    let sky = [0.55f32, 0.7, 0.9];
    let ground = [0.35f32, 0.45, 0.2];
    for x in 0..length {
        let horizon = (0.3 + 0.3 * horizon_field[x]) * height as f32;
        for y in 0..height {
            let base = if (y as f32) < horizon { sky } else { ground };
            let t = texture[y * length + x] - 0.5;
            for c in 0..channels {
                let v = if channels == 1 { 0.5 * (base[0] + base[1]) } else { base[c] };
                *strip.at_mut(c, y, x) = v + 0.3 * t;
            }
        }
    }
    // vertical structures: poles, trees, buildings
    let mut x = 0usize;
    while x < length {
        x += rng.random_range(2..9);
        let w = rng.random_range(1..7usize);
        let top = rng.random_range(0..height * 2 / 3);
        let color: [f32; 3] = [rng.random(), rng.random(), rng.random()];
        for xx in x..(x + w).min(length) {
            for y in top..height {
                for c in 0..channels {
                    let v = if channels == 1 { color.iter().sum::<f32>() / 3.0 } else { color[c] };
                    *strip.at_mut(c, y, xx) = v;
                }
            }
        }
        x += w;
    }
    strip
}

fn hue_rotation(theta: f32) -> [[f32; 3]; 3] {
    // Rodrigues rotation about (1,1,1)/sqrt(3)
    let (s, c) = theta.sin_cos();
    let k = (1.0 - c) / 3.0;
    let r = s / 3f32.sqrt();
    [[c + k, k - r, k + r], [k + r, c + k, k - r], [k - r, k + r, c + k]]
}

/// Generate `n_conditions` aligned traverses of `n_places` frames.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<AlignedCorpus> {
    cfg.validate()?;
    let ImageShape {
        height,
        width,
        channels,
    } = cfg.image;
    let length = (cfg.n_places - 1) * cfg.place_step + width;

    let mut scene_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    scene_rng.set_stream(0);
    let strip = scenery_strip(&mut scene_rng, height, length, channels);

    let mut traverses = Vec::with_capacity(cfg.n_conditions);
    for (k, look) in cfg.conditions.iter().enumerate() {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        mask_rng.set_stream(1 + k as u64);
        let snow = value_noise(&mut mask_rng, height, length, 5);
        let rot = hue_rotation(look.hue_shift);
        let noise = Normal::new(0.0f32, look.noise).map_err(|e| Error::config(e.to_string()))?;

        let mut frames = Vec::with_capacity(cfg.n_places);
        for i in 0..cfg.n_places {
            let x0 = i * cfg.place_step;
            let mut img = Image::zeros(channels, height, width);
            for y in 0..height {
                for x in 0..width {
                    let mut px = [0f32; 3];
                    for (c, p) in px.iter_mut().enumerate().take(channels) {
                        *p = strip.at(c, y, x0 + x);
                    }
                    if channels == 3 && look.hue_shift != 0.0 {
                        let src = px;
                        for (r, out) in rot.iter().zip(px.iter_mut()) {
                            *out = r[0] * src[0] + r[1] * src[1] + r[2] * src[2];
                        }
                    }
                    let whiten = snow[y * length + x0 + x] < look.whitening;
                    for (c, p) in px.iter().enumerate().take(channels) {
                        let mut v = p + look.brightness;
                        if whiten {
                            v = 0.25 * v + 0.75;
                        }
                        *img.at_mut(c, y, x) = v;
                    }
                }
            }
            if look.noise > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(((k as u64 + 1) << 32) | i as u64);
                for v in img.data.iter_mut() {
                    *v += noise.sample(&mut rng);
                }
            }
            img.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));

            frames.push(Frame {
                index: i,
                timestamp: 1_330_000_000 + (k as i64) * 10_000_000 + i as i64,
                lat: 65.0 + i as f64 * 2.5e-4,
                lon: 13.0 + 1e-3 * (i as f64 / 50.0).sin(),
                speed: 90.0,
                image: img,
                image_path: format!("{}/{i:06}.png", SynthConfig::season_name(k)).into(),
            });
        }
        let season = SynthConfig::season_name(k);
        traverses.push(Traverse::new(season.clone(), format!("synth:{season}"), frames)?);
    }
    AlignedCorpus::new(traverses)
}
