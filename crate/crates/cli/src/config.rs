//! TOML experiment configuration. Every key is optional; missing keys take
//! the library defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bilevel_core::{ExperimentConfig64, GeometrySpec64, InversionConfig64, PrecisionRule, Rect, StepSize};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub geometry: GeometrySection,
    pub inversion: InversionSection,
    pub experiment: ExperimentSection,
}

/// Rectangles are `[x0, x1, y0, y1]`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub room: Option<[f64; 4]>,
    pub source: Option<[f64; 4]>,
    pub buffer: Option<[f64; 4]>,
    pub scatterers: Option<Vec<[f64; 4]>>,
    pub wave_number: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StepValue {
    Keyword(String),
    Value(f64),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSection {
    /// `"auto"` or a positive number.
    pub step: Option<StepValue>,
    pub tau: Option<f64>,
    pub q: Option<f64>,
    /// `"proportional"` (C = factor·δ), `"inverse"` (C = factor/δ) or
    /// `"constant"` (C = factor).
    pub precision_rule: Option<String>,
    pub precision_factor: Option<f64>,
    pub h0: Option<f64>,
    pub h_min: Option<f64>,
    pub noise_level: Option<f64>,
    pub seed: Option<u64>,
    pub j_max: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub data_mesh_h: Option<f64>,
    pub direct_mesh_h: Option<f64>,
    pub output_directory: Option<PathBuf>,
    pub emit_fields: Option<bool>,
    pub parallel: Option<bool>,
}

fn rect(r: [f64; 4]) -> Rect<f64> {
    Rect::new(r[0], r[1], r[2], r[3])
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn geometry(&self) -> GeometrySpec64 {
        let g = &self.geometry;
        let mut out = GeometrySpec64::default();
        if let Some(r) = g.room {
            out.room = rect(r);
        }
        if let Some(r) = g.source {
            out.source = rect(r);
        }
        if let Some(r) = g.buffer {
            out.buffer = rect(r);
        }
        if let Some(s) = &g.scatterers {
            out.scatterers = s.iter().copied().map(rect).collect();
        }
        if let Some(k) = g.wave_number {
            out.wave_number = k;
        }
        out
    }

    pub fn inversion(&self) -> Result<InversionConfig64> {
        let s = &self.inversion;
        let mut out = InversionConfig64::default();
        match &s.step {
            None => {}
            Some(StepValue::Keyword(k)) if k.eq_ignore_ascii_case("auto") => out.step = StepSize::Auto,
            Some(StepValue::Keyword(k)) => bail!("inversion.step must be \"auto\" or a number, got {k:?}"),
            Some(StepValue::Value(mu)) => out.step = StepSize::Fixed(*mu),
        }
        let factor = s.precision_factor.unwrap_or(1.4);
        out.precision = match s.precision_rule.as_deref() {
            None | Some("proportional") => PrecisionRule::Proportional(factor),
            Some("inverse") => PrecisionRule::Inverse(factor),
            Some("constant") => PrecisionRule::Constant(factor),
            Some(other) => bail!("unknown inversion.precision_rule {other:?}"),
        };
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = s.$field { out.$field = v; } )* };
        }
        take!(tau, q, h0, h_min, noise_level, seed, j_max);
        Ok(out)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig64> {
        let e = &self.experiment;
        let mut out = ExperimentConfig64 {
            geometry: self.geometry(),
            inversion: self.inversion()?,
            ..ExperimentConfig64::default()
        };
        if let Some(h) = e.data_mesh_h {
            out.data_mesh_h = h;
        }
        if let Some(h) = e.direct_mesh_h {
            out.direct_mesh_h = h;
        }
        out.out_dir = e.output_directory.clone();
        out.emit_fields = e.emit_fields.unwrap_or(false);
        out.parallel = e.parallel.unwrap_or(false);
        Ok(out)
    }
}
