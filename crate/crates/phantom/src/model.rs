//! Model files: a JSON list of layers, either bare or under a `layers` key.
//!
//! ```json
//! {"name": "tiny", "layers": [
//!   {"name": "conv1", "kind": "regular", "H": 8, "W": 8, "C_in": 3, "C_out": 4, "K": 3,
//!    "stride": 1, "pad": 1, "weight_density": 0.5, "activation_density": 1.0}
//! ]}
//! ```
//!
//! `pad`, `pool`, `stride`, `no_relu` and `name` are optional.

use std::path::Path;

use phantom_core::accelerator::{validate_chain, LayerKind, LayerSpec};
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Regular,
    Depthwise,
    Pointwise,
    Fc,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    #[serde(default)]
    name: Option<String>,
    kind: Kind,
    #[serde(rename = "H", default = "one")]
    h: usize,
    #[serde(rename = "W", default = "one")]
    w: usize,
    #[serde(rename = "C_in")]
    c_in: usize,
    #[serde(rename = "C_out")]
    c_out: usize,
    #[serde(rename = "K", default = "one")]
    k: usize,
    #[serde(default = "one")]
    stride: usize,
    #[serde(default)]
    pad: usize,
    #[serde(default = "one")]
    pool: usize,
    weight_density: f64,
    activation_density: f64,
    #[serde(default)]
    no_relu: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedModel {
    #[serde(default)]
    #[allow(dead_code)]
    name: Option<String>,
    layers: Vec<LayerRecord>,
}

impl LayerRecord {
    fn into_spec(self, index: usize) -> LayerSpec {
        LayerSpec {
            name: self.name.unwrap_or_else(|| format!("layer{index}")),
            kind: match self.kind {
                Kind::Regular => LayerKind::Regular,
                Kind::Depthwise => LayerKind::Depthwise,
                Kind::Pointwise => LayerKind::Pointwise,
                Kind::Fc => LayerKind::Fc,
            },
            h: self.h,
            w: self.w,
            c_in: self.c_in,
            c_out: self.c_out,
            k: self.k,
            stride: self.stride,
            pad: self.pad,
            pool: self.pool,
            no_relu: self.no_relu,
            weight_density: self.weight_density,
            activation_density: self.activation_density,
        }
    }
}

/// Line on which each layer object starts. Layers are the objects directly
/// inside the top-level array or inside the array of a top-level object.
fn layer_lines(text: &str) -> Vec<usize> {
    let mut lines = Vec::new();
    let mut stack: Vec<char> = Vec::new();
    let (mut line, mut in_str, mut escaped) = (1, false, false);
    for ch in text.chars() {
        if ch == '\n' {
            line += 1;
        }
        if in_str {
            match (escaped, ch) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_str = true,
            '{' | '[' => {
                if ch == '{' && matches!(stack.as_slice(), ['['] | ['{', '[']) {
                    lines.push(line);
                }
                stack.push(ch);
            }
            '}' | ']' => {
                stack.pop();
            }
            _ => {}
        }
    }
    lines
}

/// Parses a model and checks that its layers chain.
pub fn parse_model(text: &str, path: &Path) -> Result<Vec<LayerSpec>> {
    if text.trim().is_empty() {
        return Err(phantom_core::Error::Model(format!("{}: empty model file", path.display())).into());
    }
    let json_err = |e: serde_json::Error| Error::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    };
    let records: Vec<LayerRecord> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(json_err)?
    } else {
        serde_json::from_str::<NamedModel>(text).map_err(json_err)?.layers
    };
    let layers: Vec<LayerSpec> = records.into_iter().enumerate().map(|(i, r)| r.into_spec(i)).collect();
    let lines = layer_lines(text);
    let at = |i: usize| lines.get(i).copied().unwrap_or(0);
    for (i, l) in layers.iter().enumerate() {
        if let Err(e) = l.validate() {
            return Err(Error::Parse { path: path.into(), line: at(i), column: 1, msg: format!("layer '{}': {e}", l.name) });
        }
    }
    if layers.is_empty() {
        return Err(phantom_core::Error::Model(format!("{}: model has no layers", path.display())).into());
    }
    for i in 1..layers.len() {
        if validate_chain(&layers[i - 1..=i]).is_err() {
            let (prev, next) = (&layers[i - 1], &layers[i]);
            let msg = format!(
                "layer {} ('{}') produces {:?} but layer {i} ('{}') expects {:?}",
                i - 1,
                prev.name,
                prev.output_shape().0,
                next.name,
                next.input_shape().0
            );
            return Err(Error::Parse { path: path.into(), line: at(i), column: 1, msg });
        }
    }
    Ok(layers)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Vec<LayerSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}
