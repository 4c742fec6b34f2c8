//! Versioned binary model files.
//!
//! Layout (little-endian): magic `ASTOI`, version `u32`, objective tag `u8`,
//! layer count `u32`, then per layer `in u32, out u32, activation u8,
//! batch-norm flag u8`. The body holds, per layer, the row-major `out x in`
//! weights and the bias as `f64`, followed by gamma, beta, running mean and
//! running variance when the layer is batch-normalized. A CRC32 of all
//! preceding bytes closes the file.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::loss::Objective;
use super::mlp::{Activation, BatchNorm, Dense, MlpModel};
use super::NeuralError;
use crate::binfmt::{self, Decoder, Encoder, FormatError};

pub const MODEL_MAGIC: &[u8; 5] = b"ASTOI";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &MlpModel, objective: Objective) -> Vec<u8> {
    let mut e = Encoder::new(MODEL_MAGIC, MODEL_VERSION);
    e.u8(objective.tag());
    e.u32(model.layers.len() as u32);
    for (i, l) in model.layers.iter().enumerate() {
        e.u32(l.input_dim() as u32);
        e.u32(l.output_dim() as u32);
        e.u8(match l.activation {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
        });
        e.u8(u8::from(i < model.norms.len()));
    }
    for (i, l) in model.layers.iter().enumerate() {
        e.f64s(l.weights.iter());
        e.f64s(l.bias.iter());
        if let Some(n) = model.norms.get(i) {
            e.f64s(n.gamma.iter());
            e.f64s(n.beta.iter());
            e.f64s(n.running_mean.iter());
            e.f64s(n.running_var.iter());
        }
    }
    e.finish()
}

pub fn decode_model(bytes: &[u8]) -> Result<(MlpModel, Objective), FormatError> {
    let mut d = Decoder::new(bytes, MODEL_MAGIC, MODEL_VERSION)?;
    let tag = d.u8("objective tag")?;
    let objective =
        Objective::from_tag(tag).ok_or_else(|| FormatError::Invalid(format!("objective tag {tag}")))?;
    let count = d.u32("layer count")? as usize;
    if count == 0 || count > 64 {
        return Err(FormatError::Invalid(format!("{count} layers")));
    }
    let mut heads = Vec::with_capacity(count);
    for _ in 0..count {
        let din = d.u32("layer input dim")? as usize;
        let dout = d.u32("layer output dim")? as usize;
        let activation = match d.u8("activation")? {
            0 => Activation::Relu,
            1 => Activation::Sigmoid,
            other => return Err(FormatError::Invalid(format!("activation {other}"))),
        };
        let normed = d.u8("batch-norm flag")? == 1;
        heads.push((din, dout, activation, normed));
    }
    for w in heads.windows(2) {
        if w[0].1 != w[1].0 {
            return Err(FormatError::Invalid(format!(
                "layer output {} feeds layer input {}",
                w[0].1, w[1].0
            )));
        }
    }
    let mut layers = Vec::with_capacity(count);
    let mut norms = Vec::new();
    for &(din, dout, activation, normed) in &heads {
        let weights = Array2::from_shape_vec((dout, din), d.f64s(din * dout, "weights")?)
            .map_err(|e| FormatError::Invalid(e.to_string()))?;
        let bias = Array1::from(d.f64s(dout, "bias")?);
        layers.push(Dense {
            weights,
            bias,
            activation,
        });
        if normed {
            norms.push(BatchNorm {
                gamma: Array1::from(d.f64s(dout, "gamma")?),
                beta: Array1::from(d.f64s(dout, "beta")?),
                running_mean: Array1::from(d.f64s(dout, "running mean")?),
                running_var: Array1::from(d.f64s(dout, "running variance")?),
            });
        }
    }
    d.finish()?;
    if norms.len() != count - 1 {
        return Err(FormatError::Invalid("batch norm expected on every hidden layer".into()));
    }
    Ok((MlpModel { layers, norms }, objective))
}

pub fn save_model(model: &MlpModel, objective: Objective, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model, objective)).map_err(|source| {
        NeuralError::Format(FormatError::Io {
            path: path.display().to_string(),
            source,
        })
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(MlpModel, Objective), NeuralError> {
    Ok(decode_model(&binfmt::read_file(path.as_ref())?)?)
}

/// Loads a model and checks its input and output widths.
pub fn load_model_checked(
    path: impl AsRef<Path>,
    input_dim: usize,
    output_dim: usize,
) -> Result<(MlpModel, Objective), NeuralError> {
    let (model, objective) = load_model(path)?;
    if model.input_dim() != input_dim {
        return Err(NeuralError::Dimension {
            expected: input_dim,
            found: model.input_dim(),
        });
    }
    if model.output_dim() != output_dim {
        return Err(NeuralError::Dimension {
            expected: output_dim,
            found: model.output_dim(),
        });
    }
    Ok((model, objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::ModelShape;

    fn model() -> MlpModel {
        let mut m = MlpModel::init(&ModelShape::three_hidden(7, 5, 3), 21);
        m.norms[1].running_var.fill(1.25);
        m.layers[2].bias.fill(-0.5);
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = model();
        save_model(&m, Objective::Emse, &path).unwrap();
        let (back, obj) = load_model(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(obj, Objective::Emse);
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = encode_model(&model(), Objective::Elc);
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(FormatError::BadMagic { .. })));
    }

    #[test]
    fn truncated_or_flipped_file() {
        let bytes = encode_model(&model(), Objective::Elc);
        assert!(decode_model(&bytes[..bytes.len() - 9]).is_err());
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 1;
        assert!(matches!(decode_model(&flipped), Err(FormatError::Checksum { .. })));
    }

    #[test]
    fn output_dimension_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&model(), Objective::Elc, &path).unwrap();
        assert!(load_model_checked(&path, 7, 3).is_ok());
        assert!(matches!(
            load_model_checked(&path, 7, 30),
            Err(NeuralError::Dimension { expected: 30, found: 3 })
        ));
    }
}
