use std::path::Path;

use crate::error::{Error, Result};
use crate::model::container::{ArrayData, Container};
use crate::model::{Model, ModelConfig};
use crate::numerics::Tensor;

pub const CHECKPOINT_KIND: &str = "checkpoint";

/// Packs the configuration and every parameter into a container. `extra`
/// header pairs are stored alongside the config.
pub fn checkpoint_container(model: &Model, extra: &[(String, String)]) -> Result<Container> {
    let mut c = Container::new();
    c.set("kind", CHECKPOINT_KIND);
    for (k, v) in model.config().to_pairs() {
        c.set(k, v);
    }
    for (k, v) in extra {
        c.set(format!("meta.{k}"), v.clone());
    }
    for (info, tensor) in model.param_infos().into_iter().zip(model.params()) {
        c.push(info.name, tensor.shape(), ArrayData::F64(tensor.data().to_vec()))?;
    }
    Ok(c)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    save_checkpoint_with(model, path, &[])
}

pub fn save_checkpoint_with(model: &Model, path: &Path, extra: &[(String, String)]) -> Result<()> {
    checkpoint_container(model, extra)?.write(path)
}

pub fn model_from_container(c: &Container) -> Result<Model> {
    if c.get("kind") != Some(CHECKPOINT_KIND) {
        return Err(Error::Load(format!(
            "expected a checkpoint, found kind '{}'",
            c.get("kind").unwrap_or("<none>")
        )));
    }
    let config = ModelConfig::from_pairs(&c.header)?;
    let mut model = Model::zeros(&config)?;
    let infos = model.param_infos();
    let expected: std::collections::HashSet<&str> = infos.iter().map(|i| i.name.as_str()).collect();
    if let Some(stray) = c.arrays.iter().find(|a| !expected.contains(a.name.as_str())) {
        return Err(Error::Load(format!(
            "array '{}' does not belong to a P={} Q={} model",
            stray.name, config.p, config.q
        )));
    }
    for (info, slot) in infos.iter().zip(model.params_mut()) {
        let array = c.array(&info.name).ok_or_else(|| {
            Error::Load(format!(
                "missing array '{}' for declared P={} Q={}",
                info.name, config.p, config.q
            ))
        })?;
        if array.shape != info.shape {
            return Err(Error::Load(format!(
                "array '{}' has shape {:?}, expected {:?}",
                info.name, array.shape, info.shape
            )));
        }
        let ArrayData::F64(values) = &array.data else {
            return Err(Error::Load(format!("array '{}' is not f64", info.name)));
        };
        *slot = Tensor::new(&info.shape, values.clone())?;
    }
    Ok(model)
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    model_from_container(&Container::read(path)?)
}

/// Loads a checkpoint and insists its configuration equals `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<Model> {
    let model = load_checkpoint(path)?;
    if model.config() != expected {
        return Err(Error::Load(format!(
            "checkpoint holds P={} Q={} ({}), expected P={} Q={} ({})",
            model.config().p,
            model.config().q,
            model.config().activation.name(),
            expected.p,
            expected.q,
            expected.activation.name()
        )));
    }
    Ok(model)
}

/// Header pairs saved with `extra`, without their `meta.` prefix.
pub fn checkpoint_metadata(path: &Path) -> Result<Vec<(String, String)>> {
    let c = Container::read(path)?;
    Ok(c.header
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("meta.").map(|k| (k.to_string(), v.clone())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::ActivationKind;
    use crate::numerics::RngStream;

    fn small(p: usize, q: usize) -> ModelConfig {
        ModelConfig {
            input_length: 32,
            blocks: 2,
            filters: 3,
            dense_units: 5,
            ..ModelConfig::with_orders(p, q, ActivationKind::LeakyRelu)
        }
    }

    #[test]
    fn round_trip_preserves_outputs_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut rng = RngStream::new(2);
        let model = Model::build(&small(2, 1), &mut rng).unwrap();
        save_checkpoint(&model, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, model);
        let x = Tensor::new(&[4, 32, 1], rng.uniform(-1.0, 1.0, 128).unwrap()).unwrap();
        let (a, b) = (model.predict(&x).unwrap(), back.predict(&x).unwrap());
        assert!(a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn mismatched_declared_orders_fail() {
        let model = Model::build(&small(1, 1), &mut RngStream::new(1)).unwrap();
        let mut c = checkpoint_container(&model, &[]).unwrap();
        c.set("p", "2");
        let err = model_from_container(&c).unwrap_err();
        assert!(err.to_string().contains("missing array"), "{err}");

        let mut c = checkpoint_container(&model, &[]).unwrap();
        c.set("q", "0");
        assert!(model_from_container(&c).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &path).unwrap();
        assert!(load_checkpoint_for(&path, &small(2, 1)).is_err());
        assert!(load_checkpoint_for(&path, &small(1, 1)).is_ok());
    }

    #[test]
    fn full_cnn_checkpoint_scalar_count() {
        let model = Model::zeros(&ModelConfig::with_orders(1, 0, ActivationKind::LeakyRelu)).unwrap();
        let c = checkpoint_container(&model, &[]).unwrap();
        let scalars: usize = c.arrays.iter().map(|a| a.data.len()).sum();
        assert_eq!(scalars, 58_376);
    }

    #[test]
    fn metadata_is_namespaced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = Model::zeros(&small(1, 0)).unwrap();
        save_checkpoint_with(&model, &path, &[("test_accuracy".into(), "0.5".into())]).unwrap();
        assert_eq!(
            checkpoint_metadata(&path).unwrap(),
            vec![("test_accuracy".to_string(), "0.5".to_string())]
        );
        assert!(load_checkpoint(&path).is_ok());
    }
}
