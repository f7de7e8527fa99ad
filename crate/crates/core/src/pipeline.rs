//! Config -> factors -> model -> effects -> dataset.
//!
//! Random streams are keyed by role: factor `n` uses `seed/"factor"/n`, the
//! weights `seed/"weights"` and effect `i` uses `seed/"effect"/i`. Appending
//! an effect therefore never changes what earlier stages produce.

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{EffectSpec, GenConfig, ModelSpec, Stage, Storage};
use crate::effects::{self, Touched};
use crate::error::{Error, Result};
use crate::factors::gen_weights;
use crate::manifest::{Dataset, EffectLogEntry, IndexBase, Manifest, TensorData, FORMAT_VERSION};
use crate::rng::{self, RngStream};
use crate::tensor::{normalize_cp, to_sparse, CpModel, DenseTensor, Model, TuckerModel};

enum Weights {
    Lambda(Vec<f64>),
    Core(DenseTensor),
}

struct State {
    factors: Vec<DMatrix<f64>>,
    weights: Weights,
    tensor: Option<DenseTensor>,
}

impl State {
    fn model(&self) -> Result<Model> {
        Ok(match &self.weights {
            Weights::Lambda(l) => Model::Cp(CpModel::new(self.factors.clone(), l.clone())?),
            Weights::Core(g) => Model::Tucker(TuckerModel::new(self.factors.clone(), g.clone())?),
        })
    }

    fn cp(&self) -> Result<CpModel> {
        match &self.weights {
            Weights::Lambda(l) => CpModel::new(self.factors.clone(), l.clone()),
            Weights::Core(_) => Err(Error::Structural("operation needs a CP model".into())),
        }
    }

    fn set_cp(&mut self, model: CpModel) {
        let (factors, lambda) = model.into_parts();
        self.factors = factors;
        self.weights = Weights::Lambda(lambda);
    }

    fn tensor(&mut self) -> Result<&mut DenseTensor> {
        if self.tensor.is_none() {
            self.tensor = Some(self.model()?.reconstruct());
        }
        Ok(self.tensor.as_mut().expect("just reconstructed"))
    }
}

/// Runs the full recipe and returns the dataset with its manifest.
pub fn generate(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let shape = config.shape()?;
    let root = RngStream::new(config.seed);

    let factors = config
        .factors
        .iter()
        .enumerate()
        .map(|(n, spec)| {
            spec.generate(
                shape.dims()[n],
                config.model.columns(n),
                &root.child("factor").index(n),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let weights = match &config.model {
        ModelSpec::Cp { rank, weights } => {
            Weights::Lambda(gen_weights(weights, *rank, &root.child("weights"))?)
        }
        ModelSpec::Tucker { ranks, core } => {
            let core_shape = crate::tensor::Shape::new(ranks.clone())?;
            let values = gen_weights(core, core_shape.numel(), &root.child("weights"))?;
            Weights::Core(DenseTensor::new(core_shape, values)?)
        }
    };

    let mut state = State {
        factors,
        weights,
        tensor: None,
    };
    let mut log = Vec::with_capacity(config.effects.len());
    for (i, effect) in config.effects.iter().enumerate() {
        let stream = root.child("effect").index(i);
        let (touched, achieved) = apply(config, &mut state, effect, &stream)?;
        log.push(EffectLogEntry {
            index: i,
            kind: effect.name().to_string(),
            stage: effect.stage(),
            params: serde_json::to_value(effect).expect("effect serializes"),
            touched,
            achieved,
        });
    }

    let model = state.model()?;
    let dense = state.tensor()?.clone();
    if !dense.is_finite() {
        return Err(Error::Numerical(
            "generated tensor contains non-finite values".into(),
        ));
    }
    let tensor = match config.output.storage {
        Storage::Dense => TensorData::Dense(dense),
        Storage::Sparse => TensorData::Sparse(to_sparse(&dense, 0.0)),
    };

    let mut recipe = config.clone();
    recipe.materialize();
    let manifest = Manifest {
        format_version: FORMAT_VERSION.to_string(),
        rng: rng::ALGORITHM.to_string(),
        seed: config.seed,
        shape: shape.dims().to_vec(),
        storage: config.output.storage,
        model_type: Some(config.model.type_name().to_string()),
        ranks: config.model.ranks(shape.order()),
        index_base: IndexBase::default(),
        config: Some(recipe),
        overrides: Default::default(),
        effects: log,
        checksum: Some(tensor.checksum()),
        exported_at: None,
    };
    Ok(Dataset {
        tensor,
        model: Some(model),
        manifest,
    })
}

/// Regenerates a dataset from the recipe stored in its manifest.
pub fn replay(manifest: &Manifest) -> Result<Dataset> {
    let mut config = manifest
        .config
        .clone()
        .ok_or_else(|| Error::format("manifest", "no recipe stored; cannot replay"))?;
    config.seed = manifest.seed;
    let mut dataset = generate(&config)?;
    dataset.manifest.overrides = manifest.overrides.clone();
    Ok(dataset)
}

fn apply(
    config: &GenConfig,
    state: &mut State,
    effect: &EffectSpec,
    stream: &RngStream,
) -> Result<(Touched, Value)> {
    debug_assert!(effect.stage() == Stage::Tensor || state.tensor.is_none());
    Ok(match effect {
        EffectSpec::ChangePoint(spec) => {
            let mode = config
                .temporal_mode
                .expect("validated: change points need a temporal mode");
            let (factor, magnitude, kind) =
                effects::apply_change_point(&state.factors[mode], spec)?;
            state.factors[mode] = factor;
            let touched = if magnitude == 0.0 {
                Touched::FactorEntries {
                    entries: Vec::new(),
                }
            } else {
                Touched::FactorRows {
                    mode,
                    column: spec.column,
                    rows: [spec.start, spec.end],
                }
            };
            (touched, json!({ "magnitude": magnitude, "change": kind }))
        }
        EffectSpec::FactorNoise { eta } => {
            let (factors, sigmas) = effects::add_factor_noise(&state.factors, *eta, stream)?;
            state.factors = factors;
            let modes = (0..sigmas.len()).filter(|&n| sigmas[n] > 0.0).collect();
            (Touched::Factors { modes }, json!({ "sigmas": sigmas }))
        }
        EffectSpec::NonnegFactors => {
            let (factors, flipped) = effects::nonneg_factors(&state.factors);
            state.factors = factors;
            (
                Touched::Where {
                    target: "factors".into(),
                    condition: "value < 0".into(),
                },
                json!({ "operation": "abs", "changed": flipped }),
            )
        }
        EffectSpec::SparsifyFactors { drop_fraction } => {
            let (factors, entries) =
                effects::sparsify_factors(&state.factors, *drop_fraction, stream)?;
            state.factors = factors;
            let dropped = entries.len();
            (
                Touched::FactorEntries { entries },
                json!({ "dropped": dropped }),
            )
        }
        EffectSpec::NormalizeCp => {
            let model = normalize_cp(&state.cp()?)?;
            let lambda = model.lambda().to_vec();
            state.set_cp(model);
            (Touched::Model, json!({ "lambda": lambda }))
        }
        EffectSpec::SignFix => {
            let model = effects::sign_fix(&state.cp()?);
            let lambda = model.lambda().to_vec();
            state.set_cp(model);
            (Touched::Model, json!({ "lambda": lambda }))
        }
        EffectSpec::Anomaly(spec) => {
            let host = state.tensor()?;
            let (out, record) = effects::inject_anomaly(host, spec, stream)?;
            *host = out;
            (
                Touched::Block {
                    ranges: spec.block.clone(),
                },
                serde_json::to_value(record).expect("record serializes"),
            )
        }
        EffectSpec::Awgn { snr_db } => {
            let t = state.tensor()?;
            let (out, record) = effects::add_awgn(t, *snr_db, stream)?;
            *t = out;
            (
                Touched::Tensor,
                serde_json::to_value(record).expect("record serializes"),
            )
        }
        EffectSpec::SparseNoise { snr_db, density } => {
            let t = state.tensor()?;
            let (out, record, positions) = effects::add_sparse_noise(t, *snr_db, *density, stream)?;
            *t = out;
            (
                Touched::TensorEntries { positions },
                serde_json::to_value(record).expect("record serializes"),
            )
        }
        EffectSpec::NonnegTensor => {
            let t = state.tensor()?;
            let (out, clamped) = effects::nonneg_tensor(t);
            *t = out;
            (
                Touched::Where {
                    target: "tensor".into(),
                    condition: "value < 0".into(),
                },
                json!({ "operation": "clamp", "changed": clamped }),
            )
        }
        EffectSpec::NormalizeTensor => {
            let t = state.tensor()?;
            let (out, scale) = effects::normalize_tensor(t)?;
            *t = out;
            (Touched::Tensor, json!({ "scale": scale }))
        }
        EffectSpec::SparsifyTensor { drop_fraction } => {
            let t = state.tensor()?;
            let (out, view, positions) = effects::sparsify_tensor(t, *drop_fraction, stream)?;
            *t = out;
            (
                Touched::TensorEntries { positions },
                json!({ "nnz": view.nnz() }),
            )
        }
        EffectSpec::PoissonCounts => {
            let t = state.tensor()?;
            let counts = effects::sample_poisson(t, stream)?;
            *t = counts;
            let nnz = t.nnz();
            (Touched::Tensor, json!({ "nnz": nnz }))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> GenConfig {
        GenConfig::from_json_str(&format!(
            r#"{{"seed": 11, "shape": [6, 5, 20], "model": {{"type": "cp", "rank": 3}},
                "temporal_mode": 2,
                "factors": [{{"method": "uniform"}}, {{"method": "gamma", "mu": 2.0, "theta": 1.0}},
                            {{"method": "periodic", "waves": [
                                {{"waveform": "sine", "frequency": 2}},
                                {{"waveform": "square", "frequency": 1}},
                                {{"waveform": "sawtooth", "frequency": 4}}]}}]
                {extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn plain_generation_matches_model() {
        let d = generate(&config("")).unwrap();
        let model = d.model.as_ref().unwrap();
        assert_eq!(d.tensor, TensorData::Dense(model.reconstruct()));
        assert_eq!(d.manifest.shape, vec![6, 5, 20]);
        assert_eq!(d.manifest.ranks, vec![3, 3, 3]);
        assert!(d.manifest.effects.is_empty());
    }

    #[test]
    fn effect_log_is_ordered() {
        let d = generate(&config(
            r#", "effects": [
                {"kind": "change_point", "column": 0, "start": 10, "end": 19, "magnitude": 1.5},
                {"kind": "sign_fix"},
                {"kind": "awgn", "snr_db": 20},
                {"kind": "sparsify_tensor", "drop_fraction": 0.25}]"#,
        ))
        .unwrap();
        let kinds: Vec<&str> = d.manifest.effects.iter().map(|e| e.kind.as_str()).collect();
        assert_eq!(
            kinds,
            ["change_point", "sign_fix", "awgn", "sparsify_tensor"]
        );
        assert_eq!(d.manifest.effects[0].achieved["change"], "structural_shift");
    }

    #[test]
    fn replay_reproduces_checksum() {
        let d = generate(&config(r#", "effects": [{"kind": "awgn", "snr_db": 5}]"#)).unwrap();
        let again = replay(&d.manifest).unwrap();
        assert_eq!(again.manifest.checksum, d.manifest.checksum);
        assert_eq!(again, d);
    }

    #[test]
    fn zero_norm_snr_is_numerical_failure() {
        let c = GenConfig::from_json_str(
            r#"{"seed": 1, "shape": [3, 3], "model": {"type": "cp", "rank": 1,
                "weights": {"method": "custom", "values": [0]}},
                "factors": {"method": "uniform"}, "effects": [{"kind": "awgn", "snr_db": 10}]}"#,
        )
        .unwrap();
        let err = generate(&c).unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::Numerical);
    }

    #[test]
    fn tucker_pipeline() {
        let c = GenConfig::from_json_str(
            r#"{"seed": 3, "shape": [4, 5, 6], "model": {"type": "tucker", "ranks": [2, 3, 2]},
                "factors": {"method": "orthogonal"}, "output": {"storage": "sparse"}}"#,
        )
        .unwrap();
        let d = generate(&c).unwrap();
        assert!(matches!(d.model, Some(Model::Tucker(_))));
        assert!(matches!(d.tensor, TensorData::Sparse(_)));
        assert_eq!(d.manifest.ranks, vec![2, 3, 2]);
    }

    #[test]
    fn poisson_count_pipeline() {
        let c = GenConfig::from_json_str(
            r#"{"seed": 5, "shape": [10, 8, 6], "model": {"type": "cp", "rank": 2},
                "factors": {"method": "gamma", "mu": 1.0, "theta": 1.0},
                "effects": [{"kind": "poisson_counts"}], "output": {"storage": "sparse"}}"#,
        )
        .unwrap();
        let d = generate(&c).unwrap();
        let TensorData::Sparse(s) = &d.tensor else {
            panic!("sparse expected")
        };
        assert!(s
            .entries()
            .iter()
            .all(|(_, v)| v.fract() == 0.0 && *v > 0.0));
    }
}
