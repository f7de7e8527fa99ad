//! Factor matrices for the temporal mode: periodic waves, seasonal cycles
//! with growth, and streaming random walks.
//!
//! Time is 0-based, `t = 0..T-1`, and a wave frequency counts cycles across
//! the whole window, so phase at `t` is `2*pi*f*t/T + phi`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorSpec;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Sine,
    Cosine,
    Square,
    Sawtooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub waveform: Waveform,
    pub frequency: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

impl WaveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::param("frequency", "must be positive and finite"));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::param("amplitude", "must be finite"));
        }
        if !self.phase.is_finite() {
            return Err(Error::param("phase", "must be finite"));
        }
        Ok(())
    }

    /// Value at time `t` of a window of `len` samples.
    pub fn sample(&self, t: usize, len: usize) -> f64 {
        let cycles = self.frequency * t as f64 / len as f64;
        let shape = match self.waveform {
            Waveform::Sine => (2.0 * PI * cycles + self.phase).sin(),
            Waveform::Cosine => (2.0 * PI * cycles + self.phase).cos(),
            // Square and sawtooth read the fractional cycle directly instead of
            // going through sin(), whose rounding at multiples of pi would make
            // the sign at half-cycle boundaries arbitrary.
            Waveform::Square => {
                if fractional_cycle(cycles, self.phase) < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Waveform::Sawtooth => 2.0 * fractional_cycle(cycles, self.phase) - 1.0,
        };
        self.amplitude * shape
    }
}

fn fractional_cycle(cycles: f64, phase: f64) -> f64 {
    (cycles + phase / (2.0 * PI)).rem_euclid(1.0)
}

/// `T x specs.len()` matrix, one wave per column.
pub fn gen_periodic(len: usize, specs: &[WaveSpec]) -> Result<DMatrix<f64>> {
    if len < 2 {
        return Err(Error::param(
            "T",
            "periodic factors need at least 2 time steps",
        ));
    }
    for spec in specs {
        spec.validate()?;
    }
    Ok(DMatrix::from_fn(len, specs.len(), |t, c| {
        specs[c].sample(t, len)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonPattern {
    SinglePeak,
    DoublePeak,
    #[serde(untagged)]
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeasonalSpec {
    pub cycle_length: usize,
    pub pattern: SeasonPattern,
    #[serde(default)]
    pub growth_rate: f64,
}

fn bump(x: f64, center: f64, width: f64) -> f64 {
    let z = (x - center) / width;
    (-0.5 * z * z).exp()
}

impl SeasonalSpec {
    pub fn validate(&self, len: usize) -> Result<()> {
        if self.cycle_length == 0 {
            return Err(Error::param("cycle_length", "must be at least 1"));
        }
        if self.cycle_length > len {
            return Err(Error::param(
                "cycle_length",
                format!(
                    "cycle of {} exceeds the {len} time steps",
                    self.cycle_length
                ),
            ));
        }
        if let SeasonPattern::Custom(p) = &self.pattern {
            if p.len() != self.cycle_length {
                return Err(Error::param(
                    "pattern",
                    format!(
                        "custom pattern has {} values, cycle_length is {}",
                        p.len(),
                        self.cycle_length
                    ),
                ));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("pattern", "values must be finite"));
            }
        }
        if !(self.growth_rate.is_finite() && self.growth_rate > -1.0) {
            return Err(Error::param(
                "growth_rate",
                "must be finite and greater than -1",
            ));
        }
        Ok(())
    }

    /// One cycle of the pattern.
    pub fn cycle(&self) -> Vec<f64> {
        let l = self.cycle_length as f64;
        match &self.pattern {
            SeasonPattern::SinglePeak => (0..self.cycle_length)
                .map(|i| bump(i as f64, l / 2.0, l / 6.0))
                .collect(),
            SeasonPattern::DoublePeak => (0..self.cycle_length)
                .map(|i| {
                    let x = i as f64;
                    bump(x, l / 3.0, l / 10.0) + bump(x, 2.0 * l / 3.0, l / 10.0)
                })
                .collect(),
            SeasonPattern::Custom(p) => p.clone(),
        }
    }
}

/// `pattern[t mod L] * (1 + g)^(t div L)`; a trailing partial cycle is truncated.
pub fn gen_seasonal(len: usize, spec: &SeasonalSpec) -> Result<Vec<f64>> {
    spec.validate(len)?;
    let cycle = spec.cycle();
    let l = spec.cycle_length;
    Ok((0..len)
        .map(|t| cycle[t % l] * (1.0 + spec.growth_rate).powi((t / l) as i32))
        .collect())
}

/// Several seasonal columns side by side, e.g. daily and weekly cycles.
pub fn gen_seasonal_columns(len: usize, specs: &[SeasonalSpec]) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(len, specs.len());
    for (c, spec) in specs.iter().enumerate() {
        m.column_mut(c).copy_from_slice(&gen_seasonal(len, spec)?);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub epsilon: f64,
    #[serde(default = "StreamSpec::default_init")]
    pub init: Box<FactorSpec>,
}

impl StreamSpec {
    fn default_init() -> Box<FactorSpec> {
        Box::new(FactorSpec::standard_normal())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::param(
                "epsilon",
                "variation control must lie in [0, 1]",
            ));
        }
        if self.init.is_temporal() {
            return Err(Error::param(
                "init",
                "initial row needs a non-temporal generator",
            ));
        }
        Ok(())
    }
}

/// Convex AR(1) walk over rows: `x[t+1] = (1 - eps) * x[t] + eps * w_t`,
/// `w_t` standard normal per entry. Row 0 comes from `spec.init`.
pub fn gen_streaming(
    len: usize,
    rank: usize,
    spec: &StreamSpec,
    stream: &RngStream,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if len == 0 {
        return Err(Error::param(
            "T",
            "streaming factors need at least 1 time step",
        ));
    }
    let first = spec.init.generate(1, rank, &stream.child("init"))?;
    let eps = spec.epsilon;
    let mut m = DMatrix::zeros(len, rank);
    m.row_mut(0).copy_from(&first.row(0));
    let mut rng = stream.child("walk").rng();
    for t in 1..len {
        for c in 0..rank {
            let w: f64 = StandardNormal.sample(&mut rng);
            m[(t, c)] = (1.0 - eps) * m[(t - 1, c)] + eps * w;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(waveform: Waveform, frequency: f64, phase: f64) -> WaveSpec {
        WaveSpec {
            waveform,
            frequency,
            amplitude: 1.0,
            phase,
        }
    }

    #[test]
    fn sine_quarter_samples() {
        let m = gen_periodic(4, &[wave(Waveform::Sine, 1.0, 0.0)]).unwrap();
        let expected = [0.0, 1.0, 0.0, -1.0];
        for t in 0..4 {
            assert!((m[(t, 0)] - expected[t]).abs() <= 1e-15, "t={t}");
        }
    }

    #[test]
    fn cosine_is_shifted_sine() {
        let m = gen_periodic(
            37,
            &[
                wave(Waveform::Cosine, 3.0, 0.0),
                wave(Waveform::Sine, 3.0, PI / 2.0),
            ],
        )
        .unwrap();
        for t in 0..37 {
            assert!((m[(t, 0)] - m[(t, 1)]).abs() <= 1e-12);
        }
    }

    #[test]
    fn square_has_four_runs_of_25() {
        let m = gen_periodic(100, &[wave(Waveform::Square, 2.0, 0.0)]).unwrap();
        let col: Vec<f64> = m.column(0).iter().copied().collect();
        assert!(col.iter().all(|&v| v == 1.0 || v == -1.0));
        let mut runs = vec![1usize];
        for t in 1..col.len() {
            if col[t] == col[t - 1] {
                *runs.last_mut().unwrap() += 1;
            } else {
                runs.push(1);
            }
        }
        assert_eq!(runs, vec![25, 25, 25, 25]);
        assert_eq!(col[0], 1.0);
    }

    #[test]
    fn sawtooth_ramps() {
        let m = gen_periodic(4, &[wave(Waveform::Sawtooth, 1.0, 0.0)]).unwrap();
        let col: Vec<f64> = m.column(0).iter().copied().collect();
        assert_eq!(col, vec![-1.0, -0.5, 0.0, 0.5]);
    }

    #[test]
    fn bad_waves_rejected() {
        assert!(gen_periodic(1, &[wave(Waveform::Sine, 1.0, 0.0)]).is_err());
        assert!(gen_periodic(10, &[wave(Waveform::Sine, 0.0, 0.0)]).is_err());
        assert!(
            serde_json::from_str::<WaveSpec>(r#"{"waveform":"triangle","frequency":1}"#).is_err()
        );
    }

    #[test]
    fn seasonal_tiles_without_growth() {
        let p = vec![0.5, 2.0, -1.0];
        let spec = SeasonalSpec {
            cycle_length: 3,
            pattern: SeasonPattern::Custom(p.clone()),
            growth_rate: 0.0,
        };
        let v = gen_seasonal(6, &spec).unwrap();
        assert_eq!(v, [p.clone(), p].concat());
    }

    #[test]
    fn seasonal_doubles_per_cycle() {
        let spec = SeasonalSpec {
            cycle_length: 2,
            pattern: SeasonPattern::Custom(vec![1.0, 1.0]),
            growth_rate: 1.0,
        };
        assert_eq!(
            gen_seasonal(6, &spec).unwrap(),
            vec![1.0, 1.0, 2.0, 2.0, 4.0, 4.0]
        );
    }

    #[test]
    fn seasonal_truncates_last_cycle() {
        let spec = SeasonalSpec {
            cycle_length: 4,
            pattern: SeasonPattern::SinglePeak,
            growth_rate: 0.0,
        };
        let v = gen_seasonal(10, &spec).unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(v[8..], v[0..2]);
    }

    #[test]
    fn presets_peak_where_expected() {
        let single = SeasonalSpec {
            cycle_length: 24,
            pattern: SeasonPattern::SinglePeak,
            growth_rate: 0.0,
        };
        let c = single.cycle();
        assert_eq!(c[12], 1.0);
        let argmax = (0..24).max_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap();
        assert_eq!(argmax, 12);

        let double = SeasonalSpec {
            pattern: SeasonPattern::DoublePeak,
            ..single
        };
        let c = double.cycle();
        assert!(c[8] > c[12] && c[16] > c[12]);
    }

    #[test]
    fn seasonal_validation() {
        let spec = SeasonalSpec {
            cycle_length: 3,
            pattern: SeasonPattern::Custom(vec![1.0, 2.0]),
            growth_rate: 0.0,
        };
        assert!(gen_seasonal(6, &spec).is_err());
        let spec = SeasonalSpec {
            cycle_length: 8,
            pattern: SeasonPattern::SinglePeak,
            growth_rate: 0.0,
        };
        assert!(gen_seasonal(6, &spec).is_err());
    }

    #[test]
    fn pattern_parses_presets_and_vectors() {
        let s: SeasonalSpec =
            serde_json::from_str(r#"{"cycle_length":2,"pattern":"double_peak"}"#).unwrap();
        assert_eq!(s.pattern, SeasonPattern::DoublePeak);
        let s: SeasonalSpec =
            serde_json::from_str(r#"{"cycle_length":2,"pattern":[1.0,3.0],"growth_rate":0.5}"#)
                .unwrap();
        assert_eq!(s.pattern, SeasonPattern::Custom(vec![1.0, 3.0]));
    }

    #[test]
    fn frozen_stream_repeats_first_row() {
        let spec = StreamSpec {
            epsilon: 0.0,
            init: Box::new(FactorSpec::Uniform),
        };
        let m = gen_streaming(20, 3, &spec, &RngStream::new(5)).unwrap();
        for t in 1..20 {
            assert_eq!(m.row(t), m.row(0));
        }
    }

    #[test]
    fn epsilon_out_of_range() {
        let spec = StreamSpec {
            epsilon: 1.5,
            init: Box::new(FactorSpec::Uniform),
        };
        assert!(matches!(
            gen_streaming(5, 1, &spec, &RngStream::new(5)),
            Err(Error::Parameter { field, .. }) if field == "epsilon"
        ));
    }
}
