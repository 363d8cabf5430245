//! JSON run configuration (`version: "v1"`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::LoheError;
use crate::init::{
    clustered_ensemble, random_ensemble, random_generators, random_hamiltonians,
    random_unitary_ensemble, ClusterTarget, GeneratorRecipe,
};
use crate::integrate::IntegratorConfig;
use crate::linalg::{ComplexTensor, SkewHermitianGenerator, TensorShape};
use crate::models::{build_phase_model, CouplingVector, EnsembleState, Model, ModelKind, PhaseModel};
use crate::verify::VerifyOptions;

pub const CONFIG_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key `{key}` at line {line}, column {column}")]
    UnknownKey {
        key: String,
        line: usize,
        column: usize,
    },
    #[error("type mismatch at line {line}, column {column}: {message}")]
    TypeMismatch {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Couplings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    /// Lohe matrix coupling `kappa`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Tensor-model strengths ordered by bit-vector (`00, 01, 10, 11` for rank 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    #[default]
    Zero,
    RandomSkewHermitian {
        scale: f64,
        #[serde(default)]
        homogeneous: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diameter: Option<f64>,
    },
    /// Row-major `D x D` entries per member; hermitian `H_j` for the matrix model.
    Explicit { entries: Vec<Vec<Complex64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Random {
        #[serde(default)]
        real: bool,
    },
    Clustered {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda_target: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho_target: Option<f64>,
        #[serde(default)]
        real: bool,
    },
    /// All members equal to one seeded random member.
    Identical {
        #[serde(default)]
        real: bool,
    },
    /// Row-major entries per member.
    Explicit { members: Vec<Vec<Complex64>> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSpec {
    #[serde(default)]
    pub cross_ratios: Vec<[usize; 4]>,
    /// Track every ordered tuple of distinct indices.
    #[serde(default)]
    pub all_cross_ratios: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Kappa0,
    Kappa1,
    Kappa,
    Seed,
    N,
    LambdaTarget,
    RhoTarget,
    GeneratorDiameter,
    TEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub version: String,
    pub model: ModelKind,
    pub n: usize,
    pub shape: Vec<usize>,
    pub couplings: Couplings,
    #[serde(default)]
    pub generators: GeneratorSpec,
    pub initial: InitialSpec,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub observables: ObservablesSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let config: SimConfig = serde_json::from_str(text).map_err(classify)?;
    config.validate()?;
    Ok(config)
}

pub fn serialize_config(config: &SimConfig) -> String {
    serde_json::to_string_pretty(config).expect("configs always serialize")
}

fn classify(e: serde_json::Error) -> ConfigError {
    use serde_json::error::Category;
    let (line, column) = (e.line(), e.column());
    let message = e.to_string();
    match e.classify() {
        Category::Syntax | Category::Eof | Category::Io => ConfigError::Syntax {
            line,
            column,
            message,
        },
        Category::Data => {
            if let Some(rest) = message.strip_prefix("unknown field `") {
                let key = rest.split('`').next().unwrap_or_default().to_string();
                ConfigError::UnknownKey { key, line, column }
            } else {
                ConfigError::TypeMismatch {
                    line,
                    column,
                    message,
                }
            }
        }
    }
}

/// A ready-to-run system.
#[derive(Debug, Clone)]
pub enum Simulation {
    Ensemble {
        model: Model,
        initial: EnsembleState,
    },
    Phase {
        model: PhaseModel,
        /// The complex ensemble the phases are measured against.
        reference: EnsembleState,
    },
}

impl SimConfig {
    pub fn tensor_shape(&self) -> Result<TensorShape, ConfigError> {
        TensorShape::new(self.shape.clone()).map_err(|e| invalid("shape", e.to_string()))
    }

    fn rank_one_dim(&self) -> Result<usize, ConfigError> {
        match self.shape.as_slice() {
            [d] => Ok(*d),
            _ => Err(invalid(
                "shape",
                format!("{:?} needs a single dimension [d]", self.model),
            )),
        }
    }

    pub fn kappa0(&self) -> Result<f64, ConfigError> {
        self.couplings
            .kappa0
            .ok_or_else(|| invalid("couplings.kappa0", format!("required by {:?}", self.model)))
    }

    pub fn kappa1(&self) -> Result<f64, ConfigError> {
        self.couplings
            .kappa1
            .ok_or_else(|| invalid("couplings.kappa1", format!("required by {:?}", self.model)))
    }

    /// Tensor-model coupling vector.
    pub fn coupling_vector(&self) -> Result<CouplingVector, ConfigError> {
        let rank = self.shape.len();
        match (&self.couplings.strengths, rank) {
            (Some(s), _) => CouplingVector::new(rank, s.clone())
                .map_err(|e| invalid("couplings.strengths", e.to_string())),
            (None, 1) => CouplingVector::rank_one(self.kappa0()?, self.kappa1()?)
                .map_err(|e| invalid("couplings", e.to_string())),
            (None, _) => Err(invalid(
                "couplings.strengths",
                format!("required for rank-{rank} tensors"),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(
                "version",
                format!("expected \"{CONFIG_VERSION}\", got \"{}\"", self.version),
            ));
        }
        if self.n == 0 {
            return Err(invalid("n", "ensemble size must be at least 1"));
        }
        self.tensor_shape()?;
        let c = &self.couplings;
        for (name, v) in [
            ("couplings.kappa0", c.kappa0),
            ("couplings.kappa1", c.kappa1),
            ("couplings.kappa", c.kappa),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(invalid(name, format!("{v} is not finite")));
                }
            }
        }
        if let Some(k0) = c.kappa0 {
            if k0 < 0.0 {
                return Err(invalid("couplings.kappa0", format!("must be nonnegative, got {k0}")));
            }
        }
        match self.model {
            ModelKind::LoheTensor => {
                self.coupling_vector()?;
            }
            ModelKind::LoheHermitianSphere => {
                self.rank_one_dim()?;
                self.kappa0()?;
                self.kappa1()?;
            }
            ModelKind::LoheSphere | ModelKind::SubsystemA => {
                self.rank_one_dim()?;
                self.kappa0()?;
            }
            ModelKind::SubsystemB | ModelKind::KuramotoFrustration => {
                self.rank_one_dim()?;
                self.kappa1()?;
            }
            ModelKind::LoheMatrix => {
                if self.shape.len() != 2 || self.shape[0] != self.shape[1] {
                    return Err(invalid("shape", "the matrix model needs a square [d, d] shape"));
                }
                if c.kappa.is_none() {
                    return Err(invalid("couplings.kappa", "required by the matrix model"));
                }
            }
        }
        let no_generators = matches!(
            self.model,
            ModelKind::SubsystemA | ModelKind::SubsystemB | ModelKind::KuramotoFrustration
        );
        match &self.generators {
            GeneratorSpec::Zero => {}
            _ if no_generators => {
                return Err(invalid(
                    "generators",
                    format!("{:?} has no free flow; use kind \"zero\"", self.model),
                ))
            }
            GeneratorSpec::RandomSkewHermitian {
                scale, diameter, ..
            } => {
                if !(*scale >= 0.0) {
                    return Err(invalid("generators.scale", "must be nonnegative"));
                }
                if let Some(d) = diameter {
                    if !(*d >= 0.0) {
                        return Err(invalid("generators.diameter", "must be nonnegative"));
                    }
                }
            }
            GeneratorSpec::Explicit { entries } => {
                let d = self.tensor_shape()?.size();
                let want = if self.model == ModelKind::LoheMatrix {
                    d
                } else {
                    d * d
                };
                if entries.len() != self.n || entries.iter().any(|e| e.len() != want) {
                    return Err(invalid(
                        "generators.entries",
                        format!("need {} members with {want} entries each", self.n),
                    ));
                }
            }
        }
        match &self.initial {
            InitialSpec::Clustered {
                lambda_target,
                rho_target,
                ..
            } => match (lambda_target, rho_target) {
                (Some(l), None) if *l > 0.0 => {}
                (None, Some(r)) if *r > 0.0 && *r < 1.0 => {}
                _ => {
                    return Err(invalid(
                        "initial",
                        "clustered data needs exactly one of lambda_target > 0 or rho_target in (0, 1)",
                    ))
                }
            },
            InitialSpec::Explicit { members } => {
                let d = self.tensor_shape()?.size();
                if members.len() != self.n || members.iter().any(|m| m.len() != d) {
                    return Err(invalid(
                        "initial.members",
                        format!("need {} members with {d} entries each", self.n),
                    ));
                }
            }
            InitialSpec::Random { .. } | InitialSpec::Identical { .. } => {}
        }
        if self.model == ModelKind::LoheMatrix
            && matches!(self.initial, InitialSpec::Clustered { .. })
        {
            return Err(invalid("initial", "clustered data is not available for unitaries"));
        }
        self.integrator
            .validate()
            .map_err(|e| invalid("integrator", e.to_string()))?;
        for t in &self.observables.cross_ratios {
            if t.iter().any(|&k| k >= self.n) {
                return Err(invalid(
                    "observables.cross_ratios",
                    format!("tuple {t:?} out of range for n = {}", self.n),
                ));
            }
        }
        if let Some(v) = &self.verify {
            v.validate().map_err(|e| invalid("verify", e.to_string()))?;
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(invalid("sweep.values", "must not be empty"));
            }
        }
        Ok(())
    }

    /// Cross-ratio tuples to record.
    pub fn cross_ratio_tuples(&self) -> Vec<[usize; 4]> {
        if !self.observables.all_cross_ratios {
            return self.observables.cross_ratios.clone();
        }
        let n = self.n;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let t = [i, j, k, l];
                        let distinct = (0..4).all(|a| (a + 1..4).all(|b| t[a] != t[b]));
                        if distinct {
                            out.push(t);
                        }
                    }
                }
            }
        }
        out
    }

    fn real_model(&self) -> bool {
        self.model == ModelKind::LoheSphere
    }

    pub fn build_initial(&self) -> Result<EnsembleState, LoheError> {
        let shape = self.tensor_shape().map_err(to_lohe)?;
        let state = match &self.initial {
            _ if self.model == ModelKind::LoheMatrix
                && !matches!(self.initial, InitialSpec::Explicit { .. }) =>
            {
                let unitaries = random_unitary_ensemble(self.n, shape.dims()[0], self.seed)?;
                if matches!(self.initial, InitialSpec::Identical { .. }) {
                    EnsembleState::new(vec![unitaries.members[0].clone(); self.n])?
                } else {
                    unitaries
                }
            }
            InitialSpec::Random { real } => {
                random_ensemble(self.n, &shape, *real || self.real_model(), self.seed)?
            }
            InitialSpec::Identical { real } => {
                let one = random_ensemble(1, &shape, *real || self.real_model(), self.seed)?;
                EnsembleState::new(vec![one.members[0].clone(); self.n])?
            }
            InitialSpec::Clustered {
                lambda_target,
                rho_target,
                real,
            } => {
                let target = match (lambda_target, rho_target) {
                    (Some(l), _) => ClusterTarget::Lambda(*l),
                    (None, Some(r)) => ClusterTarget::Rho(*r),
                    (None, None) => unreachable!("validated"),
                };
                clustered_ensemble(self.n, &shape, *real || self.real_model(), target, self.seed)?
            }
            InitialSpec::Explicit { members } => EnsembleState::new(
                members
                    .iter()
                    .map(|m| ComplexTensor::from_entries(shape.clone(), m.clone()))
                    .collect::<Result<Vec<_>, _>>()?,
            )?,
        };
        Ok(state)
    }

    /// Skew-hermitian generators (for the matrix model: hamiltonians, see [`Self::build_hamiltonians`]).
    pub fn build_generators(&self) -> Result<Vec<SkewHermitianGenerator>, LoheError> {
        let shape = self.tensor_shape().map_err(to_lohe)?;
        match &self.generators {
            GeneratorSpec::Zero => Ok(vec![SkewHermitianGenerator::zero(shape); self.n]),
            GeneratorSpec::RandomSkewHermitian {
                scale,
                homogeneous,
                diameter,
            } => random_generators(
                self.n,
                &shape,
                GeneratorRecipe {
                    scale: *scale,
                    homogeneous: *homogeneous,
                    diameter: *diameter,
                    real: self.real_model(),
                },
                self.seed,
            ),
            GeneratorSpec::Explicit { entries } => entries
                .iter()
                .map(|e| {
                    SkewHermitianGenerator::new(ComplexTensor::from_entries(
                        shape.doubled(),
                        e.clone(),
                    )?)
                })
                .collect(),
        }
    }

    pub fn build_hamiltonians(&self) -> Result<Vec<ComplexTensor>, LoheError> {
        let shape = self.tensor_shape().map_err(to_lohe)?;
        let d = shape.dims()[0];
        match &self.generators {
            GeneratorSpec::Zero => Ok(vec![ComplexTensor::zeros(shape); self.n]),
            GeneratorSpec::RandomSkewHermitian {
                scale,
                homogeneous,
                diameter,
            } => random_hamiltonians(
                self.n,
                d,
                GeneratorRecipe {
                    scale: *scale,
                    homogeneous: *homogeneous,
                    diameter: *diameter,
                    real: false,
                },
                self.seed,
            ),
            GeneratorSpec::Explicit { entries } => entries
                .iter()
                .map(|e| ComplexTensor::from_entries(shape.clone(), e.clone()))
                .collect(),
        }
    }

    pub fn build_model(&self) -> Result<Model, LoheError> {
        let model = match self.model {
            ModelKind::LoheTensor => Model::lohe_tensor(
                &self.tensor_shape().map_err(to_lohe)?,
                self.build_generators()?,
                self.coupling_vector().map_err(to_lohe)?,
            )?,
            ModelKind::LoheHermitianSphere => Model::LoheHermitianSphere {
                omegas: self.build_generators()?,
                kappa0: self.kappa0().map_err(to_lohe)?,
                kappa1: self.kappa1().map_err(to_lohe)?,
            },
            ModelKind::LoheSphere => Model::LoheSphere {
                omegas: self.build_generators()?,
                kappa0: self.kappa0().map_err(to_lohe)?,
            },
            ModelKind::LoheMatrix => Model::lohe_matrix(
                self.shape[0],
                &self.build_hamiltonians()?,
                self.couplings.kappa.unwrap_or_default(),
            )?,
            ModelKind::SubsystemA => Model::SubsystemA {
                kappa0: self.kappa0().map_err(to_lohe)?,
            },
            ModelKind::SubsystemB => Model::SubsystemB {
                kappa1: self.kappa1().map_err(to_lohe)?,
            },
            ModelKind::KuramotoFrustration => {
                return Err(LoheError::InvalidInput(
                    "the phase model is built with build_simulation".into(),
                ))
            }
        };
        Ok(model)
    }

    pub fn build_simulation(&self) -> Result<Simulation, LoheError> {
        let initial = self.build_initial()?;
        if self.model == ModelKind::KuramotoFrustration {
            let model = build_phase_model(&initial, self.kappa1().map_err(to_lohe)?)?;
            return Ok(Simulation::Phase {
                model,
                reference: initial,
            });
        }
        let model = self.build_model()?;
        model.validate_initial(&initial)?;
        Ok(Simulation::Ensemble { model, initial })
    }

    /// Copy with one parameter replaced.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Result<Self, ConfigError> {
        let mut c = self.clone();
        c.sweep = None;
        let as_count = |field: &str| -> Result<u64, ConfigError> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as u64)
            } else {
                Err(invalid(field, format!("{value} is not a nonnegative integer")))
            }
        };
        match parameter {
            SweepParameter::Kappa0 => c.couplings.kappa0 = Some(value),
            SweepParameter::Kappa1 => c.couplings.kappa1 = Some(value),
            SweepParameter::Kappa => c.couplings.kappa = Some(value),
            SweepParameter::Seed => c.seed = as_count("seed")?,
            SweepParameter::N => c.n = as_count("n")? as usize,
            SweepParameter::TEnd => c.integrator.t_end = value,
            SweepParameter::LambdaTarget | SweepParameter::RhoTarget => match &mut c.initial {
                InitialSpec::Clustered {
                    lambda_target,
                    rho_target,
                    ..
                } => {
                    if parameter == SweepParameter::LambdaTarget {
                        *lambda_target = Some(value);
                        *rho_target = None;
                    } else {
                        *rho_target = Some(value);
                        *lambda_target = None;
                    }
                }
                _ => return Err(invalid("sweep.parameter", "needs clustered initial data")),
            },
            SweepParameter::GeneratorDiameter => match &mut c.generators {
                GeneratorSpec::RandomSkewHermitian {
                    diameter,
                    homogeneous,
                    ..
                } => {
                    *diameter = Some(value);
                    *homogeneous = false;
                }
                _ => {
                    return Err(invalid(
                        "sweep.parameter",
                        "needs random_skew_hermitian generators",
                    ))
                }
            },
        }
        c.validate()?;
        Ok(c)
    }
}

fn to_lohe(e: ConfigError) -> LoheError {
    LoheError::InvalidInput(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": "v1",
        "model": "lohe_hermitian_sphere",
        "n": 2,
        "shape": [1],
        "couplings": {"kappa0": 1.0, "kappa1": 0.0},
        "initial": {"kind": "random"},
        "integrator": {"method": {"kind": "rk4", "dt": 0.01}, "t_end": 1.0, "sample_every": 0.1}
    }"#;

    #[test]
    fn minimal_config_parses() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.n, 2);
        assert_eq!(c.generators, GeneratorSpec::Zero);
        let sim = c.build_simulation().unwrap();
        assert!(matches!(sim, Simulation::Ensemble { .. }));
    }

    #[test]
    fn round_trip_is_stable() {
        let c = parse_config(MINIMAL).unwrap();
        let text = serialize_config(&c);
        assert_eq!(parse_config(&text).unwrap(), c);
        assert_eq!(serialize_config(&parse_config(&text).unwrap()), text);
    }

    #[test]
    fn diagnostics_are_classified() {
        let unknown = MINIMAL.replace("\"kappa0\"", "\"kapa0\"");
        match parse_config(&unknown) {
            Err(ConfigError::UnknownKey { key, line, .. }) => {
                assert_eq!(key, "kapa0");
                assert_eq!(line, 6);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("{\"version\": "),
            Err(ConfigError::Syntax { .. })
        ));
        assert!(matches!(
            parse_config(&MINIMAL.replace("\"n\": 2", "\"n\": \"two\"")),
            Err(ConfigError::TypeMismatch { .. })
        ));
        let negative = MINIMAL.replace("\"kappa0\": 1.0", "\"kappa0\": -1.0");
        assert!(matches!(
            parse_config(&negative),
            Err(ConfigError::Invalid { field, .. }) if field == "couplings.kappa0"
        ));
        assert!(matches!(
            parse_config(&MINIMAL.replace("\"n\": 2", "\"n\": 0")),
            Err(ConfigError::Invalid { field, .. }) if field == "n"
        ));
        assert!(matches!(
            parse_config(&MINIMAL.replace("\"dt\": 0.01", "\"dt\": -0.01")),
            Err(ConfigError::Invalid { field, .. }) if field == "integrator"
        ));
        assert!(matches!(
            parse_config(&MINIMAL.replace("\"v1\"", "\"v2\"")),
            Err(ConfigError::Invalid { field, .. }) if field == "version"
        ));
    }

    #[test]
    fn explicit_data_passes_through() {
        let text = MINIMAL.replace(
            r#"{"kind": "random"}"#,
            r#"{"kind": "explicit", "members": [[[1.0, 0.0]], [[0.0, 1.0]]]}"#,
        );
        let c = parse_config(&text).unwrap();
        let s = c.build_initial().unwrap();
        assert_eq!(s.member(1)[0], Complex64::new(0.0, 1.0));

        let bad = MINIMAL.replace(
            r#"{"kind": "random"}"#,
            r#"{"kind": "explicit", "members": [[[2.0, 0.0]], [[0.0, 1.0]]]}"#,
        );
        assert!(parse_config(&bad).unwrap().build_simulation().is_err());
    }

    #[test]
    fn all_cross_ratio_tuples() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.n = 5;
        c.observables.all_cross_ratios = true;
        assert_eq!(c.cross_ratio_tuples().len(), 120);
    }

    #[test]
    fn sweep_parameter_substitution() {
        let c = parse_config(MINIMAL).unwrap();
        let d = c.with_parameter(SweepParameter::Kappa1, 0.5).unwrap();
        assert_eq!(d.couplings.kappa1, Some(0.5));
        assert!(c.with_parameter(SweepParameter::Kappa0, -1.0).is_err());
        assert!(c.with_parameter(SweepParameter::LambdaTarget, 0.1).is_err());
    }
}
