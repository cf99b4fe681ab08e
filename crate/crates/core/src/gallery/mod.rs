//! Built-in example systems and their bespoke checks.
//!
//! | name | kind | system |
//! |------|------|--------|
//! | `E1_noncompact` | germs, `m = 1` | `lambda z + a_i z^2`, `a_i = lambda^{-3 * 2^i}`, `P(i) = 2^{-i}` |
//! | `E2_semineutral_germs` | germs, `m = 2` | `(z, w/2)` and `(z + zw, w)`, each with probability 1/2 |
//! | `E3_neutral_adversarial` | germs, `m = 1` | `lambda (z + z^2)` and `lambda (z - z^2)`, `lambda = e^{2 pi i alpha}` |
//! | `L1_linear_semineutral` | matrices | `[[1/2, 0], [0, 1]]` and `[[1/2, 1], [0, 1]]` |
//! | `L2_linear_semineutral_variant` | matrices | `[[1, 0], [0, 1/2]]` and `[[1, 1], [0, 1/2]]` |
//! | `R1_rotation_simple` | rotation | `M(x) = T(x) / x` |
//! | `R2_rotation_continuous` | rotation | `M = exp(sum_{k <= K} f_k)` |
//!
//! Every example serializes to a file that rebuilds it: finite ensembles as
//! explicit atoms, `E1`, `R1`, `R2` as `{"generator": {"family": .., ..}}`.
//!
//! ```
//! use randlocal::gallery::{build_example, Example, ExampleId};
//!
//! let Example::Cocycle(spec) = build_example(&ExampleId::L1).unwrap() else { panic!() };
//! assert!((spec.expected_log_det() + 2f64.ln()).abs() < 1e-15);
//! ```

mod adversarial;
mod brjuno;
mod e1;
mod rotation;

pub use adversarial::{adversarial_orbit, AdversarialOrbit};
pub use brjuno::{brjuno_log_space, brjuno_partial_sum, partial_quotients, BrjunoLogReport, BrjunoReport};
pub use e1::{
    e1_blowup_statistics, e1_blowup_statistics_capped, e1_coefficient, e1_index_weights, e1_log_coefficient, e1_second_coefficient,
    e1_tail_probability, e1_truncation_distance, second_coefficient_from_coefficients, second_coefficient_log,
    second_coefficient_recursion, BlowupStats, SecondCoefficient, TailEstimate, DEFAULT_CAP,
};
pub use rotation::{
    coboundary_driver, level_length, rotation_cocycle_eval, rotation_spec, RotationConstruction, RotationEval,
    RotationLevel, MAX_DEPTH as ROTATION_MAX_DEPTH,
};

use num_complex::Complex64;
use serde_json::Value;
use thiserror::Error;

use crate::cocycle::{CocycleError, CocycleSpec, MatrixEnsemble, MatrixEnsembleRecord};
use crate::germ_dynamics::{GermEnsemble, GermError, IndexedFamily, DEFAULT_ESCAPE_RADIUS};
use crate::jets::{Jet, DEFAULT_DEGREE};
use crate::linalg::{c, real_matrix};

/// `(sqrt 5 - 1) / 2`.
pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_9;
pub const DEFAULT_ROTATION_DEPTH: u32 = 10;

#[derive(Debug, Error)]
pub enum GalleryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown example {0:?}")]
    UnknownExample(String),
    #[error("no separating width at level k = {k} for theta = {theta}")]
    Separation { k: u32, theta: f64 },
    #[error(transparent)]
    Germ(#[from] GermError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid ensemble text: {0}")]
    Syntax(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExampleId {
    E1 { lambda1: f64, cap: u32 },
    E2,
    E3 { alpha: f64 },
    L1,
    L2,
    R1 { theta: f64 },
    R2 { theta: f64, depth: u32 },
}

impl ExampleId {
    pub const NAMES: [&'static str; 7] = [
        "E1_noncompact",
        "E2_semineutral_germs",
        "E3_neutral_adversarial",
        "L1_linear_semineutral",
        "L2_linear_semineutral_variant",
        "R1_rotation_simple",
        "R2_rotation_continuous",
    ];

    pub fn name(&self) -> &'static str {
        Self::NAMES[match self {
            ExampleId::E1 { .. } => 0,
            ExampleId::E2 => 1,
            ExampleId::E3 { .. } => 2,
            ExampleId::L1 => 3,
            ExampleId::L2 => 4,
            ExampleId::R1 { .. } => 5,
            ExampleId::R2 { .. } => 6,
        }]
    }

    /// Accepts the full name or its two-character prefix, case-insensitively;
    /// parameters take their defaults.
    pub fn from_name(name: &str) -> Result<ExampleId, GalleryError> {
        let key = name.to_ascii_uppercase();
        let short = key.get(..2).unwrap_or("");
        let known = Self::NAMES.iter().any(|n| n.eq_ignore_ascii_case(name)) || key.len() == 2;
        let id = match short {
            "E1" => ExampleId::E1 { lambda1: 0.5, cap: DEFAULT_CAP },
            "E2" => ExampleId::E2,
            "E3" => ExampleId::E3 { alpha: GOLDEN_MEAN },
            "L1" => ExampleId::L1,
            "L2" => ExampleId::L2,
            "R1" => ExampleId::R1 { theta: GOLDEN_MEAN },
            "R2" => ExampleId::R2 { theta: GOLDEN_MEAN, depth: DEFAULT_ROTATION_DEPTH },
            _ => return Err(GalleryError::UnknownExample(name.into())),
        };
        if !known {
            return Err(GalleryError::UnknownExample(name.into()));
        }
        Ok(id)
    }

    /// Name plus parameters from a `generator` object; absent fields keep
    /// their defaults.
    pub fn from_generator(generator: &Value) -> Result<ExampleId, GalleryError> {
        let family = generator
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| GalleryError::Schema("generator needs a string \"family\"".into()))?;
        let num = |key: &str| -> Result<Option<f64>, GalleryError> {
            match generator.get(key) {
                None => Ok(None),
                Some(v) => v.as_f64().map(Some).ok_or_else(|| GalleryError::Schema(format!("{key} must be a number"))),
            }
        };
        let int = |key: &str| -> Result<Option<u32>, GalleryError> {
            match generator.get(key) {
                None => Ok(None),
                Some(v) => v
                    .as_u64()
                    .and_then(|x| u32::try_from(x).ok())
                    .map(Some)
                    .ok_or_else(|| GalleryError::Schema(format!("{key} must be a nonnegative integer"))),
            }
        };
        let mut id = ExampleId::from_name(family)?;
        match &mut id {
            ExampleId::E1 { lambda1, cap } => {
                *lambda1 = num("lambda1")?.unwrap_or(*lambda1);
                *cap = int("cap")?.unwrap_or(*cap);
            }
            ExampleId::E3 { alpha } => *alpha = num("alpha")?.unwrap_or(*alpha),
            ExampleId::R1 { theta } => *theta = num("theta")?.unwrap_or(*theta),
            ExampleId::R2 { theta, depth } => {
                *theta = num("theta")?.unwrap_or(*theta);
                *depth = int("depth")?.or(int("K")?).unwrap_or(*depth);
            }
            _ => {}
        }
        Ok(id)
    }

    pub fn validate(&self) -> Result<(), GalleryError> {
        let bad = |m: &str| Err(GalleryError::InvalidParameter(m.into()));
        match *self {
            ExampleId::E1 { lambda1, cap } => {
                if !(lambda1 > 0.0 && lambda1 < 1.0) {
                    return bad("lambda1 must lie in (0, 1)");
                }
                if cap == 0 || cap > 1000 {
                    return bad("index cap must lie in 1..=1000");
                }
            }
            ExampleId::E3 { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return bad("alpha must lie in (0, 1)");
                }
            }
            ExampleId::R1 { theta } => rotation::validate_angle(theta)?,
            ExampleId::R2 { theta, depth } => {
                rotation::validate_angle(theta)?;
                if depth == 0 || depth > ROTATION_MAX_DEPTH {
                    return bad("depth must lie in 1..=12");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Example {
    Germ(GermEnsemble),
    Cocycle(CocycleSpec),
}

impl Example {
    /// File form that rebuilds the example through [`load_example_json`].
    pub fn to_json(&self) -> Value {
        match self {
            Example::Germ(g) => g.to_json(),
            Example::Cocycle(CocycleSpec::Iid(e)) => serde_json::to_value(e.to_record()).unwrap_or(Value::Null),
            Example::Cocycle(CocycleSpec::Rotation(r)) => r.generator.clone().unwrap_or(Value::Null),
        }
    }
}

fn jet(dim: usize, components: &[Vec<(Vec<u32>, Complex64)>]) -> Jet {
    Jet::from_terms(dim, DEFAULT_DEGREE, components).expect("built-in jets are well formed")
}

/// `f_i(z) = lambda z + a_i z^2` for `i = 1..=cap`; `a_i` beyond the double
/// range is stored as `+inf`.
pub fn e1_ensemble(lambda1: f64, cap: u32) -> Result<GermEnsemble, GalleryError> {
    ExampleId::E1 { lambda1, cap }.validate()?;
    let weights = e1_index_weights(cap);
    let atoms = (1..=cap)
        .zip(weights)
        .map(|(i, w)| {
            let a = e1_coefficient(i, lambda1);
            (jet(1, &[vec![(vec![1], c(lambda1, 0.0)), (vec![2], c(a, 0.0))]]), w)
        })
        .collect();
    let family = IndexedFamily {
        family: ExampleId::NAMES[0].into(),
        params: serde_json::json!({ "lambda1": lambda1, "cap": cap }),
        first_index: 1,
        cap,
        tv_distance: e1_truncation_distance(cap),
    };
    Ok(GermEnsemble::indexed(atoms, DEFAULT_ESCAPE_RADIUS, family)?)
}

pub fn e2_ensemble() -> GermEnsemble {
    let f = jet(2, &[vec![(vec![1, 0], c(1.0, 0.0))], vec![(vec![0, 1], c(0.5, 0.0))]]);
    let g = jet(
        2,
        &[vec![(vec![1, 0], c(1.0, 0.0)), (vec![1, 1], c(1.0, 0.0))], vec![(vec![0, 1], c(1.0, 0.0))]],
    );
    GermEnsemble::new(vec![(f, 0.5), (g, 0.5)], DEFAULT_ESCAPE_RADIUS).expect("valid ensemble")
}

pub fn e3_ensemble(alpha: f64) -> Result<GermEnsemble, GalleryError> {
    ExampleId::E3 { alpha }.validate()?;
    let lambda = Complex64::from_polar(1.0, std::f64::consts::TAU * alpha);
    let f1 = jet(1, &[vec![(vec![1], lambda), (vec![2], lambda)]]);
    let f2 = jet(1, &[vec![(vec![1], lambda), (vec![2], -lambda)]]);
    Ok(GermEnsemble::new(vec![(f1, 0.5), (f2, 0.5)], DEFAULT_ESCAPE_RADIUS)?)
}

pub fn l1_ensemble() -> MatrixEnsemble {
    MatrixEnsemble::uniform(vec![real_matrix(&[&[0.5, 0.0], &[0.0, 1.0]]), real_matrix(&[&[0.5, 1.0], &[0.0, 1.0]])])
        .expect("valid ensemble")
}

pub fn l2_ensemble() -> MatrixEnsemble {
    MatrixEnsemble::uniform(vec![real_matrix(&[&[1.0, 0.0], &[0.0, 0.5]]), real_matrix(&[&[1.0, 1.0], &[0.0, 0.5]])])
        .expect("valid ensemble")
}

pub fn build_example(id: &ExampleId) -> Result<Example, GalleryError> {
    id.validate()?;
    Ok(match *id {
        ExampleId::E1 { lambda1, cap } => Example::Germ(e1_ensemble(lambda1, cap)?),
        ExampleId::E2 => Example::Germ(e2_ensemble()),
        ExampleId::E3 { alpha } => Example::Germ(e3_ensemble(alpha)?),
        ExampleId::L1 => Example::Cocycle(CocycleSpec::Iid(l1_ensemble())),
        ExampleId::L2 => Example::Cocycle(CocycleSpec::Iid(l2_ensemble())),
        ExampleId::R1 { theta } => Example::Cocycle(CocycleSpec::Rotation(coboundary_driver(theta)?)),
        ExampleId::R2 { theta, depth } => Example::Cocycle(rotation_spec(theta, depth)?),
    })
}

/// Rebuild an example or ensemble from its file form. Explicit atoms carrying
/// `"matrix"` give a matrix ensemble, atoms carrying `"map"` a germ ensemble.
pub fn load_example_json(value: &Value) -> Result<Example, GalleryError> {
    if let Some(generator) = value.get("generator") {
        let mut example = build_example(&ExampleId::from_generator(generator)?)?;
        if let (Example::Germ(g), Some(r)) = (&mut example, value.get("R")) {
            let r = r.as_f64().ok_or_else(|| GalleryError::Schema("R must be a number".into()))?;
            if !(r > 0.0) {
                return Err(GalleryError::InvalidParameter("escape radius must be positive".into()));
            }
            *g = g.clone().with_escape_radius(r);
        }
        return Ok(example);
    }
    let first = value
        .get("atoms")
        .and_then(Value::as_array)
        .and_then(|a| a.first())
        .ok_or_else(|| GalleryError::Schema("expected a \"generator\" or a nonempty \"atoms\" list".into()))?;
    if first.get("matrix").is_some() {
        let record: MatrixEnsembleRecord = serde_json::from_value(value.clone())?;
        Ok(Example::Cocycle(CocycleSpec::Iid(MatrixEnsemble::from_record(&record)?)))
    } else if first.get("map").is_some() {
        Ok(Example::Germ(GermEnsemble::from_atoms_json(value)?))
    } else {
        Err(GalleryError::Schema("atoms need a \"matrix\" or a \"map\" field".into()))
    }
}

pub fn load_example_str(text: &str) -> Result<Example, GalleryError> {
    load_example_json(&serde_json::from_str(text)?)
}

pub fn germ_ensemble_from_json(value: &Value) -> Result<GermEnsemble, GalleryError> {
    match load_example_json(value)? {
        Example::Germ(g) => Ok(g),
        Example::Cocycle(_) => Err(GalleryError::Schema("expected a germ ensemble".into())),
    }
}

pub fn cocycle_spec_from_json(value: &Value) -> Result<CocycleSpec, GalleryError> {
    match load_example_json(value)? {
        Example::Cocycle(s) => Ok(s),
        Example::Germ(_) => Err(GalleryError::Schema("expected a matrix cocycle".into())),
    }
}
