//! Size-based classification of mobiles into PERSON / GROUP_OF_PERSONS / NOISE.
//!
//! Each class is described per dimension (width, depth, height) by a Gaussian
//! with hard `[min, max]` limits. The score of a mobile for a class is the
//! geometric mean of the three Gaussian responses, or zero when any dimension
//! falls outside the limits.

use thiserror::Error;

use crate::scene::{Mobile, MobileClass, Point3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassModelError {
    #[error("class {0}: sigma must be > 0")]
    NonPositiveSigma(MobileClass),
    #[error("class {0}: expected min <= mean <= max on every dimension")]
    BadRange(MobileClass),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Gaussian parameters of one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionModel {
    pub mean: f64,
    pub sigma: f64,
    pub min: f64,
    pub max: f64,
}

impl DimensionModel {
    fn response(&self, v: f64) -> Option<f64> {
        if v < self.min || v > self.max {
            return None;
        }
        let z = (v - self.mean) / self.sigma;
        Some((-0.5 * z * z).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub class: MobileClass,
    /// Width, depth, height.
    pub dims: [DimensionModel; 3],
}

impl ClassModel {
    pub fn new(
        class: MobileClass,
        mean: Point3,
        sigma: Point3,
        min: Point3,
        max: Point3,
    ) -> Result<Self, ClassModelError> {
        let pick = |p: Point3| [p.x, p.y, p.z];
        let (mean, sigma, min, max) = (pick(mean), pick(sigma), pick(min), pick(max));
        let mut dims = [DimensionModel {
            mean: 0.0,
            sigma: 1.0,
            min: 0.0,
            max: 0.0,
        }; 3];
        for k in 0..3 {
            if !(sigma[k] > 0.0) {
                return Err(ClassModelError::NonPositiveSigma(class));
            }
            if !(min[k] <= mean[k] && mean[k] <= max[k]) {
                return Err(ClassModelError::BadRange(class));
            }
            dims[k] = DimensionModel {
                mean: mean[k],
                sigma: sigma[k],
                min: min[k],
                max: max[k],
            };
        }
        Ok(Self { class, dims })
    }

    pub fn score_size(&self, size: Point3) -> f64 {
        let values = [size.x, size.y, size.z];
        let mut product = 1.0;
        for (dim, v) in self.dims.iter().zip(values) {
            match dim.response(v) {
                Some(r) => product *= r,
                None => return 0.0,
            }
        }
        product.cbrt()
    }
}

pub fn class_score(mobile: &Mobile, model: &ClassModel) -> f64 {
    model.score_size(mobile.size)
}

fn tie_rank(class: MobileClass) -> u8 {
    match class {
        MobileClass::GroupOfPersons => 0,
        MobileClass::Person => 1,
        MobileClass::Noise => 2,
        MobileClass::Unclassified => 3,
    }
}

/// Best-scoring class; NOISE when every score is zero. Exact ties resolve as
/// GROUP_OF_PERSONS, then PERSON, then NOISE.
pub fn classify(mobile: &Mobile, models: &[ClassModel]) -> MobileClass {
    let mut best: Option<(f64, MobileClass)> = None;
    for model in models {
        let s = class_score(mobile, model);
        if s <= 0.0 {
            continue;
        }
        best = match best {
            None => Some((s, model.class)),
            Some((bs, bc)) => {
                if s > bs || (s == bs && tie_rank(model.class) < tie_rank(bc)) {
                    Some((s, model.class))
                } else {
                    Some((bs, bc))
                }
            }
        };
    }
    best.map_or(MobileClass::Noise, |(_, c)| c)
}

pub fn default_class_models() -> Vec<ClassModel> {
    let p = Point3::new;
    vec![
        ClassModel::new(
            MobileClass::Person,
            p(0.5, 0.5, 1.7),
            p(0.2, 0.2, 0.3),
            p(0.2, 0.2, 1.2),
            p(1.0, 1.0, 2.2),
        )
        .expect("valid default"),
        ClassModel::new(
            MobileClass::GroupOfPersons,
            p(1.5, 1.5, 1.7),
            p(0.6, 0.6, 0.3),
            p(0.6, 0.6, 1.2),
            p(3.0, 3.0, 2.2),
        )
        .expect("valid default"),
        ClassModel::new(
            MobileClass::Noise,
            p(0.2, 0.2, 0.3),
            p(0.15, 0.15, 0.3),
            p(0.01, 0.01, 0.01),
            p(0.6, 0.6, 1.2),
        )
        .expect("valid default"),
    ]
}

fn parse_triple(body: &str, key: &str, line: usize) -> Result<Point3, ClassModelError> {
    let syntax = |message: String| ClassModelError::Syntax { line, message };
    let start = body
        .find(&format!("{key}("))
        .ok_or_else(|| syntax(format!("missing {key}(w d h)")))?;
    let rest = &body[start + key.len() + 1..];
    let end = rest
        .find(')')
        .ok_or_else(|| syntax(format!("unclosed {key}(")))?;
    let v: Vec<f64> = rest[..end]
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| syntax(format!("bad number in {key}(...)")))?;
    if v.len() != 3 {
        return Err(syntax(format!("{key}(...) needs 3 values")));
    }
    Ok(Point3::new(v[0], v[1], v[2]))
}

/// Parses one `class <NAME> mean(w d h) sigma(w d h) min(w d h) max(w d h)` line.
pub fn parse_class_line(text: &str, line: usize) -> Result<ClassModel, ClassModelError> {
    let rest = text
        .trim()
        .strip_prefix("class")
        .ok_or_else(|| ClassModelError::Syntax {
            line,
            message: "expected 'class'".into(),
        })?
        .trim_start();
    let (name, body) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    let class = MobileClass::parse(name).ok_or_else(|| ClassModelError::Syntax {
        line,
        message: format!("unknown class '{name}'"),
    })?;
    ClassModel::new(
        class,
        parse_triple(body, "mean", line)?,
        parse_triple(body, "sigma", line)?,
        parse_triple(body, "min", line)?,
        parse_triple(body, "max", line)?,
    )
}
