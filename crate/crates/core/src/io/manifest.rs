//! JSON system manifest referencing Matrix Market and CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use super::{read_csv, read_dense, read_sparse, read_vector, write_dense, write_sparse};
use crate::error::{Error, Result};
use crate::linalg::to_sparse;
use crate::system::{
    validate_system, AffineOperator, DaeSystem, SampledSeries, ScalarProfile, Theta, TimeFunction,
};

pub const MANIFEST_SCHEMA: &str = "uwdae-manifest/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub n: usize,
    #[serde(default)]
    pub param_dim: usize,
    pub horizon: f64,
    #[serde(rename = "E")]
    pub e: String,
    #[serde(rename = "A")]
    pub a: Vec<MatrixTerm>,
    #[serde(default)]
    pub rhs: Vec<RhsEntry>,
    #[serde(default)]
    pub x0: Vec<VectorTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ParameterBox>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixTerm {
    #[serde(default = "Theta::one")]
    pub theta: Theta,
    pub matrix: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSource {
    Inline(Vec<f64>),
    Path(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorTerm {
    #[serde(default = "Theta::one")]
    pub theta: Theta,
    pub vector: VectorSource,
}

/// One right-hand side term: a CSV table `t, f_1..f_n`, or a scalar
/// waveform times a fixed direction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhsEntry {
    Samples {
        #[serde(default = "Theta::one")]
        theta: Theta,
        samples: String,
    },
    Profile {
        #[serde(default = "Theta::one")]
        theta: Theta,
        profile: ScalarProfile,
        direction: VectorSource,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlSpec {
    pub matrix: String,
    #[serde(rename = "Ku")]
    pub ku: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "K")]
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_vector(base: &Path, src: &VectorSource) -> Result<DVector<f64>> {
    match src {
        VectorSource::Inline(v) => Ok(DVector::from_vec(v.clone())),
        VectorSource::Path(p) => read_vector(&resolve(base, p)),
    }
}

fn load_samples(path: &Path, n: usize) -> Result<SampledSeries> {
    let (header, rows) = read_csv(path)?;
    if header.len() != n + 1 {
        return Err(Error::parse(
            path,
            format!(
                "expected columns t, f_1..f_{n}, found {} columns",
                header.len()
            ),
        ));
    }
    let times = rows.iter().map(|r| r[0]).collect();
    let values = rows
        .iter()
        .map(|r| DVector::from_column_slice(&r[1..]))
        .collect();
    SampledSeries::new(times, values).map_err(|e| Error::parse(path, e))
}

/// Parses the manifest and builds the system it describes; structural
/// defects found by [`validate_system`] are reported as invalid input.
pub fn load_manifest(path: &Path) -> Result<(Manifest, DaeSystem)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if m.schema != MANIFEST_SCHEMA {
        return Err(Error::parse(
            path,
            format!(
                "unsupported schema {:?}, expected {MANIFEST_SCHEMA:?}",
                m.schema
            ),
        ));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let e = read_sparse(&resolve(base, &m.e))?;
    if e.nrows() != m.n {
        return Err(Error::dims("E rows vs manifest n", m.n, e.nrows()));
    }
    if m.a.is_empty() {
        return Err(Error::parse(path, "manifest lists no A terms"));
    }
    let mut sys = DaeSystem::new(e, CscMatrix::zeros(m.n, m.n), m.horizon);
    sys.a = AffineOperator::new();
    for t in &m.a {
        sys.a
            .push(t.theta.clone(), read_sparse(&resolve(base, &t.matrix))?);
    }
    for entry in &m.rhs {
        match entry {
            RhsEntry::Samples { theta, samples } => {
                let s = load_samples(&resolve(base, samples), m.n)?;
                sys.rhs.push(theta.clone(), TimeFunction::Samples(s));
            }
            RhsEntry::Profile {
                theta,
                profile,
                direction,
            } => {
                sys.rhs.push(
                    theta.clone(),
                    TimeFunction::Profile {
                        direction: load_vector(base, direction)?,
                        profile: profile.clone(),
                    },
                );
            }
        }
    }
    for t in &m.x0 {
        sys.x0.push(t.theta.clone(), load_vector(base, &t.vector)?);
    }
    sys.param_dim = m.param_dim;
    if let Some(c) = &m.control {
        sys = sys.with_control(read_dense(&resolve(base, &c.matrix))?, c.ku);
    }
    if let Some(c) = &m.output {
        sys = sys.with_output(read_dense(&resolve(base, c))?);
    }
    let diags = validate_system(&sys);
    if !diags.is_empty() {
        let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(Error::InvalidInput(format!(
            "{}: {}",
            path.display(),
            msg.join("; ")
        )));
    }
    if let Some(b) = &m.parameters {
        if b.lower.len() != sys.param_dim || b.upper.len() != sys.param_dim {
            return Err(Error::dims("parameter box", sys.param_dim, b.lower.len()));
        }
    }
    Ok((m, sys))
}

fn check_theta(t: &Theta) -> Result<Theta> {
    if t.is_serializable() {
        Ok(t.clone())
    } else {
        Err(Error::InvalidInput(
            "closure-backed coefficients cannot be written to a manifest".into(),
        ))
    }
}

/// Writes `sys` as `manifest.json` plus payload files into `dir`.
pub fn write_manifest(
    dir: &Path,
    sys: &DaeSystem,
    grid: Option<GridSpec>,
    parameters: Option<ParameterBox>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_sparse(&dir.join("E.mtx"), &sys.e)?;
    let mut a = Vec::new();
    for (q, t) in sys.a.terms().iter().enumerate() {
        let name = format!("A{q}.mtx");
        write_sparse(&dir.join(&name), &t.value)?;
        a.push(MatrixTerm {
            theta: check_theta(&t.theta)?,
            matrix: name,
        });
    }
    let mut rhs = Vec::new();
    for (q, t) in sys.rhs.terms().iter().enumerate() {
        let theta = check_theta(&t.theta)?;
        let inline = |v: &DVector<f64>| VectorSource::Inline(v.iter().copied().collect());
        let entry = match &t.value {
            TimeFunction::Constant(v) => RhsEntry::Profile {
                theta,
                profile: ScalarProfile::Constant { value: 1.0 },
                direction: inline(v),
            },
            TimeFunction::Profile { direction, profile } => RhsEntry::Profile {
                theta,
                profile: profile.clone(),
                direction: inline(direction),
            },
            TimeFunction::Samples(s) => {
                let name = format!("rhs{q}.csv");
                let mut header = vec!["t".to_string()];
                header.extend((1..=s.dim()).map(|i| format!("f_{i}")));
                let rows = s.times().iter().zip(s.values()).map(|(t, v)| {
                    let mut r = vec![*t];
                    r.extend(v.iter());
                    r
                });
                super::write_csv(&dir.join(&name), &header, rows)?;
                RhsEntry::Samples {
                    theta,
                    samples: name,
                }
            }
            other => {
                return Err(Error::UnsupportedSource(format!(
                    "rhs term {q} ({other:?}) has no manifest representation"
                )))
            }
        };
        rhs.push(entry);
    }
    let x0 = sys
        .x0
        .terms()
        .iter()
        .map(|t| {
            Ok(VectorTerm {
                theta: check_theta(&t.theta)?,
                vector: VectorSource::Inline(t.value.iter().copied().collect()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let control = match &sys.control {
        Some(c) => {
            write_dense(&dir.join("B.mtx"), &c.matrix)?;
            Some(ControlSpec {
                matrix: "B.mtx".into(),
                ku: c.intervals,
            })
        }
        None => None,
    };
    let output = match &sys.output {
        Some(c) => {
            write_sparse(&dir.join("C.mtx"), &to_sparse(c))?;
            Some("C.mtx".to_string())
        }
        None => None,
    };
    let m = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        n: sys.n(),
        param_dim: sys.param_dim,
        horizon: sys.horizon,
        e: "E.mtx".into(),
        a,
        rhs,
        x0,
        control,
        output,
        grid,
        parameters,
    };
    let path = dir.join("manifest.json");
    let value = serde_json::to_value(&m).map_err(|e| Error::parse(&path, e))?;
    super::write_json(&path, &value)?;
    Ok(path)
}
