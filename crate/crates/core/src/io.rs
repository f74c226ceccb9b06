//! JSON file formats: system descriptions, plant/controller interconnections
//! and result documents.

use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interconnect::{closed_loop_template, ControllerStructure, DelayedTerm, MatrixPattern, ParametricDdae, PlantModel};
use crate::system::{DdaeSystem, DelayVector};

/// Row-major nested arrays.
pub type Rows = Vec<Vec<f64>>;

pub fn to_array(rows: &Rows) -> Result<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Array2::from_shape_vec((r, c), rows.iter().flatten().copied().collect()).map_err(|e| Error::Dimension(e.to_string()))
}

/// Like [`to_array`] but with known shape, so empty blocks can be written `[]`.
fn to_array_dims(rows: &Rows, r: usize, c: usize) -> Result<Array2<f64>> {
    if r * c == 0 && rows.iter().all(|row| row.is_empty()) {
        return Ok(Array2::zeros((r, c)));
    }
    let a = to_array(rows)?;
    if a.dim() != (r, c) {
        return Err(Error::Dimension(format!("matrix is {:?}, expected ({r}, {c})", a.dim())));
    }
    Ok(a)
}

pub fn from_array(a: &Array2<f64>) -> Rows {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    #[serde(rename = "E")]
    pub e: Rows,
    #[serde(default)]
    pub delays: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
}

impl SystemFile {
    pub fn to_system(&self) -> Result<DdaeSystem> {
        let e = to_array(&self.e)?;
        if e.dim() != (self.n, self.n) {
            return Err(Error::Dimension(format!("E is {:?} but n = {}", e.dim(), self.n)));
        }
        let a = self.a.iter().map(to_array).collect::<Result<Vec<_>>>()?;
        DdaeSystem::new(e, a, to_array(&self.b)?, to_array(&self.c)?, DelayVector::new(self.delays.clone())?)
    }

    pub fn from_system(sys: &DdaeSystem) -> Self {
        Self {
            n: sys.n(),
            e: from_array(sys.e()),
            delays: sys.delays().as_slice().to_vec(),
            a: sys.a().iter().map(from_array).collect(),
            b: from_array(sys.b()),
            c: from_array(sys.c()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    #[serde(default)]
    pub delay: f64,
    pub matrix: Rows,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    #[serde(rename = "A")]
    pub a: Vec<TermFile>,
    #[serde(rename = "H", default, skip_serializing_if = "Vec::is_empty")]
    pub h: Vec<TermFile>,
    #[serde(rename = "Bw", default, skip_serializing_if = "Vec::is_empty")]
    pub bw: Vec<TermFile>,
    #[serde(rename = "Bu")]
    pub bu: Vec<TermFile>,
    #[serde(rename = "Cz")]
    pub cz: Vec<TermFile>,
    #[serde(rename = "Dzw", default, skip_serializing_if = "Vec::is_empty")]
    pub dzw: Vec<TermFile>,
    #[serde(rename = "Dzu", default, skip_serializing_if = "Vec::is_empty")]
    pub dzu: Vec<TermFile>,
    #[serde(rename = "Cy")]
    pub cy: Vec<TermFile>,
    #[serde(rename = "Dyw", default, skip_serializing_if = "Vec::is_empty")]
    pub dyw: Vec<TermFile>,
    #[serde(rename = "Dyu", default, skip_serializing_if = "Vec::is_empty")]
    pub dyu: Vec<TermFile>,
}

fn terms(list: &[TermFile]) -> Result<Vec<DelayedTerm>> {
    list.iter().map(|t| Ok(DelayedTerm::new(t.delay, to_array(&t.matrix)?))).collect()
}

fn term_files(list: &[DelayedTerm]) -> Vec<TermFile> {
    list.iter().map(|t| TermFile { delay: t.delay, matrix: from_array(&t.matrix) }).collect()
}

impl PlantFile {
    pub fn to_plant(&self) -> Result<PlantModel> {
        let plant = PlantModel {
            neutral: terms(&self.h)?,
            a: terms(&self.a)?,
            b_w: terms(&self.bw)?,
            b_u: terms(&self.bu)?,
            c_z: terms(&self.cz)?,
            d_zw: terms(&self.dzw)?,
            d_zu: terms(&self.dzu)?,
            c_y: terms(&self.cy)?,
            d_yw: terms(&self.dyw)?,
            d_yu: terms(&self.dyu)?,
        };
        plant.dims()?;
        Ok(plant)
    }

    pub fn from_plant(p: &PlantModel) -> Self {
        Self {
            a: term_files(&p.a),
            h: term_files(&p.neutral),
            bw: term_files(&p.b_w),
            bu: term_files(&p.b_u),
            cz: term_files(&p.c_z),
            dzw: term_files(&p.d_zw),
            dzu: term_files(&p.d_zu),
            cy: term_files(&p.c_y),
            dyw: term_files(&p.d_yw),
            dyu: term_files(&p.d_yu),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerBlocks<T> {
    #[serde(rename = "Ac", default, skip_serializing_if = "Option::is_none")]
    pub ac: Option<T>,
    #[serde(rename = "Bc", default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<T>,
    #[serde(rename = "Cc", default, skip_serializing_if = "Option::is_none")]
    pub cc: Option<T>,
    #[serde(rename = "Dc", default, skip_serializing_if = "Option::is_none")]
    pub dc: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerFile {
    #[serde(default)]
    pub order: usize,
    /// `true` marks a free entry. Missing blocks are entirely free.
    #[serde(default)]
    pub mask: ControllerBlocks<Vec<Vec<bool>>>,
    /// Values of the fixed entries. Missing blocks are zero.
    #[serde(default)]
    pub fixed_values: ControllerBlocks<Rows>,
    /// At most one entry: a delay on the controller input `y`.
    #[serde(default)]
    pub controller_delays: Vec<f64>,
}

impl ControllerFile {
    pub fn to_structure(&self, n_u: usize, n_y: usize) -> Result<ControllerStructure> {
        let k = self.order;
        let pattern = |mask: &Option<Vec<Vec<bool>>>, fixed: &Option<Rows>, r: usize, c: usize, name: &str| -> Result<MatrixPattern> {
            let free = match mask {
                None => Array2::from_elem((r, c), true),
                Some(m) if r * c == 0 && m.iter().all(|row| row.is_empty()) => Array2::from_elem((r, c), true),
                Some(m) => {
                    if m.len() != r || m.iter().any(|row| row.len() != c) {
                        return Err(Error::Dimension(format!("controller mask {name} must be ({r}, {c})")));
                    }
                    Array2::from_shape_fn((r, c), |(i, j)| m[i][j])
                }
            };
            let fixed = match fixed {
                None => Array2::zeros((r, c)),
                Some(f) => to_array_dims(f, r, c).map_err(|_| Error::Dimension(format!("controller fixed_values {name} must be ({r}, {c})")))?,
            };
            Ok(MatrixPattern { free, fixed })
        };
        let mut s = ControllerStructure {
            order: k,
            n_u,
            n_y,
            ac: pattern(&self.mask.ac, &self.fixed_values.ac, k, k, "Ac")?,
            bc: pattern(&self.mask.bc, &self.fixed_values.bc, k, n_y, "Bc")?,
            cc: pattern(&self.mask.cc, &self.fixed_values.cc, n_u, k, "Cc")?,
            dc: pattern(&self.mask.dc, &self.fixed_values.dc, n_u, n_y, "Dc")?,
            input_delay: None,
        };
        match self.controller_delays.as_slice() {
            [] => {}
            [t] => s.input_delay = Some(*t),
            _ => return Err(Error::Invalid("controller_delays supports a single input delay".into())),
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterconnectionFile {
    pub plant: PlantFile,
    #[serde(default)]
    pub controller: ControllerFile,
    /// Controller parameters for analysis commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    /// Extra starting points for synthesis.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_points: Vec<Vec<f64>>,
}

impl InterconnectionFile {
    pub fn plant(&self) -> Result<PlantModel> {
        self.plant.to_plant()
    }

    pub fn structure(&self) -> Result<ControllerStructure> {
        let dims = self.plant()?.dims()?;
        self.controller.to_structure(dims.n_u, dims.n_y)
    }

    pub fn template(&self) -> Result<ParametricDdae> {
        closed_loop_template(&self.plant()?, &self.structure()?)
    }
}

/// Either kind of input document.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum InputFile {
    System(SystemFile),
    Interconnection(InterconnectionFile),
}

impl InputFile {
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("plant").is_some() {
            Ok(Self::Interconnection(serde_json::from_value(value)?))
        } else {
            Ok(Self::System(serde_json::from_value(value)?))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
