//! Model files: variables, generators and optional grid metadata.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complex::{grid_complex, Complex, Grid};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::table::Schema;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub levels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

/// `{"variables":[{"name","levels"}], "generators":[[names]], "grid":{"rows","cols"}}`.
/// With only `grid` given, the grid graph on binary variables `1..=rows*cols`
/// (column-major) is used.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub generators: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub complex: Complex,
    pub schema: Schema,
}

impl ModelSpec {
    pub fn grid(rows: usize, cols: usize) -> ModelSpec {
        ModelSpec { grid: Some(GridSpec { rows, cols }), ..Default::default() }
    }

    pub fn build(&self) -> Result<Model> {
        let complex = if self.generators.is_empty() {
            let g = self.grid.ok_or_else(|| Error::Config("model needs generators or grid".into()))?;
            let c = grid_complex(g.rows, g.cols)?;
            if !self.variables.is_empty() && self.variables.iter().map(|v| v.name.as_str()).ne(c.vertex_names().iter().map(|s| s.as_str())) {
                return Err(Error::Config("grid variables must be named 1..=rows*cols in column-major order".into()));
            }
            c
        } else {
            let names: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
            let gens: Vec<Vec<&str>> = self.generators.iter().map(|g| g.iter().map(|s| s.as_str()).collect()).collect();
            let c = Complex::new(&names, &gens)?;
            match self.grid {
                Some(g) if g.rows * g.cols != c.n_vertices() => {
                    return Err(Error::Config("grid shape does not match the variable count".into()))
                }
                Some(g) => c.with_grid(Grid { rows: g.rows, cols: g.cols }),
                None => c,
            }
        };
        let levels: Vec<usize> = if self.variables.is_empty() {
            vec![2; complex.n_vertices()]
        } else {
            self.variables.iter().map(|v| v.levels).collect()
        };
        let schema = Schema::with_levels(complex.vertex_names(), &levels)?;
        Ok(Model { complex, schema })
    }
}

impl Model {
    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path)?;
        Model::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Model> {
        serde_json::from_str::<ModelSpec>(text)?.build()
    }

    pub fn design(&self) -> Result<Design> {
        Design::build(&self.complex, &self.schema)
    }

    pub fn spec(&self) -> ModelSpec {
        let levels = self.schema.levels();
        ModelSpec {
            variables: self
                .complex
                .vertex_names()
                .iter()
                .zip(levels)
                .map(|(n, l)| VariableSpec { name: n.clone(), levels: l as usize })
                .collect(),
            generators: self.complex.generators().iter().map(|g| self.complex.names_of(*g)).collect(),
            grid: self.complex.grid().map(|g| GridSpec { rows: g.rows, cols: g.cols }),
        }
    }
}
