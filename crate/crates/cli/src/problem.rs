//! Problem files: a named-object table plus an ordered task list.
//!
//! Matrices are the ground objects. Algebras are declared by generator
//! names; states, maps, and automorphisms attach data to an algebra's
//! declared generator list and are extended linearly to the whole algebra.
//! Tasks reference objects by name; a task with a `name` publishes its
//! matrix outputs under `<name>.<key>` for later tasks.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use hvnm::algebra::{Automorphism, State, VnAlgebra};
use hvnm::cpmap::CpMap;
use hvnm::numlin::{hs_distance, hs_norm, lstsq};
use hvnm::{CMat, CVec, Complex, Tolerance};

use crate::report::MatrixData;

/// Input-side failure: unreadable file, bad syntax, unresolved reference,
/// malformed or inconsistent declarations. All of these map to exit status 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for InputError {}

fn input_err<T>(message: impl Into<String>) -> Result<T, InputError> {
    Err(InputError(message.into()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: String,
    #[serde(default)]
    pub objects: BTreeMap<String, ObjectDecl>,
    pub tasks: Vec<TaskDecl>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectDecl {
    Matrix {
        data: MatrixData,
    },
    Algebra {
        generators: Vec<String>,
    },
    State {
        algebra: String,
        #[serde(default)]
        density: Option<String>,
        #[serde(default)]
        values: Option<Vec<[f64; 2]>>,
    },
    Map {
        source: String,
        target: String,
        images: Vec<String>,
    },
    Automorphism {
        algebra: String,
        images: Vec<String>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskDecl {
    CheckCorner {
        #[serde(default)]
        name: Option<String>,
        vectors: Vec<String>,
    },
    Closure {
        #[serde(default)]
        name: Option<String>,
        seed: Vec<String>,
    },
    Riesz {
        #[serde(default)]
        name: Option<String>,
        corner: Vec<String>,
        values: Vec<String>,
    },
    Dilate {
        #[serde(default)]
        name: Option<String>,
        map: String,
        #[serde(default)]
        state: Option<String>,
    },
    Uniqueness {
        #[serde(default)]
        name: Option<String>,
        map: String,
        state_a: String,
        state_b: String,
    },
    Fuse {
        #[serde(default)]
        name: Option<String>,
        algebra: String,
        first: String,
        second: String,
    },
    DemoJones {
        #[serde(default)]
        name: Option<String>,
        a1: String,
        a2: String,
        #[serde(default)]
        state: Option<String>,
    },
    DemoAuto {
        #[serde(default)]
        name: Option<String>,
        algebra: String,
        automorphism: String,
    },
    Classify {
        #[serde(default)]
        name: Option<String>,
        algebra: String,
        first: String,
        second: String,
    },
}

impl TaskDecl {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskDecl::CheckCorner { .. } => "check-corner",
            TaskDecl::Closure { .. } => "closure",
            TaskDecl::Riesz { .. } => "riesz",
            TaskDecl::Dilate { .. } => "dilate",
            TaskDecl::Uniqueness { .. } => "uniqueness",
            TaskDecl::Fuse { .. } => "fuse",
            TaskDecl::DemoJones { .. } => "demo-jones",
            TaskDecl::DemoAuto { .. } => "demo-auto",
            TaskDecl::Classify { .. } => "classify",
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            TaskDecl::CheckCorner { name, .. }
            | TaskDecl::Closure { name, .. }
            | TaskDecl::Riesz { name, .. }
            | TaskDecl::Dilate { name, .. }
            | TaskDecl::Uniqueness { name, .. }
            | TaskDecl::Fuse { name, .. }
            | TaskDecl::DemoJones { name, .. }
            | TaskDecl::DemoAuto { name, .. }
            | TaskDecl::Classify { name, .. } => name.as_deref(),
        }
    }
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<ProblemFile, InputError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
        let file: ProblemFile = serde_json::from_str(&text)
            .map_err(|e| InputError(format!("cannot parse {}: {e}", path.display())))?;
        if file.version != "1" {
            return input_err(format!(
                "unsupported problem file version '{}', expected '1'",
                file.version
            ));
        }
        file.validate_names()?;
        Ok(file)
    }

    fn validate_names(&self) -> Result<(), InputError> {
        for name in self.objects.keys() {
            validate_name(name, "object")?;
        }
        let mut seen = BTreeMap::new();
        for decl in &self.tasks {
            if let Some(name) = decl.name() {
                validate_name(name, "task")?;
                if seen.insert(name.to_string(), ()).is_some() {
                    return input_err(format!("duplicate task name '{name}'"));
                }
                if self.objects.contains_key(name) {
                    return input_err(format!(
                        "task name '{name}' collides with an object of the same name"
                    ));
                }
            }
        }
        Ok(())
    }
}

fn validate_name(name: &str, what: &str) -> Result<(), InputError> {
    if name.is_empty() {
        return input_err(format!("empty {what} name"));
    }
    if name.contains('.') {
        return input_err(format!(
            "{what} name '{name}' contains '.', which is reserved for task outputs"
        ));
    }
    Ok(())
}

pub fn decode_matrix(name: &str, data: &MatrixData) -> Result<CMat, InputError> {
    let rows = data.len();
    let cols = data.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return input_err(format!("matrix '{name}' is empty"));
    }
    if data.iter().any(|row| row.len() != cols) {
        return input_err(format!(
            "matrix '{name}' is ragged: all rows must have {cols} entries"
        ));
    }
    Ok(CMat::from_fn(rows, cols, |r, c| {
        Complex::new(data[r][c][0], data[r][c][1])
    }))
}

pub fn encode_matrix(m: &CMat) -> MatrixData {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

/// An algebra together with the generator list it was declared by; data for
/// states, maps, and automorphisms is given per declared generator.
pub struct AlgebraEntry {
    pub algebra: VnAlgebra,
    pub generators: Vec<CMat>,
}

pub struct Objects {
    pub tol: Tolerance,
    pub matrices: BTreeMap<String, CMat>,
    pub algebras: BTreeMap<String, AlgebraEntry>,
    pub states: BTreeMap<String, State>,
    pub maps: BTreeMap<String, CpMap>,
    pub autos: BTreeMap<String, Automorphism>,
}

impl Objects {
    pub fn build(file: &ProblemFile, tol: Tolerance) -> Result<Objects, InputError> {
        let mut objects = Objects {
            tol,
            matrices: BTreeMap::new(),
            algebras: BTreeMap::new(),
            states: BTreeMap::new(),
            maps: BTreeMap::new(),
            autos: BTreeMap::new(),
        };
        for (name, decl) in &file.objects {
            if let ObjectDecl::Matrix { data } = decl {
                let m = decode_matrix(name, data)?;
                objects.matrices.insert(name.clone(), m);
            }
        }
        for (name, decl) in &file.objects {
            if let ObjectDecl::Algebra { generators } = decl {
                let gens = objects.matrices_named(generators)?;
                let algebra = VnAlgebra::closure(&gens, tol)
                    .map_err(|e| InputError(format!("algebra '{name}': {e}")))?;
                objects.algebras.insert(
                    name.clone(),
                    AlgebraEntry {
                        algebra,
                        generators: gens,
                    },
                );
            }
        }
        for (name, decl) in &file.objects {
            match decl {
                ObjectDecl::Matrix { .. } | ObjectDecl::Algebra { .. } => {}
                ObjectDecl::State {
                    algebra,
                    density,
                    values,
                } => {
                    let state = objects.build_state(name, algebra, density, values)?;
                    objects.states.insert(name.clone(), state);
                }
                ObjectDecl::Map {
                    source,
                    target,
                    images,
                } => {
                    let entry = objects.algebra(source)?;
                    let declared = objects.matrices_named(images)?;
                    let basis_images = extend_to_basis(name, entry, &declared, tol)?;
                    let target = objects.algebra(target)?.algebra.clone();
                    let map =
                        CpMap::new(entry.algebra.clone(), target, basis_images)
                            .map_err(|e| InputError(format!("map '{name}': {e}")))?;
                    objects.maps.insert(name.clone(), map);
                }
                ObjectDecl::Automorphism { algebra, images } => {
                    let entry = objects.algebra(algebra)?;
                    let declared = objects.matrices_named(images)?;
                    let basis_images = extend_to_basis(name, entry, &declared, tol)?;
                    let auto = Automorphism::new(&entry.algebra, basis_images)
                        .map_err(|e| InputError(format!("automorphism '{name}': {e}")))?;
                    objects.autos.insert(name.clone(), auto);
                }
            }
        }
        Ok(objects)
    }

    fn build_state(
        &self,
        name: &str,
        algebra: &str,
        density: &Option<String>,
        values: &Option<Vec<[f64; 2]>>,
    ) -> Result<State, InputError> {
        let entry = self.algebra(algebra)?;
        match (density, values) {
            (Some(rho), None) => {
                let rho = self.matrix(rho)?;
                State::from_density(entry.algebra.clone(), rho)
                    .map_err(|e| InputError(format!("state '{name}': {e}")))
            }
            (None, Some(values)) => {
                let declared: Vec<CMat> = values
                    .iter()
                    .map(|[re, im]| CMat::from_element(1, 1, Complex::new(*re, *im)))
                    .collect();
                let on_basis = extend_to_basis(name, entry, &declared, self.tol)?;
                let values = CVec::from_iterator(on_basis.len(), on_basis.iter().map(|m| m[(0, 0)]));
                State::on_basis(entry.algebra.clone(), values)
                    .map_err(|e| InputError(format!("state '{name}': {e}")))
            }
            _ => input_err(format!(
                "state '{name}' must declare exactly one of 'density' or 'values'"
            )),
        }
    }

    pub fn matrix(&self, name: &str) -> Result<&CMat, InputError> {
        self.matrices.get(name).ok_or_else(|| {
            InputError(format!(
                "unresolved reference '{name}': no matrix object or task output with that name"
            ))
        })
    }

    pub fn matrices_named(&self, names: &[String]) -> Result<Vec<CMat>, InputError> {
        names.iter().map(|n| self.matrix(n).cloned()).collect()
    }

    pub fn algebra(&self, name: &str) -> Result<&AlgebraEntry, InputError> {
        self.algebras.get(name).ok_or_else(|| {
            InputError(format!("unresolved reference '{name}': no algebra with that name"))
        })
    }

    pub fn state(&self, name: &str) -> Result<&State, InputError> {
        self.states.get(name).ok_or_else(|| {
            InputError(format!("unresolved reference '{name}': no state with that name"))
        })
    }

    pub fn map(&self, name: &str) -> Result<&CpMap, InputError> {
        self.maps.get(name).ok_or_else(|| {
            InputError(format!("unresolved reference '{name}': no map with that name"))
        })
    }

    pub fn auto(&self, name: &str) -> Result<&Automorphism, InputError> {
        self.autos.get(name).ok_or_else(|| {
            InputError(format!(
                "unresolved reference '{name}': no automorphism with that name"
            ))
        })
    }

    pub fn publish(&mut self, task_name: &str, key: &str, matrix: CMat) {
        self.matrices.insert(format!("{task_name}.{key}"), matrix);
    }
}

fn flatten(m: &CMat) -> CMat {
    CMat::from_column_slice(m.len(), 1, m.as_slice())
}

/// Extend per-generator data to the algebra's internal basis. The declared
/// generators must span the algebra, and on linearly dependent generators
/// the data must be consistent with linearity.
fn extend_to_basis(
    name: &str,
    entry: &AlgebraEntry,
    data: &[CMat],
    tol: Tolerance,
) -> Result<Vec<CMat>, InputError> {
    let gens = &entry.generators;
    if data.len() != gens.len() {
        return input_err(format!(
            "'{name}' attaches {} items to {} declared generators",
            data.len(),
            gens.len()
        ));
    }
    if gens.is_empty() {
        return input_err(format!("'{name}' needs at least one generator"));
    }
    let ambient = gens[0].len();
    let mut stacked = CMat::zeros(ambient, gens.len());
    for (i, g) in gens.iter().enumerate() {
        stacked.set_column(i, &flatten(g).column(0));
    }
    let (rows, cols) = data[0].shape();
    let mut images = Vec::with_capacity(entry.algebra.dim());
    for b in entry.algebra.basis() {
        let rhs = flatten(b);
        let coeffs = lstsq(&stacked, &rhs, tol)
            .map_err(|e| InputError(format!("'{name}': {e}")))?;
        let residual = hs_distance(&(&stacked * &coeffs), &rhs);
        if residual > tol.residual_for(hs_norm(b)) {
            return input_err(format!(
                "'{name}': the declared generators span only part of the algebra \
                 (residual {residual:.3e}), so per-generator data cannot determine it"
            ));
        }
        let mut image = CMat::zeros(rows, cols);
        for (i, d) in data.iter().enumerate() {
            image += d * coeffs[(i, 0)];
        }
        images.push(image);
    }
    for (i, g) in gens.iter().enumerate() {
        let coords = entry
            .algebra
            .space()
            .coords(g)
            .map_err(|e| InputError(format!("'{name}': {e}")))?;
        let mut reconstructed = CMat::zeros(rows, cols);
        for (k, image) in images.iter().enumerate() {
            reconstructed += image * coords[k];
        }
        let defect = hs_distance(&reconstructed, &data[i]);
        if defect > tol.residual_for(hs_norm(&data[i])) {
            return input_err(format!(
                "'{name}': data on generator {i} is inconsistent with linearity \
                 (defect {defect:.3e}); dependent generators must carry dependent data"
            ));
        }
    }
    Ok(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ProblemFile, InputError> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| InputError(e.to_string()))?;
        file.validate_names()?;
        Ok(file)
    }

    #[test]
    fn minimal_file_parses_and_builds() {
        let text = r#"{
            "version": "1",
            "objects": {
                "x": {"kind": "matrix", "data": [[[1,0],[0,0]],[[0,0],[1,0]]]}
            },
            "tasks": [{"task": "check-corner", "vectors": ["x"]}]
        }"#;
        let file = parse(text).unwrap();
        let objects = Objects::build(&file, Tolerance::default()).unwrap();
        let x = objects.matrix("x").unwrap();
        assert_eq!(x.shape(), (2, 2));
        assert_eq!(x[(1, 1)], Complex::new(1.0, 0.0));
    }

    #[test]
    fn unresolved_references_are_input_errors() {
        let text = r#"{
            "version": "1",
            "objects": {
                "a": {"kind": "algebra", "generators": ["ghost"]}
            },
            "tasks": []
        }"#;
        let file = parse(text).unwrap();
        let err = match Objects::build(&file, Tolerance::default()) {
            Ok(_) => panic!("build must fail on the dangling generator"),
            Err(e) => e,
        };
        assert!(err.to_string().contains("unresolved reference 'ghost'"));
    }

    #[test]
    fn ragged_matrices_are_rejected() {
        let data: MatrixData = vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0]]];
        let err = decode_matrix("m", &data).unwrap_err();
        assert!(err.to_string().contains("ragged"));
    }

    #[test]
    fn generator_data_extends_linearly() {
        let e11 = CMat::from_fn(2, 2, |r, c| {
            Complex::new(if r == 0 && c == 0 { 1.0 } else { 0.0 }, 0.0)
        });
        let e22 = CMat::from_fn(2, 2, |r, c| {
            Complex::new(if r == 1 && c == 1 { 1.0 } else { 0.0 }, 0.0)
        });
        let tol = Tolerance::default();
        let algebra = VnAlgebra::closure(&[e11.clone(), e22.clone()], tol).unwrap();
        let entry = AlgebraEntry {
            algebra,
            generators: vec![e11.clone(), e22.clone()],
        };
        let images = extend_to_basis("id", &entry, &[e11.clone(), e22.clone()], tol).unwrap();
        for (b, img) in entry.algebra.basis().iter().zip(&images) {
            assert!(hs_distance(b, img) < 1e-12);
        }
        let short = extend_to_basis("id", &entry, &[e11.clone()], tol);
        assert!(short.is_err());
    }
}
