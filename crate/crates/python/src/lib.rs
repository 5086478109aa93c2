//! Python bindings: `import pyfpgp`.

use std::path::PathBuf;

use fingerprint_gp as fp;
use fp::matching::{Kind, KindOutcome};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: fp::Error) -> PyErr {
    match e {
        fp::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for fp::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Expression tree over named variables.
#[pyclass(name = "ProgramTree", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProgramTree {
    tree: fp::ProgramTree,
    terminals: fp::TerminalSet,
}

#[pymethods]
impl PyProgramTree {
    #[staticmethod]
    fn parse(text: &str, variables: Vec<String>) -> PyResult<Self> {
        let terminals = fp::TerminalSet::with_variables(variables).py_err()?;
        let tree = fp::ProgramTree::parse_prefix(text, &terminals).py_err()?;
        Ok(PyProgramTree { tree, terminals })
    }

    fn evaluate(&self, inputs: Vec<f64>) -> PyResult<f64> {
        self.tree.evaluate_slice(&inputs).py_err()
    }

    fn to_prefix(&self) -> String {
        self.tree.to_prefix(&self.terminals)
    }

    #[getter]
    fn depth(&self) -> usize {
        self.tree.depth()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.tree.node_count()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.terminals.variable_names().to_vec()
    }

    fn __str__(&self) -> String {
        self.to_prefix()
    }

    fn __repr__(&self) -> String {
        format!("ProgramTree({:?})", self.to_prefix())
    }
}

#[pyclass(name = "EvolutionConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyEvolutionConfig {
    inner: fp::EvolutionConfig,
}

#[pymethods]
impl PyEvolutionConfig {
    #[new]
    #[pyo3(signature = (population_size=1000, max_generations=500, seed=1, variables=None))]
    fn new(
        population_size: usize,
        max_generations: usize,
        seed: u64,
        variables: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let mut inner = fp::EvolutionConfig {
            population_size,
            max_generations,
            rng_seed: seed,
            ..Default::default()
        };
        if let Some(vars) = variables {
            inner.terminals = fp::TerminalSet::with_variables(vars).py_err()?;
        }
        inner.validate().py_err()?;
        Ok(PyEvolutionConfig { inner })
    }

    /// Parses the `key = value` config text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyEvolutionConfig {
            inner: fp::EvolutionConfig::parse(text).py_err()?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_config_text()
    }

    #[getter]
    fn population_size(&self) -> usize {
        self.inner.population_size
    }

    #[getter]
    fn max_generations(&self) -> usize {
        self.inner.max_generations
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.rng_seed
    }
}

/// Evolves a formula for `targets` from `inputs` rows. Returns
/// `(tree, fitness, generations_run)`.
#[pyfunction]
fn evolve(
    py: Python<'_>,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    config: &PyEvolutionConfig,
) -> PyResult<(PyProgramTree, f64, usize)> {
    if inputs.len() != targets.len() {
        return Err(PyValueError::new_err("inputs and targets differ in length"));
    }
    let cases: Vec<fp::FitnessCase> = inputs
        .into_iter()
        .zip(targets)
        .map(|(i, t)| fp::FitnessCase::new(i, t))
        .collect();
    let config = config.inner.clone();
    let result = py.detach(|| fp::evolve::run(&cases, &config)).py_err()?;
    Ok((
        PyProgramTree {
            tree: result.best.tree,
            terminals: config.terminals,
        },
        result.best.fitness,
        result.generations_run,
    ))
}

#[pyclass(name = "MinutiaeSet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMinutiaeSet {
    inner: fp::MinutiaeSet,
}

#[pymethods]
impl PyMinutiaeSet {
    /// `endings` rows are `(x, angle, y)`, `bifurcations` rows
    /// `(x, angle1, angle2, angle3, y)`; `y` may be `None`.
    #[new]
    #[pyo3(signature = (endings=Vec::new(), bifurcations=Vec::new()))]
    fn new(
        endings: Vec<(i32, f64, Option<i32>)>,
        bifurcations: Vec<(i32, f64, f64, f64, Option<i32>)>,
    ) -> Self {
        let endings = endings
            .into_iter()
            .map(|(x, angle, y)| fp::EndPoint { x, y, angle })
            .collect();
        let bifurcations = bifurcations
            .into_iter()
            .map(|(x, angle1, angle2, angle3, y)| fp::BifurcationPoint {
                x,
                y,
                angle1,
                angle2,
                angle3,
            })
            .collect();
        PyMinutiaeSet {
            inner: fp::MinutiaeSet::new(endings, bifurcations),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (end_csv=None, bif_csv=None))]
    fn load_csv(end_csv: Option<PathBuf>, bif_csv: Option<PathBuf>) -> PyResult<Self> {
        Ok(PyMinutiaeSet {
            inner: fp::MinutiaeSet::load_csv(end_csv.as_deref(), bif_csv.as_deref()).py_err()?,
        })
    }

    /// Writes `<stem>.end.csv` and `<stem>.bif.csv`.
    fn save_csv(&self, stem: PathBuf) -> PyResult<(PathBuf, PathBuf)> {
        self.inner.save_csv(stem).py_err()
    }

    #[getter]
    fn endings(&self) -> Vec<(i32, f64, Option<i32>)> {
        self.inner.endings.iter().map(|p| (p.x, p.angle, p.y)).collect()
    }

    #[getter]
    fn bifurcations(&self) -> Vec<(i32, f64, f64, f64, Option<i32>)> {
        self.inner
            .bifurcations
            .iter()
            .map(|p| (p.x, p.angle1, p.angle2, p.angle3, p.y))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "MinutiaeSet(endings={}, bifurcations={})",
            self.inner.endings.len(),
            self.inner.bifurcations.len()
        )
    }
}

/// Minutiae of a PBM/PGM skeleton image.
#[pyfunction]
#[pyo3(signature = (path, margin=fp::minutiae::DEFAULT_BORDER_MARGIN, thin=false))]
fn extract_minutiae(path: PathBuf, margin: usize, thin: bool) -> PyResult<PyMinutiaeSet> {
    let mut img = fp::BinaryImage::load(path).py_err()?;
    if thin {
        img = fp::minutiae::thin(&img);
    }
    Ok(PyMinutiaeSet {
        inner: fp::minutiae::extract_minutiae(&img, margin).py_err()?,
    })
}

#[pyclass(name = "Template", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTemplate {
    inner: fp::Template,
}

fn parse_policy(s: &str) -> PyResult<fp::CountPolicy> {
    match s {
        "strict" => Ok(fp::CountPolicy::Strict),
        "pair-prefix" => Ok(fp::CountPolicy::PairPrefix),
        _ => Err(PyValueError::new_err(format!("unknown count policy {s:?}"))),
    }
}

fn parse_mode(s: &str) -> PyResult<fp::ComparisonMode> {
    match s {
        "query-targets" => Ok(fp::ComparisonMode::QueryTargets),
        "own-y" => Ok(fp::ComparisonMode::OwnY),
        _ => Err(PyValueError::new_err(format!("unknown comparison mode {s:?}"))),
    }
}

fn kind_dict<'py>(py: Python<'py>, r: &fp::matching::KindReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("predictions", r.predictions.clone())?;
    d.set_item("targets", r.targets.clone())?;
    d.set_item("passed", r.passed)?;
    let (status, score) = match r.outcome {
        KindOutcome::NotCovered => ("not_covered", None),
        KindOutcome::CountMismatch => ("count_mismatch", None),
        KindOutcome::Scored { .. } => ("scored", r.outcome.score()),
    };
    d.set_item("status", status)?;
    d.set_item("mse", score)?;
    Ok(d)
}

#[pymethods]
impl PyTemplate {
    #[staticmethod]
    fn build(py: Python<'_>, query: &PyMinutiaeSet, config: &PyEvolutionConfig) -> PyResult<Self> {
        let (q, c) = (query.inner.clone(), config.inner.clone());
        let inner = py.detach(|| fp::matching::build_template(&q, &c)).py_err()?;
        Ok(PyTemplate { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyTemplate {
            inner: fp::Template::load(path).py_err()?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyTemplate {
            inner: fp::Template::parse(text).py_err()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).py_err()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Prefix text of the formula for `"end"` or `"bif"`, if present.
    fn formula(&self, kind: &str) -> PyResult<Option<String>> {
        let kind = match kind {
            "end" => Kind::End,
            "bif" => Kind::Bif,
            _ => return Err(PyValueError::new_err(format!("unknown kind {kind:?}"))),
        };
        Ok(self
            .inner
            .kind(kind)
            .map(|f| f.formula.to_prefix(&kind.naming_terminals())))
    }

    fn training_rmse(&self) -> (Option<f64>, Option<f64>) {
        (
            self.inner.end.as_ref().map(|f| f.training_rmse),
            self.inner.bif.as_ref().map(|f| f.training_rmse),
        )
    }

    /// Returns a dict with `decision` and per-kind `end` / `bif` reports.
    #[pyo3(signature = (candidate, threshold=fp::matching::DEFAULT_MSE_THRESHOLD, count_policy="strict", comparison="query-targets"))]
    fn decide<'py>(
        &self,
        py: Python<'py>,
        candidate: &PyMinutiaeSet,
        threshold: f64,
        count_policy: &str,
        comparison: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let config = fp::MatchConfig {
            mse_threshold: threshold,
            count_policy: parse_policy(count_policy)?,
            comparison_mode: parse_mode(comparison)?,
        };
        let report = self.inner.decide(&candidate.inner, &config).py_err()?;
        let d = PyDict::new(py);
        d.set_item("decision", report.decision.to_string())?;
        d.set_item("end", kind_dict(py, &report.end)?)?;
        d.set_item("bif", kind_dict(py, &report.bif)?)?;
        Ok(d)
    }
}

/// Writes the fixture CSVs and returns `(name, sha256)` pairs.
#[pyfunction]
fn write_fixtures(dir: PathBuf) -> PyResult<Vec<(String, String)>> {
    Ok(fp::fixtures::write_fixtures(&dir)
        .py_err()?
        .into_iter()
        .map(|(n, d)| (n.to_string(), d))
        .collect())
}

/// The enrolled fixture fingerprint, or candidate image 1, 2 or 3.
#[pyfunction]
#[pyo3(signature = (image=None))]
fn fixture_set(image: Option<usize>) -> PyResult<PyMinutiaeSet> {
    let inner = match image {
        None => fp::fixtures::query_set(),
        Some(i) => fp::fixtures::image_set(i)
            .ok_or_else(|| PyValueError::new_err(format!("no fixture image {i}")))?,
    };
    Ok(PyMinutiaeSet { inner })
}

#[pymodule]
fn pyfpgp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProgramTree>()?;
    m.add_class::<PyEvolutionConfig>()?;
    m.add_class::<PyMinutiaeSet>()?;
    m.add_class::<PyTemplate>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(extract_minutiae, m)?)?;
    m.add_function(wrap_pyfunction!(write_fixtures, m)?)?;
    m.add_function(wrap_pyfunction!(fixture_set, m)?)?;
    Ok(())
}
