//! Python bindings for the `jointrep` pipeline.

use std::path::PathBuf;

use jointrep as core;
use core::trainer::{self, Hyperparams as CoreHyperparams, RegSchedule};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Vocabulary", module = "jointrep", frozen)]
struct Vocabulary(core::Vocabulary);

#[pymethods]
impl Vocabulary {
    #[staticmethod]
    #[pyo3(signature = (lines, min_count = core::corpus::DEFAULT_MIN_COUNT))]
    fn build(lines: Vec<String>, min_count: u64) -> PyResult<Self> {
        core::Vocabulary::build(&lines, min_count).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::Vocabulary::load(&path).map(Self).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(py_err)
    }

    fn id(&self, word: &str) -> Option<u32> {
        self.0.id(word)
    }

    fn words(&self) -> Vec<String> {
        self.0.words().to_vec()
    }

    fn count(&self, word: &str) -> Option<u64> {
        self.0.id(word).map(|id| self.0.count(id))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "CoocMatrix", module = "jointrep", frozen)]
struct CoocMatrix(core::CoocMatrix);

#[pymethods]
impl CoocMatrix {
    #[staticmethod]
    #[pyo3(signature = (lines, vocab, window = core::corpus::DEFAULT_WINDOW, threads = 1))]
    fn build(lines: Vec<String>, vocab: &Vocabulary, window: usize, threads: usize) -> PyResult<Self> {
        core::build_cooccurrence_parallel(&lines, &vocab.0, window, threads)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::CoocMatrix::load(&path).map(Self).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(py_err)
    }

    fn get(&self, i: u32, j: u32) -> Option<f64> {
        self.0.get(i, j)
    }

    /// All stored `(i, j, x)` triples in row-major order.
    fn entries(&self) -> Vec<(u32, u32, f64)> {
        self.0.entries().iter().map(|e| (e.i, e.j, e.x)).collect()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.0.nnz()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.0.vocab_size()
    }
}

#[pyclass(name = "RelationSet", module = "jointrep", frozen)]
struct RelationSet(core::RelationSet);

#[pymethods]
impl RelationSet {
    #[staticmethod]
    fn load(path: PathBuf, relation: &str, vocab: &Vocabulary) -> PyResult<Self> {
        core::load_relations(&path, relation, &vocab.0)
            .map(|(r, _)| Self(r))
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_pairs(name: String, vocab_size: usize, pairs: Vec<(u32, u32)>) -> PyResult<Self> {
        core::RelationSet::from_pairs(name, vocab_size, pairs)
            .map(Self)
            .map_err(py_err)
    }

    fn symmetrize(&self) -> Self {
        Self(self.0.symmetrize())
    }

    fn indicator(&self, i: u32, j: u32) -> u8 {
        self.0.indicator(i, j)
    }

    fn pairs(&self) -> Vec<(u32, u32)> {
        self.0.pairs().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Hyperparams", module = "jointrep", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct Hyperparams {
    dim: usize,
    lambda_: f64,
    alpha: f64,
    t_max: f64,
    lr: f64,
    epochs: usize,
    seed: u64,
    reg_schedule: String,
    threads: usize,
}

#[pymethods]
impl Hyperparams {
    #[new]
    #[pyo3(signature = (
        dim = trainer::DEFAULT_DIM,
        lambda_ = trainer::DEFAULT_LAMBDA,
        alpha = trainer::DEFAULT_ALPHA,
        t_max = trainer::DEFAULT_T_MAX,
        lr = trainer::DEFAULT_LR,
        epochs = trainer::DEFAULT_EPOCHS,
        seed = 0,
        reg_schedule = "union".to_string(),
        threads = 1,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        dim: usize,
        lambda_: f64,
        alpha: f64,
        t_max: f64,
        lr: f64,
        epochs: usize,
        seed: u64,
        reg_schedule: String,
        threads: usize,
    ) -> Self {
        Hyperparams {
            dim,
            lambda_,
            alpha,
            t_max,
            lr,
            epochs,
            seed,
            reg_schedule,
            threads,
        }
    }
}

impl Hyperparams {
    fn to_core(&self) -> PyResult<CoreHyperparams> {
        let reg_schedule: RegSchedule = self.reg_schedule.parse().map_err(py_err)?;
        let hp = CoreHyperparams {
            dim: self.dim,
            lambda: self.lambda_,
            alpha: self.alpha,
            t_max: self.t_max,
            lr0: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            adagrad_eps: trainer::DEFAULT_ADAGRAD_EPS,
            reg_schedule,
            threads: self.threads,
        };
        hp.validate().map_err(py_err)?;
        Ok(hp)
    }
}

#[pyclass(name = "Model", module = "jointrep", frozen)]
struct Model(core::Model);

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::Model::load(&path).map(Self).map_err(py_err)
    }

    #[pyo3(signature = (path, with_accumulators = false))]
    fn save(&self, path: PathBuf, with_accumulators: bool) -> PyResult<()> {
        self.0.save(&path, with_accumulators).map_err(py_err)
    }

    /// Returns `(total, corpus_term, lexicon_term)` of the objective.
    fn objective(&self, cooc: &CoocMatrix, relations: &RelationSet, hp: &Hyperparams) -> PyResult<(f64, f64, f64)> {
        let hp = hp.to_core()?;
        let obj = core::objective_total(&self.0, &cooc.0, &relations.0, &hp).map_err(py_err)?;
        Ok((obj.total, obj.corpus, obj.lexicon))
    }

    fn embeddings(&self, vocab: &Vocabulary) -> PyResult<EmbeddingTable> {
        core::compose_embeddings(&self.0, &vocab.0)
            .map(EmbeddingTable)
            .map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.0.vocab_size
    }
}

/// Per-epoch `(J, J_C, J_S)`.
type History = Vec<(f64, f64, f64)>;

/// Trains a model; returns it with the per-epoch objective history.
#[pyfunction]
#[pyo3(signature = (cooc, hp, relations = None))]
fn train(
    py: Python<'_>,
    cooc: &CoocMatrix,
    hp: &Hyperparams,
    relations: Option<&RelationSet>,
) -> PyResult<(Model, History)> {
    let hp = hp.to_core()?;
    let empty;
    let rel = match relations {
        Some(r) => &r.0,
        None => {
            empty = core::RelationSet::empty("none", cooc.0.vocab_size());
            &empty
        }
    };
    let trained = py.detach(|| core::train(&cooc.0, rel, &hp)).map_err(py_err)?;
    let history = trained
        .history
        .iter()
        .map(|s| (s.objective.total, s.objective.corpus, s.objective.lexicon))
        .collect();
    Ok((Model(trained.model), history))
}

#[pyclass(name = "EmbeddingTable", module = "jointrep", frozen)]
struct EmbeddingTable(core::EmbeddingTable);

#[pymethods]
impl EmbeddingTable {
    #[new]
    fn new(rows: Vec<(String, Vec<f64>)>) -> PyResult<Self> {
        core::EmbeddingTable::from_rows(rows).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::EmbeddingTable::load(&path).map(Self).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(py_err)
    }

    fn vector(&self, word: &str) -> Option<Vec<f64>> {
        self.0.vector(word).map(<[f64]>::to_vec)
    }

    fn similarity(&self, a: &str, b: &str) -> PyResult<Option<f64>> {
        match (self.0.vector(a), self.0.vector(b)) {
            (Some(u), Some(v)) => core::cosine(u, v).map(Some).map_err(py_err),
            _ => Ok(None),
        }
    }

    /// Best `d` for `a : b :: c : d`, or None if a query word is unknown.
    fn analogy(&self, a: &str, b: &str, c: &str) -> Option<String> {
        core::solve_analogy(&self.0, a, b, c)
    }

    /// Spearman correlation on a similarity TSV: `(rho, n_scored, n_total)`.
    fn eval_similarity(&self, dataset: PathBuf) -> PyResult<(f64, usize, usize)> {
        let ds = core::SimilarityDataset::load(&dataset).map_err(py_err)?;
        let r = core::eval_similarity(&self.0, &ds).map_err(py_err)?;
        Ok((r.value, r.n_scored, r.n_total))
    }

    /// Per-section analogy accuracy: `[(section, accuracy, n_scored, n_total)]`.
    fn eval_analogy(&self, dataset: PathBuf) -> PyResult<Vec<(String, f64, usize, usize)>> {
        let ds = core::AnalogyDataset::load(&dataset).map_err(py_err)?;
        let r = core::eval_analogy(&self.0, &ds).map_err(py_err)?;
        Ok(r.reports()
            .map(|r| (r.dataset.clone(), r.value, r.n_scored, r.n_total))
            .collect())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn cosine(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    core::cosine(&u, &v).map_err(py_err)
}

#[pyfunction]
fn spearman(gold: Vec<f64>, pred: Vec<f64>) -> PyResult<f64> {
    core::spearman(&gold, &pred).map_err(py_err)
}

/// Fisher z statistic and two-sided p-value for a correlation over `n` pairs.
#[pyfunction]
fn fisher_significance(rho: f64, n: usize) -> PyResult<(f64, f64)> {
    core::fisher_significance(rho, n).map(|s| (s.z, s.p)).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (t, alpha = trainer::DEFAULT_ALPHA, t_max = trainer::DEFAULT_T_MAX))]
fn weight(t: f64, alpha: f64, t_max: f64) -> f64 {
    core::weight_f(t, alpha, t_max)
}

#[pyfunction]
fn tokenize(line: &str) -> Vec<String> {
    core::tokenize_line(line)
}

#[pymodule]
#[pyo3(name = "jointrep")]
fn pyjointrep(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Vocabulary>()?;
    m.add_class::<CoocMatrix>()?;
    m.add_class::<RelationSet>()?;
    m.add_class::<Hyperparams>()?;
    m.add_class::<Model>()?;
    m.add_class::<EmbeddingTable>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_significance, m)?)?;
    m.add_function(wrap_pyfunction!(weight, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
