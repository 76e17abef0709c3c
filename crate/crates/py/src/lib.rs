//! Python bindings: build a graph from a config, load snapshots, run queries
//! and ask questions against them.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use kgrag_core::cypher::{self, Cell};
use kgrag_core::embedding::{Embedder, HashingEmbedder};
use kgrag_core::graph::{PropertyGraph, Value};
use kgrag_core::pipeline::{self, PipelineConfig};
use kgrag_core::rag::{self, RetrievalRequest};
use kgrag_core::resolution::normalize_surface;
use kgrag_core::zipf::{fit_zipf as core_fit_zipf, RankFrequencyTable};
use kgrag_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Config(_) | Error::Precondition(_) | Error::Query(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn value_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Int(i) => i.into_pyobject(py)?.into_any().unbind(),
        Value::Float(f) => f.into_pyobject(py)?.into_any().unbind(),
        Value::Str(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::List(xs) => PyList::new(py, xs)?.into_any().unbind(),
    })
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn load_config(config: Option<PathBuf>, provider: Option<&str>) -> PyResult<PipelineConfig> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::load(&p).map_err(to_py)?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = provider {
        cfg.provider.kind = p.to_string();
    }
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// In-memory property graph.
#[pyclass(frozen, module = "kgrag")]
struct Graph {
    inner: PropertyGraph,
}

#[pymethods]
impl Graph {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Graph {
            inner: PropertyGraph::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn counts(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let c = self.inner.counts();
        let d = PyDict::new(py);
        d.set_item("nodes", c.nodes)?;
        d.set_item("edges", c.edges)?;
        d.set_item("nodes_by_label", c.nodes_by_label)?;
        d.set_item("edges_by_type", c.edges_by_type)?;
        Ok(d.into_any().unbind())
    }

    /// Every schema violation found by a full scan; empty when valid.
    fn schema_violations(&self) -> Vec<String> {
        self.inner.validate_schema()
    }

    /// Runs a query and returns `(columns, rows)`. Node cells come back as
    /// their name.
    fn query(&self, py: Python<'_>, cypher: &str) -> PyResult<(Vec<String>, Vec<Vec<Py<PyAny>>>)> {
        let q = cypher::parse_validated(cypher).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let table = cypher::execute(&q, &self.inner).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let rows = table
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| match cell {
                        Cell::Node { name, .. } => Ok(name.into_pyobject(py)?.into_any().unbind()),
                        Cell::Value(v) => value_to_py(py, v),
                    })
                    .collect::<PyResult<Vec<_>>>()
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok((table.columns, rows))
    }

    /// Answers a question and returns the answer record as a dict.
    #[pyo3(signature = (question, k = 3, config = None, provider = None))]
    fn ask(
        &self,
        py: Python<'_>,
        question: String,
        k: usize,
        config: Option<PathBuf>,
        provider: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let explicit = config.is_some();
        let cfg = load_config(config, provider)?;
        let embedder: Box<dyn Embedder> = if explicit {
            cfg.embedder().map_err(to_py)?
        } else {
            let dim = self.inner.embedding_dimension().unwrap_or(cfg.embedding.dimension);
            Box::new(HashingEmbedder::new(dim, cfg.embedding.seed))
        };
        let gateway = cfg.gateway().map_err(to_py)?;
        let request = RetrievalRequest::new(question, k).map_err(to_py)?;
        let graph = &self.inner;
        let answer = py
            .detach(|| rag::answer(&request, graph, &gateway, embedder.as_ref()))
            .or_else(|e| match e {
                Error::Generation { partial, .. } => Ok(*partial),
                other => Err(other),
            })
            .map_err(to_py)?;
        json_to_py(py, &answer.to_json())
    }
}

/// Runs the full build for a config file and writes its outputs.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None, provider = None))]
fn build(py: Python<'_>, config: PathBuf, out_dir: Option<PathBuf>, provider: Option<&str>) -> PyResult<Graph> {
    let mut cfg = load_config(Some(config), provider)?;
    if let Some(dir) = out_dir {
        cfg.output.dir = dir;
    }
    let built = py
        .detach(|| -> kgrag_core::Result<_> {
            let gateway = cfg.gateway()?;
            let embedder = cfg.embedder()?;
            let built = pipeline::build(&cfg, &gateway, embedder.as_ref())?;
            built.write(&cfg.output)?;
            Ok(built)
        })
        .map_err(to_py)?;
    Ok(Graph { inner: built.graph })
}

/// Canonical text of a query, or `ValueError` with the parse error.
#[pyfunction]
fn parse_query(text: &str) -> PyResult<String> {
    cypher::parse_validated(text)
        .map(|q| q.to_string())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// `(C, chi2_norm)` for frequencies given in rank order.
#[pyfunction]
fn fit_zipf(frequencies: Vec<u64>) -> PyResult<(f64, f64)> {
    let fit = core_fit_zipf(&RankFrequencyTable::from_frequencies(&frequencies)).map_err(to_py)?;
    Ok((fit.c, fit.chi2_norm))
}

/// Canonical entity form, or `None` when the surface is rejected.
#[pyfunction]
#[pyo3(signature = (surface, sentence = None))]
fn normalize(surface: &str, sentence: Option<&str>) -> Option<String> {
    normalize_surface(surface, sentence).canonical()
}

#[pymodule]
fn kgrag(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_function(wrap_pyfunction!(build, m)?)?;
    m.add_function(wrap_pyfunction!(parse_query, m)?)?;
    m.add_function(wrap_pyfunction!(fit_zipf, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add("SCHEMA", PropertyGraph::schema_text())?;
    Ok(())
}
