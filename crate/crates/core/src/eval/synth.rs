//! A separable synthetic retrieval benchmark.
//!
//! Each domain owns a cluster of unit-norm documents around a random
//! center. A query is its source document displaced by a fixed per-domain
//! offset plus isotropic Gaussian noise, so the offset is a systematic,
//! domain-specific distortion that a per-domain corrective mapping can undo.
//! Subtracting the true offset (the oracle transform) leaves only the noise.
//!
//! Optionally an extra out-of-domain cluster is generated whose queries
//! carry no offset and an all-zero label vector.

use super::{EmbeddingStore, QrelSet};
use crate::domain::DomainLabelVector;
use crate::error::{Error, Result};
use crate::training::TrainingExample;
use crate::vecmath::{Matrix, Rng, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_domains: usize,
    pub docs_per_domain: usize,
    /// Held-out evaluation queries per domain.
    pub queries_per_domain: usize,
    /// Training queries per domain, generated the same way.
    pub train_queries_per_domain: usize,
    pub dim: usize,
    /// Expected norm of the query noise.
    pub noise: f64,
    /// Norm of each domain offset.
    pub offset_scale: f64,
    /// Expected norm of a document's deviation from its cluster center,
    /// before normalization.
    pub spread: f64,
    pub out_of_domain: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_domains: 4,
            docs_per_domain: 200,
            queries_per_domain: 50,
            train_queries_per_domain: 250,
            dim: 32,
            noise: 0.5,
            offset_scale: 1.0,
            spread: 1.0,
            out_of_domain: false,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_domains == 0 || self.docs_per_domain == 0 || self.queries_per_domain == 0 {
            return Err(Error::invalid("synthetic benchmark counts must be at least 1"));
        }
        if self.dim < 2 || !self.dim.is_multiple_of(2) {
            return Err(Error::invalid(format!("dimension must be even and at least 2, got {}", self.dim)));
        }
        for (name, v) in [("noise", self.noise), ("offset_scale", self.offset_scale), ("spread", self.spread)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// A query with its source document and domain (`None` when out of domain).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthQuery {
    pub id: String,
    pub vector: Vector<f32>,
    pub doc_id: String,
    pub doc_index: usize,
    pub domain: Option<usize>,
    pub labels: DomainLabelVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBenchmark {
    pub config: SynthConfig,
    pub store: EmbeddingStore<f32>,
    /// Per-domain offsets, in domain order.
    pub offsets: Vec<Vector<f32>>,
    pub train: Vec<SynthQuery>,
    pub test: Vec<SynthQuery>,
    /// Relevance of the test queries: each query's source document.
    pub qrels: QrelSet,
}

impl SynthBenchmark {
    pub fn training_examples(&self) -> Result<Vec<TrainingExample<f32>>> {
        self.train
            .iter()
            .map(|q| {
                TrainingExample::new(
                    q.id.clone(),
                    q.vector.clone(),
                    self.store.embedding(q.doc_index),
                    q.labels.clone(),
                )
            })
            .collect()
    }

    /// Test queries as `(id, vector)` pairs.
    pub fn test_queries(&self) -> Vec<(String, Vector<f32>)> {
        self.test.iter().map(|q| (q.id.clone(), q.vector.clone())).collect()
    }

    /// Test queries with their true domain offset removed.
    pub fn oracle_queries(&self) -> Vec<(String, Vector<f32>)> {
        self.test
            .iter()
            .map(|q| {
                let mut v = q.vector.clone();
                if let Some(k) = q.domain {
                    for (x, o) in v.iter_mut().zip(self.offsets[k].iter()) {
                        *x -= o;
                    }
                }
                (q.id.clone(), v)
            })
            .collect()
    }

    /// Relevance judgments for the training queries.
    pub fn train_qrels(&self) -> QrelSet {
        self.train.iter().map(|q| (q.id.clone(), q.doc_id.clone())).collect()
    }
}

fn gaussian(dim: usize, scale: f64, rng: &mut Rng) -> Vec<f64> {
    // Per-component std scale/√d gives an expected squared norm of scale².
    let s = scale / (dim as f64).sqrt();
    (0..dim).map(|_| s * rng.normal()).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x / n).collect()
}

fn to_f32(v: &[f64]) -> Vector<f32> {
    Vector::from_vec(v.iter().map(|&x| x as f32).collect())
}

pub fn synth_benchmark(config: &SynthConfig) -> Result<SynthBenchmark> {
    config.validate()?;
    let d = config.dim;
    let m = config.num_domains;
    let root = Rng::new(config.seed);
    let clusters = m + usize::from(config.out_of_domain);

    let mut center_rng = root.fork(1);
    let centers: Vec<Vec<f64>> = (0..clusters).map(|_| unit(gaussian(d, 1.0, &mut center_rng))).collect();
    let mut offset_rng = root.fork(2);
    let offsets: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            unit(gaussian(d, 1.0, &mut offset_rng))
                .into_iter()
                .map(|x| x * config.offset_scale)
                .collect()
        })
        .collect();

    let cluster_name = |c: usize| if c < m { format!("{c}") } else { "ood".to_string() };

    let mut doc_rng = root.fork(3);
    let mut ids = Vec::with_capacity(clusters * config.docs_per_domain);
    let mut data = Vec::with_capacity(clusters * config.docs_per_domain * d);
    let mut docs64 = Vec::with_capacity(clusters * config.docs_per_domain);
    for (c, center) in centers.iter().enumerate() {
        for j in 0..config.docs_per_domain {
            let noise = gaussian(d, config.spread, &mut doc_rng);
            let doc = unit(center.iter().zip(&noise).map(|(a, b)| a + b).collect());
            ids.push(format!("d{}-{j:04}", cluster_name(c)));
            data.extend(doc.iter().map(|&x| x as f32));
            docs64.push(doc);
        }
    }
    let store = EmbeddingStore::new(ids, Matrix::new(docs64.len(), d, data)?)?;

    let make_queries = |rng: &mut Rng, prefix: &str, per_domain: usize| -> Vec<SynthQuery> {
        let mut out = Vec::with_capacity(clusters * per_domain);
        for c in 0..clusters {
            for i in 0..per_domain {
                let j = rng.below(config.docs_per_domain as u64) as usize;
                let doc_index = c * config.docs_per_domain + j;
                let noise = gaussian(d, config.noise, rng);
                let doc = &docs64[doc_index];
                let q: Vec<f64> = if c < m {
                    doc.iter().zip(&offsets[c]).zip(&noise).map(|((x, o), z)| x + o + z).collect()
                } else {
                    doc.iter().zip(&noise).map(|(x, z)| x + z).collect()
                };
                let (domain, labels) = if c < m {
                    (Some(c), DomainLabelVector::one_hot(m, c))
                } else {
                    (None, DomainLabelVector::zeros(m))
                };
                out.push(SynthQuery {
                    id: format!("{prefix}{}-{i:04}", cluster_name(c)),
                    vector: to_f32(&q),
                    doc_id: store.ids()[doc_index].clone(),
                    doc_index,
                    domain,
                    labels,
                });
            }
        }
        out
    };
    let train = make_queries(&mut root.fork(4), "train", config.train_queries_per_domain);
    let test = make_queries(&mut root.fork(5), "q", config.queries_per_domain);
    let qrels = test.iter().map(|q| (q.id.clone(), q.doc_id.clone())).collect();

    Ok(SynthBenchmark {
        config: config.clone(),
        store,
        offsets: offsets.iter().map(|o| to_f32(o)).collect(),
        train,
        test,
        qrels,
    })
}
