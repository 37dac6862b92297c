//! Descriptor tables over independent realizations.

use rayon::prelude::*;

use super::descriptors::Panel;
use crate::error::{Error, Result};
use crate::generators::{generate, GeneratorSpec};
use crate::geometry::Configuration;
use crate::rng::{derive_named, derive_seed};

/// Largest fraction of unusable realizations tolerated.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct FailedRealization {
    pub index: usize,
    pub seed: u64,
    pub reason: String,
}

/// One row of descriptor values per successful realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEnsemble {
    pub model: String,
    /// Generator of the rows, when they come from one.
    pub spec: Option<GeneratorSpec>,
    pub master_seed: u64,
    pub names: Vec<String>,
    pub seeds: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
    pub failures: Vec<FailedRealization>,
}

impl ModelEnsemble {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    /// Only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<ModelEnsemble> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::param(format!("ensemble has no descriptor {n}")))
            })
            .collect::<Result<_>>()?;
        Ok(ModelEnsemble {
            names: names.to_vec(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&k| r[k]).collect()).collect(),
            ..self.clone()
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("# model\t{}\n# master_seed\t{}\n", self.model, self.master_seed);
        for f in &self.failures {
            out.push_str(&format!("# failed\t{}\t{}\t{}\n", f.index, f.seed, f.reason.replace(['\t', '\n'], " ")));
        }
        out.push_str("seed");
        for n in &self.names {
            out.push('\t');
            out.push_str(n);
        }
        out.push('\n');
        for (s, row) in self.seeds.iter().zip(&self.rows) {
            out.push_str(&s.to_string());
            for v in row {
                out.push('\t');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<ModelEnsemble> {
        let mut e = ModelEnsemble {
            model: String::new(),
            spec: None,
            master_seed: 0,
            names: Vec::new(),
            seeds: Vec::new(),
            rows: Vec::new(),
            failures: Vec::new(),
        };
        let mut header = false;
        for (k, line) in text.lines().enumerate() {
            let bad = |msg: &str| Error::Parse {
                line: k + 1,
                msg: msg.to_string(),
            };
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if let Some(tag) = fields[0].strip_prefix("# ") {
                match tag {
                    "model" => e.model = fields.get(1).unwrap_or(&"").to_string(),
                    "master_seed" => {
                        e.master_seed = fields.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad seed"))?
                    }
                    "failed" if fields.len() >= 4 => e.failures.push(FailedRealization {
                        index: fields[1].parse().map_err(|_| bad("bad index"))?,
                        seed: fields[2].parse().map_err(|_| bad("bad seed"))?,
                        reason: fields[3..].join("\t"),
                    }),
                    _ => {}
                }
                continue;
            }
            if !header {
                if fields[0] != "seed" {
                    return Err(bad("expected a header starting with seed"));
                }
                e.names = fields[1..].iter().map(|s| s.to_string()).collect();
                header = true;
                continue;
            }
            if fields.len() != e.names.len() + 1 {
                return Err(bad("column count differs from header"));
            }
            e.seeds.push(fields[0].parse().map_err(|_| bad("bad seed"))?);
            e.rows.push(
                fields[1..]
                    .iter()
                    .map(|v| v.parse::<f64>().map_err(|_| bad("bad number")))
                    .collect::<Result<_>>()?,
            );
        }
        if !header {
            return Err(Error::Parse {
                line: text.lines().count(),
                msg: "missing header".into(),
            });
        }
        Ok(e)
    }
}

fn finish(
    model: String,
    spec: Option<GeneratorSpec>,
    master_seed: u64,
    panel: &Panel,
    results: Vec<(usize, u64, Result<Vec<f64>>)>,
) -> Result<ModelEnsemble> {
    let total = results.len();
    let mut e = ModelEnsemble {
        model,
        spec,
        master_seed,
        names: panel.names(),
        seeds: Vec::new(),
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (index, seed, r) in results {
        match r {
            Ok(row) if row.iter().all(|v| v.is_finite()) => {
                e.seeds.push(seed);
                e.rows.push(row);
            }
            Ok(row) => e.failures.push(FailedRealization {
                index,
                seed,
                reason: format!("non-finite descriptor values {row:?}"),
            }),
            Err(err) => e.failures.push(FailedRealization {
                index,
                seed,
                reason: err.to_string(),
            }),
        }
    }
    if e.failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::EnsembleFailure {
            failed: e.failures.len(),
            total,
            first: e.failures[0].reason.clone(),
        });
    }
    Ok(e)
}

/// `count` realizations of `spec`, the i-th seeded by
/// `derive_seed(master_seed, i)`, each summarised by `panel`.
pub fn run_ensemble(spec: &GeneratorSpec, count: usize, master_seed: u64, panel: &Panel) -> Result<ModelEnsemble> {
    if count < 2 {
        return Err(Error::param("an ensemble needs at least two realizations"));
    }
    spec.validate()?;
    panel.validate()?;
    let results: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, i as u64);
            let row = generate(spec, seed).and_then(|c| panel.evaluate(&c, derive_named(seed, "descriptors")));
            (i, seed, row)
        })
        .collect();
    finish(spec.name().to_string(), Some(spec.clone()), master_seed, panel, results)
}

/// Descriptor table of given configurations, e.g. observed packings.
pub fn describe_configurations(
    label: &str,
    configs: &[Configuration],
    master_seed: u64,
    panel: &Panel,
) -> Result<ModelEnsemble> {
    panel.validate()?;
    let results: Vec<_> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let seed = derive_seed(master_seed, i as u64);
            (i, seed, panel.evaluate(c, seed))
        })
        .collect();
    finish(label.to_string(), None, master_seed, panel, results)
}
