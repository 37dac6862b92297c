//! Minimum-contrast fitting of generator parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compare::{energy_distance_test, TestResult};
use super::descriptors::{CurveDescriptor, Panel};
use super::ensemble::{describe_configurations, run_ensemble};
use crate::error::{Error, Result};
use crate::generators::{generate, GeneratorSpec};
use crate::geometry::Configuration;
use crate::rng::{derive_named, derive_seed};

/// Relative spread of contrasts below which a profile counts as flat.
pub const FLAT_TOLERANCE: f64 = 1e-9;

/// Named parameter vectors to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub names: Vec<String>,
    pub points: Vec<Vec<f64>>,
}

impl ParamGrid {
    pub fn single(name: &str, values: &[f64]) -> Self {
        ParamGrid {
            names: vec![name.to_string()],
            points: values.iter().map(|&v| vec![v]).collect(),
        }
    }

    /// Cartesian product of the axes, last axis varying fastest.
    pub fn product(axes: &[(&str, Vec<f64>)]) -> Self {
        let mut points = vec![Vec::new()];
        for (_, values) in axes {
            points = points
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        ParamGrid {
            names: axes.iter().map(|(n, _)| n.to_string()).collect(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastFit {
    pub grid: ParamGrid,
    pub r_grid: Vec<f64>,
    /// Contrast at each grid point; infinite where every replicate failed.
    pub contrasts: Vec<f64>,
    /// Mean model curve at each grid point.
    pub model_curves: Vec<Vec<f64>>,
    pub data_curve: Vec<f64>,
    /// Failed replicates at each grid point.
    pub failures: Vec<usize>,
    pub argmin: usize,
    pub non_identifiable: bool,
}

impl ContrastFit {
    pub fn best(&self) -> &[f64] {
        &self.grid.points[self.argmin]
    }

    /// Lines `param... contrast`.
    pub fn profile_tsv(&self) -> String {
        let mut out = format!("# {}\tcontrast\n", self.grid.names.join("\t"));
        for (p, c) in self.grid.points.iter().zip(&self.contrasts) {
            for v in p {
                out.push_str(&format!("{v}\t"));
            }
            out.push_str(&format!("{c}\n"));
        }
        out
    }
}

/// `∫ (a - b)² dr` by the trapezoid rule on `r`.
pub fn l2_contrast(r: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    r.windows(2)
        .zip(sq.windows(2))
        .map(|(r, s)| 0.5 * (r[1] - r[0]) * (s[0] + s[1]))
        .sum()
}

fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let k = curves[0].len();
    (0..k)
        .map(|j| curves.iter().map(|c| c[j]).sum::<f64>() / curves.len() as f64)
        .collect()
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Fits `family` to `data` by minimising the L2 distance between the mean
/// model curve (over `replicates` realizations) and the mean data curve.
/// Replicate `r` uses the same seed at every grid point.
pub fn min_contrast_fit<F>(
    family: F,
    grid: &ParamGrid,
    data: &[Configuration],
    curve: &CurveDescriptor,
    replicates: usize,
    seed: u64,
) -> Result<ContrastFit>
where
    F: Fn(&[f64]) -> Result<GeneratorSpec> + Sync,
{
    if grid.len() < 2 {
        return Err(Error::param("the parameter grid needs at least two points"));
    }
    if grid.points.iter().any(|p| p.len() != grid.names.len()) {
        return Err(Error::param("grid points and parameter names differ in length"));
    }
    if replicates < 5 {
        return Err(Error::param("at least five replicates per grid point are needed"));
    }
    if data.is_empty() {
        return Err(Error::param("no data configurations"));
    }
    curve.validate()?;
    let data_seed = derive_named(seed, "data");
    let data_curves: Vec<Vec<f64>> = data
        .par_iter()
        .enumerate()
        .map(|(i, c)| curve.evaluate(c, derive_seed(data_seed, i as u64)))
        .collect::<Result<_>>()?;
    let data_curve = mean_curve(&data_curves);
    if data_curve.iter().any(|v| !v.is_finite()) {
        return Err(Error::Window("data curve has non-finite values".into()));
    }
    let model_seed = derive_named(seed, "model");
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..replicates).map(move |r| (g, r)))
        .collect();
    let results: Vec<Option<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let s = derive_seed(model_seed, r as u64);
            family(&grid.points[g])
                .and_then(|spec| generate(&spec, s))
                .and_then(|c| curve.evaluate(&c, derive_named(s, "curve")))
                .ok()
                .filter(|v| v.iter().all(|x| x.is_finite()))
        })
        .collect();
    let mut contrasts = Vec::with_capacity(grid.len());
    let mut model_curves = Vec::with_capacity(grid.len());
    let mut failures = Vec::with_capacity(grid.len());
    for chunk in results.chunks(replicates) {
        let ok: Vec<Vec<f64>> = chunk.iter().flatten().cloned().collect();
        failures.push(replicates - ok.len());
        if ok.is_empty() {
            contrasts.push(f64::INFINITY);
            model_curves.push(vec![f64::NAN; curve.r_grid.len()]);
        } else {
            let m = mean_curve(&ok);
            contrasts.push(l2_contrast(&curve.r_grid, &m, &data_curve));
            model_curves.push(m);
        }
    }
    let finite: Vec<usize> = (0..grid.len()).filter(|&g| contrasts[g].is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::Refused("every grid point failed to generate".into()));
    }
    let argmin = *finite
        .iter()
        .min_by(|&&a, &&b| {
            contrasts[a]
                .total_cmp(&contrasts[b])
                .then_with(|| lexicographic(&grid.points[a], &grid.points[b]))
        })
        .unwrap();
    let lo = contrasts[argmin];
    let hi = finite.iter().map(|&g| contrasts[g]).fold(f64::NEG_INFINITY, f64::max);
    let non_identifiable = finite.len() < 2 || hi - lo <= FLAT_TOLERANCE * hi.abs().max(f64::MIN_POSITIVE);
    Ok(ContrastFit {
        grid: grid.clone(),
        r_grid: curve.r_grid.clone(),
        contrasts,
        model_curves,
        data_curve,
        failures,
        argmin,
        non_identifiable,
    })
}

/// A fit together with a two-sample test of descriptors it was not fitted
/// to.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedFit {
    pub fit: ContrastFit,
    pub spec: GeneratorSpec,
    pub held_out: TestResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSettings {
    /// Realizations of the fitted model compared with the data.
    pub realizations: usize,
    pub permutations: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            realizations: 20,
            permutations: super::compare::DEFAULT_PERMUTATIONS,
        }
    }
}

/// [`min_contrast_fit`] followed by an energy-distance test of the fitted
/// model against the data on the `held_out` panel.
#[allow(clippy::too_many_arguments)]
pub fn fit_and_check<F>(
    family: F,
    grid: &ParamGrid,
    data: &[Configuration],
    curve: &CurveDescriptor,
    replicates: usize,
    held_out: &Panel,
    check: CheckSettings,
    seed: u64,
) -> Result<CheckedFit>
where
    F: Fn(&[f64]) -> Result<GeneratorSpec> + Sync,
{
    let fit = min_contrast_fit(&family, grid, data, curve, replicates, seed)?;
    let spec = family(fit.best())?;
    let model = run_ensemble(&spec, check.realizations, derive_named(seed, "check"), held_out)?;
    let observed = describe_configurations("data", data, derive_named(seed, "check data"), held_out)?;
    let held_out = energy_distance_test(&model, &observed, check.permutations, derive_named(seed, "check test"))?;
    Ok(CheckedFit { fit, spec, held_out })
}
