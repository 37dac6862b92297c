//! Scalar and curve summaries of a single configuration.

use serde::{Deserialize, Serialize};

use crate::contacts::{build_contact_network, find_rattlers, ContactNetwork, ContactRule};
use crate::error::{Error, Result};
use crate::generators::{interior_volume_fraction, interior_window};
use crate::geometry::Configuration;
use crate::order::{bond_orientational, BondSet};
use crate::resistance::{build_axis_network, solve_bulk_resistance, Electrodes};
use crate::rng::derive_named;
use crate::stats::{
    k_function, pair_correlation, spherical_contact, void_surface_distances, EdgeCorrection, PointPattern, SampleDesign,
    Window,
};
use crate::tessellation::{escape_fraction, Triangulation};

/// One scalar statistic of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Descriptor {
    /// Exact solid fraction of the interior window.
    VolumeFraction,
    /// Mean number of contacts of interior spheres.
    MeanCoordination,
    /// Fraction of interior spheres that are rattlers.
    RattlerFraction,
    /// Sixth-order bond order from the summed harmonics of all interior
    /// bonds (3D only).
    Q6Global,
    /// Pair correlation in the shell of the panel's width containing `r`.
    PairCorrelation { r: f64 },
    /// Distance from a random void point to the nearest surface below
    /// which a fraction `p` of such distances falls.
    SphericalContactQuantile { p: f64 },
    /// Bulk resistance of the contact network across the first axis.
    BulkResistance,
    /// Median escape radius of interior cells.
    EscapeMedian,
}

impl Descriptor {
    pub fn name(&self) -> String {
        match self {
            Descriptor::VolumeFraction => "m1".into(),
            Descriptor::MeanCoordination => "mean_coordination".into(),
            Descriptor::RattlerFraction => "rattler_fraction".into(),
            Descriptor::Q6Global => "q6_global".into(),
            Descriptor::PairCorrelation { r } => format!("g({r})"),
            Descriptor::SphericalContactQuantile { p } => format!("S_quantile({p})"),
            Descriptor::BulkResistance => "R_bulk".into(),
            Descriptor::EscapeMedian => "escape_median".into(),
        }
    }

    fn needs_network(&self) -> bool {
        matches!(
            self,
            Descriptor::MeanCoordination | Descriptor::RattlerFraction | Descriptor::Q6Global | Descriptor::BulkResistance
        )
    }
}

/// A set of descriptors and the settings they share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    pub descriptors: Vec<Descriptor>,
    /// Surfaces closer than this count as touching, in diameters.
    #[serde(default = "default_contact_eps")]
    pub contact_eps: f64,
    /// Shell width of the pair correlation estimate.
    #[serde(default = "default_shell_width")]
    pub shell_width: f64,
    /// Random void-probe points per configuration.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_contact_eps() -> f64 {
    0.02
}
fn default_shell_width() -> f64 {
    0.05
}
fn default_samples() -> usize {
    20_000
}

impl Default for Panel {
    fn default() -> Self {
        Panel::with(vec![
            Descriptor::VolumeFraction,
            Descriptor::MeanCoordination,
            Descriptor::RattlerFraction,
            Descriptor::Q6Global,
            Descriptor::PairCorrelation { r: 1.0 },
            Descriptor::PairCorrelation { r: 1.73 },
            Descriptor::PairCorrelation { r: 2.0 },
            Descriptor::SphericalContactQuantile { p: 0.25 },
            Descriptor::SphericalContactQuantile { p: 0.5 },
            Descriptor::SphericalContactQuantile { p: 0.75 },
            Descriptor::BulkResistance,
            Descriptor::EscapeMedian,
        ])
    }
}

struct Shared {
    window: Window,
    tri: Triangulation,
    net: Option<ContactNetwork>,
    interior: Vec<usize>,
}

impl Panel {
    pub fn with(descriptors: Vec<Descriptor>) -> Self {
        Panel {
            descriptors,
            contact_eps: default_contact_eps(),
            shell_width: default_shell_width(),
            samples: default_samples(),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.descriptors.iter().map(Descriptor::name).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.descriptors.is_empty() {
            return Err(Error::param("descriptor panel is empty"));
        }
        if !(self.contact_eps >= 0.0 && self.shell_width > 0.0 && self.samples > 0) {
            return Err(Error::param("panel settings must be positive"));
        }
        let names = self.names();
        for (k, n) in names.iter().enumerate() {
            if names[..k].contains(n) {
                return Err(Error::param(format!("descriptor {n} appears twice")));
            }
        }
        for d in &self.descriptors {
            match *d {
                Descriptor::PairCorrelation { r } if !(r > 0.0) => {
                    return Err(Error::param("pair correlation radius must be positive"))
                }
                Descriptor::SphericalContactQuantile { p } if !(p > 0.0 && p < 1.0) => {
                    return Err(Error::param("contact quantile must lie in (0, 1)"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Values of every descriptor, in panel order. Random probes are drawn
    /// from `seed`.
    pub fn evaluate(&self, config: &Configuration, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let window = interior_window(config)?;
        let tri = Triangulation::build(config)?;
        let net = if self.descriptors.iter().any(Descriptor::needs_network) {
            Some(build_contact_network(config, &tri, ContactRule::HardTolerance { eps: self.contact_eps })?)
        } else {
            None
        };
        let interior: Vec<usize> =
            (0..config.len()).filter(|&i| window.contains(&config.spheres[i].center)).collect();
        if interior.is_empty() {
            return Err(Error::Window("no sphere center in the interior window".into()));
        }
        let shared = Shared {
            window,
            tri,
            net,
            interior,
        };
        self.descriptors
            .iter()
            .map(|d| self.one(d, config, &shared, seed))
            .collect()
    }

    fn one(&self, d: &Descriptor, config: &Configuration, sh: &Shared, seed: u64) -> Result<f64> {
        let net = || sh.net.as_ref().expect("network built for network descriptors");
        match *d {
            Descriptor::VolumeFraction => interior_volume_fraction(config),
            Descriptor::MeanCoordination => {
                let deg = net().degrees();
                Ok(sh.interior.iter().map(|&i| deg[i] as f64).sum::<f64>() / sh.interior.len() as f64)
            }
            Descriptor::RattlerFraction => {
                let rattlers = find_rattlers(config, net(), &sh.tri);
                let count = sh.interior.iter().filter(|i| rattlers.binary_search(i).is_ok()).count();
                Ok(count as f64 / sh.interior.len() as f64)
            }
            Descriptor::Q6Global => {
                let bonds = BondSet::from_contacts(config, net(), &sh.tri, &sh.interior);
                Ok(bond_orientational(&bonds, 6)?.global_sum)
            }
            Descriptor::PairCorrelation { r } => {
                let pattern = PointPattern::from_config(config, &sh.window)?;
                let w = self.shell_width;
                let bin = (r / w + 1e-9).floor() as usize;
                let pc = pair_correlation(&pattern, w, (bin + 1) as f64 * w, EdgeCorrection::MinusSampling)?;
                Ok(pc.g.values[bin])
            }
            Descriptor::SphericalContactQuantile { p } => {
                let design = SampleDesign::UniformRandom {
                    count: self.samples,
                    seed: derive_named(seed, "void probes"),
                };
                let dist = void_surface_distances(config, &sh.window, &design)?;
                let k = ((p * dist.len() as f64).ceil() as usize).clamp(1, dist.len());
                Ok(dist[k - 1])
            }
            Descriptor::BulkResistance => {
                let electrodes = Electrodes::axis_quantile(config, 0, 0.1)?;
                let rnet = build_axis_network(config, net(), 0, electrodes)?;
                Ok(solve_bulk_resistance(&rnet)?.resistance)
            }
            Descriptor::EscapeMedian => Ok(escape_fraction(config, &sh.tri)?.median()),
        }
    }
}

/// A statistic evaluated on a grid of radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Curve {
    /// Pair correlation in shells of the given width; the grid radii pick
    /// the shells.
    PairCorrelation { shell_width: f64 },
    /// Reduced second moment function.
    KFunction,
    /// Spherical contact distribution from random void probes.
    SphericalContact { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDescriptor {
    pub curve: Curve,
    pub r_grid: Vec<f64>,
}

impl CurveDescriptor {
    pub fn name(&self) -> &'static str {
        match self.curve {
            Curve::PairCorrelation { .. } => "g",
            Curve::KFunction => "K",
            Curve::SphericalContact { .. } => "S",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_grid.len() < 2 || self.r_grid.windows(2).any(|w| !(w[1] > w[0])) || !(self.r_grid[0] > 0.0) {
            return Err(Error::param("curve grid needs at least two increasing positive radii"));
        }
        Ok(())
    }

    pub fn evaluate(&self, config: &Configuration, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let window = interior_window(config)?;
        let last = *self.r_grid.last().unwrap();
        match self.curve {
            Curve::PairCorrelation { shell_width } => {
                let pattern = PointPattern::from_config(config, &window)?;
                let top = ((last / shell_width + 1e-9).floor() + 1.0) * shell_width;
                let pc = pair_correlation(&pattern, shell_width, top, EdgeCorrection::MinusSampling)?;
                Ok(self
                    .r_grid
                    .iter()
                    .map(|&r| pc.g.values[(r / shell_width + 1e-9).floor() as usize])
                    .collect())
            }
            Curve::KFunction => {
                let pattern = PointPattern::from_config(config, &window)?;
                Ok(k_function(&pattern, &self.r_grid, EdgeCorrection::Translation)?.values)
            }
            Curve::SphericalContact { samples } => {
                let design = SampleDesign::UniformRandom {
                    count: samples,
                    seed: derive_named(seed, "void probes"),
                };
                Ok(spherical_contact(config, &window, &self.r_grid, &design)?.values)
            }
        }
    }
}
