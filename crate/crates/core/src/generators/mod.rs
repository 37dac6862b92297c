//! Packing generators.

pub mod bennett;
pub mod deposition;
pub mod jodrey_tory;
pub mod lubachevsky;
pub mod rsa;

pub use bennett::{bennett_central, BennettParams, SeedCluster};
pub use deposition::{
    default_lateral, redeposit, shake_redeposit, visscher_bolsterli, vold_ballistic, ShakeOutcome, ShakeParams, VbParams,
    VoldParams,
};
pub use jodrey_tory::{jodrey_tory, jodrey_tory_from, JtParams};
pub use lubachevsky::{lubachevsky_stillinger, LsParams};
pub use rsa::{periodic_box_for, rsa_initialize, RsaParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ball_volume, Boundary, Configuration, Vec3};
use crate::rng::derive_named;
use crate::stats::{exact_volume_fraction, Window};

/// A generator and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Rsa(RsaParams),
    VoldBallistic(VoldParams),
    VisscherBolsterli(VbParams),
    BennettCentral(BennettParams),
    JodreyTory(JtParams),
    LubachevskyStillinger(LsParams),
    ShakeRedeposit(ShakeSpec),
}

/// Shaking applied to the output of a deposition generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShakeSpec {
    pub base: Box<GeneratorSpec>,
    #[serde(default)]
    pub shake: ShakeParams,
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::Rsa(_) => "rsa",
            GeneratorSpec::VoldBallistic(_) => "vold_ballistic",
            GeneratorSpec::VisscherBolsterli(_) => "visscher_bolsterli",
            GeneratorSpec::BennettCentral(_) => "bennett_central",
            GeneratorSpec::JodreyTory(_) => "jodrey_tory",
            GeneratorSpec::LubachevskyStillinger(_) => "lubachevsky_stillinger",
            GeneratorSpec::ShakeRedeposit(_) => "shake_redeposit",
        }
    }

    /// Number of spheres requested.
    pub fn n(&self) -> usize {
        match self {
            GeneratorSpec::Rsa(p) => p.n,
            GeneratorSpec::VoldBallistic(p) => p.n,
            GeneratorSpec::VisscherBolsterli(p) => p.n,
            GeneratorSpec::BennettCentral(p) => p.n,
            GeneratorSpec::JodreyTory(p) => p.n,
            GeneratorSpec::LubachevskyStillinger(p) => p.n,
            GeneratorSpec::ShakeRedeposit(s) => s.base.n(),
        }
    }

    /// Checks that need no generation.
    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::param("n must be at least 1"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            GeneratorSpec::VoldBallistic(p) if !(0.0..=1.0).contains(&p.p_stick) => {
                Err(Error::param(format!("p_stick must lie in [0, 1], got {}", p.p_stick)))
            }
            GeneratorSpec::VisscherBolsterli(p) if p.k_drops == 0 => Err(Error::param("k_drops must be at least 1")),
            GeneratorSpec::JodreyTory(p) => {
                positive("shrink", p.shrink)?;
                positive("grow", p.grow)?;
                positive("stop_gap", p.stop_gap)
            }
            GeneratorSpec::LubachevskyStillinger(p) => positive("growth_rate", p.growth_rate),
            GeneratorSpec::ShakeRedeposit(s) => {
                if !matches!(
                    *s.base,
                    GeneratorSpec::VoldBallistic(_) | GeneratorSpec::VisscherBolsterli(_)
                ) {
                    return Err(Error::param("shaking needs a deposition generator as its base"));
                }
                positive("sigma_up", s.shake.sigma_up)?;
                positive("sigma_move", s.shake.sigma_move)?;
                s.base.validate()
            }
            _ => Ok(()),
        }
    }
}

/// Run a generator. Deterministic in `(spec, seed)`.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Configuration> {
    spec.validate()?;
    match spec {
        GeneratorSpec::Rsa(p) => rsa_initialize(p, seed),
        GeneratorSpec::VoldBallistic(p) => vold_ballistic(p, seed),
        GeneratorSpec::VisscherBolsterli(p) => visscher_bolsterli(p, seed),
        GeneratorSpec::BennettCentral(p) => bennett_central(p, seed),
        GeneratorSpec::JodreyTory(p) => jodrey_tory(p, seed),
        GeneratorSpec::LubachevskyStillinger(p) => lubachevsky_stillinger(p, seed),
        GeneratorSpec::ShakeRedeposit(s) => {
            let base = generate(&s.base, seed)?;
            Ok(shake_redeposit(&base, &s.shake, derive_named(seed, "shake"))?.configuration)
        }
    }
}

/// Margin kept clear of a base, a free surface or a hard wall, in diameters.
pub const BASE_MARGIN: f64 = 2.0;
/// Margin kept clear of the surface of a free-standing cluster.
pub const CLUSTER_MARGIN: f64 = 2.0;
/// Radius of the seed-shaped core left out of cluster fractions.
pub const CLUSTER_CORE: f64 = 5.0;

/// Window well away from the boundary effects of each kind of packing:
/// the whole torus for periodic boxes, a slab clear of the base and of the
/// lowest point of the free surface for deposits, the cube inscribed in the
/// ball clear of the surface for clusters, and the eroded box for hard walls.
pub fn interior_window(config: &Configuration) -> Result<Window> {
    let dim = config.dim;
    let v = dim - 1;
    match config.boundary {
        Boundary::Periodic { .. } => Window::torus(config),
        Boundary::HardBox { extents } => {
            let whole = Window::boxed(dim, Vec3::zeros(), extents)?;
            if whole.min_extent() > 4.0 * BASE_MARGIN {
                whole.eroded(BASE_MARGIN)
            } else {
                Ok(whole)
            }
        }
        Boundary::OpenWithBase { lateral } => {
            // Surface: the lowest of the column maxima over lateral cells
            // about two diameters wide.
            let cells: Vec<usize> = (0..v).map(|k| ((lateral[k] / 2.0).floor() as usize).max(1)).collect();
            let total: usize = cells.iter().product();
            let mut top = vec![f64::NEG_INFINITY; total];
            for s in &config.spheres {
                let mut idx = 0;
                for k in (0..v).rev() {
                    let c = ((s.center[k] / lateral[k] * cells[k] as f64) as usize).min(cells[k] - 1);
                    idx = idx * cells[k] + c;
                }
                top[idx] = top[idx].max(s.center[v]);
            }
            let surface = top.iter().copied().fold(f64::INFINITY, f64::min);
            let lo_z = BASE_MARGIN;
            let hi_z = surface - BASE_MARGIN;
            if !(hi_z > lo_z + 1.0) {
                return Err(Error::Window(format!(
                    "deposit too shallow for an interior window (surface at {surface:.3})"
                )));
            }
            let mut lo = Vec3::zeros();
            let mut hi = lateral;
            lo[v] = lo_z;
            hi[v] = hi_z;
            Window::boxed(dim, lo, hi)
        }
        Boundary::None => {
            let n = config.len() as f64;
            let centroid = config.spheres.iter().map(|s| s.center).sum::<Vec3>() / n;
            let reach = config
                .spheres
                .iter()
                .map(|s| (s.center - centroid).norm())
                .fold(0.0, f64::max);
            let inner = reach - CLUSTER_MARGIN;
            if inner <= 1.0 {
                return Err(Error::Window("cluster too small for an interior window".into()));
            }
            let half = inner / (dim as f64).sqrt();
            let mut lo = centroid;
            let mut hi = centroid;
            for k in 0..dim {
                lo[k] -= half;
                hi[k] += half;
            }
            Window::boxed(dim, lo, hi)
        }
    }
}

/// Exact solid fraction away from boundary effects: over [`interior_window`]
/// for boxed packings, and over the spherical shell between the
/// seed-shaped core and the surface margin for free-standing clusters (the
/// whole ball inside the margin when the cluster is too small for a shell).
pub fn interior_volume_fraction(config: &Configuration) -> Result<f64> {
    if config.boundary != Boundary::None {
        return exact_volume_fraction(config, &interior_window(config)?);
    }
    let n = config.len() as f64;
    let centroid = config.spheres.iter().map(|s| s.center).sum::<Vec3>() / n;
    let reach = config
        .spheres
        .iter()
        .map(|s| (s.center - centroid).norm())
        .fold(0.0, f64::max);
    let outer = reach - CLUSTER_MARGIN;
    if outer <= 1.0 {
        return Err(Error::Window("cluster too small for an interior window".into()));
    }
    let inner = if outer > CLUSTER_CORE + 1.0 { CLUSTER_CORE } else { 0.0 };
    Ok(shell_fraction(config, &centroid, inner, outer))
}

/// Exact solid fraction of the shell `inner <= |x - center| <= outer`.
pub fn shell_fraction(config: &Configuration, center: &Vec3, inner: f64, outer: f64) -> f64 {
    let dim = config.dim;
    let mut solid = 0.0;
    for s in &config.spheres {
        let d = (s.center - center).norm();
        solid += lens(dim, s.radius, outer, d) - lens(dim, s.radius, inner, d);
    }
    solid / (ball_volume(dim, outer) - ball_volume(dim, inner))
}

/// Measure of the intersection of balls of radii `r` and `big` with centers
/// `d` apart.
pub(crate) fn lens(dim: usize, r: f64, big: f64, d: f64) -> f64 {
    if d >= r + big || r <= 0.0 || big <= 0.0 {
        return 0.0;
    }
    if d <= (big - r).abs() {
        return ball_volume(dim, r.min(big));
    }
    if dim == 3 {
        let t = r + big - d;
        std::f64::consts::PI * t * t * (d * d + 2.0 * d * r - 3.0 * r * r + 2.0 * d * big + 6.0 * r * big - 3.0 * big * big)
            / (12.0 * d)
    } else {
        // Two circular segments cut by the common chord, at signed distances
        // x and d - x from the centers.
        let x = (d * d + (r - big) * (r + big)) / (2.0 * d);
        let segment = |rho: f64, h: f64| {
            let half = ((rho - h) * (rho + h)).max(0.0).sqrt();
            rho * rho * half.atan2(h) - h * half
        };
        segment(r, x) + segment(big, d - x)
    }
}
