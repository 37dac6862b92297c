//! `packlab`: generate packings, measure them and assess models against data.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid input,
//! 3 generator failure, 4 inference refused.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "packlab", version, about = "Disordered sphere packing laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Keys shared with the run configuration file; flags win over the file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for outputs and the provenance record.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BondChoice {
    Contacts,
    Neighbors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveChoice {
    /// Pair correlation.
    G,
    /// Reduced second moment.
    K,
    /// Spherical contact distribution.
    S,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate one or more packings.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Generator spec as an inline TOML table, e.g.
        /// '{algorithm = "jodrey_tory", n = 500}'.
        #[arg(long)]
        generator: Option<String>,
        #[arg(long)]
        ensemble_size: Option<usize>,
    },
    /// Volume fraction and radial statistics of a packing.
    Stats {
        packing: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.05)]
        shell_width: f64,
        /// Largest radius of the curves; default 2.5, or less when the
        /// interior window is small.
        #[arg(long)]
        r_max: Option<f64>,
        /// Void probes for the spherical contact distribution.
        #[arg(long, default_value_t = 20000)]
        samples: usize,
        /// Also evaluate the descriptor panel (from the config file, or the
        /// standard one).
        #[arg(long)]
        descriptors: bool,
    },
    /// Voronoi cells, local densities and escape radii.
    Tessellate {
        packing: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Contact network, coordination numbers and rattlers.
    Contacts {
        packing: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Largest surface gap counted as a contact.
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
    },
    /// Bond-orientational order (3D) or topological defects (2D).
    Order {
        packing: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 6)]
        l: usize,
        #[arg(long, value_enum, default_value_t = BondChoice::Contacts)]
        bonds: BondChoice,
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
    },
    /// Bulk resistance of the contact network between two electrode slabs.
    Resist {
        packing: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        axis: usize,
        /// Fraction of the extent along the axis taken by each electrode.
        #[arg(long, default_value_t = 0.1)]
        electrode_fraction: f64,
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
    },
    /// Two-sample tests of a model ensemble against data.
    Assess {
        #[command(flatten)]
        common: Common,
        /// Realizations of the model.
        #[arg(long)]
        ensemble_size: Option<usize>,
        /// Observed packings.
        #[arg(long, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Observed descriptor table, as written by `assess`.
        #[arg(long)]
        data_table: Option<PathBuf>,
        /// A second model configuration standing in for the data.
        #[arg(long)]
        data_config: Option<PathBuf>,
        #[arg(long, default_value_t = 999)]
        permutations: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Minimum-contrast fit of a generator parameter grid to data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Generator spec as an inline TOML table; overrides the config.
        #[arg(long)]
        generator: Option<String>,
        /// Grid axis `name=v1,v2,...`; dotted names reach nested fields.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[arg(long, value_enum, default_value_t = CurveChoice::G)]
        curve: CurveChoice,
        /// Radii `lo:hi:step` or a comma-separated list.
        #[arg(long, default_value = "1.0:2.0:0.05")]
        r_grid: String,
        #[arg(long, default_value_t = 0.05)]
        shell_width: f64,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        replicates: usize,
        #[arg(long, num_args = 1.., required = true)]
        data: Vec<PathBuf>,
        /// Test the fitted model against the data on the descriptor panel.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = 20)]
        check_realizations: usize,
        #[arg(long, default_value_t = 999)]
        permutations: usize,
    },
    /// Convert a bare center list into a packing file.
    Import {
        centers: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Radius for rows without one, in input units.
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        /// Factor converting input units to diameters.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// `none`, or `periodic|hard_box L1 L2 [L3]`, or `open_with_base L1 [L2]`,
        /// in diameters.
        #[arg(long, default_value = "none")]
        boundary: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("packlab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
