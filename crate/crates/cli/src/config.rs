//! Command-line flags, JSON config files and their merge.
//!
//! Every command has an options struct whose fields are all optional; the
//! same struct parses flags and config-file `params`. Resolution layers
//! defaults < file < flags and records where each value came from.

use crate::error::{CliError, CliResult};
use crate::grid::Grid;
use clap::{Parser, Subcommand, ValueEnum};
use dnls_core::thermo::QuadMethod;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Where a configuration value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    File,
    Flag,
}

pub type Provenance = BTreeMap<String, Source>;

macro_rules! options {
    (
        $(#[$smeta:meta])*
        $args:ident => $resolved:ident {
            $( $(#[$fmeta:meta])* $field:ident : $ty:ty = $default:expr ),* $(,)?
        }
    ) => {
        $(#[$smeta])*
        #[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $args {
            $(
                $(#[$fmeta])*
                #[arg(long, allow_negative_numbers = true)]
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $resolved {
            $( pub $field: $ty, )*
        }

        impl $args {
            /// Flags win over file values, which win over defaults.
            pub fn resolve(&self, file: &Self, prov: &mut Provenance) -> $resolved {
                $resolved {
                    $( $field: pick(
                        &stringify!($field).replace('_', "-"),
                        self.$field.clone(),
                        file.$field.clone(),
                        || $default,
                        prov,
                    ), )*
                }
            }
        }

        impl From<&$resolved> for $args {
            fn from(r: &$resolved) -> Self {
                Self { $( $field: Some(r.$field.clone()), )* }
            }
        }
    };
}

fn pick<T: Clone + PartialEq + std::fmt::Debug>(
    key: &str,
    flag: Option<T>,
    file: Option<T>,
    default: impl FnOnce() -> T,
    prov: &mut Provenance,
) -> T {
    match (flag, file) {
        (Some(v), f) => {
            if let Some(f) = f {
                if f != v {
                    log::info!("`{key}`: flag value {v:?} overrides config file value {f:?}");
                }
            }
            prov.insert(key.to_string(), Source::Flag);
            v
        }
        (None, Some(f)) => {
            prov.insert(key.to_string(), Source::File);
            f
        }
        (None, None) => {
            prov.insert(key.to_string(), Source::Default);
            default()
        }
    }
}

/// Quadrature rule for the free-field integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Laplace,
    Kronecker,
    TensorGrid,
    LatticeExtrapolation,
}

impl From<Method> for QuadMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Laplace => QuadMethod::Laplace,
            Method::Kronecker => QuadMethod::Kronecker,
            Method::TensorGrid => QuadMethod::TensorGrid,
            Method::LatticeExtrapolation => QuadMethod::LatticeExtrapolation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Curve {
    /// `b, L(b), W(b), Ŵ(b)` over a grid of `b`.
    W,
    /// `y, K(y), K'(y)` over a grid of `y`.
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolitonInit {
    Gaussian,
    Spike,
    Uniform,
    MultiStart,
}

const DEFAULT_POINTS: u64 = 1 << 22;

options! {
    /// Lattice Green constants `C_d = K'(0)`.
    ConstantsArgs => Constants {
        /// Dimension (at least 3).
        d: usize = 3,
        /// Last dimension of a range starting at --d (0 computes --d only).
        d_max: usize = 0,
        /// Quadrature rule.
        #[arg(value_enum)]
        method: Method = Method::Laplace,
        /// Points for the cube rules.
        points: u64 = DEFAULT_POINTS,
    }
}

options! {
    /// Free-field curves `K, K', L, W, Ŵ`.
    ThermoCurveArgs => ThermoCurve {
        d: usize = 3,
        /// Which curve to tabulate.
        #[arg(value_enum)]
        curve: Curve = Curve::W,
        /// Grid of `b` (curve w) or `y` (curve k).
        grid: Grid = "log:0.001:0.25:50".parse().unwrap(),
        #[arg(value_enum)]
        method: Method = Method::Laplace,
        points: u64 = DEFAULT_POINTS,
    }
}

options! {
    /// Dirichlet ground states on boxes, or the box-limit campaign for `I(a)`.
    SolitonArgs => Soliton {
        p: f64 = 3.0,
        d: usize = 3,
        /// Masses `a`.
        a: Grid = Grid::single(20.0),
        /// Box half-width (box side 2m+1).
        box_m: usize = 6,
        #[arg(value_enum)]
        init: SolitonInit = SolitonInit::MultiStart,
        /// Sup-norm tolerance on the Euler-Lagrange residual.
        tol: f64 = 1e-8,
        max_iters: usize = 20_000,
        /// Run the growing-box campaign for `I(a)` instead of a single box.
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        campaign: bool = false,
        /// Write the profile of the last mass to this CSV path.
        profile: String = String::new(),
    }
}

options! {
    /// Variational phase diagram over a `(θ, ν)` grid.
    PhaseScanArgs => PhaseScan {
        d: usize = 3,
        p: f64 = 3.0,
        theta: Grid = "log:0.05:5:64".parse().unwrap(),
        nu: Grid = "log:0.1:50:64".parse().unwrap(),
        /// Coarse grid points in `a` before refinement.
        a_grid: usize = 512,
        /// Width tolerance of the refinement in `a`.
        refine_tol: f64 = 1e-9,
        /// `a_star` above this is solitonic.
        tol_a: f64 = 1e-4,
        /// Bisect `θ_c` on every row and label points within twice the
        /// bisection tolerance as near-boundary.
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        mark_boundary: bool = false,
        bisect_tol: f64 = 1e-7,
        /// Box half-width for the soliton energy table.
        box_m: usize = 8,
        /// Ratio between successive masses of the soliton energy table.
        ratio: f64 = 1.01,
        #[arg(value_enum)]
        method: Method = Method::Laplace,
        points: u64 = DEFAULT_POINTS,
    }
}

options! {
    /// Critical inverse temperature `θ_c(ν)` by bisection.
    ThetaCArgs => ThetaC {
        d: usize = 3,
        p: f64 = 3.0,
        nu: Grid = "log:12:1000:8".parse().unwrap(),
        tol: f64 = 1e-7,
        /// Fail when a value exceeds its analytic cap.
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        check_cap: bool = false,
        box_m: usize = 8,
        ratio: f64 = 1.01,
        #[arg(value_enum)]
        method: Method = Method::Laplace,
        points: u64 = DEFAULT_POINTS,
    }
}

options! {
    /// The auxiliary function `ξ_p(t)` over a range of `p`.
    XiCurveArgs => XiCurve {
        p_min: f64 = 1.5,
        p_max: f64 = 6.0,
        count: usize = 50,
        t: f64 = 0.0,
    }
}

options! {
    /// Concentration and maximum statistics of the massive free field.
    GffVerifyArgs => GffVerify {
        d: usize = 3,
        n: usize = 8,
        /// Mass density `b ∈ (0, C_d)`.
        b: f64 = 0.2,
        /// Half-width of the concentration window.
        eps: f64 = 0.05,
        samples: usize = 500,
        /// Multiple of `sqrt(3 C_d log N)` for the maximum statistic.
        factor: f64 = 1.0,
        /// Largest acceptable exceedance frequency.
        max_exceedance: f64 = 0.05,
        #[arg(value_enum)]
        method: Method = Method::Laplace,
        points: u64 = DEFAULT_POINTS,
    }
}

options! {
    /// Metropolis chain for the constrained Gibbs measure.
    GibbsRunArgs => GibbsRun {
        theta: f64 = 1.0,
        nu: f64 = 1.0,
        p: f64 = 3.0,
        d: usize = 3,
        n: usize = 4,
        sweeps: usize = 10_000,
        burn_in: usize = 100_000,
        thin: usize = 1,
        proposal_scale: f64 = 0.5,
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        adapt: bool = true,
        target_acceptance: f64 = 0.3,
        refresh_every: usize = 100,
        /// `zero` or `spike:<fraction of N>`.
        init: String = "zero".to_string(),
        /// Write the final chain state here.
        checkpoint: String = String::new(),
        /// Resume from a checkpoint written by an earlier run.
        resume: String = String::new(),
        /// Also estimate `(1/N) log Z_N` by importance sampling.
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        partition: bool = false,
        partition_samples: usize = 100_000,
        bootstrap: usize = 200,
        min_ess: f64 = 100.0,
    }
}

options! {
    /// Time evolution of the lattice NLS.
    DnlsEvolveArgs => DnlsEvolve {
        d: usize = 3,
        n: usize = 8,
        p: f64 = 3.0,
        /// `soliton:<mass>`, `random:<amplitude>` or `gff:<y>`.
        init: String = "random:0.5".to_string(),
        /// Box half-width for soliton starts.
        box_m: usize = 6,
        /// Empty layers around an embedded soliton.
        buffer: usize = 3,
        dt: f64 = 1e-3,
        t_final: f64 = 1.0,
        /// Lattice spacing.
        h: f64 = 1.0,
        sample_every: usize = 100,
        /// Largest acceptable relative drift of mass and energy.
        drift_tol: f64 = 1e-8,
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum CommandArgs {
    /// Lattice Green constants C_d.
    Constants(ConstantsArgs),
    /// Free-field thermodynamic curves.
    ThermoCurve(ThermoCurveArgs),
    /// Soliton ground states and minimal energies.
    Soliton(SolitonArgs),
    /// Phase diagram scan over (theta, nu).
    PhaseScan(PhaseScanArgs),
    /// Critical curve theta_c(nu).
    ThetaC(ThetaCArgs),
    /// Free-field sampler checks.
    GffVerify(GffVerifyArgs),
    /// Metropolis chain for the Gibbs measure.
    GibbsRun(GibbsRunArgs),
    /// The xi_p(t) curve.
    XiCurve(XiCurveArgs),
    /// Lattice NLS time evolution.
    DnlsEvolve(DnlsEvolveArgs),
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "dnls",
    version,
    about = "Thermodynamics and phase curve of the focusing discrete NLS"
)]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CSV output path (stdout when absent); a `.json` sidecar is written next to it.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Cache directory for free-field values (default: $DNLS_CACHE_DIR or the user cache).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Disable the disk cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// More log output (repeat for more).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: CommandArgs,
}

/// Fully resolved command and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Command {
    Constants(Constants),
    ThermoCurve(ThermoCurve),
    Soliton(Soliton),
    PhaseScan(PhaseScan),
    ThetaC(ThetaC),
    GffVerify(GffVerify),
    GibbsRun(GibbsRun),
    XiCurve(XiCurve),
    DnlsEvolve(DnlsEvolve),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants(_) => "constants",
            Command::ThermoCurve(_) => "thermo-curve",
            Command::Soliton(_) => "soliton",
            Command::PhaseScan(_) => "phase-scan",
            Command::ThetaC(_) => "theta-c",
            Command::GffVerify(_) => "gff-verify",
            Command::GibbsRun(_) => "gibbs-run",
            Command::XiCurve(_) => "xi-curve",
            Command::DnlsEvolve(_) => "dnls-evolve",
        }
    }
}

/// Everything a run needs; serializes to a file that `--config` accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: Command,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub jobs: usize,
    pub cache_dir: Option<PathBuf>,
}

/// Config file layout: every key optional, unknown keys rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    command: Option<String>,
    params: Option<serde_json::Value>,
    output: Option<PathBuf>,
    seed: Option<u64>,
    jobs: Option<usize>,
    cache_dir: Option<PathBuf>,
}

fn read_file(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("config file {}: {e}", path.display())))
}

fn file_params<T: serde::de::DeserializeOwned + Default>(file: &FileConfig, path: Option<&Path>) -> CliResult<T> {
    match &file.params {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| {
            let name = path.map(|p| p.display().to_string()).unwrap_or_default();
            CliError::config(format!("config file {name}: params: {e}"))
        }),
    }
}

/// Merges defaults, the optional config file and the flags.
pub fn resolve(cli: &Cli) -> CliResult<(RunConfig, Provenance)> {
    let file = match &cli.config {
        Some(p) => read_file(p)?,
        None => FileConfig::default(),
    };
    let path = cli.config.as_deref();
    let mut prov = Provenance::new();
    macro_rules! layer {
        ($variant:ident, $args:expr, $argty:ty) => {{
            let from_file: $argty = file_params(&file, path)?;
            Command::$variant($args.resolve(&from_file, &mut prov))
        }};
    }
    let command = match &cli.command {
        CommandArgs::Constants(a) => layer!(Constants, a, ConstantsArgs),
        CommandArgs::ThermoCurve(a) => layer!(ThermoCurve, a, ThermoCurveArgs),
        CommandArgs::Soliton(a) => layer!(Soliton, a, SolitonArgs),
        CommandArgs::PhaseScan(a) => layer!(PhaseScan, a, PhaseScanArgs),
        CommandArgs::ThetaC(a) => layer!(ThetaC, a, ThetaCArgs),
        CommandArgs::GffVerify(a) => layer!(GffVerify, a, GffVerifyArgs),
        CommandArgs::GibbsRun(a) => layer!(GibbsRun, a, GibbsRunArgs),
        CommandArgs::XiCurve(a) => layer!(XiCurve, a, XiCurveArgs),
        CommandArgs::DnlsEvolve(a) => layer!(DnlsEvolve, a, DnlsEvolveArgs),
    };
    if let Some(name) = &file.command {
        if name != command.name() {
            return Err(CliError::config(format!(
                "config file is for `{name}` but the command is `{}`",
                command.name()
            )));
        }
    }
    let output = pick(
        "output",
        cli.output.clone().map(Some),
        file.output.clone().map(Some),
        || None,
        &mut prov,
    );
    let seed = pick("seed", cli.seed, file.seed, || 0, &mut prov);
    let jobs = pick("jobs", cli.jobs, file.jobs, || 0, &mut prov);
    let cache_dir = if cli.no_cache {
        prov.insert("cache-dir".into(), Source::Flag);
        None
    } else {
        pick(
            "cache-dir",
            cli.cache_dir.clone().map(Some),
            file.cache_dir.clone().map(Some),
            || Some(dnls_core::thermo::default_cache_dir()),
            &mut prov,
        )
    };
    Ok((
        RunConfig {
            command,
            output,
            seed,
            jobs,
            cache_dir,
        },
        prov,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("dnls").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_fill_every_field() {
        let (cfg, prov) = resolve(&parse(&["xi-curve", "--no-cache"])).unwrap();
        match cfg.command {
            Command::XiCurve(x) => assert_eq!((x.p_min, x.p_max, x.count, x.t), (1.5, 6.0, 50, 0.0)),
            other => panic!("{other:?}"),
        }
        assert_eq!(prov["p-min"], Source::Default);
        assert_eq!(cfg.cache_dir, None);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"command":"xi-curve","params":{"p-max":4.0,"count":7},"seed":9}"#,
        )
        .unwrap();
        let cli = parse(&["xi-curve", "--config", path.to_str().unwrap(), "--count", "3"]);
        let (cfg, prov) = resolve(&cli).unwrap();
        match cfg.command {
            Command::XiCurve(x) => assert_eq!((x.p_max, x.count), (4.0, 3)),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.seed, 9);
        assert_eq!(
            (prov["p-max"], prov["count"], prov["seed"]),
            (Source::File, Source::Flag, Source::File)
        );
    }

    #[test]
    fn unknown_keys_and_mismatched_commands_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"params":{"p-maximum":4.0}}"#).unwrap();
        let cli = parse(&["xi-curve", "--config", path.to_str().unwrap()]);
        assert!(matches!(resolve(&cli), Err(CliError::Config(_))));
        std::fs::write(&path, r#"{"colour":"red"}"#).unwrap();
        assert!(resolve(&cli).is_err());
        std::fs::write(&path, r#"{"command":"soliton"}"#).unwrap();
        assert!(resolve(&cli).is_err());
    }

    #[test]
    fn run_config_round_trips_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let cli = parse(&[
            "phase-scan",
            "--theta",
            "0.1:2:5",
            "--nu",
            "log:1:100:4",
            "--seed",
            "4",
            "--no-cache",
        ]);
        let (cfg, _) = resolve(&cli).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        // the serialized form also works as a config file with no flags
        let path = dir.path().join("run.json");
        std::fs::write(&path, &text).unwrap();
        let again = parse(&["phase-scan", "--config", path.to_str().unwrap(), "--no-cache"]);
        assert_eq!(resolve(&again).unwrap().0, cfg);
    }
}
