//! One function per subcommand. Each validates its parameters against the
//! library preconditions before doing any heavy work.

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::grid::Grid;
use crate::output::{num, write_file, Check, Outcome, Table};
use dnls_core::gff_sampler::{concentration_report, mass_sample_expsum, max_exceedance_report, sample_mgff};
use dnls_core::gibbs_sampler::{
    small_n_partition_estimate, zero_nu_log_partition, Chain, ChainOptions, ChainState, InitState, ModelParams,
    ObservableRecord, PartitionOptions,
};
use dnls_core::phase_diagram::{xi, xi_argmin, PhaseModel, PhaseOptions, PhasePoint, Region, ScanRow};
use dnls_core::soliton::{
    decay_fit, dirichlet_minimize, embed_box_in_torus, evolve_dnls, excitation_threshold_r_p, minimal_energy_i,
    torus_hamiltonian, EvolveOptions, IOptions, InitPolicy, JTable, JTableOptions, MinimizeOptions, SolitonResult,
};
use dnls_core::thermo::QuadratureSpec;
use dnls_core::{ComplexField, Error, ThermoFunctions, TorusSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::path::{Path, PathBuf};

pub fn run(cfg: &RunConfig) -> CliResult<Outcome> {
    let cache = cfg.cache_dir.as_deref();
    match &cfg.command {
        Command::Constants(c) => constants(c, cfg.seed, cache),
        Command::ThermoCurve(c) => thermo_curve(c, cfg.seed, cache),
        Command::Soliton(c) => soliton(c),
        Command::PhaseScan(c) => phase_scan(c, cfg.seed, cache),
        Command::ThetaC(c) => theta_c(c, cfg.seed, cache),
        Command::GffVerify(c) => gff_verify(c, cfg.seed, cache),
        Command::GibbsRun(c) => gibbs_run(c, cfg.seed),
        Command::XiCurve(c) => xi_curve(c),
        Command::DnlsEvolve(c) => dnls_evolve(c, cfg.seed),
    }
}

fn thermo(d: usize, method: Method, points: u64, seed: u64, cache: Option<&Path>) -> CliResult<ThermoFunctions> {
    let quad = QuadratureSpec {
        seed,
        ..QuadratureSpec::with_method(method.into(), points)
    };
    Ok(match cache {
        Some(dir) => ThermoFunctions::with_cache(d, quad, dir)?,
        None => ThermoFunctions::with_quadrature(d, quad)?,
    })
}

/// Flushes the disk cache and returns its path, if any.
fn finish_cache(t: &ThermoFunctions) -> CliResult<Vec<PathBuf>> {
    t.flush_cache()?;
    Ok(t.cache_path().into_iter().collect())
}

fn check_p(p: f64) -> CliResult<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("nonlinearity p must exceed 1, got {p}")).into());
    }
    Ok(())
}

fn constants(c: &Constants, seed: u64, cache: Option<&Path>) -> CliResult<Outcome> {
    let last = c.d_max.max(c.d);
    let mut table = Table::new(&["d", "C_d", "error", "K0", "method"]);
    let mut parts = Vec::new();
    let mut caches = Vec::new();
    let mut values = Vec::new();
    for d in c.d..=last {
        let t = match thermo(d, c.method, c.points, seed, cache) {
            // a range may start in the recurrent dimensions
            Err(CliError::Core(Error::DivergentConstant(_))) if last > c.d => {
                table.push(&[
                    d.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "divergent".into(),
                ]);
                parts.push(format!("C_{d} = inf"));
                values.push(json!({"d": d, "c_d": null}));
                continue;
            }
            r => r?,
        };
        let est = t.c_d_estimate();
        table.push(&[
            d.to_string(),
            num(est.value),
            num(est.error),
            num(t.k0()),
            QuadratureSpec::with_method(c.method.into(), c.points)
                .method
                .name()
                .to_string(),
        ]);
        parts.push(format!("C_{d} = {:.6} ± {:.1e}", est.value, est.error));
        values.push(json!({"d": d, "c_d": est.value, "error": est.error, "k0": t.k0()}));
        for path in finish_cache(&t)? {
            if !caches.contains(&path) {
                caches.push(path);
            }
        }
    }
    let cache_note = match caches.first() {
        Some(p) => format!(" (cache: {})", p.display()),
        None => String::new(),
    };
    Ok(Outcome {
        table,
        summary: format!("{}{cache_note}", parts.join(", ")),
        report: json!({ "constants": values }),
        caches,
        ..Default::default()
    })
}

fn thermo_curve(c: &ThermoCurve, seed: u64, cache: Option<&Path>) -> CliResult<Outcome> {
    let grid = c.grid.values();
    if grid.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("curve grid values must be nonnegative".into()).into());
    }
    let t = thermo(c.d, c.method, c.points, seed, cache)?;
    let table = match c.curve {
        Curve::W => {
            if grid.iter().any(|b| !(*b > 0.0)) {
                return Err(Error::InvalidArgument("mass densities b must be positive".into()).into());
            }
            let mut table = Table::new(&["b", "L", "W", "W_hat"]);
            for &b in &grid {
                let w_hat = if b <= t.c_d() { t.w_hat(b)? } else { f64::NAN };
                table.push(&[num(b), num(t.l(b)?), num(t.w(b)?), num(w_hat)]);
            }
            table
        }
        Curve::K => {
            let mut table = Table::new(&["y", "K", "K_err", "Kprime", "Kprime_err"]);
            for &y in &grid {
                let k = t.k(y)?;
                let kp = t.k_prime(y)?;
                table.push(&[num(y), num(k.value), num(k.error), num(kp.value), num(kp.error)]);
            }
            table
        }
    };
    Ok(Outcome {
        summary: format!(
            "{} rows of the {:?} curve in d={}, C_d = {:.6}",
            table.rows.len(),
            c.curve,
            c.d,
            t.c_d()
        ),
        report: json!({"c_d": t.c_d(), "k0": t.k0()}),
        caches: finish_cache(&t)?,
        table,
        ..Default::default()
    })
}

fn soliton(c: &Soliton) -> CliResult<Outcome> {
    check_p(c.p)?;
    let masses = c.a.values();
    if masses.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidArgument("masses a must be positive".into()).into());
    }
    let threshold = excitation_threshold_r_p(c.p, c.d, 1e-6)?;
    let minimize = MinimizeOptions {
        tol: c.tol,
        max_iters: c.max_iters,
    };
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();
    let table = if c.campaign {
        let opts = IOptions {
            threshold: Some(threshold.r_p),
            minimize,
            ..IOptions::default()
        };
        let mut table = Table::new(&["a", "I", "I_err", "J", "clamped", "upper_bound_only"]);
        for &a in &masses {
            let est = minimal_energy_i(a, c.p, c.d, &opts)?;
            table.push(&[
                num(a),
                num(est.value),
                num(est.error),
                num(est.value / a),
                est.clamped.to_string(),
                est.upper_bound_only.to_string(),
            ]);
        }
        table
    } else {
        let init = match c.init {
            SolitonInit::Gaussian => InitPolicy::Gaussian,
            SolitonInit::Spike => InitPolicy::Spike,
            SolitonInit::Uniform => InitPolicy::Uniform,
            SolitonInit::MultiStart => InitPolicy::MultiStart,
        };
        let mut table = Table::new(&[
            "a",
            "energy",
            "omega",
            "residual",
            "converged",
            "max_site_fraction",
            "decay_rate",
            "decay_r2",
        ]);
        let mut last: Option<SolitonResult> = None;
        let mut unconverged = Vec::new();
        for &a in &masses {
            let r = match dirichlet_minimize(a, c.p, c.box_m, c.d, &init, &minimize) {
                Ok(r) => r,
                Err(Error::ConvergenceFailure { best: Some(b), .. }) => *b,
                Err(e) => return Err(e.into()),
            };
            if !r.converged {
                unconverged.push(a);
            }
            let (rate, r2) = decay_fit(&r.profile)
                .map(|f| (f.omega0, f.r2))
                .unwrap_or((f64::NAN, f64::NAN));
            table.push(&[
                num(a),
                num(r.energy),
                num(r.omega),
                num(r.residual),
                r.converged.to_string(),
                num(r.profile.max_site_fraction()),
                num(rate),
                num(r2),
            ]);
            last = Some(r);
        }
        checks.push(Check::new(
            "residual",
            unconverged.is_empty(),
            format!("Euler-Lagrange residual above {:e} at masses {unconverged:?}", c.tol),
        ));
        if !c.profile.is_empty() {
            if let Some(r) = &last {
                let path = PathBuf::from(&c.profile);
                write_file(&path, &r.profile.to_csv())?;
                artifacts.push(path);
            }
        }
        table
    };
    Ok(Outcome {
        summary: format!(
            "{} masses at p={}, d={}; R_p = {:.6} (quotient {:.6}, bisection {:.6})",
            masses.len(),
            c.p,
            c.d,
            threshold.r_p,
            threshold.quotient,
            threshold.bisection
        ),
        report: json!({ "threshold": threshold }),
        table,
        checks,
        artifacts,
        ..Default::default()
    })
}

#[allow(clippy::too_many_arguments)]
fn phase_model(
    d: usize,
    p: f64,
    a_max: f64,
    box_m: usize,
    ratio: f64,
    opts: PhaseOptions,
    method: Method,
    points: u64,
    seed: u64,
    cache: Option<&Path>,
) -> CliResult<PhaseModel> {
    let t = thermo(d, method, points, seed, cache)?;
    let jopts = JTableOptions {
        ratio,
        box_m,
        ..JTableOptions::default()
    };
    let jt = JTable::build(p, d, a_max, &jopts)?;
    Ok(PhaseModel::new(t, jt, opts)?)
}

fn region_name(r: Region) -> &'static str {
    match r {
        Region::Dispersive => "dispersive",
        Region::Solitonic => "solitonic",
        Region::NearBoundary => "near-boundary",
    }
}

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

/// Counts `(θ, ν)` pairs that break the staircase: a solitonic point must
/// stay solitonic when θ or ν grows.
pub fn staircase_violations(rows: &[ScanRow]) -> usize {
    let solitonic = |r: &ScanRow| matches!(&r.result, Ok(res) if res.phase == Region::Solitonic);
    let mut count = 0;
    for a in rows.iter().filter(|r| solitonic(r)) {
        count += rows
            .iter()
            .filter(|b| b.theta >= a.theta && b.nu >= a.nu && b.result.is_ok() && !solitonic(b))
            .count();
    }
    count
}

fn phase_scan(c: &PhaseScan, seed: u64, cache: Option<&Path>) -> CliResult<Outcome> {
    check_p(c.p)?;
    let thetas = c.theta.values();
    let nus = c.nu.values();
    for &th in &thetas {
        for &nu in &nus {
            PhasePoint::new(th, nu)?;
        }
    }
    let opts = PhaseOptions {
        grid: c.a_grid,
        refine_tol: c.refine_tol,
        tol_a: c.tol_a,
        ..PhaseOptions::default()
    };
    let nu_max = nus.iter().copied().fold(0.0, f64::max);
    let model = phase_model(
        c.d,
        c.p,
        1.05 * nu_max,
        c.box_m,
        c.ratio,
        opts,
        c.method,
        c.points,
        seed,
        cache,
    )?;
    let r_p = model.r_p();
    let mut rows = model.scan(&thetas, &nus);
    let mut curve = Vec::new();
    if c.mark_boundary {
        for &nu in nus.iter().filter(|&&nu| nu > r_p) {
            curve.push((nu, model.theta_c(nu, c.bisect_tol)?.theta_c));
        }
        PhaseModel::mark_near_boundary(&mut rows, &curve, 2.0 * c.bisect_tol);
    }
    let mut table = Table::new(&["theta", "nu", "F", "a_star", "region", "err_flags"]);
    let mut failures = 0;
    let mut solitonic = 0;
    for row in &rows {
        match &row.result {
            Ok(r) => {
                let mut flags = Vec::new();
                if r.minimizer_set.len() > 1 {
                    flags.push("multiple-minimizers");
                }
                if r.a_star > 0.0 && r.a_star >= r.a_m * (1.0 - 1e-9) {
                    flags.push("at-search-cap");
                }
                if r.phase == Region::Solitonic {
                    solitonic += 1;
                }
                table.push(&[
                    num(row.theta),
                    num(row.nu),
                    num(r.f),
                    num(r.a_star),
                    region_name(r.region).to_string(),
                    flags.join(";"),
                ]);
            }
            Err(msg) => {
                failures += 1;
                table.push(&[
                    num(row.theta),
                    num(row.nu),
                    String::new(),
                    String::new(),
                    "error".to_string(),
                    format!("error: {}", sanitize(msg)),
                ]);
            }
        }
    }
    let stairs = staircase_violations(&rows);
    let low = rows
        .iter()
        .filter(|r| r.nu <= r_p && matches!(&r.result, Ok(res) if res.phase == Region::Solitonic))
        .count();
    let checks = vec![
        Check::new("row-failures", failures == 0, format!("{failures} grid points failed")),
        Check::new("staircase", stairs == 0, format!("{stairs} monotonicity violations")),
        Check::new(
            "below-threshold",
            low == 0,
            format!("{low} solitonic points with nu <= R_p"),
        ),
    ];
    let caches = finish_cache(model.thermo())?;
    Ok(Outcome {
        summary: format!(
            "{} points, {solitonic} solitonic, {failures} failed; R_p = {r_p:.6}, C_d = {:.6}",
            rows.len(),
            model.thermo().c_d()
        ),
        report: json!({
            "r_p": r_p,
            "c_d": model.thermo().c_d(),
            "xi0": model.xi0(),
            "theta_c": curve,
        }),
        table,
        checks,
        caches,
        ..Default::default()
    })
}

fn theta_c(c: &ThetaC, seed: u64, cache: Option<&Path>) -> CliResult<Outcome> {
    check_p(c.p)?;
    let nus = c.nu.values();
    if nus.iter().any(|n| !(*n > 0.0)) {
        return Err(Error::InvalidArgument("nu must be positive".into()).into());
    }
    if !(c.tol > 0.0) {
        return Err(Error::InvalidArgument("bisection tolerance must be positive".into()).into());
    }
    let nu_max = nus.iter().copied().fold(0.0, f64::max);
    let model = phase_model(
        c.d,
        c.p,
        1.05 * nu_max,
        c.box_m,
        c.ratio,
        PhaseOptions::default(),
        c.method,
        c.points,
        seed,
        cache,
    )?;
    let mut table = Table::new(&["nu", "theta_c", "cap", "cap_ok", "evaluations", "error"]);
    let mut above = Vec::new();
    for &nu in &nus {
        match model.theta_c(nu, c.tol) {
            Ok(t) => {
                if t.theta_c > t.cap {
                    above.push(nu);
                }
                table.push(&[
                    num(nu),
                    num(t.theta_c),
                    num(t.cap),
                    t.cap_ok.to_string(),
                    t.evaluations.to_string(),
                    String::new(),
                ]);
            }
            Err(e @ Error::InvalidArgument(_)) => {
                table.push(&[
                    num(nu),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    sanitize(&e.to_string()),
                ]);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut checks = Vec::new();
    if c.check_cap {
        checks.push(Check::new(
            "cap",
            above.is_empty(),
            format!("theta_c above its cap at nu = {above:?}"),
        ));
    }
    Ok(Outcome {
        summary: format!(
            "{} values of nu, R_p = {:.6}; {} above the analytic cap",
            nus.len(),
            model.r_p(),
            above.len()
        ),
        report: json!({"r_p": model.r_p(), "xi0": model.xi0(), "above_cap": above}),
        caches: finish_cache(model.thermo())?,
        table,
        checks,
        ..Default::default()
    })
}

fn xi_curve(c: &XiCurve) -> CliResult<Outcome> {
    check_p(c.p_min)?;
    if c.p_max < c.p_min || c.count == 0 {
        return Err(CliError::config("need p-max >= p-min and a positive count"));
    }
    if !(c.t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t must be nonnegative, got {}", c.t)).into());
    }
    let grid = Grid::Linear {
        lo: c.p_min,
        hi: c.p_max,
        count: c.count,
    };
    let mut table = Table::new(&["p", "t", "xi", "argmin"]);
    for p in grid.values() {
        let arg = if c.t == 0.0 { xi_argmin(p) } else { f64::NAN };
        table.push(&[num(p), num(c.t), num(xi(p, c.t)?), num(arg)]);
    }
    Ok(Outcome {
        summary: format!(
            "{} values of xi_p({}) for p in [{}, {}]",
            c.count, c.t, c.p_min, c.p_max
        ),
        table,
        ..Default::default()
    })
}

fn gff_verify(c: &GffVerify, seed: u64, cache: Option<&Path>) -> CliResult<Outcome> {
    let spec = TorusSpec::new(c.d, c.n)?;
    if c.samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()).into());
    }
    let t = thermo(c.d, c.method, c.points, seed, cache)?;
    let conc = concentration_report(&spec, c.b, c.eps, c.samples, seed, &t)?;
    let maxr = max_exceedance_report(&spec, c.b, c.samples, seed.wrapping_add(1), c.factor, &t)?;
    // the concentration report draws exactly these masses
    let masses = mass_sample_expsum(&spec, conc.y, seed, c.samples)?;
    let big_n = spec.num_sites() as f64;
    let mut table = Table::new(&["sample", "mass", "mass_per_site"]);
    for (i, m) in masses.iter().enumerate() {
        table.push(&[i.to_string(), num(*m), num(m / big_n)]);
    }
    let checks = vec![
        Check::new(
            "concentration",
            conc.frequency >= conc.chebyshev_bound,
            format!(
                "frequency {} vs Chebyshev bound {}",
                conc.frequency, conc.chebyshev_bound
            ),
        ),
        Check::new(
            "max-exceedance",
            maxr.frequency <= c.max_exceedance,
            format!("frequency {} vs limit {}", maxr.frequency, c.max_exceedance),
        ),
    ];
    if !conc.hypothesis_ok {
        log::warn!(
            "N eps^d = {:.3} is small; the concentration regime is not reached",
            conc.n_eps_d
        );
    }
    Ok(Outcome {
        summary: format!(
            "concentration {:.4} (Chebyshev {:.4}), max exceedance {:.4} over {} samples",
            conc.frequency, conc.chebyshev_bound, maxr.frequency, c.samples
        ),
        report: json!({"concentration": conc, "max_exceedance": maxr}),
        caches: finish_cache(&t)?,
        table,
        checks,
        ..Default::default()
    })
}

fn parse_chain_init(s: &str) -> CliResult<InitState> {
    match s.split_once(':') {
        None if s == "zero" => Ok(InitState::Zero),
        Some(("spike", f)) => f
            .parse::<f64>()
            .map(InitState::Spike)
            .map_err(|_| CliError::config(format!("--init: bad spike fraction `{f}`"))),
        _ => Err(CliError::config(format!(
            "--init: expected `zero` or `spike:<fraction>`, got `{s}`"
        ))),
    }
}

fn gibbs_run(c: &GibbsRun, seed: u64) -> CliResult<Outcome> {
    let spec = TorusSpec::new(c.d, c.n)?;
    let params = ModelParams::new(c.theta, c.nu, c.p, spec)?;
    let opts = ChainOptions {
        sweeps: c.sweeps,
        burn_in: c.burn_in,
        thin: c.thin,
        proposal_scale: c.proposal_scale,
        adapt: c.adapt,
        target_acceptance: c.target_acceptance,
        refresh_every: c.refresh_every,
    };
    let mut chain = if c.resume.is_empty() {
        Chain::new(params, parse_chain_init(&c.init)?, c.proposal_scale, seed)?
    } else {
        let text = std::fs::read_to_string(&c.resume).map_err(|e| CliError::io(&c.resume, e))?;
        let state: ChainState =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("--resume {}: {e}", c.resume)))?;
        if state.params != params {
            return Err(CliError::config(format!(
                "checkpoint {} was written for different model parameters",
                c.resume
            )));
        }
        Chain::from_state(state)
    };
    let out = chain.run(&opts)?;
    for w in &out.header.warnings {
        log::warn!("{w}");
    }
    let columns: Vec<&'static str> = ObservableRecord::CSV_HEADER.split(',').collect();
    let mut table = Table::new(&columns);
    for r in &out.records {
        table.rows.push(r.csv_row());
    }
    let mut artifacts = Vec::new();
    if !c.checkpoint.is_empty() {
        let path = PathBuf::from(&c.checkpoint);
        let text = serde_json::to_string(&out.state).expect("chain state serializes");
        write_file(&path, &text)?;
        artifacts.push(path);
    }
    let mut checks = Vec::new();
    let mut partition = serde_json::Value::Null;
    if c.partition {
        let est = small_n_partition_estimate(
            &params,
            &PartitionOptions {
                samples: c.partition_samples,
                seed,
                bootstrap: c.bootstrap,
                min_ess: c.min_ess,
            },
        )?;
        let exact = if c.nu == 0.0 {
            Some(zero_nu_log_partition(&spec, c.theta)?)
        } else {
            None
        };
        if let Some(x) = exact {
            let z = (est.log_z_per_site - x) / est.std_error;
            checks.push(Check::new(
                "partition-oracle",
                z.abs() <= 3.0,
                format!("{z:+.2} standard errors from the exact value {x}"),
            ));
        }
        partition = json!({"estimate": est, "exact": exact});
    }
    let mean_max = out.records.iter().map(|r| r.max_frac).sum::<f64>() / out.records.len().max(1) as f64;
    Ok(Outcome {
        summary: format!(
            "{} records, acceptance {:.3}, mean max-site fraction {mean_max:.4}{}",
            out.records.len(),
            out.header.acceptance,
            if out.header.warnings.is_empty() {
                ""
            } else {
                " (with warnings)"
            }
        ),
        report: json!({"stream": out.header, "partition": partition, "sweeps_done": out.state.sweeps_done}),
        table,
        checks,
        artifacts,
        ..Default::default()
    })
}

fn initial_field(c: &DnlsEvolve, seed: u64) -> CliResult<ComplexField> {
    let (kind, value) = c
        .init
        .split_once(':')
        .ok_or_else(|| CliError::config(format!("--init: expected kind:value, got `{}`", c.init)))?;
    let value: f64 = value
        .parse()
        .map_err(|_| CliError::config(format!("--init: `{value}` is not a number")))?;
    match kind {
        "soliton" => {
            check_p(c.p)?;
            let opts = MinimizeOptions {
                tol: 1e-11,
                ..MinimizeOptions::default()
            };
            let r = match dirichlet_minimize(value, c.p, c.box_m, c.d, &InitPolicy::MultiStart, &opts) {
                Ok(r) => r,
                Err(Error::ConvergenceFailure {
                    best: Some(b),
                    residual,
                    ..
                }) => {
                    log::warn!("soliton start not fully converged (residual {residual:e})");
                    *b
                }
                Err(e) => return Err(e.into()),
            };
            Ok(embed_box_in_torus(&r.profile, c.buffer)?)
        }
        "random" => {
            let spec = TorusSpec::new(c.d, c.n)?;
            if !(value > 0.0) {
                return Err(Error::InvalidArgument("random amplitude must be positive".into()).into());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = (0..spec.num_sites())
                .map(|_| Complex64::new(rng.gen_range(-value..value), rng.gen_range(-value..value)))
                .collect();
            Ok(ComplexField::from_vec(spec, data)?)
        }
        "gff" => {
            let spec = TorusSpec::new(c.d, c.n)?;
            Ok(sample_mgff(&spec, value, seed)?.field)
        }
        other => Err(CliError::config(format!("--init: unknown kind `{other}`"))),
    }
}

fn dnls_evolve(c: &DnlsEvolve, seed: u64) -> CliResult<Outcome> {
    check_p(c.p)?;
    let psi = initial_field(c, seed)?;
    let opts = EvolveOptions {
        dt: c.dt,
        t_final: c.t_final,
        h: c.h,
        sample_every: c.sample_every,
        ..EvolveOptions::default()
    };
    let tr = evolve_dnls(&psi, c.p, &opts)?;
    let mut table = Table::new(&["t", "mass", "energy", "max_modulus"]);
    for (t, s) in tr.times.iter().zip(&tr.snapshots) {
        let m = s.values().iter().fold(0.0f64, |a, z| a.max(z.norm()));
        table.push(&[num(*t), num(s.mass()), num(torus_hamiltonian(s, c.p, c.h)), num(m)]);
    }
    let checks = vec![
        Check::new(
            "mass",
            tr.mass_drift <= c.drift_tol,
            format!("relative drift {:e}", tr.mass_drift),
        ),
        Check::new(
            "energy",
            tr.energy_drift <= c.drift_tol,
            format!("relative drift {:e}", tr.energy_drift),
        ),
    ];
    Ok(Outcome {
        summary: format!(
            "{} steps on {} sites; mass drift {:.1e}, energy drift {:.1e}",
            tr.steps,
            psi.values().len(),
            tr.mass_drift,
            tr.energy_drift
        ),
        report: json!({"trajectory": tr}),
        table,
        checks,
        ..Default::default()
    })
}
