//! Command-line front end: run configuration, dispatch, and artifact
//! files.
//!
//! Config files are line-oriented `key = value` text with dotted keys
//! (`grid.n = 257`); `#` starts a comment line. Outputs land in the
//! configured directory: `u.csv`, `omega.csv`, `beta.csv`, `diag.csv`,
//! `report.json`, and always a `manifest.json` (command echo, versions,
//! wall time, exit status) — the manifest is written even when a solver
//! fails to converge (exit 3). Exit codes: 0 success, 2 invalid
//! config/input, 3 solver non-convergence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::capmeasure::{gamma_distance_full, MeasureField};
use crate::error::{Error, Result};
use crate::geometry::{finite_perimeter_diagnostic, measure};
use crate::grid::{disc_mask, DomainMask, Grid, GridFunction};
use crate::io::{self, fmt_f64, Json};
use crate::optimizer::{
    check_hypotheses, control_optimize, free_boundary_minimize, CostSpec, HypothesisReport,
};
use crate::state::{solve_state, SolveOpts, SolveReport, StateProblem};
use crate::supremal::verify_lens_optimality;

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: Grid,
    /// Design region: nodes outside it are hard Dirichlet.
    pub domain: DomainMask,
    pub p: f64,
    pub q: f64,
    pub ell: f64,
    pub lambda: f64,
    pub m: Option<f64>,
    pub f: GridFunction,
    pub g: GridFunction,
    pub opts: SolveOpts,
    pub out_dir: PathBuf,
    pub write_pgm: bool,
    pub diag_eps0: Option<f64>,
    pub diag_octaves: usize,
    /// Raw key-value pairs, echoed into the manifest.
    raw: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "grid.extent",
    "grid.n",
    "domain.kind",
    "domain.center",
    "domain.radius",
    "p",
    "q",
    "ell",
    "lambda",
    "m",
    "f.kind",
    "f.value",
    "f.coeffs",
    "f.path",
    "g.kind",
    "g.value",
    "g.coeffs",
    "g.path",
    "solver.tolerance",
    "solver.max_iters",
    "output.dir",
    "output.pgm",
    "diag.eps0",
    "diag.octaves",
];

fn parse_floats(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse(format!("{}: bad number {:?}", key, t)))
        })
        .collect()
}

fn parse_one_float(key: &str, value: &str) -> Result<f64> {
    let v = parse_floats(key, value)?;
    if v.len() != 1 {
        return Err(Error::parse(format!("{}: expected one number", key)));
    }
    Ok(v[0])
}

/// Parse a config from text. Relative `*.path` entries resolve against
/// `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, value) = t
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::parse(format!("line {}: unknown key {:?}", lineno + 1, key)));
        }
        if raw.insert(key.clone(), value).is_some() {
            return Err(Error::parse(format!("line {}: duplicate key {:?}", lineno + 1, key)));
        }
    }

    let get = |k: &str| raw.get(k).map(|s| s.as_str());

    // Grid.
    let extent = parse_floats("grid.extent", get("grid.extent").unwrap_or("0 1"))?;
    let axes: Vec<(f64, f64)> = match extent.len() {
        2 => vec![(extent[0], extent[1])],
        4 => vec![(extent[0], extent[1]), (extent[2], extent[3])],
        _ => {
            return Err(Error::parse(
                "grid.extent: expected `a b` (1D) or `ax bx ay by` (2D)",
            ))
        }
    };
    let n_tokens = get("grid.n").unwrap_or("129");
    let n: Vec<usize> = n_tokens
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::parse(format!("grid.n: bad count {:?}", t)))
        })
        .collect::<Result<_>>()?;
    let n = match (axes.len(), n.len()) {
        (1, 1) => n,
        (2, 1) => vec![n[0], n[0]],
        (2, 2) => n,
        _ => return Err(Error::parse("grid.n does not match grid.extent dimension")),
    };
    let grid = Grid::build(&axes, &n)?;

    // Design region.
    let domain = match get("domain.kind").unwrap_or("box") {
        "box" => grid.interior_mask(),
        "disc" => {
            if grid.dim != 2 {
                return Err(Error::invalid("domain.kind = disc requires a 2D grid"));
            }
            let c = parse_floats("domain.center", get("domain.center").unwrap_or("0 0"))?;
            if c.len() != 2 {
                return Err(Error::parse("domain.center: expected two numbers"));
            }
            let r = parse_one_float("domain.radius", get("domain.radius").unwrap_or("1"))?;
            disc_mask(&grid, [c[0], c[1]], r)?
        }
        other => {
            return Err(Error::parse(format!(
                "domain.kind: {:?} (expected box or disc)",
                other
            )))
        }
    };
    if domain.is_empty() {
        return Err(Error::invalid("design region contains no grid nodes"));
    }

    let p = parse_one_float("p", get("p").unwrap_or("2"))?;
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid("p must be finite and > 1"));
    }
    let q = parse_one_float("q", get("q").unwrap_or("2"))?;
    let ell = parse_one_float("ell", get("ell").unwrap_or("2"))?;
    let lambda = parse_one_float("lambda", get("lambda").unwrap_or("0"))?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda must be finite and >= 0"));
    }
    let m = match get("m") {
        Some(v) => {
            let m = parse_one_float("m", v)?;
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::invalid("m must be finite and > 0"));
            }
            Some(m)
        }
        None => None,
    };

    let center = match get("domain.kind").unwrap_or("box") {
        "disc" => {
            let c = parse_floats("domain.center", get("domain.center").unwrap_or("0 0"))?;
            [c[0], c[1]]
        }
        _ => {
            let mid = |a: (f64, f64)| 0.5 * (a.0 + a.1);
            if grid.dim == 1 {
                [mid(axes[0]), 0.0]
            } else {
                [mid(axes[0]), mid(axes[1])]
            }
        }
    };
    let f = build_data("f", &raw, &grid, center, base_dir)?;
    let g = build_data("g", &raw, &grid, center, base_dir)?;

    let tolerance = parse_one_float(
        "solver.tolerance",
        get("solver.tolerance").unwrap_or("1e-8"),
    )?;
    if !(tolerance > 0.0) || !tolerance.is_finite() {
        return Err(Error::invalid("solver.tolerance must be finite and > 0"));
    }
    let max_iters = get("solver.max_iters")
        .unwrap_or("50000")
        .parse::<usize>()
        .map_err(|_| Error::parse("solver.max_iters: bad count"))?;
    if max_iters == 0 {
        return Err(Error::invalid("solver.max_iters must be >= 1"));
    }

    let out_dir = PathBuf::from(get("output.dir").unwrap_or("out"));
    let write_pgm = match get("output.pgm").unwrap_or("false") {
        "true" | "1" => true,
        "false" | "0" => false,
        other => return Err(Error::parse(format!("output.pgm: {:?} (expected true/false)", other))),
    };
    let diag_eps0 = match get("diag.eps0") {
        Some(v) => {
            let e = parse_one_float("diag.eps0", v)?;
            if !(e > 0.0) {
                return Err(Error::invalid("diag.eps0 must be > 0"));
            }
            Some(e)
        }
        None => None,
    };
    let diag_octaves = get("diag.octaves")
        .unwrap_or("8")
        .parse::<usize>()
        .map_err(|_| Error::parse("diag.octaves: bad count"))?;
    if diag_octaves < 2 {
        return Err(Error::invalid("diag.octaves must be >= 2"));
    }

    Ok(RunConfig {
        grid,
        domain,
        p,
        q,
        ell,
        lambda,
        m,
        f,
        g,
        opts: SolveOpts { tolerance, max_iters },
        out_dir,
        write_pgm,
        diag_eps0,
        diag_octaves,
        raw,
    })
}

/// Build the f or g data field from its `kind` block.
fn build_data(
    name: &str,
    raw: &BTreeMap<String, String>,
    grid: &Grid,
    center: [f64; 2],
    base_dir: &Path,
) -> Result<GridFunction> {
    let key = |suffix: &str| format!("{}.{}", name, suffix);
    let kind = raw.get(&key("kind")).map(|s| s.as_str()).unwrap_or("constant");
    match kind {
        "constant" => {
            let v = match raw.get(&key("value")) {
                Some(t) => parse_one_float(&key("value"), t)?,
                None => 1.0,
            };
            if !v.is_finite() {
                return Err(Error::invalid(format!("{}: constant must be finite", name)));
            }
            Ok(GridFunction::constant(grid, v))
        }
        "radial" => {
            let coeffs = parse_floats(
                &key("coeffs"),
                raw.get(&key("coeffs"))
                    .ok_or_else(|| Error::parse(format!("{}.kind = radial requires {}.coeffs", name, name)))?,
            )?;
            if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("{}.coeffs must be finite and non-empty", name)));
            }
            Ok(GridFunction::from_fn(grid, |pos| {
                let dx = pos[0] - center[0];
                let dy = pos[1] - center[1];
                let r = (dx * dx + dy * dy).sqrt();
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * r + c;
                }
                acc
            }))
        }
        "csv" => {
            let rel = raw
                .get(&key("path"))
                .ok_or_else(|| Error::parse(format!("{}.kind = csv requires {}.path", name, name)))?;
            let path = base_dir.join(rel);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::invalid(format!("{}.path {:?}: {}", name, path.display(), e))
            })?;
            let (file_grid, values) = io::read_node_csv(&text)?;
            if !grids_agree(&file_grid, grid) {
                return Err(Error::invalid(format!(
                    "{}.path: CSV grid does not match the configured grid",
                    name
                )));
            }
            Ok(GridFunction { grid: *grid, values })
        }
        other => Err(Error::parse(format!(
            "{}.kind: {:?} (expected constant, radial, or csv)",
            name, other
        ))),
    }
}

fn grids_agree(a: &Grid, b: &Grid) -> bool {
    a.dim == b.dim
        && a.n == b.n
        && (0..a.dim).all(|i| {
            (a.a[i] - b.a[i]).abs() <= 1e-9 * (1.0 + b.a[i].abs())
                && (a.b[i] - b.b[i]).abs() <= 1e-9 * (1.0 + b.b[i].abs())
        })
}

/// Load and parse a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("config {:?}: {}", path.display(), e)))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// What a command run produced: the process exit code and any stdout
/// payload.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit: i32,
    pub stdout: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigCommand {
    SolveState,
    OptimizeFb,
    OptimizeControl,
    PerimeterDiag,
    CheckHypotheses,
}

impl ConfigCommand {
    fn name(self) -> &'static str {
        match self {
            ConfigCommand::SolveState => "solve-state",
            ConfigCommand::OptimizeFb => "optimize-fb",
            ConfigCommand::OptimizeControl => "optimize-control",
            ConfigCommand::PerimeterDiag => "perimeter-diag",
            ConfigCommand::CheckHypotheses => "check-hypotheses",
        }
    }
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    echo: &BTreeMap<String, String>,
    exit: i32,
    t0: Instant,
) -> Result<()> {
    let cfg_obj = Json::Obj(
        echo.iter()
            .map(|(k, v)| (k.clone(), Json::Str(v.clone())))
            .collect(),
    );
    let manifest = Json::Obj(vec![
        ("command".into(), Json::Str(command.into())),
        ("exit_status".into(), Json::Int(exit as i64)),
        ("wall_time_s".into(), Json::Num(t0.elapsed().as_secs_f64())),
        (
            "versions".into(),
            Json::Obj(vec![(
                "pshape".into(),
                Json::Str(env!("CARGO_PKG_VERSION").into()),
            )]),
        ),
        ("config".into(), cfg_obj),
    ]);
    io::write_text(&out_dir.join("manifest.json"), &manifest.render())
}

fn hypotheses_json(h: &HypothesisReport) -> Json {
    Json::Obj(vec![
        ("existence_open_p_gt_d".into(), Json::Bool(h.existence_open_p_gt_d)),
        ("existence_quasiopen".into(), Json::Bool(h.existence_quasiopen)),
        ("openness".into(), Json::Bool(h.openness)),
        ("finite_perimeter".into(), Json::Bool(h.finite_perimeter)),
        (
            "reasons".into(),
            Json::Arr(h.reasons.iter().map(|r| Json::Str(r.clone())).collect()),
        ),
    ])
}

fn solve_report_json(r: &SolveReport) -> Vec<(String, Json)> {
    vec![
        ("iterations".into(), Json::Int(r.iterations as i64)),
        ("final_energy".into(), Json::Num(r.final_energy)),
        ("residual".into(), Json::Num(r.residual)),
        ("converged".into(), Json::Bool(r.converged)),
    ]
}

fn write_field(cfg: &RunConfig, name: &str, u: &GridFunction) -> Result<()> {
    io::write_text(&cfg.out_dir.join(format!("{}.csv", name)), &io::grid_function_csv(u))?;
    if cfg.write_pgm && cfg.grid.dim == 2 {
        let bytes = io::pgm_bytes(u)?;
        std::fs::create_dir_all(&cfg.out_dir)?;
        std::fs::write(cfg.out_dir.join(format!("{}.pgm", name)), bytes)?;
    }
    Ok(())
}

/// The CostSpec used for hypothesis reporting on the free-boundary path,
/// where g is identified with f and the budget is the whole region.
fn fb_cost_spec(cfg: &RunConfig) -> CostSpec {
    CostSpec {
        g: cfg.f.clone(),
        lambda: cfg.lambda,
        p: cfg.p,
        q: cfg.q,
        ell: cfg.ell,
        m: measure(&cfg.domain),
    }
}

/// Run one of the config-file commands; writes artifacts and the manifest.
pub fn run_config_command(cmd: ConfigCommand, cfg: &RunConfig) -> Result<RunOutcome> {
    let t0 = Instant::now();
    std::fs::create_dir_all(&cfg.out_dir)?;
    let finish = |exit: i32, stdout: Option<String>| -> Result<RunOutcome> {
        write_manifest(&cfg.out_dir, cmd.name(), &cfg.raw, exit, t0)?;
        Ok(RunOutcome { exit, stdout })
    };

    match cmd {
        ConfigCommand::SolveState => {
            let prob = StateProblem::on_domain(
                &cfg.domain,
                cfg.f.clone(),
                cfg.p,
                MeasureField::zeros(&cfg.grid),
            )?;
            let (u, report) = solve_state(&prob, &cfg.opts)?;
            write_field(cfg, "u", &u)?;
            let rep = Json::Obj(solve_report_json(&report));
            io::write_text(&cfg.out_dir.join("report.json"), &rep.render())?;
            finish(if report.converged { 0 } else { 3 }, None)
        }
        ConfigCommand::OptimizeFb => {
            // The support penalty enters the energy with the composite
            // coefficient (p-1)/p * lambda.
            let cap = (cfg.p - 1.0) / cfg.p * cfg.lambda;
            let out = free_boundary_minimize(&cfg.f, cfg.p, cap, &cfg.domain, &cfg.opts)?;
            let hyp = check_hypotheses(&cfg.f, &fb_cost_spec(cfg), cfg.grid.dim);
            write_field(cfg, "u", &out.u)?;
            io::write_text(&cfg.out_dir.join("omega.csv"), &io::mask_csv(&out.omega))?;
            let mut keys = vec![
                ("objective".to_string(), Json::Num(out.objective)),
                (
                    "objective_history".to_string(),
                    Json::Arr(out.history.iter().map(|&v| Json::Num(v)).collect()),
                ),
                ("omega_measure".to_string(), Json::Num(measure(&out.omega))),
                ("support_penalty".to_string(), Json::Num(cap)),
            ];
            keys.extend(solve_report_json(&out.report));
            keys.push(("hypotheses".to_string(), hypotheses_json(&hyp)));
            io::write_text(&cfg.out_dir.join("report.json"), &Json::Obj(keys).render())?;
            finish(if out.report.converged { 0 } else { 3 }, None)
        }
        ConfigCommand::OptimizeControl => {
            let m = cfg
                .m
                .ok_or_else(|| Error::invalid("optimize-control requires the volume budget m"))?;
            let cost = CostSpec {
                g: cfg.g.clone(),
                lambda: cfg.lambda,
                p: cfg.p,
                q: cfg.q,
                ell: cfg.ell,
                m,
            };
            let out = control_optimize(&cfg.f, &cost, &cfg.domain, &cfg.opts)?;
            let hyp = check_hypotheses(&cfg.f, &cost, cfg.grid.dim);
            write_field(cfg, "u", &out.u)?;
            io::write_text(&cfg.out_dir.join("omega.csv"), &io::mask_csv(&out.omega))?;
            io::write_text(&cfg.out_dir.join("beta.csv"), &io::measure_csv(&out.beta))?;
            let mut keys = vec![
                ("objective".to_string(), Json::Num(out.objective)),
                (
                    "objective_history".to_string(),
                    Json::Arr(out.history.iter().map(|&v| Json::Num(v)).collect()),
                ),
                ("omega_measure".to_string(), Json::Num(measure(&out.omega))),
                ("b_cap".to_string(), Json::Num(out.b_cap)),
                ("adjoint_converged".to_string(), Json::Bool(out.adjoint_converged)),
            ];
            keys.extend(solve_report_json(&out.report));
            keys.push(("hypotheses".to_string(), hypotheses_json(&hyp)));
            io::write_text(&cfg.out_dir.join("report.json"), &Json::Obj(keys).render())?;
            let ok = out.report.converged && out.adjoint_converged;
            finish(if ok { 0 } else { 3 }, None)
        }
        ConfigCommand::PerimeterDiag => {
            // Diagnose the free-boundary minimizer when a penalty is
            // configured, else the plain state on the region.
            let (u, report) = if cfg.lambda > 0.0 {
                let cap = (cfg.p - 1.0) / cfg.p * cfg.lambda;
                let out = free_boundary_minimize(&cfg.f, cfg.p, cap, &cfg.domain, &cfg.opts)?;
                (out.u, out.report)
            } else {
                let prob = StateProblem::on_domain(
                    &cfg.domain,
                    cfg.f.clone(),
                    cfg.p,
                    MeasureField::zeros(&cfg.grid),
                )?;
                solve_state(&prob, &cfg.opts)?
            };
            let umax = u.max();
            if !(umax > 0.0) {
                return Err(Error::invalid(
                    "perimeter-diag: the solved field vanishes; no level bands to measure",
                ));
            }
            let eps0 = cfg.diag_eps0.unwrap_or(0.2 * umax);
            let epsilons: Vec<f64> =
                (0..cfg.diag_octaves).map(|k| eps0 / (1u64 << k) as f64).collect();
            let table = finite_perimeter_diagnostic(&u, cfg.p, &epsilons)?;
            let mut csv = String::from("epsilon,measure_omega_eps,grad_p_integral,perimeter\n");
            for row in &table.rows {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(row.epsilon),
                    fmt_f64(row.band_measure),
                    fmt_f64(row.grad_p_integral),
                    fmt_f64(row.perimeter)
                ));
            }
            io::write_text(&cfg.out_dir.join("diag.csv"), &csv)?;
            write_field(cfg, "u", &u)?;
            let mut keys = vec![
                ("measure_slope".to_string(), Json::Num(table.measure_slope)),
                ("gradient_slope".to_string(), Json::Num(table.gradient_slope)),
                ("perimeter_bounded".to_string(), Json::Bool(table.perimeter_bounded)),
                ("rows".to_string(), Json::Int(table.rows.len() as i64)),
            ];
            keys.extend(solve_report_json(&report));
            io::write_text(&cfg.out_dir.join("report.json"), &Json::Obj(keys).render())?;
            finish(if report.converged { 0 } else { 3 }, None)
        }
        ConfigCommand::CheckHypotheses => {
            let cost = CostSpec {
                g: cfg.g.clone(),
                lambda: cfg.lambda,
                p: cfg.p,
                q: cfg.q,
                ell: cfg.ell,
                m: cfg.m.unwrap_or_else(|| measure(&cfg.domain)),
            };
            cost.validate(&cfg.domain)?;
            let hyp = check_hypotheses(&cfg.f, &cost, cfg.grid.dim);
            let rep = hypotheses_json(&hyp);
            let text = rep.render();
            io::write_text(&cfg.out_dir.join("report.json"), &text)?;
            finish(0, Some(text))
        }
    }
}

/// The measure-distance command: two node CSVs (the literal `inf` marks
/// hard Dirichlet nodes), distance through their unit-load states.
pub fn run_gamma_distance(mu_path: &Path, nu_path: &Path, p: f64, out_dir: &Path) -> Result<RunOutcome> {
    let t0 = Instant::now();
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid("p must be finite and > 1"));
    }
    let read = |path: &Path| -> Result<(Grid, Vec<f64>)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("{:?}: {}", path.display(), e)))?;
        io::read_node_csv(&text)
    };
    let (grid_mu, beta_mu) = read(mu_path)?;
    let (grid_nu, beta_nu) = read(nu_path)?;
    if !grids_agree(&grid_mu, &grid_nu) {
        return Err(Error::invalid("gamma-distance: the two CSVs live on different grids"));
    }
    let mu = MeasureField { grid: grid_mu, beta: beta_mu };
    let nu = MeasureField { grid: grid_mu, beta: beta_nu };
    let domain = grid_mu.interior_mask();
    let f = GridFunction::constant(&grid_mu, 1.0);
    let (d, rep_mu, rep_nu) = gamma_distance_full(&mu, &nu, p, &domain, &f)?;

    std::fs::create_dir_all(out_dir)?;
    let stdout = Json::Obj(vec![("d_gamma_p".into(), Json::Num(d))]).render();
    let report = Json::Obj(vec![
        ("d_gamma_p".into(), Json::Num(d)),
        ("p".into(), Json::Num(p)),
        ("converged_mu".into(), Json::Bool(rep_mu.converged)),
        ("converged_nu".into(), Json::Bool(rep_nu.converged)),
    ]);
    io::write_text(&out_dir.join("report.json"), &report.render())?;
    let mut echo = BTreeMap::new();
    echo.insert("mu".to_string(), mu_path.display().to_string());
    echo.insert("nu".to_string(), nu_path.display().to_string());
    echo.insert("p".to_string(), fmt_f64(p));
    let exit = if rep_mu.converged && rep_nu.converged { 0 } else { 3 };
    write_manifest(out_dir, "gamma-distance", &echo, exit, t0)?;
    Ok(RunOutcome { exit, stdout: Some(stdout) })
}

/// The supremal-cost comparison command on the unit disc.
pub fn run_inf_lens(m: f64, n: usize, out_dir: &Path) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let cmp = verify_lens_optimality(m, n)?;
    let winner_value = cmp
        .candidates
        .iter()
        .find(|(name, _)| *name == cmp.winner)
        .map(|&(_, v)| v)
        .expect("winner is one of the candidates");
    let margins = Json::Obj(
        cmp.candidates
            .iter()
            .map(|(name, v)| (name.clone(), Json::Num(v - winner_value)))
            .collect(),
    );
    let stdout = Json::Obj(vec![
        ("r_m".into(), Json::Num(cmp.r_m)),
        ("winner".into(), Json::Str(cmp.winner.clone())),
        ("margins".into(), margins.clone()),
    ])
    .render();

    std::fs::create_dir_all(out_dir)?;
    io::write_text(&out_dir.join("omega.csv"), &io::mask_csv(&cmp.best_mask))?;
    let report = Json::Obj(vec![
        ("m".into(), Json::Num(cmp.m)),
        ("r_m".into(), Json::Num(cmp.r_m)),
        ("winner".into(), Json::Str(cmp.winner.clone())),
        (
            "values".into(),
            Json::Obj(
                cmp.candidates
                    .iter()
                    .map(|(name, v)| (name.clone(), Json::Num(*v)))
                    .collect(),
            ),
        ),
        ("margins".into(), margins),
        ("margin_over_centered".into(), Json::Num(cmp.margin_over_centered)),
    ]);
    io::write_text(&out_dir.join("report.json"), &report.render())?;
    let mut echo = BTreeMap::new();
    echo.insert("m".to_string(), fmt_f64(m));
    echo.insert("n".to_string(), format!("{}", n));
    write_manifest(out_dir, "inf-lens", &echo, 0, t0)?;
    Ok(RunOutcome { exit: 0, stdout: Some(stdout) })
}
