//! Simulation harness: case configuration, the standard case registry,
//! initial and boundary data construction, the time-stepping driver with
//! mass/entropy/realizability monitors, error norms, convergence studies,
//! CSV serialization, and command-line parsing.
//!
//! Configuration is a flat key=value structure. The registry provides four
//! named presets; a config file or `--set key=value` overrides tweak
//! individual keys on top of a preset. All schemes start a case from the
//! same microscopic state: moment fields take exact cell averages of the
//! initial data, and the kinetic field samples the exponential ansatz fitted
//! to those averages on the quadrature nodes.

use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::diffusion::{stable_dt_diffusion, step_diffusion, DiffusionBc};
use crate::m1::{
    closure_q, entropic_from_moments_m1, ClosureThresholds, MomentVectorM1, Side,
};
use crate::m1_scheme::{
    step_m1, M1SchemeError, M1StepOptions, MomentBc, MomentFieldM1, SpatialOrder,
};
use crate::m2_scheme::{step_m2, M2SchemeError, M2StepOptions, MomentFieldM2};
use crate::quadrature::{make_velocity_quadrature, VelocityQuadrature};
use crate::ugks::{
    stable_dt, step_kinetic, BoundaryAnsatz, KineticBc, KineticField, RegimeParams, SpatialGrid,
    UgksError, DEFAULT_CFL_SAFETY,
};

/// Scheme selector, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// Reference discrete-velocity kinetic scheme.
    Ugks,
    /// First-order M1 moment scheme.
    UgksM1,
    /// Second-order M1 moment scheme.
    UgksM1O2,
    /// First-order M2 moment scheme.
    UgksM2,
    /// Explicit solver of the limiting diffusion equation.
    DiffusionRef,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::Ugks,
        SchemeKind::UgksM1,
        SchemeKind::UgksM1O2,
        SchemeKind::UgksM2,
        SchemeKind::DiffusionRef,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Ugks => "ugks",
            SchemeKind::UgksM1 => "ugks-m1",
            SchemeKind::UgksM1O2 => "ugks-m1-o2",
            SchemeKind::UgksM2 => "ugks-m2",
            SchemeKind::DiffusionRef => "diffusion-ref",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scheme '{s}' (expected one of ugks, ugks-m1, ugks-m1-o2, ugks-m2, diffusion-ref)"))
    }
}

/// Initial data selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    /// Vacuum everywhere.
    Zero,
    /// ρ(x) = rho0 + amp·sin(2πx) with uniform normalized flux u0.
    Sine { rho0: f64, amp: f64, u0: f64 },
    /// Uniform density and normalized flux.
    Constant { rho: f64, u: f64 },
}

/// Boundary-condition selector; the wall data lives in `left`/`right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Periodic,
    Dirichlet,
}

/// Full description of one run: regime, discretization, data, and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub scheme: SchemeKind,
    pub nx: usize,
    pub nv: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub bc: BcKind,
    pub left: BoundaryAnsatz,
    pub right: BoundaryAnsatz,
    pub init: InitSpec,
    pub t_end: f64,
    /// Snapshot times; empty means snapshot once at `t_end`.
    pub output_times: Vec<f64>,
    pub cfl_safety: f64,
    pub beta_eps: f64,
    pub rho_eps: f64,
    /// Rescue mode of the M1 update (off by default).
    pub clamp_u: bool,
}

impl Default for CaseConfig {
    fn default() -> Self {
        let th = ClosureThresholds::default();
        CaseConfig {
            scheme: SchemeKind::Ugks,
            nx: 200,
            nv: 50,
            eta: 1.0,
            epsilon: 1.0,
            sigma: 1.0,
            bc: BcKind::Periodic,
            left: BoundaryAnsatz::Vacuum,
            right: BoundaryAnsatz::Vacuum,
            init: InitSpec::Zero,
            t_end: 1.0,
            output_times: Vec::new(),
            cfl_safety: DEFAULT_CFL_SAFETY,
            beta_eps: th.beta_eps,
            rho_eps: th.rho_eps,
            clamp_u: false,
        }
    }
}

impl CaseConfig {
    /// Snapshot times, defaulting to a single snapshot at `t_end`.
    pub fn resolved_times(&self) -> Vec<f64> {
        if self.output_times.is_empty() {
            vec![self.t_end]
        } else {
            self.output_times.clone()
        }
    }

    pub fn thresholds(&self) -> ClosureThresholds {
        ClosureThresholds { beta_eps: self.beta_eps, rho_eps: self.rho_eps }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.nx < 2 {
            return Err("nx must be at least 2".into());
        }
        if self.nv < 4 || self.nv % 2 != 0 {
            return Err("nv must be even and at least 4".into());
        }
        for (name, v) in [
            ("eta", self.eta),
            ("epsilon", self.epsilon),
            ("sigma", self.sigma),
            ("t_end", self.t_end),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        let times = self.resolved_times();
        if times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err("output_times must be positive and finite".into());
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err("output_times must be strictly increasing".into());
        }
        match self.init {
            InitSpec::Zero => {}
            InitSpec::Sine { rho0, amp, u0 } => {
                if rho0 - amp.abs() <= 0.0 {
                    return Err(format!(
                        "sine init needs rho0 > |amp| for positivity, got ({rho0}, {amp})"
                    ));
                }
                if u0.abs() >= 1.0 {
                    return Err(format!("sine init needs |u0| < 1, got {u0}"));
                }
            }
            InitSpec::Constant { rho, u } => {
                if rho < 0.0 {
                    return Err(format!("constant init needs rho >= 0, got {rho}"));
                }
                if rho > 0.0 && u.abs() >= 1.0 {
                    return Err(format!("constant init needs |u| < 1, got {u}"));
                }
                if rho == 0.0 && u != 0.0 {
                    return Err("constant init with rho = 0 must have u = 0".into());
                }
            }
        }
        for (side, data) in [("left", &self.left), ("right", &self.right)] {
            let value = match data {
                BoundaryAnsatz::Vacuum => 0.0,
                BoundaryAnsatz::Isotropic(c) => *c,
                BoundaryAnsatz::Beam { value, .. } => *value,
            };
            if value < 0.0 {
                return Err(format!("{side} boundary data must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Named presets of the standard test suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Convergence,
    Transport,
    Intermediate,
    Diffusion,
}

impl PresetKind {
    pub const ALL: [PresetKind; 4] = [
        PresetKind::Convergence,
        PresetKind::Transport,
        PresetKind::Intermediate,
        PresetKind::Diffusion,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PresetKind::Convergence => "convergence",
            PresetKind::Transport => "transport",
            PresetKind::Intermediate => "intermediate",
            PresetKind::Diffusion => "diffusion",
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            format!("unknown case '{s}' (expected one of convergence, transport, intermediate, diffusion)")
        })
    }
}

/// The immutable case registry. Every preset uses the unit domain, nx=200,
/// nv=50, and σ=1; they differ in regime, data, and output plan.
pub fn preset_config(kind: PresetKind) -> CaseConfig {
    let base = CaseConfig::default();
    match kind {
        // Damped sine wave in the kinetic regime, periodic; the single
        // output at t=1 anchors the convergence study.
        PresetKind::Convergence => CaseConfig {
            init: InitSpec::Sine { rho0: 0.5, amp: 0.25, u0: 0.4 },
            t_end: 1.0,
            ..base
        },
        // Kinetic regime: vacuum slab lit from the right by entering
        // particles, watched until isotropization.
        PresetKind::Transport => CaseConfig {
            bc: BcKind::Dirichlet,
            left: BoundaryAnsatz::Vacuum,
            right: BoundaryAnsatz::Beam { value: 1.0, forward: false },
            init: InitSpec::Zero,
            t_end: 4.0,
            output_times: vec![0.1, 0.4, 1.0, 4.0],
            ..base
        },
        // Same setup at ε = η = 0.1, between the kinetic and diffusion
        // regimes.
        PresetKind::Intermediate => CaseConfig {
            eta: 0.1,
            epsilon: 0.1,
            bc: BcKind::Dirichlet,
            left: BoundaryAnsatz::Vacuum,
            right: BoundaryAnsatz::Beam { value: 1.0, forward: false },
            init: InitSpec::Zero,
            t_end: 2.0,
            output_times: vec![0.1, 0.4, 1.0, 2.0],
            ..base
        },
        // Deep diffusion regime, lit from the left.
        PresetKind::Diffusion => CaseConfig {
            eta: 1e-8,
            epsilon: 1e-8,
            bc: BcKind::Dirichlet,
            left: BoundaryAnsatz::Beam { value: 1.0, forward: true },
            right: BoundaryAnsatz::Vacuum,
            init: InitSpec::Zero,
            t_end: 2.0,
            output_times: vec![0.01, 0.05, 0.15, 2.0],
            ..base
        },
    }
}

// ---------------------------------------------------------------------------
// key=value configuration

fn parse_f64(key: &str, v: &str) -> Result<f64, String> {
    v.trim().parse().map_err(|_| format!("{key}: expected a number, got '{v}'"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, String> {
    v.trim().parse().map_err(|_| format!("{key}: expected an integer, got '{v}'"))
}

/// Splits "name(a,b,...)" into the name and raw arguments.
fn split_call(s: &str) -> (&str, Vec<&str>) {
    match s.find('(') {
        Some(open) if s.ends_with(')') => {
            let args = s[open + 1..s.len() - 1].split(',').map(str::trim).collect();
            (s[..open].trim(), args)
        }
        _ => (s.trim(), Vec::new()),
    }
}

pub fn parse_boundary(s: &str) -> Result<BoundaryAnsatz, String> {
    let (name, args) = split_call(s.trim());
    match (name, args.as_slice()) {
        ("zero", []) => Ok(BoundaryAnsatz::Vacuum),
        ("isotropic", [c]) => Ok(BoundaryAnsatz::Isotropic(parse_f64("isotropic", c)?)),
        ("half_indicator", [sign, c]) => {
            let forward = match *sign {
                "+" => true,
                "-" => false,
                other => return Err(format!("half_indicator: sign must be + or -, got '{other}'")),
            };
            Ok(BoundaryAnsatz::Beam { value: parse_f64("half_indicator", c)?, forward })
        }
        _ => Err(format!(
            "bad boundary spec '{s}' (expected zero | isotropic(c) | half_indicator(sign,c))"
        )),
    }
}

pub fn boundary_text(b: &BoundaryAnsatz) -> String {
    match b {
        BoundaryAnsatz::Vacuum => "zero".into(),
        BoundaryAnsatz::Isotropic(c) => format!("isotropic({c})"),
        BoundaryAnsatz::Beam { value, forward } => {
            format!("half_indicator({},{value})", if *forward { "+" } else { "-" })
        }
    }
}

pub fn parse_init(s: &str) -> Result<InitSpec, String> {
    let (name, args) = split_call(s.trim());
    match (name, args.as_slice()) {
        ("zero", []) => Ok(InitSpec::Zero),
        ("sine", [rho0, amp, u0]) => Ok(InitSpec::Sine {
            rho0: parse_f64("sine", rho0)?,
            amp: parse_f64("sine", amp)?,
            u0: parse_f64("sine", u0)?,
        }),
        ("constant", [rho, u]) => Ok(InitSpec::Constant {
            rho: parse_f64("constant", rho)?,
            u: parse_f64("constant", u)?,
        }),
        _ => Err(format!(
            "bad init spec '{s}' (expected zero | sine(rho0,amp,u0) | constant(rho,u))"
        )),
    }
}

pub fn init_text(init: &InitSpec) -> String {
    match init {
        InitSpec::Zero => "zero".into(),
        InitSpec::Sine { rho0, amp, u0 } => format!("sine({rho0},{amp},{u0})"),
        InitSpec::Constant { rho, u } => format!("constant({rho},{u})"),
    }
}

/// Applies one key=value override onto a config.
pub fn apply_key(config: &mut CaseConfig, key: &str, value: &str) -> Result<(), String> {
    let v = value.trim();
    match key.trim() {
        "scheme" => config.scheme = SchemeKind::parse(v)?,
        "nx" => config.nx = parse_usize("nx", v)?,
        "nv" => config.nv = parse_usize("nv", v)?,
        "eta" => config.eta = parse_f64("eta", v)?,
        "epsilon" => config.epsilon = parse_f64("epsilon", v)?,
        "sigma" => config.sigma = parse_f64("sigma", v)?,
        "bc" => {
            config.bc = match v {
                "periodic" => BcKind::Periodic,
                "dirichlet" => BcKind::Dirichlet,
                other => return Err(format!("bc must be periodic or dirichlet, got '{other}'")),
            }
        }
        "left" => config.left = parse_boundary(v)?,
        "right" => config.right = parse_boundary(v)?,
        "init" => config.init = parse_init(v)?,
        "t_end" => config.t_end = parse_f64("t_end", v)?,
        "output_times" => {
            config.output_times = v
                .split(',')
                .map(|t| parse_f64("output_times", t))
                .collect::<Result<_, _>>()?;
        }
        "cfl_safety" => config.cfl_safety = parse_f64("cfl_safety", v)?,
        "limiter" => {
            if v != "van_leer" {
                return Err(format!("limiter must be van_leer, got '{v}'"));
            }
        }
        "beta_eps" => config.beta_eps = parse_f64("beta_eps", v)?,
        "rho_eps" => config.rho_eps = parse_f64("rho_eps", v)?,
        "clamp_u" => {
            config.clamp_u = match v {
                "true" => true,
                "false" => false,
                other => return Err(format!("clamp_u must be true or false, got '{other}'")),
            }
        }
        other => return Err(format!("unknown config key '{other}'")),
    }
    Ok(())
}

/// Applies a flat key=value text (one pair per line, # comments).
pub fn apply_config_text(config: &mut CaseConfig, text: &str) -> Result<(), String> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, got '{line}'", lineno + 1))?;
        apply_key(config, key, value).map_err(|e| format!("line {}: {e}", lineno + 1))?;
    }
    Ok(())
}

/// Serializes a config as the flat key=value text `apply_config_text` reads.
pub fn config_text(config: &CaseConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scheme={}", config.scheme.name());
    let _ = writeln!(out, "nx={}", config.nx);
    let _ = writeln!(out, "nv={}", config.nv);
    let _ = writeln!(out, "eta={}", config.eta);
    let _ = writeln!(out, "epsilon={}", config.epsilon);
    let _ = writeln!(out, "sigma={}", config.sigma);
    let _ = writeln!(
        out,
        "bc={}",
        match config.bc {
            BcKind::Periodic => "periodic",
            BcKind::Dirichlet => "dirichlet",
        }
    );
    let _ = writeln!(out, "left={}", boundary_text(&config.left));
    let _ = writeln!(out, "right={}", boundary_text(&config.right));
    let _ = writeln!(out, "init={}", init_text(&config.init));
    let _ = writeln!(out, "t_end={}", config.t_end);
    if !config.output_times.is_empty() {
        let times: Vec<String> = config.output_times.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "output_times={}", times.join(","));
    }
    let _ = writeln!(out, "cfl_safety={}", config.cfl_safety);
    let _ = writeln!(out, "limiter=van_leer");
    let _ = writeln!(out, "beta_eps={}", config.beta_eps);
    let _ = writeln!(out, "rho_eps={}", config.rho_eps);
    let _ = writeln!(out, "clamp_u={}", config.clamp_u);
    out
}

// ---------------------------------------------------------------------------
// initial and boundary data

/// Exact cell average of rho0 + amp·sin(2πx) over cell i.
pub fn sine_cell_average(grid: &SpatialGrid, i: usize, rho0: f64, amp: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let xl = grid.cell_left(i);
    let xr = xl + grid.dx();
    rho0 + amp * ((two_pi * xl).cos() - (two_pi * xr).cos()) / (two_pi * grid.dx())
}

/// Cell-averaged moments (ρ̄_i, j̄_i) of the initial data.
fn initial_moments(config: &CaseConfig, grid: &SpatialGrid) -> Vec<MomentVectorM1> {
    (0..grid.nx())
        .map(|i| match config.init {
            InitSpec::Zero => MomentVectorM1::new(0.0, 0.0),
            InitSpec::Sine { rho0, amp, u0 } => {
                let rho = sine_cell_average(grid, i, rho0, amp);
                MomentVectorM1::new(rho, u0 * rho)
            }
            InitSpec::Constant { rho, u } => MomentVectorM1::new(rho, u * rho),
        })
        .collect()
}

fn build_kinetic_field(
    cells: &[MomentVectorM1],
    quad: &VelocityQuadrature,
    th: &ClosureThresholds,
) -> Result<KineticField, String> {
    let nv = quad.len();
    let mut f = vec![0.0; cells.len() * nv];
    for (i, u) in cells.iter().enumerate() {
        if u.rho <= th.rho_eps {
            continue;
        }
        let lam = entropic_from_moments_m1(u, th)
            .map_err(|e| format!("initial cell {i} cannot be closed: {e}"))?;
        for (k, &v) in quad.nodes().iter().enumerate() {
            f[i * nv + k] = (lam.alpha + lam.beta * v).exp();
        }
    }
    Ok(KineticField::from_values(cells.len(), quad, f))
}

fn build_m2_field(cells: &[MomentVectorM1], th: &ClosureThresholds) -> Result<MomentFieldM2, String> {
    let mut rho = Vec::with_capacity(cells.len());
    let mut j = Vec::with_capacity(cells.len());
    let mut q = Vec::with_capacity(cells.len());
    for (i, u) in cells.iter().enumerate() {
        rho.push(u.rho);
        j.push(u.j);
        if u.rho <= th.rho_eps {
            q.push(0.0);
        } else {
            q.push(
                closure_q(u).map_err(|e| format!("initial cell {i} cannot be closed: {e}"))?,
            );
        }
    }
    Ok(MomentFieldM2::new(rho, j, q))
}

/// Wall density seen by the diffusion limit: the boundary interface density
/// of the kinetic wall data.
pub fn diffusion_wall_density(data: &BoundaryAnsatz, entering: Side) -> f64 {
    match entering {
        Side::Positive => 4.0 * data.half_moment(1, Side::Positive),
        Side::Negative => -4.0 * data.half_moment(1, Side::Negative),
    }
}

// ---------------------------------------------------------------------------
// running a case

/// One per-step monitor record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub entropy: f64,
    pub min_margin: f64,
}

/// Solution profiles at one output time. `j`/`q` are present only for
/// schemes that carry them.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub rho: Vec<f64>,
    pub j: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub x: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub monitors: Vec<MonitorRow>,
    pub total_steps: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("kinetic scheme failed at step {step}, t={t:.6e}: {source}")]
    Kinetic {
        step: usize,
        t: f64,
        #[source]
        source: UgksError,
    },
    #[error("M1 scheme failed at step {step}, t={t:.6e}: {source}")]
    M1 {
        step: usize,
        t: f64,
        #[source]
        source: M1SchemeError,
    },
    #[error("M2 scheme failed at step {step}, t={t:.6e}: {source}")]
    M2 {
        step: usize,
        t: f64,
        #[source]
        source: M2SchemeError,
    },
}

/// Entropy Σ_i ⟨f ln f − f⟩_i Δx of a kinetic field; nodes with f ≤ 0
/// contribute zero (the continuous extension of f ln f − f at 0).
pub fn kinetic_entropy(field: &KineticField, quad: &VelocityQuadrature, dx: f64) -> f64 {
    let g: Vec<f64> = field
        .values()
        .iter()
        .map(|&f| if f > 0.0 { f * f.ln() - f } else { 0.0 })
        .collect();
    (0..field.nx()).map(|i| quad.moment(&g[i * quad.len()..(i + 1) * quad.len()]) * dx).sum()
}

/// Entropy Σ(ρ ln ρ − ρ)Δx of an isotropic density profile.
pub fn diffusion_entropy(rho: &[f64], dx: f64) -> f64 {
    rho.iter().map(|&r| if r > 0.0 { (r * r.ln() - r) * dx } else { 0.0 }).sum()
}

fn m1_margin(field: &MomentFieldM1, rho_eps: f64) -> f64 {
    let mut margin = 1.0f64;
    for i in 0..field.nx() {
        let rho = field.rho()[i];
        if rho > rho_eps {
            margin = margin.min(1.0 - (field.j()[i] / rho).abs());
        }
    }
    margin
}

fn m2_margin(field: &MomentFieldM2, rho_eps: f64) -> f64 {
    let mut margin = 1.0f64;
    for i in 0..field.nx() {
        let u = field.cell(i);
        if u.rho > rho_eps {
            let z = u.u();
            let r = u.q_norm();
            margin = margin.min(1.0 - z.abs()).min(r - z * z).min(1.0 - r);
        }
    }
    margin
}

fn min_slice(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::INFINITY, f64::min)
}

enum State {
    Kinetic { field: KineticField, quad: VelocityQuadrature, bc: KineticBc },
    M1 { field: MomentFieldM1, bc: MomentBc, order: SpatialOrder, opts: M1StepOptions },
    M2 { field: MomentFieldM2, bc: MomentBc, opts: M2StepOptions },
    Diffusion { rho: Vec<f64>, bc: DiffusionBc },
}

impl State {
    fn build(config: &CaseConfig, grid: &SpatialGrid) -> Result<State, HarnessError> {
        let th = config.thresholds();
        let cells = initial_moments(config, grid);
        let config_err = HarnessError::Config;
        Ok(match config.scheme {
            SchemeKind::Ugks => {
                let quad = make_velocity_quadrature(config.nv);
                let bc = match config.bc {
                    BcKind::Periodic => KineticBc::Periodic,
                    BcKind::Dirichlet => KineticBc::Dirichlet {
                        left: config.left.sample(&quad),
                        right: config.right.sample(&quad),
                    },
                };
                let field = build_kinetic_field(&cells, &quad, &th).map_err(config_err)?;
                State::Kinetic { field, quad, bc }
            }
            SchemeKind::UgksM1 | SchemeKind::UgksM1O2 => {
                let order = if config.scheme == SchemeKind::UgksM1 {
                    SpatialOrder::First
                } else {
                    SpatialOrder::Second
                };
                let bc = match config.bc {
                    BcKind::Periodic => MomentBc::Periodic,
                    BcKind::Dirichlet => {
                        MomentBc::Dirichlet { left: config.left, right: config.right }
                    }
                };
                let field = MomentFieldM1::new(
                    cells.iter().map(|u| u.rho).collect(),
                    cells.iter().map(|u| u.j).collect(),
                );
                let opts = M1StepOptions { thresholds: th, clamp_u: config.clamp_u };
                State::M1 { field, bc, order, opts }
            }
            SchemeKind::UgksM2 => {
                let bc = match config.bc {
                    BcKind::Periodic => MomentBc::Periodic,
                    BcKind::Dirichlet => {
                        MomentBc::Dirichlet { left: config.left, right: config.right }
                    }
                };
                let field = build_m2_field(&cells, &th).map_err(config_err)?;
                let opts = M2StepOptions { rho_eps: th.rho_eps, ..Default::default() };
                State::M2 { field, bc, opts }
            }
            SchemeKind::DiffusionRef => {
                let bc = match config.bc {
                    BcKind::Periodic => DiffusionBc::Periodic,
                    BcKind::Dirichlet => DiffusionBc::Dirichlet {
                        left: diffusion_wall_density(&config.left, Side::Positive),
                        right: diffusion_wall_density(&config.right, Side::Negative),
                    },
                };
                State::Diffusion { rho: cells.iter().map(|u| u.rho).collect(), bc }
            }
        })
    }

    fn step(
        &mut self,
        grid: &SpatialGrid,
        params: &RegimeParams,
        dt: f64,
        step: usize,
        t: f64,
    ) -> Result<(), HarnessError> {
        match self {
            State::Kinetic { field, quad, bc } => {
                *field = step_kinetic(field, grid, params, quad, bc, dt)
                    .map_err(|source| HarnessError::Kinetic { step, t, source })?;
            }
            State::M1 { field, bc, order, opts } => {
                *field = step_m1(field, grid, params, bc, dt, *order, opts)
                    .map_err(|source| HarnessError::M1 { step, t, source })?;
            }
            State::M2 { field, bc, opts } => {
                *field = step_m2(field, grid, params, bc, dt, opts)
                    .map_err(|source| HarnessError::M2 { step, t, source })?;
            }
            State::Diffusion { rho, bc } => {
                *rho = step_diffusion(rho, grid, params.sigma(), bc, dt);
            }
        }
        Ok(())
    }

    fn mass(&self, dx: f64) -> f64 {
        let rho = match self {
            State::Kinetic { field, .. } => field.rho(),
            State::M1 { field, .. } => field.rho(),
            State::M2 { field, .. } => field.rho(),
            State::Diffusion { rho, .. } => rho,
        };
        rho.iter().sum::<f64>() * dx
    }

    fn entropy(&self, dx: f64) -> f64 {
        match self {
            State::Kinetic { field, quad, .. } => kinetic_entropy(field, quad, dx),
            State::M1 { field, opts, .. } => field.entropy(dx, &opts.thresholds),
            State::M2 { field, opts, .. } => field.entropy(dx, opts),
            State::Diffusion { rho, .. } => diffusion_entropy(rho, dx),
        }
    }

    fn min_margin(&self, rho_eps: f64) -> f64 {
        match self {
            State::Kinetic { field, .. } => field.min_value(),
            State::M1 { field, .. } => m1_margin(field, rho_eps),
            State::M2 { field, .. } => m2_margin(field, rho_eps),
            State::Diffusion { rho, .. } => min_slice(rho),
        }
    }

    fn snapshot(&self, t: f64) -> Snapshot {
        match self {
            State::Kinetic { field, quad, .. } => {
                let mut j = Vec::with_capacity(field.nx());
                let mut q = Vec::with_capacity(field.nx());
                for i in 0..field.nx() {
                    let cell = field.cell(i);
                    j.push(quad.moment_v(cell));
                    q.push(quad.moment_v2(cell));
                }
                Snapshot { t, rho: field.rho().to_vec(), j: Some(j), q: Some(q) }
            }
            State::M1 { field, .. } => Snapshot {
                t,
                rho: field.rho().to_vec(),
                j: Some(field.j().to_vec()),
                q: None,
            },
            State::M2 { field, .. } => Snapshot {
                t,
                rho: field.rho().to_vec(),
                j: Some(field.j().to_vec()),
                q: Some(field.q().to_vec()),
            },
            State::Diffusion { rho, .. } => {
                Snapshot { t, rho: rho.clone(), j: None, q: None }
            }
        }
    }
}

/// Stability cap on the time step for the configured scheme.
fn scheme_dt_cap(
    scheme: SchemeKind,
    grid: &SpatialGrid,
    params: &RegimeParams,
    safety: f64,
) -> f64 {
    match scheme {
        SchemeKind::DiffusionRef => stable_dt_diffusion(grid, params.sigma(), safety),
        _ => stable_dt(grid, params, safety),
    }
}

/// Runs one configured case, recording monitors every step and snapshots at
/// every output time (the step size is clipped to land on them exactly).
pub fn run_case(config: &CaseConfig) -> Result<RunRecord, HarnessError> {
    config.validate().map_err(HarnessError::Config)?;
    let started = Instant::now();
    let grid = SpatialGrid::unit(config.nx);
    let dx = grid.dx();
    let params = RegimeParams::uniform(config.eta, config.epsilon, config.sigma, config.nx);
    let mut state = State::build(config, &grid)?;
    let dt_max = scheme_dt_cap(config.scheme, &grid, &params, config.cfl_safety);

    let times = config.resolved_times();
    let mut monitors = Vec::new();
    let mut snapshots = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut step = 0usize;
    monitors.push(MonitorRow {
        step,
        t,
        dt: 0.0,
        mass: state.mass(dx),
        entropy: state.entropy(dx),
        min_margin: state.min_margin(config.rho_eps),
    });
    for &target in &times {
        let atol = 1e-12 * target.max(1.0);
        while target - t > atol {
            let dt = dt_max.min(target - t);
            state.step(&grid, &params, dt, step, t)?;
            step += 1;
            t += dt;
            monitors.push(MonitorRow {
                step,
                t,
                dt,
                mass: state.mass(dx),
                entropy: state.entropy(dx),
                min_margin: state.min_margin(config.rho_eps),
            });
        }
        t = target;
        snapshots.push(state.snapshot(target));
    }

    Ok(RunRecord {
        x: (0..config.nx).map(|i| grid.cell_center(i)).collect(),
        snapshots,
        monitors,
        total_steps: step,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// error norms and convergence

/// Discrete L² distance sqrt(Σ(a_i − b_i)²·Δx).
pub fn l2_error(a: &[f64], b: &[f64], dx: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "profile lengths differ");
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() * dx.sqrt()
}

/// Restricts a fine-grid profile to a coarse grid by cell averaging; the
/// fine resolution must be an integer multiple of the coarse one.
pub fn restrict_cell_averages(fine: &[f64], coarse_nx: usize) -> Vec<f64> {
    assert!(coarse_nx > 0 && fine.len() % coarse_nx == 0, "grids are not nested");
    let ratio = fine.len() / coarse_nx;
    (0..coarse_nx)
        .map(|i| fine[i * ratio..(i + 1) * ratio].iter().sum::<f64>() / ratio as f64)
        .collect()
}

/// Mesh-refinement study against a fine reference run of the same scheme.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub meshes: Vec<usize>,
    pub errors: Vec<f64>,
    /// Least-squares slope of log error vs log Δx.
    pub slope: f64,
}

/// Runs `template` on every mesh in `meshes` plus a reference mesh of
/// `ref_nx` cells, comparing densities at `t_end` after restricting the
/// reference by cell averaging. All runs share the reference mesh's time
/// step so the fit isolates the spatial order.
pub fn convergence_study(
    template: &CaseConfig,
    meshes: &[usize],
    ref_nx: usize,
) -> Result<ConvergenceStudy, HarnessError> {
    let max_mesh = meshes.iter().copied().max().unwrap_or(0);
    if meshes.is_empty() || max_mesh == 0 {
        return Err(HarnessError::Config("mesh list must be nonempty".into()));
    }
    if ref_nx < 8 * max_mesh {
        return Err(HarnessError::Config(format!(
            "reference nx={ref_nx} must be at least 8x the finest mesh {max_mesh}"
        )));
    }
    if meshes.iter().any(|&m| ref_nx % m != 0) {
        return Err(HarnessError::Config(format!(
            "reference nx={ref_nx} must be divisible by every mesh"
        )));
    }

    // Every run, reference included, advances with the reference mesh's time
    // step: the time-discretization error then cancels in the comparison and
    // the fitted slope measures the spatial order alone. Each mesh's own
    // stability cap only grows as the mesh coarsens, so the shared step is
    // admissible everywhere.
    let cap_at = |nx: usize, safety: f64| {
        let grid = SpatialGrid::unit(nx);
        let params = RegimeParams::uniform(template.eta, template.epsilon, template.sigma, nx);
        scheme_dt_cap(template.scheme, &grid, &params, safety)
    };
    let dt_shared = cap_at(ref_nx, template.cfl_safety);

    let mut config = template.clone();
    config.output_times = vec![template.t_end];
    config.nx = ref_nx;
    let reference = run_case(&config)?;
    let rho_ref = &reference.snapshots[0].rho;

    let mut errors = Vec::with_capacity(meshes.len());
    for &nx in meshes {
        config.nx = nx;
        config.cfl_safety = dt_shared / cap_at(nx, 1.0);
        let run = run_case(&config)?;
        let restricted = restrict_cell_averages(rho_ref, nx);
        errors.push(l2_error(&run.snapshots[0].rho, &restricted, 1.0 / nx as f64));
    }

    // least squares of ln e against ln Δx; positive slope = convergence order
    let xs: Vec<f64> = meshes.iter().map(|&m| (1.0 / m as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    Ok(ConvergenceStudy { meshes: meshes.to_vec(), errors, slope: sxy / sxx })
}

// ---------------------------------------------------------------------------
// CSV serialization

fn push_field(out: &mut String, value: Option<f64>) {
    if let Some(v) = value {
        let _ = write!(out, "{v:.16e}");
    }
}

/// Solution table `x,rho,j,q`; absent quantities leave their column empty.
pub fn solution_csv(x: &[f64], snap: &Snapshot) -> String {
    let mut out = String::from("x,rho,j,q\n");
    for i in 0..x.len() {
        push_field(&mut out, Some(x[i]));
        out.push(',');
        push_field(&mut out, Some(snap.rho[i]));
        out.push(',');
        push_field(&mut out, snap.j.as_ref().map(|j| j[i]));
        out.push(',');
        push_field(&mut out, snap.q.as_ref().map(|q| q[i]));
        out.push('\n');
    }
    out
}

/// Monitor table `step,t,dt,mass,entropy,min_margin`.
pub fn monitors_csv(rows: &[MonitorRow]) -> String {
    let mut out = String::from("step,t,dt,mass,entropy,min_margin\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.step, row.t, row.dt, row.mass, row.entropy, row.min_margin
        );
    }
    out
}

/// Convergence table `nx,dx,l2_error` with a trailing slope comment.
pub fn convergence_csv(study: &ConvergenceStudy) -> String {
    let mut out = String::from("nx,dx,l2_error\n");
    for (nx, err) in study.meshes.iter().zip(&study.errors) {
        let _ = writeln!(out, "{},{:.16e},{:.16e}", nx, 1.0 / *nx as f64, err);
    }
    let _ = writeln!(out, "# slope={:.4}", study.slope);
    out
}

// ---------------------------------------------------------------------------
// command line

/// `run` subcommand: composed config plus output destination.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArgs {
    pub case: Option<PresetKind>,
    pub config_path: Option<String>,
    pub scheme: Option<SchemeKind>,
    pub sets: Vec<(String, String)>,
    pub out: Option<String>,
}

/// `converge` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeArgs {
    pub case: PresetKind,
    pub scheme: SchemeKind,
    pub meshes: Vec<usize>,
    pub ref_nx: usize,
    pub sets: Vec<(String, String)>,
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliCommand {
    Run(RunArgs),
    Converge(ConvergeArgs),
}

pub const USAGE: &str = "\
usage:
  slab-transport run (--case NAME | --config FILE) [--scheme S] [--set key=value]... [--out DIR]
  slab-transport converge --scheme S [--case NAME] [--meshes N,N,...] [--ref NX] [--set key=value]... [--out DIR]

cases:   convergence | transport | intermediate | diffusion
schemes: ugks | ugks-m1 | ugks-m1-o2 | ugks-m2 | diffusion-ref

run writes one CSV per output time (x,rho,j,q) plus monitors.csv; converge
prints the error table and least-squares order. Exit codes: 0 ok, 2 bad
configuration, 3 numerical failure.";

fn take_value<'a>(
    flag: &str,
    args: &'a [String],
    i: &mut usize,
) -> Result<&'a str, String> {
    *i += 1;
    args.get(*i).map(String::as_str).ok_or_else(|| format!("{flag} needs a value"))
}

pub fn parse_args(args: &[String]) -> Result<CliCommand, String> {
    let sub = args.first().ok_or("missing subcommand (run | converge)")?;
    match sub.as_str() {
        "run" => {
            let mut out = RunArgs {
                case: None,
                config_path: None,
                scheme: None,
                sets: Vec::new(),
                out: None,
            };
            let mut i = 1;
            while i < args.len() {
                match args[i].as_str() {
                    "--case" => out.case = Some(PresetKind::parse(take_value("--case", args, &mut i)?)?),
                    "--config" => out.config_path = Some(take_value("--config", args, &mut i)?.into()),
                    "--scheme" => {
                        out.scheme = Some(SchemeKind::parse(take_value("--scheme", args, &mut i)?)?)
                    }
                    "--set" => {
                        let pair = take_value("--set", args, &mut i)?;
                        let (k, v) = pair
                            .split_once('=')
                            .ok_or_else(|| format!("--set expects key=value, got '{pair}'"))?;
                        out.sets.push((k.to_string(), v.to_string()));
                    }
                    "--out" => out.out = Some(take_value("--out", args, &mut i)?.into()),
                    other => return Err(format!("unknown flag '{other}'")),
                }
                i += 1;
            }
            if out.case.is_none() && out.config_path.is_none() {
                return Err("run needs --case or --config".into());
            }
            Ok(CliCommand::Run(out))
        }
        "converge" => {
            let mut scheme = None;
            let mut out = ConvergeArgs {
                case: PresetKind::Convergence,
                scheme: SchemeKind::UgksM1,
                meshes: vec![25, 50, 100, 200, 400],
                ref_nx: 3200,
                sets: Vec::new(),
                out: None,
            };
            let mut i = 1;
            while i < args.len() {
                match args[i].as_str() {
                    "--case" => out.case = PresetKind::parse(take_value("--case", args, &mut i)?)?,
                    "--scheme" => {
                        scheme = Some(SchemeKind::parse(take_value("--scheme", args, &mut i)?)?)
                    }
                    "--meshes" => {
                        out.meshes = take_value("--meshes", args, &mut i)?
                            .split(',')
                            .map(|m| parse_usize("--meshes", m))
                            .collect::<Result<_, _>>()?;
                    }
                    "--ref" => out.ref_nx = parse_usize("--ref", take_value("--ref", args, &mut i)?)?,
                    "--set" => {
                        let pair = take_value("--set", args, &mut i)?;
                        let (k, v) = pair
                            .split_once('=')
                            .ok_or_else(|| format!("--set expects key=value, got '{pair}'"))?;
                        out.sets.push((k.to_string(), v.to_string()));
                    }
                    "--out" => out.out = Some(take_value("--out", args, &mut i)?.into()),
                    other => return Err(format!("unknown flag '{other}'")),
                }
                i += 1;
            }
            out.scheme = scheme.ok_or("converge needs --scheme")?;
            Ok(CliCommand::Converge(out))
        }
        other => Err(format!("unknown subcommand '{other}'")),
    }
}

/// Builds the final config of a `run` invocation: preset (or defaults),
/// then the config file, then --scheme, then --set pairs in order.
pub fn compose_config(
    run: &RunArgs,
    config_file_text: Option<&str>,
) -> Result<CaseConfig, String> {
    let mut config = match run.case {
        Some(kind) => preset_config(kind),
        None => CaseConfig::default(),
    };
    if let Some(text) = config_file_text {
        apply_config_text(&mut config, text)?;
    }
    if let Some(scheme) = run.scheme {
        config.scheme = scheme;
    }
    for (k, v) in &run.sets {
        apply_key(&mut config, k, v)?;
    }
    config.validate()?;
    Ok(config)
}
