//! Experiment runner: turns an [`ExperimentSpec`] into result records and CSV.
//!
//! All random inputs are drawn sequentially from the seed before any point is
//! evaluated, so the output does not depend on the number of worker threads.
//! Points run on a rayon pool and are reported in declared order.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{antisymmetrize, gauge_apply_splitting, gauge_apply_two_form, omega_exterior_derivative, GaugeTransform, Splitting, TwoForm};
use crate::bch::{adjoint_log_oracle, cbch_second_order, cbch_solve, loop_commutator_experiment, max_abs_diff, ColorPath, StructureTensor};
use crate::config::{ConfigError, ExperimentSpec, Kind};
use crate::disk::{abelian_stokes_oracle, pure_gauge_boundary, solve_extension, BoundaryFourier, Cutoffs, DiskTwoFormFT, FixedPointOptions, LevelSolver};
use crate::poly::PolyField;
use crate::rng::Lcg;
use crate::transport::{abelian_transport_oracle, conjugation_oracle, one_dim_obstruction, path_ordered_exp, transport_splitting, MatrixPath, StraightenedStrip, TransportOptions};
use crate::triangle::{perturbed_i2_norm, random_flat_jets, residual_slope, triangle_norms, FlatJetData};

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Vector(Vec<f64>),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Vector(v) => v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(";"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKind {
    Point,
    Summary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    pub record: RecordKind,
    pub point: String,
    pub cells: Vec<(&'static str, Cell)>,
    pub pass: bool,
    pub message: String,
    pub wall_time: Duration,
}

impl ResultRecord {
    fn new(record: RecordKind, point: impl Into<String>) -> Self {
        Self {
            experiment: String::new(),
            record,
            point: point.into(),
            cells: Vec::new(),
            pass: true,
            message: String::new(),
            wall_time: Duration::ZERO,
        }
    }

    fn point(label: impl Into<String>) -> Self {
        Self::new(RecordKind::Point, label)
    }

    fn summary(label: impl Into<String>) -> Self {
        Self::new(RecordKind::Summary, label)
    }

    fn set(mut self, name: &'static str, cell: Cell) -> Self {
        self.cells.push((name, cell));
        self
    }

    fn num(self, name: &'static str, v: f64) -> Self {
        self.set(name, Cell::Num(v))
    }

    fn vector(self, name: &'static str, v: &[f64]) -> Self {
        self.set(name, Cell::Vector(v.to_vec()))
    }

    fn int(self, name: &'static str, v: usize) -> Self {
        self.set(name, Cell::Int(v as i64))
    }

    fn text(self, name: &'static str, v: &str) -> Self {
        self.set(name, Cell::Text(v.to_string()))
    }

    fn check(mut self, ok: bool, why: impl FnOnce() -> String) -> Self {
        if !ok {
            self.pass = false;
            if !self.message.is_empty() {
                self.message.push_str("; ");
            }
            self.message.push_str(&why());
        }
        self
    }

    fn failed(label: impl Into<String>, err: impl std::fmt::Display) -> Self {
        let mut r = Self::point(label);
        r.pass = false;
        r.message = err.to_string();
        r
    }

    pub fn get(&self, name: &str) -> Option<&Cell> {
        self.cells.iter().find(|(n, _)| *n == name).map(|(_, c)| c)
    }

    pub fn num_cell(&self, name: &str) -> Option<f64> {
        match self.get(name)? {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }
}

/// Columns between the common leading (`experiment,record,point`) and trailing
/// (`pass,message`) columns.
pub fn columns(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::DiskObstruction => {
            &["mode", "case", "n_max", "k_max", "obstruction", "obstruction_norm", "oracle", "deviation", "residual", "iterations", "ratio"]
        }
        Kind::Transport => &["mode", "case", "steps", "step", "error", "transported_norm", "random_norm", "slope"],
        Kind::TriangleOrders => &["case", "eps", "i1", "i2", "i3", "control_i2", "slopes", "control_slope"],
        Kind::BchCompare => &["mode", "algebra", "case", "amplitude", "phi", "reference", "discrepancy", "residual", "slope"],
        Kind::LoopArea => &["h", "phi_loop", "leading", "deviation", "slope"],
        Kind::GaugeCheck => &["case", "deviation"],
    }
}

pub fn csv_header(kind: Kind) -> String {
    let mut cols = vec!["experiment", "record", "point"];
    cols.extend_from_slice(columns(kind));
    cols.extend_from_slice(&["pass", "message"]);
    cols.join(",")
}

fn escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders records as CSV. Wall times are not written.
pub fn to_csv(kind: Kind, records: &[ResultRecord]) -> String {
    let mut out = csv_header(kind);
    out.push('\n');
    for r in records {
        let mut row = vec![
            escape(&r.experiment),
            match r.record {
                RecordKind::Point => "point".into(),
                RecordKind::Summary => "summary".into(),
            },
            escape(&r.point),
        ];
        for col in columns(kind) {
            row.push(r.get(col).map_or_else(String::new, |c| escape(&c.render())));
        }
        row.push(if r.pass { "true" } else { "false" }.into());
        row.push(escape(&r.message));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write_csv(kind: Kind, records: &[ResultRecord], mut w: impl Write) -> io::Result<()> {
    w.write_all(to_csv(kind, records).as_bytes())
}

/// Every parameter key accepted by `kind`.
pub fn allowed_keys(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::DiskObstruction => &[
            "mode", "colors", "n_max", "k_max", "a", "bx", "by", "c", "boundary", "cases", "degree", "boundary_modes", "amplitude",
            "expected", "tolerance", "residual_tol", "fp_tol", "fp_max", "level_solver", "max_sweeps", "ratio_max", "oracle_nodes",
        ],
        Kind::Transport => &[
            "mode", "cases", "colors", "degree", "amplitude", "y_end", "steps", "tolerance", "min_slope", "x_cap", "matrix_size",
            "reference_factor", "nonzero_min", "a", "transporter", "initial",
        ],
        Kind::TriangleOrders => &[
            "cases", "eps", "amplitude", "omega_degree", "jet_order", "c", "control", "control_delta", "control_max", "i1_range",
            "i2_range", "i3_range",
        ],
        Kind::BchCompare => {
            &["mode", "algebra", "cases", "degree", "sup", "series_order", "step", "tolerance", "amplitudes", "min_slope", "residual_tol"]
        }
        Kind::LoopArea => &["c", "phi_x", "phi_y", "h", "series_order", "steps", "min_slope"],
        Kind::GaugeCheck => &["cases", "colors", "degree", "amplitude", "gauge_amplitude", "cap", "compare_cap", "tolerance"],
    }
}

type Task = Box<dyn Fn() -> ResultRecord + Send + Sync>;

/// A validated experiment: the point tasks and how to summarise their records.
pub struct Plan {
    pub kind: Kind,
    pub name: String,
    tasks: Vec<Task>,
    summarize: Box<dyn Fn(&[ResultRecord]) -> Vec<ResultRecord> + Send + Sync>,
}

impl Plan {
    pub fn point_count(&self) -> usize {
        self.tasks.len()
    }
}

fn no_summary() -> Box<dyn Fn(&[ResultRecord]) -> Vec<ResultRecord> + Send + Sync> {
    Box::new(|_| Vec::new())
}

/// Validates the experiment and draws every random input.
pub fn plan(spec: &ExperimentSpec) -> Result<Plan, ConfigError> {
    spec.check_keys(allowed_keys(spec.kind))?;
    let (tasks, summarize) = match spec.kind {
        Kind::DiskObstruction => plan_disk(spec)?,
        Kind::Transport => plan_transport(spec)?,
        Kind::TriangleOrders => plan_triangle(spec)?,
        Kind::BchCompare => plan_bch(spec)?,
        Kind::LoopArea => plan_loop(spec)?,
        Kind::GaugeCheck => plan_gauge(spec)?,
    };
    Ok(Plan { kind: spec.kind, name: spec.name.clone(), tasks, summarize })
}

/// Runs every point, in parallel, and appends the summary records.
pub fn execute(plan: &Plan) -> Vec<ResultRecord> {
    let mut records: Vec<ResultRecord> = plan
        .tasks
        .par_iter()
        .map(|t| {
            let start = Instant::now();
            let mut r = t();
            r.wall_time = start.elapsed();
            log::debug!("{} {} finished in {:?}", plan.name, r.point, r.wall_time);
            r
        })
        .collect();
    let summaries = (plan.summarize)(&records);
    records.extend(summaries);
    for r in &mut records {
        r.experiment = plan.name.clone();
    }
    records
}

/// `plan` followed by `execute` on a pool of `jobs` threads (all cores when `None`).
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Vec<ResultRecord>, RunError> {
    let plan = plan(spec)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| RunError::Internal(e.to_string()))?;
    Ok(pool.install(|| execute(&plan)))
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Internal(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn sweep<T: std::str::FromStr + Clone>(spec: &ExperimentSpec, key: &str, default: &[T]) -> Result<Vec<T>, ConfigError> {
    let v = spec.list(key, default)?;
    if v.is_empty() {
        return Err(invalid(format!("`{key}` must not be empty")));
    }
    Ok(v)
}

fn range(spec: &ExperimentSpec, key: &str, default: [f64; 2]) -> Result<[f64; 2], ConfigError> {
    let v: Vec<f64> = spec.list(key, &default)?;
    match v.as_slice() {
        [lo, hi] if lo <= hi => Ok([*lo, *hi]),
        _ => Err(invalid(format!("`{key}` must be `low, high`"))),
    }
}

fn slopes_summary(label: &str, records: &[ResultRecord], x: &str, y: &str, min_slope: f64) -> ResultRecord {
    let samples: Vec<(f64, f64)> = records.iter().filter_map(|r| Some((r.num_cell(x)?, r.num_cell(y)?))).collect();
    if samples.len() < 3 || samples.len() != records.len() {
        return ResultRecord::summary(label).check(false, || format!("need at least 3 finished points, have {}", samples.len()));
    }
    match residual_slope(&samples) {
        Ok(s) => ResultRecord::summary(label).num("slope", s).check(s >= min_slope, || format!("slope {s:.3} below {min_slope}")),
        Err(e) => ResultRecord::summary(label).check(false, || e.to_string()),
    }
}

fn all_pass_summary(label: &str, records: &[ResultRecord], metric: &'static str) -> ResultRecord {
    let worst = records.iter().filter_map(|r| r.num_cell(metric)).fold(0.0f64, f64::max);
    let failed = records.iter().filter(|r| !r.pass).count();
    ResultRecord::summary(label).num(metric, worst).check(failed == 0, || format!("{failed} of {} points failed", records.len()))
}

fn random_boundary(rng: &mut Lcg, colors: usize, n_max: usize, modes: usize, amp: f64) -> BoundaryFourier {
    let mut b = BoundaryFourier::zero(colors, n_max);
    for n in 0..=modes as i64 {
        for a in 0..colors {
            let re = rng.range(-amp, amp);
            let im = if n == 0 { 0.0 } else { rng.range(-amp, amp) };
            b.set_pair(n, a, Complex64::new(re, im));
        }
    }
    b
}

fn scalar_form(a: PolyField) -> TwoForm {
    let cap = a.cap();
    TwoForm::new(a, PolyField::zeros(&[1, 1], cap), PolyField::zeros(&[1, 1], cap), PolyField::zeros(&[1, 1, 1], cap))
        .expect("zero C is antisymmetric")
}

type Planned = (Vec<Task>, Box<dyn Fn(&[ResultRecord]) -> Vec<ResultRecord> + Send + Sync>);

fn plan_disk(spec: &ExperimentSpec) -> Result<Planned, ConfigError> {
    let mode = spec.choice("mode", "given", &["given", "random-abelian", "random-nonabelian", "pure-gauge"])?;
    let n_max: usize = spec.value("n_max", 6)?;
    let k_list: Vec<usize> = sweep(spec, "k_max", &[6])?;
    let tolerance = spec.positive("tolerance", 1e-9)?;
    let residual_tol = spec.positive("residual_tol", 1e-10)?;
    let level_solver = match spec.choice("level_solver", "dense", &["dense", "neumann"])?.as_str() {
        "dense" => LevelSolver::Dense,
        _ => LevelSolver::Neumann { max_sweeps: spec.value("max_sweeps", 200)? },
    };
    let opts = FixedPointOptions { fp_tol: spec.positive("fp_tol", 1e-12)?, fp_max: spec.value("fp_max", 100)?, level_solver };
    let cases: usize = spec.value("cases", 1)?;
    let degree: usize = spec.value("degree", 2)?;
    let amplitude = spec.positive("amplitude", 0.2)?;
    let boundary_modes: usize = spec.value("boundary_modes", n_max.min(5))?;
    let oracle_nodes: usize = spec.value("oracle_nodes", 48)?;
    if boundary_modes > n_max {
        return Err(invalid("boundary_modes exceeds n_max"));
    }
    let mut rng = Lcg::new(spec.seed);

    // (case label, ω, boundary, abelian A for the oracle)
    let mut inputs: Vec<(usize, TwoForm, BoundaryFourier, Option<PolyField>)> = Vec::new();
    let colors: usize;
    match mode.as_str() {
        "given" => {
            colors = spec.value("colors", 1)?;
            let n = colors;
            let a = spec.field("a", &[n], 0)?;
            let bx = spec.field("bx", &[n, n], 0)?;
            let by = spec.field("by", &[n, n], 0)?;
            let c = match spec.params.get("c") {
                Some(p) if spec.fields.contains_key(&p.value) => spec.field("c", &[n, n, n], 0)?,
                Some(_) => spec.structure("c", n, "zero")?.to_poly(0),
                None => PolyField::zeros(&[n, n, n], 0),
            };
            let cap = [a.cap(), bx.cap(), by.cap(), c.cap()].into_iter().max().unwrap();
            let w = TwoForm::new(a.with_cap(cap), bx.with_cap(cap), by.with_cap(cap), c.with_cap(cap))
                .map_err(|e| invalid(format!("2-form: {e}")))?;
            let b = spec.boundary("boundary", n, n_max)?;
            let abelian = (n == 1).then(|| w.a().clone());
            inputs.push((0, w, b, abelian));
        }
        "random-abelian" => {
            colors = 1;
            for case in 0..cases {
                let a = rng.poly(&[1], degree, degree, amplitude);
                let b = random_boundary(&mut rng, 1, n_max, boundary_modes, amplitude);
                inputs.push((case, scalar_form(a.clone()), b, Some(a)));
            }
        }
        "random-nonabelian" => {
            colors = spec.value("colors", 3)?;
            let n = colors;
            let c = spec.structure("c", n, "so3")?;
            for case in 0..cases {
                let a = rng.poly(&[n], degree, degree, amplitude);
                let bx = rng.poly(&[n, n], degree, degree, amplitude);
                let by = rng.poly(&[n, n], degree, degree, amplitude);
                let w = TwoForm::new(a, bx, by, c.to_poly(degree)).expect("structure tensor is antisymmetric");
                let b = random_boundary(&mut rng, n, n_max, boundary_modes, amplitude);
                inputs.push((case, w, b, None));
            }
        }
        _ => {
            colors = spec.value("colors", 3)?;
            let n = colors;
            let c = spec.structure("c", n, "so3")?;
            for case in 0..cases {
                let omega = rng.poly(&[n], degree, degree, amplitude);
                let b = pure_gauge_boundary(c.entries(), &omega, n_max);
                let w = TwoForm::pure_structure(n, 0, c.entries()).expect("structure tensor is antisymmetric");
                inputs.push((case, w, b, None));
            }
        }
    }
    let expected: Option<Vec<f64>> = if spec.has("expected") { Some(spec.list("expected", &[])?) } else { None };
    if let Some(e) = &expected {
        if e.len() != colors {
            return Err(invalid(format!("`expected` needs {colors} entries")));
        }
    }

    let mut tasks: Vec<Task> = Vec::new();
    for (case, w, b, abelian) in inputs {
        for &k_max in &k_list {
            let (w, b, abelian, expected, mode) = (w.clone(), b.clone(), abelian.clone(), expected.clone(), mode.clone());
            tasks.push(Box::new(move || {
                let label = format!("case={case};k_max={k_max}");
                let cut = Cutoffs { n_max, k_max };
                let sol = DiskTwoFormFT::from_cartesian(&w, cut).and_then(|d| solve_extension(&d, &b, &opts));
                let sol = match sol {
                    Ok(s) => s,
                    Err(e) => return ResultRecord::failed(label, e),
                };
                let mut r = ResultRecord::point(label)
                    .text("mode", &mode)
                    .int("case", case)
                    .int("n_max", n_max)
                    .int("k_max", k_max)
                    .vector("obstruction", &sol.obstruction)
                    .num("obstruction_norm", sol.obstruction_norm())
                    .num("residual", sol.residual)
                    .int("iterations", sol.iterations)
                    .check(sol.residual <= residual_tol, || format!("residual {:.3e} above {residual_tol:e}", sol.residual));
                if mode == "random-abelian" {
                    let oracle = abelian_stokes_oracle(abelian.as_ref().unwrap(), &b, oracle_nodes, 4 * n_max + 32);
                    let dev = (sol.obstruction[0] - oracle).abs();
                    r = r.num("oracle", oracle).num("deviation", dev).check(dev <= tolerance, || format!("oracle deviation {dev:.3e}"));
                }
                if let Some(e) = &expected {
                    let dev = max_abs_diff(&sol.obstruction, e);
                    r = r.num("deviation", dev).check(dev <= tolerance, || format!("deviation {dev:.3e} from expected"));
                }
                r
            }));
        }
    }

    let per_case = k_list.len();
    let ratio_max = spec.positive("ratio_max", 0.1)?;
    let summarize: Box<dyn Fn(&[ResultRecord]) -> Vec<ResultRecord> + Send + Sync> = match mode.as_str() {
        "pure-gauge" => Box::new(move |records: &[ResultRecord]| {
            records
                .chunks(per_case)
                .enumerate()
                .map(|(case, chunk)| {
                    let label = format!("case={case}");
                    let (Some(first), Some(last)) =
                        (chunk.first().and_then(|r| r.num_cell("obstruction_norm")), chunk.last().and_then(|r| r.num_cell("obstruction_norm")))
                    else {
                        return ResultRecord::summary(label).check(false, || "missing obstruction".into());
                    };
                    let ratio = if first == 0.0 { 0.0 } else { last / first };
                    ResultRecord::summary(label)
                        .text("mode", "pure-gauge")
                        .int("case", case)
                        .num("ratio", ratio)
                        .check(ratio <= ratio_max, || format!("ratio {ratio:.3e} above {ratio_max}"))
                })
                .collect()
        }),
        "random-abelian" | "random-nonabelian" => {
            let metric = if mode == "random-abelian" { "deviation" } else { "residual" };
            Box::new(move |records: &[ResultRecord]| vec![all_pass_summary("all", records, metric)])
        }
        _ => no_summary(),
    };
    Ok((tasks, summarize))
}

fn plan_transport(spec: &ExperimentSpec) -> Result<Planned, ConfigError> {
    let mode = spec.choice("mode", "abelian", &["abelian", "conjugation", "one-dim"])?;
    let cases: usize = spec.value("cases", 1)?;
    let degree: usize = spec.value("degree", 3)?;
    let amplitude = spec.positive("amplitude", 1.0)?;
    let y_end = spec.positive("y_end", 1.0)?;
    let steps_list: Vec<usize> = sweep(spec, "steps", &[1000])?;
    if steps_list.contains(&0) {
        return Err(invalid("`steps` entries must be positive"));
    }
    let tolerance = spec.positive("tolerance", 1e-8)?;
    let min_slope: f64 = spec.value("min_slope", 3.7)?;
    let x_cap: usize = spec.value("x_cap", 16)?;
    let mut rng = Lcg::new(spec.seed);
    let mut tasks: Vec<Task> = Vec::new();

    match mode.as_str() {
        "abelian" => {
            let given = spec.has("a") || spec.has("transporter") || spec.has("initial");
            let mut data = Vec::new();
            if given {
                let a = spec.field("a", &[1], 0)?;
                let t = spec.field("transporter", &[1], 0)?;
                let i = spec.field("initial", &[1], 0)?;
                data.push((a, t, i));
            } else {
                for _ in 0..cases {
                    data.push((rng.poly(&[1], degree, degree, amplitude), rng.poly(&[1], degree, degree, amplitude), rng.poly(&[1], degree, degree, amplitude)));
                }
            }
            for (case, (a, t, i)) in data.into_iter().enumerate() {
                for &steps in &steps_list {
                    let (a, t, i) = (a.clone(), t.clone(), i.clone());
                    tasks.push(Box::new(move || {
                        let label = format!("case={case};steps={steps}");
                        let oracle = abelian_transport_oracle(&a, &t, &i, y_end);
                        let opts = TransportOptions { x_cap, y_steps: steps, ..TransportOptions::default() };
                        let res = StraightenedStrip::new(scalar_form(a.clone()), t.clone(), i.clone(), y_end).and_then(|s| transport_splitting(&s, &opts));
                        match res {
                            Ok(res) => {
                                let err = res.last().max_abs_diff(&oracle);
                                transport_record(&label, "abelian", case, steps, y_end, err, tolerance)
                            }
                            Err(e) => ResultRecord::failed(label, e),
                        }
                    }));
                }
            }
        }
        "conjugation" => {
            let m: usize = spec.value("matrix_size", 2)?;
            let n = m * m;
            let gl = StructureTensor::gl(m);
            for case in 0..cases {
                let mm = DMatrix::from_row_slice(m, m, &rng.vector(n, amplitude));
                let phi0 = DMatrix::from_row_slice(m, m, &rng.vector(n, amplitude));
                for &steps in &steps_list {
                    let (mm, phi0, gl) = (mm.clone(), phi0.clone(), gl.clone());
                    tasks.push(Box::new(move || {
                        let label = format!("case={case};steps={steps}");
                        let flat = |mat: &DMatrix<f64>| -> Vec<f64> { (0..n).map(|s| mat[(s / m, s % m)]).collect() };
                        let omega = TwoForm::pure_structure(n, 0, gl.entries()).expect("gl is antisymmetric");
                        let transporter = PolyField::constant(&[n], 0, &flat(&mm));
                        let initial = PolyField::constant(&[n], 0, &flat(&phi0));
                        let opts = TransportOptions { x_cap, y_steps: steps, ..TransportOptions::default() };
                        let res = StraightenedStrip::new(omega, transporter, initial, y_end).and_then(|s| transport_splitting(&s, &opts));
                        match res {
                            Ok(res) => {
                                let want = flat(&conjugation_oracle(&mm, &phi0, y_end));
                                let last = res.last();
                                let err = last.max_abs_diff(&PolyField::constant(&[n], last.cap(), &want));
                                transport_record(&label, "conjugation", case, steps, y_end, err, tolerance)
                            }
                            Err(e) => ResultRecord::failed(label, e),
                        }
                    }));
                }
            }
        }
        _ => {
            let n: usize = spec.value("colors", 3)?;
            let factor: usize = spec.value("reference_factor", 4)?;
            let nonzero_min = spec.positive("nonzero_min", 1e-6)?;
            for case in 0..cases {
                let coeffs: Vec<DMatrix<f64>> = (0..=degree).map(|_| DMatrix::from_row_slice(n, n, &rng.vector(n * n, amplitude))).collect();
                let u = DVector::from_vec(rng.vector(n, 1.0));
                let v_random = DVector::from_vec(rng.vector(n, 1.0));
                for &steps in &steps_list {
                    let (coeffs, u, v_random) = (coeffs.clone(), u.clone(), v_random.clone());
                    tasks.push(Box::new(move || {
                        let label = format!("case={case};steps={steps}");
                        let path = match MatrixPath::polynomial(coeffs.clone(), 0.0, y_end) {
                            Ok(p) => p,
                            Err(e) => return ResultRecord::failed(label, e),
                        };
                        let v = path_ordered_exp(&path, steps * factor) * &u;
                        let transported = one_dim_obstruction(&path, &u, &v, steps).map(|d| d.amax());
                        let random = one_dim_obstruction(&path, &u, &v_random, steps).map(|d| d.amax());
                        match (transported, random) {
                            (Ok(t), Ok(r)) => ResultRecord::point(label)
                                .text("mode", "one-dim")
                                .int("case", case)
                                .int("steps", steps)
                                .num("step", y_end / steps as f64)
                                .num("transported_norm", t)
                                .num("random_norm", r)
                                .check(t <= tolerance, || format!("transported data leave {t:.3e}"))
                                .check(r > nonzero_min, || format!("random data give only {r:.3e}")),
                            (Err(e), _) | (_, Err(e)) => ResultRecord::failed(label, e),
                        }
                    }));
                }
            }
        }
    }

    let per_case = steps_list.len();
    let summarize: Box<dyn Fn(&[ResultRecord]) -> Vec<ResultRecord> + Send + Sync> = if per_case >= 3 && mode != "one-dim" {
        Box::new(move |records: &[ResultRecord]| {
            records.chunks(per_case).enumerate().map(|(case, chunk)| slopes_summary(&format!("case={case}"), chunk, "step", "error", min_slope)).collect()
        })
    } else {
        let metric = if mode == "one-dim" { "transported_norm" } else { "error" };
        Box::new(move |records: &[ResultRecord]| vec![all_pass_summary("all", records, metric)])
    };
    Ok((tasks, summarize))
}

fn transport_record(label: &str, mode: &str, case: usize, steps: usize, y_end: f64, err: f64, tolerance: f64) -> ResultRecord {
    ResultRecord::point(label)
        .text("mode", mode)
        .int("case", case)
        .int("steps", steps)
        .num("step", y_end / steps as f64)
        .num("error", err)
        .check(err <= tolerance, || format!("error {err:.3e} above {tolerance:e}"))
}

fn plan_triangle(spec: &ExperimentSpec) -> Result<Planned, ConfigError> {
    let cases: usize = spec.value("cases", 10)?;
    let eps_list: Vec<f64> = sweep(spec, "eps", &[0.1, 0.05, 0.025, 0.0125])?;
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("`eps` entries must be positive"));
    }
    let amplitude = spec.positive("amplitude", 0.3)?;
    let omega_degree: usize = spec.value("omega_degree", 2)?;
    let jet_order: usize = spec.value("jet_order", 8)?;
    if jet_order < 4 {
        return Err(invalid("`jet_order` must be at least 4"));
    }
    let control: bool = spec.value("control", true)?;
    let control_delta: f64 = spec.value("control_delta", 0.1)?;
    let control_max: f64 = spec.value("control_max", 1.3)?;
    let ranges = [range(spec, "i1_range", [0.8, 1.3])?, range(spec, "i2_range", [1.8, 2.3])?, range(spec, "i3_range", [2.7, 3.3])?];
    let c = spec.structure("c", 3, "so3")?;
    let mut rng = Lcg::new(spec.seed);
    let data: Vec<FlatJetData> = (0..cases).map(|_| random_flat_jets(&mut rng, c.entries(), 3, amplitude, omega_degree, jet_order)).collect();

    let mut tasks: Vec<Task> = Vec::new();
    for (case, d) in data.iter().enumerate() {
        for &eps in &eps_list {
            let d = d.clone();
            tasks.push(Box::new(move || {
                let label = format!("case={case};eps={eps}");
                let norms = triangle_norms(&d, eps);
                let control_norm = if control { perturbed_i2_norm(&d, eps, control_delta).map(Some) } else { Ok(None) };
                match (norms, control_norm) {
                    (Ok([i1, i2, i3]), Ok(cn)) => {
                        let mut r = ResultRecord::point(label).int("case", case).num("eps", eps).num("i1", i1).num("i2", i2).num("i3", i3);
                        if let Some(cn) = cn {
                                                        r = r.num("control_i2", cn);
                        }
                        r
                    }
                    (Err(e), _) | (_, Err(e)) => ResultRecord::failed(label, e),
                }
            }));
        }
    }
    let per_case = eps_list.len();
    let summarize = Box::new(move |records: &[ResultRecord]| -> Vec<ResultRecord> {
        records
            .chunks(per_case)
            .enumerate()
            .map(|(case, chunk)| {
                let label = format!("case={case}");
                let fit = |col: &str| -> Result<f64, String> {
                    let s: Vec<(f64, f64)> = chunk.iter().filter_map(|r| Some((r.num_cell("eps")?, r.num_cell(col)?))).collect();
                    if s.len() != chunk.len() {
                        return Err(format!("{col}: missing points"));
                    }
                    residual_slope(&s).map_err(|e| format!("{col}: {e}"))
                };
                let mut r = ResultRecord::summary(label).int("case", case);
                let mut slopes = Vec::new();
                for (i, col) in ["i1", "i2", "i3"].into_iter().enumerate() {
                    match fit(col) {
                        Ok(s) => {
                            slopes.push(s);
                            let [lo, hi] = ranges[i];
                            r = r.check((lo..=hi).contains(&s), || format!("{col} slope {s:.3} outside [{lo}, {hi}]"));
                        }
                        Err(e) => r = r.check(false, || e),
                    }
                }
                r = r.vector("slopes", &slopes);
                if control {
                    match fit("control_i2") {
                        Ok(s) => r = r.num("control_slope", s).check(s <= control_max, || format!("control slope {s:.3} above {control_max}")),
                        Err(e) => r = r.check(false, || e),
                    }
                }
                r
            })
            .collect()
    });
    Ok((tasks, summarize))
}

fn random_color_path(rng: &mut Lcg, n: usize, degree: usize, sup: f64) -> ColorPath {
    let t_end = rng.range(0.5, 1.5);
    let coeffs: Vec<Vec<f64>> = (0..=degree).map(|_| rng.vector(n, 1.0)).collect();
    let p = ColorPath::polynomial(coeffs.clone(), t_end).expect("valid path");
    let peak = (0..=400).map(|i| p.eval(t_end * i as f64 / 400.0).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let s = if peak > 0.0 { sup / (peak * t_end) } else { 0.0 };
    ColorPath::polynomial(coeffs.iter().map(|c| c.iter().map(|v| v * s).collect()).collect(), t_end).expect("valid path")
}

fn plan_bch(spec: &ExperimentSpec) -> Result<Planned, ConfigError> {
    let mode = spec.choice("mode", "oracle", &["oracle", "second-order"])?;
    let names: Vec<String> = sweep(spec, "algebra", &["so3".to_string()])?;
    let line = spec.params.get("algebra").map_or(0, |p| p.line);
    let algebras: Vec<(String, StructureTensor)> = names
        .iter()
        .map(|name| {
            let n = match name.as_str() {
                s if s.starts_with("gl") => s[2..].parse::<usize>().map(|m| m * m).unwrap_or(0),
                _ => spec.tensors.get(name).map_or(3, |t| t.rows.iter().map(|(_, ix, _)| ix.iter().max().unwrap() + 1).max().unwrap_or(1)),
            };
            spec.structure_named(name, n, line, "algebra").map(|t| (name.clone(), t))
        })
        .collect::<Result<_, _>>()?;
    let cases: usize = spec.value("cases", 10)?;
    let degree: usize = spec.value("degree", 2)?;
    let sup = spec.positive("sup", 0.5)?;
    let order: usize = spec.value("series_order", 8)?;
    let step = spec.positive("step", 1e-3)?;
    let tolerance = spec.positive("tolerance", 1e-6)?;
    let residual_tol = spec.positive("residual_tol", 1e-8)?;
    let min_slope: f64 = spec.value("min_slope", 2.7)?;
    let mut rng = Lcg::new(spec.seed);
    let mut tasks: Vec<Task> = Vec::new();

    if mode == "oracle" {
        for (name, c) in &algebras {
            for case in 0..cases {
                let path = random_color_path(&mut rng, c.n(), degree, sup);
                let (name, c) = (name.clone(), c.clone());
                tasks.push(Box::new(move || {
                    let label = format!("algebra={name};case={case}");
                    let steps = (path.t_end() / step).ceil() as usize;
                    let sol = match cbch_solve(&path, &c, order, steps) {
                        Ok(s) => s,
                        Err(e) => return ResultRecord::failed(label, e),
                    };
                    let phi = sol.last().to_vec();
                    let (reference, residual) = if c.entries().iter().all(|v| *v == 0.0) {
                        (path.integral(path.t_end()), 0.0)
                    } else {
                        match adjoint_log_oracle(&path, &c, steps) {
                            Ok(o) => (o.phi, o.residual),
                            Err(e) => return ResultRecord::failed(label, e),
                        }
                    };
                    let d = max_abs_diff(&phi, &reference);
                    ResultRecord::point(label)
                        .text("mode", "oracle")
                        .text("algebra", &name)
                        .int("case", case)
                        .vector("phi", &phi)
                        .vector("reference", &reference)
                        .num("discrepancy", d)
                        .num("residual", residual)
                        .check(d <= tolerance, || format!("discrepancy {d:.3e} above {tolerance:e}"))
                        .check(residual <= residual_tol, || format!("oracle residual {residual:.3e}"))
                }));
            }
        }
    } else {
        let amplitudes: Vec<f64> = sweep(spec, "amplitudes", &[0.02, 0.04, 0.08])?;
        let (name, c) = algebras[0].clone();
        let x = rng.vector(c.n(), 1.0);
        let y = rng.vector(c.n(), 1.0);
        for &s in &amplitudes {
            let (name, c, x, y) = (name.clone(), c.clone(), x.clone(), y.clone());
            tasks.push(Box::new(move || {
                let label = format!("algebra={name};amplitude={s}");
                let scale = |v: &[f64]| v.iter().map(|a| a * s).collect::<Vec<_>>();
                let run = ColorPath::segments(vec![scale(&x), scale(&y)], 0.5).and_then(|p| {
                    let steps = (p.t_end() / step).ceil() as usize;
                    Ok((cbch_solve(&p, &c, order, steps)?, cbch_second_order(&p, &c)))
                });
                match run {
                    Ok((sol, second)) => {
                        let d = max_abs_diff(sol.last(), &second);
                        ResultRecord::point(label)
                            .text("mode", "second-order")
                            .text("algebra", &name)
                            .num("amplitude", s)
                            .vector("phi", sol.last())
                            .vector("reference", &second)
                            .num("discrepancy", d)
                    }
                    Err(e) => ResultRecord::failed(label, e),
                }
            }));
        }
    }
    let per_algebra = cases;
    let summarize: Box<dyn Fn(&[ResultRecord]) -> Vec<ResultRecord> + Send + Sync> = if mode == "oracle" {
        Box::new(move |records: &[ResultRecord]| {
            if per_algebra == 0 {
                return Vec::new();
            }
            records.chunks(per_algebra).zip(&names).map(|(chunk, name)| all_pass_summary(&format!("algebra={name}"), chunk, "discrepancy")).collect()
        })
    } else {
        Box::new(move |records: &[ResultRecord]| vec![slopes_summary("slope", records, "amplitude", "discrepancy", min_slope)])
    };
    Ok((tasks, summarize))
}

fn plan_loop(spec: &ExperimentSpec) -> Result<Planned, ConfigError> {
    let phi_x: Vec<f64> = sweep(spec, "phi_x", &[1.0, 0.0, 0.0])?;
    let phi_y: Vec<f64> = sweep(spec, "phi_y", &[0.0, 1.0, 0.0])?;
    if phi_x.len() != phi_y.len() {
        return Err(invalid("`phi_x` and `phi_y` need equal length"));
    }
    let c = spec.structure("c", phi_x.len(), "so3")?;
    let hs: Vec<f64> = sweep(spec, "h", &[0.2, 0.1, 0.05])?;
    if hs.iter().any(|h| !(*h > 0.0)) {
        return Err(invalid("`h` entries must be positive"));
    }
    let order: usize = spec.value("series_order", 8)?;
    let steps: usize = spec.value("steps", 4000)?;
    let min_slope: f64 = spec.value("min_slope", 2.7)?;
    let tasks: Vec<Task> = hs
        .iter()
        .map(|&h| {
            let (px, py, c) = (phi_x.clone(), phi_y.clone(), c.clone());
            Box::new(move || {
                let label = format!("h={h}");
                match loop_commutator_experiment(&px, &py, &c, h, order, steps) {
                    Ok((phi, lead)) => {
                        let d = max_abs_diff(&phi, &lead);
                        ResultRecord::point(label).num("h", h).vector("phi_loop", &phi).vector("leading", &lead).num("deviation", d)
                    }
                    Err(e) => ResultRecord::failed(label, e),
                }
            }) as Task
        })
        .collect();
    Ok((tasks, Box::new(move |records: &[ResultRecord]| vec![slopes_summary("slope", records, "h", "deviation", min_slope)])))
}

fn plan_gauge(spec: &ExperimentSpec) -> Result<Planned, ConfigError> {
    let cases: usize = spec.value("cases", 20)?;
    let n: usize = spec.value("colors", 2)?;
    let degree: usize = spec.value("degree", 2)?;
    let amplitude = spec.positive("amplitude", 1.0)?;
    let gauge_amplitude = spec.positive("gauge_amplitude", 0.3)?;
    let cap: usize = spec.value("cap", 24)?;
    let compare_cap: usize = spec.value("compare_cap", 8)?;
    let tolerance = spec.positive("tolerance", 1e-10)?;
    if compare_cap > cap {
        return Err(invalid("`compare_cap` exceeds `cap`"));
    }
    let mut rng = Lcg::new(spec.seed);
    let mut tasks: Vec<Task> = Vec::new();
    for case in 0..cases {
        let g = &PolyField::identity(n, cap) + &rng.poly(&[n, n], 1, cap, gauge_amplitude);
        let ax = rng.poly(&[n], degree, cap, amplitude);
        let ay = rng.poly(&[n], degree, cap, amplitude);
        let a = rng.poly(&[n], degree, cap, amplitude);
        let bx = rng.poly(&[n, n], 1, cap, amplitude);
        let by = rng.poly(&[n, n], 1, cap, amplitude);
        let c = antisymmetrize(&rng.poly(&[n, n, n], 1, cap, amplitude));
        let px = rng.poly(&[n], degree, cap, amplitude);
        let py = rng.poly(&[n], degree, cap, amplitude);
        tasks.push(Box::new(move || {
            let label = format!("case={case}");
            let t = match GaugeTransform::new(g.clone(), ax.clone(), ay.clone()) {
                Ok(t) => t,
                Err(e) => return ResultRecord::failed(label, e),
            };
            let w = TwoForm::new(a.clone(), bx.clone(), by.clone(), c.clone()).expect("antisymmetrized");
            let s = Splitting::new(px.clone(), py.clone()).expect("shapes agree");
            let lhs = omega_exterior_derivative(&gauge_apply_two_form(&t, &w), &gauge_apply_splitting(&t, &s));
            let rhs = t.g().matvec(&omega_exterior_derivative(&w, &s));
            let d = lhs.with_cap(compare_cap).max_abs_diff(&rhs.with_cap(compare_cap));
            ResultRecord::point(label).int("case", case).num("deviation", d).check(d <= tolerance, || format!("deviation {d:.3e}"))
        }));
    }
    Ok((tasks, Box::new(|records: &[ResultRecord]| vec![all_pass_summary("all", records, "deviation")])))
}

/// Kinds with their one-line descriptions.
pub fn list_kinds() -> Vec<(&'static str, &'static str)> {
    Kind::ALL.iter().map(|k| (k.name(), k.summary())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn run(text: &str) -> Vec<ResultRecord> {
        run_experiment(&parse_config(text).unwrap(), Some(2)).unwrap()
    }

    #[test]
    fn minimal_abelian_disk() {
        let recs = run("[experiment]\nkind = disk-obstruction\n[field A]\n0 0 0 1.0\n[boundary empty]\n[params]\na = A\nboundary = empty\nexpected = 0.5\n");
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert!(r.pass, "{}", r.message);
        assert_eq!(r.get("obstruction"), Some(&Cell::Vector(vec![0.5])));
        assert!(r.num_cell("residual").unwrap() <= 1e-10);
    }

    #[test]
    fn triangle_records_and_summary() {
        let recs = run("[experiment]\nkind = triangle-orders\nseed = 3\n[params]\ncases = 1\n");
        assert_eq!(recs.len(), 5);
        assert_eq!(recs[4].record, RecordKind::Summary);
        assert!(recs[4].pass, "{}", recs[4].message);
        match recs[4].get("slopes") {
            Some(Cell::Vector(s)) => assert!((s[0] - 1.0).abs() < 0.3 && (s[1] - 2.0).abs() < 0.3 && (s[2] - 3.0).abs() < 0.3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_tensor_bch_matches_integral() {
        let recs = run("[experiment]\nkind = bch-compare\n[params]\nalgebra = zero\ncases = 2\n");
        assert!(recs.iter().all(|r| r.pass));
        assert!(recs[0].num_cell("discrepancy").unwrap() < 1e-14);
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let spec = parse_config("[experiment]\nkind = loop-area\n[params]\nfoo = 1\n").unwrap();
        assert!(matches!(run_experiment(&spec, Some(1)), Err(RunError::Config(ConfigError::UnknownKey { line: 4, .. }))));
    }

    #[test]
    fn output_is_independent_of_thread_count() {
        let spec = parse_config("[experiment]\nkind = gauge-check\nseed = 9\n[params]\ncases = 4\ncap = 10\n").unwrap();
        let one = to_csv(Kind::GaugeCheck, &run_experiment(&spec, Some(1)).unwrap());
        let four = to_csv(Kind::GaugeCheck, &run_experiment(&spec, Some(4)).unwrap());
        assert_eq!(one, four);
        assert!(one.starts_with("experiment,record,point,case,deviation,pass,message\n"));
    }

    #[test]
    fn csv_escapes_messages() {
        let mut r = ResultRecord::point("p").num("h", 0.5);
        r.message = "a, \"b\"".into();
        let csv = to_csv(Kind::LoopArea, &[r]);
        assert!(csv.ends_with(",5.0000000000000000e-1,,,,,true,\"a, \"\"b\"\"\"\n"), "{csv}");
    }
}
