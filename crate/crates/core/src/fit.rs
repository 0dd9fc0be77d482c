//! Parameter recovery for the amplifier gain and Fano-factor curves.
//!
//! Both models are fitted by a bounded Levenberg–Marquardt solver. Bounds are
//! enforced by reparametrisation (logistic for `χ` and `η`, softplus for
//! `β`), so the inner solver is unconstrained. Jacobians are analytic.
//!
//! `β` is only meaningful in the units of the dataset's pump-power axis: the
//! models depend on the pump through `β √P`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{opa_output_fano, opa_output_power, Branch, OpaConfig};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("fit did not converge after {iterations} iterations (residual {residual_norm:.6e}, gradient {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        residual_norm: f64,
        gradient_norm: f64,
    },
    #[error(
        "deamplification {value} is outside the achievable range ({lower}, 1] for chi = {chi}"
    )]
    Inversion { value: f64, lower: f64, chi: f64 },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Observations against pump power (or, for Fano fits, optionally against
/// measured deamplification). `y_amp` / `y_deamp` hold gains for the
/// amplification fit and Fano factors for the Fano fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDataset {
    pub x: Vec<f64>,
    pub y_amp: Option<Vec<f64>>,
    pub y_deamp: Option<Vec<f64>>,
    /// Per-point standard errors, shared by both branches.
    pub y_err: Option<Vec<f64>>,
}

impl CurveDataset {
    /// Validates and wraps already-sorted data.
    pub fn new(
        x: Vec<f64>,
        y_amp: Option<Vec<f64>>,
        y_deamp: Option<Vec<f64>>,
        y_err: Option<Vec<f64>>,
    ) -> Result<Self, FitError> {
        let d = Self {
            x,
            y_amp,
            y_deamp,
            y_err,
        };
        d.validate()?;
        Ok(d)
    }

    /// Sorts rows by `x` before validating.
    pub fn from_unsorted(
        x: Vec<f64>,
        y_amp: Option<Vec<f64>>,
        y_deamp: Option<Vec<f64>>,
        y_err: Option<Vec<f64>>,
    ) -> Result<Self, FitError> {
        let n = x.len();
        for (name, col) in [("y_amp", &y_amp), ("y_deamp", &y_deamp), ("y_err", &y_err)] {
            if let Some(c) = col {
                if c.len() != n {
                    return Err(FitError::InvalidData(format!(
                        "{name} has {} values, x has {n}",
                        c.len()
                    )));
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let permute = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self::new(
            permute(&x),
            y_amp.as_deref().map(permute),
            y_deamp.as_deref().map(permute),
            y_err.as_deref().map(permute),
        )
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let n = self.x.len();
        let mut distinct = self.x.clone();
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(FitError::DegenerateData(format!(
                "need at least 3 distinct x values, found {}",
                distinct.len()
            )));
        }
        if self.x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FitError::InvalidData(
                "x values must be finite and >= 0".into(),
            ));
        }
        if self.x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FitError::InvalidData(
                "x values must be strictly increasing".into(),
            ));
        }
        if self.y_amp.is_none() && self.y_deamp.is_none() {
            return Err(FitError::InvalidData(
                "no observations (y_amp and y_deamp both absent)".into(),
            ));
        }
        for (name, col) in [
            ("y_amp", &self.y_amp),
            ("y_deamp", &self.y_deamp),
            ("y_err", &self.y_err),
        ] {
            if let Some(c) = col {
                if c.len() != n {
                    return Err(FitError::InvalidData(format!(
                        "{name} has {} values, x has {n}",
                        c.len()
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(FitError::InvalidData(format!(
                        "{name} contains non-finite values"
                    )));
                }
            }
        }
        if let Some(e) = &self.y_err {
            if e.iter().any(|v| *v <= 0.0) {
                return Err(FitError::InvalidData("y_err values must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Reads `x, y_amp, y_deamp[, y_err]` by column position from a CSV with
    /// a header row. A y column left entirely empty is treated as absent.
    pub fn read_csv(path: &Path) -> Result<Self, FitError> {
        let display = path.display().to_string();
        let parse_err = |line: u64, message: String| FitError::Parse {
            path: display.clone(),
            line,
            message,
        };
        let file = File::open(path).map_err(|source| FitError::Io {
            path: display.clone(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        if headers.len() < 3 || headers.len() > 4 {
            return Err(parse_err(
                1,
                format!(
                    "expected header with 3 or 4 columns (x, y_amp, y_deamp[, y_err]), found {}",
                    headers.len()
                ),
            ));
        }
        let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); headers.len()];
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            for (i, col) in cols.iter_mut().enumerate() {
                let field = record.get(i).unwrap_or("");
                let value = if field.is_empty() {
                    None
                } else {
                    Some(field.parse::<f64>().map_err(|_| {
                        parse_err(
                            line,
                            format!("column {:?}: cannot parse {field:?}", &headers[i]),
                        )
                    })?)
                };
                col.push(value);
            }
        }
        if cols[0].is_empty() {
            return Err(parse_err(2, "no data rows".into()));
        }
        let column = |i: usize| -> Result<Option<Vec<f64>>, FitError> {
            let Some(c) = cols.get(i) else {
                return Ok(None);
            };
            if c.iter().all(Option::is_none) {
                return Ok(None);
            }
            c.iter()
                .enumerate()
                .map(|(row, v)| {
                    v.ok_or_else(|| {
                        parse_err(
                            row as u64 + 2,
                            format!("missing value in column {:?}", &headers[i]),
                        )
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
        };
        let x = column(0)?.ok_or_else(|| parse_err(2, "x column is empty".into()))?;
        Self::from_unsorted(x, column(1)?, column(2)?, column(3)?)
    }

    /// Writes the dataset in the format accepted by [`CurveDataset::read_csv`].
    pub fn write_csv(&self, path: &Path, x_name: &str) -> Result<(), FitError> {
        let io = |source| FitError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let has_err = self.y_err.is_some();
        write!(w, "{x_name},y_amp,y_deamp").map_err(io)?;
        if has_err {
            write!(w, ",y_err").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        let cell = |c: &Option<Vec<f64>>, i: usize| {
            c.as_ref().map(|v| v[i].to_string()).unwrap_or_default()
        };
        for i in 0..self.len() {
            write!(
                w,
                "{},{},{}",
                self.x[i],
                cell(&self.y_amp, i),
                cell(&self.y_deamp, i)
            )
            .map_err(io)?;
            if has_err {
                write!(w, ",{}", cell(&self.y_err, i)).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Starting values for the physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitInit {
    pub beta: f64,
    pub chi: f64,
    pub eta: f64,
}

impl Default for FitInit {
    fn default() -> Self {
        Self {
            beta: 1.0,
            chi: 0.5,
            eta: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the gradient of the weighted sum of squares,
    /// relative to `1 + max|J| · ‖r‖`.
    pub gradient_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmplificationFitOptions {
    /// Fixed efficiency; `None` fits it. With gains normalised to the
    /// unpumped output, the default of 1 applies.
    pub fixed_eta: Option<f64>,
    pub lm: LmOptions,
}

impl Default for AmplificationFitOptions {
    fn default() -> Self {
        Self {
            fixed_eta: Some(1.0),
            lm: LmOptions::default(),
        }
    }
}

/// Abscissa of a Fano dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FanoAxis {
    #[default]
    PumpPower,
    /// Classical deamplification `P_out / (η P_in)`; needs fixed `(β, χ)`.
    Deamplification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedShape {
    pub beta: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FanoFitOptions {
    pub init: FitInit,
    pub axis: FanoAxis,
    pub lm: LmOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    Amplification,
    Fano,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: FitKind,
    /// All model parameters (`beta`, `chi`, `eta`), fitted or fixed.
    pub params: BTreeMap<String, f64>,
    /// Names of fitted parameters, in covariance order.
    pub free_params: Vec<String>,
    /// Weighted sum of squared residuals.
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Covariance of the free parameters; absent when singular.
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Weighted sum of squares after each accepted step.
    pub cost_history: Vec<f64>,
    pub points: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        let i = self.free_params.iter().position(|p| p == name)?;
        self.covariance.as_ref().map(|c| c[i][i].max(0.0).sqrt())
    }

    pub fn opa(&self) -> OpaConfig {
        OpaConfig::new(
            self.param("beta"),
            self.param("chi"),
            self.param("eta"),
            1.0,
        )
        .expect("fitted parameters are within bounds")
    }

    /// Turns a non-converged result into an error.
    pub fn ensure_converged(self) -> Result<Self, FitError> {
        if self.converged {
            Ok(self)
        } else {
            Err(FitError::NonConvergence {
                iterations: self.iterations,
                residual_norm: self.residual_norm,
                gradient_norm: self.gradient_norm,
            })
        }
    }

    /// Human-readable TOML report.
    pub fn to_report(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            kind: FitKind,
            converged: bool,
            iterations: usize,
            points: usize,
            residual_norm: f64,
            gradient_norm: f64,
            free_params: &'a [String],
            params: &'a BTreeMap<String, f64>,
            std_errors: BTreeMap<&'a str, f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            covariance: Option<&'a Vec<Vec<f64>>>,
        }
        let std_errors = self
            .free_params
            .iter()
            .filter_map(|p| self.std_error(p).map(|e| (p.as_str(), e)))
            .collect();
        toml::to_string(&Report {
            kind: self.kind,
            converged: self.converged,
            iterations: self.iterations,
            points: self.points,
            residual_norm: self.residual_norm,
            gradient_norm: self.gradient_norm,
            free_params: &self.free_params,
            params: &self.params,
            std_errors,
            covariance: self.covariance.as_ref(),
        })
        .expect("report is serialisable")
    }

    /// Samples the fitted model on `n` evenly spaced pump powers in `[0, x_max]`
    /// and writes them as CSV.
    ///
    /// Amplification: `pump_power,gain_amp,gain_deamp`.
    /// Fano: `pump_power,deamplification,fano_deamp,fano_amp`.
    pub fn write_curve(&self, x_max: f64, n: usize, path: &Path) -> Result<(), FitError> {
        if n < 2 || !(x_max.is_finite() && x_max > 0.0) {
            return Err(FitError::InvalidOption(format!(
                "curve needs n >= 2 and x_max > 0 (n = {n}, x_max = {x_max})"
            )));
        }
        let io = |source| FitError::Io {
            path: path.display().to_string(),
            source,
        };
        let cfg = self.opa();
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        match self.kind {
            FitKind::Amplification => writeln!(w, "pump_power,gain_amp,gain_deamp"),
            FitKind::Fano => writeln!(w, "pump_power,deamplification,fano_deamp,fano_amp"),
        }
        .map_err(io)?;
        let unit = OpaConfig::new(cfg.beta(), cfg.chi(), 1.0, 1.0).expect("valid");
        for i in 0..n {
            let p = x_max * i as f64 / (n - 1) as f64;
            match self.kind {
                FitKind::Amplification => writeln!(
                    w,
                    "{},{},{}",
                    p,
                    opa_output_power(1.0, p, &cfg, Branch::Amplify),
                    opa_output_power(1.0, p, &cfg, Branch::Deamplify)
                ),
                FitKind::Fano => writeln!(
                    w,
                    "{},{},{},{}",
                    p,
                    opa_output_power(1.0, p, &unit, Branch::Deamplify),
                    opa_output_fano(p, &cfg, Branch::Deamplify),
                    opa_output_fano(p, &cfg, Branch::Amplify)
                ),
            }
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

// ---------------------------------------------------------------------------
// Parameter transforms

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u + (-u).exp()
    } else {
        u.exp().ln_1p()
    }
}

fn softplus_inv(b: f64) -> f64 {
    let b = b.max(1e-12);
    b + (-(-b).exp()).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Param {
    Beta,
    Chi,
    Eta,
}

impl Param {
    fn name(self) -> &'static str {
        match self {
            Param::Beta => "beta",
            Param::Chi => "chi",
            Param::Eta => "eta",
        }
    }

    fn to_physical(self, u: f64) -> f64 {
        match self {
            Param::Beta => softplus(u),
            Param::Chi | Param::Eta => logistic(u),
        }
    }

    fn to_internal(self, p: f64) -> f64 {
        match self {
            Param::Beta => softplus_inv(p),
            Param::Chi | Param::Eta => logit(p),
        }
    }

    /// d(physical)/d(internal).
    fn derivative(self, u: f64) -> f64 {
        match self {
            Param::Beta => logistic(u),
            Param::Chi | Param::Eta => {
                let s = logistic(u);
                s * (1.0 - s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Physical {
    beta: f64,
    chi: f64,
    eta: f64,
}

impl Physical {
    fn get(&self, p: Param) -> f64 {
        match p {
            Param::Beta => self.beta,
            Param::Chi => self.chi,
            Param::Eta => self.eta,
        }
    }

    fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::Beta => self.beta = v,
            Param::Chi => self.chi = v,
            Param::Eta => self.eta = v,
        }
    }
}

/// Value and gradient `[∂β, ∂χ, ∂η]` of a scalar model at pump `x`.
type ModelFn = fn(&Physical, f64, Branch) -> (f64, [f64; 3]);

/// `η (1 − χ + χ e^{±β√x})`.
fn gain_model(p: &Physical, x: f64, branch: Branch) -> (f64, [f64; 3]) {
    let sign = branch.sign();
    let sx = x.sqrt();
    let e = (sign * p.beta * sx).exp();
    let h = 1.0 - p.chi + p.chi * e;
    (
        p.eta * h,
        [p.eta * p.chi * sign * sx * e, p.eta * (e - 1.0), h],
    )
}

/// `1 − η + η (1 − χ + χ e^{±4β√x}) / (1 − χ + χ e^{±2β√x})`.
fn fano_model(p: &Physical, x: f64, branch: Branch) -> (f64, [f64; 3]) {
    let sign = branch.sign();
    let sx = x.sqrt();
    let s = sign * p.beta * sx;
    let (e2, e4) = ((2.0 * s).exp(), (4.0 * s).exp());
    let a = 1.0 - p.chi + p.chi * e4;
    let b = 1.0 - p.chi + p.chi * e2;
    let ratio = a / b;
    let d_chi = ((e4 - 1.0) * b - a * (e2 - 1.0)) / (b * b);
    let d_s = p.chi * (4.0 * e4 * b - 2.0 * a * e2) / (b * b);
    let value = 1.0 - p.eta + p.eta * ratio;
    (value, [p.eta * d_s * sign * sx, p.eta * d_chi, ratio - 1.0])
}

struct Observation {
    x: f64,
    y: f64,
    weight: f64,
    branch: Branch,
}

fn observations(data: &CurveDataset) -> Vec<Observation> {
    let mut out = Vec::new();
    for (branch, col) in [
        (Branch::Amplify, &data.y_amp),
        (Branch::Deamplify, &data.y_deamp),
    ] {
        if let Some(ys) = col {
            for (i, (&x, &y)) in data.x.iter().zip(ys).enumerate() {
                let weight = data.y_err.as_ref().map_or(1.0, |e| 1.0 / e[i]);
                out.push(Observation {
                    x,
                    y,
                    weight,
                    branch,
                });
            }
        }
    }
    out
}

struct LmOutcome {
    u: Vec<f64>,
    cost_history: Vec<f64>,
    iterations: usize,
    converged: bool,
    gradient_norm: f64,
}

/// Levenberg–Marquardt with Marquardt diagonal scaling. `eval` returns the
/// weighted residual vector and its Jacobian. Only steps that strictly lower
/// the cost are accepted.
fn levenberg_marquardt<F>(u0: Vec<f64>, eval: F, opts: &LmOptions) -> LmOutcome
where
    F: Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
{
    let mut u = u0;
    let (mut r, mut j) = eval(&u);
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = opts.initial_damping;
    let gradient_ok = |r: &DVector<f64>, j: &DMatrix<f64>| {
        let g = (j.transpose() * r).amax();
        (
            g,
            g <= opts.gradient_tolerance * (1.0 + j.amax() * r.norm()),
        )
    };

    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let (_, done) = gradient_ok(&r, &j);
        if done || cost == 0.0 {
            break;
        }
        iterations += 1;
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * &r;
        let mut a = jtj.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
        }
        let Some(chol) = a.cholesky() else {
            lambda *= 10.0;
            continue;
        };
        let step = chol.solve(&(-g));
        let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let (r_new, j_new) = eval(&trial);
        let new_cost = r_new.norm_squared();
        if new_cost.is_finite() && new_cost < cost {
            u = trial;
            r = r_new;
            j = j_new;
            cost = new_cost;
            history.push(cost);
            lambda = (lambda / 3.0).max(1e-15);
        } else {
            lambda *= 4.0;
            if lambda > 1e20 {
                break;
            }
        }
    }
    let (gradient_norm, converged) = gradient_ok(&r, &j);
    LmOutcome {
        u,
        cost_history: history,
        iterations,
        converged: converged || cost == 0.0,
        gradient_norm,
    }
}

fn run_fit(
    kind: FitKind,
    obs: &[Observation],
    model: ModelFn,
    base: Physical,
    free: &[Param],
    opts: &LmOptions,
) -> FitResult {
    let physical = |u: &[f64]| {
        let mut p = base;
        for (k, param) in free.iter().enumerate() {
            p.set(*param, param.to_physical(u[k]));
        }
        p
    };
    let eval = |u: &[f64]| {
        let p = physical(u);
        let mut r = DVector::zeros(obs.len());
        let mut j = DMatrix::zeros(obs.len(), free.len());
        for (i, o) in obs.iter().enumerate() {
            let (value, grad) = model(&p, o.x, o.branch);
            r[i] = o.weight * (value - o.y);
            for (k, param) in free.iter().enumerate() {
                j[(i, k)] = o.weight * grad[*param as usize] * param.derivative(u[k]);
            }
        }
        (r, j)
    };
    let u0: Vec<f64> = free.iter().map(|p| p.to_internal(base.get(*p))).collect();
    let out = levenberg_marquardt(u0, eval, opts);
    let p = physical(&out.u);

    // Covariance in physical parameters.
    let mut jp = DMatrix::zeros(obs.len(), free.len());
    for (i, o) in obs.iter().enumerate() {
        let (_, grad) = model(&p, o.x, o.branch);
        for (k, param) in free.iter().enumerate() {
            jp[(i, k)] = o.weight * grad[*param as usize];
        }
    }
    let residual_norm = *out.cost_history.last().expect("history starts non-empty");
    let dof = obs.len().saturating_sub(free.len()).max(1) as f64;
    let scale = if obs.iter().all(|o| o.weight == 1.0) {
        residual_norm / dof
    } else {
        1.0
    };
    let covariance = (jp.transpose() * &jp).try_inverse().map(|inv| {
        (0..free.len())
            .map(|a| (0..free.len()).map(|b| inv[(a, b)] * scale).collect())
            .collect()
    });

    FitResult {
        kind,
        params: [Param::Beta, Param::Chi, Param::Eta]
            .iter()
            .map(|q| (q.name().to_string(), p.get(*q)))
            .collect(),
        free_params: free.iter().map(|q| q.name().to_string()).collect(),
        residual_norm,
        gradient_norm: out.gradient_norm,
        iterations: out.iterations,
        converged: out.converged,
        covariance,
        cost_history: out.cost_history,
        points: obs.len(),
    }
}

fn check_init(init: &FitInit) -> Result<(), FitError> {
    let ok = init.beta.is_finite()
        && init.beta > 0.0
        && (0.0..=1.0).contains(&init.chi)
        && (0.0..=1.0).contains(&init.eta);
    if ok {
        Ok(())
    } else {
        Err(FitError::InvalidOption(format!(
            "initial values out of bounds: {init:?}"
        )))
    }
}

/// Joint fit of both branches of the amplifier gain curve with shared
/// `(β, χ)` (and `η` unless fixed).
///
/// A result with `converged == false` is returned rather than an error so the
/// diagnostics stay available; see [`FitResult::ensure_converged`].
pub fn fit_amplification(
    data: &CurveDataset,
    init: &FitInit,
    opts: &AmplificationFitOptions,
) -> Result<FitResult, FitError> {
    data.validate()?;
    check_init(init)?;
    let mut base = Physical {
        beta: init.beta,
        chi: init.chi,
        eta: init.eta,
    };
    let free: &[Param] = match opts.fixed_eta {
        Some(eta) => {
            if !(0.0..=1.0).contains(&eta) || eta == 0.0 {
                return Err(FitError::InvalidOption(format!(
                    "fixed eta = {eta} must be in (0, 1]"
                )));
            }
            base.eta = eta;
            &[Param::Beta, Param::Chi]
        }
        None => &[Param::Beta, Param::Chi, Param::Eta],
    };
    Ok(run_fit(
        FitKind::Amplification,
        &observations(data),
        gain_model,
        base,
        free,
        &opts.lm,
    ))
}

/// Fit of the Fano-factor curve. With `fixed` shape only `η` is free;
/// otherwise `(β, χ, η)` are fitted jointly.
pub fn fit_fano_curve(
    data: &CurveDataset,
    fixed: Option<FixedShape>,
    opts: &FanoFitOptions,
) -> Result<FitResult, FitError> {
    data.validate()?;
    check_init(&opts.init)?;
    let converted;
    let data = match (opts.axis, fixed) {
        (FanoAxis::PumpPower, _) => data,
        (FanoAxis::Deamplification, None) => {
            return Err(FitError::InvalidOption(
                "a deamplification axis needs fixed beta and chi".into(),
            ))
        }
        (FanoAxis::Deamplification, Some(shape)) => {
            let pumps = data
                .x
                .iter()
                .map(|g| invert_deamplification(*g, shape.beta, shape.chi))
                .collect::<Result<Vec<_>, _>>()?;
            converted = CurveDataset::from_unsorted(
                pumps,
                data.y_amp.clone(),
                data.y_deamp.clone(),
                data.y_err.clone(),
            )?;
            &converted
        }
    };
    let mut base = Physical {
        beta: opts.init.beta,
        chi: opts.init.chi,
        eta: opts.init.eta,
    };
    let free: &[Param] = match fixed {
        Some(shape) => {
            if !(shape.beta > 0.0 && shape.beta.is_finite() && (0.0..=1.0).contains(&shape.chi)) {
                return Err(FitError::InvalidOption(format!(
                    "fixed shape out of bounds: {shape:?}"
                )));
            }
            base.beta = shape.beta;
            base.chi = shape.chi;
            &[Param::Eta]
        }
        None => &[Param::Beta, Param::Chi, Param::Eta],
    };
    Ok(run_fit(
        FitKind::Fano,
        &observations(data),
        fano_model,
        base,
        free,
        &opts.lm,
    ))
}

/// Pump power at which the deamplification branch of the unit-efficiency
/// gain curve equals `g_meas`, found by bisection on `s = β√P`.
pub fn invert_deamplification(g_meas: f64, beta: f64, chi: f64) -> Result<f64, FitError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(FitError::InvalidOption(format!(
            "beta = {beta} must be > 0"
        )));
    }
    if !(chi > 0.0 && chi <= 1.0) {
        return Err(FitError::InvalidOption(format!(
            "chi = {chi} must be in (0, 1]"
        )));
    }
    let lower = 1.0 - chi;
    if !(g_meas > lower && g_meas <= 1.0) {
        return Err(FitError::Inversion {
            value: g_meas,
            lower,
            chi,
        });
    }
    if g_meas == 1.0 {
        return Ok(0.0);
    }
    let h = |s: f64| 1.0 - chi + chi * (-s).exp();
    let (mut lo, mut hi) = (0.0, 1.0);
    while h(hi) >= g_meas {
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) >= g_meas {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok((s / beta).powi(2))
}
