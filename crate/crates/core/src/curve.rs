//! Hydrogen production curves and their concave piecewise-linear fits.
//!
//! Curves are normalized per MW of module capacity: the load fraction `x`
//! is `p / c_max` and `h_norm(x)` is kg/h of hydrogen per MW of capacity, so
//! a module of capacity `c` produces `c * h_norm(p / c)` kg/h at power `p`.

use std::io::Read;

use serde::{Deserialize, Serialize};

/// Secant-slope increases up to this much are treated as sampling noise.
pub const CONCAVITY_TOLERANCE: f64 = 1e-9;

/// Minimum number of samples for a user-supplied curve.
pub const MIN_SAMPLES: usize = 3;

/// Number of samples drawn from the parametric reference curve.
pub const REFERENCE_SAMPLES: usize = 1001;

/// Header of the curve CSV format.
pub const CURVE_CSV_HEADER: [&str; 2] = ["load_fraction", "h_norm_kg_per_hour_per_mw"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("too few samples: got {got}, need at least {MIN_SAMPLES}")]
    TooFewSamples { got: usize },
    #[error("invalid reference parameters: {0}")]
    InvalidParameters(String),
    #[error("sample {index}: load fraction {x} is not strictly increasing")]
    NonMonotone { index: usize, x: f64 },
    #[error("sample {index}: load fraction {x} outside [{x_min}, 1]")]
    OutOfRange { index: usize, x: f64, x_min: f64 },
    #[error("sample {index}: hydrogen output {h} must be positive and finite")]
    NonPositive { index: usize, h: f64 },
    #[error("sample {index}: secant slope increases ({before} -> {after}), curve is not concave")]
    NotConcave { index: usize, before: f64, after: f64 },
    #[error("specific production peaks at the end of the range (sample {index}), expected an interior peak")]
    NoInteriorPeak { index: usize },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("segment count must be at least 1")]
    ZeroSegments,
    #[error("invalid piecewise-linear curve: {0}")]
    InvalidPwl(String),
    #[error("power {p} MW outside [0, {c_max}] MW")]
    PowerOutOfRange { p: f64, c_max: f64 },
    #[error("efficiency is undefined at zero power")]
    ZeroPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ReferenceParametric,
    UserFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub h: f64,
}

/// Coefficients of `h_norm(x) = alpha * x - beta * x^2 - gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub x_min: f64,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self { alpha: 22.0, beta: 6.0, gamma: 0.54, x_min: 0.10 }
    }
}

impl ReferenceParams {
    pub fn value(&self, x: f64) -> f64 {
        self.alpha * x - self.beta * x * x - self.gamma
    }

    /// Load fraction of peak specific production.
    pub fn peak_fraction(&self) -> f64 {
        (self.gamma / self.beta).sqrt()
    }
}

/// Normalized hydrogen production of one module over its operating range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionCurve {
    x_min: f64,
    samples: Vec<CurvePoint>,
    provenance: Provenance,
    /// Parametric curves are evaluated exactly rather than interpolated.
    params: Option<ReferenceParams>,
}

impl ProductionCurve {
    /// Validates sampled points. The minimum load fraction is the first sample.
    pub fn from_samples(samples: Vec<CurvePoint>) -> Result<Self, CurveError> {
        if samples.len() < MIN_SAMPLES {
            return Err(CurveError::TooFewSamples { got: samples.len() });
        }
        let x_min = samples[0].x;
        validate_samples(x_min, &samples)?;
        Ok(Self { x_min, samples, provenance: Provenance::UserFile, params: None })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn samples(&self) -> &[CurvePoint] {
        &self.samples
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn params(&self) -> Option<&ReferenceParams> {
        self.params.as_ref()
    }

    /// `h_norm(x)` for `x` in `[x_min, 1]`; sampled curves interpolate linearly
    /// and clamp at the ends.
    pub fn value(&self, x: f64) -> f64 {
        if let Some(p) = &self.params {
            return p.value(x.clamp(self.x_min, 1.0));
        }
        let s = &self.samples;
        if x <= s[0].x {
            return s[0].h;
        }
        let last = s[s.len() - 1];
        if x >= last.x {
            return last.h;
        }
        let k = s.partition_point(|pt| pt.x <= x);
        let (a, b) = (s[k - 1], s[k]);
        a.h + (b.h - a.h) * (x - a.x) / (b.x - a.x)
    }

    /// Highest load fraction covered by the curve.
    pub fn x_max(&self) -> f64 {
        self.samples[self.samples.len() - 1].x
    }
}

fn validate_samples(x_min: f64, samples: &[CurvePoint]) -> Result<(), CurveError> {
    for (index, pt) in samples.iter().enumerate() {
        if !pt.x.is_finite() || pt.x < x_min || pt.x > 1.0 {
            return Err(CurveError::OutOfRange { index, x: pt.x, x_min });
        }
        if !(pt.h.is_finite() && pt.h > 0.0) {
            return Err(CurveError::NonPositive { index, h: pt.h });
        }
        if index > 0 && pt.x <= samples[index - 1].x {
            return Err(CurveError::NonMonotone { index, x: pt.x });
        }
    }
    if x_min <= 0.0 {
        return Err(CurveError::OutOfRange { index: 0, x: x_min, x_min: f64::MIN_POSITIVE });
    }
    let slope = |i: usize| (samples[i + 1].h - samples[i].h) / (samples[i + 1].x - samples[i].x);
    for i in 1..samples.len() - 1 {
        let (before, after) = (slope(i - 1), slope(i));
        if after > before + CONCAVITY_TOLERANCE {
            return Err(CurveError::NotConcave { index: i, before, after });
        }
    }
    let peak = samples
        .iter()
        .enumerate()
        .max_by(|a, b| (a.1.h / a.1.x).total_cmp(&(b.1.h / b.1.x)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if peak == 0 || peak == samples.len() - 1 {
        return Err(CurveError::NoInteriorPeak { index: peak });
    }
    Ok(())
}

/// Parametric stand-in curve `alpha*x - beta*x^2 - gamma` on `[x_min, 1]`,
/// whose specific production peaks at `sqrt(gamma / beta)`.
pub fn reference_curve(params: ReferenceParams) -> Result<ProductionCurve, CurveError> {
    let ReferenceParams { alpha, beta, gamma, x_min } = params;
    if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0) || ![alpha, beta, gamma].iter().all(|v| v.is_finite()) {
        return Err(CurveError::InvalidParameters("alpha, beta, gamma must be positive".into()));
    }
    if !(x_min > 0.0 && x_min < 1.0) {
        return Err(CurveError::InvalidParameters(format!("x_min {x_min} must lie in (0, 1)")));
    }
    let peak = params.peak_fraction();
    if !(peak > x_min && peak < 1.0) {
        return Err(CurveError::InvalidParameters(format!("efficiency peak {peak:.4} outside ({x_min}, 1)")));
    }
    if params.value(x_min) <= 0.0 {
        return Err(CurveError::InvalidParameters(format!("h_norm(x_min) = {} is not positive", params.value(x_min))));
    }
    let n = REFERENCE_SAMPLES;
    let samples = (0..n)
        .map(|k| {
            let x = if k == n - 1 { 1.0 } else { x_min + (1.0 - x_min) * k as f64 / (n - 1) as f64 };
            CurvePoint { x, h: params.value(x) }
        })
        .collect::<Vec<_>>();
    validate_samples(x_min, &samples)?;
    Ok(ProductionCurve { x_min, samples, provenance: Provenance::ReferenceParametric, params: Some(params) })
}

/// Reads a curve CSV (`load_fraction,h_norm_kg_per_hour_per_mw`).
pub fn load_curve_points<R: Read>(source: R) -> Result<ProductionCurve, CurveError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| CurveError::Parse { line: 1, message: e.to_string() })?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h == name).ok_or(CurveError::MissingColumn(name));
    let (xi, hi) = (col(CURVE_CSV_HEADER[0])?, col(CURVE_CSV_HEADER[1])?);
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CurveError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize, name: &str| -> Result<f64, CurveError> {
            let raw = record.get(i).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => {
                    Err(CurveError::Parse { line, message: format!("{name}: cannot parse `{raw}` as a finite number") })
                }
            }
        };
        samples.push(CurvePoint { x: field(xi, CURVE_CSV_HEADER[0])?, h: field(hi, CURVE_CSV_HEADER[1])? });
    }
    ProductionCurve::from_samples(samples)
}

/// Writes a curve in the CSV format read by [`load_curve_points`].
pub fn write_curve_csv<W: std::io::Write>(curve: &ProductionCurve, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_CSV_HEADER)?;
    for pt in curve.samples() {
        w.write_record([pt.x.to_string(), pt.h.to_string()])?;
    }
    w.flush()
}

/// One linear piece `h <= slope * p + intercept * c_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// kg/MWh
    pub slope: f64,
    /// kg/h per MW of capacity
    pub intercept: f64,
}

/// Concave piecewise-linear production model, capacity-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlCurve {
    segments: Vec<Segment>,
    /// Load fractions where consecutive segments meet the curve, when fitted.
    breakpoints: Vec<f64>,
}

impl PwlCurve {
    pub fn new(segments: Vec<Segment>) -> Result<Self, CurveError> {
        Self::with_breakpoints(segments, Vec::new())
    }

    fn with_breakpoints(segments: Vec<Segment>, breakpoints: Vec<f64>) -> Result<Self, CurveError> {
        if segments.is_empty() {
            return Err(CurveError::InvalidPwl("no segments".into()));
        }
        if segments.iter().any(|s| !s.slope.is_finite() || !s.intercept.is_finite()) {
            return Err(CurveError::InvalidPwl("non-finite coefficient".into()));
        }
        if let Some(i) = segments.windows(2).position(|w| w[1].slope >= w[0].slope) {
            return Err(CurveError::InvalidPwl(format!(
                "slopes must strictly decrease (segment {} has {} after {})",
                i + 1,
                segments[i + 1].slope,
                segments[i].slope
            )));
        }
        Ok(Self { segments, breakpoints })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Largest normalized output over the fitted range (kg/h per MW).
    pub fn max_normalized_output(&self) -> f64 {
        if self.breakpoints.is_empty() {
            return self.segments.iter().map(|s| s.slope + s.intercept).fold(f64::MIN, f64::max).max(0.0);
        }
        self.breakpoints.iter().map(|&x| self.min_lines(x, 1.0)).fold(0.0, f64::max)
    }

    fn min_lines(&self, p: f64, c_max: f64) -> f64 {
        self.segments.iter().map(|s| s.slope * p + s.intercept * c_max).fold(f64::INFINITY, f64::min)
    }
}

/// Fits `n_segments` secants through equally spaced breakpoints on `[x_min, 1]`.
///
/// Segments below the efficiency peak have negative intercepts; the scheduling
/// model scales intercepts by the module's producing indicator so an idle
/// module is held at zero output.
pub fn fit_concave_pwl(curve: &ProductionCurve, n_segments: usize, c_max: f64) -> Result<PwlCurve, CurveError> {
    if n_segments == 0 {
        return Err(CurveError::ZeroSegments);
    }
    if !(c_max.is_finite() && c_max > 0.0) {
        return Err(CurveError::InvalidPwl(format!("capacity {c_max} must be positive")));
    }
    let (x0, x1) = (curve.x_min(), curve.x_max());
    let xs: Vec<f64> = (0..=n_segments)
        .map(|k| if k == n_segments { x1 } else { x0 + (x1 - x0) * k as f64 / n_segments as f64 })
        .collect();
    let hs: Vec<f64> = xs.iter().map(|&x| curve.value(x)).collect();
    let segments = xs
        .windows(2)
        .zip(hs.windows(2))
        .map(|(x, h)| {
            let slope = (h[1] - h[0]) / (x[1] - x[0]);
            Segment { slope, intercept: h[0] - slope * x[0] }
        })
        .collect();
    PwlCurve::with_breakpoints(segments, xs)
}

/// Hydrogen output (kg/h) of a module of capacity `c_max` consuming `p` MW.
///
/// Zero power means the module is idle. Below the operating range the first
/// segment is extended and floored at zero.
pub fn eval_pwl(pwl: &PwlCurve, p: f64, c_max: f64) -> Result<f64, CurveError> {
    if !(p >= 0.0 && p <= c_max) {
        return Err(CurveError::PowerOutOfRange { p, c_max });
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    Ok(pwl.min_lines(p, c_max).max(0.0))
}

/// Specific production (kg/MWh) at power `p`.
pub fn efficiency(pwl: &PwlCurve, p: f64, c_max: f64) -> Result<f64, CurveError> {
    if p == 0.0 {
        return Err(CurveError::ZeroPower);
    }
    Ok(eval_pwl(pwl, p, c_max)? / p)
}
