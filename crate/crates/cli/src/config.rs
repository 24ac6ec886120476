//! Run configuration.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckId {
    Metric,
    Transport,
    Cross,
    Normality,
    Gauge,
    Shift,
}

impl CheckId {
    pub const ALL: [CheckId; 6] =
        [CheckId::Metric, CheckId::Transport, CheckId::Cross, CheckId::Normality, CheckId::Gauge, CheckId::Shift];

    pub fn id(self) -> &'static str {
        match self {
            CheckId::Metric => "metric",
            CheckId::Transport => "transport",
            CheckId::Cross => "cross",
            CheckId::Normality => "normality",
            CheckId::Gauge => "gauge",
            CheckId::Shift => "shift",
        }
    }

    /// Checks that divide by `Ω` and so need fiber points away from zero.
    pub fn needs_nonzero_fiber(self) -> bool {
        matches!(self, CheckId::Cross | CheckId::Normality | CheckId::Gauge)
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CheckId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| format!("unknown check '{s}' (expected one of metric, transport, cross, normality, gauge, shift)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format '{s}' (expected json or csv)")),
        }
    }
}

/// Pass thresholds. Field deviations are relative, residuals absolute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub metric: f64,
    pub round_trip: f64,
    pub transport: f64,
    pub curvature: f64,
    pub cross: f64,
    pub projector: f64,
    pub normality: f64,
    pub gauge_invariant: f64,
    pub gauge_rule: f64,
    pub gauge_residual: f64,
    pub shift: f64,
    pub shift_initial: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            metric: 1e-9,
            round_trip: 1e-10,
            transport: 1e-7,
            curvature: 1e-7,
            cross: 1e-6,
            projector: 1e-9,
            normality: 1e-9,
            gauge_invariant: 1e-7,
            gauge_rule: 1e-6,
            gauge_residual: 1e-7,
            shift: 1e-6,
            shift_initial: 1e-10,
        }
    }
}

impl Tolerances {
    fn all(&self) -> [(&'static str, f64); 12] {
        [
            ("metric", self.metric),
            ("round-trip", self.round_trip),
            ("transport", self.transport),
            ("curvature", self.curvature),
            ("cross", self.cross),
            ("projector", self.projector),
            ("normality", self.normality),
            ("gauge-invariant", self.gauge_invariant),
            ("gauge-rule", self.gauge_rule),
            ("gauge-residual", self.gauge_residual),
            ("shift", self.shift),
            ("shift-initial", self.shift_initial),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    /// Selected checks, in run order. `None` runs every check the file
    /// supports.
    pub checks: Option<Vec<CheckId>>,
    pub samples: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// Interval for every chart coordinate.
    pub x_box: [f64; 2],
    /// Interval for every fiber coordinate.
    pub fiber_box: [f64; 2],
    pub connection_free: bool,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            checks: None,
            samples: 100,
            seed: 0,
            tolerances: Tolerances::default(),
            x_box: [-1.0, 1.0],
            fiber_box: [0.5, 1.5],
            connection_free: false,
            format: Format::Json,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.samples == 0 {
            return Err("sample count must be at least 1".into());
        }
        for (name, t) in self.tolerances.all() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("tolerance {name} must be positive"));
            }
        }
        for (name, [a, b]) in [("x box", self.x_box), ("fiber box", self.fiber_box)] {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(format!("{name} [{a}, {b}] is not an interval"));
            }
        }
        let [a, b] = self.fiber_box;
        let straddles = a <= 0.0 && b >= 0.0;
        let selected = self.checks.as_deref().unwrap_or(&CheckId::ALL);
        if straddles && selected.iter().any(|c| c.needs_nonzero_fiber()) {
            return Err("fiber box must exclude zero for the cross, normality and gauge checks".into());
        }
        Ok(())
    }
}
