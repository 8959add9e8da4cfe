//! Barrier-parameter reduction schedules, selected by name.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduction factor `sigma` such that one Newton step recenters after
/// `mu <- sigma mu`:
/// `sigma = 1 - ln(g) / (2 rho sqrt(nu) + ln(g))`,
/// `g = (2 kappa + sqrt(2)/rho) / (kappa + sqrt(2)/rho)`.
pub fn certified_sigma(nu: f64, rho: f64, kappa: f64) -> f64 {
    let r = std::f64::consts::SQRT_2 / rho;
    let lg = ((2.0 * kappa + r) / (kappa + r)).ln();
    1.0 - lg / (2.0 * rho * nu.sqrt() + lg)
}

pub trait SigmaSchedule: Send + Sync {
    fn name(&self) -> &'static str;
    fn sigma(&self, nu: f64, rho: f64, kappa: f64) -> f64;
    /// Whether the one-step recentering guarantee applies.
    fn certified(&self) -> bool;
}

struct Certified;

impl SigmaSchedule for Certified {
    fn name(&self) -> &'static str {
        "certified"
    }
    fn sigma(&self, nu: f64, rho: f64, kappa: f64) -> f64 {
        certified_sigma(nu, rho, kappa)
    }
    fn certified(&self) -> bool {
        true
    }
}

struct Fixed(f64);

impl SigmaSchedule for Fixed {
    fn name(&self) -> &'static str {
        "fixed"
    }
    fn sigma(&self, _: f64, _: f64, _: f64) -> f64 {
        self.0
    }
    fn certified(&self) -> bool {
        false
    }
}

pub type ScheduleFactory = fn(Option<f64>) -> Result<Box<dyn SigmaSchedule>>;

pub struct ScheduleRegistry {
    factories: BTreeMap<String, ScheduleFactory>,
}

impl ScheduleRegistry {
    pub fn empty() -> Self {
        ScheduleRegistry { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &str, f: ScheduleFactory) {
        self.factories.insert(name.to_string(), f);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(|s| s.as_str()).collect()
    }

    pub fn build(&self, name: &str, arg: Option<f64>) -> Result<Box<dyn SigmaSchedule>> {
        let f = self
            .factories
            .get(name)
            .ok_or_else(|| Error::Parameter(format!("unknown sigma schedule '{name}' (known: {})", self.names().join(", "))))?;
        f(arg)
    }
}

impl Default for ScheduleRegistry {
    fn default() -> Self {
        let mut r = ScheduleRegistry::empty();
        r.register("certified", |_| Ok(Box::new(Certified)));
        r.register("fixed", |a| {
            let v = a.ok_or_else(|| Error::Parameter("fixed sigma needs a value".into()))?;
            check_fixed(v)?;
            Ok(Box::new(Fixed(v)))
        });
        r
    }
}

fn check_fixed(v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("sigma must lie in (0, 1), got {v}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[derive(Default)]
pub enum SigmaMode {
    #[default]
    Certified,
    Fixed(f64),
}

impl SigmaMode {
    pub fn schedule(&self) -> Result<Box<dyn SigmaSchedule>> {
        let reg = ScheduleRegistry::default();
        match *self {
            SigmaMode::Certified => reg.build("certified", None),
            SigmaMode::Fixed(v) => reg.build("fixed", Some(v)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SigmaMode::Certified => Ok(()),
            SigmaMode::Fixed(v) => check_fixed(v),
        }
    }
}

impl fmt::Display for SigmaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaMode::Certified => write!(f, "certified"),
            SigmaMode::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// `certified`, a number in `(0, 1)`, or `fixed:<number>`.
impl FromStr for SigmaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("certified") {
            return Ok(SigmaMode::Certified);
        }
        let num = t.strip_prefix("fixed:").unwrap_or(t);
        let v: f64 = num.parse().map_err(|_| Error::Parameter(format!("sigma must be 'certified' or a number in (0, 1), got '{s}'")))?;
        check_fixed(v)?;
        Ok(SigmaMode::Fixed(v))
    }
}
