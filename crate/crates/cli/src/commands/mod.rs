pub mod dp_verify;
pub mod example1;
pub mod mc;
pub mod sosd;
pub mod target;

use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::OutputDir;
use crate::scenario::{Resolved, Scenario};
use crate::Common;

/// Scenario with command-line overrides applied and validated, plus the
/// output directory with the scenario file registered as an input.
pub struct Setup {
    pub resolved: Resolved,
    pub out: OutputDir,
}

impl Setup {
    pub fn new(common: &Common) -> Result<Self, CliError> {
        let mut scenario = match &common.scenario {
            Some(path) => Scenario::load(path)?,
            None => Scenario::default(),
        };
        if let Some(seed) = common.seed {
            scenario.seeds.mc = seed;
        }
        if let Some(paths) = common.paths {
            scenario.mc.paths = paths;
        }
        if let Some(dt) = common.dt {
            scenario.mc.dt = dt;
        }
        if let Some(horizon) = common.horizon {
            scenario.mc.horizon = Some(horizon);
        }
        let resolved = scenario.resolve()?;
        let mut out = OutputDir::create(&common.out)?;
        if let Some(path) = &common.scenario {
            out.record_input(path)?;
        }
        Ok(Self { resolved, out })
    }

    /// Manifest parameters: the effective scenario plus command extras.
    pub fn parameters(&self, extra: Value) -> Value {
        json!({ "scenario": self.resolved.scenario, "command": extra })
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + step * i as f64 })
        .collect()
}

/// JSON has no NaN or infinity; those become null.
pub fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
