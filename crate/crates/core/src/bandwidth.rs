//! Bandwidth rules, registered by name.
//!
//! | rule          | `h`                                   |
//! |---------------|---------------------------------------|
//! | `explicit`    | given value                           |
//! | `mild`        | `(log T / T)^{1/(2s + 2 delta alpha + d)}` |
//! | `severe`      | `(log T / (4 r delta))^{-1/alpha}`    |
//! | `sim_default` | `4 T^{-1/2}`                          |

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Chooses a bandwidth from the sampling design.
pub trait BandwidthRule: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn bandwidth(&self, delta: f64, horizon: f64, dim: usize) -> Result<f64>;
}

/// Configuration of a bandwidth rule. Only the parameters the rule reads may be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthSpec {
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

impl Default for BandwidthSpec {
    fn default() -> Self {
        Self::sim_default()
    }
}

impl BandwidthSpec {
    fn bare(rule: &str) -> Self {
        Self {
            rule: rule.into(),
            h: None,
            s: None,
            alpha: None,
            r: None,
        }
    }

    pub fn explicit(h: f64) -> Self {
        Self {
            h: Some(h),
            ..Self::bare("explicit")
        }
    }

    pub fn sim_default() -> Self {
        Self::bare("sim_default")
    }

    pub fn mild(s: f64, alpha: f64) -> Self {
        Self {
            s: Some(s),
            alpha: Some(alpha),
            ..Self::bare("mild")
        }
    }

    pub fn severe(r: f64, alpha: f64) -> Self {
        Self {
            r: Some(r),
            alpha: Some(alpha),
            ..Self::bare("severe")
        }
    }

    pub fn build(&self) -> Result<Box<dyn BandwidthRule>> {
        bandwidth_registry().build(&self.rule, self)
    }

    pub fn resolve(&self, delta: f64, horizon: f64, dim: usize) -> Result<f64> {
        let h = self.build()?.bandwidth(delta, horizon, dim)?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Domain(format!(
                "bandwidth rule '{}' produced h = {h}",
                self.rule
            )));
        }
        Ok(h)
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        let set = [
            ("h", self.h),
            ("s", self.s),
            ("alpha", self.alpha),
            ("r", self.r),
        ];
        for (name, value) in set {
            if value.is_some() && !allowed.contains(&name) {
                return Err(Error::config(format!(
                    "bandwidth rule '{}' does not take parameter '{name}'",
                    self.rule
                )));
            }
        }
        Ok(())
    }

    fn required(&self, name: &str, value: Option<f64>) -> Result<f64> {
        match value {
            Some(v) if v.is_finite() && v > 0.0 => Ok(v),
            Some(v) => Err(Error::config(format!(
                "bandwidth parameter '{name}' must be positive, got {v}"
            ))),
            None => Err(Error::config(format!(
                "bandwidth rule '{}' requires parameter '{name}'",
                self.rule
            ))),
        }
    }
}

/// Parameters of the rate-optimal rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateParams {
    Mild { s: f64, alpha: f64 },
    Severe { r: f64, alpha: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Explicit(pub f64);

#[derive(Debug, Clone, Copy)]
pub struct SimDefault;

#[derive(Debug, Clone, Copy)]
pub struct Mild {
    pub s: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Severe {
    pub r: f64,
    pub alpha: f64,
}

impl BandwidthRule for Explicit {
    fn name(&self) -> &'static str {
        "explicit"
    }

    fn bandwidth(&self, _: f64, _: f64, _: usize) -> Result<f64> {
        Ok(self.0)
    }
}

impl BandwidthRule for SimDefault {
    fn name(&self) -> &'static str {
        "sim_default"
    }

    fn bandwidth(&self, _: f64, horizon: f64, _: usize) -> Result<f64> {
        check_horizon(horizon)?;
        Ok(4.0 / horizon.sqrt())
    }
}

impl BandwidthRule for Mild {
    fn name(&self) -> &'static str {
        "mild"
    }

    fn bandwidth(&self, delta: f64, horizon: f64, dim: usize) -> Result<f64> {
        bandwidth_mild(self.s, self.alpha, delta, horizon, dim)
    }
}

impl BandwidthRule for Severe {
    fn name(&self) -> &'static str {
        "severe"
    }

    fn bandwidth(&self, delta: f64, horizon: f64, _: usize) -> Result<f64> {
        bandwidth_severe(self.r, self.alpha, delta, horizon)
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "horizon must be positive, got {horizon}"
        )))
    }
}

/// `(log T / T)^{1/(2s + 2 delta alpha + d)}` for mildly ill-posed problems.
pub fn bandwidth_mild(s: f64, alpha: f64, delta: f64, horizon: f64, dim: usize) -> Result<f64> {
    check_horizon(horizon)?;
    if !(s > 1.0) || !(alpha >= 0.0) || !(delta >= 0.0) {
        return Err(Error::Domain(format!(
            "mild rule needs s > 1, alpha >= 0, delta >= 0 (got s={s}, alpha={alpha}, delta={delta})"
        )));
    }
    if horizon <= std::f64::consts::E {
        return Err(Error::Domain(format!(
            "mild rule is degenerate for T <= e (T = {horizon})"
        )));
    }
    let exponent = 1.0 / (2.0 * s + 2.0 * delta * alpha + dim as f64);
    Ok((horizon.ln() / horizon).powf(exponent))
}

/// `(log T / (4 r delta))^{-1/alpha}` for severely ill-posed problems.
pub fn bandwidth_severe(r: f64, alpha: f64, delta: f64, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    if !(r > 0.0) || !(alpha > 0.0) || !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "severe rule needs r, alpha, delta > 0 (got r={r}, alpha={alpha}, delta={delta})"
        )));
    }
    let base = horizon.ln() / (4.0 * r * delta);
    if base <= 1.0 {
        return Err(Error::Domain(format!(
            "severe rule needs log T > 4 r delta (log T = {}, 4 r delta = {})",
            horizon.ln(),
            4.0 * r * delta
        )));
    }
    Ok(base.powf(-1.0 / alpha))
}

pub fn bandwidth_registry() -> &'static Registry<dyn BandwidthRule, BandwidthSpec> {
    static REGISTRY: OnceLock<Registry<dyn BandwidthRule, BandwidthSpec>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg = Registry::new("bandwidth rule");
        reg.register("explicit", |p: &BandwidthSpec| {
            p.only(&["h"])?;
            Ok(Box::new(Explicit(p.required("h", p.h)?)) as Box<dyn BandwidthRule>)
        });
        reg.register("sim_default", |p: &BandwidthSpec| {
            p.only(&[])?;
            Ok(Box::new(SimDefault) as Box<dyn BandwidthRule>)
        });
        reg.register("mild", |p: &BandwidthSpec| {
            p.only(&["s", "alpha"])?;
            let s = p.required("s", p.s)?;
            let alpha = p.alpha.unwrap_or(0.0);
            if s <= 1.0 || alpha < 0.0 {
                return Err(Error::config(format!(
                    "mild rule needs s > 1 and alpha >= 0 (s={s}, alpha={alpha})"
                )));
            }
            Ok(Box::new(Mild { s, alpha }) as Box<dyn BandwidthRule>)
        });
        reg.register("severe", |p: &BandwidthSpec| {
            p.only(&["r", "alpha"])?;
            Ok(Box::new(Severe {
                r: p.required("r", p.r)?,
                alpha: p.required("alpha", p.alpha)?,
            }) as Box<dyn BandwidthRule>)
        });
        reg
    })
}

impl From<RateParams> for BandwidthSpec {
    fn from(p: RateParams) -> Self {
        match p {
            RateParams::Mild { s, alpha } => BandwidthSpec::mild(s, alpha),
            RateParams::Severe { r, alpha } => BandwidthSpec::severe(r, alpha),
        }
    }
}
