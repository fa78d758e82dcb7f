use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Value that takes effect at `start` (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub value: f64,
}

/// Piecewise-constant temperature (K), irradiance (W/m²) and load resistance (Ω).
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub temperature: Vec<Segment>,
    pub irradiance: Vec<Segment>,
    pub load: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditions {
    pub temperature: f64,
    pub irradiance: f64,
    pub load: f64,
}

fn seg(start: f64, value: f64) -> Segment {
    Segment { start, value }
}

impl Schedule {
    pub fn constant(temperature: f64, irradiance: f64, load: f64) -> Self {
        Self {
            temperature: vec![seg(0.0, temperature)],
            irradiance: vec![seg(0.0, irradiance)],
            load: vec![seg(0.0, load)],
        }
    }

    /// Builds a channel from `(start, value)` pairs.
    pub fn steps(points: &[(f64, f64)]) -> Vec<Segment> {
        points.iter().map(|&(s, v)| seg(s, v)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (ch, positive) in [(&self.temperature, true), (&self.irradiance, false), (&self.load, true)] {
            if ch.first().map(|s| s.start) != Some(0.0) {
                return Err(Error::InvalidInput("every schedule channel must start at t = 0"));
            }
            if ch.windows(2).any(|w| !(w[1].start > w[0].start)) {
                return Err(Error::InvalidInput("schedule times must be strictly increasing"));
            }
            let ok = ch
                .iter()
                .all(|s| s.value.is_finite() && if positive { s.value > 0.0 } else { s.value >= 0.0 });
            if !ok {
                return Err(Error::InvalidInput("schedule values out of range"));
            }
        }
        Ok(())
    }

    fn value(ch: &[Segment], t: f64) -> f64 {
        ch.iter().rev().find(|s| s.start <= t).unwrap_or(&ch[0]).value
    }

    pub fn at(&self, t: f64) -> Conditions {
        Conditions {
            temperature: Self::value(&self.temperature, t),
            irradiance: Self::value(&self.irradiance, t),
            load: Self::value(&self.load, t),
        }
    }

    /// Sorted distinct change times after 0.
    pub fn events(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .temperature
            .iter()
            .chain(&self.irradiance)
            .chain(&self.load)
            .map(|s| s.start)
            .filter(|t| *t > 0.0)
            .collect();
        ev.sort_by(f64::total_cmp);
        ev.dedup();
        ev
    }
}
