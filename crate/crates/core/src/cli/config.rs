//! Job configuration: a TOML file with one section per measure.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::density::{RadiusSchedule, MIN_SANDWICH_POINTS};
use crate::error::{Error, Result};
use crate::kernel::{EXPONENT_BOUND, MAX_TABLE_CELLS};
use crate::measure::{CascadeSpec, Region, VectorMeasure, ENUMERATION_BITS};
use crate::regularity::MIN_DOUBLING_SAMPLES;
use crate::theorems::BillingsleyMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Spectrum,
    Density,
    Regularity,
    Verify,
}

impl JobKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            JobKind::Spectrum => "spectrum",
            JobKind::Density => "density",
            JobKind::Regularity => "regularity",
            JobKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorSection {
    pub components: Vec<String>,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSection {
    pub kind: JobKind,
    /// Inclusive depth range `[min, max]`.
    pub depths: [usize; 2],
    #[serde(default)]
    pub q_grid: Vec<f64>,
    #[serde(default)]
    pub axis: usize,
    #[serde(default)]
    pub frozen: Option<Vec<f64>>,
    #[serde(default)]
    pub kinds: Option<Vec<crate::dimension::DimensionKind>>,
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub points: Vec<f64>,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default)]
    pub theta: Option<String>,
    #[serde(default)]
    pub region: Option<Vec<Vec<u8>>>,
    #[serde(default)]
    pub billingsley_mode: BillingsleyMode,
    #[serde(default)]
    pub band: Option<f64>,
    #[serde(default)]
    pub schedule: Option<RadiusSchedule>,
}

fn default_samples() -> usize {
    256
}

fn default_a() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default)]
    pub seed: u64,
    pub output: OutputSection,
    pub measures: BTreeMap<String, CascadeSpec>,
    pub vector: VectorSection,
    pub job: JobSection,
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<JobConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn depths(&self) -> Vec<usize> {
        (self.job.depths[0]..=self.job.depths[1]).collect()
    }

    pub fn deepest(&self) -> usize {
        self.job.depths[1]
    }

    pub fn schedule(&self) -> RadiusSchedule {
        self.job.schedule.unwrap_or_default()
    }

    pub fn region(&self) -> Region {
        match &self.job.region {
            Some(words) => Region::Cylinders(words.clone()),
            None => Region::Support,
        }
    }

    pub fn build_vector(&self) -> Result<VectorMeasure> {
        let get = |name: &str| {
            self.measures
                .get(name)
                .ok_or_else(|| Error::Config(format!("unknown measure `{name}`")))
        };
        let comps = self
            .vector
            .components
            .iter()
            .map(|n| get(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        VectorMeasure::from_specs(&comps, get(&self.vector.reference)?)
            .map_err(|e| Error::Config(format!("[vector]: {e}")))
    }

    /// `q` of the job, defaulting to zeros.
    pub fn q(&self, k: usize) -> Vec<f64> {
        self.job.q.clone().unwrap_or_else(|| vec![0.0; k])
    }

    /// All checks that can run before any computation.
    pub fn validate(&self) -> Result<()> {
        for (name, spec) in &self.measures {
            spec.build()
                .map_err(|e| Error::Config(format!("[measures.{name}]: {e}")))?;
        }
        if self.vector.components.is_empty() {
            return Err(Error::Config("[vector].components is empty".into()));
        }
        let vm = self.build_vector()?;
        let k = vm.k();
        let job = &self.job;
        let [lo, hi] = job.depths;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!(
                "[job].depths = [{lo}, {hi}] must satisfy 1 <= min <= max"
            )));
        }
        let bits = hi as f64 * (vm.base_count() as f64).log2();
        let cells = (vm.active_digits().len() as f64).powi(hi as i32);
        if bits > ENUMERATION_BITS || cells > MAX_TABLE_CELLS as f64 {
            return Err(Error::Config(format!(
                "[job].depths max {hi} needs {cells:.0} grid cells (limit {MAX_TABLE_CELLS}); \
                 lower the maximum depth"
            )));
        }
        let bounded = |v: f64, what: &str| {
            if v.is_finite() && v.abs() <= EXPONENT_BOUND {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} = {v} outside [-64, 64]")))
            }
        };
        if let Some(q) = &job.q {
            if q.len() != k {
                return Err(Error::Config(format!(
                    "[job].q has {} entries for {k} components",
                    q.len()
                )));
            }
            for v in q {
                bounded(*v, "[job].q entry")?;
            }
        }
        if let Some(t) = job.t {
            bounded(t, "[job].t")?;
        }
        if let Some(s) = &job.schedule {
            s.validate()
                .map_err(|e| Error::Config(format!("[job.schedule]: {e}")))?;
        }
        if let Some(theta) = &job.theta {
            if !self.measures.contains_key(theta) {
                return Err(Error::Config(format!(
                    "[job].theta: unknown measure `{theta}`"
                )));
            }
        }
        self.region()
            .validate(vm.base_count())
            .map_err(|e| Error::Config(format!("[job].region: {e}")))?;
        if self.region().max_prefix_len() > lo {
            return Err(Error::Config(
                "[job].region cylinders must not be deeper than the minimum depth".into(),
            ));
        }
        match job.kind {
            JobKind::Spectrum => {
                if job.q_grid.is_empty() {
                    return Err(Error::Config("[job].q_grid is empty".into()));
                }
                if job.q_grid.len() < 3 {
                    return Err(Error::Config("[job].q_grid needs at least 3 points".into()));
                }
                if job.q_grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config(
                        "[job].q_grid must be strictly increasing".into(),
                    ));
                }
                for v in &job.q_grid {
                    bounded(*v, "[job].q_grid entry")?;
                }
                if job.axis >= k {
                    return Err(Error::Config(format!("[job].axis must be < {k}")));
                }
                if let Some(f) = &job.frozen {
                    if f.len() != k {
                        return Err(Error::Config(format!(
                            "[job].frozen has {} entries for {k} components",
                            f.len()
                        )));
                    }
                }
            }
            JobKind::Density => {
                if job.samples + job.points.len() < MIN_SANDWICH_POINTS {
                    return Err(Error::Config(format!(
                        "[job].samples must give at least {MIN_SANDWICH_POINTS} points"
                    )));
                }
            }
            JobKind::Regularity => {
                if job.samples < MIN_DOUBLING_SAMPLES {
                    return Err(Error::Config(format!(
                        "[job].samples must be >= {MIN_DOUBLING_SAMPLES}"
                    )));
                }
                if !(job.a > 1.0) {
                    return Err(Error::Config("[job].a must exceed 1".into()));
                }
            }
            JobKind::Verify => {
                if job.q_grid.is_empty() {
                    return Err(Error::Config("[job].q_grid is empty".into()));
                }
                if k != 1 {
                    return Err(Error::Config(
                        "verify jobs take a scalar q grid and need exactly one component".into(),
                    ));
                }
                if job.samples < MIN_DOUBLING_SAMPLES {
                    return Err(Error::Config(format!(
                        "[job].samples must be >= {MIN_DOUBLING_SAMPLES}"
                    )));
                }
                if hi < 4 {
                    return Err(Error::Config(
                        "verify jobs need a maximum depth >= 4".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
