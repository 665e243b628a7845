//! The mixed kernel `Γ^{q,t}(B) = μ(B)^q ν(B)^t` and its grid partition sums.
//!
//! Everything is carried in log-space: with `|q_i|, |t| ≤ 64` and depths in
//! the twenties the raw products leave the double range long before the sums
//! stop being meaningful.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Region, VectorMeasure};

/// Bound on `|q_i|` and `|t|`; also the cutoff bisection bracket.
pub const EXPONENT_BOUND: f64 = 64.0;
/// Largest cell table the kernel will materialise.
pub const MAX_TABLE_CELLS: u64 = 1 << 24;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub q: Vec<f64>,
    pub t: f64,
}

impl KernelParams {
    pub fn new(q: Vec<f64>, t: f64) -> Result<Self> {
        let p = KernelParams { q, t };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.is_empty() {
            return Err(Error::InvalidArgument(
                "q must have at least one entry".into(),
            ));
        }
        for &v in self.q.iter().chain(std::iter::once(&self.t)) {
            if !v.is_finite() || v.abs() > EXPONENT_BOUND {
                return Err(Error::InvalidArgument(format!(
                    "exponent {v} outside [-{EXPONENT_BOUND}, {EXPONENT_BOUND}]"
                )));
            }
        }
        Ok(())
    }

    pub fn with_t(&self, t: f64) -> KernelParams {
        KernelParams {
            q: self.q.clone(),
            t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Saturation {
    None,
    Overflow,
    Underflow,
}

/// A kernel value with its logarithm kept exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub ln: f64,
    pub value: f64,
    pub saturation: Saturation,
}

impl KernelValue {
    pub fn from_ln(ln: f64) -> Self {
        let max_ln = f64::MAX.ln();
        let min_ln = f64::MIN_POSITIVE.ln();
        if ln > max_ln {
            KernelValue {
                ln,
                value: f64::INFINITY,
                saturation: Saturation::Overflow,
            }
        } else if ln < min_ln {
            KernelValue {
                ln,
                value: f64::MIN_POSITIVE,
                saturation: Saturation::Underflow,
            }
        } else {
            KernelValue {
                ln,
                value: ln.exp(),
                saturation: Saturation::None,
            }
        }
    }
}

/// `Π μ_i^{q_i} · ν^t` evaluated as `exp(Σ q_i ln μ_i + t ln ν)`.
pub fn gamma(params: &KernelParams, mu_masses: &[f64], nu_mass: f64) -> Result<KernelValue> {
    if mu_masses.len() != params.q.len() {
        return Err(Error::Contract(format!(
            "{} masses for {} exponents",
            mu_masses.len(),
            params.q.len()
        )));
    }
    if let Some(m) = mu_masses
        .iter()
        .chain(std::iter::once(&nu_mass))
        .find(|m| !(**m > 0.0) || !m.is_finite())
    {
        return Err(Error::Contract(format!("non-positive mass {m}")));
    }
    let ln: f64 = params
        .q
        .iter()
        .zip(mu_masses)
        .map(|(q, m)| q * m.ln())
        .sum::<f64>()
        + params.t * nu_mass.ln();
    Ok(KernelValue::from_ln(ln))
}

/// What `ν` is replaced by in the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// The reference measure `ν` of the vector.
    #[default]
    Measure,
    /// The cell diameter, giving the classical `μ(B)^q |B|^t` kernel.
    Diameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumKind {
    Covering,
    Packing,
}

/// `Σ_C Γ^{q,t}(C)` over the depth-`n` grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSum {
    pub ln_value: f64,
    pub depth: usize,
    pub kind: SumKind,
    pub cell_count: usize,
}

impl PartitionSum {
    /// The sum as an extended real; `+inf` past the double range.
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

/// Running `ln Σ exp(x_i)` with a compensated inner sum.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    shift: f64,
    sum: f64,
    comp: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
            comp: 0.0,
        }
    }
}

impl LogSum {
    /// Two-pass sum of `exp(terms)`: shift by the maximum, then Neumaier.
    pub fn of(terms: &[f64]) -> LogSum {
        let shift = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return LogSum::default();
        }
        let mut s = LogSum {
            shift,
            sum: 0.0,
            comp: 0.0,
        };
        for &x in terms {
            s.add_shifted((x - shift).exp());
        }
        s
    }

    fn add_shifted(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(self, other: LogSum) -> LogSum {
        if self.shift == f64::NEG_INFINITY {
            return other;
        }
        if other.shift == f64::NEG_INFINITY {
            return self;
        }
        let (hi, lo) = if self.shift >= other.shift {
            (self, other)
        } else {
            (other, self)
        };
        let scale = (lo.shift - hi.shift).exp();
        let mut out = hi;
        out.add_shifted(lo.sum * scale);
        out.comp += lo.comp * scale;
        out
    }

    pub fn ln(&self) -> f64 {
        if self.shift == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.shift + (self.sum + self.comp).ln()
        }
    }
}

/// Deterministic parallel log-sum: fixed chunks, pairwise tree reduction.
pub fn log_sum_exp<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n_chunks = len.div_ceil(CHUNK);
    let mut partials: Vec<LogSum> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let terms: Vec<f64> = (lo..hi).map(&term).collect();
            LogSum::of(&terms)
        })
        .collect();
    while partials.len() > 1 {
        partials = partials
            .chunks(2)
            .map(|p| if p.len() == 2 { p[0].merge(p[1]) } else { p[0] })
            .collect();
    }
    partials.pop().unwrap_or_default().ln()
}

/// Log-masses of every grid cell at one depth, ready for repeated sums.
#[derive(Debug, Clone)]
pub struct CellTable {
    k: usize,
    depth: usize,
    ln_mu: Vec<f64>,
    ln_ref: Vec<f64>,
}

impl CellTable {
    pub fn build(
        vm: &VectorMeasure,
        region: &Region,
        depth: usize,
        reference: Reference,
    ) -> Result<CellTable> {
        region.validate(vm.base_count())?;
        let active = vm.active_digits().len() as u64;
        let mut count: u64 = 0;
        for p in region.prefixes() {
            let extra = depth.saturating_sub(p.len()) as u32;
            count = count.saturating_add(active.saturating_pow(extra));
        }
        if count > MAX_TABLE_CELLS {
            return Err(Error::Resource {
                what: format!("depth {depth} needs {count} grid cells"),
                limit: MAX_TABLE_CELLS,
                hint: "lower the maximum depth or restrict the region".into(),
            });
        }
        let k = vm.k();
        let mut ln_mu = Vec::with_capacity(count as usize * k);
        let mut ln_ref = Vec::with_capacity(count as usize);
        vm.visit_cells(region, depth, |_, _, len, mu, nu| {
            ln_mu.extend_from_slice(mu);
            ln_ref.push(match reference {
                Reference::Measure => nu,
                Reference::Diameter => len.ln(),
            });
        })?;
        Ok(CellTable {
            k,
            depth,
            ln_mu,
            ln_ref,
        })
    }

    pub fn len(&self) -> usize {
        self.ln_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_ref.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Fixes `q`, leaving a table that sums over `t` cheaply.
    pub fn with_q(&self, q: &[f64]) -> Result<QTable<'_>> {
        if q.len() != self.k {
            return Err(Error::Contract(format!(
                "{} exponents for {} components",
                q.len(),
                self.k
            )));
        }
        let k = self.k;
        let a = self
            .ln_mu
            .chunks(k)
            .map(|row| row.iter().zip(q).map(|(l, qi)| qi * l).sum())
            .collect();
        Ok(QTable { a, table: self })
    }

    pub fn ln_sum(&self, params: &KernelParams) -> Result<f64> {
        Ok(self.with_q(&params.q)?.ln_sum(params.t))
    }
}

/// A [`CellTable`] with `Σ q_j ln μ_j(C)` precomputed.
#[derive(Debug, Clone)]
pub struct QTable<'a> {
    a: Vec<f64>,
    table: &'a CellTable,
}

impl QTable<'_> {
    pub fn ln_sum(&self, t: f64) -> f64 {
        let b = &self.table.ln_ref;
        log_sum_exp(self.a.len(), |i| self.a[i] + t * b[i])
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.table.depth
    }
}

/// Grid partition sum over the whole support with the `ν` kernel.
///
/// Grid cells at one depth are disjoint and cover the attractor, so the
/// covering and packing sums are the same number; `kind` only labels it.
pub fn partition_sum(
    vm: &VectorMeasure,
    params: &KernelParams,
    depth: usize,
    kind: SumKind,
) -> Result<PartitionSum> {
    partition_sum_in(
        vm,
        params,
        &Region::Support,
        depth,
        kind,
        Reference::Measure,
    )
}

pub fn partition_sum_in(
    vm: &VectorMeasure,
    params: &KernelParams,
    region: &Region,
    depth: usize,
    kind: SumKind,
    reference: Reference,
) -> Result<PartitionSum> {
    params.validate()?;
    let table = CellTable::build(vm, region, depth, reference)?;
    Ok(PartitionSum {
        ln_value: table.ln_sum(params)?,
        depth,
        kind,
        cell_count: table.len(),
    })
}
