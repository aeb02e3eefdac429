//! Power-control instances and the SINR / spectral-efficiency evaluation shared
//! by every solver and by the verifier.
//!
//! The downlink model is single-antenna APs and UEs with fixed maximum-ratio
//! transmission. For an allocation `eta` (L x K, linear watts) the SINR of user
//! `k` is
//!
//! ```text
//!            ( sum_l sqrt(eta[l][k]) * g[l][k] )^2
//! SINR_k = ------------------------------------------------
//!           sigma2 + sum_{k' != k} sum_l eta[l][k'] * g[l][k]^2
//! ```
//!
//! and `SE_k = log2(1 + SINR_k)` in bit/s/Hz.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense row-major matrix of reals. Serialized as an array of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::usage("ragged matrix rows"));
        }
        let data = rows.into_iter().flatten().collect();
        Ok(Matrix { rows: n_rows, cols: n_cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.rows))?;
        for r in 0..self.rows {
            seq.serialize_element(self.row(r))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Effective channel magnitudes `g[l][k]` from AP `l` to UE `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelGains(Matrix);

impl ChannelGains {
    pub fn new(g: Matrix) -> Result<Self> {
        if g.rows() == 0 || g.cols() == 0 {
            return Err(Error::usage("channel gains need L >= 1 and K >= 1"));
        }
        if g.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::usage("channel gains must be finite and nonnegative"));
        }
        Ok(ChannelGains(g))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    #[inline]
    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.0.get(l, k)
    }

    pub fn n_aps(&self) -> usize {
        self.0.rows()
    }

    pub fn n_users(&self) -> usize {
        self.0.cols()
    }
}

/// Per-AP transmit budgets `P_l^max` in watts.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerBudget(Vec<f64>);

impl PowerBudget {
    pub fn new(p_max: Vec<f64>) -> Result<Self> {
        if p_max.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::usage("per-AP budgets must be finite and positive"));
        }
        Ok(PowerBudget(p_max))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Receiver noise power in watts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisePower(f64);

impl NoisePower {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::usage("noise power must be finite and positive"));
        }
        Ok(NoisePower(sigma2))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Benchmark regime an instance belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Stress,
    Shifted,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Test, Split::Stress, Split::Shifted];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Stress => "stress",
            Split::Shifted => "shifted",
        }
    }

    /// Train and test are in-distribution; stress and shifted are not.
    pub fn is_in_distribution(self) -> bool {
        matches!(self, Split::Train | Split::Test)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One max-min power-control problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: String,
    pub split: Split,
    gains: ChannelGains,
    budget: PowerBudget,
    noise: NoisePower,
    gamma_target: f64,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        split: Split,
        gains: ChannelGains,
        budget: PowerBudget,
        noise: NoisePower,
        gamma_target: f64,
    ) -> Result<Self> {
        if budget.as_slice().len() != gains.n_aps() {
            return Err(Error::usage(format!(
                "budget length {} does not match L = {}",
                budget.as_slice().len(),
                gains.n_aps()
            )));
        }
        if !(gamma_target.is_finite() && gamma_target >= 0.0) {
            return Err(Error::usage("gamma_target must be finite and nonnegative"));
        }
        Ok(Instance { id: id.into(), split, gains, budget, noise, gamma_target })
    }

    /// Convenience constructor from raw parts.
    pub fn from_parts(
        id: impl Into<String>,
        split: Split,
        gains: Vec<Vec<f64>>,
        p_max: Vec<f64>,
        sigma2: f64,
        gamma_target: f64,
    ) -> Result<Self> {
        Instance::new(
            id,
            split,
            ChannelGains::new(Matrix::from_rows(gains)?)?,
            PowerBudget::new(p_max)?,
            NoisePower::new(sigma2)?,
            gamma_target,
        )
    }

    pub fn n_aps(&self) -> usize {
        self.gains.n_aps()
    }

    pub fn n_users(&self) -> usize {
        self.gains.n_users()
    }

    pub fn gains(&self) -> &ChannelGains {
        &self.gains
    }

    pub fn p_max(&self) -> &[f64] {
        self.budget.as_slice()
    }

    pub fn sigma2(&self) -> f64 {
        self.noise.value()
    }

    pub fn gamma_target(&self) -> f64 {
        self.gamma_target
    }

    pub fn with_gamma_target(mut self, gamma_target: f64) -> Result<Self> {
        if !(gamma_target.is_finite() && gamma_target >= 0.0) {
            return Err(Error::usage("gamma_target must be finite and nonnegative"));
        }
        self.gamma_target = gamma_target;
        Ok(self)
    }

    pub(crate) fn with_gains(mut self, gains: ChannelGains) -> Result<Self> {
        if gains.n_aps() != self.n_aps() || gains.n_users() != self.n_users() {
            return Err(Error::usage("replacement gains change the instance shape"));
        }
        self.gains = gains;
        Ok(self)
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct InstanceWire {
    id: String,
    split: Split,
    L: usize,
    K: usize,
    gains: Matrix,
    p_max: Vec<f64>,
    sigma2: f64,
    gamma_target: f64,
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InstanceWire {
            id: self.id.clone(),
            split: self.split,
            L: self.n_aps(),
            K: self.n_users(),
            gains: self.gains.matrix().clone(),
            p_max: self.p_max().to_vec(),
            sigma2: self.sigma2(),
            gamma_target: self.gamma_target,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = InstanceWire::deserialize(d)?;
        if w.gains.rows() != w.L || w.gains.cols() != w.K {
            return Err(D::Error::custom(format!(
                "gains are {}x{} but L={}, K={}",
                w.gains.rows(),
                w.gains.cols(),
                w.L,
                w.K
            )));
        }
        let build = || -> Result<Instance> {
            Instance::new(
                w.id,
                w.split,
                ChannelGains::new(w.gains)?,
                PowerBudget::new(w.p_max)?,
                NoisePower::new(w.sigma2)?,
                w.gamma_target,
            )
        };
        build().map_err(D::Error::custom)
    }
}

/// Power coefficients `eta[l][k]` in watts, as returned by a solver.
///
/// Entries are not validated on construction: candidates come from solvers
/// that may misbehave, and the verifier is what decides whether they are usable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerAllocation {
    pub eta: Matrix,
}

impl PowerAllocation {
    pub fn new(eta: Matrix) -> Self {
        PowerAllocation { eta }
    }

    pub fn zeros(n_aps: usize, n_users: usize) -> Self {
        PowerAllocation { eta: Matrix::zeros(n_aps, n_users) }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Ok(PowerAllocation { eta: Matrix::from_rows(rows)? })
    }

    pub fn is_finite_nonneg(&self) -> bool {
        self.eta.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Per-user spectral efficiency in bit/s/Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_shape(inst: &Instance, alloc: &PowerAllocation) -> Result<()> {
    if alloc.eta.rows() != inst.n_aps() || alloc.eta.cols() != inst.n_users() {
        return Err(Error::usage(format!(
            "allocation is {}x{} but instance is {}x{}",
            alloc.eta.rows(),
            alloc.eta.cols(),
            inst.n_aps(),
            inst.n_users()
        )));
    }
    Ok(())
}

/// SINR of every user under `alloc`.
pub fn compute_sinr(inst: &Instance, alloc: &PowerAllocation) -> Result<Vec<f64>> {
    check_shape(inst, alloc)?;
    if alloc.eta.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::usage("power coefficients must be finite and nonnegative"));
    }
    Ok(sinr_unchecked(inst, &alloc.eta))
}

/// SINR evaluation without shape or sign checks. Solvers call this in their
/// inner loops on allocations they constructed themselves.
pub(crate) fn sinr_unchecked(inst: &Instance, eta: &Matrix) -> Vec<f64> {
    let g = inst.gains();
    let (n_aps, n_users) = (inst.n_aps(), inst.n_users());
    let sigma2 = inst.sigma2();
    (0..n_users)
        .map(|k| {
            let mut coherent = 0.0;
            let mut interference = 0.0;
            for l in 0..n_aps {
                let glk = g.get(l, k);
                if glk == 0.0 {
                    continue;
                }
                coherent += eta.get(l, k).sqrt() * glk;
                let g2 = glk * glk;
                let others: f64 = eta.row(l).iter().enumerate().filter(|&(kk, _)| kk != k).map(|(_, e)| e).sum();
                interference += others * g2;
            }
            coherent * coherent / (sigma2 + interference)
        })
        .collect()
}

pub(crate) fn se_from_sinr(sinr: &[f64]) -> Vec<f64> {
    sinr.iter().map(|s| (1.0 + s).log2()).collect()
}

/// Spectral efficiency `log2(1 + SINR_k)` of every user.
pub fn compute_se(inst: &Instance, alloc: &PowerAllocation) -> Result<RateVector> {
    Ok(RateVector(se_from_sinr(&compute_sinr(inst, alloc)?)))
}

/// Common (worst-user) rate of a rate vector.
pub fn min_rate(rates: &RateVector) -> Result<f64> {
    rates.0.iter().copied().reduce(f64::min).ok_or_else(|| Error::usage("min_rate of an empty rate vector"))
}

/// Row sums of `eta`: the power each AP spends.
pub fn per_ap_load(alloc: &PowerAllocation) -> Vec<f64> {
    (0..alloc.eta.rows()).map(|l| alloc.eta.row(l).iter().sum()).collect()
}
