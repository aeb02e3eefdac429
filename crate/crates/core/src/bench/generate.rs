use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    min_rate, se_from_sinr, sinr_unchecked, ChannelGains, Instance, Matrix, NoisePower, PowerBudget, RateVector, Split,
};
use crate::solvers::{proportional_split, solve_fast, SolverConfig};

/// Bumped whenever the generator's output for a given spec changes.
pub const GENERATOR_VERSION: &str = "viso-gen/1";

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20240601;

/// Minimum AP-UE distance in metres.
const MIN_DISTANCE_M: f64 = 10.0;

/// How an instance's target common rate is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaPolicy {
    /// `gamma = u * anchor`, `u ~ U[lo, hi]`, where the anchor is a cheap
    /// achievability estimate of the instance's common rate.
    AnchorFraction { anchor: Anchor, lo: f64, hi: f64 },
    /// Same target for every instance.
    Fixed { gamma: f64 },
}

/// Cheap common-rate estimates used to scale targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Every AP splits its budget evenly over the users.
    EqualSplit,
    /// The channel-proportional distributed split.
    Distributed,
    /// The fast solver with default settings.
    Fast,
}

impl Anchor {
    fn estimate(self, inst: &Instance) -> f64 {
        let eta = match self {
            Anchor::EqualSplit => proportional_split(inst, |_| 1.0),
            Anchor::Distributed => proportional_split(inst, |g| g),
            Anchor::Fast => solve_fast(inst, &SolverConfig::default()).candidate.eta,
        };
        min_rate(&RateVector(se_from_sinr(&sinr_unchecked(inst, &eta)))).unwrap_or(0.0)
    }
}

/// Hidden change to the channel that leaves every user's total gain (and
/// hence the imbalance descriptor) untouched.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftTransform {
    /// Target growth of the chosen user's interference coupling `sum_l g[l][k]^2`.
    pub coupling_factor: f64,
}

impl Default for ShiftTransform {
    fn default() -> Self {
        ShiftTransform { coupling_factor: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    /// Inclusive AP-count range.
    pub l_range: (usize, usize),
    /// Inclusive UE-count range.
    pub k_range: (usize, usize),
    pub area_m: f64,
    pub pl_exp: f64,
    pub shadow_db: f64,
    /// Path-loss intercept at 1 m, dB.
    pub c0_db: f64,
    pub p_max_w: f64,
    pub sigma2_w: f64,
    pub gamma_policy: GammaPolicy,
    #[serde(default)]
    pub shift_transform: Option<ShiftTransform>,
}

impl GenParams {
    fn base(l_range: (usize, usize), k_range: (usize, usize), lo: f64, hi: f64) -> Self {
        GenParams {
            l_range,
            k_range,
            area_m: 1000.0,
            pl_exp: 3.5,
            shadow_db: 8.0,
            c0_db: -30.0,
            p_max_w: 0.2,
            sigma2_w: 1e-13,
            gamma_policy: GammaPolicy::AnchorFraction { anchor: Anchor::Fast, lo, hi },
            shift_transform: None,
        }
    }

    pub fn default_for(split: Split) -> Self {
        match split {
            Split::Train | Split::Test => GenParams::base((8, 16), (3, 6), 0.6, 1.1),
            Split::Stress => GenParams::base((6, 10), (6, 10), 1.0, 1.4),
            Split::Shifted => GenParams {
                shift_transform: Some(ShiftTransform::default()),
                ..GenParams::base((8, 16), (3, 6), 0.6, 1.1)
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (l0, l1) = self.l_range;
        let (k0, k1) = self.k_range;
        if l0 == 0 || k0 == 0 || l0 > l1 || k0 > k1 {
            return Err(Error::usage("AP/UE ranges must be non-empty and start at 1 or more"));
        }
        if !(self.pl_exp > 2.0) {
            return Err(Error::usage("path-loss exponent must exceed 2"));
        }
        let positive = [self.area_m, self.p_max_w, self.sigma2_w];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::usage("area, budget and noise must be positive"));
        }
        if !(self.shadow_db >= 0.0 && self.shadow_db.is_finite() && self.c0_db.is_finite()) {
            return Err(Error::usage("shadowing std and path-loss intercept must be finite"));
        }
        match self.gamma_policy {
            GammaPolicy::AnchorFraction { lo, hi, .. } if !(lo >= 0.0 && lo <= hi && hi.is_finite()) => {
                return Err(Error::usage("gamma fraction range must satisfy 0 <= lo <= hi"));
            }
            GammaPolicy::Fixed { gamma } if !(gamma >= 0.0 && gamma.is_finite()) => {
                return Err(Error::usage("fixed gamma must be nonnegative"));
            }
            _ => {}
        }
        if let Some(t) = self.shift_transform {
            if !(t.coupling_factor >= 1.0 && t.coupling_factor.is_finite()) {
                return Err(Error::usage("shift coupling factor must be >= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    pub stress: usize,
    pub shifted: usize,
    pub train_params: GenParams,
    pub test_params: GenParams,
    pub stress_params: GenParams,
    pub shifted_params: GenParams,
}

impl BenchmarkSpec {
    pub fn new(seed: u64) -> Self {
        BenchmarkSpec {
            seed,
            train: 6,
            test: 8,
            stress: 6,
            shifted: 6,
            train_params: GenParams::default_for(Split::Train),
            test_params: GenParams::default_for(Split::Test),
            stress_params: GenParams::default_for(Split::Stress),
            shifted_params: GenParams::default_for(Split::Shifted),
        }
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Test => self.test,
            Split::Stress => self.stress,
            Split::Shifted => self.shifted,
        }
    }

    pub fn params(&self, split: Split) -> &GenParams {
        match split {
            Split::Train => &self.train_params,
            Split::Test => &self.test_params,
            Split::Stress => &self.stress_params,
            Split::Shifted => &self.shifted_params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for split in Split::ALL {
            if self.count(split) == 0 {
                return Err(Error::usage(format!("{split} split needs at least one instance")));
            }
            self.params(split).validate()?;
        }
        Ok(())
    }
}

/// Written next to a benchmark file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub generator_version: String,
    pub seed: u64,
    pub counts: [(Split, usize); 4],
    pub spec: BenchmarkSpec,
}

impl BenchmarkManifest {
    pub fn for_spec(spec: &BenchmarkSpec) -> Self {
        BenchmarkManifest {
            generator_version: GENERATOR_VERSION.to_string(),
            seed: spec.seed,
            counts: Split::ALL.map(|s| (s, spec.count(s))),
            spec: spec.clone(),
        }
    }
}

/// Independent ChaCha8 stream per split: same seed, stream id = split index + 1.
pub fn split_rng(seed: u64, split: Split) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = Split::ALL.iter().position(|s| *s == split).unwrap_or(0) as u64 + 1;
    rng.set_stream(stream);
    rng
}

/// Build the full benchmark: splits in train, test, stress, shifted order.
pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<Vec<Instance>> {
    spec.validate()?;
    let mut out = Vec::new();
    for split in Split::ALL {
        let mut rng = split_rng(spec.seed, split);
        for i in 0..spec.count(split) {
            out.push(generate_instance(&mut rng, split, i, spec.params(split))?);
        }
    }
    Ok(out)
}

fn generate_instance(rng: &mut ChaCha8Rng, split: Split, index: usize, p: &GenParams) -> Result<Instance> {
    let n_aps = rng.random_range(p.l_range.0..=p.l_range.1);
    let n_users = rng.random_range(p.k_range.0..=p.k_range.1);
    let mut place = |n: usize| -> Vec<(f64, f64)> {
        (0..n).map(|_| (rng.random::<f64>() * p.area_m, rng.random::<f64>() * p.area_m)).collect()
    };
    let aps = place(n_aps);
    let ues = place(n_users);

    let shadow = Normal::new(0.0, p.shadow_db).map_err(|e| Error::usage(e.to_string()))?;
    let c0 = 10f64.powf(p.c0_db / 10.0);
    let mut gains = Matrix::zeros(n_aps, n_users);
    for (l, a) in aps.iter().enumerate() {
        for (k, u) in ues.iter().enumerate() {
            let d = ((a.0 - u.0).powi(2) + (a.1 - u.1).powi(2)).sqrt().max(MIN_DISTANCE_M);
            let s_db = shadow.sample(rng);
            gains.set(l, k, (c0 * d.powf(-p.pl_exp) * 10f64.powf(s_db / 10.0)).sqrt());
        }
    }

    let id = format!("{}-{:03}", split.name(), index);
    let inst = Instance::new(
        id,
        split,
        ChannelGains::new(gains)?,
        PowerBudget::new(vec![p.p_max_w; n_aps])?,
        NoisePower::new(p.sigma2_w)?,
        0.0,
    )?;

    // targets are set on the untransformed channel
    let gamma = match p.gamma_policy {
        GammaPolicy::AnchorFraction { anchor, lo, hi } => {
            let u = if hi > lo { rng.random_range(lo..hi) } else { lo };
            u * anchor.estimate(&inst)
        }
        GammaPolicy::Fixed { gamma } => gamma,
    };
    let mut inst = inst.with_gamma_target(gamma)?;

    // drawn for every split so the stream layout does not depend on the transform
    let user = rng.random_range(0..n_users);
    if let Some(t) = p.shift_transform {
        let mut g = inst.gains().matrix().clone();
        let col: Vec<f64> = (0..n_aps).map(|l| g.get(l, user)).collect();
        for (l, v) in concentrate(&col, t.coupling_factor).into_iter().enumerate() {
            g.set(l, user, v);
        }
        inst = inst.with_gains(ChannelGains::new(g)?)?;
    }
    Ok(inst)
}

/// Reshape `g` into `T * g^p / sum g^p` (same total `T`) with the exponent
/// chosen so that `sum g^2` grows by `factor`, or as close as a single
/// dominant AP allows.
pub(crate) fn concentrate(g: &[f64], factor: f64) -> Vec<f64> {
    let total: f64 = g.iter().sum();
    let peak = g.iter().copied().fold(0.0, f64::max);
    if total <= 0.0 || g.len() < 2 {
        return g.to_vec();
    }
    let reshape = |p: f64| -> Vec<f64> {
        let w: Vec<f64> = g.iter().map(|v| (v / peak).powf(p)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| total * x / s).collect()
    };
    let energy = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let target = factor * energy(g);

    let (mut lo, mut hi) = (1.0, 2.0);
    while energy(&reshape(hi)) < target && hi < 256.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if energy(&reshape(mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    reshape(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn split_streams_are_distinct_and_repeatable() {
        let a: Vec<u64> = (0..4).map(|_| split_rng(7, Split::Train).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(split_rng(7, Split::Train).next_u64(), split_rng(7, Split::Test).next_u64());
        assert_ne!(split_rng(7, Split::Train).next_u64(), split_rng(8, Split::Train).next_u64());
    }

    #[test]
    fn default_counts() {
        let insts = generate_benchmark(&BenchmarkSpec::new(1)).unwrap();
        assert_eq!(insts.len(), 26);
        for (split, n) in [(Split::Train, 6), (Split::Test, 8), (Split::Stress, 6), (Split::Shifted, 6)] {
            assert_eq!(insts.iter().filter(|i| i.split == split).count(), n);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = serde_json::to_string(&generate_benchmark(&BenchmarkSpec::new(42)).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_benchmark(&BenchmarkSpec::new(42)).unwrap()).unwrap();
        let c = serde_json::to_string(&generate_benchmark(&BenchmarkSpec::new(43)).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = BenchmarkSpec::new(0);
        spec.train = 0;
        assert!(matches!(generate_benchmark(&spec), Err(Error::Usage(_))));
        let mut spec = BenchmarkSpec::new(0);
        spec.test_params.l_range = (5, 4);
        assert!(generate_benchmark(&spec).is_err());
        let mut spec = BenchmarkSpec::new(0);
        spec.stress_params.pl_exp = 2.0;
        assert!(generate_benchmark(&spec).is_err());
    }

    #[test]
    fn concentrate_keeps_total_and_raises_energy() {
        let g = [1.0, 0.8, 0.5, 0.2, 0.1];
        let out = concentrate(&g, 2.0);
        let total: f64 = g.iter().sum();
        assert!((out.iter().sum::<f64>() - total).abs() < 1e-12);
        let e0: f64 = g.iter().map(|x| x * x).sum();
        let e1: f64 = out.iter().map(|x| x * x).sum();
        assert!((e1 / e0 - 2.0).abs() < 1e-6, "{}", e1 / e0);
        // cannot exceed total^2: saturates near a single dominant AP
        let capped = concentrate(&g, 100.0);
        let e2: f64 = capped.iter().map(|x| x * x).sum();
        assert!(e2 <= total * total * (1.0 + 1e-12));
        assert!(e2 > 0.9 * total * total);
    }

    #[test]
    fn shifted_split_keeps_user_totals() {
        let spec = BenchmarkSpec::new(5);
        let mut plain = spec.clone();
        plain.shifted_params.shift_transform = None;
        let a = generate_benchmark(&spec).unwrap();
        let b = generate_benchmark(&plain).unwrap();
        for (x, y) in a.iter().zip(&b).filter(|(x, _)| x.split == Split::Shifted) {
            assert_eq!(x.gamma_target(), y.gamma_target());
            for k in 0..x.n_users() {
                let tx: f64 = (0..x.n_aps()).map(|l| x.gains().get(l, k)).sum();
                let ty: f64 = (0..y.n_aps()).map(|l| y.gains().get(l, k)).sum();
                assert!((tx - ty).abs() <= 1e-12 * ty);
            }
            assert_ne!(x.gains(), y.gains());
        }
    }
}
