//! Diagonalization: which points a permutation moves inside a set, the
//! grid function read off a permutation through the codec, and the
//! per-pair catch argument that turns a permutation moving points within
//! every `A_α` into a function agreeing with every `η_α`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, Layer, Point, RhoIndex};
use crate::extender::Permutation;
use crate::finset::{self, CombinationSpec, Family, FinSet, FinsetError, IndependenceReport, Universe};
use crate::generic::{self, ConditionReport, Eta, GenericError, StarReport};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiagError {
    #[error(transparent)]
    Finset(#[from] FinsetError),
    #[error(transparent)]
    Generic(#[from] GenericError),
    #[error("permutation has {perm} points but the set lives in [0,{universe})")]
    UniverseMismatch { perm: usize, universe: usize },
    #[error("grid {ma}x{mk} does not fit a permutation of {perm} points")]
    GridTooLarge { ma: usize, mk: usize, perm: usize },
    #[error("grids differ: {0:?} vs {1:?}")]
    GridMismatch((usize, usize), (usize, usize)),
    #[error("set is not a (**) set for this eta: pair ({m},{n}) layer {i} has no match")]
    PreconditionUnmet { m: usize, n: usize, i: u8 },
    #[error("config: {0}")]
    Config(String),
}

/// Partial function on `{0..Ma-1} × {0..Mk-1} × {0,1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridFn {
    ma: usize,
    mk: usize,
    values: Vec<Option<u64>>,
}

impl GridFn {
    pub fn absent(ma: usize, mk: usize) -> Self {
        GridFn {
            ma,
            mk,
            values: vec![None; ma * mk * 2],
        }
    }

    pub fn from_eta(eta: &Eta) -> Self {
        let mut f = GridFn::absent(eta.rows(), eta.cols());
        for m in 0..eta.rows() {
            for k in 0..eta.cols() {
                for i in Layer::BOTH {
                    f.set(m, k, i, eta.get(m, k, i));
                }
            }
        }
        f
    }

    pub fn rows(&self) -> usize {
        self.ma
    }

    pub fn cols(&self) -> usize {
        self.mk
    }

    pub fn get(&self, m: usize, k: usize, i: Layer) -> Option<u64> {
        if m < self.ma && k < self.mk {
            self.values[self.slot(m, k, i)]
        } else {
            None
        }
    }

    /// Panics off the grid.
    pub fn set(&mut self, m: usize, k: usize, i: Layer, v: Option<u64>) {
        assert!(m < self.ma && k < self.mk, "({m},{k}) off the grid");
        let s = self.slot(m, k, i);
        self.values[s] = v;
    }

    pub fn present(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    fn slot(&self, m: usize, k: usize, i: Layer) -> usize {
        (m * self.mk + k) * 2 + i.index()
    }
}

fn check_universe(a: &FinSet, pi: &Permutation) -> Result<(), DiagError> {
    let universe = a.universe().size();
    if pi.len() != universe {
        return Err(DiagError::UniverseMismatch {
            perm: pi.len(),
            universe,
        });
    }
    Ok(())
}

/// `{n ∈ A : π(n) ∈ A ∖ {n}}`.
pub fn moved_within(a: &FinSet, pi: &Permutation) -> Result<FinSet, DiagError> {
    check_universe(a, pi)?;
    Ok(FinSet::from_elements(
        a.universe(),
        a.iter().filter(|&n| {
            let p = pi.apply(n);
            p != n && a.contains(p)
        }),
    )?)
}

/// `({m ∈ A : m < π(m) ∈ A}, {n ∈ A : n > π(n) ∈ A})`.
pub fn case_split(a: &FinSet, pi: &Permutation) -> Result<(FinSet, FinSet), DiagError> {
    check_universe(a, pi)?;
    let mut up = FinSet::empty(a.universe());
    let mut down = FinSet::empty(a.universe());
    for n in a.iter() {
        let p = pi.apply(n);
        if a.contains(p) {
            if n < p {
                up.insert(n)?;
            } else if n > p {
                down.insert(n)?;
            }
        }
    }
    Ok((up, down))
}

/// `f(m,k,0) = ρ_{π(m)}(m,k,0)` and `f(m,k,1) = ρ_{π⁻¹(m)}(m,k,1)`, absent
/// where the right-hand side is undefined.
pub fn f_from_pi(pi: &Permutation, ma: usize, mk: usize) -> Result<GridFn, DiagError> {
    if ma > pi.len() {
        return Err(DiagError::GridTooLarge {
            ma,
            mk,
            perm: pi.len(),
        });
    }
    let mut f = GridFn::absent(ma, mk);
    for m in 0..ma {
        for i in Layer::BOTH {
            let row = f_row(pi, m, i, mk);
            for (k, v) in row.into_iter().enumerate() {
                f.set(m, k, i, v);
            }
        }
    }
    Ok(f)
}

fn f_row(pi: &Permutation, m: usize, i: Layer, mk: usize) -> Vec<Option<u64>> {
    let source = match i {
        Layer::Zero => pi.apply(m),
        Layer::One => pi.apply_inverse(m),
    };
    let rho = codec::rho(RhoIndex(source as u64));
    (0..mk)
        .map(|k| rho.get(Point::new(m as u64, k as u64, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub counts: Vec<usize>,
    pub threshold: usize,
    pub verdict: bool,
}

/// Number of grid points where `f` is present and equal to `η`.
pub fn match_count(f: &GridFn, eta: &Eta) -> Result<usize, DiagError> {
    if (f.rows(), f.cols()) != (eta.rows(), eta.cols()) {
        return Err(DiagError::GridMismatch(
            (f.rows(), f.cols()),
            (eta.rows(), eta.cols()),
        ));
    }
    let mut count = 0;
    for m in 0..f.rows() {
        for k in 0..f.cols() {
            for i in Layer::BOTH {
                if f.get(m, k, i).is_some() && f.get(m, k, i) == eta.get(m, k, i) {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

pub fn matches(f: &GridFn, eta: &Eta, threshold: usize) -> Result<MatchReport, DiagError> {
    matches_all(f, std::slice::from_ref(eta), threshold)
}

/// One count per target; the verdict needs every count to reach `threshold`.
pub fn matches_all(f: &GridFn, etas: &[Eta], threshold: usize) -> Result<MatchReport, DiagError> {
    let counts = etas
        .iter()
        .map(|eta| match_count(f, eta))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MatchReport {
        verdict: counts.iter().all(|&c| c >= threshold),
        counts,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLog {
    pub m: usize,
    pub n: usize,
    pub layer: u8,
    /// Least `k` where `f` agrees with `η` at `(m,k,layer)`.
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatchReport {
    pub ok: bool,
    pub pairs: Vec<PairLog>,
    pub violations: usize,
}

/// For each `m` in the first case (`n = π(m)`) looks for `k` with
/// `f(m,k,0) = η(m,k,0)`; for each `n` in the second case (`m = π(n)`) for
/// `k` with `f(m,k,1) = η(m,k,1)`.
pub fn verify_catch(a: &FinSet, eta: &Eta, pi: &Permutation) -> Result<CatchReport, DiagError> {
    let ConditionReport { witness, .. } = generic::check_star_star(a, eta)?;
    if let Some((m, n, i)) = witness {
        return Err(DiagError::PreconditionUnmet { m, n, i });
    }
    let (up, down) = case_split(a, pi)?;
    let mut pairs = Vec::with_capacity(up.len() + down.len());
    for m in up.iter() {
        pairs.push(catch_pair(pi, eta, m, pi.apply(m), Layer::Zero));
    }
    for n in down.iter() {
        pairs.push(catch_pair(pi, eta, pi.apply(n), n, Layer::One));
    }
    let violations = pairs.iter().filter(|p| p.k.is_none()).count();
    Ok(CatchReport {
        ok: violations == 0,
        pairs,
        violations,
    })
}

fn catch_pair(pi: &Permutation, eta: &Eta, m: usize, n: usize, i: Layer) -> PairLog {
    // m is below another member of a (**) set, so it is on the grid
    let row = f_row(pi, m, i, eta.cols());
    let k = row
        .iter()
        .enumerate()
        .position(|(k, &v)| v.is_some() && v == eta.get(m, k, i));
    PairLog {
        m,
        n,
        layer: i as u8,
        k,
    }
}

/// A permutation that shuffles `support` uniformly and fixes every other
/// point.
pub fn random_on_support<R: rand::Rng + ?Sized>(
    universe: usize,
    support: &FinSet,
    rng: &mut R,
) -> Permutation {
    let points = support.to_vec();
    let mut shuffled = points.clone();
    shuffled.shuffle(rng);
    let mut map: Vec<usize> = (0..universe).collect();
    for (&from, &to) in points.iter().zip(&shuffled) {
        map[from] = to;
    }
    Permutation::from_map(map).expect("shuffle of a subset is a bijection")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(rename = "K")]
    pub k: usize,
    /// Universe size; also the default search bound.
    #[serde(rename = "N")]
    pub n: usize,
    pub t: usize,
    pub d: usize,
    #[serde(rename = "Ma")]
    pub ma: usize,
    #[serde(rename = "Mk")]
    pub mk: usize,
    #[serde(rename = "V")]
    pub v: u64,
    /// Probes per combination in the auto schedule.
    pub q: u64,
    #[serde(default)]
    pub search_bound: Option<u64>,
    /// Probe bound for the density check; defaults to `q`.
    #[serde(default)]
    pub probe_bound: Option<u64>,
    /// Uniform permutations of the whole universe.
    pub samples: usize,
    /// Permutations that shuffle the union of the built sets only.
    #[serde(default)]
    pub targeted_samples: usize,
    #[serde(default)]
    pub match_threshold: usize,
    pub seed: u64,
    /// Use `η ≡ 0` instead of random values.
    #[serde(default)]
    pub zero_eta: bool,
}

impl PipelineConfig {
    pub fn search_bound(&self) -> u64 {
        self.search_bound.unwrap_or(self.n as u64)
    }

    pub fn probe_bound(&self) -> u64 {
        self.probe_bound.unwrap_or(self.q)
    }

    pub fn validate(&self) -> Result<(), DiagError> {
        let bad = |msg: &str| Err(DiagError::Config(msg.into()));
        if self.n == 0 {
            return bad("N must be positive");
        }
        if self.t == 0 {
            return bad("t must be positive");
        }
        if self.ma == 0 || self.mk == 0 || self.v == 0 {
            return bad("Ma, Mk and V must be positive");
        }
        if self.ma > self.n {
            return bad("Ma must not exceed N");
        }
        if self.search_bound() > self.n as u64 {
            return bad("search_bound must not exceed N");
        }
        if self.d >= 64 {
            return bad("d must be below 64");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphaSummary {
    pub index: usize,
    pub elements: Vec<usize>,
    pub schedule_len: usize,
    pub demands_met: usize,
    pub degraded: bool,
    pub error: Option<String>,
    pub decided_below: Option<usize>,
    pub star_star: ConditionReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphaSample {
    pub moved: usize,
    pub case1: usize,
    pub case2: usize,
    /// `None` when the set is not a (**) set for its eta.
    pub catch: Option<bool>,
    pub violations: usize,
    pub match_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Uniform,
    Targeted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleRecord {
    pub index: usize,
    pub mode: SampleMode,
    pub per_alpha: Vec<AlphaSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineSummary {
    pub samples: usize,
    pub pairs_checked: usize,
    pub violations: usize,
    pub precondition_unmet: usize,
    pub degraded: usize,
    pub star_star_ok: bool,
    pub independent: bool,
    pub star: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub seed: u64,
    pub etas: Vec<Eta>,
    pub alphas: Vec<AlphaSummary>,
    pub independence: Option<IndependenceReport>,
    pub star: Option<StarReport>,
    pub samples: Vec<SampleRecord>,
    pub summary: PipelineSummary,
}

/// Overall outcome, from most to least severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The catch implication or the (**) property failed.
    Violation,
    /// Some build stopped early.
    Degraded,
    /// Independence or density failed on complete builds.
    CheckFailed,
    Pass,
}

impl PipelineReport {
    pub fn verdict(&self) -> Verdict {
        let s = &self.summary;
        if s.violations > 0 || !s.star_star_ok {
            Verdict::Violation
        } else if s.degraded > 0 {
            Verdict::Degraded
        } else if !s.independent || !s.star {
            Verdict::CheckFailed
        } else {
            Verdict::Pass
        }
    }

    /// Canonical JSON: sorted keys, two-space indent.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report is plain data");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }
}

/// The built sets together with what is needed to re-run demands.
#[derive(Debug, Clone)]
pub struct BuiltFamily {
    pub etas: Vec<Eta>,
    pub family: Family,
    pub conditions: Vec<generic::Condition>,
    pub alphas: Vec<AlphaSummary>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const ETA_STREAM: u64 = 0;
const UNIFORM_STREAM: u64 = 1 << 32;
const TARGETED_STREAM: u64 = 2 << 32;

/// Builds `A_0..A_{K-1}` in turn, each against its own eta with the earlier
/// sets feeding the demand combinations. A build that stops early keeps its
/// partial set.
pub fn build_family(config: &PipelineConfig) -> Result<BuiltFamily, DiagError> {
    config.validate()?;
    let universe = Universe::new(config.n)?;
    let mut rng = rng_for(config.seed, ETA_STREAM);
    let etas = (0..config.k)
        .map(|_| {
            if config.zero_eta {
                Eta::constant(config.ma, config.mk, config.v, 0)
            } else {
                Eta::random(config.ma, config.mk, config.v, &mut rng)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut family = Family::empty(universe);
    let mut conditions = Vec::with_capacity(config.k);
    let mut alphas = Vec::with_capacity(config.k);
    for (index, eta) in etas.iter().enumerate() {
        let schedule = generic::auto_schedule(family.len(), config.d, config.q);
        let (run, error) = match generic::build_generic(&family, eta, &schedule, config.search_bound()) {
            Ok(run) => (run, None),
            Err(failure) => (failure.partial, Some(failure.error.to_string())),
        };
        alphas.push(AlphaSummary {
            index,
            elements: run.set.to_vec(),
            schedule_len: schedule.len(),
            demands_met: run.steps.len(),
            degraded: error.is_some(),
            error,
            decided_below: run.decided_below,
            star_star: generic::check_star_star(&run.set, eta)?,
        });
        conditions.push(run.condition);
        family.push(run.set, Some(format!("A{index}")))?;
    }
    Ok(BuiltFamily {
        etas,
        family,
        conditions,
        alphas,
    })
}

/// Full experiment: build, check, then sample permutations.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport, DiagError> {
    let built = build_family(config)?;
    let family = &built.family;
    let (independence, star) = if family.is_empty() {
        (None, None)
    } else {
        (
            Some(finset::is_independent(family, config.t, config.d)?),
            Some(generic::check_star(
                family,
                config.probe_bound(),
                config.search_bound(),
                config.d,
            )?),
        )
    };

    let mut union = FinSet::empty(family.universe());
    for a in family.sets() {
        union.union_with(a);
    }
    let jobs: Vec<(usize, SampleMode)> = (0..config.samples)
        .map(|s| (s, SampleMode::Uniform))
        .chain((0..config.targeted_samples).map(|s| (s, SampleMode::Targeted)))
        .collect();
    let samples = jobs
        .into_par_iter()
        .map(|(index, mode)| {
            let pi = match mode {
                SampleMode::Uniform => {
                    Permutation::random(config.n, &mut rng_for(config.seed, UNIFORM_STREAM + index as u64))
                }
                SampleMode::Targeted => random_on_support(
                    config.n,
                    &union,
                    &mut rng_for(config.seed, TARGETED_STREAM + index as u64),
                ),
            };
            sample(&built, &pi, index, mode)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let per_alpha = || samples.iter().flat_map(|s| &s.per_alpha);
    let summary = PipelineSummary {
        samples: samples.len(),
        pairs_checked: per_alpha().map(|a| a.case1 + a.case2).sum(),
        violations: per_alpha().map(|a| a.violations).sum(),
        precondition_unmet: per_alpha().filter(|a| a.catch.is_none()).count(),
        degraded: built.alphas.iter().filter(|a| a.degraded).count(),
        star_star_ok: built.alphas.iter().all(|a| a.star_star.ok),
        independent: independence.as_ref().is_none_or(|r| r.ok),
        star: star.as_ref().is_none_or(|r| r.ok),
    };
    Ok(PipelineReport {
        config: config.clone(),
        seed: config.seed,
        etas: built.etas,
        alphas: built.alphas,
        independence,
        star,
        samples,
        summary,
    })
}

fn sample(
    built: &BuiltFamily,
    pi: &Permutation,
    index: usize,
    mode: SampleMode,
) -> Result<SampleRecord, DiagError> {
    let mut per_alpha = Vec::with_capacity(built.etas.len());
    let mut f = None;
    for (a, eta) in built.family.sets().iter().zip(&built.etas) {
        let (up, down) = case_split(a, pi)?;
        let (catch, violations) = match verify_catch(a, eta, pi) {
            Ok(r) => (Some(r.ok), r.violations),
            Err(DiagError::PreconditionUnmet { .. }) => (None, 0),
            Err(e) => return Err(e),
        };
        let f = match &f {
            Some(f) => f,
            None => f.insert(f_from_pi(pi, eta.rows(), eta.cols())?),
        };
        per_alpha.push(AlphaSample {
            moved: moved_within(a, pi)?.len(),
            case1: up.len(),
            case2: down.len(),
            catch,
            violations,
            match_count: match_count(f, eta)?,
        });
    }
    Ok(SampleRecord {
        index,
        mode,
        per_alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DensityFailure {
    pub alpha: usize,
    pub combo: CombinationSpec,
    pub rho_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DensityClaimReport {
    pub attempted: usize,
    pub exhausted: usize,
    pub first_failures: Vec<DensityFailure>,
}

/// Runs every In-demand over the sets built before `A_α` (combinations up to
/// `depth`, probes below `probes`) from the final condition of `A_α`.
pub fn density_claim(
    built: &BuiltFamily,
    depth: usize,
    probes: u64,
    search_bound: u64,
) -> Result<DensityClaimReport, DiagError> {
    let mut jobs = Vec::new();
    for alpha in 0..built.etas.len() {
        for combo in finset::combinations(alpha, depth.min(alpha)) {
            for m in 0..probes {
                jobs.push((alpha, combo.clone(), m));
            }
        }
    }
    let universe = built.family.universe();
    let outcomes = jobs
        .par_iter()
        .map(|(alpha, combo, m)| {
            let prior = Family::new(universe, built.family.sets()[..*alpha].to_vec())?;
            let demand = generic::Demand {
                combo: combo.clone(),
                rho_index: RhoIndex(*m),
                polarity: generic::Polarity::In,
            };
            match generic::extend_to_meet(
                &built.conditions[*alpha],
                &demand,
                &built.etas[*alpha],
                &prior,
                search_bound,
            ) {
                Ok(_) => Ok(true),
                Err(GenericError::SearchExhausted { .. } | GenericError::GridOverflow { .. }) => Ok(false),
                Err(e) => Err(DiagError::from(e)),
            }
        })
        .collect::<Result<Vec<bool>, DiagError>>()?;
    let failures: Vec<DensityFailure> = jobs
        .iter()
        .zip(&outcomes)
        .filter(|(_, &ok)| !ok)
        .map(|((alpha, combo, m), _)| DensityFailure {
            alpha: *alpha,
            combo: combo.clone(),
            rho_index: *m,
        })
        .collect();
    Ok(DensityClaimReport {
        attempted: jobs.len(),
        exhausted: failures.len(),
        first_failures: failures.into_iter().take(8).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize, xs: &[usize]) -> FinSet {
        FinSet::from_elements(Universe::new(n).unwrap(), xs.iter().copied()).unwrap()
    }

    fn swap(n: usize, a: usize, b: usize) -> Permutation {
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(a, b);
        Permutation::from_map(map).unwrap()
    }

    fn zero_eta() -> Eta {
        Eta::constant(4, 4, 2, 0).unwrap()
    }

    #[test]
    fn moved_within_examples() {
        let id = Permutation::identity(8);
        assert!(moved_within(&set(8, &[0, 1, 5]), &id).unwrap().is_empty());
        assert_eq!(moved_within(&set(8, &[0, 1]), &swap(8, 0, 1)).unwrap().to_vec(), vec![0, 1]);
        assert!(moved_within(&set(8, &[0, 2]), &swap(8, 0, 1)).unwrap().is_empty());
        assert!(moved_within(&set(4, &[0]), &Permutation::identity(8)).is_err());
    }

    #[test]
    fn case_split_examples() {
        let (a, b) = case_split(&set(8, &[0, 1]), &Permutation::identity(8)).unwrap();
        assert!(a.is_empty() && b.is_empty());
        let (a, b) = case_split(&set(8, &[0, 1]), &swap(8, 0, 1)).unwrap();
        assert_eq!((a.to_vec(), b.to_vec()), (vec![0], vec![1]));
        let (a, b) = case_split(&set(8, &[0, 3]), &swap(8, 0, 3)).unwrap();
        assert_eq!((a.to_vec(), b.to_vec()), (vec![0], vec![3]));
    }

    #[test]
    fn f_from_pi_examples() {
        let f = f_from_pi(&Permutation::identity(8), 2, 4).unwrap();
        assert!((0..4).all(|k| f.get(0, k, Layer::Zero).is_none()));
        let pi = swap(8, 0, 3);
        let f = f_from_pi(&pi, 2, 4).unwrap();
        assert_eq!(f.get(0, 0, Layer::Zero), Some(0));
        assert_eq!(f.get(0, 0, Layer::One), Some(0));
        assert!(f_from_pi(&pi, 9, 1).is_err());
    }

    #[test]
    fn matches_examples() {
        let eta = Eta::random(3, 5, 4, &mut rng_for(7, 0)).unwrap();
        let same = GridFn::from_eta(&eta);
        assert_eq!(matches(&same, &eta, 30).unwrap().counts, vec![30]);
        let mut shifted = GridFn::absent(3, 5);
        for m in 0..3 {
            for k in 0..5 {
                for i in Layer::BOTH {
                    shifted.set(m, k, i, eta.get(m, k, i).map(|v| v + 1));
                }
            }
        }
        assert_eq!(match_count(&shifted, &eta).unwrap(), 0);
        let r = matches(&GridFn::absent(3, 5), &eta, 1).unwrap();
        assert_eq!((r.counts[0], r.verdict), (0, false));
        assert!(match_count(&GridFn::absent(2, 5), &eta).is_err());
    }

    #[test]
    fn verify_catch_examples() {
        let eta = zero_eta();
        let a = set(8, &[0, 3]);
        assert!(verify_catch(&a, &eta, &Permutation::identity(8)).unwrap().ok);
        let r = verify_catch(&a, &eta, &swap(8, 0, 3)).unwrap();
        assert!(r.ok);
        assert_eq!(
            r.pairs,
            vec![
                PairLog { m: 0, n: 3, layer: 0, k: Some(0) },
                PairLog { m: 0, n: 3, layer: 1, k: Some(0) },
            ]
        );
        assert_eq!(
            verify_catch(&set(8, &[0, 1]), &eta, &swap(8, 0, 1)),
            Err(DiagError::PreconditionUnmet { m: 0, n: 1, i: 1 })
        );
    }

    #[test]
    fn targeted_permutation_fixes_outside() {
        let support = set(16, &[2, 5, 9]);
        let pi = random_on_support(16, &support, &mut rng_for(3, 0));
        for n in 0..16 {
            assert_eq!(support.contains(n), support.contains(pi.apply(n)));
            if !support.contains(n) {
                assert_eq!(pi.apply(n), n);
            }
        }
    }

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            k: 1,
            n: 256,
            t: 1,
            d: 1,
            ma: 4,
            mk: 4,
            v: 2,
            q: 1,
            search_bound: None,
            probe_bound: None,
            samples: 8,
            targeted_samples: 8,
            match_threshold: 0,
            seed: 11,
            zero_eta: true,
        }
    }

    #[test]
    fn empty_pipeline_passes() {
        let config = PipelineConfig {
            k: 0,
            ..small_config()
        };
        let report = run_pipeline(&config).unwrap();
        assert!(report.alphas.is_empty());
        assert_eq!(report.verdict(), Verdict::Pass);
    }

    #[test]
    fn one_zero_eta_pipeline() {
        let report = run_pipeline(&small_config()).unwrap();
        // auto schedule over no prior sets: In then Out at probe 0
        assert_eq!(report.alphas[0].elements, vec![0, 3]);
        assert_eq!(report.summary.violations, 0);
        assert_eq!(report.summary.precondition_unmet, 0);
        assert!(report.summary.pairs_checked > 0);
        assert_eq!(report.verdict(), Verdict::Pass);
        assert_eq!(report.to_json(), run_pipeline(&small_config()).unwrap().to_json());
    }
}
