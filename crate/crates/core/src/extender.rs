//! Extending a compatible finite pair `(f, g)` to a permutation of the
//! universe.
//!
//! `f` is a partial injection on points and `g` a partial injection on the
//! indices of a family. The sets in `dom(g)` generate a finite Boolean
//! algebra whose atoms partition the universe; `g` induces a permutation of
//! those atoms. Inside each atom the points not yet handled by `f` are
//! listed in increasing order and matched, through a per-atom shuffle `c`,
//! with the points of the image atom not yet hit by `f`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finset::{self, Family, FinSet, FinsetError, Universe};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtendError {
    #[error(transparent)]
    Finset(#[from] FinsetError),
    #[error("{what}: {value} is hit twice")]
    NotInjective { what: &'static str, value: usize },
    #[error("{what}: {value} is out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("not a permutation of 0..{len}")]
    NotAPermutation { len: usize },
    #[error("f and g disagree at point {point}, set {index}")]
    IncompatiblePair { point: usize, index: usize },
    #[error("g does not induce a permutation of the atoms (atom {atom} has no matching image)")]
    InducedMapNotPermutation { atom: usize },
    #[error("atom {atom} has {source_len} free points but its image has {target_len}")]
    CardinalityMismatch {
        atom: usize,
        source_len: usize,
        target_len: usize,
    },
    #[error("shuffle for atom {atom} should permute {expected} points, got {found}")]
    ShuffleMismatch {
        atom: usize,
        expected: usize,
        found: usize,
    },
    #[error("dom(g) has {0} generators; at most 64 are supported")]
    TooManyGenerators(usize),
    #[error("no good shuffle in {attempts} attempts (best minimum combination size {best_min_size})")]
    BudgetExhausted {
        attempts: usize,
        best_min_size: usize,
    },
}

/// A bijection of `0..N`, stored with its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
    inv: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
            inv: (0..n).collect(),
        }
    }

    pub fn from_map(map: Vec<usize>) -> Result<Self, ExtendError> {
        let n = map.len();
        let mut inv = vec![usize::MAX; n];
        for (i, &x) in map.iter().enumerate() {
            if x >= n || inv[x] != usize::MAX {
                return Err(ExtendError::NotAPermutation { len: n });
            }
            inv[x] = i;
        }
        Ok(Permutation { map, inv })
    }

    /// Uniform over `S_n`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self::from_map(map).expect("shuffle is a bijection")
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn apply_inverse(&self, i: usize) -> usize {
        self.inv[i]
    }

    pub fn inverse(&self) -> Permutation {
        Permutation {
            map: self.inv.clone(),
            inv: self.map.clone(),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        let map = other.map.iter().map(|&x| self.map[x]).collect();
        Self::from_map(map).expect("composition of bijections")
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// `π[A]`.
    pub fn image(&self, set: &FinSet) -> FinSet {
        set.image(|x| self.map[x])
    }

    /// `π^{-1}[A]`.
    pub fn preimage(&self, set: &FinSet) -> FinSet {
        set.image(|x| self.inv[x])
    }
}

#[derive(Serialize, Deserialize)]
struct PermutationJson {
    map: Vec<usize>,
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PermutationJson {
            map: self.map.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = PermutationJson::deserialize(deserializer)?;
        Permutation::from_map(raw.map).map_err(serde::de::Error::custom)
    }
}

fn injective_map(
    pairs: impl IntoIterator<Item = (usize, usize)>,
    limit: usize,
    what: &'static str,
) -> Result<BTreeMap<usize, usize>, ExtendError> {
    let mut map = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (x, y) in pairs {
        for v in [x, y] {
            if v >= limit {
                return Err(ExtendError::OutOfRange {
                    what,
                    value: v,
                    limit,
                });
            }
        }
        if !seen.insert(y) {
            return Err(ExtendError::NotInjective { what, value: y });
        }
        if map.insert(x, y).is_some() {
            return Err(ExtendError::NotInjective { what, value: x });
        }
    }
    Ok(map)
}

/// A finite partial injection `f` on the points of a universe.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartialInjection {
    pairs: BTreeMap<usize, usize>,
}

impl PartialInjection {
    pub fn new(
        universe: Universe,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ExtendError> {
        Ok(PartialInjection {
            pairs: injective_map(pairs, universe.size(), "f")?,
        })
    }

    pub fn get(&self, n: usize) -> Option<usize> {
        self.pairs.get(&n).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|(a, b)| (*a, *b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn domain(&self, universe: Universe) -> FinSet {
        FinSet::from_elements(universe, self.pairs.keys().copied()).expect("validated")
    }

    pub fn range(&self, universe: Universe) -> FinSet {
        FinSet::from_elements(universe, self.pairs.values().copied()).expect("validated")
    }
}

/// A finite partial injection `g` on family indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FamilyMap {
    pairs: BTreeMap<usize, usize>,
}

impl FamilyMap {
    pub fn new(
        family_len: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ExtendError> {
        Ok(FamilyMap {
            pairs: injective_map(pairs, family_len, "g")?,
        })
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.pairs.get(&i).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|(a, b)| (*a, *b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// A demand `(f, g)` as read from JSON: `{"f": [[n, fn],...], "g": [[i, gi],...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DemandSpec {
    #[serde(default)]
    pub f: Vec<(usize, usize)>,
    #[serde(default)]
    pub g: Vec<(usize, usize)>,
}

impl DemandSpec {
    pub fn resolve(&self, family: &Family) -> Result<(PartialInjection, FamilyMap), ExtendError> {
        Ok((
            PartialInjection::new(family.universe(), self.f.iter().copied())?,
            FamilyMap::new(family.len(), self.g.iter().copied())?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub ok: bool,
    /// Least `(n, index)` with `n ∈ A_index ⇎ f(n) ∈ A_{g(index)}`.
    pub witness: Option<(usize, usize)>,
}

/// `∀n ∈ dom(f) ∀i ∈ dom(g): n ∈ A_i ⇔ f(n) ∈ A_{g(i)}`.
pub fn check_compatible(f: &PartialInjection, g: &FamilyMap, family: &Family) -> CompatibilityReport {
    let sets = family.sets();
    for (n, fnv) in f.iter() {
        for (i, gi) in g.iter() {
            if sets[i].contains(n) != sets[gi].contains(fnv) {
                return CompatibilityReport {
                    ok: false,
                    witness: Some((n, i)),
                };
            }
        }
    }
    CompatibilityReport {
        ok: true,
        witness: None,
    }
}

/// Atoms of the algebra generated by `{A_i : i ∈ dom(g)}` and the
/// permutation of them induced by `g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomDecomposition {
    /// Sorted `dom(g)`; generator `j` is bit `j` of a signature.
    pub generators: Vec<usize>,
    /// Nonempty cells, ordered by signature.
    pub atoms: Vec<FinSet>,
    pub signatures: Vec<u64>,
    /// `action[k]` is the atom that `g` sends atom `k` to.
    pub action: Vec<usize>,
}

impl AtomDecomposition {
    /// Increasing enumeration of `atom_k ∖ dom(f)` for every `k`.
    pub fn sources(&self, f: &PartialInjection) -> Vec<Vec<usize>> {
        self.atoms
            .iter()
            .map(|a| a.iter().filter(|&x| f.get(x).is_none()).collect())
            .collect()
    }

    /// Increasing enumeration of `atom_k ∖ ran(f)` for every `k`.
    pub fn targets(&self, f: &PartialInjection) -> Vec<Vec<usize>> {
        let range: BTreeSet<usize> = f.iter().map(|(_, y)| y).collect();
        self.atoms
            .iter()
            .map(|a| a.iter().filter(|x| !range.contains(x)).collect())
            .collect()
    }
}

fn cells(family: &Family, indices: &[usize]) -> BTreeMap<u64, FinSet> {
    let universe = family.universe();
    let sets = family.sets();
    let mut out: BTreeMap<u64, FinSet> = BTreeMap::new();
    for x in 0..universe.size() {
        let sig = indices
            .iter()
            .enumerate()
            .filter(|(_, &i)| sets[i].contains(x))
            .fold(0u64, |acc, (j, _)| acc | 1 << j);
        out.entry(sig)
            .or_insert_with(|| FinSet::empty(universe))
            .insert(x)
            .expect("x < N");
    }
    out
}

/// Atoms of `dom(g)` and the atom permutation obtained by extending `g`
/// homomorphically.
pub fn atoms_of(g: &FamilyMap, family: &Family) -> Result<AtomDecomposition, ExtendError> {
    let generators: Vec<usize> = g.iter().map(|(i, _)| i).collect();
    if generators.len() > 64 {
        return Err(ExtendError::TooManyGenerators(generators.len()));
    }
    let images: Vec<usize> = g.iter().map(|(_, gi)| gi).collect();
    let source = cells(family, &generators);
    let target = cells(family, &images);

    let (signatures, atoms): (Vec<u64>, Vec<FinSet>) = source.into_iter().unzip();
    let mut action = Vec::with_capacity(atoms.len());
    let mut hit = vec![false; atoms.len()];
    for (k, sig) in signatures.iter().enumerate() {
        let image = target.get(sig);
        let j = image
            .and_then(|img| atoms.iter().position(|a| a == img))
            .ok_or(ExtendError::InducedMapNotPermutation { atom: k })?;
        if std::mem::replace(&mut hit[j], true) {
            return Err(ExtendError::InducedMapNotPermutation { atom: k });
        }
        action.push(j);
    }
    Ok(AtomDecomposition {
        generators,
        atoms,
        signatures,
        action,
    })
}

/// One permutation `c_k` of `0..|atom_k ∖ dom(f)|` per atom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomShuffle {
    pub per_atom: Vec<Vec<usize>>,
}

impl AtomShuffle {
    pub fn identity(sizes: &[usize]) -> Self {
        AtomShuffle {
            per_atom: sizes.iter().map(|&s| (0..s).collect()).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        AtomShuffle {
            per_atom: sizes
                .iter()
                .map(|&s| {
                    let mut v: Vec<usize> = (0..s).collect();
                    v.shuffle(rng);
                    v
                })
                .collect(),
        }
    }
}

/// Free-point counts `|atom_k ∖ dom(f)|`, after checking compatibility and
/// that every atom's image has as many points outside `ran(f)`.
pub fn shuffle_sizes(
    f: &PartialInjection,
    g: &FamilyMap,
    family: &Family,
) -> Result<(AtomDecomposition, Vec<usize>), ExtendError> {
    if let Some((point, index)) = check_compatible(f, g, family).witness {
        return Err(ExtendError::IncompatiblePair { point, index });
    }
    let atoms = atoms_of(g, family)?;
    let sources = atoms.sources(f);
    let targets = atoms.targets(f);
    for (k, src) in sources.iter().enumerate() {
        let tgt = &targets[atoms.action[k]];
        if src.len() != tgt.len() {
            return Err(ExtendError::CardinalityMismatch {
                atom: k,
                source_len: src.len(),
                target_len: tgt.len(),
            });
        }
    }
    let sizes = sources.iter().map(Vec::len).collect();
    Ok((atoms, sizes))
}

/// `π_c`: `f` on `dom(f)`; on `atom_k ∖ dom(f)`,
/// `π(i) = h′_{g(k)}(c_k(h_k^{-1}(i)))` with `h`, `h′` the increasing
/// enumerations of `atom ∖ dom(f)` and `atom ∖ ran(f)`.
pub fn build_pi(
    f: &PartialInjection,
    g: &FamilyMap,
    family: &Family,
    c: &AtomShuffle,
) -> Result<Permutation, ExtendError> {
    let (atoms, sizes) = shuffle_sizes(f, g, family)?;
    build_pi_with(f, &atoms, &sizes, family.universe(), c)
}

fn build_pi_with(
    f: &PartialInjection,
    atoms: &AtomDecomposition,
    sizes: &[usize],
    universe: Universe,
    c: &AtomShuffle,
) -> Result<Permutation, ExtendError> {
    if c.per_atom.len() != sizes.len() {
        return Err(ExtendError::ShuffleMismatch {
            atom: c.per_atom.len().min(sizes.len()),
            expected: sizes.len(),
            found: c.per_atom.len(),
        });
    }
    let sources = atoms.sources(f);
    let targets = atoms.targets(f);
    let mut map = vec![usize::MAX; universe.size()];
    for (n, fnv) in f.iter() {
        map[n] = fnv;
    }
    for (k, src) in sources.iter().enumerate() {
        let shuffle = &c.per_atom[k];
        if shuffle.len() != sizes[k] {
            return Err(ExtendError::ShuffleMismatch {
                atom: k,
                expected: sizes[k],
                found: shuffle.len(),
            });
        }
        let mut seen = vec![false; shuffle.len()];
        if shuffle
            .iter()
            .any(|&s| s >= seen.len() || std::mem::replace(&mut seen[s], true))
        {
            return Err(ExtendError::ShuffleMismatch {
                atom: k,
                expected: sizes[k],
                found: shuffle.len(),
            });
        }
        let tgt = &targets[atoms.action[k]];
        for (j, &point) in src.iter().enumerate() {
            map[point] = tgt[shuffle[j]];
        }
    }
    Ok(Permutation::from_map(map).expect("atoms partition both sides"))
}

/// `π` extends `f` and `π[A_i] = A_{g(i)}` for every `i ∈ dom(g)`.
pub fn satisfies_demand(pi: &Permutation, f: &PartialInjection, g: &FamilyMap, family: &Family) -> bool {
    let sets = family.sets();
    f.iter().all(|(n, fnv)| pi.apply(n) == fnv) && g.iter().all(|(i, gi)| pi.image(&sets[i]) == sets[gi])
}

/// `{π^ℓ[A] : A ∈ family, -radius <= ℓ <= radius}` with the original sets
/// first, then for `ℓ = 1, 2, ..` the images under `π^ℓ` and `π^{-ℓ}` of
/// each original set. Images equal to a set already present are dropped.
pub fn orbit_closure(family: &Family, pi: &Permutation, radius: usize) -> Family {
    let mut out = family.clone();
    let mut seen: BTreeSet<Vec<usize>> = family.sets().iter().map(FinSet::to_vec).collect();
    let mut forward: Vec<FinSet> = family.sets().to_vec();
    let mut backward: Vec<FinSet> = family.sets().to_vec();
    for l in 1..=radius {
        for i in 0..family.len() {
            forward[i] = pi.image(&forward[i]);
            backward[i] = pi.preimage(&backward[i]);
            let base = family.label(i);
            for (set, label) in [
                (&forward[i], format!("pi^{l}[{base}]")),
                (&backward[i], format!("pi^-{l}[{base}]")),
            ] {
                if seen.insert(set.to_vec()) {
                    out.push(set.clone(), Some(label)).expect("same universe");
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Size threshold for independence of the closure.
    pub threshold: usize,
    /// Combination depth cap.
    pub depth: usize,
    /// Orbit radius `L`.
    pub radius: usize,
    pub budget: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodShuffle {
    pub attempts: usize,
    pub shuffle: AtomShuffle,
    pub pi: Permutation,
    pub closure: Family,
    pub report: finset::IndependenceReport,
}

/// Samples per-atom shuffles until the orbit closure under `π_c` is
/// independent at `(threshold, depth)`; the depth is capped at the size of
/// the closure.
pub fn find_good_c(
    f: &PartialInjection,
    g: &FamilyMap,
    family: &Family,
    params: &SearchParams,
) -> Result<GoodShuffle, ExtendError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    find_good_c_with(f, g, family, params, &mut rng)
}

fn find_good_c_with<R: Rng + ?Sized>(
    f: &PartialInjection,
    g: &FamilyMap,
    family: &Family,
    params: &SearchParams,
    rng: &mut R,
) -> Result<GoodShuffle, ExtendError> {
    let (atoms, sizes) = shuffle_sizes(f, g, family)?;
    let mut best_min_size = 0;
    for attempt in 1..=params.budget {
        let shuffle = AtomShuffle::random(&sizes, rng);
        let pi = build_pi_with(f, &atoms, &sizes, family.universe(), &shuffle)?;
        let closure = orbit_closure(family, &pi, params.radius);
        let depth = params.depth.min(closure.len());
        let report = finset::is_independent(&closure, params.threshold, depth)?;
        if report.ok {
            return Ok(GoodShuffle {
                attempts: attempt,
                shuffle,
                pi,
                closure,
                report,
            });
        }
        best_min_size = best_min_size.max(finset::min_combination_size(&closure, depth));
    }
    Err(ExtendError::BudgetExhausted {
        attempts: params.budget,
        best_min_size,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogenizeStep {
    pub demand: usize,
    pub attempts: usize,
    pub pi: Permutation,
    pub family_len: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogenizeRun {
    pub family: Family,
    pub steps: Vec<HomogenizeStep>,
}

#[derive(Debug, Clone, Error)]
#[error("demand {demand} failed: {error}")]
pub struct HomogenizeFailure {
    pub demand: usize,
    pub error: ExtendError,
    pub partial: HomogenizeRun,
}

/// Handles one demand per step: find a good shuffle against the current
/// family, then replace the family by its orbit closure. Demand `j` draws
/// from ChaCha stream `j` of `params.seed`.
pub fn homogenize(
    family: &Family,
    demands: &[DemandSpec],
    params: &SearchParams,
) -> Result<HomogenizeRun, Box<HomogenizeFailure>> {
    let mut run = HomogenizeRun {
        family: family.clone(),
        steps: Vec::new(),
    };
    for (j, demand) in demands.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(j as u64);
        let outcome = demand
            .resolve(&run.family)
            .and_then(|(f, g)| find_good_c_with(&f, &g, &run.family, params, &mut rng));
        match outcome {
            Ok(good) => {
                run.family = good.closure;
                run.steps.push(HomogenizeStep {
                    demand: j,
                    attempts: good.attempts,
                    pi: good.pi,
                    family_len: run.family.len(),
                });
            }
            Err(error) => {
                return Err(Box::new(HomogenizeFailure {
                    demand: j,
                    error,
                    partial: run,
                }))
            }
        }
    }
    Ok(run)
}
