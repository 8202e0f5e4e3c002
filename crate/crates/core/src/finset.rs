//! Sets over a bounded universe `{0..N-1}`, ordered families of them, and
//! the exhaustive Boolean-combination checks used throughout the crate.
//!
//! "Infinite" is replaced everywhere by "has at least `t` elements below
//! `N`"; both numbers are explicit arguments, never globals.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FinsetError {
    #[error("universe size must be at least 1")]
    EmptyUniverse,
    #[error("element {element} is outside the universe of size {universe}")]
    ElementOutOfRange { element: usize, universe: usize },
    #[error("universe mismatch: expected {expected}, found {found}")]
    UniverseMismatch { expected: usize, found: usize },
    #[error("set index {index} out of range for a family of {len} sets")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("index {index} appears both positively and negatively")]
    OverlappingSpec { index: usize },
    #[error("threshold must be at least 1")]
    ZeroThreshold,
    #[error("depth {depth} exceeds family size {len}")]
    DepthTooLarge { depth: usize, len: usize },
    #[error("bit family with {k} sets needs a universe of at least 2^{k}, got {universe}")]
    TooManyBits { k: usize, universe: usize },
    #[error("{len} labels given for {sets} sets")]
    LabelCount { len: usize, sets: usize },
}

/// The finite stand-in for ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Universe(usize);

impl Universe {
    pub fn new(size: usize) -> Result<Self, FinsetError> {
        if size == 0 {
            return Err(FinsetError::EmptyUniverse);
        }
        Ok(Universe(size))
    }

    pub fn size(self) -> usize {
        self.0
    }
}

const WORD: usize = u64::BITS as usize;

/// A subset of `{0..N-1}` stored as a dense bitset. Bits at or above `N` are
/// always zero, so derived equality is set equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FinSet {
    universe: usize,
    words: Vec<u64>,
}

impl FinSet {
    pub fn empty(universe: Universe) -> Self {
        FinSet {
            universe: universe.size(),
            words: vec![0; universe.size().div_ceil(WORD)],
        }
    }

    pub fn full(universe: Universe) -> Self {
        let mut set = Self::empty(universe);
        set.words.iter_mut().for_each(|w| *w = u64::MAX);
        set.clear_tail();
        set
    }

    pub fn from_elements<I>(universe: Universe, elements: I) -> Result<Self, FinsetError>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut set = Self::empty(universe);
        for e in elements {
            set.insert(e)?;
        }
        Ok(set)
    }

    /// Builds `{n < N : pred(n)}`.
    pub fn from_predicate(universe: Universe, pred: impl Fn(usize) -> bool) -> Self {
        let mut set = Self::empty(universe);
        for n in 0..universe.size() {
            if pred(n) {
                set.words[n / WORD] |= 1 << (n % WORD);
            }
        }
        set
    }

    pub fn universe(&self) -> Universe {
        Universe(self.universe)
    }

    pub fn contains(&self, n: usize) -> bool {
        n < self.universe && self.words[n / WORD] & (1 << (n % WORD)) != 0
    }

    pub fn insert(&mut self, n: usize) -> Result<bool, FinsetError> {
        if n >= self.universe {
            return Err(FinsetError::ElementOutOfRange {
                element: n,
                universe: self.universe,
            });
        }
        let mask = 1 << (n % WORD);
        let fresh = self.words[n / WORD] & mask == 0;
        self.words[n / WORD] |= mask;
        Ok(fresh)
    }

    pub fn remove(&mut self, n: usize) -> bool {
        if n >= self.universe {
            return false;
        }
        let mask = 1 << (n % WORD);
        let present = self.words[n / WORD] & mask != 0;
        self.words[n / WORD] &= !mask;
        present
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn min(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn max(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * WORD + (WORD - 1 - w.leading_zeros() as usize))
    }

    /// Ascending iterator over the members.
    pub fn iter(&self) -> Iter<'_> {
        self.iter_from(0)
    }

    /// Ascending iterator over the members `>= start`.
    pub fn iter_from(&self, start: usize) -> Iter<'_> {
        let word_idx = start / WORD;
        let current = if word_idx < self.words.len() {
            self.words[word_idx] & (u64::MAX << (start % WORD))
        } else {
            0
        };
        Iter {
            words: &self.words,
            word_idx,
            current,
        }
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn complement(&self) -> FinSet {
        let mut out = self.clone();
        out.words.iter_mut().for_each(|w| *w = !*w);
        out.clear_tail();
        out
    }

    pub fn intersect_with(&mut self, other: &FinSet) {
        debug_assert_eq!(self.universe, other.universe);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn subtract(&mut self, other: &FinSet) {
        debug_assert_eq!(self.universe, other.universe);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn union_with(&mut self, other: &FinSet) {
        debug_assert_eq!(self.universe, other.universe);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn is_subset(&self, other: &FinSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &FinSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    /// `{ map(n) : n ∈ self }`. `map` must send the universe into itself.
    pub fn image(&self, map: impl Fn(usize) -> usize) -> FinSet {
        let mut out = FinSet::empty(self.universe());
        for n in self.iter() {
            let m = map(n);
            out.words[m / WORD] |= 1 << (m % WORD);
        }
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.universe % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for FinSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

pub struct Iter<'a> {
    words: &'a [u64],
    word_idx: usize,
    current: u64,
}

impl Iterator for Iter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word_idx * WORD + bit);
            }
            self.word_idx += 1;
            if self.word_idx >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word_idx];
        }
    }
}

/// An ordered list of sets over one universe. Position in `sets` is the
/// set's name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    universe: Universe,
    sets: Vec<FinSet>,
    labels: Option<Vec<String>>,
}

impl Family {
    pub fn new(universe: Universe, sets: Vec<FinSet>) -> Result<Self, FinsetError> {
        for s in &sets {
            if s.universe != universe.size() {
                return Err(FinsetError::UniverseMismatch {
                    expected: universe.size(),
                    found: s.universe,
                });
            }
        }
        Ok(Family {
            universe,
            sets,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, FinsetError> {
        if labels.len() != self.sets.len() {
            return Err(FinsetError::LabelCount {
                len: labels.len(),
                sets: self.sets.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn empty(universe: Universe) -> Self {
        Family {
            universe,
            sets: Vec::new(),
            labels: None,
        }
    }

    /// Joins several families over the same universe; indices run on
    /// consecutively.
    pub fn concat(universe: Universe, parts: &[Family]) -> Result<Self, FinsetError> {
        let mut out = Family::empty(universe);
        let labelled = parts.iter().any(|p| p.labels.is_some());
        let mut labels = Vec::new();
        for part in parts {
            if part.universe != universe {
                return Err(FinsetError::UniverseMismatch {
                    expected: universe.size(),
                    found: part.universe.size(),
                });
            }
            for i in 0..part.len() {
                labels.push(part.label(i));
            }
            out.sets.extend(part.sets.iter().cloned());
        }
        if labelled {
            out.labels = Some(labels);
        }
        Ok(out)
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn sets(&self) -> &[FinSet] {
        &self.sets
    }

    pub fn get(&self, index: usize) -> Option<&FinSet> {
        self.sets.get(index)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, index: usize) -> String {
        match &self.labels {
            Some(l) => l[index].clone(),
            None => format!("A{index}"),
        }
    }

    pub fn push(&mut self, set: FinSet, label: Option<String>) -> Result<usize, FinsetError> {
        if set.universe != self.universe.size() {
            return Err(FinsetError::UniverseMismatch {
                expected: self.universe.size(),
                found: set.universe,
            });
        }
        if let Some(labels) = &mut self.labels {
            labels.push(label.unwrap_or_else(|| format!("A{}", self.sets.len())));
        } else if let Some(label) = label {
            let mut labels: Vec<String> = (0..self.sets.len()).map(|i| format!("A{i}")).collect();
            labels.push(label);
            self.labels = Some(labels);
        }
        self.sets.push(set);
        Ok(self.sets.len() - 1)
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    #[serde(rename = "N")]
    n: usize,
    sets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        FamilyJson {
            n: self.universe.size(),
            sets: self.sets.iter().map(FinSet::to_vec).collect(),
            labels: self.labels.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = FamilyJson::deserialize(deserializer)?;
        let universe = Universe::new(raw.n).map_err(D::Error::custom)?;
        let sets = raw
            .sets
            .into_iter()
            .map(|s| FinSet::from_elements(universe, s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        let family = Family::new(universe, sets).map_err(D::Error::custom)?;
        match raw.labels {
            Some(l) => family.with_labels(l).map_err(D::Error::custom),
            None => Ok(family),
        }
    }
}

/// Which members enter a Boolean combination positively and which through
/// their complement. Both lists are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CombinationSpec {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

impl CombinationSpec {
    pub fn new(mut pos: Vec<usize>, mut neg: Vec<usize>) -> Self {
        pos.sort_unstable();
        pos.dedup();
        neg.sort_unstable();
        neg.dedup();
        CombinationSpec { pos, neg }
    }

    pub fn depth(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn validate(&self, family_len: usize) -> Result<(), FinsetError> {
        for &i in self.pos.iter().chain(&self.neg) {
            if i >= family_len {
                return Err(FinsetError::IndexOutOfRange {
                    index: i,
                    len: family_len,
                });
            }
        }
        if let Some(&i) = self.pos.iter().find(|i| self.neg.binary_search(i).is_ok()) {
            return Err(FinsetError::OverlappingSpec { index: i });
        }
        Ok(())
    }
}

impl fmt::Display for CombinationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pos={:?} neg={:?}", self.pos, self.neg)
    }
}

/// Every disjoint `(pos, neg)` over `k` indices with `|pos|+|neg| <= max_depth`,
/// in canonical order: by depth, then by the sorted index union
/// (lexicographically), then by sign pattern along the union with
/// positive before negative.
///
/// This is also the order in which failing witnesses are reported.
pub fn combinations(k: usize, max_depth: usize) -> Combinations {
    Combinations::starting_at(k, 0, max_depth)
}

pub struct Combinations {
    k: usize,
    max_depth: usize,
    depth: usize,
    union: Vec<usize>,
    sign: u64,
    done: bool,
}

impl Combinations {
    fn starting_at(k: usize, min_depth: usize, max_depth: usize) -> Self {
        let max_depth = max_depth.min(k);
        assert!(max_depth < 64, "combination depth {max_depth} is not enumerable");
        Combinations {
            k,
            max_depth,
            depth: min_depth,
            union: (0..min_depth).collect(),
            sign: 0,
            done: min_depth > max_depth,
        }
    }

    fn advance_union(&mut self) -> bool {
        let d = self.depth;
        let mut i = d;
        while i > 0 {
            i -= 1;
            if self.union[i] < self.k - d + i {
                self.union[i] += 1;
                for j in i + 1..d {
                    self.union[j] = self.union[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for Combinations {
    type Item = CombinationSpec;

    fn next(&mut self) -> Option<CombinationSpec> {
        if self.done {
            return None;
        }
        let d = self.depth;
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (j, &idx) in self.union.iter().enumerate() {
            if self.sign >> (d - 1 - j) & 1 == 1 {
                neg.push(idx);
            } else {
                pos.push(idx);
            }
        }
        let out = CombinationSpec { pos, neg };

        self.sign += 1;
        if self.sign == 1u64 << d {
            self.sign = 0;
            if !self.advance_union() {
                self.depth += 1;
                if self.depth > self.max_depth {
                    self.done = true;
                } else {
                    self.union = (0..self.depth).collect();
                }
            }
        }
        Some(out)
    }
}

/// `⋂_{i∈pos} A_i ∩ ⋂_{j∈neg} (N ∖ A_j)`; the empty combination is the
/// whole universe.
pub fn boolean_combination(family: &Family, spec: &CombinationSpec) -> Result<FinSet, FinsetError> {
    spec.validate(family.len())?;
    Ok(combine_unchecked(family, spec))
}

fn combine_unchecked(family: &Family, spec: &CombinationSpec) -> FinSet {
    let mut out = FinSet::full(family.universe());
    for &i in &spec.pos {
        out.intersect_with(&family.sets[i]);
    }
    for &j in &spec.neg {
        out.subtract(&family.sets[j]);
    }
    out
}

fn combination_size(family: &Family, spec: &CombinationSpec, scratch: &mut [u64]) -> usize {
    scratch.iter_mut().for_each(|w| *w = u64::MAX);
    for &i in &spec.pos {
        for (a, b) in scratch.iter_mut().zip(&family.sets[i].words) {
            *a &= b;
        }
    }
    for &j in &spec.neg {
        for (a, b) in scratch.iter_mut().zip(&family.sets[j].words) {
            *a &= !b;
        }
    }
    let n = family.universe.size();
    let rem = n % WORD;
    if rem != 0 {
        if let Some(last) = scratch.last_mut() {
            *last &= (1 << rem) - 1;
        }
    }
    scratch.iter().map(|w| w.count_ones() as usize).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub ok: bool,
    /// Least failing combination in canonical order.
    pub failing: Option<CombinationSpec>,
    /// Size of `failing`, or the smallest combination size seen when `ok`.
    pub size_found: usize,
    pub threshold: usize,
    /// Depth cap actually applied.
    pub depth: usize,
    pub checked: usize,
}

/// Checks that every combination of depth at most `depth` has at least
/// `threshold` elements.
pub fn is_independent(
    family: &Family,
    threshold: usize,
    depth: usize,
) -> Result<IndependenceReport, FinsetError> {
    if threshold == 0 {
        return Err(FinsetError::ZeroThreshold);
    }
    if depth > family.len() {
        return Err(FinsetError::DepthTooLarge {
            depth,
            len: family.len(),
        });
    }
    let mut scratch = vec![0u64; family.universe.size().div_ceil(WORD)];
    let mut min_size = usize::MAX;
    let mut checked = 0;
    for spec in combinations(family.len(), depth) {
        checked += 1;
        let size = combination_size(family, &spec, &mut scratch);
        if size < threshold {
            return Ok(IndependenceReport {
                ok: false,
                failing: Some(spec),
                size_found: size,
                threshold,
                depth,
                checked,
            });
        }
        min_size = min_size.min(size);
    }
    Ok(IndependenceReport {
        ok: true,
        failing: None,
        size_found: min_size,
        threshold,
        depth,
        checked,
    })
}

/// Smallest combination size over all specs of depth at most `depth`
/// (capped at the family size).
pub fn min_combination_size(family: &Family, depth: usize) -> usize {
    let mut scratch = vec![0u64; family.universe.size().div_ceil(WORD)];
    combinations(family.len(), depth.min(family.len()))
        .map(|spec| combination_size(family, &spec, &mut scratch))
        .min()
        .unwrap_or(family.universe.size())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub ok: bool,
    /// Least unmet demand `(p, q)`.
    pub witness: Option<(Vec<usize>, Vec<usize>)>,
    pub size: usize,
}

/// For all disjoint `p, q ⊆ [0,N)` with `1 <= |p|+|q| <= s`, looks for a
/// member `A` with `p ⊆ A` and `A ∩ q = ∅`. `s = 0` asks for nothing.
pub fn is_saturated(family: &Family, s: usize) -> SaturationReport {
    let n = family.universe.size();
    for demand in Combinations::starting_at(n, 1, s) {
        let met = family.sets.iter().any(|a| {
            demand.pos.iter().all(|&x| a.contains(x)) && !demand.neg.iter().any(|&x| a.contains(x))
        });
        if !met {
            return SaturationReport {
                ok: false,
                witness: Some((demand.pos, demand.neg)),
                size: s,
            };
        }
    }
    SaturationReport {
        ok: true,
        witness: None,
        size: s,
    }
}

/// `[A_0..A_{k-1}]` with `A_j = {n < N : bit j of n is 1}`.
pub fn bit_family(k: usize, universe: Universe) -> Result<Family, FinsetError> {
    let n = universe.size();
    if k >= usize::BITS as usize || (1usize << k) > n {
        return Err(FinsetError::TooManyBits { k, universe: n });
    }
    let sets = (0..k)
        .map(|j| FinSet::from_predicate(universe, |x| x >> j & 1 == 1))
        .collect();
    Family::new(universe, sets)
}
