//! Canonical enumeration of `X = ω × ω × 2` and of `Y`, the finite partial
//! functions `X → ω`.
//!
//! A partial function is identified with its *raw code*: the natural number
//! whose binary support is the set of pair-codes `cantor_pair(point_code, value)`
//! of its entries. Raw codes in which two pair-codes share a point are not
//! functional and are skipped; `rho(m)` is the `m`-th functional raw code in
//! increasing order.
//!
//! Ranking and unranking never walk the raw codes. For a pair-code position
//! `c`, the number of functional codes using only positions below `c` and
//! avoiding a set `U` of already-used points is
//!
//! ```text
//! ∏_{q ∉ U} (1 + n_q(c))
//! ```
//!
//! where `n_q(c)` counts the pair-codes below `c` that belong to point `q`;
//! `n_q(c)` has a closed form in terms of the Cantor diagonal of `c`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finset::FinSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("layer must be 0 or 1, got {0}")]
    BadLayer(u64),
    #[error("point ({a},{b},{i}) is listed twice")]
    DuplicatePoint { a: u64, b: u64, i: u8 },
    #[error("code does not fit in 128 bits")]
    CodeOverflow,
    #[error("index of this partial function does not fit in 64 bits")]
    IndexOverflow,
}

/// `(a+b)(a+b+1)/2 + b`, or `None` past `u128`.
pub fn cantor_pair(a: u128, b: u128) -> Option<u128> {
    let s = a.checked_add(b)?;
    triangle(s)?.checked_add(b)
}

/// Two-sided inverse of [`cantor_pair`]; total on `u128`.
pub fn cantor_unpair(q: u128) -> (u128, u128) {
    let w = diagonal(q);
    let b = q - triangle(w).expect("diagonal is in range");
    (w - b, b)
}

fn triangle(w: u128) -> Option<u128> {
    if w.is_multiple_of(2) {
        (w / 2).checked_mul(w.checked_add(1)?)
    } else {
        w.checked_mul(w.div_ceil(2))
    }
}

/// Largest `w` with `w(w+1)/2 <= q`.
fn diagonal(q: u128) -> u128 {
    let (mut lo, mut hi) = (0u128, 1u128 << 65);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match triangle(mid) {
            Some(t) if t <= q => lo = mid,
            _ => hi = mid,
        }
    }
    lo
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u64")]
pub enum Layer {
    Zero = 0,
    One = 1,
}

impl Layer {
    pub const BOTH: [Layer; 2] = [Layer::Zero, Layer::One];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl From<Layer> for u8 {
    fn from(l: Layer) -> u8 {
        l as u8
    }
}

impl TryFrom<u64> for Layer {
    type Error = CodecError;
    fn try_from(v: u64) -> Result<Self, CodecError> {
        match v {
            0 => Ok(Layer::Zero),
            1 => Ok(Layer::One),
            other => Err(CodecError::BadLayer(other)),
        }
    }
}

/// A triple `(a, b, i)` of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Point {
    pub a: u64,
    pub b: u64,
    pub i: Layer,
}

impl Point {
    pub fn new(a: u64, b: u64, i: Layer) -> Self {
        Point { a, b, i }
    }
}

// Same order as point_code, without forming the code.
impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        let key = |p: &Point| (p.a as u128 + p.b as u128, p.b, p.i);
        key(self).cmp(&key(other))
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `2·cantor_pair(a,b) + i`, or `None` past `u128`.
pub fn point_code(p: Point) -> Option<u128> {
    cantor_pair(p.a as u128, p.b as u128)?
        .checked_mul(2)?
        .checked_add(p.i as u128)
}

/// Inverse of [`point_code`]; `None` when a coordinate exceeds `u64`.
pub fn point_decode(code: u128) -> Option<Point> {
    let i = if code.is_multiple_of(2) { Layer::Zero } else { Layer::One };
    let (a, b) = cantor_unpair(code / 2);
    Some(Point {
        a: u64::try_from(a).ok()?,
        b: u64::try_from(b).ok()?,
        i,
    })
}

fn entry_code(p: Point, value: u64) -> Result<u128, CodecError> {
    point_code(p)
        .and_then(|q| cantor_pair(q, value as u128))
        .ok_or(CodecError::CodeOverflow)
}

/// A finite partial function `X → ω`. Lookups outside the domain are
/// `None`, never a default value.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct PartialFn {
    entries: BTreeMap<Point, u64>,
}

impl PartialFn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I>(entries: I) -> Result<Self, CodecError>
    where
        I: IntoIterator<Item = (Point, u64)>,
    {
        let mut out = PartialFn::new();
        for (p, v) in entries {
            if out.entries.insert(p, v).is_some() {
                return Err(CodecError::DuplicatePoint {
                    a: p.a,
                    b: p.b,
                    i: p.i as u8,
                });
            }
        }
        Ok(out)
    }

    pub fn get(&self, p: Point) -> Option<u64> {
        self.entries.get(&p).copied()
    }

    pub fn contains_point(&self, p: Point) -> bool {
        self.entries.contains_key(&p)
    }

    /// Sets `p ↦ v`, returning the previous value.
    pub fn set(&mut self, p: Point, v: u64) -> Option<u64> {
        self.entries.insert(p, v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in point-code order.
    pub fn iter(&self) -> impl Iterator<Item = (Point, u64)> + '_ {
        self.entries.iter().map(|(p, v)| (*p, *v))
    }

    /// Binary support of the raw code, ascending.
    pub fn support(&self) -> Result<Vec<u128>, CodecError> {
        let mut codes = self
            .iter()
            .map(|(p, v)| entry_code(p, v))
            .collect::<Result<Vec<_>, _>>()?;
        codes.sort_unstable();
        Ok(codes)
    }

    fn from_support(codes: &[u128]) -> Self {
        let entries = codes
            .iter()
            .map(|&c| {
                let (q, v) = cantor_unpair(c);
                let p = point_decode(q).expect("enumerated points have u64 coordinates");
                (p, u64::try_from(v).expect("enumerated values fit in u64"))
            })
            .collect();
        PartialFn { entries }
    }
}

impl fmt::Debug for PartialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(
                self.iter()
                    .map(|(p, v)| (format!("({},{},{})", p.a, p.b, p.i as u8), v)),
            )
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct PartialFnJson {
    entries: Vec<[u64; 4]>,
}

impl Serialize for PartialFn {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PartialFnJson {
            entries: self.iter().map(|(p, v)| [p.a, p.b, p.i as u64, v]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PartialFn {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = PartialFnJson::deserialize(deserializer)?;
        let entries = raw
            .entries
            .into_iter()
            .map(|[a, b, i, v]| Ok((Point::new(a, b, Layer::try_from(i)?), v)))
            .collect::<Result<Vec<_>, CodecError>>()
            .map_err(D::Error::custom)?;
        PartialFn::from_entries(entries).map_err(D::Error::custom)
    }
}

/// Position of a partial function in the canonical enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RhoIndex(pub u64);

/// `n_q(c)`: pair-codes below `c` whose point-code is `q`.
fn codes_below(c: u128, q: u128) -> u128 {
    let d = diagonal(c);
    let r = c - triangle(d).expect("diagonal is in range");
    let earlier = d.saturating_sub(q);
    let on_diagonal = u128::from(q <= d && d - q < r);
    earlier + on_diagonal
}

/// Functional completions using only pair-codes below `c` and avoiding the
/// points in `used` (sorted). Saturates at `u128::MAX`.
fn completions(c: u128, used: &[u128]) -> u128 {
    if c == 0 {
        return 1;
    }
    let d = diagonal(c);
    let mut product: u128 = 1;
    let mut q = 0u128;
    // points q > d have no code below c
    while q <= d {
        if used.binary_search(&q).is_err() {
            let n = codes_below(c, q);
            if n == 0 {
                break;
            }
            product = product.saturating_mul(n + 1);
            if product == u128::MAX {
                break;
            }
        }
        q += 1;
    }
    product
}

/// `TOTALS[c]` = functional codes below `2^c`, up to the first value past
/// `u64::MAX`.
fn totals() -> &'static [u128] {
    static TOTALS: OnceLock<Vec<u128>> = OnceLock::new();
    TOTALS.get_or_init(|| {
        let mut out = Vec::new();
        let mut c = 0u128;
        loop {
            let t = completions(c, &[]);
            out.push(t);
            if t > u64::MAX as u128 {
                break out;
            }
            c += 1;
        }
    })
}

/// Support (ascending pair-codes) of `rho(m)`, written into `out`.
pub fn rho_support_into(m: RhoIndex, out: &mut Vec<u128>) {
    out.clear();
    let mut rest = m.0 as u128;
    let table = totals();
    // smallest c with TOTALS[c] > m; the top bit is c - 1
    let top = table.partition_point(|&t| t <= rest);
    let mut used: Vec<u128> = Vec::new();
    for c in (0..top as u128).rev() {
        let (q, _) = cantor_unpair(c);
        let slot = match used.binary_search(&q) {
            Ok(_) => continue,
            Err(slot) => slot,
        };
        let zero = completions(c, &used);
        if rest >= zero {
            rest -= zero;
            out.push(c);
            used.insert(slot, q);
        }
    }
    debug_assert_eq!(rest, 0);
    out.reverse();
}

pub fn rho_support(m: RhoIndex) -> Vec<u128> {
    let mut out = Vec::new();
    rho_support_into(m, &mut out);
    out
}

/// The `m`-th partial function of the canonical enumeration.
pub fn rho(m: RhoIndex) -> PartialFn {
    PartialFn::from_support(&rho_support(m))
}

/// Position of a (functional) support in the enumeration.
pub fn index_of_support(support: &[u128]) -> Result<RhoIndex, CodecError> {
    let mut used: Vec<u128> = Vec::with_capacity(support.len());
    let mut rank: u128 = 0;
    for &c in support.iter().rev() {
        let below = completions(c, &used);
        rank = rank.checked_add(below).ok_or(CodecError::IndexOverflow)?;
        if rank > u64::MAX as u128 {
            return Err(CodecError::IndexOverflow);
        }
        let (q, _) = cantor_unpair(c);
        let slot = used.binary_search(&q).unwrap_or_else(|s| s);
        used.insert(slot, q);
    }
    Ok(RhoIndex(rank as u64))
}

/// Inverse of [`rho`]. Fails only when the index exceeds `u64`.
pub fn rho_index(f: &PartialFn) -> Result<RhoIndex, CodecError> {
    index_of_support(&f.support()?)
}

/// `ρ ⊆ ρ′`: every entry of `rho` appears identically in `extension`.
pub fn extends(extension: &PartialFn, rho: &PartialFn) -> bool {
    rho.iter().all(|(p, v)| extension.get(p) == Some(v))
}

/// Subset test on ascending supports; equivalent to [`extends`].
pub fn support_extends(extension: &[u128], rho: &[u128]) -> bool {
    let mut it = extension.iter();
    rho.iter().all(|c| it.by_ref().any(|e| e == c))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityReport {
    pub ok: bool,
    /// Least probe `m` with no extension in the set.
    pub unwitnessed: Option<u64>,
    pub probe_bound: u64,
    pub search_bound: u64,
}

/// Least `n ∈ set`, `start <= n < search_bound`, with `rho(n) ⊇` the
/// function whose support is `target`.
pub fn find_extension(
    set: &FinSet,
    target: &[u128],
    start: u64,
    search_bound: u64,
) -> Option<u64> {
    // extensions have a numerically larger raw code, hence a larger index
    let floor = match index_of_support(target) {
        Ok(RhoIndex(i)) => i.max(start),
        Err(_) => return None,
    };
    let limit = search_bound.min(set.universe().size() as u64);
    if floor >= limit {
        return None;
    }
    let mut buf = Vec::new();
    for n in set.iter_from(floor as usize) {
        let n = n as u64;
        if n >= limit {
            break;
        }
        rho_support_into(RhoIndex(n), &mut buf);
        if support_extends(&buf, target) {
            return Some(n);
        }
    }
    None
}

/// Finite density in `Y`: every `rho(m)` with `m < probe_bound` has an
/// extension `rho(n)` with `n ∈ set` and `n < search_bound`.
pub fn is_dense_in_y(set: &FinSet, probe_bound: u64, search_bound: u64) -> DensityReport {
    let unwitnessed = (0..probe_bound).find(|&m| {
        let target = rho_support(RhoIndex(m));
        find_extension(set, &target, m, search_bound).is_none()
    });
    DensityReport {
        ok: unwitnessed.is_none(),
        unwitnessed,
        probe_bound,
        search_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finset::Universe;

    fn pt(a: u64, b: u64, i: u8) -> Point {
        Point::new(a, b, Layer::try_from(i as u64).unwrap())
    }

    fn pf(entries: &[(u64, u64, u8, u64)]) -> PartialFn {
        PartialFn::from_entries(entries.iter().map(|&(a, b, i, v)| (pt(a, b, i), v))).unwrap()
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(cantor_pair(0, 0), Some(0));
        assert_eq!(cantor_pair(1, 0), Some(1));
        assert_eq!(cantor_pair(0, 1), Some(2));
        assert_eq!(cantor_pair(1, 1), Some(4));
        assert_eq!(cantor_unpair(4), (1, 1));
        assert_eq!(cantor_pair(u128::MAX, 1), None);
        let big = u128::MAX - 7;
        let (a, b) = cantor_unpair(big);
        assert_eq!(cantor_pair(a, b), Some(big));
    }

    #[test]
    fn point_code_examples() {
        assert_eq!(point_code(pt(0, 0, 0)), Some(0));
        assert_eq!(point_code(pt(0, 0, 1)), Some(1));
        assert_eq!(point_code(pt(1, 0, 0)), Some(2));
        for code in 0..500u128 {
            assert_eq!(point_code(point_decode(code).unwrap()), Some(code));
        }
        let far = pt(1 << 62, 1 << 62, 1);
        assert_eq!(point_decode(point_code(far).unwrap()), Some(far));
        assert_eq!(point_code(pt(u64::MAX, u64::MAX, 1)), None);
    }

    #[test]
    fn point_order_matches_code_order() {
        let mut pts: Vec<Point> = (0..200u128).map(|c| point_decode(c).unwrap()).collect();
        pts.reverse();
        pts.sort();
        let codes: Vec<u128> = pts.into_iter().map(|p| point_code(p).unwrap()).collect();
        assert_eq!(codes, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn rho_spot_values() {
        assert_eq!(rho(RhoIndex(0)), PartialFn::new());
        assert_eq!(rho(RhoIndex(1)), pf(&[(0, 0, 0, 0)]));
        assert_eq!(rho(RhoIndex(3)), pf(&[(0, 0, 0, 0), (0, 0, 1, 0)]));
        assert_eq!(rho(RhoIndex(4)), pf(&[(0, 0, 0, 1)]));
    }

    #[test]
    fn rho_index_spot_values() {
        assert_eq!(rho_index(&PartialFn::new()), Ok(RhoIndex(0)));
        assert_eq!(rho_index(&pf(&[(0, 0, 0, 0)])), Ok(RhoIndex(1)));
        assert_eq!(rho_index(&pf(&[(0, 0, 0, 0), (0, 0, 1, 0)])), Ok(RhoIndex(3)));
    }

    #[test]
    fn huge_functions_overflow_the_index() {
        let far = pf(&[(1 << 20, 0, 0, 0)]);
        assert_eq!(rho_index(&far), Err(CodecError::IndexOverflow));
        let very_far = pf(&[(u64::MAX, u64::MAX, 1, u64::MAX)]);
        assert_eq!(rho_index(&very_far), Err(CodecError::CodeOverflow));
    }

    #[test]
    fn extends_examples() {
        let a = pf(&[(0, 0, 0, 1)]);
        let b = pf(&[(0, 0, 0, 0)]);
        assert!(extends(&a, &PartialFn::new()));
        assert!(extends(&a, &a));
        assert!(!extends(&a, &b));
        assert!(!support_extends(&a.support().unwrap(), &b.support().unwrap()));
    }

    #[test]
    fn density_examples() {
        let u = Universe::new(64).unwrap();
        let all = FinSet::full(u);
        assert!(is_dense_in_y(&all, 64, 64).ok);
        let zero = FinSet::from_elements(u, [0]).unwrap();
        let r = is_dense_in_y(&zero, 2, 64);
        assert_eq!(r.unwitnessed, Some(1));
        assert!(is_dense_in_y(&zero, 1, 64).ok);
    }

    #[test]
    fn json_shape() {
        let f = rho(RhoIndex(3));
        assert_eq!(
            serde_json::to_string(&f).unwrap(),
            r#"{"entries":[[0,0,0,0],[0,0,1,0]]}"#
        );
        let dup = r#"{"entries":[[0,0,0,0],[0,0,0,1]]}"#;
        assert!(serde_json::from_str::<PartialFn>(dup).is_err());
        let bad_layer = r#"{"entries":[[0,0,2,0]]}"#;
        assert!(serde_json::from_str::<PartialFn>(bad_layer).is_err());
    }
}
