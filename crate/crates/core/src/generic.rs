//! Building one new set `A` by meeting a finite schedule of dense sets in
//! the poset of conditions.
//!
//! A condition is a finite set `w ⊆ ω` such that for all `m < n` in `w`
//! and both layers `i`, some `k` has `ρ_n(m,k,i) = η(m,k,i)`. Conditions are
//! ordered by end-extension, so every element below `max(w)` that is not in
//! `w` stays out of `A` for good.
//!
//! Demands come in two polarities over a Boolean combination `B` of the
//! previously built sets and a probe `ρ`:
//! - `In`: put some `n ∈ B` with `ρ ⊆ ρ_n` into `w`;
//! - `Out`: find `n ∈ B ∖ w` with `ρ ⊆ ρ_n` and push `max(w)` past it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError, Layer, PartialFn, Point, RhoIndex};
use crate::finset::{self, CombinationSpec, Family, FinSet, FinsetError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenericError {
    #[error(transparent)]
    Finset(#[from] FinsetError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("({m},{k}) is outside the eta grid {ma}x{mk}")]
    GridOverflow {
        m: usize,
        k: usize,
        ma: usize,
        mk: usize,
    },
    #[error("no witness below search bound {search_bound}")]
    SearchExhausted { search_bound: u64 },
    #[error("eta: {0}")]
    BadEta(String),
}

/// A total function on the grid `{0..Ma-1} × {0..Mk-1} × {0,1}` with values
/// below `V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eta {
    ma: usize,
    mk: usize,
    v: u64,
    values: Vec<u64>,
}

impl Eta {
    /// `values` is laid out as `[(m * Mk + k) * 2 + i]`.
    pub fn new(ma: usize, mk: usize, v: u64, values: Vec<u64>) -> Result<Self, GenericError> {
        if ma == 0 || mk == 0 || v == 0 {
            return Err(GenericError::BadEta("grid bounds and V must be positive".into()));
        }
        if values.len() != ma * mk * 2 {
            return Err(GenericError::BadEta(format!(
                "expected {} values, got {}",
                ma * mk * 2,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&x| x >= v) {
            return Err(GenericError::BadEta(format!("value {bad} is not below V = {v}")));
        }
        Ok(Eta { ma, mk, v, values })
    }

    pub fn constant(ma: usize, mk: usize, v: u64, value: u64) -> Result<Self, GenericError> {
        Self::new(ma, mk, v, vec![value; ma * mk * 2])
    }

    pub fn random<R: rand::Rng + ?Sized>(
        ma: usize,
        mk: usize,
        v: u64,
        rng: &mut R,
    ) -> Result<Self, GenericError> {
        if v == 0 {
            return Err(GenericError::BadEta("V must be positive".into()));
        }
        let values = (0..ma * mk * 2).map(|_| rng.gen_range(0..v)).collect();
        Self::new(ma, mk, v, values)
    }

    pub fn rows(&self) -> usize {
        self.ma
    }

    pub fn cols(&self) -> usize {
        self.mk
    }

    pub fn bound(&self) -> u64 {
        self.v
    }

    /// `η(m,k,i)`, or `None` off the grid.
    pub fn get(&self, m: usize, k: usize, i: Layer) -> Option<u64> {
        (m < self.ma && k < self.mk).then(|| self.values[(m * self.mk + k) * 2 + i.index()])
    }

    /// The same values on the smaller grid `ma × mk`.
    pub fn restrict(&self, ma: usize, mk: usize) -> Result<Eta, GenericError> {
        if ma > self.ma || mk > self.mk {
            return Err(self.grid_overflow(ma, mk));
        }
        let mut values = Vec::with_capacity(ma * mk * 2);
        for m in 0..ma {
            for k in 0..mk {
                for i in Layer::BOTH {
                    values.push(self.get(m, k, i).expect("on grid"));
                }
            }
        }
        Eta::new(ma, mk, self.v, values)
    }

    fn grid_overflow(&self, m: usize, k: usize) -> GenericError {
        GenericError::GridOverflow {
            m,
            k,
            ma: self.ma,
            mk: self.mk,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EtaJson {
    #[serde(rename = "Ma")]
    ma: usize,
    #[serde(rename = "Mk")]
    mk: usize,
    #[serde(rename = "V")]
    v: u64,
    values: Vec<(usize, usize, u8, u64)>,
}

impl Serialize for Eta {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut values = Vec::with_capacity(self.values.len());
        for m in 0..self.ma {
            for k in 0..self.mk {
                for i in Layer::BOTH {
                    values.push((m, k, i as u8, self.get(m, k, i).expect("on grid")));
                }
            }
        }
        EtaJson {
            ma: self.ma,
            mk: self.mk,
            v: self.v,
            values,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = EtaJson::deserialize(deserializer)?;
        let cells = raw.ma * raw.mk * 2;
        let mut values = vec![None; cells];
        for (m, k, i, v) in raw.values {
            if m >= raw.ma || k >= raw.mk || i > 1 {
                return Err(D::Error::custom(format!("cell ({m},{k},{i}) is off the grid")));
            }
            let slot = &mut values[(m * raw.mk + k) * 2 + i as usize];
            if slot.replace(v).is_some() {
                return Err(D::Error::custom(format!("cell ({m},{k},{i}) given twice")));
            }
        }
        let values = values
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| D::Error::custom("eta must be total on its grid"))?;
        Eta::new(raw.ma, raw.mk, raw.v, values).map_err(D::Error::custom)
    }
}

fn point(m: usize, k: usize, i: Layer) -> Point {
    Point::new(m as u64, k as u64, i)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub ok: bool,
    /// Least failing `(m, n, i)`.
    pub witness: Option<(usize, usize, u8)>,
}

/// Checks the matching requirement for every pair `m < n` of `w`. Only the
/// smaller element of a pair is looked up in `η`, so `max(w)` may lie off
/// the grid.
pub fn is_condition(w: &[usize], eta: &Eta) -> Result<ConditionReport, GenericError> {
    let mut sorted = w.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 2 {
        return Ok(ConditionReport {
            ok: true,
            witness: None,
        });
    }
    if let Some(&m) = sorted[..sorted.len() - 1].iter().find(|&&m| m >= eta.ma) {
        return Err(eta.grid_overflow(m, 0));
    }
    let rhos: Vec<PartialFn> = sorted[1..]
        .iter()
        .map(|&n| codec::rho(RhoIndex(n as u64)))
        .collect();
    for (a, &m) in sorted.iter().enumerate() {
        for (rho_n, &n) in rhos[a..].iter().zip(&sorted[a + 1..]) {
            for i in Layer::BOTH {
                let hit = (0..eta.mk).any(|k| rho_n.get(point(m, k, i)) == eta.get(m, k, i));
                if !hit {
                    return Ok(ConditionReport {
                        ok: false,
                        witness: Some((m, n, i as u8)),
                    });
                }
            }
        }
    }
    Ok(ConditionReport {
        ok: true,
        witness: None,
    })
}

/// The (**) property of a finished set: same predicate as [`is_condition`].
pub fn check_star_star(set: &FinSet, eta: &Eta) -> Result<ConditionReport, GenericError> {
    is_condition(&set.to_vec(), eta)
}

/// A finite condition: increasing elements satisfying [`is_condition`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Condition(Vec<usize>);

impl Condition {
    pub fn new(mut w: Vec<usize>, eta: &Eta) -> Result<Self, GenericError> {
        w.sort_unstable();
        w.dedup();
        let report = is_condition(&w, eta)?;
        if let Some((m, n, _)) = report.witness {
            return Err(GenericError::BadEta(format!(
                "{w:?} is not a condition: pair ({m},{n}) has no match"
            )));
        }
        Ok(Condition(w))
    }

    pub fn elements(&self) -> &[usize] {
        &self.0
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn contains(&self, n: usize) -> bool {
        self.0.binary_search(&n).is_ok()
    }

    fn end_extended(&self, n: usize) -> Condition {
        debug_assert!(self.max().is_none_or(|m| m < n));
        let mut w = self.0.clone();
        w.push(n);
        Condition(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    In,
    Out,
}

/// One dense set to meet: `combo` selects `B` among the prior sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demand {
    pub combo: CombinationSpec,
    pub rho_index: RhoIndex,
    pub polarity: Polarity,
}

/// Every combination of the prior sets up to `depth`, for each of the first
/// `probes` partial functions, In then Out. Probes form the outer loop.
pub fn auto_schedule(prior_len: usize, depth: usize, probes: u64) -> Vec<Demand> {
    let combos: Vec<CombinationSpec> = finset::combinations(prior_len, depth).collect();
    let mut out = Vec::with_capacity(combos.len() * probes as usize * 2);
    for m in 0..probes {
        for combo in &combos {
            for polarity in [Polarity::In, Polarity::Out] {
                out.push(Demand {
                    combo: combo.clone(),
                    rho_index: RhoIndex(m),
                    polarity,
                });
            }
        }
    }
    out
}

/// `ρ` plus, for each `m ∈ u` and layer `i`, the entry
/// `(m, k, i) ↦ η(m, k, i)` at the least `k` with `(m, k, i) ∉ dom(ρ)`.
pub fn matching_requirement(
    u: &Condition,
    rho: &PartialFn,
    eta: &Eta,
) -> Result<PartialFn, GenericError> {
    let mut out = rho.clone();
    for &m in u.elements() {
        for i in Layer::BOTH {
            let k = (0..)
                .find(|&k| !rho.contains_point(point(m, k, i)))
                .expect("finite domain");
            let value = eta.get(m, k, i).ok_or_else(|| eta.grid_overflow(m, k))?;
            out.set(point(m, k, i), value);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extension {
    pub condition: Condition,
    /// The `n` that meets the demand.
    pub witness: usize,
    /// Element appended to the condition, if any.
    pub added: Option<usize>,
}

/// Extends `u` into the dense set named by `demand`.
///
/// `B` is computed over `prior`, whose universe also bounds the search
/// together with `search_bound`.
pub fn extend_to_meet(
    u: &Condition,
    demand: &Demand,
    eta: &Eta,
    prior: &Family,
    search_bound: u64,
) -> Result<Extension, GenericError> {
    let b = finset::boolean_combination(prior, &demand.combo)?;
    let rho = codec::rho(demand.rho_index);
    let exhausted = GenericError::SearchExhausted { search_bound };
    let after_max = u.max().map_or(0, |m| m as u64 + 1);
    match demand.polarity {
        Polarity::In => {
            let required = matching_requirement(u, &rho, eta)?;
            let n = search(&b, &required, after_max, search_bound).ok_or(exhausted)?;
            Ok(Extension {
                condition: u.end_extended(n),
                witness: n,
                added: Some(n),
            })
        }
        Polarity::Out => {
            let target = rho.support()?;
            let mut start = 0;
            let witness = loop {
                let n = codec::find_extension(&b, &target, start, search_bound)
                    .ok_or(exhausted.clone())? as usize;
                if !u.contains(n) {
                    break n;
                }
                start = n as u64 + 1;
            };
            if u.max().is_some_and(|m| m > witness) {
                return Ok(Extension {
                    condition: u.clone(),
                    witness,
                    added: None,
                });
            }
            let required = matching_requirement(u, &PartialFn::new(), eta)?;
            let everything = FinSet::full(prior.universe());
            let n = search(&everything, &required, witness as u64 + 1, search_bound)
                .ok_or(exhausted)?;
            Ok(Extension {
                condition: u.end_extended(n),
                witness,
                added: Some(n),
            })
        }
    }
}

fn search(set: &FinSet, required: &PartialFn, start: u64, search_bound: u64) -> Option<usize> {
    let target = required.support().ok()?;
    codec::find_extension(set, &target, start, search_bound).map(|n| n as usize)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub demand: Demand,
    pub witness: usize,
    pub added: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenericRun {
    pub schedule: Vec<Demand>,
    pub steps: Vec<Step>,
    pub condition: Condition,
    /// `A` as a set over the prior family's universe.
    #[serde(serialize_with = "serialize_set")]
    pub set: FinSet,
    /// Membership below this bound is final.
    pub decided_below: Option<usize>,
}

fn serialize_set<S: serde::Serializer>(set: &FinSet, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(set.iter())
}

#[derive(Debug, Clone, Error)]
#[error("demand {step} of the schedule: {error}")]
pub struct GenericFailure {
    pub step: usize,
    pub error: GenericError,
    pub partial: GenericRun,
}

/// Folds [`extend_to_meet`] over `schedule`, starting from the empty
/// condition.
pub fn build_generic(
    prior: &Family,
    eta: &Eta,
    schedule: &[Demand],
    search_bound: u64,
) -> Result<GenericRun, Box<GenericFailure>> {
    let mut run = GenericRun {
        schedule: schedule.to_vec(),
        steps: Vec::new(),
        condition: Condition::default(),
        set: FinSet::empty(prior.universe()),
        decided_below: None,
    };
    for (j, demand) in schedule.iter().enumerate() {
        match extend_to_meet(&run.condition, demand, eta, prior, search_bound) {
            Ok(ext) => {
                if let Some(n) = ext.added {
                    run.set.insert(n).expect("search stays in the universe");
                }
                run.condition = ext.condition;
                run.decided_below = run.condition.max();
                run.steps.push(Step {
                    demand: demand.clone(),
                    witness: ext.witness,
                    added: ext.added,
                });
            }
            Err(error) => {
                return Err(Box::new(GenericFailure {
                    step: j,
                    error,
                    partial: run,
                }))
            }
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarReport {
    pub ok: bool,
    /// Least failing combination and the probe it leaves unextended.
    pub witness: Option<(CombinationSpec, u64)>,
    pub depth: usize,
}

/// Every Boolean combination of `family` up to `depth` is dense in `Y` at
/// the given bounds.
pub fn check_star(
    family: &Family,
    probe_bound: u64,
    search_bound: u64,
    depth: usize,
) -> Result<StarReport, GenericError> {
    let depth = depth.min(family.len());
    for spec in finset::combinations(family.len(), depth) {
        let b = finset::boolean_combination(family, &spec)?;
        let r = codec::is_dense_in_y(&b, probe_bound, search_bound);
        if let Some(m) = r.unwitnessed {
            return Ok(StarReport {
                ok: false,
                witness: Some((spec, m)),
                depth,
            });
        }
    }
    Ok(StarReport {
        ok: true,
        witness: None,
        depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finset::Universe;

    fn zero_eta() -> Eta {
        Eta::constant(4, 4, 2, 0).unwrap()
    }

    fn universe(n: usize) -> Family {
        Family::empty(Universe::new(n).unwrap())
    }

    fn demand(polarity: Polarity, m: u64) -> Demand {
        Demand {
            combo: CombinationSpec::default(),
            rho_index: RhoIndex(m),
            polarity,
        }
    }

    #[test]
    fn condition_examples() {
        let eta = zero_eta();
        assert!(is_condition(&[], &eta).unwrap().ok);
        assert!(is_condition(&[5], &eta).unwrap().ok);
        assert!(is_condition(&[0, 3], &eta).unwrap().ok);
        let r = is_condition(&[0, 1], &eta).unwrap();
        assert_eq!(r.witness, Some((0, 1, 1)));
        assert!(matches!(
            is_condition(&[4, 9], &eta),
            Err(GenericError::GridOverflow { m: 4, .. })
        ));
    }

    #[test]
    fn star_star_examples() {
        let eta = zero_eta();
        let u = Universe::new(16).unwrap();
        let s = |xs: &[usize]| FinSet::from_elements(u, xs.iter().copied()).unwrap();
        assert!(check_star_star(&s(&[]), &eta).unwrap().ok);
        assert!(check_star_star(&s(&[7]), &eta).unwrap().ok);
        assert!(check_star_star(&s(&[0, 3]), &eta).unwrap().ok);
        assert_eq!(
            check_star_star(&s(&[0, 1]), &eta).unwrap().witness,
            Some((0, 1, 1))
        );
    }

    #[test]
    fn in_demand_from_empty_takes_least_element() {
        let ext = extend_to_meet(
            &Condition::default(),
            &demand(Polarity::In, 0),
            &zero_eta(),
            &universe(64),
            64,
        )
        .unwrap();
        assert_eq!(ext.condition.elements(), &[0]);
    }

    #[test]
    fn in_demand_after_zero_finds_three() {
        let eta = zero_eta();
        let u = Condition::new(vec![0], &eta).unwrap();
        let req = matching_requirement(&u, &PartialFn::new(), &eta).unwrap();
        assert_eq!(codec::rho_index(&req), Ok(RhoIndex(3)));
        let ext = extend_to_meet(&u, &demand(Polarity::In, 0), &eta, &universe(64), 64).unwrap();
        assert_eq!(ext.condition.elements(), &[0, 3]);
    }

    #[test]
    fn out_demand_extends_past_witness() {
        let eta = zero_eta();
        let fam = universe(64);
        let ext = extend_to_meet(&Condition::default(), &demand(Polarity::Out, 0), &eta, &fam, 64)
            .unwrap();
        assert_eq!(ext.witness, 0);
        assert_eq!(ext.condition.elements(), &[1]);

        // witness already decided: nothing to add
        let u = Condition::new(vec![0, 3], &eta).unwrap();
        let ext = extend_to_meet(&u, &demand(Polarity::Out, 0), &eta, &fam, 64).unwrap();
        assert_eq!(ext.witness, 1);
        assert_eq!(ext.added, None);
    }

    #[test]
    fn builder_examples() {
        let eta = zero_eta();
        let fam = universe(1 << 12);
        let run = build_generic(&fam, &eta, &[], 1 << 12).unwrap();
        assert!(run.set.is_empty());

        let twice = [demand(Polarity::In, 0), demand(Polarity::In, 0)];
        let run = build_generic(&fam, &eta, &twice, 1 << 12).unwrap();
        assert_eq!(run.set.to_vec(), vec![0, 3]);
        assert!(check_star_star(&run.set, &eta).unwrap().ok);
    }

    #[test]
    fn third_element_is_out_of_reach() {
        // After {0, 3} the next element must carry entries at (3, k, i),
        // whose index is far beyond 2^20.
        let eta = zero_eta();
        let fam = universe(1 << 20);
        let thrice = [
            demand(Polarity::In, 0),
            demand(Polarity::In, 0),
            demand(Polarity::In, 0),
        ];
        let failure = build_generic(&fam, &eta, &thrice, 1 << 20).unwrap_err();
        assert_eq!(failure.step, 2);
        assert_eq!(
            failure.error,
            GenericError::SearchExhausted {
                search_bound: 1 << 20
            }
        );
        assert_eq!(failure.partial.set.to_vec(), vec![0, 3]);
    }

    #[test]
    fn star_examples() {
        let u = Universe::new(64).unwrap();
        let full = Family::new(u, vec![FinSet::full(u)]).unwrap();
        assert!(check_star(&full, 64, 64, 0).unwrap().ok);
        // the complement of the full set is a depth-1 combination too
        let r = check_star(&full, 64, 64, 1).unwrap();
        assert_eq!(r.witness, Some((CombinationSpec::new(vec![], vec![0]), 0)));
        let zero = Family::new(u, vec![FinSet::from_elements(u, [0]).unwrap()]).unwrap();
        let r = check_star(&zero, 2, 64, 1).unwrap();
        assert_eq!(r.witness, Some((CombinationSpec::new(vec![0], vec![]), 1)));
    }

    #[test]
    fn one_in_demand_per_combination_stalls_after_two() {
        let eta = zero_eta();
        let u = Universe::new(1 << 16).unwrap();
        let prior = finset::bit_family(2, u).unwrap();
        let schedule: Vec<Demand> = (0..2)
            .flat_map(|m| {
                finset::combinations(prior.len(), prior.len()).map(move |combo| Demand {
                    combo,
                    rho_index: RhoIndex(m),
                    polarity: Polarity::In,
                })
            })
            .collect();
        let failure = build_generic(&prior, &eta, &schedule, 1 << 16).unwrap_err();
        assert_eq!(failure.partial.set.len(), 2);
        assert!(check_star_star(&failure.partial.set, &eta).unwrap().ok);
    }

    #[test]
    fn auto_schedule_shape() {
        let s = auto_schedule(2, 2, 3);
        assert_eq!(s.len(), 9 * 3 * 2);
        assert_eq!(s[0], demand(Polarity::In, 0));
        assert_eq!(s[1], demand(Polarity::Out, 0));
        assert_eq!(s[18].rho_index, RhoIndex(1));
    }

    #[test]
    fn eta_json() {
        let eta = Eta::constant(1, 1, 3, 2).unwrap();
        let s = serde_json::to_string(&eta).unwrap();
        assert_eq!(s, r#"{"Ma":1,"Mk":1,"V":3,"values":[[0,0,0,2],[0,0,1,2]]}"#);
        assert_eq!(serde_json::from_str::<Eta>(&s).unwrap(), eta);
        let partial = r#"{"Ma":1,"Mk":1,"V":3,"values":[[0,0,0,2]]}"#;
        assert!(serde_json::from_str::<Eta>(partial).is_err());
        let big = r#"{"Ma":1,"Mk":1,"V":3,"values":[[0,0,0,2],[0,0,1,3]]}"#;
        assert!(serde_json::from_str::<Eta>(big).is_err());
    }
}
