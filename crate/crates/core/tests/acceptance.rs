//! Acceptance criteria 1-8. Each test prints one `criterion N: PASS|FAIL`
//! line before asserting.

mod common;

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use omegalab::codec::{self, Layer, PartialFn, Point, RhoIndex};
use omegalab::diag::{self, BuiltFamily, PipelineConfig, PipelineReport};
use omegalab::extender::{self, AtomShuffle, ExtendError, FamilyMap, PartialInjection, SearchParams};
use omegalab::finset::{self, Family, FinSet, Universe};
use omegalab::generic::{self, GenericError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn pf(entries: &[(u64, u64, u8, u64)]) -> PartialFn {
    PartialFn::from_entries(
        entries
            .iter()
            .map(|&(a, b, i, v)| (Point::new(a, b, Layer::try_from(i as u64).unwrap()), v)),
    )
    .unwrap()
}

#[test]
fn criterion_1_canonical_independence() {
    let start = Instant::now();
    let family = finset::bit_family(8, Universe::new(1 << 14).unwrap()).unwrap();
    let r = finset::is_independent(&family, 16, 8).unwrap();
    let elapsed = start.elapsed();
    let full: Vec<usize> = finset::combinations(8, 8)
        .filter(|s| s.depth() == 8)
        .map(|s| finset::boolean_combination(&family, &s).unwrap().len())
        .collect();
    let ok = r.ok
        && full.len() == 256
        && full.iter().all(|&c| c == 64)
        && elapsed <= Duration::from_secs(10);
    report(
        1,
        ok,
        &format!(
            "{} combinations checked, {} full-depth all of size 64, {:.2}s",
            r.checked,
            full.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_codec_round_trip() {
    let round_trip = (0..100_000u64).all(|m| codec::rho_index(&codec::rho(RhoIndex(m))) == Ok(RhoIndex(m)));
    let spots = codec::rho(RhoIndex(0)).is_empty()
        && codec::rho(RhoIndex(1)) == pf(&[(0, 0, 0, 0)])
        && codec::rho(RhoIndex(3)) == pf(&[(0, 0, 0, 0), (0, 0, 1, 0)])
        && codec::rho(RhoIndex(4)) == pf(&[(0, 0, 0, 1)]);
    report(2, round_trip && spots, "m < 10^5 round trip, spot values rho(0,1,3,4)");
    assert!(round_trip && spots);
}

#[test]
fn criterion_3_pi_exactness() {
    let u = Universe::new(4).unwrap();
    let family = Family::new(
        u,
        vec![
            FinSet::from_elements(u, [0, 1]).unwrap(),
            FinSet::from_elements(u, [2, 3]).unwrap(),
        ],
    )
    .unwrap();
    let f = PartialInjection::new(u, []).unwrap();
    let g = FamilyMap::new(2, [(0, 1), (1, 0)]).unwrap();
    let (_, sizes) = extender::shuffle_sizes(&f, &g, &family).unwrap();
    let pi = extender::build_pi(&f, &g, &family, &AtomShuffle::identity(&sizes)).unwrap();
    let swap_ok = pi.as_slice() == [2, 3, 0, 1];

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut exceptions = 0;
    for _ in 0..1000 {
        let inst = common::random_instance(&mut rng);
        assert!(inst.family.universe().size() <= 256);
        let (_, sizes) = extender::shuffle_sizes(&inst.f, &inst.g, &inst.family).unwrap();
        let c = AtomShuffle::random(&sizes, &mut rng);
        let pi = extender::build_pi(&inst.f, &inst.g, &inst.family, &c).unwrap();
        let extends_f = inst.f.iter().all(|(x, y)| pi.apply(x) == y);
        let maps_sets = inst
            .g
            .iter()
            .all(|(i, gi)| pi.image(&inst.family.sets()[i]) == inst.family.sets()[gi]);
        if !(extends_f && maps_sets) {
            exceptions += 1;
        }
    }
    let ok = swap_ok && exceptions == 0;
    report(
        3,
        ok,
        &format!("swap instance {:?}, {exceptions} exceptions in 1000 random instances", pi.as_slice()),
    );
    assert!(ok);
}

fn generic_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        k: 4,
        n: 1 << 20,
        t: 4,
        d: 4,
        ma: 16,
        mk: 16,
        v: 4,
        q: 4,
        search_bound: Some(1 << 20),
        probe_bound: None,
        samples: 200,
        targeted_samples: 200,
        match_threshold: 0,
        seed,
        zero_eta: false,
    }
}

const SEED: u64 = 20240501;

fn built() -> &'static BuiltFamily {
    static BUILT: OnceLock<BuiltFamily> = OnceLock::new();
    BUILT.get_or_init(|| diag::build_family(&generic_config(SEED)).unwrap())
}

fn pipeline() -> &'static (PipelineReport, String) {
    static RUN: OnceLock<(PipelineReport, String)> = OnceLock::new();
    RUN.get_or_init(|| {
        let r = diag::run_pipeline(&generic_config(SEED)).unwrap();
        let json = r.to_json();
        (r, json)
    })
}

#[test]
fn criterion_4_generic_construction() {
    let b = built();
    let exhausted: Vec<String> = b
        .alphas
        .iter()
        .filter_map(|a| a.error.as_ref().map(|e| format!("A{}: {e}", a.index)))
        .collect();
    let star_star = b
        .family
        .sets()
        .iter()
        .zip(&b.etas)
        .all(|(a, eta)| generic::check_star_star(a, eta).unwrap().ok);
    let indep = finset::is_independent(&b.family, 4, 4).unwrap();
    let sizes: Vec<usize> = b.family.sets().iter().map(FinSet::len).collect();
    let ok = exhausted.is_empty() && star_star && indep.ok;
    report(
        4,
        ok,
        &format!(
            "sizes {sizes:?}, star-star {star_star}, independent {}, stopped early: [{}]",
            indep.ok,
            exhausted.join("; ")
        ),
    );
    assert!(ok, "builds stop after two elements: see the decisions ledger");
}

#[test]
fn criterion_5_theorem_shadow() {
    let (r, _) = pipeline();
    let s = &r.summary;
    let ok = s.samples >= 200 && s.violations == 0 && s.precondition_unmet == 0;
    report(
        5,
        ok,
        &format!(
            "{} permutations, {} pairs checked, {} violations, on the partial families of criterion 4",
            s.samples, s.pairs_checked, s.violations
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_density_claim() {
    let b = built();
    let claim = diag::density_claim(b, 4, 16, 1 << 20).unwrap();
    let ok = claim.exhausted == 0;
    report(
        6,
        ok,
        &format!("{} of {} In-demands found no witness", claim.exhausted, claim.attempted),
    );
    assert!(ok, "conditions with two elements cannot be extended below 2^20");
}

#[test]
fn criterion_7_homogenization_step() {
    let family = finset::bit_family(3, Universe::new(1 << 12).unwrap()).unwrap();
    let f = PartialInjection::new(family.universe(), []).unwrap();
    let g = FamilyMap::new(3, [(0, 1), (1, 0)]).unwrap();
    let mut successes = 0;
    let mut bad_failures = 0;
    let mut unverified = 0;
    for seed in 0..20 {
        let params = SearchParams {
            threshold: 8,
            depth: 4,
            radius: 2,
            budget: 10_000,
            seed,
        };
        match extender::find_good_c(&f, &g, &family, &params) {
            Ok(good) => {
                successes += 1;
                let depth = 4.min(good.closure.len());
                let indep = finset::is_independent(&good.closure, 8, depth).unwrap().ok;
                if !(indep && extender::satisfies_demand(&good.pi, &f, &g, &family)) {
                    unverified += 1;
                }
            }
            Err(ExtendError::BudgetExhausted { .. }) => {}
            Err(_) => bad_failures += 1,
        }
    }
    let ok = successes >= 18 && bad_failures == 0 && unverified == 0;
    report(
        7,
        ok,
        &format!("{successes}/20 succeeded, {unverified} failed re-verification, {bad_failures} non-budget failures"),
    );
    assert!(ok);
}

#[test]
fn criterion_8_determinism() {
    let (_, first) = pipeline();
    let again = diag::run_pipeline(&generic_config(SEED)).unwrap().to_json();
    let ok = *first == again;
    report(8, ok, &format!("two runs, {} bytes each", first.len()));
    assert!(ok);
}

#[test]
fn third_element_needs_huge_index() {
    // the index of the least function carrying the matching entries for
    // {0, 3} is far beyond the search bound
    let eta = generic::Eta::constant(16, 16, 4, 0).unwrap();
    let u = generic::Condition::new(vec![0, 3], &eta).unwrap();
    let req = generic::matching_requirement(&u, &PartialFn::new(), &eta).unwrap();
    match codec::rho_index(&req) {
        Ok(index) => assert!(index.0 > 1 << 30, "{index:?}"),
        Err(e) => assert_eq!(e, codec::CodecError::IndexOverflow),
    }
    let prior = Family::empty(Universe::new(1 << 20).unwrap());
    let demand = generic::Demand {
        combo: Default::default(),
        rho_index: RhoIndex(0),
        polarity: generic::Polarity::In,
    };
    assert!(matches!(
        generic::extend_to_meet(&u, &demand, &eta, &prior, 1 << 20),
        Err(GenericError::SearchExhausted { .. })
    ));
}
