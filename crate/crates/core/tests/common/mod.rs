use omegalab::extender::{FamilyMap, PartialInjection};
use omegalab::finset::{Family, FinSet, Universe};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A family with a permutation `g` of some of its indices and a compatible
/// partial injection `f`, such that `g` is realised by some permutation.
pub struct Instance {
    pub family: Family,
    pub f: PartialInjection,
    pub g: FamilyMap,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let k = rng.gen_range(1..=5usize);
    let mut indices: Vec<usize> = (0..k).collect();
    indices.shuffle(rng);
    let r = rng.gen_range(0..=k.min(4));
    let mut dom: Vec<usize> = indices[..r].to_vec();
    dom.sort_unstable();
    let mut image = dom.clone();
    image.shuffle(rng);
    let g_pairs: Vec<(usize, usize)> = dom.iter().copied().zip(image.iter().copied()).collect();

    // g acts on signatures over dom: bit j of s goes to the position of g(dom[j])
    let act = |s: usize| -> usize {
        (0..r)
            .filter(|&j| s >> j & 1 == 1)
            .map(|j| 1 << dom.iter().position(|&x| x == image[j]).unwrap())
            .sum()
    };
    // equal multiplicities along each orbit of the action
    let mut count = vec![None; 1 << r];
    for s in 0..1usize << r {
        if count[s].is_none() {
            let c = rng.gen_range(0..=12usize);
            let mut t = s;
            while count[t].is_none() {
                count[t] = Some(c);
                t = act(t);
            }
        }
    }
    let mut signatures: Vec<usize> = (0..1usize << r)
        .flat_map(|s| std::iter::repeat_n(s, count[s].unwrap()))
        .collect();
    if signatures.is_empty() {
        signatures.push(0);
    }
    signatures.shuffle(rng);
    let n = signatures.len();
    let u = Universe::new(n).unwrap();

    let mut sets = vec![FinSet::empty(u); k];
    for (j, &idx) in dom.iter().enumerate() {
        sets[idx] = FinSet::from_predicate(u, |x| signatures[x] >> j & 1 == 1);
    }
    for idx in indices[r..].iter() {
        sets[*idx] = FinSet::from_predicate(u, |_| false);
        for x in 0..n {
            if rng.gen_bool(0.5) {
                sets[*idx].insert(x).unwrap();
            }
        }
    }
    let family = Family::new(u, sets).unwrap();

    // f sends some points of signature s to fresh points of signature act(s)
    let mut free_targets: Vec<Vec<usize>> = vec![Vec::new(); 1 << r];
    for (x, &s) in signatures.iter().enumerate() {
        free_targets[s].push(x);
    }
    for v in &mut free_targets {
        v.shuffle(rng);
    }
    let mut f_pairs = Vec::new();
    let mut sources: Vec<usize> = (0..n).collect();
    sources.shuffle(rng);
    for &x in sources.iter().take(rng.gen_range(0..=n.min(8))) {
        if let Some(y) = free_targets[act(signatures[x])].pop() {
            f_pairs.push((x, y));
        }
    }
    Instance {
        f: PartialInjection::new(u, f_pairs).unwrap(),
        g: FamilyMap::new(k, g_pairs).unwrap(),
        family,
    }
}
