//! Candidate graphs and labelings.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use num_traits::{One, Zero};

use super::{FFormula, Rel};
use crate::markov::MarkovChain;
use crate::rational::{int, Rational};

/// Vertex sets are `u32` bitmasks.
pub const MAX_VERTICES: usize = 16;

/// A guessed graph with a guessed satisfaction set for every subformula.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Candidate {
    pub vertices: usize,
    /// Sorted by `(from, to)`; edge `i` carries variable `xᵢ`.
    pub edges: Vec<(usize, usize)>,
    /// Bit `v` set iff vertex `v` is labelled with the formula. Keys are every
    /// subformula of the formula plus `Atom(a)` for every atom.
    pub labels: BTreeMap<FFormula, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumMode {
    /// Every labeling of atoms and `F`-subformulae, booleans propagated.
    Literal,
    /// Only labelings where each vertex's `F`-labels are realisable by some
    /// value in its forced range: 1 on the body, 0 where the body is
    /// unreachable, `(0,1]` elsewhere.
    Viable,
    /// `Viable`, restricted to graphs where every vertex is reachable from
    /// `v₀` and `v₀` satisfies the formula.
    Rooted,
}

pub(crate) fn full(m: usize) -> u32 {
    if m == 32 {
        u32::MAX
    } else {
        (1u32 << m) - 1
    }
}

fn bit(mask: u32, v: usize) -> bool {
    mask >> v & 1 == 1
}

/// Vertices with a path (possibly empty) into `target`.
pub fn reaching(vertices: usize, edges: &[(usize, usize)], target: u32) -> u32 {
    let mut r = target;
    loop {
        let next = edges.iter().fold(r, |acc, &(u, v)| if bit(r, v) { acc | 1 << u } else { acc });
        if next == r {
            return r & full(vertices);
        }
        r = next;
    }
}

fn forward(edges: &[(usize, usize)], from: usize) -> u32 {
    let mut r = 1u32 << from;
    loop {
        let next = edges.iter().fold(r, |acc, &(u, v)| if bit(r, u) { acc | 1 << v } else { acc });
        if next == r {
            return r;
        }
        r = next;
    }
}

fn eval(f: &FFormula, free: &BTreeMap<FFormula, u32>, all: u32) -> u32 {
    match f {
        FFormula::Atom(_) | FFormula::F(..) => free.get(f).copied().unwrap_or(0),
        FFormula::NegAtom(a) => all & !free.get(&FFormula::Atom(a.clone())).copied().unwrap_or(0),
        FFormula::And(xs) => xs.iter().fold(all, |acc, x| acc & eval(x, free, all)),
        FFormula::Or(xs) => xs.iter().fold(0, |acc, x| acc | eval(x, free, all)),
    }
}

impl Candidate {
    /// Completes the free choices (atoms and `F`-subformulae) by the boolean
    /// labeling rules.
    pub fn from_free(
        phi: &FFormula,
        vertices: usize,
        edges: Vec<(usize, usize)>,
        free: &BTreeMap<FFormula, u32>,
    ) -> Self {
        assert!(vertices <= MAX_VERTICES);
        let all = full(vertices);
        let mut labels: BTreeMap<FFormula, u32> = phi
            .sub()
            .into_iter()
            .map(|f| {
                let m = eval(&f, free, all);
                (f, m)
            })
            .collect();
        for a in phi.atoms() {
            let key = FFormula::Atom(a);
            let m = eval(&key, free, all);
            labels.insert(key, m);
        }
        Candidate { vertices, edges, labels }
    }

    /// The graph of `m` labelled with the true satisfaction sets.
    pub fn induced(m: &MarkovChain, phi: &FFormula) -> Self {
        let mut edges: Vec<(usize, usize)> =
            m.states().flat_map(|s| m.successors(s).iter().map(move |(t, _)| (s, *t))).collect();
        edges.sort();
        let mask = |sat: Vec<bool>| sat.iter().enumerate().fold(0u32, |acc, (v, b)| acc | (*b as u32) << v);
        let mut free = BTreeMap::new();
        for a in phi.atoms() {
            let key = FFormula::Atom(a);
            free.insert(key.clone(), mask(key.sat(m)));
        }
        for f in phi.f_subformulas() {
            free.insert(f.clone(), mask(f.sat(m)));
        }
        Candidate::from_free(phi, m.len(), edges, &free)
    }

    pub fn label(&self, f: &FFormula) -> u32 {
        self.labels.get(f).copied().unwrap_or(0)
    }

    pub fn holds(&self, f: &FFormula, v: usize) -> bool {
        bit(self.label(f), v)
    }

    pub fn vertex_set(&self, f: &FFormula) -> Vec<usize> {
        (0..self.vertices).filter(|&v| self.holds(f, v)).collect()
    }

    pub fn successors(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().enumerate().filter(move |(_, e)| e.0 == v).map(|(i, e)| (i, e.1))
    }

    /// The boolean labeling rules and out-degree at least one.
    pub fn is_well_formed(&self) -> bool {
        let all = full(self.vertices);
        let degrees_ok = (0..self.vertices).all(|v| self.successors(v).next().is_some());
        let rules_ok = self.labels.iter().all(|(f, &m)| match f {
            FFormula::Atom(_) | FFormula::F(..) => m & !all == 0,
            _ => m == eval(f, &self.labels, all),
        });
        degrees_ok && rules_ok
    }
}

/// Calls `f` on every graph with `m` vertices and out-degree at least one,
/// successor sets in lexicographic order of their bitmasks.
fn for_each_graph(
    m: usize,
    rooted: bool,
    f: &mut dyn FnMut(Vec<(usize, usize)>) -> ControlFlow<()>,
) -> ControlFlow<()> {
    let all = full(m);
    let mut succ = alloc::vec![1u32; m];
    loop {
        let edges: Vec<(usize, usize)> = (0..m)
            .flat_map(|u| {
                let mask = succ[u];
                (0..m).filter(move |&v| bit(mask, v)).map(move |v| (u, v))
            })
            .collect();
        if !rooted || forward(&edges, 0) == all {
            f(edges)?;
        }
        let mut i = m;
        loop {
            if i == 0 {
                return ControlFlow::Continue(());
            }
            i -= 1;
            if succ[i] < all {
                succ[i] += 1;
                break;
            }
            succ[i] = 1;
        }
    }
}

/// Advances `idx` (each `idx[i] < len[i]`) lexicographically; false at the end.
fn odometer(idx: &mut [usize], len: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        if idx[i] + 1 < len[i] {
            idx[i] += 1;
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// `F`-subformulae sharing a body, with the label vectors a single value of
/// `y` can produce.
struct Group {
    body: FFormula,
    members: Vec<(FFormula, Rel, Rational)>,
    at_one: Vec<bool>,
    at_zero: Vec<bool>,
    /// Distinct label vectors over `y ∈ (0,1]`, by ascending `y`.
    cells: Vec<Vec<bool>>,
}

impl Group {
    fn labels_at(&self, y: &Rational) -> Vec<bool> {
        self.members.iter().map(|(_, rel, r)| rel.holds(y, r)).collect()
    }
}

fn groups(phi: &FFormula) -> Vec<Group> {
    let mut by_body: BTreeMap<FFormula, Vec<(FFormula, Rel, Rational)>> = BTreeMap::new();
    for f in phi.f_subformulas() {
        if let FFormula::F(b, rel, r) = &f {
            by_body.entry((**b).clone()).or_default().push((f.clone(), *rel, r.clone()));
        }
    }
    let mut out: Vec<Group> = by_body
        .into_iter()
        .map(|(body, members)| {
            let mut points: Vec<Rational> = members.iter().map(|m| m.2.clone()).collect();
            points.push(Rational::zero());
            points.push(Rational::one());
            points.sort();
            points.dedup();
            let mut samples: Vec<Rational> = points.iter().filter(|p| !p.is_zero()).cloned().collect();
            samples.extend(points.windows(2).map(|w| (&w[0] + &w[1]) / int(2)));
            samples.sort();
            let mut g = Group { body, members, at_one: Vec::new(), at_zero: Vec::new(), cells: Vec::new() };
            g.at_one = g.labels_at(&Rational::one());
            g.at_zero = g.labels_at(&Rational::zero());
            for y in &samples {
                let l = g.labels_at(y);
                if !g.cells.contains(&l) {
                    g.cells.push(l);
                }
            }
            g
        })
        .collect();
    // a body's own F-subformulae have strictly smaller bodies
    out.sort_by(|a, b| a.body.size().cmp(&b.body.size()).then_with(|| a.body.cmp(&b.body)));
    out
}

struct Viable<'a> {
    phi: &'a FFormula,
    groups: Vec<Group>,
    rooted: bool,
}

impl Viable<'_> {
    fn descend(
        &self,
        i: usize,
        m: usize,
        edges: &[(usize, usize)],
        free: &mut BTreeMap<FFormula, u32>,
        f: &mut dyn FnMut(Candidate) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let all = full(m);
        if i == self.groups.len() {
            let c = Candidate::from_free(self.phi, m, edges.to_vec(), free);
            let top = c.label(self.phi);
            if top != 0 && (!self.rooted || bit(top, 0)) {
                f(c)?;
            }
            return ControlFlow::Continue(());
        }
        let g = &self.groups[i];
        let target = eval(&g.body, free, all);
        let reach = reaching(m, edges, target);
        let one = core::slice::from_ref(&g.at_one);
        let zero = core::slice::from_ref(&g.at_zero);
        let options: Vec<&[Vec<bool>]> = (0..m)
            .map(|v| {
                if bit(target, v) {
                    one
                } else if !bit(reach, v) {
                    zero
                } else {
                    &g.cells[..]
                }
            })
            .collect();
        let len: Vec<usize> = options.iter().map(|o| o.len()).collect();
        let mut idx = alloc::vec![0usize; m];
        loop {
            for (j, (member, _, _)) in g.members.iter().enumerate() {
                let mask = (0..m).fold(0u32, |acc, v| acc | (options[v][idx[v]][j] as u32) << v);
                free.insert(member.clone(), mask);
            }
            self.descend(i + 1, m, edges, free, f)?;
            if !odometer(&mut idx, &len) {
                break;
            }
        }
        for (member, _, _) in &g.members {
            free.remove(member);
        }
        ControlFlow::Continue(())
    }
}

/// Streams candidates with `1 ≤ m ≤ n` vertices: `m` ascending, then graphs,
/// then labelings, each in lexicographic order.
///
/// # Panics
/// If `n` exceeds [`MAX_VERTICES`].
pub fn for_each_candidate(
    phi: &FFormula,
    n: usize,
    mode: EnumMode,
    mut f: impl FnMut(Candidate) -> ControlFlow<()>,
) -> ControlFlow<()> {
    assert!(n <= MAX_VERTICES, "bound {} above {}", n, MAX_VERTICES);
    let atoms: Vec<FFormula> = phi.atoms().into_iter().map(FFormula::Atom).collect();
    let viable = Viable { phi, groups: groups(phi), rooted: mode == EnumMode::Rooted };
    let mut keys = atoms.clone();
    keys.extend(phi.f_subformulas());
    for m in 1..=n {
        let all = full(m);
        for_each_graph(m, mode == EnumMode::Rooted, &mut |edges| match mode {
            EnumMode::Literal => {
                let len = alloc::vec![all as usize + 1; keys.len()];
                let mut idx = alloc::vec![0usize; keys.len()];
                loop {
                    let free = keys.iter().cloned().zip(idx.iter().map(|&x| x as u32)).collect();
                    let c = Candidate::from_free(phi, m, edges.clone(), &free);
                    if c.label(phi) != 0 {
                        f(c)?;
                    }
                    if !odometer(&mut idx, &len) {
                        return ControlFlow::Continue(());
                    }
                }
            }
            EnumMode::Viable | EnumMode::Rooted => {
                let len = alloc::vec![all as usize + 1; atoms.len()];
                let mut idx = alloc::vec![0usize; atoms.len()];
                loop {
                    let mut free = atoms.iter().cloned().zip(idx.iter().map(|&x| x as u32)).collect();
                    viable.descend(0, m, &edges, &mut free, &mut f)?;
                    if !odometer(&mut idx, &len) {
                        return ControlFlow::Continue(());
                    }
                }
            }
        })?;
    }
    ControlFlow::Continue(())
}

/// Collects [`for_each_candidate`].
pub fn enumerate_candidates(phi: &FFormula, n: usize, mode: EnumMode) -> Vec<Candidate> {
    let mut out = Vec::new();
    let _ = for_each_candidate(phi, n, mode, |c| {
        out.push(c);
        ControlFlow::Continue(())
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::etr::tests::{fa, ff};
    use crate::etr::{encode, f_normal_form, interval_refutation};
    use crate::modelcheck::tests::random_chain;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_atom_single_vertex() {
        let cs = enumerate_candidates(&fa(), 1, EnumMode::Literal);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].edges, alloc::vec![(0, 0)]);
        assert_eq!(cs[0].label(&fa()), 1);
    }

    #[test]
    fn half_eventually_on_a_self_loop() {
        let phi = ff("F>=0.5[a]");
        let cs = enumerate_candidates(&phi, 1, EnumMode::Literal);
        assert!(cs
            .iter()
            .any(|c| c.edges == alloc::vec![(0, 0)] && c.label(&fa()) == 1 && c.label(&phi) == 1));
        assert!(cs.iter().all(|c| c.label(&phi) != 0));
    }

    #[test]
    fn vertex_counts_up_to_the_bound() {
        let cs = enumerate_candidates(&fa(), 2, EnumMode::Literal);
        let mut sizes: Vec<usize> = cs.iter().map(|c| c.vertices).collect();
        sizes.dedup();
        assert_eq!(sizes, alloc::vec![1, 2]);
        // 9 graphs on two vertices, 3 nonempty labelings of a
        assert_eq!(cs.len(), 1 + 9 * 3);
    }

    #[test]
    fn enumeration_is_deterministic_and_well_formed() {
        let phi = ff("F>0.5[a] & !a");
        let a = enumerate_candidates(&phi, 2, EnumMode::Viable);
        assert_eq!(a, enumerate_candidates(&phi, 2, EnumMode::Viable));
        assert!(a.iter().all(|c| c.is_well_formed() && c.label(&phi) != 0));
    }

    #[test]
    fn rooted_is_a_subset_of_viable() {
        let phi = ff("F>0.5[a] & !a");
        let v = enumerate_candidates(&phi, 3, EnumMode::Viable);
        let r = enumerate_candidates(&phi, 3, EnumMode::Rooted);
        assert!(!r.is_empty() && r.len() < v.len());
        assert!(r.iter().all(|c| v.contains(c) && c.holds(&phi, 0)));
    }

    #[test]
    fn induced_candidate_matches_running_chain() {
        let m = crate::markov::tests::running_chain();
        let phi = f_normal_form(&crate::formula::tests::psi());
        let c = Candidate::induced(&m, &phi);
        assert_eq!(c.edges, alloc::vec![(0, 1), (1, 0), (1, 2), (2, 2)]);
        assert_eq!(c.label(&phi), 0b001);
        assert!(c.is_well_formed());
    }

    fn small_formula(rng: &mut impl Rng) -> FFormula {
        loop {
            let f = f_normal_form(&crate::closure::tests::random_formula(rng, 2));
            if f.f_subformulas().len() <= 2 && f.atoms().len() <= 2 {
                return f;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn viable_is_literal_without_interval_refutations(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let phi = small_formula(&mut rng);
            let mut literal: Vec<Candidate> = enumerate_candidates(&phi, 2, EnumMode::Literal)
                .into_iter()
                .filter(|c| interval_refutation(&encode(c, &phi)).is_none())
                .collect();
            let mut viable = enumerate_candidates(&phi, 2, EnumMode::Viable);
            literal.sort();
            viable.sort();
            prop_assert_eq!(literal, viable);
        }

        #[test]
        fn induced_candidates_are_viable(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..4);
            let m = random_chain(&mut rng, n);
            let phi = small_formula(&mut rng);
            let c = Candidate::induced(&m, &phi);
            prop_assume!(c.label(&phi) != 0);
            prop_assert!(c.is_well_formed());
            prop_assert!(interval_refutation(&encode(&c, &phi)).is_none());
            prop_assert!(enumerate_candidates(&phi, n, EnumMode::Viable).contains(&c));
        }
    }
}
