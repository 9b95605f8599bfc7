//! Exhaustive integral solver and generators for the adversarial families.
//!
//! The solver works directly on (giver, receiver, item) triples of the
//! instance, without going through the graph construction, so it can serve
//! as an independent check of the graph and LP code.

use crate::model::{
    check_transfers, evaluate_allocation, AgentId, AgentSpec, Allocation, BarterInstance,
    FairnessGroup, InvalidTransfer, ItemId, ItemSpec, Transfer, TransferWeight,
};
use crate::par::map_indexed;
use crate::rational::{format_rational, int, ratio, Rational};
use num::{BigInt, Integer, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

pub const DEFAULT_EDGE_LIMIT: u32 = 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    /// Largest utility of a barter-feasible integral exchange; the empty
    /// exchange counts, so this is at least zero.
    pub best_utility: Rational,
    pub best_allocation: Allocation,
    pub has_nonempty_balanced: bool,
    /// Complete assignments that reached the feasibility test.
    pub enumerated_count: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("search space of 2^{bits:.1} assignments exceeds the limit 2^{limit}")]
    TooLarge { bits: f64, limit: u32 },
    #[error("instance values need more than 127 bits once scaled to integers")]
    Overflow,
    #[error(transparent)]
    Invalid(#[from] crate::model::ValidationError),
}

#[derive(Clone, Copy, Debug)]
pub struct BruteForceOptions {
    pub edge_limit: u32,
    /// Cut branches whose agents can no longer balance. Exact: never skips
    /// a feasible assignment.
    pub prune: bool,
    pub parallel: bool,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions {
            edge_limit: DEFAULT_EDGE_LIMIT,
            prune: true,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug)]
struct Triple {
    giver: usize,
    receiver: usize,
    item: ItemId,
    upper: u32,
    value: i128,
    weight: i128,
    give_slot: usize,
    wish_slot: usize,
}

struct Problem {
    triples: Vec<Triple>,
    agents: usize,
    give_cap: Vec<u32>,
    wish_cap: Vec<u32>,
    /// `gain[k][i]`: most that triples `k..` can still add to agent i's net.
    gain: Vec<Vec<i128>>,
    /// `loss[k][i]`: most that triples `k..` can still subtract.
    loss: Vec<Vec<i128>>,
    weight_scale: BigInt,
    prune: bool,
}

fn lcm_of_denominators<'a>(values: impl Iterator<Item = &'a Rational>) -> BigInt {
    values.fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

fn scaled(v: &Rational, scale: &BigInt) -> Result<i128, OracleError> {
    (v * Rational::from_integer(scale.clone()))
        .to_integer()
        .to_i128()
        .ok_or(OracleError::Overflow)
}

impl Problem {
    fn new(instance: &BarterInstance, prune: bool) -> Result<Self, OracleError> {
        instance.validate()?;
        let agents: Vec<&AgentSpec> = {
            let mut a: Vec<&AgentSpec> = instance.agents.iter().collect();
            a.sort_by(|x, y| x.id.cmp(&y.id));
            a
        };
        let value_scale = lcm_of_denominators(instance.items.iter().map(|i| &i.value));
        let mut give_slots: BTreeMap<(usize, ItemId), usize> = BTreeMap::new();
        let mut wish_slots: BTreeMap<(usize, ItemId), usize> = BTreeMap::new();
        let (mut give_cap, mut wish_cap) = (Vec::new(), Vec::new());
        let mut raw = Vec::new();
        for (g, giver) in agents.iter().enumerate() {
            for (r, receiver) in agents.iter().enumerate() {
                if g == r {
                    continue;
                }
                for (item, &have) in &giver.have {
                    let Some(&want) = receiver.wish.get(item) else {
                        continue;
                    };
                    let give_slot = *give_slots.entry((g, item.clone())).or_insert_with(|| {
                        give_cap.push(have);
                        give_cap.len() - 1
                    });
                    let wish_slot = *wish_slots.entry((r, item.clone())).or_insert_with(|| {
                        wish_cap.push(want);
                        wish_cap.len() - 1
                    });
                    let w = instance.weight(&giver.id, &receiver.id, item);
                    raw.push((g, r, item.clone(), have.min(want), give_slot, wish_slot, w));
                }
            }
        }
        let weight_scale = lcm_of_denominators(raw.iter().map(|t| &t.6));
        let mut triples = Vec::with_capacity(raw.len());
        for (giver, receiver, item, upper, give_slot, wish_slot, w) in raw {
            let value = scaled(instance.item_value(&item).expect("validated"), &value_scale)?;
            triples.push(Triple {
                giver,
                receiver,
                item,
                upper,
                value,
                weight: scaled(&w, &weight_scale)?,
                give_slot,
                wish_slot,
            });
        }
        let n = agents.len();
        let mut gain = vec![vec![0i128; n]; triples.len() + 1];
        let mut loss = vec![vec![0i128; n]; triples.len() + 1];
        for k in (0..triples.len()).rev() {
            let t = &triples[k];
            gain[k] = gain[k + 1].clone();
            loss[k] = loss[k + 1].clone();
            let most = t.value * i128::from(t.upper);
            gain[k][t.giver] += most;
            loss[k][t.receiver] += most;
        }
        Ok(Problem {
            triples,
            agents: n,
            give_cap,
            wish_cap,
            gain,
            loss,
            weight_scale,
            prune,
        })
    }

    fn log2_size(&self) -> f64 {
        self.triples
            .iter()
            .map(|t| f64::from(t.upper + 1).log2())
            .sum()
    }
}

#[derive(Clone)]
struct Search<'p> {
    p: &'p Problem,
    counts: Vec<u32>,
    give_used: Vec<u32>,
    wish_used: Vec<u32>,
    net: Vec<i128>,
    utility: i128,
}

#[derive(Default)]
struct Found {
    best: Option<(i128, Vec<u32>)>,
    nonempty_balanced: bool,
    enumerated: u64,
}

impl Found {
    fn absorb(&mut self, other: Found) {
        if let Some((u, c)) = other.best {
            if self.best.as_ref().is_none_or(|(b, _)| u > *b) {
                self.best = Some((u, c));
            }
        }
        self.nonempty_balanced |= other.nonempty_balanced;
        self.enumerated += other.enumerated;
    }
}

impl<'p> Search<'p> {
    fn new(p: &'p Problem) -> Self {
        Search {
            p,
            counts: vec![0; p.triples.len()],
            give_used: vec![0; p.give_cap.len()],
            wish_used: vec![0; p.wish_cap.len()],
            net: vec![0; p.agents],
            utility: 0,
        }
    }

    /// Sets triple `k` to `c` (from zero); returns false when the partial
    /// assignment is dead.
    fn set(&mut self, k: usize, c: u32) -> bool {
        let t = &self.p.triples[k];
        self.counts[k] = c;
        self.give_used[t.give_slot] += c;
        self.wish_used[t.wish_slot] += c;
        let moved = t.value * i128::from(c);
        self.net[t.giver] += moved;
        self.net[t.receiver] -= moved;
        self.utility += t.weight * i128::from(c);
        if !self.p.prune {
            return true;
        }
        if self.give_used[t.give_slot] > self.p.give_cap[t.give_slot]
            || self.wish_used[t.wish_slot] > self.p.wish_cap[t.wish_slot]
        {
            return false;
        }
        let (gain, loss) = (&self.p.gain[k + 1], &self.p.loss[k + 1]);
        [t.giver, t.receiver]
            .iter()
            .all(|&i| self.net[i] + gain[i] >= 0 && self.net[i] - loss[i] <= 0)
    }

    fn unset(&mut self, k: usize) {
        let t = &self.p.triples[k];
        let c = self.counts[k];
        self.counts[k] = 0;
        self.give_used[t.give_slot] -= c;
        self.wish_used[t.wish_slot] -= c;
        let moved = t.value * i128::from(c);
        self.net[t.giver] -= moved;
        self.net[t.receiver] += moved;
        self.utility -= t.weight * i128::from(c);
    }

    fn leaf(&self, found: &mut Found) {
        found.enumerated += 1;
        let caps_ok = self
            .give_used
            .iter()
            .zip(&self.p.give_cap)
            .chain(self.wish_used.iter().zip(&self.p.wish_cap))
            .all(|(u, c)| u <= c);
        if !caps_ok || self.net.iter().any(|&d| d != 0) {
            return;
        }
        if self.counts.iter().any(|&c| c > 0) {
            found.nonempty_balanced = true;
        }
        if found.best.as_ref().is_none_or(|(b, _)| self.utility > *b) {
            found.best = Some((self.utility, self.counts.clone()));
        }
    }

    fn descend(&mut self, k: usize, found: &mut Found) {
        if k == self.p.triples.len() {
            self.leaf(found);
            return;
        }
        for c in 0..=self.p.triples[k].upper {
            if self.set(k, c) {
                self.descend(k + 1, found);
            }
            self.unset(k);
        }
    }
}

pub fn brute_force(instance: &BarterInstance) -> Result<OracleResult, OracleError> {
    brute_force_with(instance, BruteForceOptions::default())
}

pub fn brute_force_with(
    instance: &BarterInstance,
    options: BruteForceOptions,
) -> Result<OracleResult, OracleError> {
    let problem = Problem::new(instance, options.prune)?;
    let bits = problem.log2_size();
    if bits > f64::from(options.edge_limit) + 1e-9 {
        return Err(OracleError::TooLarge {
            bits,
            limit: options.edge_limit,
        });
    }
    // Split on a prefix of triples; each prefix assignment is searched
    // independently and merged in lexicographic order, which reproduces the
    // sequential search exactly.
    let mut depth = 0;
    let mut prefixes: Vec<Vec<u32>> = vec![Vec::new()];
    while depth < problem.triples.len() && prefixes.len() < 256 {
        let upper = problem.triples[depth].upper;
        prefixes = prefixes
            .into_iter()
            .flat_map(|p| {
                (0..=upper).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
        depth += 1;
    }
    let parts = map_indexed(prefixes.len(), options.parallel, |i| {
        let mut search = Search::new(&problem);
        let mut found = Found::default();
        let alive = prefixes[i]
            .iter()
            .enumerate()
            .all(|(k, &c)| search.set(k, c));
        if alive {
            search.descend(depth, &mut found);
        }
        found
    });
    let mut found = Found::default();
    for part in parts {
        found.absorb(part);
    }
    let (utility, counts) = found.best.unwrap_or((0, vec![0; problem.triples.len()]));
    let agent_ids: Vec<AgentId> = {
        let mut ids: Vec<AgentId> = instance.agents.iter().map(|a| a.id.clone()).collect();
        ids.sort();
        ids
    };
    let transfers = problem
        .triples
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(t, &c)| Transfer {
            giver: agent_ids[t.giver].clone(),
            receiver: agent_ids[t.receiver].clone(),
            item: t.item.clone(),
            count: c,
        });
    Ok(OracleResult {
        best_utility: Rational::new(BigInt::from(utility), problem.weight_scale.clone()),
        best_allocation: Allocation::new(transfers),
        has_nonempty_balanced: found.nonempty_balanced,
        enumerated_count: found.enumerated,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoundedViolation {
    #[error(transparent)]
    Transfer(#[from] InvalidTransfer),
    #[error("agent `{agent}` has net loss {net}, not below its largest value {bound}")]
    NetBound {
        agent: AgentId,
        net: String,
        bound: String,
    },
}

/// Accepts an integral exchange that respects every capacity and membership
/// rule and leaves each agent's net loss strictly below its largest item
/// value, which is what a rounded LP solution guarantees.
pub fn check_rounded(
    instance: &BarterInstance,
    allocation: &Allocation,
) -> Result<(), RoundedViolation> {
    check_transfers(instance, allocation)?;
    let report = evaluate_allocation(instance, allocation)?;
    for (agent, v) in &report.per_agent {
        let bound = instance.max_value_of(agent);
        if !v.net.is_zero() && v.net.abs() >= bound {
            return Err(RoundedViolation::NetBound {
                agent: agent.clone(),
                net: format_rational(&v.net),
                bound: format_rational(&bound),
            });
        }
    }
    Ok(())
}

/// Exact barter feasibility: valid transfers and every net value zero.
pub fn is_barter_feasible(instance: &BarterInstance, allocation: &Allocation) -> bool {
    evaluate_allocation(instance, allocation).is_ok_and(|r| r.is_balanced())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("set sums to {0}, which is odd")]
    OddSum(u64),
    #[error("set is empty or contains zero")]
    NonPositive,
    #[error("density must lie in (0, 1], got {0}")]
    Density(f64),
    #[error("{0} range is empty or starts at zero")]
    Range(&'static str),
    #[error("need at least one agent and one item")]
    Size,
}

fn items_with(values: impl IntoIterator<Item = (String, Rational)>) -> Vec<ItemSpec> {
    values
        .into_iter()
        .map(|(id, value)| ItemSpec {
            id: ItemId(id),
            value,
        })
        .collect()
}

fn agent(id: &str, have: &[&str], wish: &[&str]) -> AgentSpec {
    let caps = |list: &[&str]| list.iter().map(|&i| (ItemId::from(i), 1)).collect();
    AgentSpec {
        id: id.into(),
        have: caps(have),
        wish: caps(wish),
    }
}

/// Two agents: one owns items valued by the set, the other owns a single
/// item worth half the total and wants all of the first agent's items.
pub fn partition_to_bsv(set: &[u64]) -> Result<BarterInstance, GenError> {
    if set.is_empty() || set.contains(&0) {
        return Err(GenError::NonPositive);
    }
    let total: u64 = set.iter().sum();
    if total % 2 == 1 {
        return Err(GenError::OddSum(total));
    }
    let n = set.len();
    let names: Vec<String> = (1..=n + 1).map(|k| format!("i{k}")).collect();
    let mut values: Vec<(String, Rational)> = set
        .iter()
        .zip(&names)
        .map(|(&a, name)| (name.clone(), Rational::from_integer(BigInt::from(a))))
        .collect();
    values.push((
        names[n].clone(),
        Rational::from_integer(BigInt::from(total / 2)),
    ));
    let small: Vec<&str> = names[..n].iter().map(String::as_str).collect();
    let big = [names[n].as_str()];
    Ok(BarterInstance {
        items: items_with(values),
        agents: vec![agent("1", &small, &big), agent("2", &big, &small)],
        weights: TransferWeight::ItemValue,
        fairness: Vec::new(),
    })
}

/// Independent subset-sum decision by a reachable-sums bitset.
pub fn has_equal_partition(set: &[u64]) -> bool {
    let total: u64 = set.iter().sum();
    if total % 2 == 1 {
        return false;
    }
    let target = (total / 2) as usize;
    let mut reachable = vec![false; target + 1];
    reachable[0] = true;
    for &a in set {
        let a = a as usize;
        for s in (a..=target).rev() {
            reachable[s] |= reachable[s - a];
        }
    }
    reachable[target]
}

/// Two agents swapping a unit-value item for one worth `1/n`.
pub fn gap_family(n: u32) -> BarterInstance {
    assert!(n >= 1, "gap family needs n >= 1");
    BarterInstance {
        items: items_with([
            ("j1".to_string(), int(1)),
            ("j2".to_string(), ratio(1, i64::from(n))),
        ]),
        agents: vec![agent("1", &["j1"], &["j2"]), agent("2", &["j2"], &["j1"])],
        weights: TransferWeight::ItemValue,
        fairness: Vec::new(),
    }
}

/// Two agents, items 1 and 2 worth 10 and items 3 and 4 worth 20, unit
/// weights: plain dependent rounding can leave agent 2 twenty short.
pub fn gkps_worst_case() -> BarterInstance {
    BarterInstance {
        items: items_with([
            ("1".to_string(), int(10)),
            ("2".to_string(), int(10)),
            ("3".to_string(), int(20)),
            ("4".to_string(), int(20)),
        ]),
        agents: vec![
            agent("1", &["3", "4"], &["1", "2"]),
            agent("2", &["1", "2"], &["3", "4"]),
        ],
        weights: TransferWeight::Unit,
        fairness: Vec::new(),
    }
}

/// Three agents over items a (worth 100), b, c and d (worth 1).
pub fn figure_one() -> BarterInstance {
    BarterInstance {
        items: items_with([
            ("a".to_string(), int(100)),
            ("b".to_string(), int(1)),
            ("c".to_string(), int(1)),
            ("d".to_string(), int(1)),
        ]),
        agents: vec![
            agent("1", &["a", "b"], &["c", "d"]),
            agent("2", &["c"], &["a", "d"]),
            agent("3", &["d"], &["b", "c"]),
        ],
        weights: TransferWeight::Unit,
        fairness: Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomSpec {
    pub agents: usize,
    pub items: usize,
    /// Chance that a given agent lists a given item, separately for the
    /// have-list and the wish-list.
    pub density: f64,
    /// Inclusive range of integer item values.
    pub values: (u32, u32),
    /// Inclusive range of per-listing capacities.
    pub caps: (u32, u32),
    pub weights: RandomWeights,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RandomWeights {
    ItemValue,
    Unit,
    /// Independent integer weight in `1..=10` per possible transfer.
    Explicit,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            agents: 3,
            items: 4,
            density: 0.5,
            values: (1, 5),
            caps: (1, 1),
            weights: RandomWeights::ItemValue,
        }
    }
}

/// Reproducible random instance; every output passes validation.
pub fn random_instance(spec: &RandomSpec, seed: u64) -> Result<BarterInstance, GenError> {
    if spec.agents == 0 || spec.items == 0 {
        return Err(GenError::Size);
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(GenError::Density(spec.density));
    }
    if spec.values.0 == 0 || spec.values.0 > spec.values.1 {
        return Err(GenError::Range("value"));
    }
    if spec.caps.0 == 0 || spec.caps.0 > spec.caps.1 {
        return Err(GenError::Range("capacity"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<ItemSpec> = (1..=spec.items)
        .map(|k| ItemSpec {
            id: ItemId(format!("j{k}")),
            value: int(i64::from(rng.gen_range(spec.values.0..=spec.values.1))),
        })
        .collect();
    let agents: Vec<AgentSpec> = (1..=spec.agents)
        .map(|k| {
            let mut have = BTreeMap::new();
            let mut wish = BTreeMap::new();
            for item in &items {
                if rng.gen_bool(spec.density) {
                    have.insert(item.id.clone(), rng.gen_range(spec.caps.0..=spec.caps.1));
                }
                if rng.gen_bool(spec.density) {
                    wish.insert(item.id.clone(), rng.gen_range(spec.caps.0..=spec.caps.1));
                }
            }
            AgentSpec {
                id: AgentId(format!("a{k}")),
                have,
                wish,
            }
        })
        .collect();
    let weights = match spec.weights {
        RandomWeights::ItemValue => TransferWeight::ItemValue,
        RandomWeights::Unit => TransferWeight::Unit,
        RandomWeights::Explicit => {
            let mut map = BTreeMap::new();
            for g in &agents {
                for r in &agents {
                    if g.id == r.id {
                        continue;
                    }
                    for item in g.have.keys().filter(|i| r.wish.contains_key(*i)) {
                        let w = int(rng.gen_range(1..=10));
                        map.insert((g.id.clone(), r.id.clone(), item.clone()), w);
                    }
                }
            }
            TransferWeight::Explicit(map)
        }
    };
    let instance = BarterInstance {
        items,
        agents,
        weights,
        fairness: Vec::<FairnessGroup>::new(),
    };
    debug_assert!(instance.validate().is_ok());
    Ok(instance)
}

/// Number of possible (giver, receiver, item) transfers of an instance.
pub fn transfer_count(instance: &BarterInstance) -> usize {
    instance
        .agents
        .iter()
        .map(|g| {
            instance
                .agents
                .iter()
                .filter(|r| r.id != g.id)
                .map(|r| g.have.keys().filter(|i| r.wish.contains_key(*i)).count())
                .sum::<usize>()
        })
        .sum()
}
