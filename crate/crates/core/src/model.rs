//! Problem instances, allocations and their net-value semantics.

use crate::rational::{format_rational, Rational};
use num::{Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub String);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub String);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_string())
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        ItemId(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemSpec {
    pub id: ItemId,
    pub value: Rational,
}

/// An agent's have-list and wish-list with copy counts. An item missing from
/// a map has capacity zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentSpec {
    pub id: AgentId,
    pub have: BTreeMap<ItemId, u32>,
    pub wish: BTreeMap<ItemId, u32>,
}

/// How much utility a single transferred copy is worth.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum TransferWeight {
    /// `w(giver, receiver, item) = value(item)`: maximize value received.
    #[default]
    ItemValue,
    /// Every transfer counts 1: maximize the number of copies moved.
    Unit,
    /// Per-triple weights. Triples absent from the map fall back to the item value.
    Explicit(BTreeMap<(AgentId, AgentId, ItemId), Rational>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FairnessGroup {
    pub agents: BTreeSet<AgentId>,
    /// Minimum expected value received by the group as a whole.
    pub floor: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BarterInstance {
    pub items: Vec<ItemSpec>,
    pub agents: Vec<AgentSpec>,
    pub weights: TransferWeight,
    pub fairness: Vec<FairnessGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("item `{item}` has non-positive value {value}")]
    NonPositiveValue { item: ItemId, value: String },
    #[error("duplicate item id `{0}`")]
    DuplicateItem(ItemId),
    #[error("duplicate agent id `{0}`")]
    DuplicateAgent(AgentId),
    #[error("agent `{agent}` lists unknown item `{item}` in its {list} list")]
    DanglingItem {
        agent: AgentId,
        item: ItemId,
        list: &'static str,
    },
    #[error("agent `{agent}` lists item `{item}` with zero capacity")]
    ZeroCapacity { agent: AgentId, item: ItemId },
    #[error("fairness group {group} names unknown agent `{agent}`")]
    UnknownFairnessAgent { group: usize, agent: AgentId },
    #[error("fairness group {group} has negative floor {floor}")]
    NegativeFloor { group: usize, floor: String },
    #[error("explicit weight for ({giver}, {receiver}, {item}) does not match a have/wish pair")]
    WeightOutsideLists {
        giver: AgentId,
        receiver: AgentId,
        item: ItemId,
    },
}

impl BarterInstance {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut items = BTreeSet::new();
        for item in &self.items {
            if !items.insert(&item.id) {
                return Err(ValidationError::DuplicateItem(item.id.clone()));
            }
            if !item.value.is_positive() {
                return Err(ValidationError::NonPositiveValue {
                    item: item.id.clone(),
                    value: format_rational(&item.value),
                });
            }
        }
        let mut agents = BTreeSet::new();
        for agent in &self.agents {
            if !agents.insert(&agent.id) {
                return Err(ValidationError::DuplicateAgent(agent.id.clone()));
            }
            for (list, map) in [("have", &agent.have), ("wish", &agent.wish)] {
                for (item, cap) in map {
                    if !items.contains(item) {
                        return Err(ValidationError::DanglingItem {
                            agent: agent.id.clone(),
                            item: item.clone(),
                            list,
                        });
                    }
                    if *cap == 0 {
                        return Err(ValidationError::ZeroCapacity {
                            agent: agent.id.clone(),
                            item: item.clone(),
                        });
                    }
                }
            }
        }
        for (group, g) in self.fairness.iter().enumerate() {
            if let Some(agent) = g.agents.iter().find(|a| !agents.contains(a)) {
                return Err(ValidationError::UnknownFairnessAgent {
                    group,
                    agent: agent.clone(),
                });
            }
            if g.floor.is_negative() {
                return Err(ValidationError::NegativeFloor {
                    group,
                    floor: format_rational(&g.floor),
                });
            }
        }
        if let TransferWeight::Explicit(map) = &self.weights {
            for (giver, receiver, item) in map.keys() {
                let ok = giver != receiver
                    && self.agent(giver).is_some_and(|a| a.have.contains_key(item))
                    && self
                        .agent(receiver)
                        .is_some_and(|a| a.wish.contains_key(item));
                if !ok {
                    return Err(ValidationError::WeightOutsideLists {
                        giver: giver.clone(),
                        receiver: receiver.clone(),
                        item: item.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn agent(&self, id: &AgentId) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| &a.id == id)
    }

    pub fn item_value(&self, id: &ItemId) -> Option<&Rational> {
        self.items.iter().find(|i| &i.id == id).map(|i| &i.value)
    }

    /// Utility of moving one copy of `item` from `giver` to `receiver`.
    pub fn weight(&self, giver: &AgentId, receiver: &AgentId, item: &ItemId) -> Rational {
        let value = || {
            self.item_value(item)
                .cloned()
                .unwrap_or_else(Rational::zero)
        };
        match &self.weights {
            TransferWeight::ItemValue => value(),
            TransferWeight::Unit => Rational::from_integer(1.into()),
            TransferWeight::Explicit(map) => map
                .get(&(giver.clone(), receiver.clone(), item.clone()))
                .cloned()
                .unwrap_or_else(value),
        }
    }

    /// The largest value among items agent `id` owns or wishes for.
    pub fn max_value_of(&self, id: &AgentId) -> Rational {
        self.agent(id)
            .map(|a| {
                a.have
                    .keys()
                    .chain(a.wish.keys())
                    .filter_map(|item| self.item_value(item))
                    .max()
                    .cloned()
                    .unwrap_or_else(Rational::zero)
            })
            .unwrap_or_else(Rational::zero)
    }

    pub fn all_values_equal(&self) -> bool {
        self.items.windows(2).all(|w| w[0].value == w[1].value)
    }
}

/// Returns the instance unchanged when every invariant holds.
pub fn validate_instance(instance: BarterInstance) -> Result<BarterInstance, ValidationError> {
    instance.validate()?;
    Ok(instance)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Transfer {
    pub giver: AgentId,
    pub receiver: AgentId,
    pub item: ItemId,
    pub count: u32,
}

/// A multiset of transfers kept merged and sorted by (giver, receiver, item).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Allocation {
    transfers: Vec<Transfer>,
}

impl Allocation {
    pub fn new(transfers: impl IntoIterator<Item = Transfer>) -> Self {
        let mut merged: BTreeMap<(AgentId, AgentId, ItemId), u32> = BTreeMap::new();
        for t in transfers {
            if t.count > 0 {
                *merged.entry((t.giver, t.receiver, t.item)).or_default() += t.count;
            }
        }
        Allocation {
            transfers: merged
                .into_iter()
                .map(|((giver, receiver, item), count)| Transfer {
                    giver,
                    receiver,
                    item,
                    count,
                })
                .collect(),
        }
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidTransfer {
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
    #[error("unknown item `{0}`")]
    UnknownItem(ItemId),
    #[error("agent `{0}` cannot trade with itself")]
    SelfTransfer(AgentId),
    #[error("agent `{agent}` does not own item `{item}`")]
    NotOwned { agent: AgentId, item: ItemId },
    #[error("agent `{agent}` does not wish for item `{item}`")]
    NotWished { agent: AgentId, item: ItemId },
    #[error("agent `{agent}` gives {count} copies of `{item}` but owns {cap}")]
    GiverOverCapacity {
        agent: AgentId,
        item: ItemId,
        count: u64,
        cap: u32,
    },
    #[error("agent `{agent}` receives {count} copies of `{item}` but wishes for {cap}")]
    ReceiverOverCapacity {
        agent: AgentId,
        item: ItemId,
        count: u64,
        cap: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentNetValue {
    pub given: Rational,
    pub received: Rational,
    /// Net value loss: given minus received.
    pub net: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetValueReport {
    pub per_agent: BTreeMap<AgentId, AgentNetValue>,
    pub utility: Rational,
}

impl NetValueReport {
    pub fn net(&self, agent: &AgentId) -> Option<&Rational> {
        self.per_agent.get(agent).map(|a| &a.net)
    }

    pub fn is_balanced(&self) -> bool {
        self.per_agent.values().all(|a| a.net.is_zero())
    }
}

/// Checks membership and capacity constraints of every transfer.
pub fn check_transfers(
    instance: &BarterInstance,
    alloc: &Allocation,
) -> Result<(), InvalidTransfer> {
    let mut given: BTreeMap<(&AgentId, &ItemId), u64> = BTreeMap::new();
    let mut received: BTreeMap<(&AgentId, &ItemId), u64> = BTreeMap::new();
    for t in alloc.transfers() {
        let giver = instance
            .agent(&t.giver)
            .ok_or_else(|| InvalidTransfer::UnknownAgent(t.giver.clone()))?;
        let receiver = instance
            .agent(&t.receiver)
            .ok_or_else(|| InvalidTransfer::UnknownAgent(t.receiver.clone()))?;
        if instance.item_value(&t.item).is_none() {
            return Err(InvalidTransfer::UnknownItem(t.item.clone()));
        }
        if t.giver == t.receiver {
            return Err(InvalidTransfer::SelfTransfer(t.giver.clone()));
        }
        let Some(&own_cap) = giver.have.get(&t.item) else {
            return Err(InvalidTransfer::NotOwned {
                agent: t.giver.clone(),
                item: t.item.clone(),
            });
        };
        let Some(&wish_cap) = receiver.wish.get(&t.item) else {
            return Err(InvalidTransfer::NotWished {
                agent: t.receiver.clone(),
                item: t.item.clone(),
            });
        };
        let g = given.entry((&t.giver, &t.item)).or_default();
        *g += u64::from(t.count);
        if *g > u64::from(own_cap) {
            return Err(InvalidTransfer::GiverOverCapacity {
                agent: t.giver.clone(),
                item: t.item.clone(),
                count: *g,
                cap: own_cap,
            });
        }
        let r = received.entry((&t.receiver, &t.item)).or_default();
        *r += u64::from(t.count);
        if *r > u64::from(wish_cap) {
            return Err(InvalidTransfer::ReceiverOverCapacity {
                agent: t.receiver.clone(),
                item: t.item.clone(),
                count: *r,
                cap: wish_cap,
            });
        }
    }
    Ok(())
}

pub fn evaluate_allocation(
    instance: &BarterInstance,
    alloc: &Allocation,
) -> Result<NetValueReport, InvalidTransfer> {
    check_transfers(instance, alloc)?;
    let mut per_agent: BTreeMap<AgentId, AgentNetValue> = instance
        .agents
        .iter()
        .map(|a| {
            (
                a.id.clone(),
                AgentNetValue {
                    given: Rational::zero(),
                    received: Rational::zero(),
                    net: Rational::zero(),
                },
            )
        })
        .collect();
    let mut utility = Rational::zero();
    for t in alloc.transfers() {
        let count = Rational::from_integer(t.count.into());
        let value = instance.item_value(&t.item).expect("checked above") * &count;
        utility += instance.weight(&t.giver, &t.receiver, &t.item) * &count;
        if let Some(g) = per_agent.get_mut(&t.giver) {
            g.given += &value;
        }
        if let Some(r) = per_agent.get_mut(&t.receiver) {
            r.received += &value;
        }
    }
    for a in per_agent.values_mut() {
        a.net = &a.given - &a.received;
    }
    Ok(NetValueReport { per_agent, utility })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{figure_one, gap_family, gkps_worst_case};
    use crate::rational::{int, ratio};

    fn transfer(g: &str, r: &str, item: &str, count: u32) -> Transfer {
        Transfer {
            giver: g.into(),
            receiver: r.into(),
            item: item.into(),
            count,
        }
    }

    #[test]
    fn figure_one_is_valid() {
        assert!(validate_instance(figure_one()).is_ok());
    }

    #[test]
    fn zero_value_rejected() {
        let mut inst = figure_one();
        inst.items[1].value = int(0);
        assert!(matches!(
            inst.validate(),
            Err(ValidationError::NonPositiveValue { .. })
        ));
    }

    #[test]
    fn dangling_wish_rejected() {
        let mut inst = figure_one();
        inst.agents[0].wish.insert("zzz".into(), 1);
        assert!(matches!(
            inst.validate(),
            Err(ValidationError::DanglingItem { list: "wish", .. })
        ));
    }

    #[test]
    fn duplicate_ids_and_bad_groups_rejected() {
        let mut inst = figure_one();
        inst.agents.push(inst.agents[0].clone());
        assert!(matches!(
            inst.validate(),
            Err(ValidationError::DuplicateAgent(_))
        ));

        let mut inst = figure_one();
        inst.fairness.push(FairnessGroup {
            agents: ["9".into()].into_iter().collect(),
            floor: int(0),
        });
        assert!(matches!(
            inst.validate(),
            Err(ValidationError::UnknownFairnessAgent { .. })
        ));
    }

    #[test]
    fn empty_allocation_is_neutral() {
        let inst = figure_one();
        let report = evaluate_allocation(&inst, &Allocation::default()).unwrap();
        assert!(report.is_balanced());
        assert_eq!(report.utility, int(0));
    }

    #[test]
    fn worst_case_balanced_exchange() {
        let inst = gkps_worst_case();
        let alloc = Allocation::new([
            transfer("2", "1", "1", 1),
            transfer("2", "1", "2", 1),
            transfer("1", "2", "3", 1),
        ]);
        let report = evaluate_allocation(&inst, &alloc).unwrap();
        let a1 = &report.per_agent[&AgentId::from("1")];
        assert_eq!((a1.given.clone(), a1.received.clone()), (int(20), int(20)));
        assert_eq!(report.net(&"2".into()), Some(&int(0)));
        assert_eq!(report.utility, int(3));
    }

    #[test]
    fn gap_family_swap_net_value() {
        let inst = gap_family(4);
        let alloc = Allocation::new([transfer("1", "2", "j1", 1), transfer("2", "1", "j2", 1)]);
        let report = evaluate_allocation(&inst, &alloc).unwrap();
        assert_eq!(report.net(&"1".into()), Some(&ratio(3, 4)));
        assert_eq!(report.net(&"2".into()), Some(&ratio(-3, 4)));
    }

    #[test]
    fn invalid_transfers_are_named() {
        let inst = gkps_worst_case();
        let cases = [
            (transfer("1", "1", "3", 1), "SelfTransfer"),
            (transfer("1", "2", "1", 1), "NotOwned"),
            (transfer("1", "2", "3", 2), "GiverOverCapacity"),
            (transfer("9", "2", "3", 1), "UnknownAgent"),
        ];
        for (t, name) in cases {
            let err = evaluate_allocation(&inst, &Allocation::new([t])).unwrap_err();
            assert!(format!("{err:?}").starts_with(name), "{err:?}");
        }
    }
}
