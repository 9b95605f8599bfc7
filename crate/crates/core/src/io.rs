//! JSON documents for instances, allocations and oracle results.
//!
//! Every number that may be fractional travels as a string, either a decimal
//! or `p/q`; output always uses lowest-terms `p/q` (or a bare integer).
//! Output is sorted so equal inputs give equal bytes.

use crate::model::{
    evaluate_allocation, AgentId, AgentSpec, Allocation, BarterInstance, FairnessGroup,
    InvalidTransfer, ItemId, ItemSpec, Transfer, TransferWeight, ValidationError,
};
use crate::oracle::OracleResult;
use crate::rational::{format_rational, serde_string, Rational};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Transfer(#[from] InvalidTransfer),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemDoc {
    id: String,
    #[serde(with = "serde_string")]
    value: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentDoc {
    id: String,
    #[serde(default)]
    have: BTreeMap<String, u32>,
    #[serde(default)]
    wish: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightDoc {
    giver: String,
    receiver: String,
    item: String,
    #[serde(with = "serde_string")]
    w: Rational,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum WeightMode {
    #[default]
    ItemValue,
    Unit,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightsDoc {
    Mode(WeightMode),
    List(Vec<WeightDoc>),
}

impl Default for WeightsDoc {
    fn default() -> Self {
        WeightsDoc::Mode(WeightMode::ItemValue)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FairnessDoc {
    group: Vec<String>,
    #[serde(with = "serde_string")]
    floor: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDocument {
    items: Vec<ItemDoc>,
    agents: Vec<AgentDoc>,
    #[serde(default)]
    weights: WeightsDoc,
    #[serde(default)]
    fairness: Vec<FairnessDoc>,
}

fn caps(map: BTreeMap<String, u32>) -> BTreeMap<ItemId, u32> {
    map.into_iter().map(|(k, v)| (ItemId(k), v)).collect()
}

fn cap_names(map: &BTreeMap<ItemId, u32>) -> BTreeMap<String, u32> {
    map.iter().map(|(k, v)| (k.0.clone(), *v)).collect()
}

impl From<InstanceDocument> for BarterInstance {
    fn from(doc: InstanceDocument) -> Self {
        BarterInstance {
            items: doc
                .items
                .into_iter()
                .map(|i| ItemSpec {
                    id: ItemId(i.id),
                    value: i.value,
                })
                .collect(),
            agents: doc
                .agents
                .into_iter()
                .map(|a| AgentSpec {
                    id: AgentId(a.id),
                    have: caps(a.have),
                    wish: caps(a.wish),
                })
                .collect(),
            weights: match doc.weights {
                WeightsDoc::Mode(WeightMode::ItemValue) => TransferWeight::ItemValue,
                WeightsDoc::Mode(WeightMode::Unit) => TransferWeight::Unit,
                WeightsDoc::List(list) => TransferWeight::Explicit(
                    list.into_iter()
                        .map(|w| ((AgentId(w.giver), AgentId(w.receiver), ItemId(w.item)), w.w))
                        .collect(),
                ),
            },
            fairness: doc
                .fairness
                .into_iter()
                .map(|f| FairnessGroup {
                    agents: f.group.into_iter().map(AgentId).collect(),
                    floor: f.floor,
                })
                .collect(),
        }
    }
}

impl From<&BarterInstance> for InstanceDocument {
    fn from(inst: &BarterInstance) -> Self {
        InstanceDocument {
            items: inst
                .items
                .iter()
                .map(|i| ItemDoc {
                    id: i.id.0.clone(),
                    value: i.value.clone(),
                })
                .collect(),
            agents: inst
                .agents
                .iter()
                .map(|a| AgentDoc {
                    id: a.id.0.clone(),
                    have: cap_names(&a.have),
                    wish: cap_names(&a.wish),
                })
                .collect(),
            weights: match &inst.weights {
                TransferWeight::ItemValue => WeightsDoc::Mode(WeightMode::ItemValue),
                TransferWeight::Unit => WeightsDoc::Mode(WeightMode::Unit),
                TransferWeight::Explicit(map) => WeightsDoc::List(
                    map.iter()
                        .map(|((g, r, i), w)| WeightDoc {
                            giver: g.0.clone(),
                            receiver: r.0.clone(),
                            item: i.0.clone(),
                            w: w.clone(),
                        })
                        .collect(),
                ),
            },
            fairness: inst
                .fairness
                .iter()
                .map(|f| FairnessDoc {
                    group: f.agents.iter().map(|a| a.0.clone()).collect(),
                    floor: f.floor.clone(),
                })
                .collect(),
        }
    }
}

fn parse_doc<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        IoError::Parse {
            path: if path == "." { "document".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str) -> Result<BarterInstance, IoError> {
    let doc: InstanceDocument = parse_doc(text)?;
    let instance = BarterInstance::from(doc);
    instance.validate()?;
    Ok(instance)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents always serialize");
    s.push('\n');
    s
}

pub fn instance_to_json(instance: &BarterInstance) -> String {
    pretty(&InstanceDocument::from(instance))
}

#[derive(Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(deny_unknown_fields)]
pub struct TransferDoc {
    pub giver: String,
    pub receiver: String,
    pub item: String,
    pub count: u32,
}

#[derive(Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(deny_unknown_fields)]
pub struct AgentReportDoc {
    #[serde(with = "serde_string")]
    pub given: Rational,
    #[serde(with = "serde_string")]
    pub received: Rational,
    #[serde(rename = "D", with = "serde_string")]
    pub d: Rational,
}

#[derive(Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub per_agent: BTreeMap<String, AgentReportDoc>,
    #[serde(with = "serde_string")]
    pub utility: Rational,
}

#[derive(Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(deny_unknown_fields)]
pub struct AllocationDocument {
    pub transfers: Vec<TransferDoc>,
    pub report: ReportDoc,
    pub seed: u64,
    #[serde(with = "serde_string")]
    pub lp_objective: Rational,
}

fn transfer_docs(allocation: &Allocation) -> Vec<TransferDoc> {
    allocation
        .transfers()
        .iter()
        .map(|t| TransferDoc {
            giver: t.giver.0.clone(),
            receiver: t.receiver.0.clone(),
            item: t.item.0.clone(),
            count: t.count,
        })
        .collect()
}

impl AllocationDocument {
    pub fn new(
        instance: &BarterInstance,
        allocation: &Allocation,
        seed: u64,
        lp_objective: &Rational,
    ) -> Result<Self, IoError> {
        let report = evaluate_allocation(instance, allocation)?;
        Ok(AllocationDocument {
            transfers: transfer_docs(allocation),
            report: ReportDoc {
                per_agent: report
                    .per_agent
                    .iter()
                    .map(|(a, v)| {
                        (
                            a.0.clone(),
                            AgentReportDoc {
                                given: v.given.clone(),
                                received: v.received.clone(),
                                d: v.net.clone(),
                            },
                        )
                    })
                    .collect(),
                utility: report.utility,
            },
            seed,
            lp_objective: lp_objective.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        pretty(self)
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        parse_doc(text)
    }

    pub fn allocation(&self) -> Allocation {
        Allocation::new(self.transfers.iter().map(|t| Transfer {
            giver: AgentId(t.giver.clone()),
            receiver: AgentId(t.receiver.clone()),
            item: ItemId(t.item.clone()),
            count: t.count,
        }))
    }
}

#[derive(Serialize)]
struct OracleDoc {
    best_utility: String,
    has_nonempty_balanced: bool,
    best_allocation: Vec<TransferDoc>,
    enumerated_count: u64,
}

pub fn oracle_to_json(result: &OracleResult) -> String {
    pretty(&OracleDoc {
        best_utility: format_rational(&result.best_utility),
        has_nonempty_balanced: result.has_nonempty_balanced,
        best_allocation: transfer_docs(&result.best_allocation),
        enumerated_count: result.enumerated_count,
    })
}
