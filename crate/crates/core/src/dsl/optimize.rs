//! Rewriting of event models into the binary form (at most two components and
//! one temporal constraint) and trigger selection.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptimizeError {
    #[error("cannot optimize {model}: non-chain temporal constraints")]
    NotAChain { model: String },
    #[error("cannot optimize {model}: generated name {name} is already taken")]
    NameClash { model: String, name: String },
}

/// Interval a model instance exposes to the model that uses it as a component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Anchor {
    /// The hull of the component intervals.
    Hull,
    /// The anchor of the named component.
    Component(String),
    /// The intersection of the two component anchors.
    Intersection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedModel {
    pub model: ScenarioModel,
    pub anchor: Anchor,
    /// Name of the user model this one was derived from; equal to the model's
    /// own name unless it is a generated intermediate.
    pub origin: String,
}

impl OptimizedModel {
    pub fn is_generated(&self) -> bool {
        self.model.name != self.origin
    }

    pub fn temporal(&self) -> Option<(&str, AllenRelation, &str)> {
        self.model.temporal_constraints().next()
    }
}

pub fn generated_name(model: &str, k: usize) -> String {
    format!("{model}__{k}")
}

/// Orders components along the temporal chain. `None` relations mean the
/// model has no temporal constraint at all.
fn chain_order(m: &ScenarioModel) -> Option<(Vec<&Component>, Vec<Option<AllenRelation>>)> {
    let temporal: Vec<_> = m.temporal_constraints().collect();
    let n = m.components.len();
    if temporal.is_empty() {
        return Some((m.components.iter().collect(), vec![None; n.saturating_sub(1)]));
    }
    if temporal.len() != n - 1 {
        return None;
    }
    let mut next: BTreeMap<&str, (&str, AllenRelation)> = BTreeMap::new();
    let mut has_incoming: BTreeSet<&str> = BTreeSet::new();
    for (l, r, rt) in &temporal {
        if next.insert(l, (rt, *r)).is_some() || !has_incoming.insert(rt) {
            return None;
        }
    }
    let mut starts = m.components.iter().filter(|c| !has_incoming.contains(c.var.as_str()));
    let first = starts.next()?;
    if starts.next().is_some() {
        return None;
    }
    let mut order = vec![first];
    let mut rels = Vec::new();
    let mut cur = first.var.as_str();
    while let Some((to, rel)) = next.get(cur) {
        let comp = m.component(to)?;
        if order.iter().any(|c| c.var == comp.var) {
            return None;
        }
        order.push(comp);
        rels.push(Some(*rel));
        cur = to;
    }
    (order.len() == n).then_some((order, rels))
}

fn fresh_var(m: &ScenarioModel) -> String {
    let mut v = String::from("sub");
    while m.object_class(&v).is_some() || m.component(&v).is_some() {
        v.push('_');
    }
    v
}

/// Rewrites `m` into nested binary models. Intermediates are named
/// `<name>__k` and come before the model that uses them; the last entry keeps
/// the original name, alarm, and symbolic constraints.
pub fn optimize(m: &ScenarioModel) -> Result<Vec<OptimizedModel>, OptimizeError> {
    let temporal = m.temporal_constraints().count();
    if m.components.len() <= 2 && temporal <= 1 {
        return Ok(vec![OptimizedModel {
            model: m.clone(),
            anchor: Anchor::Hull,
            origin: m.name.clone(),
        }]);
    }
    let not_chain = || OptimizeError::NotAChain { model: m.name.clone() };
    if m.components.len() <= 2 {
        return Err(not_chain());
    }
    let (order, rels) = chain_order(m).ok_or_else(not_chain)?;
    let sub_var = fresh_var(m);
    let objects_of = |comps: &[&Component]| -> Vec<PhysicalObject> {
        let used: BTreeSet<&str> = comps.iter().flat_map(|c| c.args.iter().map(String::as_str)).collect();
        m.physical_objects
            .iter()
            .filter(|p| used.contains(p.var.as_str()))
            .cloned()
            .collect()
    };
    let temporal_of = |l: &str, r: Option<AllenRelation>, rt: &str| -> Vec<Constraint> {
        r.map(|relation| Constraint::Temporal {
            left: l.to_string(),
            relation,
            right: rt.to_string(),
        })
        .into_iter()
        .collect()
    };

    let n = order.len();
    let mut out: Vec<OptimizedModel> = Vec::with_capacity(n - 1);
    for k in 1..n {
        // model k joins the chain prefix (order[0..k]) with order[k]
        let last = k == n - 1;
        let second = order[k];
        let (first, left_var) = if k == 1 {
            (order[0].clone(), order[0].var.clone())
        } else {
            let prev = &out[k - 2].model;
            (
                Component {
                    var: sub_var.clone(),
                    model: prev.name.clone(),
                    args: prev.physical_objects.iter().map(|p| p.var.clone()).collect(),
                },
                sub_var.clone(),
            )
        };
        let mut constraints = temporal_of(&left_var, rels[k - 1], &second.var);
        let (name, physical_objects, alarm, anchor) = if last {
            constraints.extend(m.symbolic_constraints().cloned());
            (m.name.clone(), m.physical_objects.clone(), m.alarm, Anchor::Hull)
        } else {
            let name = generated_name(&m.name, k);
            if m.components.iter().any(|c| c.model == name) {
                return Err(OptimizeError::NameClash {
                    model: m.name.clone(),
                    name,
                });
            }
            let anchor = match rels[k - 1] {
                Some(_) => Anchor::Component(second.var.clone()),
                None => Anchor::Intersection,
            };
            (name, objects_of(&order[..=k]), AlarmLevel::NotUrgent, anchor)
        };
        out.push(OptimizedModel {
            model: ScenarioModel {
                scenario_type: m.scenario_type,
                name,
                physical_objects,
                components: vec![first, second.clone()],
                constraints,
                alarm,
            },
            anchor,
            origin: m.name.clone(),
        });
    }
    Ok(out)
}

/// Optimizes every model of the ontology, intermediates first.
pub fn optimize_all(ont: &Ontology) -> Result<Vec<OptimizedModel>, OptimizeError> {
    let mut out = Vec::new();
    for m in &ont.models {
        for o in optimize(m)? {
            if o.is_generated() && ont.model(&o.model.name).is_some() {
                return Err(OptimizeError::NameClash {
                    model: m.name.clone(),
                    name: o.model.name.clone(),
                });
            }
            out.push(o);
        }
    }
    Ok(out)
}

/// For each composite model, the components whose recognition fires the
/// evaluation of the model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriggerTree {
    pub triggers: BTreeMap<String, Vec<String>>,
}

impl TriggerTree {
    pub fn triggers_of(&self, model: &str) -> &[String] {
        self.triggers.get(model).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_trigger(&self, model: &str, component: &str) -> bool {
        self.triggers_of(model).iter().any(|c| c == component)
    }
}

/// Picks the component that ends last under the model's temporal relation.
/// For every supported relation that is the right-hand operand: it strictly
/// ends last for before/meets/overlaps/starts/during and ends together with
/// the left one for finishes/equals. Without a relation both components
/// trigger.
pub fn build_trigger_tree(models: &[OptimizedModel]) -> TriggerTree {
    let mut tree = TriggerTree::default();
    for o in models {
        if o.model.components.is_empty() {
            continue;
        }
        let triggers = match o.temporal() {
            Some((_, _, right)) => vec![right.to_string()],
            None => o.model.components.iter().map(|c| c.var.clone()).collect(),
        };
        tree.triggers.insert(o.model.name.clone(), triggers);
    }
    tree
}
