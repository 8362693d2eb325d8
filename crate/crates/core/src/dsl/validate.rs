use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::ast::*;
use super::parser::ROOT_CLASS;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Class or model the problem was found in.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Inheritance view of the declared classes, with attributes flattened along
/// the parent chain (ancestors first).
#[derive(Debug, Clone, Default)]
pub struct ClassTable {
    parents: HashMap<String, String>,
    own: HashMap<String, Vec<Attribute>>,
}

impl ClassTable {
    pub fn new(classes: &[ClassDecl]) -> Self {
        let mut t = Self::default();
        for c in classes {
            t.parents.entry(c.name.clone()).or_insert_with(|| c.parent.clone());
            t.own.entry(c.name.clone()).or_insert_with(|| c.attributes.clone());
        }
        t
    }

    pub fn contains(&self, name: &str) -> bool {
        name == ROOT_CLASS || self.parents.contains_key(name)
    }

    /// `name` followed by its ancestors, stopping at the root or at a cycle.
    pub fn ancestry(&self, name: &str) -> Vec<String> {
        let mut chain = vec![name.to_string()];
        let mut cur = name;
        while let Some(p) = self.parents.get(cur) {
            if chain.iter().any(|c| c == p) {
                break;
            }
            chain.push(p.clone());
            cur = p;
        }
        chain
    }

    fn has_cycle(&self, name: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut cur = name;
        while let Some(p) = self.parents.get(cur) {
            if !seen.insert(cur.to_string()) {
                return true;
            }
            cur = p;
        }
        false
    }

    pub fn is_subclass(&self, class: &str, of: &str) -> bool {
        of == ROOT_CLASS || self.ancestry(class).iter().any(|c| c == of)
    }

    pub fn attributes(&self, class: &str) -> Vec<Attribute> {
        let mut chain = self.ancestry(class);
        chain.reverse();
        chain
            .iter()
            .flat_map(|c| self.own.get(c).cloned().unwrap_or_default())
            .collect()
    }

    pub fn attribute(&self, class: &str, attr: &str) -> Option<BasicType> {
        self.attributes(class).into_iter().find(|a| a.name == attr).map(|a| a.ty)
    }
}

struct Checker<'a> {
    ont: &'a Ontology,
    table: ClassTable,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn report(&mut self, subject: &str, message: impl Into<String>) {
        self.out.push(Diagnostic {
            subject: subject.to_string(),
            message: message.into(),
        });
    }

    fn classes(&mut self) {
        let mut names = BTreeSet::new();
        for c in &self.ont.classes {
            if !names.insert(c.name.as_str()) {
                self.report(&c.name, "duplicate class");
            }
            if c.name == ROOT_CLASS {
                self.report(&c.name, "the root class cannot be redeclared");
            }
            if !self.table.contains(&c.parent) {
                self.report(&c.name, format!("unknown parent {}", c.parent));
            }
            if self.table.has_cycle(&c.name) {
                self.report(&c.name, "cyclic inheritance");
                continue;
            }
            let mut attrs = BTreeSet::new();
            for a in self.table.attributes(&c.name) {
                if !attrs.insert(a.name.clone()) {
                    self.report(&c.name, format!("duplicate attribute {}", a.name));
                }
            }
        }
    }

    fn operand_type(&mut self, model: &ScenarioModel, op: &Operand) -> Option<BasicType> {
        match op {
            Operand::Literal(v) => Some(v.basic_type()),
            Operand::Var(v) => {
                if model.object_class(v).is_none() {
                    self.report(&model.name, format!("unknown physical object {v}"));
                }
                None
            }
            Operand::Attr { var, attr } => {
                let Some(class) = model.object_class(var) else {
                    self.report(&model.name, format!("unknown physical object {var}"));
                    return None;
                };
                let ty = self.table.attribute(class, attr);
                if ty.is_none() {
                    self.report(&model.name, format!("unknown attribute {attr} of {var}:{class}"));
                }
                ty
            }
        }
    }

    fn model(&mut self, m: &ScenarioModel) {
        let mut vars = BTreeSet::new();
        for p in &m.physical_objects {
            if !vars.insert(p.var.as_str()) {
                self.report(&m.name, format!("duplicate variable {}", p.var));
            }
            if !self.table.contains(&p.class) {
                self.report(&m.name, format!("unknown class {}", p.class));
            }
        }
        if m.scenario_type.is_primitive() && !m.components.is_empty() {
            self.report(&m.name, "primitive models have no components");
        }
        if !m.scenario_type.is_primitive() && m.components.is_empty() {
            self.report(&m.name, "composite models need at least one component");
        }
        for c in &m.components {
            if !vars.insert(c.var.as_str()) {
                self.report(&m.name, format!("duplicate variable {}", c.var));
            }
            let Some(sub) = self.ont.model(&c.model) else {
                self.report(&m.name, format!("unknown model {}", c.model));
                continue;
            };
            if sub.physical_objects.len() != c.args.len() {
                self.report(
                    &m.name,
                    format!(
                        "{} expects {} arguments, got {}",
                        c.model,
                        sub.physical_objects.len(),
                        c.args.len()
                    ),
                );
                continue;
            }
            for (arg, param) in c.args.iter().zip(&sub.physical_objects) {
                match m.object_class(arg) {
                    None => self.report(&m.name, format!("unknown physical object {arg}")),
                    Some(class) if !self.table.is_subclass(class, &param.class) => self.report(
                        &m.name,
                        format!("argument {arg}:{class} of {} is not a {}", c.model, param.class),
                    ),
                    _ => {}
                }
            }
        }
        for k in &m.constraints {
            match k {
                Constraint::Temporal { left, right, .. } => {
                    for v in [left, right] {
                        if m.component(v).is_none() {
                            self.report(&m.name, format!("{v} is not a component"));
                        }
                    }
                    if left == right {
                        self.report(&m.name, "temporal constraint relates a component to itself");
                    }
                }
                Constraint::Symbolic { lhs, cmp, rhs } => {
                    let lt = self.operand_type(m, lhs);
                    let rt = self.operand_type(m, rhs);
                    let var_sides = [lhs, rhs].iter().filter(|o| matches!(o, Operand::Var(_))).count();
                    if var_sides == 1 {
                        self.report(&m.name, format!("cannot compare an object with a value in ({k})"));
                    } else if var_sides == 2 && !cmp.is_equality() {
                        self.report(&m.name, format!("objects compare only with = or != in ({k})"));
                    }
                    if matches!((lhs, rhs), (Operand::Literal(_), Operand::Literal(_))) {
                        self.report(&m.name, format!("constraint ({k}) involves no object"));
                    }
                    if let (Some(a), Some(b)) = (lt, rt) {
                        if !Value::comparable_types(a, b) {
                            self.report(&m.name, format!("type mismatch {a} vs {b} in ({k})"));
                        } else if !cmp.is_equality() && !a.is_ordered() {
                            self.report(&m.name, format!("{a} values are not ordered in ({k})"));
                        }
                    }
                }
            }
        }
    }

    fn model_cycles(&mut self) {
        let deps: BTreeMap<&str, Vec<&str>> = self
            .ont
            .models
            .iter()
            .map(|m| (m.name.as_str(), m.components.iter().map(|c| c.model.as_str()).collect()))
            .collect();
        // 0 unvisited, 1 on stack, 2 done
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn visit<'a>(
            n: &'a str,
            deps: &BTreeMap<&'a str, Vec<&'a str>>,
            state: &mut BTreeMap<&'a str, u8>,
            cyclic: &mut BTreeSet<&'a str>,
        ) {
            match state.get(n) {
                Some(1) => {
                    cyclic.insert(n);
                    return;
                }
                Some(2) => return,
                _ => {}
            }
            state.insert(n, 1);
            for d in deps.get(n).into_iter().flatten() {
                visit(d, deps, state, cyclic);
            }
            state.insert(n, 2);
        }
        let mut cyclic = BTreeSet::new();
        for n in deps.keys() {
            visit(n, &deps, &mut state, &mut cyclic);
        }
        for n in cyclic {
            self.report(n, "model refers to itself through its components");
        }
    }
}

/// Checks the well-formedness of classes and models. An empty result means
/// the ontology is valid.
pub fn validate(ont: &Ontology) -> Vec<Diagnostic> {
    let mut c = Checker {
        ont,
        table: ClassTable::new(&ont.classes),
        out: Vec::new(),
    };
    c.classes();
    let mut names = BTreeSet::new();
    for m in &ont.models {
        if !names.insert(m.name.as_str()) {
            c.report(&m.name, "duplicate model");
        }
        c.model(m);
    }
    c.model_cycles();
    c.out
}
