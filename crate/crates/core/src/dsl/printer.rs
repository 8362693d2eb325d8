//! Canonical text form of the AST. Parsing the output yields the same AST.

use std::fmt;

use super::ast::*;

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Attr { var, attr } => write!(f, "{var}->{attr}"),
            Operand::Var(v) => f.write_str(v),
            Operand::Literal(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Symbolic { lhs, cmp, rhs } => write!(f, "{lhs} {} {rhs}", cmp.as_str()),
            Constraint::Temporal { left, relation, right } => write!(f, "{left} {relation} {right}"),
        }
    }
}

impl fmt::Display for ClassDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "class {}:{} {{", self.name, self.parent)?;
        writeln!(f, "   const {};", self.is_const)?;
        for a in &self.attributes {
            writeln!(f, "   {} {};", a.ty, a.name)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for ScenarioModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}({},", self.scenario_type.as_str(), self.name)?;
        if !self.physical_objects.is_empty() {
            let binds: Vec<String> = self
                .physical_objects
                .iter()
                .map(|p| format!("({}:{})", p.var, p.class))
                .collect();
            writeln!(f, "  PhysicalObjects({})", binds.join(","))?;
        }
        if !self.components.is_empty() {
            let comps: Vec<String> = self
                .components
                .iter()
                .map(|c| format!("({}:{}({}))", c.var, c.model, c.args.join(",")))
                .collect();
            writeln!(f, "  Components({})", comps.join("\n    "))?;
        }
        if !self.constraints.is_empty() {
            let cs: Vec<String> = self.constraints.iter().map(|c| format!("({c})")).collect();
            writeln!(f, "  Constraints({})", cs.join("\n    "))?;
        }
        write!(f, "  Alarm((Level : {})))", self.alarm)
    }
}

impl fmt::Display for Ontology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.classes {
            writeln!(f, "{c}\n")?;
        }
        for m in &self.models {
            writeln!(f, "{m}\n")?;
        }
        Ok(())
    }
}
