use super::ast::*;
use super::lexer::{tokenize, DslError, Pos, Tok, Token};
use crate::scene::FrameId;

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, DslError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.at + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(DslError::new(self.pos(), msg))
    }

    fn expect(&mut self, want: Tok) -> PResult<()> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {}, found {}", want.describe(), self.peek().describe()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            other => {
                let found = other.describe();
                self.err(format!("expected '{kw}', found {found}"))
            }
        }
    }

    fn ontology(&mut self) -> PResult<(Ontology, Vec<Pos>)> {
        let mut out = Ontology::default();
        let mut class_pos = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok((out, class_pos)),
                Tok::Ident(s) if s == "class" => {
                    class_pos.push(self.pos());
                    out.classes.push(self.class_decl()?);
                }
                Tok::Ident(s) if ScenarioType::parse(&s).is_some() => out.models.push(self.model_decl()?),
                other => {
                    return self.err(format!(
                        "expected 'class' or a scenario type, found {}",
                        other.describe()
                    ))
                }
            }
        }
    }

    fn class_decl(&mut self) -> PResult<ClassDecl> {
        self.keyword("class")?;
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        let parent = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut decl = ClassDecl {
            name,
            parent,
            is_const: false,
            attributes: Vec::new(),
        };
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.next();
                    return Ok(decl);
                }
                Tok::Ident(s) if s == "const" => {
                    self.next();
                    decl.is_const = match self.ident()?.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => return self.err("expected 'true' or 'false' after 'const'"),
                    };
                    self.expect(Tok::Semi)?;
                }
                Tok::Ident(s) => {
                    let Some(ty) = BasicType::from_keyword(&s) else {
                        return self.err(format!("unknown basic type '{s}'"));
                    };
                    self.next();
                    let name = self.ident()?;
                    self.expect(Tok::Semi)?;
                    decl.attributes.push(Attribute { name, ty });
                }
                other => return self.err(format!("expected attribute or '}}', found {}", other.describe())),
            }
        }
    }

    fn model_decl(&mut self) -> PResult<ScenarioModel> {
        let ty_pos = self.pos();
        let ty = self.ident()?;
        let scenario_type = ScenarioType::parse(&ty).ok_or_else(|| DslError::new(ty_pos, "unknown scenario type"))?;
        self.expect(Tok::LParen)?;
        let name = self.ident()?;
        self.expect(Tok::Comma)?;
        let mut model = ScenarioModel {
            scenario_type,
            name,
            physical_objects: Vec::new(),
            components: Vec::new(),
            constraints: Vec::new(),
            alarm: AlarmLevel::default(),
        };
        let mut seen: Vec<String> = Vec::new();
        loop {
            let pos = self.pos();
            let section = match self.peek().clone() {
                Tok::RParen => {
                    self.next();
                    return Ok(model);
                }
                Tok::Ident(s) => s,
                other => return self.err(format!("expected section or ')', found {}", other.describe())),
            };
            if seen.contains(&section) {
                return Err(DslError::new(pos, format!("duplicate section '{section}'")));
            }
            self.next();
            self.expect(Tok::LParen)?;
            match section.as_str() {
                "PhysicalObjects" => {
                    loop {
                        self.expect(Tok::LParen)?;
                        let var = self.ident()?;
                        self.expect(Tok::Colon)?;
                        let class = self.ident()?;
                        self.expect(Tok::RParen)?;
                        model.physical_objects.push(PhysicalObject { var, class });
                        if *self.peek() == Tok::Comma {
                            self.next();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                "Components" => {
                    loop {
                        self.expect(Tok::LParen)?;
                        let var = self.ident()?;
                        self.expect(Tok::Colon)?;
                        let sub = self.ident()?;
                        self.expect(Tok::LParen)?;
                        let mut args = vec![self.ident()?];
                        while *self.peek() == Tok::Comma {
                            self.next();
                            args.push(self.ident()?);
                        }
                        self.expect(Tok::RParen)?;
                        self.expect(Tok::RParen)?;
                        model.components.push(Component { var, model: sub, args });
                        if *self.peek() == Tok::Comma {
                            self.next();
                        }
                        if *self.peek() != Tok::LParen {
                            break;
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                "Constraints" => {
                    loop {
                        self.expect(Tok::LParen)?;
                        model.constraints.push(self.constraint()?);
                        self.expect(Tok::RParen)?;
                        if *self.peek() != Tok::LParen {
                            break;
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                "Alarm" => {
                    self.expect(Tok::LParen)?;
                    self.keyword("Level")?;
                    self.expect(Tok::Colon)?;
                    let lpos = self.pos();
                    let level = self.ident()?;
                    model.alarm = AlarmLevel::parse(&level)
                        .ok_or_else(|| DslError::new(lpos, format!("unknown alarm level '{level}'")))?;
                    self.expect(Tok::RParen)?;
                    self.expect(Tok::RParen)?;
                }
                _ => return Err(DslError::new(pos, format!("unknown section '{section}'"))),
            }
            seen.push(section);
        }
    }

    fn constraint(&mut self) -> PResult<Constraint> {
        let lhs = self.operand()?;
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Cmp(cmp) => {
                self.next();
                let rhs = self.operand()?;
                Ok(Constraint::Symbolic { lhs, cmp, rhs })
            }
            Tok::Ident(r) if AllenRelation::parse(&r).is_some() => {
                self.next();
                let relation = AllenRelation::parse(&r).expect("checked");
                let rhs = self.operand()?;
                match (lhs, rhs) {
                    (Operand::Var(left), Operand::Var(right)) => Ok(Constraint::Temporal { left, relation, right }),
                    _ => Err(DslError::new(pos, "temporal relations take two component variables")),
                }
            }
            other => self.err(format!("expected comparator or temporal relation, found {}", other.describe())),
        }
    }

    fn operand(&mut self) -> PResult<Operand> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.next();
                Ok(Operand::Literal(Value::Bool(s == "true")))
            }
            Tok::Ident(var) => {
                self.next();
                if *self.peek() == Tok::Arrow {
                    self.next();
                    let attr = self.ident()?;
                    Ok(Operand::Attr { var, attr })
                } else {
                    Ok(Operand::Var(var))
                }
            }
            _ => self.literal().map(Operand::Literal),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.next();
                Ok(i as f64)
            }
            Tok::Double(d) => {
                self.next();
                Ok(d)
            }
            other => self.err(format!("expected number, found {}", other.describe())),
        }
    }

    fn frame(&mut self) -> PResult<FrameId> {
        match self.peek().clone() {
            Tok::Int(i) if i >= 0 => {
                self.next();
                Ok(FrameId(i as u64))
            }
            other => self.err(format!("expected frame number, found {}", other.describe())),
        }
    }

    fn literal(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.next();
                Ok(Value::Int(i))
            }
            Tok::Double(d) => {
                self.next();
                Ok(Value::Double(d))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Value::Str(s))
            }
            Tok::At => {
                self.next();
                Ok(Value::Timestamp(self.frame()?))
            }
            Tok::LBracket => self.bracket_literal(),
            other => self.err(format!("expected operand, found {}", other.describe())),
        }
    }

    fn point3(&mut self) -> PResult<[f64; 3]> {
        self.expect(Tok::LBracket)?;
        let x = self.number()?;
        self.expect(Tok::Comma)?;
        let y = self.number()?;
        self.expect(Tok::Comma)?;
        let z = self.number()?;
        self.expect(Tok::RBracket)?;
        Ok([x, y, z])
    }

    fn bracket_literal(&mut self) -> PResult<Value> {
        let pos = self.pos();
        self.expect(Tok::LBracket)?;
        match self.peek() {
            Tok::RBracket => {
                self.next();
                return Ok(Value::Point3DList(Vec::new()));
            }
            Tok::LBracket => {
                let mut pts = vec![self.point3()?];
                while *self.peek() == Tok::Comma {
                    self.next();
                    pts.push(self.point3()?);
                }
                self.expect(Tok::RBracket)?;
                return Ok(Value::Point3DList(pts));
            }
            _ => {}
        }
        if matches!(self.peek(), Tok::Int(_)) && *self.peek_at(1) == Tok::DotDot {
            let a = self.frame()?;
            self.expect(Tok::DotDot)?;
            let b = self.frame()?;
            self.expect(Tok::RBracket)?;
            if b < a {
                return Err(DslError::new(pos, "interval end precedes its start"));
            }
            return Ok(Value::Interval(a, b));
        }
        let mut nums: Vec<Tok> = Vec::new();
        loop {
            match self.peek().clone() {
                t @ (Tok::Int(_) | Tok::Double(_)) => {
                    self.next();
                    nums.push(t);
                }
                other => return self.err(format!("expected number, found {}", other.describe())),
            }
            if *self.peek() == Tok::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(Tok::RBracket)?;
        let all_int = nums.iter().all(|t| matches!(t, Tok::Int(_)));
        let as_i = |t: &Tok| if let Tok::Int(i) = t { *i } else { 0 };
        let as_f = |t: &Tok| match t {
            Tok::Int(i) => *i as f64,
            Tok::Double(d) => *d,
            _ => 0.0,
        };
        match (nums.len(), all_int) {
            (2, true) => Ok(Value::Point2I([as_i(&nums[0]), as_i(&nums[1])])),
            (3, true) => Ok(Value::Point3I([as_i(&nums[0]), as_i(&nums[1]), as_i(&nums[2])])),
            (2, false) => Ok(Value::Point2D([as_f(&nums[0]), as_f(&nums[1])])),
            (3, false) => Ok(Value::Point3D([as_f(&nums[0]), as_f(&nums[1]), as_f(&nums[2])])),
            (n, _) => Err(DslError::new(pos, format!("points have 2 or 3 coordinates, found {n}"))),
        }
    }
}

fn parse_with_positions(text: &str) -> Result<(Ontology, Vec<Pos>), DslError> {
    let toks = tokenize(text)?;
    Parser { toks, at: 0 }.ontology()
}

/// Parses ontology text without resolving class names.
pub fn parse(text: &str) -> Result<Ontology, DslError> {
    parse_with_positions(text).map(|(o, _)| o)
}

/// Name of the implicit root of every class hierarchy.
pub const ROOT_CLASS: &str = "Object";

/// Parses ontology text and checks that every parent class is declared in the
/// text itself, in the prelude, or is the root.
pub fn parse_ontology(text: &str) -> Result<Ontology, DslError> {
    let (ont, positions) = parse_with_positions(text)?;
    let prelude = super::prelude();
    for (c, pos) in ont.classes.iter().zip(positions) {
        let known = c.parent == ROOT_CLASS || ont.class(&c.parent).is_some() || prelude.class(&c.parent).is_some();
        if !known {
            return Err(DslError::new(pos, format!("unknown parent class '{}' of '{}'", c.parent, c.name)));
        }
    }
    Ok(ont)
}

/// Parses a single literal, e.g. `[1.5, 2.0]` or `@12`.
pub fn parse_literal(text: &str) -> Result<Value, DslError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, at: 0 };
    let v = match p.operand()? {
        Operand::Literal(v) => v,
        _ => return Err(DslError::new(Pos { line: 1, column: 1 }, "expected a literal")),
    };
    if *p.peek() != Tok::Eof {
        return p.err("trailing input after literal");
    }
    Ok(v)
}
