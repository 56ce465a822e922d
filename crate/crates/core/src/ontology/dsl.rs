//! Line-oriented rule language.
//!
//! ```text
//! rule      := "rule" ID ":" SUBJECT ANTECEDENT "=>" CONSEQUENT
//! SUBJECT   := ("mis" | "ok") CLASSSET
//! ANTECEDENT:= "surroundedBy" CLASSSET | "noNeighborOf" CLASSSET
//!            | "neighborhoodContains" CLASSSET | "always"
//! CONSEQUENT:= "adoptSurroundClass" | "adoptMaxClass"
//!            | "shadow" ("+1" | "-1") | "elevation" ("0" | "1" | "2")
//! CLASSSET  := "{" NAME ("," NAME)* "}" | NAME
//! ```
//!
//! `#` starts a comment. Rule order is priority order.

use std::fmt::Write;
use std::sync::Arc;

use super::{Antecedent, Consequent, Rule, RuleBase};
use crate::error::{Error, Result};
use crate::superpixel::UnitStatus;
use crate::taxonomy::{ClassSet, Taxonomy};

#[derive(Clone, Debug, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Number(&'a str),
    Colon,
    Comma,
    LBrace,
    RBrace,
    Arrow,
}

struct Lexed<'a> {
    tok: Tok<'a>,
    col: usize,
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Lexed<'_>>> {
    let mut out = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    let err = |col: usize, msg: String| Error::Syntax {
        line: lineno,
        column: col,
        message: msg,
    };
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = line[..i].chars().count() + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            ':' => {
                out.push(Lexed {
                    tok: Tok::Colon,
                    col,
                });
                i += 1;
            }
            ',' => {
                out.push(Lexed {
                    tok: Tok::Comma,
                    col,
                });
                i += 1;
            }
            '{' => {
                out.push(Lexed {
                    tok: Tok::LBrace,
                    col,
                });
                i += 1;
            }
            '}' => {
                out.push(Lexed {
                    tok: Tok::RBrace,
                    col,
                });
                i += 1;
            }
            '=' if bytes.get(i + 1) == Some(&b'>') => {
                out.push(Lexed {
                    tok: Tok::Arrow,
                    col,
                });
                i += 2;
            }
            '+' | '-' | '0'..='9' => {
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push(Lexed {
                    tok: Tok::Number(&line[start..i]),
                    col,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Lexed {
                    tok: Tok::Word(&line[start..i]),
                    col,
                });
            }
            other => return Err(err(col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a, 't> {
    toks: Vec<Lexed<'a>>,
    pos: usize,
    line: usize,
    eol_col: usize,
    taxonomy: &'t Taxonomy,
}

impl<'a> Parser<'a, '_> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.eol_col, |t| t.col)
    }

    fn syntax(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.col(),
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<Tok<'a>> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok<'static>, what: &str) -> Result<()> {
        match self.toks.get(self.pos) {
            Some(t) if t.tok == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax(format!("expected {what}"))),
        }
    }

    fn word(&mut self, what: &str) -> Result<&'a str> {
        match self.toks.get(self.pos) {
            Some(Lexed {
                tok: Tok::Word(w), ..
            }) => {
                let w = *w;
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.syntax(format!("expected {what}"))),
        }
    }

    fn class_name(&mut self) -> Result<crate::taxonomy::ClassId> {
        let column = self.col();
        let name = self.word("class name")?;
        self.taxonomy
            .id_of(name)
            .ok_or_else(|| Error::UnknownClass {
                name: name.to_string(),
                line: self.line,
                column,
            })
    }

    fn class_set(&mut self) -> Result<ClassSet> {
        let mut set = ClassSet::EMPTY;
        if matches!(
            self.toks.get(self.pos),
            Some(Lexed {
                tok: Tok::LBrace,
                ..
            })
        ) {
            self.pos += 1;
            set.insert(self.class_name()?);
            loop {
                match self.next() {
                    Some(Tok::Comma) => set.insert(self.class_name()?),
                    Some(Tok::RBrace) => break,
                    _ => {
                        self.pos = self.pos.saturating_sub(1);
                        return Err(self.syntax("expected `,` or `}`"));
                    }
                }
            }
        } else {
            set.insert(self.class_name()?);
        }
        Ok(set)
    }

    fn rule(&mut self, priority: i64) -> Result<Rule> {
        match self.word("`rule`")? {
            "rule" => {}
            _ => {
                self.pos -= 1;
                return Err(self.syntax("expected `rule`"));
            }
        }
        let id = self.word("rule id")?.to_string();
        self.expect(Tok::Colon, "`:`")?;
        let status = match self.word("`mis` or `ok`")? {
            "mis" => UnitStatus::MisClassified,
            "ok" => UnitStatus::Classified,
            _ => {
                self.pos -= 1;
                return Err(self.syntax("expected `mis` or `ok`"));
            }
        };
        let subject = self.class_set()?;
        let antecedent = match self.word("antecedent")? {
            "surroundedBy" => Antecedent::SurroundedBy(self.class_set()?),
            "noNeighborOf" => Antecedent::NoNeighborOf(self.class_set()?),
            "neighborhoodContains" => Antecedent::NeighborhoodContains(self.class_set()?),
            "always" => Antecedent::Unconditional,
            _ => {
                self.pos -= 1;
                return Err(self.syntax(
                    "expected `surroundedBy`, `noNeighborOf`, `neighborhoodContains` or `always`",
                ));
            }
        };
        self.expect(Tok::Arrow, "`=>`")?;
        let consequent = match self.word("consequent")? {
            "adoptSurroundClass" => Consequent::AdoptSurroundClass,
            "adoptMaxClass" => Consequent::AdoptMaxClass,
            "shadow" => match self.next() {
                Some(Tok::Number("+1")) => Consequent::AssertShadow(1),
                Some(Tok::Number("-1")) => Consequent::AssertShadow(-1),
                _ => {
                    self.pos -= 1;
                    return Err(self.syntax("expected `+1` or `-1`"));
                }
            },
            "elevation" => match self.next() {
                Some(Tok::Number(n @ ("0" | "1" | "2"))) => {
                    Consequent::AssertElevation(n.parse().unwrap())
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.syntax("expected `0`, `1` or `2`"));
                }
            },
            _ => {
                self.pos -= 1;
                return Err(self.syntax("expected a consequent"));
            }
        };
        if self.pos < self.toks.len() {
            return Err(self.syntax("unexpected trailing input"));
        }
        Rule::new(id, status, subject, antecedent, consequent, priority).map_err(|e| {
            Error::Syntax {
                line: self.line,
                column: 1,
                message: e.to_string(),
            }
        })
    }
}

/// Parse rule DSL text into a rule base over `taxonomy`.
pub fn parse_rules(text: &str, taxonomy: Arc<Taxonomy>) -> Result<RuleBase> {
    let mut rules: Vec<Rule> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let toks = lex(line, lineno)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = Parser {
            toks,
            pos: 0,
            line: lineno,
            eol_col: line.chars().count() + 1,
            taxonomy: &taxonomy,
        };
        let rule = p.rule(rules.len() as i64 + 1)?;
        if rules.iter().any(|r| r.id == rule.id) {
            return Err(Error::DuplicateRule(rule.id));
        }
        rules.push(rule);
    }
    RuleBase::new(rules, taxonomy)
}

fn write_set(out: &mut String, set: &ClassSet, taxonomy: &Taxonomy) {
    let names: Vec<&str> = set.iter().map(|c| taxonomy.name(c)).collect();
    if names.len() == 1 {
        out.push_str(names[0]);
    } else {
        let _ = write!(out, "{{{}}}", names.join(", "));
    }
}

pub(super) fn serialize(base: &RuleBase) -> String {
    let tax = base.taxonomy();
    let mut out = String::new();
    for r in base.rules() {
        let _ = write!(
            out,
            "rule {}: {} ",
            r.id,
            match r.subject_status {
                UnitStatus::MisClassified => "mis",
                UnitStatus::Classified => "ok",
            }
        );
        write_set(&mut out, &r.subject_classes, tax);
        out.push(' ');
        match &r.antecedent {
            Antecedent::SurroundedBy(s) => {
                out.push_str("surroundedBy ");
                write_set(&mut out, s, tax);
            }
            Antecedent::NoNeighborOf(s) => {
                out.push_str("noNeighborOf ");
                write_set(&mut out, s, tax);
            }
            Antecedent::NeighborhoodContains(s) => {
                out.push_str("neighborhoodContains ");
                write_set(&mut out, s, tax);
            }
            Antecedent::Unconditional => out.push_str("always"),
        }
        out.push_str(" => ");
        match r.consequent {
            Consequent::AdoptSurroundClass => out.push_str("adoptSurroundClass"),
            Consequent::AdoptMaxClass => out.push_str("adoptMaxClass"),
            Consequent::AssertShadow(v) => {
                let _ = write!(out, "shadow {}", if v > 0 { "+1" } else { "-1" });
            }
            Consequent::AssertElevation(v) => {
                let _ = write!(out, "elevation {v}");
            }
        }
        out.push('\n');
    }
    out
}
