use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{IntentChoice, PromptConfig};
use crate::error::{Error, Result};

const BUILTIN: [&str; 6] = [
    include_str!("../../templates/template1.toml"),
    include_str!("../../templates/template2.toml"),
    include_str!("../../templates/template3.toml"),
    include_str!("../../templates/template4.toml"),
    include_str!("../../templates/template5.toml"),
    include_str!("../../templates/template6.toml"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateStyle {
    Direct,
    ChainOfThought,
    InstructionList,
    RolePlay,
}

/// Component variables usable in segment conditions. `I` is `IC | IF`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    A,
    IC,
    IF,
    I,
    E,
}

impl Var {
    fn eval(self, c: &PromptConfig) -> bool {
        match self {
            Var::A => c.use_abstracts,
            Var::IC => c.intent == IntentChoice::Categorical,
            Var::IF => c.intent == IntentChoice::FreeForm,
            Var::I => c.intent != IntentChoice::None,
            Var::E => c.use_example,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Var::A => "A",
            Var::IC => "IC",
            Var::IF => "IF",
            Var::I => "I",
            Var::E => "E",
        })
    }
}

/// Boolean expression over component variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    Const(bool),
    Var(Var),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    pub fn parse(src: &str) -> Result<Cond> {
        let tokens = lex(src)?;
        let mut p = CondParser { tokens, pos: 0, src };
        let cond = p.or()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("trailing input"));
        }
        Ok(cond)
    }

    pub fn eval(&self, c: &PromptConfig) -> bool {
        match self {
            Cond::Const(b) => *b,
            Cond::Var(v) => v.eval(c),
            Cond::Not(x) => !x.eval(c),
            Cond::And(a, b) => a.eval(c) && b.eval(c),
            Cond::Or(a, b) => a.eval(c) || b.eval(c),
        }
    }

    /// Whether the expression mentions anything tied to `var`.
    pub fn mentions(&self, var: Var) -> bool {
        match self {
            Cond::Const(_) => false,
            Cond::Var(v) => {
                *v == var
                    || (var == Var::I && matches!(v, Var::IC | Var::IF))
                    || (*v == Var::I && matches!(var, Var::IC | Var::IF))
            }
            Cond::Not(x) => x.mentions(var),
            Cond::And(a, b) | Cond::Or(a, b) => a.mentions(var) || b.mentions(var),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Not,
    And,
    Or,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '!' => {
                chars.next();
                out.push(Tok::Not);
            }
            '&' => {
                chars.next();
                out.push(Tok::And);
            }
            '|' => {
                chars.next();
                out.push(Tok::Or);
            }
            '(' => {
                chars.next();
                out.push(Tok::LParen);
            }
            ')' => {
                chars.next();
                out.push(Tok::RParen);
            }
            c if c.is_ascii_alphabetic() => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Ident(ident));
            }
            other => {
                return Err(Error::Template(format!(
                    "unexpected {other:?} in condition {src:?}"
                )))
            }
        }
    }
    Ok(out)
}

struct CondParser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl CondParser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Template(format!("{what} in condition {:?}", self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn or(&mut self) -> Result<Cond> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            lhs = Cond::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Cond> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            lhs = Cond::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Cond> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(Cond::Not(Box::new(self.unary()?)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("missing ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(match name.as_str() {
                    "true" => Cond::Const(true),
                    "false" => Cond::Const(false),
                    "A" => Cond::Var(Var::A),
                    "IC" => Cond::Var(Var::IC),
                    "IF" => Cond::Var(Var::IF),
                    "I" => Cond::Var(Var::I),
                    "E" => Cond::Var(Var::E),
                    _ => return Err(self.error(&format!("unknown variable {name:?}"))),
                })
            }
            _ => Err(self.error("expected an operand")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct SegmentFile {
    when: String,
    text: String,
}

#[derive(Debug, Clone, Deserialize)]
struct TemplateFile {
    id: u8,
    style: TemplateStyle,
    #[serde(default)]
    system: Vec<SegmentFile>,
    #[serde(default)]
    user: Vec<SegmentFile>,
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub when: Cond,
    pub when_src: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    System,
    User,
}

/// An instruction template: conditional fragments for the system part
/// (concatenated) and conditional lines for the user part (joined by `\n`).
#[derive(Debug, Clone)]
pub struct Template {
    pub template_id: u8,
    pub style: TemplateStyle,
    pub system: Vec<Segment>,
    pub user: Vec<Segment>,
}

/// Values substituted for `{citing_abstract}`, `{cited_abstract}`,
/// `{intent}` and `{example}`.
#[derive(Debug, Clone, Default)]
pub struct SlotValues<'a> {
    pub citing_abstract: &'a str,
    pub cited_abstract: &'a str,
    pub intent: &'a str,
    pub example: &'a str,
}

const SLOTS: [&str; 4] = ["citing_abstract", "cited_abstract", "intent", "example"];

impl SlotValues<'_> {
    fn get(&self, name: &str) -> Option<&str> {
        match name {
            "citing_abstract" => Some(self.citing_abstract),
            "cited_abstract" => Some(self.cited_abstract),
            "intent" => Some(self.intent),
            "example" => Some(self.example),
            _ => None,
        }
    }
}

/// One rendered segment, kept for locality checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSegment {
    pub part: Part,
    pub index: usize,
    pub text: String,
}

impl Template {
    pub fn from_toml(src: &str) -> Result<Template> {
        let file: TemplateFile =
            toml::from_str(src).map_err(|e| Error::Template(format!("bad template file: {e}")))?;
        let convert = |segs: Vec<SegmentFile>| -> Result<Vec<Segment>> {
            segs.into_iter()
                .map(|s| {
                    check_placeholders(&s.text)?;
                    Ok(Segment {
                        when: Cond::parse(&s.when)?,
                        when_src: s.when,
                        text: s.text,
                    })
                })
                .collect()
        };
        Ok(Template {
            template_id: file.id,
            style: file.style,
            system: convert(file.system)?,
            user: convert(file.user)?,
        })
    }

    /// Active segments in order, with placeholders filled.
    pub fn render_trace(&self, config: &PromptConfig, slots: &SlotValues<'_>) -> Vec<RenderedSegment> {
        let mut out = Vec::new();
        for (part, segs) in [(Part::System, &self.system), (Part::User, &self.user)] {
            for (index, seg) in segs.iter().enumerate() {
                if seg.when.eval(config) {
                    out.push(RenderedSegment {
                        part,
                        index,
                        text: fill(&seg.text, slots),
                    });
                }
            }
        }
        out
    }

    /// `(system, user)` text for the configuration.
    pub fn render(&self, config: &PromptConfig, slots: &SlotValues<'_>) -> (String, String) {
        let trace = self.render_trace(config, slots);
        let system: String = trace
            .iter()
            .filter(|s| s.part == Part::System)
            .map(|s| s.text.as_str())
            .collect();
        let user: Vec<&str> = trace
            .iter()
            .filter(|s| s.part == Part::User)
            .map(|s| s.text.as_str())
            .collect();
        (system, user.join("\n"))
    }
}

fn check_placeholders(text: &str) -> Result<()> {
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else {
            return Err(Error::Template(format!("unclosed placeholder in {text:?}")));
        };
        let name = &rest[open + 1..open + close];
        if !SLOTS.contains(&name) {
            return Err(Error::Template(format!("unknown placeholder {{{name}}}")));
        }
        rest = &rest[open + close + 1..];
    }
    Ok(())
}

// Single pass, so braces inside substituted values are left alone.
fn fill(text: &str, slots: &SlotValues<'_>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        match rest[open..].find('}') {
            Some(close) => {
                let name = &rest[open + 1..open + close];
                match slots.get(name) {
                    Some(v) => out.push_str(v),
                    None => out.push_str(&rest[open..=open + close]),
                }
                rest = &rest[open + close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Templates by id.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<u8, Template>,
}

impl TemplateSet {
    pub fn builtin() -> TemplateSet {
        let templates = BUILTIN
            .iter()
            .map(|src| {
                let t = Template::from_toml(src).expect("builtin template parses");
                (t.template_id, t)
            })
            .collect();
        TemplateSet { templates }
    }

    /// Load every `*.toml` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<TemplateSet> {
        let entries = std::fs::read_dir(dir).map_err(|source| Error::Read {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        let mut templates = BTreeMap::new();
        for path in paths {
            let src = std::fs::read_to_string(&path).map_err(|source| Error::Read {
                path: path.clone(),
                source,
            })?;
            let t = Template::from_toml(&src)
                .map_err(|e| Error::Template(format!("{}: {e}", path.display())))?;
            if templates.insert(t.template_id, t).is_some() {
                return Err(Error::Template(format!(
                    "duplicate template id in {}",
                    path.display()
                )));
            }
        }
        if templates.is_empty() {
            return Err(Error::Template(format!("no templates in {}", dir.display())));
        }
        Ok(TemplateSet { templates })
    }

    pub fn get(&self, id: u8) -> Result<&Template> {
        self.templates
            .get(&id)
            .ok_or_else(|| Error::Template(format!("unknown template id {id}")))
    }

    pub fn ids(&self) -> Vec<u8> {
        self.templates.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> PromptConfig {
        s.parse().unwrap()
    }

    #[test]
    fn condition_grammar() {
        let c = Cond::parse("(I & !E) | (!I & E)").unwrap();
        assert!(c.eval(&cfg("1+A+IF")));
        assert!(c.eval(&cfg("1+A+E")));
        assert!(!c.eval(&cfg("1+A+IC+E")));
        assert!(!c.eval(&cfg("1+A")));
        assert!(Cond::parse("A &").is_err());
        assert!(Cond::parse("B").is_err());
        assert!(Cond::parse("(A").is_err());
        assert!(Cond::parse("A)").is_err());
        assert!(Cond::parse("I").unwrap().mentions(Var::IF));
        assert!(!Cond::parse("A & E").unwrap().mentions(Var::I));
    }

    #[test]
    fn fill_is_single_pass() {
        let slots = SlotValues {
            citing_abstract: "{intent}",
            intent: "X",
            ..Default::default()
        };
        assert_eq!(fill("a {citing_abstract} {intent}", &slots), "a {intent} X");
    }

    #[test]
    fn unknown_placeholder_rejected() {
        let src = "id = 1\nstyle = \"direct\"\n[[user]]\nwhen = \"true\"\ntext = \"{gold}\"\n";
        assert!(Template::from_toml(src).is_err());
    }

    #[test]
    fn builtin_set_has_six() {
        let set = TemplateSet::builtin();
        assert_eq!(set.ids(), vec![1, 2, 3, 4, 5, 6]);
        assert!(set.get(7).is_err());
        assert_eq!(set.get(2).unwrap().style, TemplateStyle::ChainOfThought);
        assert!(set.get(2).unwrap().system.is_empty());
    }

    #[test]
    fn load_dir_matches_builtin() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
        let loaded = TemplateSet::load_dir(&dir).unwrap();
        assert_eq!(loaded.ids(), TemplateSet::builtin().ids());
    }
}
