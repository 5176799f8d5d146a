use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use thiserror::Error;

use crate::mr_tree::{parse_action, parse_subtree, parse_tree, MrTree, SystemAction, TreeParseError};
use crate::ontology::Ontology;
use crate::span::{EntityRecord, EntitySource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemplateError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("template `{template}`: {source}")]
    Symbol {
        template: String,
        #[source]
        source: TreeParseError,
    },
    #[error("template `{template}`: {message}")]
    Fixture { template: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexItem {
    pub surface: String,
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TurnTemplate {
    pub action: Option<String>,
    pub fixtures: Vec<String>,
    pub say: String,
    pub rewrite: Option<String>,
    pub tree: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub family: String,
    pub name: String,
    pub weight: u32,
    pub turns: Vec<TurnTemplate>,
}

/// Lexicons and conversation templates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateSet {
    pub lexicons: BTreeMap<String, Vec<LexItem>>,
    pub templates: Vec<Template>,
}

/// A template instantiated with concrete fillers, still in text form.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnText {
    pub action: Option<String>,
    pub fixtures: Vec<String>,
    pub say: String,
    pub rewrite: Option<String>,
    pub tree: String,
}

fn syntax(line: usize, message: impl Into<String>) -> TemplateError {
    TemplateError::Syntax {
        line,
        message: message.into(),
    }
}

/// Slot references `{class}`, `{class#k}`, `{class!}` in a pattern.
fn slot_refs(pattern: &str) -> Vec<(String, u32, bool)> {
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        let inner = &rest[open + 1..open + close];
        out.push(parse_slot(inner));
        rest = &rest[open + close + 1..];
    }
    out
}

fn parse_slot(inner: &str) -> (String, u32, bool) {
    let (inner, value) = match inner.strip_suffix('!') {
        Some(s) => (s, true),
        None => (inner, false),
    };
    match inner.split_once('#') {
        Some((c, k)) => (c.to_string(), k.parse().unwrap_or(u32::MAX), value),
        None => (inner.to_string(), 0, value),
    }
}

impl TemplateSet {
    pub fn parse(src: &str) -> Result<Self, TemplateError> {
        let mut set = TemplateSet::default();
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let (kw, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
            let rest = rest.trim();
            match kw {
                "lex" => {
                    let (name, items) = rest
                        .split_once('=')
                        .ok_or_else(|| syntax(line, "expected `lex NAME = items`"))?;
                    let items: Vec<LexItem> = items
                        .split(';')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| match s.split_once("=>") {
                            Some((a, b)) => LexItem {
                                surface: a.trim().to_string(),
                                value: Some(b.trim().to_string()),
                            },
                            None => LexItem {
                                surface: s.to_string(),
                                value: None,
                            },
                        })
                        .collect();
                    if items.is_empty() {
                        return Err(syntax(line, "empty lexicon"));
                    }
                    set.lexicons.insert(name.trim().to_string(), items);
                }
                "template" => {
                    let parts: Vec<&str> = rest.split_whitespace().collect();
                    let (family, name, weight) = match parts[..] {
                        [f, n] => (f, n, 1),
                        [f, n, w] => (f, n, w.parse().map_err(|_| syntax(line, "bad weight"))?),
                        _ => return Err(syntax(line, "expected `template FAMILY NAME [WEIGHT]`")),
                    };
                    set.templates.push(Template {
                        family: family.to_string(),
                        name: name.to_string(),
                        weight,
                        turns: vec![TurnTemplate::default()],
                    });
                }
                "action" | "fixture" | "say" | "rewrite" | "tree" | "next" => {
                    let t = set
                        .templates
                        .last_mut()
                        .ok_or_else(|| syntax(line, format!("`{kw}` outside a template")))?;
                    let turn = t.turns.last_mut().expect("templates start with a turn");
                    match kw {
                        "action" => turn.action = Some(rest.to_string()),
                        "fixture" => turn.fixtures.push(rest.to_string()),
                        "say" => turn.say = rest.to_string(),
                        "rewrite" => turn.rewrite = Some(rest.to_string()),
                        "tree" => turn.tree = rest.to_string(),
                        _ => t.turns.push(TurnTemplate::default()),
                    }
                }
                other => return Err(syntax(line, format!("unknown directive `{other}`"))),
            }
        }
        for t in &set.templates {
            for (k, turn) in t.turns.iter().enumerate() {
                if turn.say.is_empty() || turn.tree.is_empty() {
                    return Err(syntax(0, format!("template `{}` turn {k} lacks `say` or `tree`", t.name)));
                }
                let all = [&turn.say, &turn.tree]
                    .into_iter()
                    .chain(turn.action.iter())
                    .chain(turn.rewrite.iter())
                    .chain(turn.fixtures.iter());
                for pat in all {
                    for (class, k, _) in slot_refs(pat) {
                        if k == u32::MAX || !set.lexicons.contains_key(&class) {
                            return Err(syntax(0, format!("template `{}` uses unknown slot `{class}`", t.name)));
                        }
                    }
                }
            }
        }
        Ok(set)
    }

    pub fn default_set() -> Self {
        Self::parse(crate::resources::TEMPLATES).expect("bundled templates parse")
    }

    /// Instantiates every template once and parses its trees, actions and
    /// fixtures against `o`.
    pub fn check<R: Rng>(&self, o: &Ontology, rng: &mut R) -> Result<(), TemplateError> {
        for t in &self.templates {
            for turn in self.instantiate(t, rng) {
                materialize(o, &t.name, &turn)?;
            }
        }
        Ok(())
    }

    pub fn instantiate<R: Rng>(&self, t: &Template, rng: &mut R) -> Vec<TurnText> {
        let mut b = Bindings::default();
        t.turns
            .iter()
            .map(|turn| TurnText {
                action: turn.action.as_ref().map(|a| self.fill(a, rng, &mut b)),
                fixtures: turn.fixtures.iter().map(|f| self.fill(f, rng, &mut b)).collect(),
                say: self.fill(&choose(&turn.say, rng), rng, &mut b),
                rewrite: turn.rewrite.as_ref().map(|r| self.fill(r, rng, &mut b)),
                tree: self.fill(&turn.tree, rng, &mut b),
            })
            .collect()
    }

    fn fill<R: Rng>(&self, pattern: &str, rng: &mut R, b: &mut Bindings) -> String {
        let mut out = String::new();
        let mut rest = pattern;
        while let Some(open) = rest.find('{') {
            let close = open + rest[open..].find('}').expect("checked at parse time");
            out.push_str(&rest[..open]);
            let (class, k, value) = parse_slot(&rest[open + 1..close]);
            let items = &self.lexicons[&class];
            let idx = b.get(&class, k, items.len(), rng);
            let item = &items[idx];
            out.push_str(if value {
                item.value.as_deref().unwrap_or(&item.surface)
            } else {
                &item.surface
            });
            rest = &rest[close + 1..];
        }
        out.push_str(rest);
        out
    }
}

/// Filler choices shared by every turn of one conversation.
#[derive(Default)]
struct Bindings {
    chosen: HashMap<(String, u32), usize>,
}

impl Bindings {
    fn get<R: Rng>(&mut self, class: &str, k: u32, n: usize, rng: &mut R) -> usize {
        if let Some(&i) = self.chosen.get(&(class.to_string(), k)) {
            return i;
        }
        let used: Vec<usize> = self
            .chosen
            .iter()
            .filter(|((c, _), _)| c == class)
            .map(|(_, &i)| i)
            .collect();
        let free: Vec<usize> = (0..n).filter(|i| !used.contains(i)).collect();
        let i = if free.is_empty() {
            rng.gen_range(0..n)
        } else {
            free[rng.gen_range(0..free.len())]
        };
        self.chosen.insert((class.to_string(), k), i);
        i
    }
}

/// Resolves `(a|b)` and `[a|b]` groups; collapses whitespace.
pub fn choose<R: Rng>(pattern: &str, rng: &mut R) -> String {
    let mut out = String::new();
    let mut chars = pattern.chars();
    while let Some(c) = chars.next() {
        let close = match c {
            '(' => ')',
            '[' => ']',
            _ => {
                out.push(c);
                continue;
            }
        };
        let group: String = chars.by_ref().take_while(|&x| x != close).collect();
        let options: Vec<&str> = group.split('|').collect();
        if close == ']' && rng.gen_bool(0.5) {
            continue;
        }
        out.push_str(options[rng.gen_range(0..options.len())]);
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn source(name: &str) -> Option<EntitySource> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).ok()
}

/// A turn ready for the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterializedTurn {
    pub action: SystemAction,
    pub fixtures: Vec<EntityRecord>,
    pub say: String,
    pub rewrite: Option<String>,
    pub tree: MrTree,
}

/// Parses `source | id | label | canonical | alternates | payload`, with `-`
/// for no alternates or no payload.
pub fn parse_fixture(o: &Ontology, line: &str) -> Result<EntityRecord, String> {
    let bad = |m: &str| format!("{m}: `{line}`");
    let parts: Vec<&str> = line.split('|').map(str::trim).collect();
    let [src, id, label, canonical, alternates, payload] = parts[..] else {
        return Err(bad("expected six `|`-separated fields"));
    };
    let src = source(src).ok_or_else(|| bad("unknown source"))?;
    let mut rec = EntityRecord::new(id, label, canonical, src);
    if alternates != "-" {
        rec = rec.with_alternates(alternates.split(',').map(str::trim));
    }
    if payload != "-" {
        rec = rec.with_payload(parse_subtree(o, payload).map_err(|e| bad(&e.to_string()))?);
    }
    Ok(rec)
}

pub fn materialize(o: &Ontology, template: &str, t: &TurnText) -> Result<MaterializedTurn, TemplateError> {
    let sym = |source| TemplateError::Symbol {
        template: template.to_string(),
        source,
    };
    let action = match &t.action {
        Some(a) => parse_action(o, a).map_err(sym)?,
        None => SystemAction::none(),
    };
    let fixtures = t
        .fixtures
        .iter()
        .map(|f| {
            parse_fixture(o, f).map_err(|message| TemplateError::Fixture {
                template: template.to_string(),
                message,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MaterializedTurn {
        action,
        fixtures,
        say: t.say.clone(),
        rewrite: t.rewrite.clone(),
        tree: parse_tree(o, &t.tree).map_err(sym)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn choose_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let s = choose("[please] (set|make) an alarm", &mut rng);
            assert!(
                ["please set an alarm", "please make an alarm", "set an alarm", "make an alarm"]
                    .contains(&s.as_str()),
                "{s}"
            );
        }
    }

    #[test]
    fn distinct_fillers_per_index() {
        let set = TemplateSet::parse(
            "lex n = a ; b\ntemplate f t\n  say {n} {n#2}\n  tree Unsupported()\n",
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let turns = set.instantiate(&set.templates[0], &mut rng);
            let w: Vec<&str> = turns[0].say.split(' ').collect();
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn bundled_templates_check_against_toy_ontology() {
        let o = crate::resources::toy_ontology();
        let set = TemplateSet::default_set();
        set.check(&o, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    }

    #[test]
    fn errors() {
        assert!(TemplateSet::parse("say x").is_err());
        assert!(TemplateSet::parse("template f t\n  say {nope}\n  tree Unsupported()").is_err());
        assert!(TemplateSet::parse("lex = ").is_err());
        let o = crate::resources::toy_ontology();
        let set = TemplateSet::parse("template f t\n  say x\n  tree Alarm.explode()").unwrap();
        assert!(matches!(
            set.check(&o, &mut ChaCha8Rng::seed_from_u64(1)),
            Err(TemplateError::Symbol { .. })
        ));
    }
}
