//! Routing among the overrides parser, the knowledge parser stub and the
//! general parser.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{rewrite_query, words, DialogContext, Rewrite};
use crate::mr_tree::{parse_tree, validate_tree, Children, MrNode, MrTree, TreeParseError, Violation};
use crate::ontology::Ontology;
use crate::parser_core::{parse, ParseError, ParseOutput, ParserModel, ParserResources};
use crate::span::lemmatize;

pub const KNOWLEDGE_VERB: &str = "Knowledge.query";
pub const KNOWLEDGE_TEXT: &str = "Knowledge.text";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FederationError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("override `{pattern}`: {source}")]
    Tree {
        pattern: String,
        #[source]
        source: TreeParseError,
    },
    #[error("override `{pattern}` has an invalid tree: {violation}")]
    Invalid { pattern: String, violation: Violation },
    #[error("override `{pattern}` uses capture `{{{capture}}}` that its pattern does not bind")]
    Unbound { pattern: String, capture: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternItem {
    /// A lemma that must match one utterance word.
    Word(String),
    /// Binds one or more words.
    Capture(String),
}

fn lemma(word: &str) -> String {
    lemmatize(&word.to_lowercase(), "en")
}

fn parse_pattern(src: &str) -> Vec<PatternItem> {
    src.split_whitespace()
        .map(|w| match w.strip_prefix('{').and_then(|w| w.strip_suffix('}')) {
            Some(name) => PatternItem::Capture(name.to_string()),
            None => PatternItem::Word(lemma(w)),
        })
        .filter(|p| !matches!(p, PatternItem::Word(w) if w.is_empty()))
        .collect()
}

/// A hand-written pattern with the tree it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct OverrideRule {
    pub pattern: Vec<PatternItem>,
    /// String leaves spelled `{name}` are replaced by the capture `name`.
    pub tree: MrTree,
}

impl OverrideRule {
    pub fn new(pattern: &str, tree: MrTree) -> Self {
        OverrideRule {
            pattern: parse_pattern(pattern),
            tree,
        }
    }

    pub fn pattern_text(&self) -> String {
        self.pattern
            .iter()
            .map(|p| match p {
                PatternItem::Word(w) => w.clone(),
                PatternItem::Capture(c) => format!("{{{c}}}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Captures bound by matching the whole utterance, or `None`.
    pub fn matches(&self, utterance: &str) -> Option<Vec<(String, String)>> {
        let ws = words(utterance);
        let lemmas: Vec<String> = ws.iter().map(|w| lemma(w)).collect();
        let mut binds = Vec::new();
        match_from(&self.pattern, &ws, &lemmas, 0, &mut binds).then_some(binds)
    }

    /// The rule's tree with every capture substituted.
    pub fn instantiate(&self, captures: &[(String, String)]) -> MrTree {
        let mut t = self.tree.clone();
        substitute(&mut t.children, captures);
        t
    }
}

fn match_from(
    pattern: &[PatternItem],
    ws: &[String],
    lemmas: &[String],
    at: usize,
    binds: &mut Vec<(String, String)>,
) -> bool {
    let Some((head, rest)) = pattern.split_first() else {
        return at == ws.len();
    };
    match head {
        PatternItem::Word(w) => at < ws.len() && lemmas[at] == *w && match_from(rest, ws, lemmas, at + 1, binds),
        PatternItem::Capture(name) => {
            for end in at + 1..=ws.len() {
                binds.push((name.clone(), ws[at..end].join(" ")));
                if match_from(rest, ws, lemmas, end, binds) {
                    return true;
                }
                binds.pop();
            }
            false
        }
    }
}

fn substitute(children: &mut Children, captures: &[(String, String)]) {
    for nodes in children.values_mut() {
        for n in nodes.iter_mut() {
            match n {
                MrNode::String(s) => {
                    if let Some((_, v)) = captures.iter().find(|(k, _)| s == &format!("{{{k}}}")) {
                        *s = v.clone();
                    }
                }
                MrNode::Tree(sub) => substitute(&mut sub.children, captures),
                MrNode::Enum(_) => {}
            }
        }
    }
}

fn placeholders(children: &Children, out: &mut Vec<String>) {
    for n in children.values().flatten() {
        match n {
            MrNode::String(s) => {
                if let Some(name) = s.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
                    out.push(name.to_string());
                }
            }
            MrNode::Tree(sub) => placeholders(&sub.children, out),
            MrNode::Enum(_) => {}
        }
    }
}

/// Override rules in precedence order: later rules win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverrideRules {
    rules: Vec<OverrideRule>,
}

impl OverrideRules {
    /// Parses `pattern TAB tree` lines; `#` starts a comment line.
    pub fn parse(o: &Ontology, src: &str) -> Result<Self, FederationError> {
        let mut rules = OverrideRules::default();
        for (i, raw) in src.lines().enumerate() {
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let (pattern, tree) = raw.split_once('\t').ok_or(FederationError::Syntax {
                line: i + 1,
                message: "expected `pattern<TAB>tree`".into(),
            })?;
            let tree = parse_tree(o, tree.trim()).map_err(|source| FederationError::Tree {
                pattern: pattern.trim().to_string(),
                source,
            })?;
            rules = add_override(o, rules, OverrideRule::new(pattern, tree))?;
        }
        Ok(rules)
    }

    pub fn bundled(o: &Ontology) -> Result<Self, FederationError> {
        Self::parse(o, crate::resources::OVERRIDES)
    }

    pub fn rules(&self) -> &[OverrideRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The highest-precedence matching rule and its instantiated tree.
    pub fn find(&self, utterance: &str) -> Option<(&OverrideRule, MrTree)> {
        self.rules
            .iter()
            .rev()
            .find_map(|r| r.matches(utterance).map(|c| (r, r.instantiate(&c))))
    }
}

/// Appends `r`, replacing any rule with the same pattern.
pub fn add_override(o: &Ontology, mut rules: OverrideRules, r: OverrideRule) -> Result<OverrideRules, FederationError> {
    let pattern = r.pattern_text();
    let mut names = Vec::new();
    placeholders(&r.tree.children, &mut names);
    for name in &names {
        if !r.pattern.contains(&PatternItem::Capture(name.clone())) {
            return Err(FederationError::Unbound {
                pattern,
                capture: name.clone(),
            });
        }
    }
    if let Some(violation) = validate_tree(o, &r.tree).into_iter().next() {
        return Err(FederationError::Invalid { pattern, violation });
    }
    rules.rules.retain(|x| x.pattern != r.pattern);
    rules.rules.push(r);
    Ok(rules)
}

/// Word-sequence prefixes that send a query to the knowledge parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGate {
    prefixes: Vec<Vec<String>>,
}

impl KnowledgeGate {
    pub fn parse(src: &str) -> Self {
        KnowledgeGate {
            prefixes: src
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.split_whitespace().map(str::to_lowercase).collect())
                .collect(),
        }
    }

    /// The first prefix the text starts with.
    pub fn matches(&self, text: &str) -> Option<String> {
        let ws: Vec<String> = words(text).iter().map(|w| w.to_lowercase()).collect();
        self.prefixes
            .iter()
            .find(|p| ws.len() > p.len() && ws[..p.len()] == p[..])
            .map(|p| p.join(" "))
    }
}

impl Default for KnowledgeGate {
    fn default() -> Self {
        Self::parse(crate::resources::KNOWLEDGE_GATE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParserKind {
    Overrides,
    Knowledge,
    General,
}

impl fmt::Display for ParserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParserKind::Overrides => "overrides",
            ParserKind::Knowledge => "knowledge",
            ParserKind::General => "general",
        })
    }
}

#[derive(Debug, Clone)]
pub struct FederationResources {
    pub parser: ParserResources,
    pub overrides: OverrideRules,
    pub gate: KnowledgeGate,
}

impl FederationResources {
    /// Parser resources with the bundled overrides and gate.
    pub fn new(parser: ParserResources) -> Result<Self, FederationError> {
        Ok(FederationResources {
            overrides: OverrideRules::bundled(&parser.ontology)?,
            gate: KnowledgeGate::default(),
            parser,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteDecision {
    pub parser: ParserKind,
    pub tree: MrTree,
    /// Why this parser was chosen, e.g. `override:play {x}`.
    pub rationale: String,
    pub rewrite: Rewrite,
    /// The general parser's full output when it ran.
    pub general: Option<ParseOutput>,
}

/// Overrides match the raw utterance, the gate sees the rewrite, and the
/// general parser handles everything else.
pub fn route(
    utterance: &str,
    ctx: &DialogContext,
    model: &ParserModel,
    res: &FederationResources,
) -> Result<RouteDecision, ParseError> {
    let rewrite = rewrite_query(utterance, ctx, &res.parser.qr_rules);
    if let Some((rule, tree)) = res.overrides.find(utterance) {
        return Ok(RouteDecision {
            parser: ParserKind::Overrides,
            tree,
            rationale: format!("override:{}", rule.pattern_text()),
            rewrite,
            general: None,
        });
    }
    if let Some(prefix) = res.gate.matches(&rewrite.text) {
        let text = words(&rewrite.text).join(" ");
        return Ok(RouteDecision {
            parser: ParserKind::Knowledge,
            tree: MrTree::new(KNOWLEDGE_VERB).with(KNOWLEDGE_TEXT, MrNode::string(text)),
            rationale: format!("knowledge-gate:{prefix}"),
            rewrite,
            general: None,
        });
    }
    let out = parse(utterance, ctx, model, &res.parser)?;
    Ok(RouteDecision {
        parser: ParserKind::General,
        tree: out.tree.clone(),
        rationale: "general".into(),
        rewrite,
        general: Some(out),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::context_vocabulary;
    use crate::mr_tree::{exact_match, SubTree};
    use crate::parser_core::TrainConfig;
    use crate::resources;

    fn setup() -> (ParserModel, FederationResources) {
        let o = resources::toy_ontology();
        let cfg = TrainConfig {
            embed_dim: 8,
            span_dim: 4,
            hidden_dim: 8,
            layers: 1,
            ..TrainConfig::default()
        };
        let m = ParserModel::new(cfg, o.symbol_vocabulary(), context_vocabulary(&o));
        (m, FederationResources::new(ParserResources::new(o)).unwrap())
    }

    fn play(x: &str) -> MrTree {
        MrTree::new("Music.play").with("Music.query", MrNode::string(x))
    }

    #[test]
    fn knowledge_route_after_rewrite() {
        let (m, res) = setup();
        let mut ctx = DialogContext::default();
        ctx.push_user("How old is Barack Obama?");
        let d = route("What about his wife?", &ctx, &m, &res).unwrap();
        assert_eq!(d.parser, ParserKind::Knowledge);
        assert_eq!(d.rewrite.text, "How old is Barack Obama's wife");
        let want = MrTree::new(KNOWLEDGE_VERB).with(KNOWLEDGE_TEXT, MrNode::string("How old is Barack Obama's wife"));
        assert!(exact_match(&d.tree, &want));
    }

    #[test]
    fn personal_request_goes_to_general() {
        let (m, res) = setup();
        let d = route("please create fishing trip alarm on sundays", &DialogContext::default(), &m, &res).unwrap();
        assert_eq!(d.parser, ParserKind::General);
        assert!(d.general.is_some());
    }

    #[test]
    fn override_wins_and_captures() {
        let (m, mut res) = setup();
        let o = res.parser.ontology.clone();
        res.overrides = add_override(&o, res.overrides, OverrideRule::new("play {x}", play("{x}"))).unwrap();
        let d = route("play Yellow Submarine", &DialogContext::default(), &m, &res).unwrap();
        assert_eq!(d.parser, ParserKind::Overrides);
        assert!(exact_match(&d.tree, &play("Yellow Submarine")));
        assert_eq!(d.rationale, "override:play {x}");
    }

    #[test]
    fn later_rule_wins_and_replaces_duplicate() {
        let o = resources::toy_ontology();
        let r = add_override(&o, OverrideRules::default(), OverrideRule::new("play jazz", play("one"))).unwrap();
        let r = add_override(&o, r, OverrideRule::new("Play  jazz", play("two"))).unwrap();
        assert_eq!(r.len(), 1);
        assert!(exact_match(&r.find("play jazz").unwrap().1, &play("two")));
        let r = add_override(&o, r, OverrideRule::new("play {x}", play("{x}"))).unwrap();
        assert!(exact_match(&r.find("play jazz").unwrap().1, &play("jazz")));
    }

    #[test]
    fn lemma_match_is_exact() {
        let rule = OverrideRule::new("set alarm", MrTree::new("Alarm.create"));
        assert!(rule.matches("Set alarms!").is_some());
        assert!(rule.matches("set an alarm").is_none());
        assert!(rule.matches("set alarm now").is_none());
    }

    #[test]
    fn invalid_overrides_are_rejected() {
        let o = resources::toy_ontology();
        let bad = MrTree::new("Music.play").with("Music.volume", MrNode::string("x"));
        assert!(matches!(
            add_override(&o, OverrideRules::default(), OverrideRule::new("loud", bad)),
            Err(FederationError::Invalid { .. })
        ));
        assert!(matches!(
            add_override(&o, OverrideRules::default(), OverrideRule::new("play", play("{x}"))),
            Err(FederationError::Unbound { .. })
        ));
        let nested = MrTree::new("Call.make").with(
            "Call.callee",
            SubTree::new("Person").with("Person.name", MrNode::string("{who}")).into(),
        );
        let r = add_override(&o, OverrideRules::default(), OverrideRule::new("ring {who}", nested)).unwrap();
        assert_eq!(r.find("ring Mark Twain").unwrap().1.to_string(), r#"Call.make(callee=Person(name="Mark Twain"))"#);
        assert!(OverrideRules::parse(&o, "no tab here").is_err());
    }

    #[test]
    fn bundled_files_load() {
        let o = resources::toy_ontology();
        assert!(!OverrideRules::bundled(&o).unwrap().is_empty());
        let g = KnowledgeGate::default();
        assert_eq!(g.matches("who is Ada Lovelace").as_deref(), Some("who is"));
        assert!(g.matches("who is").is_none());
        assert!(g.matches("set an alarm for 7 am").is_none());
    }
}
