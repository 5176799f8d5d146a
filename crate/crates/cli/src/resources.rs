use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nlu_core::context::{MentionRules, QrRules};
use nlu_core::corpus::TemplateSet;
use nlu_core::evaluation::ResponseTemplates;
use nlu_core::federation::{FederationResources, KnowledgeGate, OverrideRules};
use nlu_core::parser_core::ParserResources;
use nlu_core::resources as bundled;
use nlu_core::Ontology;

/// Where data files come from: an explicit path, then the resource
/// directory, then the copy built into the binary.
#[derive(Debug, Clone, Default)]
pub struct ResourceDir {
    pub dir: Option<PathBuf>,
}

impl ResourceDir {
    fn read(&self, explicit: Option<&Path>, file: &str, fallback: &'static str) -> Result<String> {
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => self.dir.as_ref().map(|d| d.join(file)).filter(|p| p.exists()),
        };
        match path {
            Some(p) => std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display())),
            None => Ok(fallback.to_string()),
        }
    }

    pub fn ontology(&self, explicit: Option<&Path>) -> Result<Ontology> {
        let src = self.read(explicit, "ontology.ont", bundled::TOY_ONTOLOGY)?;
        Ontology::parse(&src).context("loading ontology")
    }

    pub fn templates(&self, explicit: Option<&Path>) -> Result<TemplateSet> {
        let src = self.read(explicit, "templates.txt", bundled::TEMPLATES)?;
        TemplateSet::parse(&src).context("loading corpus templates")
    }

    pub fn responses(&self) -> Result<ResponseTemplates> {
        let src = self.read(None, "responses.txt", bundled::RESPONSES)?;
        ResponseTemplates::parse(&src).context("loading response templates")
    }

    pub fn parser(&self, ontology: Ontology) -> Result<ParserResources> {
        let mut res = ParserResources::new(ontology);
        res.mention_rules = MentionRules::parse(&self.read(None, "mention.rules", bundled::MENTION_RULES)?)
            .context("loading mention rules")?;
        res.qr_rules = QrRules::parse(&self.read(None, "qr.rules", bundled::QR_RULES)?).context("loading rewrite rules")?;
        Ok(res)
    }

    pub fn federation(&self, ontology: Ontology, overrides: Option<&Path>) -> Result<FederationResources> {
        let parser = self.parser(ontology)?;
        let rules = OverrideRules::parse(&parser.ontology, &self.read(overrides, "overrides.txt", bundled::OVERRIDES)?)
            .context("loading override rules")?;
        let gate = KnowledgeGate::parse(&self.read(None, "knowledge.gate", bundled::KNOWLEDGE_GATE)?);
        Ok(FederationResources {
            parser,
            overrides: rules,
            gate,
        })
    }
}
