use serde::{Deserialize, Serialize};

use crate::mr_tree::SubTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntitySource {
    Contact,
    AppDonation,
    Device,
    Screen,
    Linguistic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    pub label: String,
    pub canonical: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternates: Vec<String>,
    pub source: EntitySource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<SubTree>,
    /// 0 is the most recent; maintained by the store.
    #[serde(default)]
    pub recency: usize,
}

impl EntityRecord {
    pub fn new(id: impl Into<String>, label: impl Into<String>, canonical: impl Into<String>, source: EntitySource) -> Self {
        EntityRecord {
            id: id.into(),
            label: label.into(),
            canonical: canonical.into(),
            alternates: Vec::new(),
            source,
            payload: None,
            recency: 0,
        }
    }

    pub fn with_alternates<I, S>(mut self, forms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.alternates.extend(forms.into_iter().map(Into::into));
        self
    }

    pub fn with_payload(mut self, payload: SubTree) -> Self {
        self.payload = Some(payload);
        self
    }

    /// Canonical form followed by alternates.
    pub fn forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical.as_str()).chain(self.alternates.iter().map(String::as_str))
    }
}

/// Session-scoped salient entities, most recent first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityStore {
    pub session: String,
    records: Vec<EntityRecord>,
}

impl EntityStore {
    pub fn new(session: impl Into<String>) -> Self {
        EntityStore {
            session: session.into(),
            records: Vec::new(),
        }
    }

    /// Inserts (or replaces by id) and makes the record the most recent.
    pub fn insert(&mut self, mut record: EntityRecord) {
        self.records.retain(|r| r.id != record.id);
        record.recency = 0;
        self.records.insert(0, record);
        self.renumber();
    }

    pub fn extend<I: IntoIterator<Item = EntityRecord>>(&mut self, records: I) {
        for r in records {
            self.insert(r);
        }
    }

    pub fn remove(&mut self, id: &str) -> Option<EntityRecord> {
        let i = self.records.iter().position(|r| r.id == id)?;
        let r = self.records.remove(i);
        self.renumber();
        Some(r)
    }

    fn renumber(&mut self) {
        for (i, r) in self.records.iter_mut().enumerate() {
            r.recency = i;
        }
    }

    pub fn get(&self, id: &str) -> Option<&EntityRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    pub fn top(&self) -> Option<&EntityRecord> {
        self.records.first()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_maintains_unique_recency() {
        let mut s = EntityStore::new("s");
        s.insert(EntityRecord::new("a", "x", "A", EntitySource::Contact));
        s.insert(EntityRecord::new("b", "x", "B", EntitySource::Contact));
        s.insert(EntityRecord::new("a", "x", "A2", EntitySource::Contact));
        let ids: Vec<_> = s.records().iter().map(|r| (r.id.as_str(), r.recency)).collect();
        assert_eq!(ids, vec![("a", 0), ("b", 1)]);
        assert_eq!(s.get("a").unwrap().canonical, "A2");
        s.remove("a");
        assert_eq!(s.top().unwrap().recency, 0);
    }
}
