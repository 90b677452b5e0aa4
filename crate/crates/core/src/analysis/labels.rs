use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine-way sector scheme (eight sector labels plus "None").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sector {
    BasicMaterials,
    ConsumerGoods,
    Financial,
    Healthcare,
    IndustrialGoods,
    None,
    Services,
    Technology,
    Utilities,
}

impl Sector {
    pub const ALL: [Sector; 9] = [
        Sector::BasicMaterials,
        Sector::ConsumerGoods,
        Sector::Financial,
        Sector::Healthcare,
        Sector::IndustrialGoods,
        Sector::None,
        Sector::Services,
        Sector::Technology,
        Sector::Utilities,
    ];

    pub fn code(self) -> char {
        match self {
            Sector::BasicMaterials => 'B',
            Sector::ConsumerGoods => 'C',
            Sector::Financial => 'F',
            Sector::Healthcare => 'H',
            Sector::IndustrialGoods => 'I',
            Sector::None => 'N',
            Sector::Services => 'S',
            Sector::Technology => 'T',
            Sector::Utilities => 'U',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sector::BasicMaterials => "Basic Materials",
            Sector::ConsumerGoods => "Consumer Goods",
            Sector::Financial => "Financial",
            Sector::Healthcare => "Healthcare",
            Sector::IndustrialGoods => "Industrial Goods",
            Sector::None => "None",
            Sector::Services => "Services",
            Sector::Technology => "Technology",
            Sector::Utilities => "Utilities",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() {
            return Ok(Sector::None);
        }
        let norm: String = t
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Sector::ALL
            .into_iter()
            .find(|sec| {
                let name: String = sec
                    .name()
                    .chars()
                    .filter(|c| c.is_alphanumeric())
                    .collect::<String>()
                    .to_ascii_lowercase();
                norm == name || norm == sec.code().to_ascii_lowercase().to_string()
            })
            .ok_or_else(|| Error::Format(format!("unknown sector `{t}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityLabel {
    pub sector: Sector,
    pub exchange: String,
}

impl Default for EntityLabel {
    fn default() -> Self {
        EntityLabel {
            sector: Sector::None,
            exchange: "UNKNOWN".into(),
        }
    }
}

/// Sector and exchange per entity; unknown entities get [`EntityLabel::default`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    labels: HashMap<String, EntityLabel>,
}

impl LabelTable {
    pub fn insert(&mut self, entity: impl Into<String>, label: EntityLabel) {
        self.labels.insert(entity.into(), label);
    }

    pub fn get(&self, entity: &str) -> EntityLabel {
        self.labels.get(entity).cloned().unwrap_or_default()
    }

    pub fn for_entities(&self, entities: &[String]) -> Vec<EntityLabel> {
        entities.iter().map(|e| self.get(e)).collect()
    }

    /// Reads `ticker,sector,exchange` rows (a header row starting with `ticker` is skipped).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut table = LabelTable::default();
        for (idx, rec) in reader.records().enumerate() {
            let rec = rec?;
            let ticker = rec.get(0).unwrap_or("").trim();
            if idx == 0 && ticker.eq_ignore_ascii_case("ticker") {
                continue;
            }
            if ticker.is_empty() {
                continue;
            }
            let sector = rec.get(1).unwrap_or("").parse()?;
            let exchange = match rec.get(2).map(str::trim) {
                Some(x) if !x.is_empty() => x.to_ascii_uppercase(),
                _ => "UNKNOWN".to_string(),
            };
            table.insert(ticker, EntityLabel { sector, exchange });
        }
        Ok(table)
    }
}
