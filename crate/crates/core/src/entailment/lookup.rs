use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BackendError, EntailmentBackend, EntailmentJudgment, PremiseHypothesisPair};

/// Deterministic oracle answering from a fixed table. Pairs missing from the
/// table score as pure neutral `(0, 1, 0)`.
#[derive(Debug, Clone, Default)]
pub struct LookupBackend {
    table: HashMap<PremiseHypothesisPair, EntailmentJudgment>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LookupRecord {
    premise: String,
    hypothesis: String,
    entail: f64,
    neutral: f64,
    contradict: f64,
}

impl LookupBackend {
    pub fn from_entries(
        entries: impl IntoIterator<Item = (PremiseHypothesisPair, EntailmentJudgment)>,
    ) -> Self {
        LookupBackend {
            table: entries.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, pair: PremiseHypothesisPair, judgment: EntailmentJudgment) {
        self.table.insert(pair, judgment);
    }

    pub fn remove(&mut self, pair: &PremiseHypothesisPair) -> Option<EntailmentJudgment> {
        self.table.remove(pair)
    }

    pub fn get(&self, pair: &PremiseHypothesisPair) -> EntailmentJudgment {
        self.table
            .get(pair)
            .copied()
            .unwrap_or(EntailmentJudgment::NEUTRAL)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Reads a line-delimited table of
    /// `{premise, hypothesis, entail, neutral, contradict}` records.
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut table = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: LookupRecord = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("line {}: {e}", i + 1),
                )
            })?;
            let j = EntailmentJudgment::new(r.entail, r.neutral, r.contradict);
            if !j.is_valid() {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("line {}: judgment {j} is not a distribution", i + 1),
                ));
            }
            table.insert(PremiseHypothesisPair::new(r.premise, r.hypothesis), j);
        }
        Ok(LookupBackend { table })
    }

    /// Writes the table sorted by (premise, hypothesis).
    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut entries: Vec<_> = self.table.iter().collect();
        entries
            .sort_by(|a, b| (&a.0.premise, &a.0.hypothesis).cmp(&(&b.0.premise, &b.0.hypothesis)));
        let mut w = std::io::BufWriter::new(File::create(path)?);
        for (p, j) in entries {
            let rec = LookupRecord {
                premise: p.premise.clone(),
                hypothesis: p.hypothesis.clone(),
                entail: j.entail,
                neutral: j.neutral,
                contradict: j.contradict,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }
}

impl EntailmentBackend for LookupBackend {
    fn score(
        &self,
        pairs: &[PremiseHypothesisPair],
    ) -> Result<Vec<EntailmentJudgment>, BackendError> {
        Ok(pairs.iter().map(|p| self.get(p)).collect())
    }
}
