use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::fixmap::{read_fixations, write_fixations, FixationSet, StimulusSizes};

pub const DATASET_FILE: &str = "dataset.json";
pub const HC_FIXATIONS_FILE: &str = "fixations_hc.csv";
pub const LG_FIXATIONS_FILE: &str = "fixations_lg.csv";

/// Viewing condition a fixation set was recorded under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Hc,
    Lg,
}

impl Condition {
    pub const BOTH: [Condition; 2] = [Condition::Hc, Condition::Lg];

    pub fn label(self) -> &'static str {
        match self {
            Condition::Hc => "HC",
            Condition::Lg => "LG",
        }
    }
}

/// One stimulus. Fixations are in the `width × height` display frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stimulus {
    pub id: String,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hc_image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lg_image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    schema_version: u32,
    stimuli: Vec<Stimulus>,
}

/// Stimuli with per-observer fixations under both conditions.
///
/// On disk: a directory holding `dataset.json`, `fixations_hc.csv` and
/// `fixations_lg.csv` (image paths in `dataset.json` are relative to it).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub stimuli: Vec<Stimulus>,
    pub hc: Vec<FixationSet>,
    pub lg: Vec<FixationSet>,
}

impl Dataset {
    /// Build and check: unique stimulus ids, every set on a known stimulus
    /// with matching size, at most one set per (stimulus, observer).
    pub fn new(stimuli: Vec<Stimulus>, hc: Vec<FixationSet>, lg: Vec<FixationSet>) -> Result<Self> {
        let mut sizes = BTreeMap::new();
        for s in &stimuli {
            if sizes.insert(s.id.as_str(), (s.width, s.height)).is_some() {
                return Err(Error::Validation(format!("duplicate stimulus id '{}'", s.id)));
            }
        }
        for (cond, sets) in [(Condition::Hc, &hc), (Condition::Lg, &lg)] {
            let mut seen = std::collections::BTreeSet::new();
            for set in sets.iter() {
                match sizes.get(set.stimulus_id.as_str()) {
                    None => {
                        return Err(Error::Validation(format!(
                            "{} fixations reference unknown stimulus '{}'",
                            cond.label(),
                            set.stimulus_id
                        )))
                    }
                    Some(&size) if size != set.size() => {
                        return Err(Error::Validation(format!(
                            "{} fixations for '{}' use size {:?}, stimulus is {:?}",
                            cond.label(),
                            set.stimulus_id,
                            set.size(),
                            size
                        )))
                    }
                    _ => {}
                }
                if !seen.insert((set.stimulus_id.as_str(), set.observer_id.as_str())) {
                    return Err(Error::Validation(format!(
                        "{} fixations: duplicate set for stimulus '{}', observer '{}'",
                        cond.label(),
                        set.stimulus_id,
                        set.observer_id
                    )));
                }
            }
        }
        Ok(Self { stimuli, hc, lg })
    }

    pub fn stimulus(&self, id: &str) -> Option<&Stimulus> {
        self.stimuli.iter().find(|s| s.id == id)
    }

    pub fn sets(&self, condition: Condition) -> &[FixationSet] {
        match condition {
            Condition::Hc => &self.hc,
            Condition::Lg => &self.lg,
        }
    }

    /// Sets of one condition on one stimulus, in observer order.
    pub fn observers(&self, condition: Condition, stimulus: &str) -> Vec<&FixationSet> {
        let mut out: Vec<&FixationSet> = self
            .sets(condition)
            .iter()
            .filter(|s| s.stimulus_id == stimulus)
            .collect();
        out.sort_by(|a, b| a.observer_id.cmp(&b.observer_id));
        out
    }

    fn sizes(stimuli: &[Stimulus]) -> StimulusSizes {
        StimulusSizes::PerStimulus(
            stimuli
                .iter()
                .map(|s| (s.id.clone(), (s.width, s.height)))
                .collect(),
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(DATASET_FILE);
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let meta: DatasetFile = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::Validation(format!("{}: {} at '{}'", meta_path.display(), e.inner(), e.path()))
        })?;
        if meta.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                meta_path.display(),
                meta.schema_version
            )));
        }
        let sizes = Self::sizes(&meta.stimuli);
        let hc = read_fixations(&dir.join(HC_FIXATIONS_FILE), &sizes)?;
        let lg = read_fixations(&dir.join(LG_FIXATIONS_FILE), &sizes)?;
        Self::new(meta.stimuli, hc, lg)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = DatasetFile {
            schema_version: SCHEMA_VERSION,
            stimuli: self.stimuli.clone(),
        };
        let meta_path = dir.join(DATASET_FILE);
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
        for (name, sets) in [(HC_FIXATIONS_FILE, &self.hc), (LG_FIXATIONS_FILE, &self.lg)] {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_fixations(BufWriter::new(file), sets)?;
        }
        Ok(())
    }

    /// Resolve a stimulus image path against the dataset directory.
    pub fn image_path(dir: &Path, relative: &str) -> PathBuf {
        dir.join(relative)
    }
}
