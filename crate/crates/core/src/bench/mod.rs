//! Synthetic spatial-QA suites: generation, scoring and error attribution.

mod generate;
mod layout;
mod oracle;
mod run;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constraint::TaskConstraint;
use crate::toolbox::SceneSpec;

pub use layout::{CAMERA_HEIGHT, CLASSES, FOCAL, IMAGE_HEIGHT, IMAGE_WIDTH};
pub use oracle::evaluate_ground_truth;
pub use run::{
    attribution_report, inject_fault, run_suite, AttributionError, CategoryScore, FaultError, FaultId, QuestionResult, SuiteReport,
    SuiteRun,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    RelativePosition,
    CardinalDirection,
    CameraRotation,
    ObjectMotion,
    MultiViewCount,
    MetricDistance,
    PerspectiveTaking,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::RelativePosition,
        Category::CardinalDirection,
        Category::CameraRotation,
        Category::ObjectMotion,
        Category::MultiViewCount,
        Category::MetricDistance,
        Category::PerspectiveTaking,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::RelativePosition => "relative_position",
            Category::CardinalDirection => "cardinal_direction",
            Category::CameraRotation => "camera_rotation",
            Category::ObjectMotion => "object_motion",
            Category::MultiViewCount => "multi_view_count",
            Category::MetricDistance => "metric_distance",
            Category::PerspectiveTaking => "perspective_taking",
        }
    }

    /// Direction categories get the angular answer margin.
    pub fn uses_margin(&self) -> bool {
        matches!(
            self,
            Category::RelativePosition | Category::CardinalDirection | Category::PerspectiveTaking
        )
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSpec {
    pub id: String,
    pub category: Category,
    /// Key into [`Suite::scenes`].
    pub scene: String,
    pub query: String,
    pub options: Vec<String>,
    /// Index of the correct option.
    pub answer: usize,
    pub ground_truth: TaskConstraint,
    /// Class name → scene object id of every entity the query names.
    pub entities: BTreeMap<String, String>,
    pub seed: u64,
}

impl QuestionSpec {
    pub fn answer_letter(&self) -> &'static str {
        crate::orchestrator::OPTION_LETTERS[self.answer]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub counts: BTreeMap<Category, usize>,
    /// Minimum angular distance of direction answers from a label boundary.
    pub margin_deg: f64,
    /// Share of relative-position questions with a same-class distractor.
    pub ambiguity_rate: f64,
    /// Rejection-sampling rounds per question.
    pub max_attempts: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            counts: Category::ALL.into_iter().map(|c| (c, 10)).collect(),
            margin_deg: 20.0,
            ambiguity_rate: 0.3,
            max_attempts: 200,
        }
    }
}

impl SuiteConfig {
    pub fn uniform(per_category: usize) -> Self {
        SuiteConfig {
            counts: Category::ALL.into_iter().map(|c| (c, per_category)).collect(),
            ..Default::default()
        }
    }

    pub fn only(category: Category, n: usize) -> Self {
        SuiteConfig {
            counts: BTreeMap::from([(category, n)]),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerateError {
    #[error("the configuration asks for no questions")]
    NoQuestions,
    #[error("margin of {0}° leaves label boundaries ambiguous; use a positive margin")]
    DegenerateMargin(f64),
    #[error("ambiguity rate must lie in [0, 1]")]
    AmbiguityRate,
    #[error("{category} question {index}: no scene met the constraints after {attempts} attempts")]
    Unsatisfiable {
        category: Category,
        index: usize,
        attempts: usize,
    },
    #[error("{id}: generated answer disagrees with the ground-truth check ({detail})")]
    SelfCheck { id: String, detail: String },
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteIoError {
    #[error("suite io: {0}")]
    Io(#[from] std::io::Error),
    #[error("suite json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("suite scene `{0}`: {1}")]
    Scene(String, crate::toolbox::SceneError),
    #[error("question `{0}` names missing scene `{1}`")]
    MissingScene(String, String),
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub seed: u64,
    pub config: SuiteConfig,
    pub questions: Vec<QuestionSpec>,
    pub scenes: BTreeMap<String, Arc<SceneSpec>>,
}

#[derive(Serialize, Deserialize)]
struct SuiteFile {
    seed: u64,
    config: SuiteConfig,
    questions: Vec<QuestionSpec>,
    scenes: BTreeMap<String, serde_json::Value>,
}

impl Suite {
    pub fn empty() -> Self {
        Suite {
            seed: 0,
            config: SuiteConfig {
                counts: BTreeMap::new(),
                ..Default::default()
            },
            questions: vec![],
            scenes: BTreeMap::new(),
        }
    }

    pub fn scene_of(&self, q: &QuestionSpec) -> Option<&Arc<SceneSpec>> {
        self.scenes.get(&q.scene)
    }

    pub fn to_json(&self) -> String {
        let file = SuiteFile {
            seed: self.seed,
            config: self.config.clone(),
            questions: self.questions.clone(),
            scenes: self
                .scenes
                .iter()
                .map(|(k, s)| (k.clone(), serde_json::from_str(&s.to_json()).expect("scene json")))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("suite serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SuiteIoError> {
        let file: SuiteFile = serde_json::from_str(text)?;
        let mut scenes = BTreeMap::new();
        for (k, v) in file.scenes {
            let s = SceneSpec::from_json(&v.to_string()).map_err(|e| SuiteIoError::Scene(k.clone(), e))?;
            scenes.insert(k, Arc::new(s));
        }
        if let Some(q) = file.questions.iter().find(|q| !scenes.contains_key(&q.scene)) {
            return Err(SuiteIoError::MissingScene(q.id.clone(), q.scene.clone()));
        }
        Ok(Suite {
            seed: file.seed,
            config: file.config,
            questions: file.questions,
            scenes,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), SuiteIoError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SuiteIoError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Seed of one question, independent of every other question.
pub fn question_seed(seed: u64, category: Category, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(category.as_str().as_bytes());
    h.update((index as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Generates `config.counts` questions per category, each with its own scene.
/// Every question is checked against [`evaluate_ground_truth`] before it is
/// accepted.
pub fn generate_suite(seed: u64, config: &SuiteConfig) -> Result<Suite, GenerateError> {
    if config.counts.values().sum::<usize>() == 0 {
        return Err(GenerateError::NoQuestions);
    }
    if !(config.margin_deg > 0.0) {
        return Err(GenerateError::DegenerateMargin(config.margin_deg));
    }
    if !(0.0..=1.0).contains(&config.ambiguity_rate) {
        return Err(GenerateError::AmbiguityRate);
    }
    let margin = config.margin_deg.to_radians();
    let mut suite = Suite {
        seed,
        config: config.clone(),
        questions: vec![],
        scenes: BTreeMap::new(),
    };
    for (&category, &count) in &config.counts {
        for index in 0..count {
            let qseed = question_seed(seed, category, index);
            let mut rng = ChaCha8Rng::seed_from_u64(qseed);
            let draft = (0..config.max_attempts.max(1))
                .find_map(|_| generate::draft(category, &mut rng, margin, config.ambiguity_rate))
                .ok_or(GenerateError::Unsatisfiable {
                    category,
                    index,
                    attempts: config.max_attempts.max(1),
                })?;
            let mut order: Vec<usize> = (0..draft.options.len()).collect();
            order.shuffle(&mut rng);
            let options: Vec<String> = order.iter().map(|&i| draft.options[i].clone()).collect();
            let answer = order.iter().position(|&i| i == 0).expect("correct option present");
            let id = format!("{}-{index:03}", category.as_str());
            let scene = Arc::new(draft.layout.to_scene());
            let q = QuestionSpec {
                id: id.clone(),
                category,
                scene: id.clone(),
                query: draft.query.clone(),
                options,
                answer,
                ground_truth: draft.constraint(),
                entities: draft.entities.clone(),
                seed: qseed,
            };
            let checked = evaluate_ground_truth(&q, &scene).map_err(|detail| GenerateError::SelfCheck {
                id: id.clone(),
                detail,
            })?;
            if checked != answer {
                return Err(GenerateError::SelfCheck {
                    id,
                    detail: format!("check picked option {checked}, generator marked {answer}"),
                });
            }
            suite.scenes.insert(id, scene);
            suite.questions.push(q);
        }
    }
    Ok(suite)
}
