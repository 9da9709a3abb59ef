//! Task-accuracy scoring: prompt templates, answer extraction, and the
//! per-task scorers.

mod choice;
mod gsm8k;

pub use choice::{first_option, score_multiple_choice};
pub use gsm8k::{extract_gsm8k, score_gsm8k, DEFAULT_EPSILON};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supported benchmark task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Gsm8k,
    Mmlu,
    Gpqa,
    HumanEval,
}

impl TaskKind {
    pub fn is_multiple_choice(self) -> bool {
        matches!(self, TaskKind::Mmlu | TaskKind::Gpqa)
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TaskKind::Gsm8k => "gsm8k",
            TaskKind::Mmlu => "mmlu",
            TaskKind::Gpqa => "gpqa",
            TaskKind::HumanEval => "humaneval",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gsm8k" => Ok(TaskKind::Gsm8k),
            "mmlu" => Ok(TaskKind::Mmlu),
            "gpqa" => Ok(TaskKind::Gpqa),
            "humaneval" => Ok(TaskKind::HumanEval),
            other => Err(Error::InvalidParam {
                reason: format!("unknown task `{other}`"),
            }),
        }
    }
}

/// The four answer options of a multiple-choice item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceOptions {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
}

/// One benchmark item.
///
/// `question` holds the task text (for HumanEval, the function signature and
/// docstring). Multiple-choice items carry options and a letter reference;
/// HumanEval items carry no reference since code scoring is out of scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskItem {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub options: Option<ChoiceOptions>,
    #[serde(default)]
    pub reference: Option<String>,
}

impl TaskItem {
    /// Check the fields a task kind requires.
    pub fn validate(&self, kind: TaskKind) -> Result<()> {
        let need = |field: &str| Error::MissingField {
            field: field.into(),
            context: format!("{kind} item `{}`", self.id),
        };
        match kind {
            TaskKind::Gsm8k => {
                let r = self.reference.as_deref().ok_or_else(|| need("answer"))?;
                if r.is_empty() {
                    return Err(need("answer"));
                }
            }
            TaskKind::Mmlu | TaskKind::Gpqa => {
                let opts = self.options.as_ref().ok_or_else(|| need("options"))?;
                for (name, text) in [
                    ("A", &opts.a),
                    ("B", &opts.b),
                    ("C", &opts.c),
                    ("D", &opts.d),
                ] {
                    if text.is_empty() {
                        return Err(need(name));
                    }
                }
                let r = self.reference.as_deref().ok_or_else(|| need("answer"))?;
                if !matches!(r, "A" | "B" | "C" | "D") {
                    return Err(Error::MalformedReference {
                        value: r.to_string(),
                    });
                }
            }
            TaskKind::HumanEval => {}
        }
        if self.question.is_empty() {
            return Err(need("question"));
        }
        Ok(())
    }
}

/// Instantiate the task's prompt template, byte for byte.
///
/// Line breaks are rendered as " \n " — a space on both sides of the
/// newline — matching the documented instruction strings.
pub fn render_prompt(kind: TaskKind, item: &TaskItem) -> Result<String> {
    item.validate(kind)?;
    Ok(match kind {
        TaskKind::Gsm8k => format!(
            "Question: {} \n Let's think step by step \n Answer:",
            item.question
        ),
        TaskKind::Mmlu | TaskKind::Gpqa => {
            let o = item.options.as_ref().expect("validated");
            format!(
                "Question: {} \n A. {} \n B. {} \n C. {} \n D. {} \n Answer:",
                item.question, o.a, o.b, o.c, o.d
            )
        }
        TaskKind::HumanEval => format!(
            "Read the following function signature and docstring, and fully implement the function described. \n Your response should only contain the code for this function. \n {}",
            item.question
        ),
    })
}

/// Per-example scoring record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleDetail {
    pub prompt: String,
    pub prediction: String,
    /// What the answer extractor found, if anything.
    pub extracted: Option<String>,
    pub reference: String,
    pub is_correct: bool,
}

/// Accuracy plus per-example details. Accuracy is on the 0..=100 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub details: Vec<ExampleDetail>,
}

impl EvalReport {
    pub fn correct_count(&self) -> usize {
        self.details.iter().filter(|d| d.is_correct).count()
    }
}

/// A task kind with its scoring knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluator {
    pub kind: TaskKind,
    /// Numeric tolerance for gsm8k-style comparison.
    pub epsilon: f64,
}

impl Evaluator {
    pub fn new(kind: TaskKind) -> Self {
        Evaluator {
            kind,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Score predictions against the items' references.
    ///
    /// `prompts` feeds the per-example details; pass empty strings when the
    /// rendered prompts are not at hand.
    pub fn score_items(
        &self,
        items: &[TaskItem],
        predictions: &[String],
        prompts: &[String],
    ) -> Result<EvalReport> {
        if items.len() != predictions.len() {
            return Err(Error::LengthMismatch {
                left: items.len(),
                right: predictions.len(),
            });
        }
        let references: Vec<String> = items
            .iter()
            .map(|item| {
                item.validate(self.kind)?;
                Ok(item.reference.clone().unwrap_or_default())
            })
            .collect::<Result<_>>()?;
        match self.kind {
            TaskKind::Gsm8k => score_gsm8k(predictions, &references, prompts, self.epsilon),
            TaskKind::Mmlu | TaskKind::Gpqa => {
                score_multiple_choice(predictions, &references, prompts)
            }
            TaskKind::HumanEval => Err(Error::Unsupported(
                "humaneval pass/fail scoring (requires code execution)".into(),
            )),
        }
    }
}
