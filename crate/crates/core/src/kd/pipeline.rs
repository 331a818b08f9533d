use serde::{Deserialize, Serialize};

use super::distill::{
    cache_teacher_labels, compare, evaluate_student, train_student_kl, train_teacher, Augment, DistillReport,
    StudentConfig,
};
use super::mlp::Mlp;
use super::task::{SyntheticTask, TaskConfig};
use crate::budget::BudgetSpec;
use crate::error::Result;
use crate::labels::SoftLabelMatrix;
use crate::lossy::LabelCodec;

/// Everything needed to build a cached-label distillation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub task: TaskConfig,
    pub augment: Augment,
    pub teacher: StudentConfig,
    pub student: StudentConfig,
    pub temperature: f64,
    /// Samples per class the teacher learns from, drawn from the same
    /// clusters. `None` reuses the student split.
    pub teacher_per_class: Option<usize>,
}

impl PipelineConfig {
    /// The 100-class task used for the distillation comparisons: 40 stored
    /// samples per class seen under 30 jittered views, a 128-unit teacher
    /// trained on 200 samples per class and a 32-unit student.
    pub fn desk_scale(seed: u64) -> Self {
        let task = TaskConfig {
            spread: 1.2,
            test_per_class: 50,
            ..TaskConfig::new(seed, 20, 100, 40)
        };
        let student = StudentConfig {
            epochs: 60,
            seed,
            ..StudentConfig::default()
        };
        Self {
            task,
            augment: Augment {
                views: 30,
                jitter: 0.15,
                seed,
            },
            teacher: StudentConfig {
                hidden: 128,
                epochs: 30,
                seed: seed + 1,
                ..student
            },
            student,
            temperature: 1.0,
            teacher_per_class: Some(200),
        }
    }
}

/// A task, its trained teacher and the cached teacher labels.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub task: SyntheticTask,
    pub teacher: Mlp,
    pub labels: SoftLabelMatrix,
}

impl Pipeline {
    pub fn build(config: PipelineConfig) -> Result<Self> {
        let task = SyntheticTask::from_config(config.task)?;
        let teacher = match config.teacher_per_class {
            Some(per_class) => {
                let wide = SyntheticTask::from_config(TaskConfig {
                    train_per_class: per_class,
                    ..config.task
                })?;
                train_teacher(&wide, &config.augment, &config.teacher)?
            }
            None => train_teacher(&task, &config.augment, &config.teacher)?,
        };
        let labels = cache_teacher_labels(&teacher, &task, &config.augment, config.temperature)?;
        Ok(Self {
            config,
            task,
            teacher,
            labels,
        })
    }

    pub fn teacher_accuracy(&self) -> f64 {
        evaluate_student(&self.teacher, &self.task)
    }

    /// Storage inputs matching the cached labels: one image per training
    /// sample, one epoch per view.
    pub fn budget_spec(&self) -> BudgetSpec {
        let t = &self.config.task;
        BudgetSpec::new(t.train_per_class as u64, t.classes as u64, self.config.augment.views as u64)
    }

    /// Accuracy of a student trained on `labels` (raw or reconstructed).
    pub fn student_accuracy(&self, labels: &SoftLabelMatrix) -> Result<f64> {
        let (student, _) = train_student_kl(&self.task, &self.config.augment, labels, &self.config.student)?;
        Ok(evaluate_student(&student, &self.task))
    }

    pub fn compare(&self, codec: &dyn LabelCodec, storage_ratio: f64) -> Result<DistillReport> {
        compare(
            codec,
            &self.task,
            &self.config.augment,
            &self.labels,
            &self.config.student,
            storage_ratio,
        )
    }

    /// Like [`Pipeline::compare`] for several codecs, training the raw-label
    /// student once and the codec students in parallel.
    pub fn compare_many(&self, codecs: &[(&dyn LabelCodec, f64)]) -> Result<Vec<DistillReport>> {
        let reconstructed = codecs
            .iter()
            .map(|(codec, _)| codec.roundtrip(&self.labels))
            .collect::<Result<Vec<_>>>()?;
        let accuracies: Vec<Result<f64>> = std::thread::scope(|s| {
            let handles: Vec<_> = std::iter::once(&self.labels)
                .chain(&reconstructed)
                .map(|labels| s.spawn(move || self.student_accuracy(labels)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("student thread panicked")).collect()
        });
        let mut accuracies = accuracies.into_iter();
        let raw_accuracy = accuracies.next().expect("raw arm")?;
        codecs
            .iter()
            .zip(reconstructed.iter().zip(accuracies))
            .map(|((codec, ratio), (rec, acc))| {
                let reconstructed_accuracy = acc?;
                Ok(DistillReport {
                    codec: codec.name(),
                    raw_accuracy,
                    reconstructed_accuracy,
                    retention: reconstructed_accuracy / raw_accuracy,
                    mean_kl: self.labels.mean_kl(rec)?,
                    storage_ratio: *ratio,
                })
            })
            .collect()
    }
}
