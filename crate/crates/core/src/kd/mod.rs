//! Desk-scale distillation harness: a Gaussian-cluster task, small MLP
//! teacher and student, cached teacher soft labels, and raw-versus-codec
//! student comparisons.

mod distill;
mod mlp;
mod pipeline;
mod task;

pub use distill::{
    cache_teacher_labels, compare, evaluate_student, train_student_kl, train_teacher, write_retention_csv,
    Augment, DistillReport, StudentConfig,
};
pub use mlp::Mlp;
pub use pipeline::{Pipeline, PipelineConfig};
pub use task::{make_task, SyntheticTask, TaskConfig};
