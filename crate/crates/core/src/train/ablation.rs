use serde::{Deserialize, Serialize};

use super::{run_crossval, ConfusionMatrix, FoldPlan, Metrics, TrainConfig, TrainError};
use crate::model::{ConvArch, HybridConfig, RnnKind};
use crate::signal::SegmentBatch;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub architecture: String,
    pub confusion: ConfusionMatrix,
    pub segment: Metrics,
    pub subject: Metrics,
    pub parameters: usize,
}

/// VGG13, then each recurrent cell without and with attention. Widths and
/// head come from `base`.
pub fn ablation_ladder(base: &HybridConfig) -> Vec<HybridConfig> {
    let with = |rnn_kind, attention_enabled| HybridConfig {
        conv_arch: ConvArch::Vgg13,
        rnn_kind,
        attention_enabled,
        bidirectional: true,
        ..base.clone()
    };
    vec![
        with(RnnKind::None, false),
        with(RnnKind::Gru, false),
        with(RnnKind::Lstm, false),
        with(RnnKind::Gru, true),
        with(RnnKind::Lstm, true),
    ]
}

/// Cross-validate every rung with the same plan, seeds and budget.
pub fn run_ablation(
    base: &HybridConfig,
    train_cfg: &TrainConfig,
    plan: &FoldPlan,
    batch: &SegmentBatch,
    jobs: usize,
) -> Result<Vec<AblationRow>, TrainError> {
    ablation_ladder(base)
        .into_iter()
        .map(|cfg| {
            log::info!("ablation: {}", cfg.arch_name());
            let cv = run_crossval(&cfg, train_cfg, plan, batch, jobs)?;
            let parameters = cv.folds.first().map_or(0, |f| f.outcome.model.parameter_count());
            Ok(AblationRow {
                architecture: cfg.arch_name(),
                confusion: cv.segment.confusion,
                segment: cv.segment.metrics,
                subject: cv.subject.metrics,
                parameters,
            })
        })
        .collect()
}
