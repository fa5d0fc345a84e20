//! Context add-on emission from checked-in fixture templates.

use super::{CodeText, Origin, TaskMeta};

const BACKBONE: &str = include_str!("fixtures/backbone.py");
const COMMENT_TEMPLATE: &str = include_str!("fixtures/comment.txt");

/// Returns the fixed macro-skeleton text: the `ReLUConvBN` and
/// `ResNetBasicblock` helpers followed by the `Network` class.
pub fn emit_backbone_addon() -> CodeText {
    CodeText::new(BACKBONE, Origin::NB201)
}

/// Renders the task docstring with the descriptor's fields substituted.
///
/// The backbone stacks `3N` cells with one reduction block after each of
/// the first two stages, so the reduction count is always 2.
pub fn emit_comment_addon(task_meta: &TaskMeta) -> CodeText {
    let total_cells = 3 * task_meta.cells_per_stage;
    let text = COMMENT_TEMPLATE
        .replace("{task_name}", &task_meta.task_name)
        .replace("{num_classes}", &task_meta.num_classes.to_string())
        .replace("{input_desc}", &task_meta.input_desc)
        .replace("{stem_channels}", &task_meta.stem_channels.to_string())
        .replace("{total_cells}", &total_cells.to_string())
        .replace("{cells_per_stage}", &task_meta.cells_per_stage.to_string());
    CodeText::new(text, Origin::NB201)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::normalize_code;

    #[test]
    fn backbone_contains_the_reference_lines() {
        let text = emit_backbone_addon().text;
        assert!(text.contains(
            "layer_channels = [self.C] * N + [self.C * 2] + [self.C * 2] * N + [self.C * 4] + [self.C * 4] * N"
        ));
        assert!(text.contains(
            "layer_reductions = [False] * N + [True] + [False] * N + [True] + [False] * N"
        ));
        assert!(text.contains("lr=0.1, momentum=0.9,"));
        assert!(text.contains("weight_decay=5e-4, nesterov=True"));
        assert!(text.contains("T_max=200, eta_min=0"));
        assert!(text.contains("'batch_size': 256, 'epochs': 200"));
        assert!(text.contains("class ReLUConvBN(nn.Module):"));
        assert!(text.contains("class ResNetBasicblock(nn.Module):"));
        assert!(text.contains("class Network(nn.Module):"));
    }

    #[test]
    fn backbone_is_constant_across_calls() {
        assert_eq!(emit_backbone_addon(), emit_backbone_addon());
    }

    #[test]
    fn comment_matches_the_reference_text_for_cifar10() {
        let expected = "\
Task: CIFAR-10 image classification (10 classes, 32x32 RGB images).

This Cell is one building block within a larger neural network.
Full architecture:
- Stem layer: Conv2d(3 channels -> 16 channels, 3x3 kernel) + BatchNorm2d.
- Main head: stacks 15 copies of the Cell into a sequence. 1 ResNetBasicblock layer is inserted every 5 Cells (total 2).
- Final layers: BatchNorm2d + ReLU + Global Average Pooling + Linear layer to 10 classes.

Helpers:
- ReLUConvBN: Sequential ReLU -> Conv -> BatchNorm (pre-activation)
- ResNetBasicblock: Residual block with 2 ReLUConvBN plus 1 skip connection with input downsampling

Training Details: SGD optimizer with momentum=0.9, weight_decay=5e-4, initial learning_rate=0.1
with cosine annealing schedule over 200 epochs, batch_size=256, plus standard data augmentation.";
        let emitted = emit_comment_addon(&TaskMeta::cifar10()).text;
        assert_eq!(normalize_code(&emitted), normalize_code(expected));
    }

    #[test]
    fn comment_substitutes_cifar100_fields() {
        let text = emit_comment_addon(&TaskMeta::cifar100()).text;
        assert!(
            text.contains("Task: CIFAR-100 image classification (100 classes, 32x32 RGB images).")
        );
        assert!(text.contains("Linear layer to 100 classes."));
    }

    #[test]
    fn comment_scales_cell_count_with_n() {
        let meta = TaskMeta {
            cells_per_stage: 3,
            ..TaskMeta::cifar10()
        };
        let text = emit_comment_addon(&meta).text;
        assert!(text.contains("stacks 9 copies of the Cell"));
        assert!(text.contains("every 3 Cells (total 2)"));
    }
}
