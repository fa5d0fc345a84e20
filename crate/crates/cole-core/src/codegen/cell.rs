//! Cell genotype emission in the three verbosity modes.

use super::{emit_backbone_addon, emit_comment_addon};
use super::{CodeText, ContextAddOns, Origin, TaskMeta, VerbosityMode};
use crate::nb201::{CellGenotype, OpKind};

const HELPER_CLASS: &str = "\
class ReLU_Conv2d_BatchNorm(nn.Module):
  def __init__(self, channels, kernel_size, stride, padding):
    super().__init__()
    self.op = nn.Sequential(
      nn.ReLU(inplace=False),
      nn.Conv2d(channels, channels, kernel_size, stride=stride, padding=padding, bias=False),
      nn.BatchNorm2d(channels)
    )
  def forward(self, x):
    return self.op(x)";

/// Emits the code text for a cell genotype.
///
/// Zeroize edges contribute nothing; SkipConnect edges appear only as bare
/// `+ node_i` forward terms; every other edge gets an `op_<src>_<dst>`
/// module field, ordered by target then source. When the comment add-on is
/// requested without a task descriptor, the CIFAR-10 descriptor is used.
pub fn emit_cell_code(
    g: &CellGenotype,
    mode: VerbosityMode,
    addons: ContextAddOns,
    task_meta: Option<&TaskMeta>,
) -> CodeText {
    let mut parts: Vec<String> = Vec::new();
    if addons.comment {
        let default_meta;
        let meta = match task_meta {
            Some(meta) => meta,
            None => {
                default_meta = TaskMeta::cifar10();
                &default_meta
            }
        };
        parts.push(emit_comment_addon(meta).text.trim_end().to_string());
    }
    if addons.backbone {
        parts.push(emit_backbone_addon().text.trim_end().to_string());
    }
    parts.push(cell_class_text(g, mode));
    CodeText::new(parts.join("\n\n") + "\n", Origin::NB201)
}

fn cell_class_text(g: &CellGenotype, mode: VerbosityMode) -> String {
    let mut out = String::new();
    if mode == VerbosityMode::HelperMethod && uses_helper(g) {
        out.push_str(HELPER_CLASS);
        out.push_str("\n\n");
    }
    out.push_str("class Cell(nn.Module):\n");
    out.push_str("  def __init__(self, channels):\n");
    out.push_str("    super().__init__()\n");
    for ((src, dst), op) in g.edges() {
        if let Some(expr) = module_expr(op, mode) {
            out.push_str(&format!("    self.op_{src}_{dst} = {expr}\n"));
        }
    }
    if mode == VerbosityMode::Inline {
        out.push('\n');
    }
    out.push_str("  def forward(self, x):\n");
    out.push_str("    node_0 = x\n");
    for target in 1..=3usize {
        let terms: Vec<String> = (0..target)
            .filter_map(|src| match g.op(src, target) {
                OpKind::Zeroize => None,
                OpKind::SkipConnect => Some(format!("node_{src}")),
                _ => Some(format!("self.op_{src}_{target}(node_{src})")),
            })
            .collect();
        let rhs = if terms.is_empty() {
            "torch.zeros_like(node_0)".to_string()
        } else {
            terms.join(" + ")
        };
        out.push_str(&format!("    node_{target} = {rhs}\n"));
    }
    out.push_str("    return node_3");
    out
}

fn uses_helper(g: &CellGenotype) -> bool {
    g.edges()
        .any(|(_, op)| matches!(op, OpKind::NorConv1x1 | OpKind::NorConv3x3))
}

fn module_expr(op: OpKind, mode: VerbosityMode) -> Option<String> {
    let (kernel, padding) = match op {
        OpKind::Zeroize | OpKind::SkipConnect => return None,
        OpKind::AvgPool3x3 => {
            return Some("nn.AvgPool2d(kernel_size=3, stride=1, padding=1)".to_string());
        }
        OpKind::NorConv1x1 => (1, 0),
        OpKind::NorConv3x3 => (3, 1),
    };
    Some(match mode {
        VerbosityMode::Inline => format!(
            "nn.Sequential(nn.ReLU(inplace=False), nn.Conv2d(channels, channels, kernel_size={kernel}, stride=1, padding={padding}, bias=False), nn.BatchNorm2d(channels))"
        ),
        VerbosityMode::HelperMethod | VerbosityMode::ExcludedHelper => format!(
            "ReLU_Conv2d_BatchNorm(channels, kernel_size={kernel}, stride=1, padding={padding})"
        ),
    })
}
