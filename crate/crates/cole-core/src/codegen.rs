//! Deterministic architecture-to-code emission.
//!
//! Emitted text is the unit fed to embedding providers; it is data, never
//! executed. The cell dialect follows the PyTorch-subclass style with
//! 2-space indentation; add-ons are checked-in fixture templates so their
//! wording stays bit-stable.

pub mod addons;
pub mod cell;
pub mod einspace;

pub use addons::{emit_backbone_addon, emit_comment_addon};
pub use cell::emit_cell_code;
pub use einspace::{transpile_einspace, transpile_einspace_with_input};

/// How much of a composite operation's definition lands in the text.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VerbosityMode {
    /// Composite ops become fully-defined helper classes, then instances.
    HelperMethod,
    /// Composite logic is expanded in place via a sequential container.
    Inline,
    /// Helper classes are referenced but their definitions are omitted.
    ExcludedHelper,
}

/// Optional context blocks prepended to the cell text.
///
/// Both off is the Base configuration. With both on, the order is comment,
/// then backbone, then cell.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct ContextAddOns {
    /// Prepend the macro-skeleton `Network` implementation.
    pub backbone: bool,
    /// Prepend the natural-language task docstring.
    pub comment: bool,
}

/// Which pipeline produced a piece of code text.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Origin {
    /// Emitted from a cell genotype.
    NB201,
    /// Emitted from a derivation tree.
    Einspace,
}

/// Emitted architecture source text.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CodeText {
    /// The text itself, line endings normalized to `\n`.
    pub text: String,
    /// Producing pipeline.
    pub origin: Origin,
}

impl CodeText {
    /// Wraps text, normalizing `\r\n` and bare `\r` line endings to `\n`.
    pub fn new(text: impl Into<String>, origin: Origin) -> Self {
        let text = text.into().replace("\r\n", "\n").replace('\r', "\n");
        debug_assert!(!text.is_empty());
        CodeText { text, origin }
    }
}

/// Task descriptor feeding the comment add-on's substitution slots.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TaskMeta {
    /// Display name, e.g. `CIFAR-10`.
    pub task_name: String,
    /// Classifier output classes.
    pub num_classes: u32,
    /// Input description, e.g. `32x32 RGB images`.
    pub input_desc: String,
    /// Stem output channels.
    pub stem_channels: u32,
    /// Cells per stage (N); the backbone stacks 3N cells total.
    pub cells_per_stage: u32,
}

impl TaskMeta {
    /// The default CIFAR-10 descriptor used throughout the benchmark.
    pub fn cifar10() -> Self {
        TaskMeta {
            task_name: "CIFAR-10".to_string(),
            num_classes: 10,
            input_desc: "32x32 RGB images".to_string(),
            stem_channels: 16,
            cells_per_stage: 5,
        }
    }

    /// The CIFAR-100 descriptor (same image geometry, 100 classes).
    pub fn cifar100() -> Self {
        TaskMeta {
            num_classes: 100,
            task_name: "CIFAR-100".to_string(),
            ..TaskMeta::cifar10()
        }
    }
}

/// Normalizes code text for golden comparisons: strips trailing spaces,
/// collapses blank-line runs to one, and drops leading/trailing blank lines.
pub fn normalize_code(text: &str) -> String {
    let mut lines: Vec<&str> = Vec::new();
    let mut last_blank = false;
    for line in text.lines() {
        let trimmed = line.trim_end();
        let blank = trimmed.is_empty();
        if blank && (last_blank || lines.is_empty()) {
            continue;
        }
        lines.push(trimmed);
        last_blank = blank;
    }
    while matches!(lines.last(), Some(l) if l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}
