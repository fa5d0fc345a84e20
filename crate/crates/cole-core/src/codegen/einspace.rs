//! Derivation-tree transpilation into the container-module dialect.
//!
//! Emission is a post-order walk: children first, then the container that
//! consumes them. A shape is threaded through the walk so terminals that
//! need their input arity (linear, im2col) can read it from the preceding
//! node's `out_feature_shape` annotation.

use super::{CodeText, Origin};
use crate::einspace::{DerivationTree, NodeKind};
use crate::{Error, Result};
use std::collections::HashMap;

/// Transpiles a derivation tree with no externally supplied input shape.
///
/// Every shape a terminal needs must then come from annotations inside the
/// tree itself.
pub fn transpile_einspace(tree: &DerivationTree) -> Result<CodeText> {
    transpile_einspace_with_input(tree, None)
}

/// Transpiles a derivation tree, seeding the walk with the shape of the
/// network input (sans batch dimension).
pub fn transpile_einspace_with_input(
    tree: &DerivationTree,
    input_shape: Option<&[i64]>,
) -> Result<CodeText> {
    let mut emitter = Emitter {
        counters: HashMap::new(),
        lines: Vec::new(),
    };
    let mut path = vec![tree.name.clone()];
    let (root_field, _) = emitter.emit(tree, input_shape.map(<[i64]>::to_vec), &mut path)?;
    let mut text = String::new();
    text.push_str("class Network(nn.Module):\n");
    text.push_str("  def __init__(self):\n");
    text.push_str("    super(Network, self).__init__()\n");
    for line in &emitter.lines {
        text.push_str(line);
        text.push('\n');
    }
    text.push_str("  def forward(self, x):\n");
    text.push_str(&format!("    return self.{root_field}(x)\n"));
    Ok(CodeText::new(text, Origin::Einspace))
}

type Shape = Option<Vec<i64>>;

struct Emitter {
    counters: HashMap<String, usize>,
    lines: Vec<String>,
}

impl Emitter {
    fn next_field(&mut self, base: &str) -> String {
        let counter = self.counters.entry(base.to_string()).or_insert(0);
        let field = format!("{base}_{counter}");
        *counter += 1;
        field
    }

    fn push_statement(&mut self, field: &str, constructor: &str) {
        self.lines.push(format!("    self.{field} = {constructor}"));
    }

    /// Emits one node, returning its field name and output shape.
    fn emit(
        &mut self,
        node: &DerivationTree,
        in_shape: Shape,
        path: &mut Vec<String>,
    ) -> Result<(String, Shape)> {
        match node.kind {
            NodeKind::Terminal => self.emit_terminal(node, in_shape, path),
            NodeKind::Computation => {
                let (child, child_out) = self.emit_child(node, 0, in_shape, path)?;
                let field = self.next_field("computation");
                self.push_statement(
                    &field,
                    &format!("ComputationModule(computation_fn=self.{child})"),
                );
                Ok((field, own_shape(node).or(child_out)))
            }
            NodeKind::Sequential => {
                let mut shape = in_shape;
                let mut fields = Vec::new();
                for i in 0..node.children.len() {
                    let (child, out) = self.emit_child(node, i, shape, path)?;
                    fields.push(child);
                    shape = out;
                }
                let field = self.next_field("sequential");
                let constructor = if fields.len() == 2 {
                    format!(
                        "SequentialModule(\n      first_fn=self.{},\n      second_fn=self.{}\n    )",
                        fields[0], fields[1]
                    )
                } else {
                    format!(
                        "SequentialModule(\n      fns=nn.ModuleList([{}])\n    )",
                        field_list(&fields)
                    )
                };
                self.push_statement(&field, &constructor);
                Ok((field, own_shape(node).or(shape)))
            }
            NodeKind::Routing => {
                let (pre, s1) = self.emit_child(node, 0, in_shape, path)?;
                let (inner, s2) = self.emit_child(node, 1, s1, path)?;
                let (post, s3) = self.emit_child(node, 2, s2, path)?;
                let field = self.next_field("routing");
                self.push_statement(
                    &field,
                    &format!(
                        "RoutingModule(\n      prerouting_fn=self.{pre},\n      inner_fn=self.{inner},\n      postrouting_fn=self.{post}\n    )"
                    ),
                );
                Ok((field, own_shape(node).or(s3)))
            }
            NodeKind::Branching => {
                let last = node.children.len() - 1;
                let (branch_fn, branched) = self.emit_child(node, 0, in_shape, path)?;
                let mut branches = Vec::new();
                let mut out = branched.clone();
                for i in 1..last {
                    let (field, shape) = self.emit_child(node, i, branched.clone(), path)?;
                    branches.push(field);
                    out = shape;
                }
                let (agg, agg_out) = self.emit_child(node, last, out, path)?;
                let field = self.next_field("branching");
                self.push_statement(
                    &field,
                    &format!(
                        "BranchingModule(\n      branching_fn=self.{branch_fn},\n      inner_fn=nn.ModuleList([{}]),\n      aggregation_fn=self.{agg}\n    )",
                        field_list(&branches)
                    ),
                );
                Ok((field, own_shape(node).or(agg_out)))
            }
        }
    }

    fn emit_child(
        &mut self,
        parent: &DerivationTree,
        index: usize,
        in_shape: Shape,
        path: &mut Vec<String>,
    ) -> Result<(String, Shape)> {
        let child = &parent.children[index];
        path.push(format!("{}[{index}]", child.name));
        let result = self.emit(child, in_shape, path);
        path.pop();
        result
    }

    fn emit_terminal(
        &mut self,
        node: &DerivationTree,
        in_shape: Shape,
        path: &[String],
    ) -> Result<(String, Shape)> {
        let base = node.base_name().to_string();
        let constructor = match base.as_str() {
            "linear" => {
                let out_features = param(node, 0, path)?;
                let in_features = in_shape
                    .as_ref()
                    .and_then(|s| s.last().copied())
                    .ok_or_else(|| {
                        Error::Transpile(format!(
                            "linear at {} has no input shape; annotate the preceding node or supply a root input shape",
                            render_path(path)
                        ))
                    })?;
                format!("nn.Linear({in_features}, {out_features})")
            }
            "identity" => "nn.Identity()".to_string(),
            "clone" => format!("CloneTensor(num_clones={})", param(node, 0, path)?),
            "cat" => format!("CatTensors(dim={})", param(node, 1, path)?),
            "im2col" => {
                let kernel = param(node, 0, path)?;
                let stride = param(node, 1, path)?;
                let padding = param(node, 2, path)?;
                let shape = in_shape.as_ref().filter(|s| !s.is_empty()).ok_or_else(|| {
                    Error::Transpile(format!(
                        "im2col at {} has no input shape; annotate the preceding node or supply a root input shape",
                        render_path(path)
                    ))
                })?;
                let dims: Vec<String> = std::iter::once(1i64)
                    .chain(shape.iter().copied())
                    .map(|d| d.to_string())
                    .collect();
                format!(
                    "Im2Col(input_shape=[{}], kernel_size={kernel}, stride={stride}, padding={padding})",
                    dims.join(", ")
                )
            }
            // Terminals outside the reference set get a deterministic
            // PascalCase constructor with positional arguments.
            _ => {
                let args: Vec<String> = node.params.iter().map(|p| p.to_string()).collect();
                format!("{}({})", pascal_case(&base), args.join(", "))
            }
        };
        let field = self.next_field(&base);
        self.push_statement(&field, &constructor);
        Ok((field, own_shape(node).or(in_shape)))
    }
}

fn own_shape(node: &DerivationTree) -> Shape {
    node.out_feature_shape().map(<[i64]>::to_vec)
}

fn field_list(fields: &[String]) -> String {
    let refs: Vec<String> = fields.iter().map(|f| format!("self.{f}")).collect();
    refs.join(", ")
}

fn render_path(path: &[String]) -> String {
    path.join(" / ")
}

fn param(node: &DerivationTree, index: usize, path: &[String]) -> Result<i64> {
    node.params.get(index).copied().ok_or_else(|| {
        Error::Transpile(format!(
            "{} at {} is missing parameter {index}",
            node.base_name(),
            render_path(path)
        ))
    })
}

fn pascal_case(s: &str) -> String {
    s.split('_')
        .filter(|part| !part.is_empty())
        .map(|part| {
            let mut chars = part.chars();
            match chars.next() {
                Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
                None => String::new(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::einspace::parse_derivation_tree;

    const TREE: &str = "branching(4)[
  clone(4){'out_feature_shape': [3, 32, 32]},
  sequential[
    routing[
      im2col(3,2,1){'out_feature_shape': [256, 27]},
      computation[linear(32){'out_feature_shape': [256, 32]}],
      identity{'out_feature_shape': [256, 32]}
    ],
    computation[linear(16){'out_feature_shape': [256, 16]}]
  ],
  cat(4,1){'out_feature_shape': [1024, 16]}
]";

    const NETWORK_REFERENCE: &str = "\
class Network(nn.Module):
  def __init__(self):
    super(Network, self).__init__()
    self.clone_0 = CloneTensor(num_clones=4)
    self.im2col_0 = Im2Col(input_shape=[1, 3, 32, 32], kernel_size=3, stride=2, padding=1)
    self.linear_0 = nn.Linear(27, 32)
    self.computation_0 = ComputationModule(computation_fn=self.linear_0)
    self.identity_0 = nn.Identity()
    self.routing_0 = RoutingModule(
      prerouting_fn=self.im2col_0,
      inner_fn=self.computation_0,
      postrouting_fn=self.identity_0
    )
    self.linear_1 = nn.Linear(32, 16)
    self.computation_1 = ComputationModule(computation_fn=self.linear_1)
    self.sequential_0 = SequentialModule(
      first_fn=self.routing_0,
      second_fn=self.computation_1
    )
    self.cat_0 = CatTensors(dim=1)
    self.branching_0 = BranchingModule(
      branching_fn=self.clone_0,
      inner_fn=nn.ModuleList([self.sequential_0]),
      aggregation_fn=self.cat_0
    )
  def forward(self, x):
    return self.branching_0(x)";

    #[test]
    fn transpiles_the_reference_tree() {
        let tree = parse_derivation_tree(TREE).unwrap();
        let code = transpile_einspace(&tree).unwrap();
        assert_eq!(code.text.trim_end(), NETWORK_REFERENCE);
        assert_eq!(code.origin, Origin::Einspace);
    }

    #[test]
    fn reference_field_names_appear_exactly_once() {
        let tree = parse_derivation_tree(TREE).unwrap();
        let text = transpile_einspace(&tree).unwrap().text;
        for field in [
            "clone_0",
            "im2col_0",
            "linear_0",
            "computation_0",
            "identity_0",
            "routing_0",
            "linear_1",
            "computation_1",
            "sequential_0",
            "cat_0",
            "branching_0",
        ] {
            let needle = format!("self.{field} = ");
            assert_eq!(text.matches(&needle).count(), 1, "{field}");
        }
    }

    #[test]
    fn transpiles_a_single_computation_with_a_root_shape() {
        let tree =
            parse_derivation_tree("computation[linear(8){'out_feature_shape': [4, 8]}]").unwrap();
        let code = transpile_einspace_with_input(&tree, Some(&[4, 4])).unwrap();
        let expected = "\
class Network(nn.Module):
  def __init__(self):
    super(Network, self).__init__()
    self.linear_0 = nn.Linear(4, 8)
    self.computation_0 = ComputationModule(computation_fn=self.linear_0)
  def forward(self, x):
    return self.computation_0(x)";
        assert_eq!(code.text.trim_end(), expected);
    }

    #[test]
    fn transpilation_is_deterministic() {
        let tree = parse_derivation_tree(TREE).unwrap();
        assert_eq!(
            transpile_einspace(&tree).unwrap(),
            transpile_einspace(&tree).unwrap()
        );
    }

    #[test]
    fn missing_input_shape_error_names_the_node_path() {
        let tree = parse_derivation_tree("computation[linear(8)]").unwrap();
        let err = transpile_einspace(&tree).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("linear(8)[0]"), "{msg}");
        assert!(msg.contains("computation"), "{msg}");
    }

    #[test]
    fn counters_are_per_base_name() {
        let tree = parse_derivation_tree(
            "sequential[computation[linear(8){'out_feature_shape': [4, 8]}], computation[linear(2){'out_feature_shape': [4, 2]}]]",
        )
        .unwrap();
        let text = transpile_einspace_with_input(&tree, Some(&[4, 4]))
            .unwrap()
            .text;
        assert!(text.contains("self.linear_0 = nn.Linear(4, 8)"));
        assert!(text.contains("self.linear_1 = nn.Linear(8, 2)"));
        assert!(text.contains("self.computation_0 = "));
        assert!(text.contains("self.computation_1 = "));
        assert!(text.contains("self.sequential_0 = "));
    }

    #[test]
    fn multiple_branches_share_the_module_list() {
        let tree = parse_derivation_tree(
            "branching(2)[clone(2){'out_feature_shape': [4]}, computation[linear(3){'out_feature_shape': [3]}], computation[linear(5){'out_feature_shape': [5]}], cat(2,0){'out_feature_shape': [8]}]",
        )
        .unwrap();
        let text = transpile_einspace(&tree).unwrap().text;
        assert!(text.contains("self.linear_0 = nn.Linear(4, 3)"));
        assert!(text.contains("self.linear_1 = nn.Linear(4, 5)"));
        assert!(
            text.contains("inner_fn=nn.ModuleList([self.computation_0, self.computation_1])"),
            "{text}"
        );
    }

    #[test]
    fn unknown_terminals_fall_back_to_pascal_case() {
        let tree = parse_derivation_tree(
            "sequential[computation[maxpool(2){'out_feature_shape': [4]}], computation[dot_product(8){'out_feature_shape': [8]}]]",
        )
        .unwrap();
        let text = transpile_einspace_with_input(&tree, Some(&[4]))
            .unwrap()
            .text;
        assert!(text.contains("self.maxpool_0 = Maxpool(2)"), "{text}");
        assert!(
            text.contains("self.dot_product_0 = DotProduct(8)"),
            "{text}"
        );
    }
}
