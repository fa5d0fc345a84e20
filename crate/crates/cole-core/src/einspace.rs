//! Derivation trees for the grammar-based architecture space.
//!
//! The string dialect nests nodes as `name(args)[children]{'key': value}`
//! with `,`-separated siblings. Four non-terminal keywords (`sequential`,
//! `branching`, `routing`, `computation`) may carry children; everything
//! else is a terminal primitive. Whitespace is insignificant everywhere
//! outside quoted attribute keys.

use crate::{Error, Result};

/// Structural role of a derivation-tree node.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NodeKind {
    /// Chains children in order.
    Sequential,
    /// Splits flow: (branching-fn, inner branches.., aggregation-fn).
    Branching,
    /// Wraps an inner function: (prerouting, inner, postrouting).
    Routing,
    /// Wraps exactly one terminal computation.
    Computation,
    /// A primitive operation; never has children.
    Terminal,
}

/// An attribute value: an integer list where one parses, raw text otherwise.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum AttrValue {
    /// Bracketed integer list, e.g. `[256, 27]`.
    Ints(Vec<i64>),
    /// Anything else, preserved verbatim (trimmed).
    Text(String),
}

/// One node of a parsed derivation tree.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DerivationTree {
    /// Structural role.
    pub kind: NodeKind,
    /// Normalized operation token, e.g. `linear(32)` or `sequential`.
    pub name: String,
    /// Integer hyperparameters parsed out of the token.
    pub params: Vec<i64>,
    /// Attribute block entries in source order.
    pub attrs: Vec<(String, AttrValue)>,
    /// Child nodes in source order.
    pub children: Vec<DerivationTree>,
}

impl DerivationTree {
    /// The token's base name, without the argument list.
    pub fn base_name(&self) -> &str {
        match self.name.find('(') {
            Some(i) => &self.name[..i],
            None => &self.name,
        }
    }

    /// The `out_feature_shape` annotation, when present and integer-valued.
    pub fn out_feature_shape(&self) -> Option<&[i64]> {
        self.attrs.iter().find_map(|(k, v)| match (k.as_str(), v) {
            ("out_feature_shape", AttrValue::Ints(shape)) => Some(shape.as_slice()),
            _ => None,
        })
    }

    /// Serializes to the canonical pretty form: one child per line at
    /// 2-space indent, compact parameter lists, a single space after commas
    /// inside attribute lists.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out, 0);
        out
    }

    fn write_canonical(&self, out: &mut String, depth: usize) {
        out.push_str(&self.name);
        if !self.children.is_empty() {
            // A computation wraps exactly one terminal; it stays on one line.
            if self.kind == NodeKind::Computation {
                out.push('[');
                self.children[0].write_canonical(out, depth);
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, child) in self.children.iter().enumerate() {
                    if i > 0 {
                        out.push_str(",\n");
                    }
                    out.push_str(&"  ".repeat(depth + 1));
                    child.write_canonical(out, depth + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(depth));
                out.push(']');
            }
        }
        if !self.attrs.is_empty() {
            out.push('{');
            for (i, (key, value)) in self.attrs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push('\'');
                out.push_str(key);
                out.push_str("': ");
                match value {
                    AttrValue::Ints(list) => {
                        out.push('[');
                        for (j, n) in list.iter().enumerate() {
                            if j > 0 {
                                out.push_str(", ");
                            }
                            out.push_str(&n.to_string());
                        }
                        out.push(']');
                    }
                    AttrValue::Text(text) => out.push_str(text),
                }
            }
            out.push('}');
        }
    }
}

/// Splits an operation token into its base name and integer arguments.
pub fn extract_hyperparams(token: &str) -> Result<(String, Vec<i64>)> {
    let compact: String = token.chars().filter(|c| !c.is_whitespace()).collect();
    let (base, rest) = match compact.find('(') {
        Some(i) => (&compact[..i], &compact[i..]),
        None => (compact.as_str(), ""),
    };
    if base.is_empty() || !base.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(Error::Parse(format!("bad operation token '{token}'")));
    }
    if rest.is_empty() {
        return Ok((base.to_string(), Vec::new()));
    }
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in token '{token}'")))?;
    let mut params = Vec::new();
    for arg in inner.split(',') {
        let n: i64 = arg.parse().map_err(|_| {
            Error::Parse(format!("non-integer argument '{arg}' in token '{token}'"))
        })?;
        params.push(n);
    }
    Ok((base.to_string(), params))
}

/// Parses one derivation tree, requiring the whole input to be consumed.
pub fn parse_derivation_tree(s: &str) -> Result<DerivationTree> {
    let mut parser = Parser {
        chars: s.chars().collect(),
        pos: 0,
    };
    let tree = parser.parse_node()?;
    parser.skip_ws();
    if parser.pos < parser.chars.len() {
        return Err(parser.error("trailing input after the root node"));
    }
    Ok(tree)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: &str) -> Error {
        Error::Parse(format!("{message} at position {}", self.pos))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn parse_node(&mut self) -> Result<DerivationTree> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some('{') {
            return Err(self.error("dangling attribute block"));
        }
        let base = self.parse_ident()?;
        let params = if self.peek() == Some('(') {
            self.parse_params()?
        } else {
            Vec::new()
        };
        self.skip_ws();
        let children = if self.peek() == Some('[') {
            self.parse_children()?
        } else {
            Vec::new()
        };
        self.skip_ws();
        let attrs = if self.peek() == Some('{') {
            self.parse_attrs()?
        } else {
            Vec::new()
        };

        let kind = match base.as_str() {
            "sequential" => NodeKind::Sequential,
            "branching" => NodeKind::Branching,
            "routing" => NodeKind::Routing,
            "computation" => NodeKind::Computation,
            _ => NodeKind::Terminal,
        };
        if kind == NodeKind::Terminal && !children.is_empty() {
            return Err(Error::Parse(format!(
                "unknown non-terminal keyword '{base}' at position {start}"
            )));
        }
        match kind {
            NodeKind::Sequential if children.len() < 2 => {
                return Err(Error::Parse(format!(
                    "sequential at position {start} needs at least 2 children, found {}",
                    children.len()
                )));
            }
            NodeKind::Branching if children.len() < 3 => {
                return Err(Error::Parse(format!(
                    "branching at position {start} needs branching-fn, inner, aggregation-fn; found {} children",
                    children.len()
                )));
            }
            NodeKind::Routing if children.len() != 3 => {
                return Err(Error::Parse(format!(
                    "routing at position {start} needs exactly 3 children, found {}",
                    children.len()
                )));
            }
            NodeKind::Computation
                if (children.len() != 1 || children[0].kind != NodeKind::Terminal) =>
            {
                return Err(Error::Parse(format!(
                    "computation at position {start} must wrap exactly one terminal"
                )));
            }
            _ => {}
        }

        let name = if params.is_empty() {
            base
        } else {
            let args: Vec<String> = params.iter().map(|p| p.to_string()).collect();
            format!("{base}({})", args.join(","))
        };
        Ok(DerivationTree {
            kind,
            name,
            params,
            attrs,
            children,
        })
    }

    fn parse_ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected an operation name"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn parse_int(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| {
            self.pos = start;
            self.error("non-integer parameter")
        })
    }

    fn parse_params(&mut self) -> Result<Vec<i64>> {
        self.expect('(')?;
        let mut params = vec![self.parse_int()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    params.push(self.parse_int()?);
                }
                Some(')') => {
                    self.pos += 1;
                    return Ok(params);
                }
                _ => return Err(self.error("expected ',' or ')' in parameter list")),
            }
        }
    }

    fn parse_children(&mut self) -> Result<Vec<DerivationTree>> {
        let open = self.pos;
        self.expect('[')?;
        let mut children = vec![self.parse_node()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    children.push(self.parse_node()?);
                }
                Some(']') => {
                    self.pos += 1;
                    return Ok(children);
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "unbalanced brackets: '[' at position {open} is never closed"
                    )));
                }
            }
        }
    }

    fn parse_attrs(&mut self) -> Result<Vec<(String, AttrValue)>> {
        let open = self.pos;
        self.expect('{')?;
        let mut attrs = Vec::new();
        loop {
            self.skip_ws();
            self.expect('\'')?;
            let key_start = self.pos;
            while matches!(self.peek(), Some(c) if c != '\'') {
                self.pos += 1;
            }
            if self.peek().is_none() {
                return Err(Error::Parse(format!(
                    "dangling attribute block: '{{' at position {open} is never closed"
                )));
            }
            let key: String = self.chars[key_start..self.pos].iter().collect();
            self.pos += 1;
            self.expect(':')?;
            attrs.push((key, self.parse_attr_value()?));
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some('}') => {
                    self.pos += 1;
                    return Ok(attrs);
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "dangling attribute block: '{{' at position {open} is never closed"
                    )));
                }
            }
        }
    }

    fn parse_attr_value(&mut self) -> Result<AttrValue> {
        self.skip_ws();
        if self.peek() == Some('[') {
            let list_start = self.pos;
            if let Some(list) = self.try_parse_int_list() {
                return Ok(AttrValue::Ints(list));
            }
            self.pos = list_start;
        }
        // Opaque value: capture balanced text up to the next top-level
        // ',' or '}'.
        let start = self.pos;
        let mut depth = 0usize;
        while let Some(c) = self.peek() {
            match c {
                '[' | '(' | '{' => depth += 1,
                ']' | ')' => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                '}' => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                ',' if depth == 0 => break,
                _ => {}
            }
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(self.error("empty attribute value"));
        }
        Ok(AttrValue::Text(trimmed.to_string()))
    }

    fn try_parse_int_list(&mut self) -> Option<Vec<i64>> {
        // '[' already peeked.
        self.pos += 1;
        let mut list = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(']') && list.is_empty() {
                self.pos += 1;
                return Some(list);
            }
            list.push(self.parse_int().ok()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(']') => {
                    self.pos += 1;
                    return Some(list);
                }
                _ => return None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn leaf(name: &str, shape: Option<Vec<i64>>) -> DerivationTree {
        let (_, params) = extract_hyperparams(name).unwrap();
        DerivationTree {
            kind: NodeKind::Terminal,
            name: name.to_string(),
            params,
            attrs: shape
                .map(|s| vec![("out_feature_shape".to_string(), AttrValue::Ints(s))])
                .into_iter()
                .flatten()
                .collect(),
            children: Vec::new(),
        }
    }

    fn inner(kind: NodeKind, name: &str, children: Vec<DerivationTree>) -> DerivationTree {
        let (_, params) = extract_hyperparams(name).unwrap();
        DerivationTree {
            kind,
            name: name.to_string(),
            params,
            attrs: Vec::new(),
            children,
        }
    }

    fn reference_tree() -> DerivationTree {
        inner(
            NodeKind::Branching,
            "branching(4)",
            vec![
                leaf("clone(4)", Some(vec![3, 32, 32])),
                inner(
                    NodeKind::Sequential,
                    "sequential",
                    vec![
                        inner(
                            NodeKind::Routing,
                            "routing",
                            vec![
                                leaf("im2col(3,2,1)", Some(vec![256, 27])),
                                inner(
                                    NodeKind::Computation,
                                    "computation",
                                    vec![leaf("linear(32)", Some(vec![256, 32]))],
                                ),
                                leaf("identity", Some(vec![256, 32])),
                            ],
                        ),
                        inner(
                            NodeKind::Computation,
                            "computation",
                            vec![leaf("linear(16)", Some(vec![256, 16]))],
                        ),
                    ],
                ),
                leaf("cat(4,1)", Some(vec![1024, 16])),
            ],
        )
    }

    #[test]
    fn parses_the_reference_tree() {
        let tree = parse_derivation_tree(TREE).unwrap();
        assert_eq!(tree, reference_tree());
    }

    #[test]
    fn reference_tree_annotations_are_all_captured() {
        let tree = parse_derivation_tree(TREE).unwrap();
        let mut shapes = Vec::new();
        fn collect<'t>(node: &'t DerivationTree, out: &mut Vec<&'t [i64]>) {
            if let Some(s) = node.out_feature_shape() {
                out.push(s);
            }
            for child in &node.children {
                collect(child, out);
            }
        }
        collect(&tree, &mut shapes);
        assert_eq!(
            shapes,
            vec![
                &[3, 32, 32][..],
                &[256, 27],
                &[256, 32],
                &[256, 32],
                &[256, 16],
                &[1024, 16],
            ]
        );
    }

    #[test]
    fn parses_a_single_computation() {
        let tree =
            parse_derivation_tree("computation[linear(8){'out_feature_shape': [4, 8]}]").unwrap();
        assert_eq!(tree.kind, NodeKind::Computation);
        assert_eq!(tree.children.len(), 1);
        let leaf = &tree.children[0];
        assert_eq!(leaf.kind, NodeKind::Terminal);
        assert_eq!(leaf.base_name(), "linear");
        assert_eq!(leaf.params, vec![8]);
        assert_eq!(leaf.out_feature_shape(), Some(&[4, 8][..]));
    }

    #[test]
    fn unbalanced_bracket_is_reported() {
        let err = parse_derivation_tree("branching(2)[clone(2)").unwrap_err();
        assert!(err.to_string().contains("unbalanced brackets"), "{err}");
    }

    #[test]
    fn dangling_attribute_block_is_reported() {
        let err = parse_derivation_tree("identity{'out_feature_shape': [1, 2]").unwrap_err();
        assert!(
            err.to_string().contains("dangling attribute block"),
            "{err}"
        );
        let err = parse_derivation_tree("{'out_feature_shape': [1, 2]}").unwrap_err();
        assert!(
            err.to_string().contains("dangling attribute block"),
            "{err}"
        );
    }

    #[test]
    fn unknown_non_terminal_is_reported() {
        let err = parse_derivation_tree("serial[identity, identity]").unwrap_err();
        assert!(err.to_string().contains("serial"), "{err}");
    }

    #[test]
    fn non_integer_parameter_is_reported_with_offset() {
        let err = parse_derivation_tree("computation[linear(x)]").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-integer parameter"), "{msg}");
        assert!(msg.contains("position 19"), "{msg}");
    }

    #[test]
    fn arity_violations_are_rejected() {
        assert!(parse_derivation_tree("sequential[identity]").is_err());
        assert!(parse_derivation_tree("routing[identity, identity]").is_err());
        assert!(parse_derivation_tree("computation[identity, identity]").is_err());
        assert!(parse_derivation_tree("branching(2)[clone(2), cat(2,0)]").is_err());
    }

    #[test]
    fn parsing_is_whitespace_insensitive() {
        let minified: String = TREE.chars().filter(|c| !c.is_whitespace()).collect();
        assert_eq!(
            parse_derivation_tree(&minified).unwrap(),
            parse_derivation_tree(TREE).unwrap()
        );
    }

    #[test]
    fn canonical_form_is_a_fixed_point() {
        let tree = parse_derivation_tree(TREE).unwrap();
        let canon = tree.to_canonical_string();
        let reparsed = parse_derivation_tree(&canon).unwrap();
        assert_eq!(reparsed, tree);
        assert_eq!(reparsed.to_canonical_string(), canon);
    }

    #[test]
    fn canonical_form_matches_the_reference_layout() {
        let tree = parse_derivation_tree(TREE).unwrap();
        assert_eq!(tree.to_canonical_string(), TREE);
    }

    #[test]
    fn extracts_hyperparams() {
        assert_eq!(
            extract_hyperparams("linear(128)").unwrap(),
            ("linear".to_string(), vec![128])
        );
        assert_eq!(
            extract_hyperparams("identity").unwrap(),
            ("identity".to_string(), vec![])
        );
        assert_eq!(
            extract_hyperparams("im2col(3,2,1)").unwrap(),
            ("im2col".to_string(), vec![3, 2, 1])
        );
        assert!(extract_hyperparams("linear(abc)").is_err());
    }

    #[test]
    fn unknown_attribute_values_are_preserved_as_text() {
        let tree = parse_derivation_tree("identity{'note': free form, 'dims': [1, 2]}").unwrap();
        assert_eq!(
            tree.attrs,
            vec![
                ("note".to_string(), AttrValue::Text("free form".to_string())),
                ("dims".to_string(), AttrValue::Ints(vec![1, 2])),
            ]
        );
    }
}
