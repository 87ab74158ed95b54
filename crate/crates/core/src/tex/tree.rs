//! Document tree construction with structural validation.

use std::ops::Range;

use thiserror::Error;

use super::token::{tokenize, TexToken, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Root,
    Environment(String),
    /// A `{...}` group, either free-standing or a command argument.
    Group,
    /// A `[...]` optional argument attached to a command.
    OptionalArg,
    InlineMath,
    /// `$$...$$`.
    DisplayMath,
    /// Children are the argument groups, in source order.
    CommandCall(String),
    PlainText,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TexNode {
    pub kind: NodeKind,
    pub span: Range<usize>,
    pub children: Vec<TexNode>,
}

impl TexNode {
    fn leaf(kind: NodeKind, span: Range<usize>) -> Self {
        TexNode { kind, span, children: Vec::new() }
    }

    pub fn text<'s>(&self, source: &'s str) -> &'s str {
        &source[self.span.clone()]
    }

    pub fn command_name(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::CommandCall(name) => Some(name),
            _ => None,
        }
    }

    /// Depth-first pre-order walk.
    pub fn walk<'n>(&'n self, f: &mut impl FnMut(&'n TexNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("unbalanced brace at byte {offset}")]
    UnbalancedBrace { offset: usize },
    #[error("unmatched math delimiter at byte {offset}")]
    UnmatchedMathDelim { offset: usize },
    #[error("\\end{{{found}}} at byte {offset} does not close \\begin{{{expected}}}")]
    EnvMismatch { offset: usize, expected: String, found: String },
    #[error("\\begin{{{name}}} at byte {offset} is never closed")]
    UnclosedEnv { name: String, offset: usize },
    #[error("\\end{{{name}}} at byte {offset} has no matching \\begin")]
    UnopenedEnv { name: String, offset: usize },
}

impl TreeError {
    pub fn offset(&self) -> usize {
        match self {
            TreeError::UnbalancedBrace { offset }
            | TreeError::UnmatchedMathDelim { offset }
            | TreeError::EnvMismatch { offset, .. }
            | TreeError::UnclosedEnv { offset, .. }
            | TreeError::UnopenedEnv { offset, .. } => *offset,
        }
    }
}

/// A validated parse of one TeX source. Owns the source text so that every
/// node span can be resolved back to bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentTree {
    source: String,
    root: TexNode,
}

impl DocumentTree {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &TexNode {
        &self.root
    }

    /// The outermost `document` environment, if any.
    pub fn document_env(&self) -> Option<&TexNode> {
        fn find(n: &TexNode) -> Option<&TexNode> {
            if n.kind == NodeKind::Environment("document".into()) {
                return Some(n);
            }
            n.children.iter().find_map(find)
        }
        find(&self.root)
    }

    /// Checks the span and environment-name invariants; returns a description
    /// of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.root.span != (0..self.source.len()) {
            return Err(format!("root span {:?} does not cover source", self.root.span));
        }
        check_node(&self.root, &self.source)
    }
}

fn check_node(node: &TexNode, src: &str) -> Result<(), String> {
    let mut prev_end = node.span.start;
    for child in &node.children {
        if child.span.start < prev_end || child.span.end > node.span.end || child.span.start > child.span.end {
            return Err(format!("child {:?} escapes or overlaps within parent {:?}", child.span, node.span));
        }
        prev_end = child.span.end;
        check_node(child, src)?;
    }
    if let NodeKind::Environment(name) = &node.kind {
        let text = node.text(src);
        if !text.starts_with(&format!("\\begin{{{name}}}")) || !text.ends_with(&format!("\\end{{{name}}}")) {
            return Err(format!("environment {name} at {:?} has mismatched delimiters", node.span));
        }
    }
    Ok(())
}

/// Tokenizes and builds in one step.
pub fn parse(source: &str) -> Result<DocumentTree, TreeError> {
    build_tree(&tokenize(source))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum FrameKind {
    Root,
    Env(String),
    Group,
    OptArg,
    InlineMath,
    DisplayMath,
}

struct Frame {
    kind: FrameKind,
    start: usize,
    children: Vec<TexNode>,
    /// Command waiting for possible argument groups.
    pending: Option<TexNode>,
    /// Whether this frame is an argument of the parent's pending command.
    is_arg: bool,
}

impl Frame {
    fn new(kind: FrameKind, start: usize, is_arg: bool) -> Self {
        Frame { kind, start, children: Vec::new(), pending: None, is_arg }
    }

    fn flush(&mut self) {
        if let Some(cmd) = self.pending.take() {
            self.children.push(cmd);
        }
    }

    fn push_text(&mut self, span: Range<usize>) {
        if let Some(last) = self.children.last_mut() {
            if last.kind == NodeKind::PlainText && last.span.end == span.start {
                last.span.end = span.end;
                return;
            }
        }
        self.children.push(TexNode::leaf(NodeKind::PlainText, span));
    }
}

struct Builder {
    stack: Vec<Frame>,
}

impl Builder {
    fn top(&mut self) -> &mut Frame {
        self.stack.last_mut().expect("root frame is never popped")
    }

    fn open(&mut self, kind: FrameKind, start: usize) {
        self.top().flush();
        self.stack.push(Frame::new(kind, start, false));
    }

    fn close(&mut self, end: usize) {
        let mut frame = self.stack.pop().expect("close on non-root frame");
        frame.flush();
        let kind = match frame.kind {
            FrameKind::Env(name) => NodeKind::Environment(name),
            FrameKind::Group => NodeKind::Group,
            FrameKind::OptArg => NodeKind::OptionalArg,
            FrameKind::InlineMath => NodeKind::InlineMath,
            FrameKind::DisplayMath => NodeKind::DisplayMath,
            FrameKind::Root => unreachable!("root is closed by finish"),
        };
        let node = TexNode { kind, span: frame.start..end, children: frame.children };
        let parent = self.top();
        if frame.is_arg {
            let cmd = parent.pending.as_mut().expect("argument frame without pending command");
            cmd.span.end = end;
            cmd.children.push(node);
        } else {
            parent.children.push(node);
        }
    }

    fn has_group_below_top(&self) -> bool {
        self.stack[..self.stack.len() - 1].iter().any(|f| f.kind == FrameKind::Group)
    }
}

/// Looks for the `]` closing an optional argument opened at `tokens[open]`.
fn optional_arg_closes(tokens: &[TexToken], open: usize) -> bool {
    let mut depth = 0usize;
    for t in &tokens[open + 1..] {
        match &t.kind {
            TokenKind::BraceOpen => depth += 1,
            TokenKind::BraceClose if depth == 0 => return false,
            TokenKind::BraceClose => depth -= 1,
            TokenKind::BracketClose if depth == 0 => return true,
            TokenKind::MathDelim | TokenKind::EnvBegin(_) | TokenKind::EnvEnd(_) if depth == 0 => return false,
            _ => {}
        }
    }
    false
}

/// Builds a validated document tree from a token stream produced by
/// [`tokenize`].
pub fn build_tree(tokens: &[TexToken]) -> Result<DocumentTree, TreeError> {
    let source: String = tokens.iter().map(|t| t.lexeme.as_str()).collect();
    let mut b = Builder { stack: vec![Frame::new(FrameKind::Root, 0, false)] };

    for (i, tok) in tokens.iter().enumerate() {
        let at = tok.span.start;

        let attach = b.top().pending.as_ref().and_then(|cmd| {
            let adjacent = cmd.span.end == at;
            match tok.kind {
                TokenKind::BraceOpen if adjacent => Some(FrameKind::Group),
                TokenKind::BracketOpen
                    if adjacent
                        && cmd.children.iter().all(|c| c.kind == NodeKind::OptionalArg)
                        && optional_arg_closes(tokens, i) =>
                {
                    Some(FrameKind::OptArg)
                }
                _ => None,
            }
        });
        if let Some(kind) = attach {
            b.stack.push(Frame::new(kind, at, true));
            continue;
        }
        b.top().flush();

        match &tok.kind {
            TokenKind::Command(name) => {
                b.top().pending = Some(TexNode::leaf(NodeKind::CommandCall(name.clone()), tok.span.clone()));
            }
            TokenKind::BraceOpen => b.open(FrameKind::Group, at),
            TokenKind::BraceClose => match b.top().kind.clone() {
                FrameKind::Group => b.close(tok.span.end),
                FrameKind::InlineMath | FrameKind::DisplayMath => {
                    return Err(TreeError::UnmatchedMathDelim { offset: b.top().start });
                }
                FrameKind::Env(name) if b.has_group_below_top() => {
                    return Err(TreeError::UnclosedEnv { name, offset: b.top().start });
                }
                _ => return Err(TreeError::UnbalancedBrace { offset: at }),
            },
            TokenKind::BracketClose if b.top().kind == FrameKind::OptArg => b.close(tok.span.end),
            TokenKind::BracketOpen | TokenKind::BracketClose | TokenKind::Text | TokenKind::Whitespace => {
                b.top().push_text(tok.span.clone());
            }
            TokenKind::MathDelim if tok.is_display_delim() => match b.top().kind {
                FrameKind::DisplayMath => b.close(tok.span.end),
                FrameKind::InlineMath => {
                    // `$a$$b$`: the first `$` closes, the second opens.
                    b.close(at + 1);
                    b.open(FrameKind::InlineMath, at + 1);
                }
                _ => b.open(FrameKind::DisplayMath, at),
            },
            TokenKind::MathDelim => match b.top().kind {
                FrameKind::InlineMath => b.close(tok.span.end),
                FrameKind::DisplayMath => return Err(TreeError::UnmatchedMathDelim { offset: b.top().start }),
                _ => b.open(FrameKind::InlineMath, at),
            },
            TokenKind::EnvBegin(name) => b.open(FrameKind::Env(name.clone()), at),
            TokenKind::EnvEnd(name) => match b.top().kind.clone() {
                FrameKind::Env(open) if &open == name => b.close(tok.span.end),
                FrameKind::Env(open) => {
                    return Err(TreeError::EnvMismatch { offset: at, expected: open, found: name.clone() });
                }
                FrameKind::Group | FrameKind::OptArg => {
                    return Err(TreeError::UnbalancedBrace { offset: b.top().start });
                }
                FrameKind::InlineMath | FrameKind::DisplayMath => {
                    return Err(TreeError::UnmatchedMathDelim { offset: b.top().start });
                }
                FrameKind::Root => return Err(TreeError::UnopenedEnv { name: name.clone(), offset: at }),
            },
            TokenKind::Comment => {
                let top = b.top();
                top.flush();
                top.children.push(TexNode::leaf(NodeKind::Comment, tok.span.clone()));
            }
        }
    }

    let top = b.top();
    top.flush();
    match top.kind.clone() {
        FrameKind::Root => {}
        FrameKind::Group | FrameKind::OptArg => return Err(TreeError::UnbalancedBrace { offset: top.start }),
        FrameKind::InlineMath | FrameKind::DisplayMath => {
            return Err(TreeError::UnmatchedMathDelim { offset: top.start });
        }
        FrameKind::Env(name) => return Err(TreeError::UnclosedEnv { name, offset: top.start }),
    }
    let root_frame = b.stack.pop().expect("root frame");
    let root = TexNode { kind: NodeKind::Root, span: 0..source.len(), children: root_frame.children };
    Ok(DocumentTree { source, root })
}
