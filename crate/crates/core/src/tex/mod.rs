//! TeX source segmentation: tokens, document tree, plain-text extraction.

mod segment;
mod token;
mod tree;

pub use segment::{
    extract_plain_segments, is_citation_command, is_reference_command, PlainSegment, SegmentItem, SpecialKind,
    SpecialTag, EXCLUDED_ENVS,
};
pub use token::{decode_source, tokenize, TexToken, TokenKind};
pub use tree::{build_tree, parse, DocumentTree, NodeKind, TexNode, TreeError};
