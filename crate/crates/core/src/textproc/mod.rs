//! Linguistic substrate for the negative generators: tokenization, tagging,
//! lemmatization, inflection, casing transfer and scene-graph extraction.

mod lexicon;
mod morph;
mod scene;
mod tagger;
mod token;

pub use lexicon::{Lexicon, VerbForms, VerbSlot};
pub use morph::{base_form, infer_features, inflect, lemmatize, transfer_casing, wordnet_pos};
pub use scene::{parse_scene_graph, Entity, Relation, SceneGraph};
pub use tagger::Tagger;
pub use token::{tokenize, Features, Number, Person, Span, Tag, Tense, Token};

use crate::wordnet::WordNetDB;

/// A caption with its tagged tokens and scene graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCaption {
    pub text: String,
    pub tokens: Vec<Token>,
    pub graph: SceneGraph,
}

impl ParsedCaption {
    pub fn parse(text: &str, db: &WordNetDB) -> Self {
        let tokens = Tagger::new(db).tag(&tokenize(text));
        let graph = parse_scene_graph(&tokens);
        ParsedCaption {
            text: text.to_string(),
            tokens,
            graph,
        }
    }
}
