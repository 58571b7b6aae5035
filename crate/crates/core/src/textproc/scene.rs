//! Rule-based scene graphs over tagged tokens.
//!
//! Entities are maximal `DET? NUM? ADJ* NOUN+` chunks (a lone pronoun also
//! counts); the last noun is the head and the adjectives are attributes.
//! Two neighbouring entities are linked left to right when the tokens between
//! them contain a verb or a preposition and no conjunction.

use serde::{Deserialize, Serialize};

use super::{Tag, Token};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub head: usize,
    pub attributes: Vec<usize>,
    /// Determiner opening the chunk, if any.
    pub determiner: Option<usize>,
    /// Token range `[start, end)` covered by the chunk.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub subject: usize,
    /// Verb and preposition tokens between subject and object.
    pub predicate: Vec<usize>,
    pub object: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    /// Neighbouring entities joined by a conjunction were left unlinked.
    pub unlinked_conjunction: bool,
}

fn is_head_tag(tag: Tag) -> bool {
    matches!(tag, Tag::Noun | Tag::Propn)
}

pub fn parse_scene_graph(tokens: &[Token]) -> SceneGraph {
    let mut entities = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].pos == Tag::Pron {
            entities.push(Entity {
                head: i,
                attributes: Vec::new(),
                determiner: None,
                start: i,
                end: i + 1,
            });
            i += 1;
            continue;
        }
        let start = i;
        let mut j = i;
        let determiner = (tokens[j].pos == Tag::Det).then_some(j);
        if determiner.is_some() {
            j += 1;
        }
        if j < tokens.len() && tokens[j].pos == Tag::Num {
            j += 1;
        }
        let mut attributes = Vec::new();
        while j < tokens.len() && tokens[j].pos == Tag::Adj {
            attributes.push(j);
            j += 1;
        }
        let nouns_start = j;
        while j < tokens.len() && is_head_tag(tokens[j].pos) {
            j += 1;
        }
        if j > nouns_start {
            entities.push(Entity {
                head: j - 1,
                attributes,
                determiner,
                start,
                end: j,
            });
            i = j;
        } else {
            i = start + 1;
        }
    }

    let mut relations = Vec::new();
    let mut unlinked_conjunction = false;
    for (a, pair) in entities.windows(2).enumerate() {
        let between = pair[0].end..pair[1].start;
        if tokens[between.clone()].iter().any(|t| t.pos == Tag::Conj) {
            unlinked_conjunction = true;
            continue;
        }
        let predicate: Vec<usize> = between
            .filter(|&k| matches!(tokens[k].pos, Tag::Verb | Tag::Adp))
            .collect();
        if !predicate.is_empty() {
            relations.push(Relation {
                subject: a,
                predicate,
                object: a + 1,
            });
        }
    }

    SceneGraph {
        entities,
        relations,
        unlinked_conjunction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::{tokenize, Features};

    /// Tags supplied by hand so the chunking rules are tested on their own.
    fn tagged(words: &[(&str, Tag)]) -> Vec<Token> {
        let caption = words.iter().map(|(w, _)| *w).collect::<Vec<_>>().join(" ");
        tokenize(&caption)
            .into_iter()
            .zip(words)
            .map(|(mut t, (_, tag))| {
                t.pos = *tag;
                t.lemma = t.lower();
                t.features = Features::default();
                t
            })
            .collect()
    }

    #[test]
    fn red_car_on_street() {
        use Tag::*;
        let tokens = tagged(&[("a", Det), ("red", Adj), ("car", Noun), ("on", Adp), ("a", Det), ("street", Noun)]);
        let g = parse_scene_graph(&tokens);
        assert_eq!(g.entities.len(), 2);
        assert_eq!(g.entities[0].head, 2);
        assert_eq!(g.entities[0].attributes, vec![1]);
        assert_eq!(g.entities[1].head, 5);
        assert_eq!(g.relations, vec![Relation { subject: 0, predicate: vec![3], object: 1 }]);
    }

    #[test]
    fn no_noun_no_graph() {
        use Tag::*;
        let g = parse_scene_graph(&tagged(&[("running", Verb), ("fast", Adv)]));
        assert!(g.entities.is_empty());
        assert!(g.relations.is_empty());
    }

    #[test]
    fn verb_plus_preposition_predicate() {
        use Tag::*;
        let tokens = tagged(&[("the", Det), ("woman", Noun), ("shouts", Verb), ("at", Adp), ("the", Det), ("man", Noun)]);
        let g = parse_scene_graph(&tokens);
        assert_eq!(g.relations.len(), 1);
        let r = &g.relations[0];
        let words: Vec<&str> = r.predicate.iter().map(|&k| tokens[k].surface.as_str()).collect();
        assert_eq!(words, ["shouts", "at"]);
        assert_eq!(tokens[g.entities[r.subject].head].surface, "woman");
        assert_eq!(tokens[g.entities[r.object].head].surface, "man");
    }

    #[test]
    fn conjunction_leaves_entities_unlinked() {
        use Tag::*;
        let tokens = tagged(&[("a", Det), ("cat", Noun), ("and", Conj), ("a", Det), ("dog", Noun)]);
        let g = parse_scene_graph(&tokens);
        assert_eq!(g.entities.len(), 2);
        assert!(g.relations.is_empty());
        assert!(g.unlinked_conjunction);
    }

    #[test]
    fn compound_nouns_share_one_head() {
        use Tag::*;
        let tokens = tagged(&[("a", Det), ("dog", Noun), ("park", Noun)]);
        let g = parse_scene_graph(&tokens);
        assert_eq!(g.entities.len(), 1);
        assert_eq!(g.entities[0].head, 2);
        assert_eq!(g.entities[0].determiner, Some(0));
    }
}
