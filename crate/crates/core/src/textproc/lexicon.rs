use std::collections::HashMap;
use std::sync::OnceLock;

use super::Tag;

const CLOSED_CLASS: &str = include_str!("../../data/lexicon/closed_class.tsv");
const ADP_OR_ADV: &str = include_str!("../../data/lexicon/adp_or_adv.tsv");
const IRREGULAR_VERBS: &str = include_str!("../../data/lexicon/irregular_verbs.tsv");
const IRREGULAR_NOUNS: &str = include_str!("../../data/lexicon/irregular_nouns.tsv");
const PREPOSITION_GROUPS: &str = include_str!("../../data/lexicon/preposition_groups.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbForms {
    pub lemma: String,
    pub third: String,
    pub past: String,
    pub participle: String,
    pub gerund: String,
}

/// Which inflected slot a surface form occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerbSlot {
    Base,
    Third,
    Past,
    Participle,
    Gerund,
}

/// Built-in word lists, parsed once from the tab-separated data files.
#[derive(Debug)]
pub struct Lexicon {
    pub closed: HashMap<String, Tag>,
    pub adp_or_adv: Vec<String>,
    pub verbs: HashMap<String, VerbForms>,
    /// Any irregular verb surface -> (lemma, slot).
    pub verb_forms: HashMap<String, (String, VerbSlot)>,
    pub noun_plural: HashMap<String, String>,
    pub noun_singular: HashMap<String, String>,
    /// Preposition -> the other members of its confusion group.
    pub preposition_groups: HashMap<String, Vec<String>>,
}

fn rows(text: &str) -> impl Iterator<Item = Vec<&str>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split('\t').map(str::trim).collect())
}

impl Lexicon {
    pub fn builtin() -> &'static Lexicon {
        static LEXICON: OnceLock<Lexicon> = OnceLock::new();
        LEXICON.get_or_init(Lexicon::parse_builtin)
    }

    fn parse_builtin() -> Lexicon {
        let closed = rows(CLOSED_CLASS)
            .map(|r| {
                let tag = Tag::parse(r[1]).unwrap_or_else(|| panic!("bad tag in closed_class.tsv: {}", r[1]));
                (r[0].to_string(), tag)
            })
            .collect();
        let adp_or_adv = rows(ADP_OR_ADV).map(|r| r[0].to_string()).collect();

        let mut verbs = HashMap::new();
        let mut verb_forms = HashMap::new();
        for r in rows(IRREGULAR_VERBS) {
            assert_eq!(r.len(), 5, "irregular_verbs.tsv rows have five columns: {r:?}");
            let forms = VerbForms {
                lemma: r[0].into(),
                third: r[1].into(),
                past: r[2].into(),
                participle: r[3].into(),
                gerund: r[4].into(),
            };
            for (surface, slot) in [
                (&forms.gerund, VerbSlot::Gerund),
                (&forms.participle, VerbSlot::Participle),
                (&forms.past, VerbSlot::Past),
                (&forms.third, VerbSlot::Third),
                (&forms.lemma, VerbSlot::Base),
            ] {
                verb_forms.insert(surface.clone(), (forms.lemma.clone(), slot));
            }
            verbs.insert(forms.lemma.clone(), forms);
        }
        // "are"/"am"/"were" are irregular beyond the five-slot table.
        for (surface, slot) in [("are", VerbSlot::Base), ("am", VerbSlot::Base), ("were", VerbSlot::Past)] {
            verb_forms.insert(surface.to_string(), ("be".to_string(), slot));
        }

        let mut noun_plural = HashMap::new();
        let mut noun_singular = HashMap::new();
        for r in rows(IRREGULAR_NOUNS) {
            noun_plural.insert(r[0].to_string(), r[1].to_string());
            noun_singular.insert(r[1].to_string(), r[0].to_string());
        }

        let mut groups: HashMap<&str, Vec<String>> = HashMap::new();
        let mut order = Vec::new();
        for r in rows(PREPOSITION_GROUPS) {
            groups.entry(r[0]).or_default().push(r[1].to_string());
            order.push((r[0], r[1].to_string()));
        }
        let mut preposition_groups = HashMap::new();
        for (group, word) in order {
            let others: Vec<String> = groups[group].iter().filter(|w| **w != word).cloned().collect();
            preposition_groups.entry(word).or_insert_with(Vec::new).extend(others);
        }

        Lexicon {
            closed,
            adp_or_adv,
            verbs,
            verb_forms,
            noun_plural,
            noun_singular,
            preposition_groups,
        }
    }

    pub fn closed_tag(&self, lower: &str) -> Option<Tag> {
        self.closed.get(lower).copied()
    }

    pub fn is_adp_or_adv(&self, lower: &str) -> bool {
        self.adp_or_adv.iter().any(|w| w == lower)
    }

    /// Lemmas of auxiliary and modal verbs.
    pub fn is_auxiliary(&self, lemma: &str) -> bool {
        matches!(
            lemma,
            "be" | "have" | "do" | "can" | "could" | "will" | "would" | "may" | "might" | "should" | "must" | "shall"
        )
    }

    pub fn preposition_alternatives(&self, lower: &str) -> &[String] {
        self.preposition_groups.get(lower).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tables_parse() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.closed_tag("on"), Some(Tag::Adp));
        assert_eq!(lex.closed_tag("the"), Some(Tag::Det));
        assert_eq!(lex.noun_plural["child"], "children");
        assert_eq!(lex.verb_forms["ran"], ("run".to_string(), VerbSlot::Past));
        assert!(lex.verbs.len() >= 50);
        assert!(lex.noun_plural.len() >= 50);
        let alts = lex.preposition_alternatives("on");
        assert!(alts.iter().any(|w| w == "under"));
        assert!(!alts.iter().any(|w| w == "on"));
    }
}
