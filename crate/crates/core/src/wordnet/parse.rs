use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{normalize_lemma, AntonymPair, PartOfSpeech, Synset, SynsetId, WordNetDB, WordNetError};

/// Loads the eight `data.*` / `index.*` files from `dir`.
pub fn load_wordnet(dir: impl AsRef<Path>) -> Result<WordNetDB, WordNetError> {
    let dir = dir.as_ref();
    let mut files = Vec::with_capacity(8);
    for pos in PartOfSpeech::ALL {
        for kind in ["data", "index"] {
            let path = dir.join(format!("{kind}.{}", pos.file_suffix()));
            if !path.is_file() {
                return Err(WordNetError::MissingFile(path));
            }
            files.push(path);
        }
    }
    let mut texts = Vec::with_capacity(8);
    for path in &files {
        texts.push(fs::read_to_string(path)?);
    }
    let sources: Vec<(PartOfSpeech, &str, &str)> = PartOfSpeech::ALL
        .iter()
        .enumerate()
        .map(|(i, pos)| (*pos, texts[2 * i].as_str(), texts[2 * i + 1].as_str()))
        .collect();
    parse_wordnet(&sources)
}

/// Parses in-memory file contents given as `(pos, data text, index text)`.
pub fn parse_wordnet(sources: &[(PartOfSpeech, &str, &str)]) -> Result<WordNetDB, WordNetError> {
    let mut raw: HashMap<SynsetId, RawSynset> = HashMap::new();
    for (pos, data, _) in sources {
        let file = format!("data.{}", pos.file_suffix());
        for (lineno, line) in content_lines(data) {
            let parsed = parse_data_line(line, *pos).map_err(|msg| WordNetError::Parse {
                file: file.clone(),
                line: lineno,
                msg,
            })?;
            if raw.insert(parsed.synset.id, parsed).is_some() {
                return Err(WordNetError::Parse {
                    file: file.clone(),
                    line: lineno,
                    msg: "duplicate synset offset".into(),
                });
            }
        }
    }

    let mut synsets: HashMap<SynsetId, Synset> = HashMap::with_capacity(raw.len());
    let lemmas_of: HashMap<SynsetId, Vec<String>> = raw
        .iter()
        .map(|(id, r)| (*id, r.synset.lemmas.clone()))
        .collect();
    for (id, r) in raw {
        let mut synset = r.synset;
        for (source, target, src_word, tgt_word) in r.antonyms {
            let Some(target_lemmas) = lemmas_of.get(&target) else {
                return Err(WordNetError::Inconsistent(format!(
                    "antonym pointer from {id} to missing synset {target}"
                )));
            };
            let members: Vec<&String> = match src_word {
                0 => synset.lemmas.iter().collect(),
                n => synset.lemmas.get(n - 1).into_iter().collect(),
            };
            let targets: Vec<&String> = match tgt_word {
                0 => target_lemmas.iter().collect(),
                n => target_lemmas.get(n - 1).into_iter().collect(),
            };
            if members.is_empty() || targets.is_empty() {
                return Err(WordNetError::Inconsistent(format!(
                    "antonym pointer {source}: word number out of range"
                )));
            }
            for m in &members {
                for t in &targets {
                    synset.antonym_pairs.push(AntonymPair {
                        member: (*m).clone(),
                        target,
                        target_lemma: (*t).clone(),
                    });
                }
            }
        }
        synsets.insert(id, synset);
    }

    let mut lemma_index = HashMap::new();
    for (pos, _, index) in sources {
        let file = format!("index.{}", pos.file_suffix());
        for (lineno, line) in content_lines(index) {
            let (lemma, ids) = parse_index_line(line, *pos).map_err(|msg| WordNetError::Parse {
                file: file.clone(),
                line: lineno,
                msg,
            })?;
            lemma_index.insert((lemma, *pos), ids);
        }
    }

    WordNetDB::from_parts(synsets, lemma_index)
}

/// Non-header lines with 1-based line numbers. License header lines start
/// with two spaces.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with("  ") && !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
}

struct RawSynset {
    synset: Synset,
    /// (source/target field, target, source word no., target word no.)
    antonyms: Vec<(String, SynsetId, usize, usize)>,
}

struct Fields<'a> {
    inner: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, String> {
        self.inner.next().ok_or_else(|| format!("missing field: {what}"))
    }
}

fn parse_offset(s: &str) -> Result<u32, String> {
    if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("malformed synset offset {s:?}"));
    }
    s.parse().map_err(|_| format!("malformed synset offset {s:?}"))
}

fn parse_pos(s: &str) -> Result<PartOfSpeech, String> {
    PartOfSpeech::from_code(s).ok_or_else(|| format!("unknown part of speech {s:?}"))
}

fn strip_adjective_marker(word: &str) -> &str {
    for marker in ["(a)", "(p)", "(ip)"] {
        if let Some(stripped) = word.strip_suffix(marker) {
            return stripped;
        }
    }
    word
}

fn parse_data_line(line: &str, file_pos: PartOfSpeech) -> Result<RawSynset, String> {
    let head = match line.find('|') {
        Some(bar) => &line[..bar],
        None => line,
    };
    let mut f = Fields {
        inner: head.split_whitespace(),
    };
    let offset = parse_offset(f.next("synset_offset")?)?;
    let lex_file: u8 = f
        .next("lex_filenum")?
        .parse()
        .map_err(|_| "malformed lex_filenum".to_string())?;
    let ss_type = f.next("ss_type")?;
    let pos = parse_pos(ss_type)?;
    if pos != file_pos {
        return Err(format!("ss_type {ss_type} does not belong in this file"));
    }
    let w_cnt = usize::from_str_radix(f.next("w_cnt")?, 16).map_err(|_| "malformed hex w_cnt".to_string())?;
    if w_cnt == 0 {
        return Err("synset without words".into());
    }
    let mut lemmas = Vec::with_capacity(w_cnt);
    for _ in 0..w_cnt {
        let word = f.next("word")?;
        let lex_id = f.next("lex_id")?;
        u8::from_str_radix(lex_id, 16).map_err(|_| format!("malformed lex_id {lex_id:?}"))?;
        lemmas.push(strip_adjective_marker(word).to_string());
    }
    let p_cnt: usize = f
        .next("p_cnt")?
        .parse()
        .map_err(|_| "malformed p_cnt".to_string())?;

    let id = SynsetId::new(offset, pos);
    let mut hypernyms = Vec::new();
    let mut antonyms = Vec::new();
    for _ in 0..p_cnt {
        let symbol = f.next("pointer_symbol")?;
        let target_offset = parse_offset(f.next("pointer offset")?)?;
        let target_pos = parse_pos(f.next("pointer pos")?)?;
        let source_target = f.next("source/target")?;
        if source_target.len() != 4 || u16::from_str_radix(source_target, 16).is_err() {
            return Err(format!("malformed source/target {source_target:?}"));
        }
        let target = SynsetId::new(target_offset, target_pos);
        match symbol {
            "@" | "@i" => hypernyms.push(target),
            "!" => {
                let src = usize::from_str_radix(&source_target[..2], 16).unwrap_or(0);
                let tgt = usize::from_str_radix(&source_target[2..], 16).unwrap_or(0);
                antonyms.push((source_target.to_string(), target, src, tgt));
            }
            _ => {}
        }
    }
    if pos == PartOfSpeech::Verb {
        if let Some(f_cnt) = f.inner.next() {
            let f_cnt: usize = f_cnt.parse().map_err(|_| "malformed f_cnt".to_string())?;
            for _ in 0..f_cnt {
                let plus = f.next("frame marker")?;
                if plus != "+" {
                    return Err(format!("expected '+' in verb frame, got {plus:?}"));
                }
                f.next("f_num")?;
                f.next("w_num")?;
            }
        }
    }
    if let Some(extra) = f.inner.next() {
        return Err(format!("unexpected trailing field {extra:?}"));
    }

    Ok(RawSynset {
        synset: Synset {
            id,
            pos,
            lemmas,
            hypernyms,
            antonym_pairs: Vec::new(),
            satellite: ss_type == "s",
            lex_file,
        },
        antonyms,
    })
}

fn parse_index_line(line: &str, file_pos: PartOfSpeech) -> Result<(String, Vec<SynsetId>), String> {
    let mut f = Fields {
        inner: line.split_whitespace(),
    };
    let lemma = normalize_lemma(f.next("lemma")?);
    let pos = parse_pos(f.next("pos")?)?;
    if pos != file_pos {
        return Err("pos does not match file".into());
    }
    let synset_cnt: usize = f
        .next("synset_cnt")?
        .parse()
        .map_err(|_| "malformed synset_cnt".to_string())?;
    let p_cnt: usize = f
        .next("p_cnt")?
        .parse()
        .map_err(|_| "malformed p_cnt".to_string())?;
    for _ in 0..p_cnt {
        f.next("ptr_symbol")?;
    }
    let sense_cnt: usize = f
        .next("sense_cnt")?
        .parse()
        .map_err(|_| "malformed sense_cnt".to_string())?;
    if sense_cnt != synset_cnt {
        return Err(format!("sense_cnt {sense_cnt} != synset_cnt {synset_cnt}"));
    }
    f.next("tagsense_cnt")?
        .parse::<usize>()
        .map_err(|_| "malformed tagsense_cnt".to_string())?;
    let mut ids = Vec::with_capacity(synset_cnt);
    for _ in 0..synset_cnt {
        ids.push(SynsetId::new(parse_offset(f.next("synset_offset")?)?, pos));
    }
    if let Some(extra) = f.inner.next() {
        return Err(format!("unexpected trailing field {extra:?}"));
    }
    if ids.is_empty() {
        return Err("index entry without synsets".into());
    }
    Ok((lemma, ids))
}
