use rayon::prelude::*;

use super::{CaptionRecord, Negative};
use crate::negatives::{generate, record_seed, FrequencyTable, GenerateConfig};
use crate::wordnet::WordNetDB;

/// Everything needed to generate negatives for a record.
#[derive(Debug, Clone)]
pub struct NegativeAttacher<'a> {
    pub db: &'a WordNetDB,
    pub freq: &'a FrequencyTable,
    pub config: GenerateConfig,
    /// Run seed; each record's seed is derived from it and the record id.
    pub seed: u64,
    /// Fan chunks out to the rayon pool. Output order is unaffected.
    pub parallel: bool,
}

impl NegativeAttacher<'_> {
    /// Appends generated negatives. A record with none applicable keeps an
    /// empty list.
    pub fn attach(&self, mut record: CaptionRecord) -> CaptionRecord {
        let seed = record_seed(&record.id, self.seed);
        let generated = generate(&record.caption, &self.config, seed, self.db, self.freq);
        record
            .negatives
            .get_or_insert_with(Vec::new)
            .extend(generated.into_iter().map(Negative::Generated));
        record
    }
}

/// Attaches negatives to a batch, in input order.
pub fn attach_negatives_batch(records: Vec<CaptionRecord>, attacher: &NegativeAttacher<'_>) -> Vec<CaptionRecord> {
    if attacher.parallel {
        records.into_par_iter().map(|r| attacher.attach(r)).collect()
    } else {
        records.into_iter().map(|r| attacher.attach(r)).collect()
    }
}

const CHUNK: usize = 64;

/// Streaming form of [`attach_negatives_batch`]: pulls up to 64 records at a
/// time from `stream` and yields them in order. Errors pass through.
pub fn attach_negatives<'a, I, E>(stream: I, attacher: &'a NegativeAttacher<'a>) -> impl Iterator<Item = Result<CaptionRecord, E>> + 'a
where
    I: Iterator<Item = Result<CaptionRecord, E>> + 'a,
    E: 'a,
{
    let mut stream = stream.peekable();
    std::iter::from_fn(move || {
        let mut chunk = Vec::with_capacity(CHUNK);
        let mut error = None;
        while chunk.len() < CHUNK {
            match stream.next() {
                Some(Ok(r)) => chunk.push(r),
                Some(Err(e)) => {
                    error = Some(e);
                    break;
                }
                None => break,
            }
        }
        if chunk.is_empty() && error.is_none() {
            return None;
        }
        let mut out: Vec<Result<CaptionRecord, E>> =
            attach_negatives_batch(chunk, attacher).into_iter().map(Ok).collect();
        out.extend(error.map(Err));
        Some(out)
    })
    .flatten()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::negatives::Strategy;
    use crate::wordnet::bundled;

    fn attacher<'a>(freq: &'a FrequencyTable, parallel: bool) -> NegativeAttacher<'a> {
        NegativeAttacher {
            db: bundled(),
            freq,
            config: GenerateConfig::uniform(&[Strategy::Replace]),
            seed: 5,
            parallel,
        }
    }

    #[test]
    fn replaceable_and_unparseable() {
        let freq = FrequencyTable::default();
        let a = attacher(&freq, false);
        let r = a.attach(CaptionRecord::new("1", "a dog chases a cat"));
        assert_eq!(r.negatives.as_ref().unwrap().len(), 1);
        let r = a.attach(CaptionRecord::new("2", "!!! ???"));
        assert_eq!(r.negatives, Some(vec![]));
        assert_eq!(r.caption, "!!! ???");
    }

    #[test]
    fn order_and_seeds_independent_of_parallelism() {
        let freq = FrequencyTable::default();
        let records: Vec<CaptionRecord> = (0..150)
            .map(|i| CaptionRecord::new(format!("r{i}"), if i % 2 == 0 { "a dog chases a cat" } else { "a red car on the street" }))
            .collect();
        let serial = attach_negatives_batch(records.clone(), &attacher(&freq, false));
        let par_attacher = attacher(&freq, true);
        let streamed: Vec<CaptionRecord> =
            attach_negatives(records.into_iter().map(Ok::<_, ()>), &par_attacher).map(Result::unwrap).collect();
        assert_eq!(serial, streamed);
    }
}
