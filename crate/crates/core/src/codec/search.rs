use memchr::memmem::Finder;
use serde::Serialize;

use super::RawRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hit {
    pub page_index: usize,
    pub slot_index: usize,
    pub keyword: String,
    /// Offset of the match within the record body.
    pub byte_offset: usize,
}

/// Finds every occurrence (overlapping ones included) of each keyword in the
/// record bodies. Hits come out ordered by page, slot, offset, then keyword
/// position in `keywords`.
pub fn search_records<K: AsRef<[u8]>>(records: &[RawRecord], keywords: &[K]) -> Vec<Hit> {
    let finders: Vec<Finder<'_>> = keywords
        .iter()
        .map(|k| Finder::new(k.as_ref()))
        .collect();
    let mut hits = Vec::new();
    for record in records {
        let mut found: Vec<(usize, usize)> = Vec::new();
        for (ki, finder) in finders.iter().enumerate() {
            if finder.needle().is_empty() {
                continue;
            }
            let mut from = 0;
            while let Some(pos) = finder.find(&record.body[from..]) {
                found.push((from + pos, ki));
                from += pos + 1;
            }
        }
        found.sort_unstable();
        hits.extend(found.into_iter().map(|(byte_offset, ki)| Hit {
            page_index: record.page_index,
            slot_index: record.slot_index,
            keyword: String::from_utf8_lossy(keywords[ki].as_ref()).into_owned(),
            byte_offset,
        }));
    }
    hits.sort_by(|a, b| {
        (a.page_index, a.slot_index)
            .cmp(&(b.page_index, b.slot_index))
    });
    hits
}
