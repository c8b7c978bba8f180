use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::StoreModel;

const SECTOR: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Placement {
    pub offset: u64,
    pub len: usize,
    /// Index into [`StoreModel::freed_pages`] or into the planted list.
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnallocatedImage {
    pub bytes: Vec<u8>,
    pub placements: Vec<Placement>,
    pub seed: u64,
}

/// Lays the model's freed pages out in seeded random filler, each on a
/// 512-byte boundary with a random gap before it, mimicking unallocated
/// space exported from a volume.
pub fn export_unallocated(model: &StoreModel, seed: u64) -> UnallocatedImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = Vec::new();
    let mut placements = Vec::new();
    let filler = |rng: &mut ChaCha8Rng, bytes: &mut Vec<u8>| {
        let start = bytes.len();
        bytes.resize(start + rng.gen_range(1..=32) * SECTOR, 0);
        rng.fill_bytes(&mut bytes[start..]);
    };
    for (source, page) in model.freed_pages().iter().enumerate() {
        filler(&mut rng, &mut bytes);
        placements.push(Placement {
            offset: bytes.len() as u64,
            len: page.bytes.len(),
            source,
        });
        bytes.extend_from_slice(&page.bytes);
    }
    filler(&mut rng, &mut bytes);
    UnallocatedImage {
        bytes,
        placements,
        seed,
    }
}

/// Fills `len` bytes with seeded noise and drops each page at a random
/// `sector`-aligned offset inside its own stratum, so plants never overlap.
///
/// # Panics
///
/// If the pages do not fit one per stratum.
pub fn plant<P: AsRef<[u8]>>(len: usize, pages: &[P], sector: usize, seed: u64) -> UnallocatedImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = vec![0u8; len];
    rng.fill_bytes(&mut bytes);
    let mut placements = Vec::with_capacity(pages.len());
    if pages.is_empty() {
        return UnallocatedImage {
            bytes,
            placements,
            seed,
        };
    }
    let stratum = len / pages.len() / sector * sector;
    for (source, page) in pages.iter().enumerate() {
        let page = page.as_ref();
        assert!(page.len() <= stratum, "image too small for {} pages", pages.len());
        let slots = (stratum - page.len()) / sector;
        let offset = source * stratum + rng.gen_range(0..=slots) * sector;
        bytes[offset..offset + page.len()].copy_from_slice(page);
        placements.push(Placement {
            offset: offset as u64,
            len: page.len(),
            source,
        });
    }
    UnallocatedImage {
        bytes,
        placements,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{FileEvent, StoreSpec};

    #[test]
    fn nothing_freed_means_pure_filler() {
        let model = StoreModel::from_spec(&StoreSpec::empty(0)).unwrap();
        let image = export_unallocated(&model, 5);
        assert!(image.placements.is_empty());
        assert!(!image.bytes.is_empty());
        assert_eq!(image.bytes.len() % SECTOR, 0);
    }

    #[test]
    fn freed_pages_land_on_sector_boundaries() {
        let mut model = StoreModel::from_spec(&StoreSpec::empty(0)).unwrap();
        model.apply(FileEvent::create("x.txt")).unwrap();
        model.apply(FileEvent::IndexReset).unwrap();
        let image = export_unallocated(&model, 5);
        assert_eq!(image.placements.len(), model.freed_pages().len());
        for p in &image.placements {
            assert_eq!(p.offset % SECTOR as u64, 0);
            let at = p.offset as usize;
            assert_eq!(&image.bytes[at..at + p.len], &model.freed_pages()[p.source].bytes[..]);
        }
    }

    #[test]
    fn plants_do_not_overlap() {
        let pages = vec![vec![0xAAu8; 16384]; 8];
        let image = plant(1 << 20, &pages, 512, 1);
        let mut spans: Vec<_> = image.placements.iter().map(|p| (p.offset, p.offset + p.len as u64)).collect();
        spans.sort();
        for w in spans.windows(2) {
            assert!(w[0].1 <= w[1].0);
        }
    }
}
