//! Bin-packing of tokenized documents into constant-length training
//! sequences. Documents are chunked to fit, every chunk is terminated by
//! one EOS token, chunks never span bins, and each bin is padded to exactly
//! the target length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PackError {
    #[error("sequence length must be at least 2, got {0}")]
    LengthTooSmall(usize),
    #[error("eos and pad tokens collide (both {0})")]
    EosPadCollision(u32),
}

/// A tokenized document awaiting packing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDocument {
    pub id: String,
    pub tokens: Vec<u32>,
}

/// Span of one document chunk inside a packed sequence. The token at
/// `end` is the EOS terminating the chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_id: String,
    pub chunk_index: usize,
    pub start: usize,
    pub end: usize,
}

/// A fixed-length training sequence: EOS-separated document chunks followed
/// by a contiguous padded tail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedSequence {
    pub tokens: Vec<u32>,
    pub segments: Vec<Segment>,
    pub pad_count: usize,
}

struct Item<'d> {
    doc_id: &'d str,
    chunk_index: usize,
    tokens: &'d [u32],
}

impl Item<'_> {
    fn size(&self) -> usize {
        self.tokens.len() + 1 // chunk plus its EOS
    }
}

/// Packs documents into bins of exactly `len` tokens by first-fit
/// decreasing.
///
/// Documents longer than `len - 1` are split into chunks of at most
/// `len - 1` tokens so every chunk still fits with its EOS. Ties in the
/// decreasing order are broken by original document (then chunk) order,
/// and bins are created only to hold at least one item. Empty documents
/// are skipped with a warning.
pub fn pack(
    docs: &[TokenDocument],
    len: usize,
    eos_id: u32,
    pad_id: u32,
) -> Result<Vec<PackedSequence>, PackError> {
    let items = chunk_documents(docs, len, eos_id, pad_id)?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(items[i].size()));
    Ok(place_items(&items, &order, len, eos_id, pad_id))
}

/// Reference packing that considers only the most recent bin, in original
/// item order. Exists as a baseline for the first-fit-decreasing bound.
pub fn pack_sequential(
    docs: &[TokenDocument],
    len: usize,
    eos_id: u32,
    pad_id: u32,
) -> Result<Vec<PackedSequence>, PackError> {
    let items = chunk_documents(docs, len, eos_id, pad_id)?;
    let mut bins: Vec<(Vec<u32>, Vec<Segment>)> = Vec::new();
    for item in &items {
        let fits = bins
            .last()
            .map(|(tokens, _)| tokens.len() + item.size() <= len)
            .unwrap_or(false);
        if !fits {
            bins.push((Vec::with_capacity(len), Vec::new()));
        }
        push_item(bins.last_mut().unwrap(), item, eos_id);
    }
    Ok(finalize_bins(bins, len, pad_id))
}

fn chunk_documents<'d>(
    docs: &'d [TokenDocument],
    len: usize,
    eos_id: u32,
    pad_id: u32,
) -> Result<Vec<Item<'d>>, PackError> {
    if len < 2 {
        return Err(PackError::LengthTooSmall(len));
    }
    if eos_id == pad_id {
        return Err(PackError::EosPadCollision(eos_id));
    }
    let mut items = Vec::new();
    for doc in docs {
        if doc.tokens.is_empty() {
            log::warn!("document {:?} is empty; skipped", doc.id);
            continue;
        }
        for (chunk_index, tokens) in doc.tokens.chunks(len - 1).enumerate() {
            items.push(Item {
                doc_id: &doc.id,
                chunk_index,
                tokens,
            });
        }
    }
    Ok(items)
}

fn place_items(
    items: &[Item<'_>],
    order: &[usize],
    len: usize,
    eos_id: u32,
    pad_id: u32,
) -> Vec<PackedSequence> {
    let mut bins: Vec<(Vec<u32>, Vec<Segment>)> = Vec::new();
    for &idx in order {
        let item = &items[idx];
        let slot = bins
            .iter_mut()
            .find(|(tokens, _)| tokens.len() + item.size() <= len);
        match slot {
            Some(bin) => push_item(bin, item, eos_id),
            None => {
                bins.push((Vec::with_capacity(len), Vec::new()));
                push_item(bins.last_mut().unwrap(), item, eos_id);
            }
        }
    }
    finalize_bins(bins, len, pad_id)
}

fn push_item(bin: &mut (Vec<u32>, Vec<Segment>), item: &Item<'_>, eos_id: u32) {
    let start = bin.0.len();
    bin.0.extend_from_slice(item.tokens);
    bin.1.push(Segment {
        doc_id: item.doc_id.to_string(),
        chunk_index: item.chunk_index,
        start,
        end: bin.0.len(),
    });
    bin.0.push(eos_id);
}

fn finalize_bins(
    bins: Vec<(Vec<u32>, Vec<Segment>)>,
    len: usize,
    pad_id: u32,
) -> Vec<PackedSequence> {
    bins.into_iter()
        .map(|(mut tokens, segments)| {
            let pad_count = len - tokens.len();
            tokens.resize(len, pad_id);
            PackedSequence {
                tokens,
                segments,
                pad_count,
            }
        })
        .collect()
}

/// Fraction of non-padding tokens across all bins; 1.0 for no bins.
pub fn packing_efficiency(bins: &[PackedSequence]) -> f64 {
    if bins.is_empty() {
        return 1.0;
    }
    let len = bins[0].tokens.len();
    let total = (bins.len() * len) as f64;
    let padding: usize = bins.iter().map(|b| b.pad_count).sum();
    (total - padding as f64) / total
}
