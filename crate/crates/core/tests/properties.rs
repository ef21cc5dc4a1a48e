//! Cross-operation invariants, mostly property-based.

use dapt_core::archive::{
    checkpoint_from_bytes, checkpoint_to_bytes, decode_half, encode_half, encode_half_saturating,
    Dtype, HalfFormat, TensorCheckpoint, TensorRecord, WriteOptions,
};
use dapt_core::filter::{
    apply_threshold, confusion_at, corpus_stats, precision_recall_f, split_dataset,
    ConfusionCounts, Label, ScoredDocument,
};
use dapt_core::gateway::FailureModeRecord;
use dapt_core::merge::{schedule_value, slerp, DEFAULT_DOT_THRESHOLD};
use dapt_core::metrics::{
    accuracy_se, aggregate_benchmarks, failure_counts, randolph_kappa, win_rate_matrix,
    BenchmarkResult, PairOutcome, PairVerdict, RatingTable,
};
use dapt_core::pack::{pack, pack_sequential, packing_efficiency, TokenDocument};
use proptest::prelude::*;

fn finite_f32() -> impl Strategy<Value = f32> {
    (-1.0e4f32..1.0e4).prop_map(|x| x)
}

fn tensor_record() -> impl Strategy<Value = TensorRecord> {
    (
        prop_oneof![Just(Dtype::F32), Just(Dtype::F16), Just(Dtype::BF16)],
        proptest::collection::vec(0usize..4, 0..3),
    )
        .prop_flat_map(|(dtype, shape)| {
            let count: usize = shape.iter().product();
            proptest::collection::vec(finite_f32(), count..=count)
                .prop_map(move |values| TensorRecord::new(dtype, shape.clone(), values).unwrap())
        })
}

fn checkpoint() -> impl Strategy<Value = TensorCheckpoint> {
    proptest::collection::btree_map("[a-z]{1,8}(\\.[a-z]{1,8}){0,2}", tensor_record(), 0..5)
        .prop_map(|tensors| TensorCheckpoint {
            tensors,
            metadata: None,
        })
}

proptest! {
    #[test]
    fn archive_roundtrip_up_to_dtype_conversion(ckpt in checkpoint()) {
        let bytes = checkpoint_to_bytes(&ckpt, &WriteOptions::default()).unwrap();
        let reread = checkpoint_from_bytes(&bytes).unwrap();
        prop_assert_eq!(reread.tensors.len(), ckpt.tensors.len());
        for (name, rec) in &ckpt.tensors {
            let back = &reread.tensors[name];
            prop_assert_eq!(back.dtype, rec.dtype);
            prop_assert_eq!(&back.shape, &rec.shape);
            for (&got, &orig) in back.values.iter().zip(&rec.values) {
                let want = match rec.dtype {
                    Dtype::F32 => orig,
                    Dtype::F16 => decode_half(encode_half_saturating(orig, HalfFormat::F16), HalfFormat::F16),
                    Dtype::BF16 => decode_half(encode_half_saturating(orig, HalfFormat::Bf16), HalfFormat::Bf16),
                };
                prop_assert_eq!(got.to_bits(), want.to_bits());
            }
        }
        // canonical write: a second encoding of the reread image is identical
        let bytes2 = checkpoint_to_bytes(&reread, &WriteOptions::default()).unwrap();
        prop_assert_eq!(&bytes, &bytes2);
    }

    #[test]
    fn archive_width_accounting(ckpt in checkpoint()) {
        let bytes = checkpoint_to_bytes(&ckpt, &WriteOptions::default()).unwrap();
        let header_len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let payload: usize = ckpt
            .tensors
            .values()
            .map(|r| r.element_count() * r.dtype.width())
            .sum();
        prop_assert_eq!(bytes.len(), 8 + header_len + payload);
    }

    #[test]
    fn half_encode_is_idempotent(x in any::<f32>()) {
        for format in [HalfFormat::F16, HalfFormat::Bf16] {
            let once = encode_half(x, format);
            let again = encode_half(decode_half(once, format), format);
            prop_assert_eq!(once, again);
        }
    }

    #[test]
    fn slerp_endpoints_and_symmetry(
        a in proptest::collection::vec(-2.0f32..2.0, 1..6),
        b_seed in proptest::collection::vec(-2.0f32..2.0, 1..6),
        t in 0.0f64..1.0,
    ) {
        let b: Vec<f32> = b_seed.iter().take(a.len()).cloned()
            .chain(std::iter::repeat(0.5).take(a.len().saturating_sub(b_seed.len())))
            .collect();
        let fwd = slerp(t, &a, &b, DEFAULT_DOT_THRESHOLD).unwrap();
        let rev = slerp(1.0 - t, &b, &a, DEFAULT_DOT_THRESHOLD).unwrap();
        for (x, y) in fwd.values.iter().zip(&rev.values) {
            let scale = x.abs().max(1.0) as f64;
            prop_assert!(((x - y) as f64).abs() <= 1e-6 * scale);
        }
        let at_zero = slerp(0.0, &a, &b, DEFAULT_DOT_THRESHOLD).unwrap();
        for (x, y) in at_zero.values.iter().zip(&a) {
            let scale = y.abs().max(1.0) as f64;
            prop_assert!(((x - y) as f64).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn schedule_stays_within_anchor_hull(
        anchors in proptest::collection::vec(0.0f64..=1.0, 1..6),
        layer in 0usize..64,
        num_layers in 1usize..64,
    ) {
        prop_assume!(layer < num_layers);
        let t = schedule_value(&anchors, layer, num_layers).unwrap();
        let lo = anchors.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = anchors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(t >= lo - 1e-12 && t <= hi + 1e-12);
    }

    #[test]
    fn threshold_chain_is_monotone(
        scored in proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 0..40),
        tau_lo in 0.0f64..=1.0,
        tau_hi in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if tau_lo <= tau_hi { (tau_lo, tau_hi) } else { (tau_hi, tau_lo) };
        let docs: Vec<ScoredDocument> = scored
            .iter()
            .enumerate()
            .map(|(i, &(score, medical))| ScoredDocument {
                id: i.to_string(),
                text: String::new(),
                score,
                gold_label: Some(if medical { Label::Medical } else { Label::Other }),
            })
            .collect();

        let kept_lo: Vec<&str> = apply_threshold(&docs, lo).unwrap().iter().map(|d| d.id.as_str()).collect();
        let kept_hi: Vec<&str> = apply_threshold(&docs, hi).unwrap().iter().map(|d| d.id.as_str()).collect();
        prop_assert!(kept_hi.iter().all(|id| kept_lo.contains(id)));

        let c_lo = confusion_at(&docs, lo).unwrap();
        let c_hi = confusion_at(&docs, hi).unwrap();
        prop_assert!(c_hi.false_positives <= c_lo.false_positives);
        let m_lo = precision_recall_f(&c_lo, 0.7);
        let m_hi = precision_recall_f(&c_hi, 0.7);
        prop_assert!(m_hi.recall <= m_lo.recall + 1e-12);
    }

    #[test]
    fn f_beta_is_bounded(
        tp in 0u64..200, fp in 0u64..200, fn_ in 0u64..200, tn in 0u64..200,
        beta in 0.1f64..4.0,
    ) {
        let counts = ConfusionCounts {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
        };
        let m = precision_recall_f(&counts, beta);
        prop_assert!((0.0..=1.0).contains(&m.f_beta));
        if tp + fp > 0 && tp + fn_ > 0 {
            let lo = m.precision.min(m.recall);
            let hi = m.precision.max(m.recall);
            prop_assert!(m.f_beta >= lo - 1e-12 && m.f_beta <= hi + 1e-12);
        }
    }

    #[test]
    fn stats_are_additive(
        texts_a in proptest::collection::vec("[a-z ]{0,30}", 0..10),
        texts_b in proptest::collection::vec("[a-z ]{0,30}", 0..10),
    ) {
        let mk = |texts: &[String], offset: usize| -> Vec<ScoredDocument> {
            texts.iter().enumerate().map(|(i, t)| ScoredDocument {
                id: (offset + i).to_string(),
                text: t.clone(),
                score: 0.5,
                gold_label: None,
            }).collect()
        };
        let a = mk(&texts_a, 0);
        let b = mk(&texts_b, texts_a.len());
        let combined: Vec<ScoredDocument> = a.iter().chain(&b).cloned().collect();
        let sa = corpus_stats(&a, None).unwrap();
        let sb = corpus_stats(&b, None).unwrap();
        let sc = corpus_stats(&combined, None).unwrap();
        prop_assert_eq!(sc.num_documents, sa.num_documents + sb.num_documents);
        prop_assert_eq!(sc.num_words, sa.num_words + sb.num_words);
    }

    #[test]
    fn se_is_symmetric_and_peaks_at_half(c in 0u64..=60, n in 2u64..=60) {
        prop_assume!(c <= n);
        let (_, se) = accuracy_se(c, n).unwrap();
        let (_, mirrored) = accuracy_se(n - c, n).unwrap();
        prop_assert_eq!(se.to_bits(), mirrored.to_bits());
        let (_, peak) = accuracy_se(n / 2, n).unwrap();
        prop_assert!(se <= peak + 1e-15);
    }

    #[test]
    fn aggregation_scales_like_independent_means(k in 1usize..8, correct in 0u64..100) {
        let result = BenchmarkResult::from_counts("b", correct, 100).unwrap();
        let copies: Vec<BenchmarkResult> = (0..k).map(|_| result.clone()).collect();
        let (avg, se) = aggregate_benchmarks(&copies).unwrap();
        prop_assert!((avg - result.accuracy).abs() < 1e-15);
        prop_assert!((se - result.se / (k as f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kappa_is_bounded_and_permutation_invariant(
        rows in proptest::collection::vec(proptest::collection::vec(0u32..3, 4), 1..12),
        swap in proptest::collection::vec(any::<prop::sample::Index>(), 0..6),
    ) {
        let k = 3usize;
        let table = RatingTable::new(rows.clone(), k).unwrap();
        let kappa = randolph_kappa(&table).unwrap();
        prop_assert!(kappa >= -1.0 / (k as f64 - 1.0) - 1e-12);
        prop_assert!(kappa <= 1.0 + 1e-12);

        let mut permuted = rows;
        for idx in swap {
            let i = idx.index(permuted.len());
            permuted.swap(0, i);
        }
        let kappa2 = randolph_kappa(&RatingTable::new(permuted, k).unwrap()).unwrap();
        prop_assert!((kappa - kappa2).abs() < 1e-12);
    }

    #[test]
    fn failure_counts_add_over_concatenation(
        flags_a in proptest::collection::vec(any::<[bool; 14]>(), 0..10),
        flags_b in proptest::collection::vec(any::<[bool; 14]>(), 0..10),
    ) {
        let mk = |flags: &[[bool; 14]]| -> Vec<(String, FailureModeRecord)> {
            flags.iter().map(|f| ("m".to_string(), FailureModeRecord::new(*f))).collect()
        };
        let a = mk(&flags_a);
        let b = mk(&flags_b);
        let mut combined = a.clone();
        combined.extend(b.clone());

        let ca = failure_counts(&a);
        let cb = failure_counts(&b);
        let cc = failure_counts(&combined);
        if !combined.is_empty() {
            let total_a = ca.get("m").map(|c| c.total).unwrap_or(0);
            let total_b = cb.get("m").map(|c| c.total).unwrap_or(0);
            prop_assert_eq!(cc["m"].total, total_a + total_b);
            for (mode, count) in &cc["m"].counts {
                let in_a = ca.get("m").map(|c| c.counts[mode]).unwrap_or(0);
                let in_b = cb.get("m").map(|c| c.counts[mode]).unwrap_or(0);
                prop_assert_eq!(*count, in_a + in_b);
            }
        }
    }

    #[test]
    fn packing_invariants_hold(
        docs in proptest::collection::vec(proptest::collection::vec(0u32..50, 1..96), 0..12),
        len in 4usize..32,
    ) {
        let eos = 1000;
        let pad = 1001;
        let token_docs: Vec<TokenDocument> = docs
            .iter()
            .enumerate()
            .map(|(i, tokens)| TokenDocument { id: format!("d{i}"), tokens: tokens.clone() })
            .collect();
        let bins = pack(&token_docs, len, eos, pad).unwrap();

        for bin in &bins {
            prop_assert_eq!(bin.tokens.len(), len);
            prop_assert!(!bin.segments.is_empty());
            let content_end = len - bin.pad_count;
            prop_assert!(bin.tokens[content_end..].iter().all(|&t| t == pad));
            for seg in &bin.segments {
                prop_assert!(seg.end - seg.start <= len - 1, "chunk cap");
                prop_assert_eq!(bin.tokens[seg.end], eos);
            }
        }

        // content conservation
        let mut rebuilt: std::collections::BTreeMap<String, Vec<(usize, Vec<u32>)>> = Default::default();
        for bin in &bins {
            for seg in &bin.segments {
                rebuilt.entry(seg.doc_id.clone()).or_default()
                    .push((seg.chunk_index, bin.tokens[seg.start..seg.end].to_vec()));
            }
        }
        prop_assert_eq!(rebuilt.len(), token_docs.len());
        for doc in &token_docs {
            let mut parts = rebuilt[&doc.id].clone();
            parts.sort_by_key(|(i, _)| *i);
            let stream: Vec<u32> = parts.into_iter().flat_map(|(_, t)| t).collect();
            prop_assert_eq!(&stream, &doc.tokens);
        }

        // first-fit-decreasing never loses to the sequential baseline here
        let sequential = pack_sequential(&token_docs, len, eos, pad).unwrap();
        prop_assert!(bins.len() <= sequential.len());
        let eff = packing_efficiency(&bins);
        prop_assert!((0.0..=1.0).contains(&eff));
    }

    #[test]
    fn win_rate_conservation(
        outcomes in proptest::collection::vec((0usize..4, 0usize..4, 0u8..3), 1..60),
    ) {
        let names = ["alpha", "beta", "gamma", "delta"];
        let verdicts: Vec<PairVerdict> = outcomes
            .iter()
            .filter(|(i, j, _)| i != j)
            .map(|&(i, j, o)| PairVerdict {
                first: names[i].to_string(),
                second: names[j].to_string(),
                outcome: match o {
                    0 => PairOutcome::FirstWins,
                    1 => PairOutcome::SecondWins,
                    _ => PairOutcome::Tie,
                },
            })
            .collect();
        prop_assume!(!verdicts.is_empty());
        let matrix = win_rate_matrix(&verdicts).unwrap();
        for i in 0..matrix.models.len() {
            for j in 0..matrix.models.len() {
                if let (Some(rij), Some(rji), Some(tie)) =
                    (matrix.rate(i, j), matrix.rate(j, i), matrix.tie_rate(i, j))
                {
                    prop_assert!((rij + rji + tie - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

/// Split partition over many seeds on a small fixture.
#[test]
fn split_partitions_exactly_for_a_thousand_seeds() {
    let items: Vec<u32> = (0..17).collect();
    for seed in 0..1000u64 {
        let (train, test) = split_dataset(&items, 0.25, seed).unwrap();
        assert_eq!(test.len(), 4); // round_half_even(4.25)
        assert_eq!(train.len(), 13);
        let mut all: Vec<u32> = train.iter().chain(&test).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, items, "seed {seed}");
    }
}
