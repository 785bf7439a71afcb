//! Randomized invariants over the model zoo, the wire format, and the
//! channel: structural facts that must hold for *every* spec, seed, and
//! quantization mode, not just the worked examples in the unit tests.

use proptest::prelude::*;
use spinr_core::image::{coord_grid, Image};
use spinr_core::metrics::{psnr, ssim, SSIM_WINDOW};
use spinr_core::models::{build_model, fourier_encode, render_into, Model, ModelSpec};
use spinr_core::robustness::{add_param_noise, hidden_neuron_count, lose_neurons};
use spinr_core::stream::{
    chunk_spans, deserialize, packet_census, packetize, progressive_decode, reassemble,
    serialize, to_model, transmit, truncate_stream, ChannelConfig, QuantMode, HEADER_LEN,
};
use spinr_core::train::StageSchedule;

fn arb_spec() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (1usize..=10, 1usize..=4, 0.5f64..40.0)
            .prop_map(|(h, n, w0)| ModelSpec::siren(h, n, w0)),
        (1usize..=10, 1usize..=4, 1usize..=8, 0.5f64..12.0)
            .prop_map(|(h, n, m, s)| ModelSpec::fourier(h, n, m, s)),
    ]
}

fn arb_quant() -> impl Strategy<Value = QuantMode> {
    prop_oneof![Just(QuantMode::F32), Just(QuantMode::U8), Just(QuantMode::U16)]
}

/// Per-chunk parameter vectors in chunk-id order (B first when present,
/// then each dense layer's weights followed by its bias) — the same
/// grouping the serializer quantizes over.
fn chunk_param_sets(model: &Model) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if let Some(b) = &model.fourier_b {
        out.push(b.data.clone());
    }
    for layer in &model.layers {
        let mut v = layer.w.data.clone();
        v.extend_from_slice(&layer.b);
        out.push(v);
    }
    out
}

proptest! {
    /// Mode-0 streams re-serialize byte-identically after a decode, and
    /// every decoded parameter is exactly the f32 snap of the original.
    #[test]
    fn mode0_decode_is_f32_snap_and_reserializes_identically(
        spec in arb_spec(),
        seed in 0u64..1_000_000,
    ) {
        let model = build_model(&spec, seed);
        let bytes = serialize(&model, QuantMode::F32);
        let decoded = to_model(&deserialize(&bytes, false).unwrap()).unwrap();
        prop_assert_eq!(serialize(&decoded, QuantMode::F32), bytes);

        for (orig, dec) in chunk_param_sets(&model).iter().zip(chunk_param_sets(&decoded).iter()) {
            for (&o, &d) in orig.iter().zip(dec.iter()) {
                prop_assert_eq!(d, o as f32 as f64);
            }
        }
    }

    /// Quantized round trips respect the analytic grid bound per chunk:
    /// half a grid cell over the zero-widened range, with headroom for the
    /// f32-rounded scale.
    #[test]
    fn quantized_round_trip_error_is_bounded_per_chunk(
        spec in arb_spec(),
        seed in 0u64..1_000_000,
        sixteen_bit in any::<bool>(),
    ) {
        let (quant, levels) = if sixteen_bit {
            (QuantMode::U16, 65_535.0)
        } else {
            (QuantMode::U8, 255.0)
        };
        let model = build_model(&spec, seed);
        let decoded = to_model(&deserialize(&serialize(&model, quant), false).unwrap()).unwrap();
        for (orig, dec) in chunk_param_sets(&model).iter().zip(chunk_param_sets(&decoded).iter()) {
            let lo = orig.iter().copied().fold(0.0f64, f64::min);
            let hi = orig.iter().copied().fold(0.0f64, f64::max);
            let bound = 0.51 * (hi - lo) / levels + 1e-12;
            for (&o, &d) in orig.iter().zip(dec.iter()) {
                prop_assert!(
                    (o - d).abs() <= bound,
                    "param {o} decoded to {d}, bound {bound:e}"
                );
            }
        }
    }

    /// Flipping any single byte in the chunk region damages exactly the
    /// chunk whose record spans it; every other chunk still verifies and
    /// decodes bit-identically.
    #[test]
    fn single_byte_corruption_is_caught_and_confined(
        spec in arb_spec(),
        seed in 0u64..1_000_000,
        quant in arb_quant(),
        pos_frac in 0.0f64..1.0,
        mask in 1u8..=255,
    ) {
        let bytes = serialize(&build_model(&spec, seed), quant);
        let clean = deserialize(&bytes, true).unwrap();
        let region = bytes.len() - HEADER_LEN;
        let offset = HEADER_LEN + ((pos_frac * region as f64) as usize).min(region - 1);
        let hit = chunk_spans(&bytes)
            .unwrap()
            .into_iter()
            .find(|(_, span)| span.contains(&offset))
            .expect("every chunk-region byte belongs to a record")
            .0;

        let mut damaged = bytes.clone();
        damaged[offset] ^= mask;
        let ds = deserialize(&damaged, true).unwrap();
        prop_assert_eq!(&ds.corrupt, &vec![hit]);
        prop_assert_eq!(&ds.missing, &vec![hit]);
        for (id, chunk) in &ds.chunks {
            prop_assert_eq!(chunk, &clean.chunks[id]);
        }
    }

    /// Packetization partitions the chunk region exactly: fragment sizes
    /// sum to the region, counts match the census, and a lossless channel
    /// reassembles every chunk bit-identically to a direct decode.
    #[test]
    fn packetize_partitions_and_lossless_channel_round_trips(
        spec in arb_spec(),
        seed in 0u64..1_000_000,
        quant in arb_quant(),
        payload in 1usize..=1024,
    ) {
        let bytes = serialize(&build_model(&spec, seed), quant);
        let header = deserialize(&bytes, true).unwrap().header;
        let packets = packetize(&bytes, payload).unwrap();

        let total: usize = packets.iter().map(|p| p.payload.len()).sum();
        prop_assert_eq!(total, bytes.len() - HEADER_LEN);
        for p in &packets {
            prop_assert!(p.payload.len() <= payload);
            prop_assert!(p.frag_index < p.frag_count);
        }
        for (id, expect) in packet_census(&header, payload) {
            let got = packets.iter().filter(|p| p.chunk_id == id).count();
            prop_assert_eq!(got, expect, "chunk {} fragment count", id);
        }

        let sent = transmit(packets, &ChannelConfig::new(0.0, seed));
        prop_assert_eq!(sent.dropped, 0);
        let ds = reassemble(&header, &sent.delivered);
        let direct = deserialize(&bytes, true).unwrap();
        prop_assert!(ds.corrupt.is_empty());
        prop_assert!(ds.missing.is_empty());
        prop_assert_eq!(ds.chunks, direct.chunks);
    }

    /// The lossy channel is a deterministic function of (seed, loss
    /// probability) and partitions what it was given.
    #[test]
    fn channel_loss_is_deterministic_and_partitions(
        spec in arb_spec(),
        seed in 0u64..1_000_000,
        p in 0.0f64..=1.0,
    ) {
        let bytes = serialize(&build_model(&spec, seed), QuantMode::F32);
        let packets = packetize(&bytes, 64).unwrap();
        let cfg = ChannelConfig::new(p, seed);
        let a = transmit(packets.clone(), &cfg);
        let b = transmit(packets.clone(), &cfg);
        prop_assert_eq!(a.sent, packets.len());
        prop_assert_eq!(a.delivered.len() + a.dropped, a.sent);
        let ids = |t: &spinr_core::stream::Transmission| {
            t.delivered.iter().map(|p| (p.chunk_id, p.frag_index)).collect::<Vec<_>>()
        };
        prop_assert_eq!(ids(&a), ids(&b));
    }

    /// A stream truncated to `keep` hidden layers progressively decodes to
    /// stage `keep + 1`, and the render bit-equals the full model rendered
    /// through the truncated active set (kept chunk records are copied
    /// verbatim, so the surviving weights are identical).
    #[test]
    fn truncated_streams_decode_to_the_matching_stage(
        spec in arb_spec(),
        seed in 0u64..1_000_000,
        quant in arb_quant(),
        keep_frac in 0.0f64..=1.0,
    ) {
        let bytes = serialize(&build_model(&spec, seed), quant);
        let n = spec.hidden_layers;
        let keep = ((keep_frac * (n + 1) as f64) as usize).min(n);
        let truncated = truncate_stream(&bytes, keep).unwrap();

        let ds = deserialize(&truncated, true).unwrap();
        let out = progressive_decode(&ds, 5, 4).unwrap();
        prop_assert_eq!(out.stage, keep + 1);
        let mut expect_active: Vec<usize> = (0..=keep).collect();
        expect_active.push(spec.layer_count() - 1);
        prop_assert_eq!(&out.active, &expect_active);

        let full = to_model(&deserialize(&bytes, false).unwrap()).unwrap();
        let mut reference = Image::new(5, 4);
        render_into(&full, &mut reference, Some(&expect_active));
        prop_assert_eq!(out.image.data, reference.data);
    }

    /// The canonical schedule partitions the step budget and trains every
    /// hidden layer exactly once, against a strictly growing prefix.
    #[test]
    fn stage_schedule_partitions_steps_and_layers(
        spec in arb_spec(),
        total in 0usize..5000,
    ) {
        let sched = StageSchedule::equal_split(&spec, total);
        let n = spec.hidden_layers;
        let out = spec.layer_count() - 1;
        prop_assert_eq!(sched.stages.len(), n + 1);
        prop_assert_eq!(sched.total_steps(), total);
        prop_assert_eq!(&sched.stages[0].trainable, &vec![0, out]);
        for li in 1..=n {
            let owners = sched
                .stages
                .iter()
                .filter(|s| s.trainable.contains(&li))
                .count();
            prop_assert_eq!(owners, 1, "hidden layer {} trained in {} stages", li, owners);
        }
        for (i, stage) in sched.stages.iter().enumerate() {
            let mut expect: Vec<usize> = (0..=i).collect();
            expect.push(out);
            prop_assert_eq!(&stage.active, &expect);
        }
    }

    /// Fourier features stay inside the sinusoid range and have the
    /// documented layout: `m` sines then `m` cosines.
    #[test]
    fn fourier_encoding_is_bounded_with_sin_block_first(
        m in 1usize..=16,
        sigma in 0.5f64..12.0,
        seed in 0u64..1_000_000,
        h in 1usize..=6,
        w in 1usize..=6,
    ) {
        let model = build_model(&ModelSpec::fourier(4, 1, m, sigma), seed);
        let b = model.fourier_b.as_ref().unwrap();
        let coords = coord_grid(h, w);
        let enc = fourier_encode(b, &coords);
        prop_assert_eq!(enc.cols, 2 * m);
        prop_assert_eq!(enc.rows, h * w);
        for &v in &enc.data {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
        for r in 0..enc.rows {
            for j in 0..m {
                let s = enc.at(r, j);
                let c = enc.at(r, j + m);
                prop_assert!((s * s + c * c - 1.0).abs() < 1e-12, "sin/cos pair broken");
            }
        }
    }

    /// Pixel centers stay strictly inside [-1, 1] and enumerate in
    /// row-major order.
    #[test]
    fn coord_grid_is_row_major_and_strictly_interior(
        h in 1usize..=32,
        w in 1usize..=32,
    ) {
        let g = coord_grid(h, w);
        prop_assert_eq!(g.rows, h * w);
        for &v in &g.data {
            prop_assert!(v > -1.0 && v < 1.0);
        }
        for i in 0..h {
            for j in 0..w {
                let r = i * w + j;
                if j + 1 < w {
                    prop_assert!(g.at(r + 1, 0) > g.at(r, 0), "x must grow along a row");
                    prop_assert_eq!(g.at(r + 1, 1), g.at(r, 1));
                }
            }
        }
    }

    /// The spec-level parameter count always matches the built model.
    #[test]
    fn param_count_matches_the_built_model(spec in arb_spec(), seed in 0u64..1_000_000) {
        let model = build_model(&spec, seed);
        let built: usize = model
            .layers
            .iter()
            .map(|l| l.w.data.len() + l.b.len())
            .sum::<usize>()
            + model.fourier_b.as_ref().map_or(0, |b| b.data.len());
        prop_assert_eq!(spec.param_count(), built);
        prop_assert_eq!(model.param_count(), built);
    }

    /// Metric ranges over arbitrary image pairs: PSNR is positive for
    /// in-gamut images, SSIM never leaves [-1, 1].
    #[test]
    fn metric_ranges_hold_for_random_images(
        seed_a in 0u64..1_000_000,
        seed_b in 0u64..1_000_000,
        extra in 0usize..4,
    ) {
        let side = SSIM_WINDOW + extra;
        let mk = |seed: u64| {
            use rand::Rng;
            let mut rng = spinr_core::rng::stream_rng(seed, 7);
            Image::from_vec(
                side,
                side,
                (0..side * side * 3).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
        };
        let (a, b) = (mk(seed_a), mk(seed_b));
        let p = psnr(&a, &b);
        prop_assert!(p > 0.0);
        let s = ssim(&a, &b);
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert!(psnr(&a, &a).is_infinite());
        prop_assert!((ssim(&a, &a) - 1.0).abs() < 1e-12);
    }

    /// Losing k neurons zeroes exactly k hidden units and nothing else;
    /// the victim model is never mutated.
    #[test]
    fn lose_neurons_zeroes_exactly_k_units(
        spec in arb_spec(),
        seed in 0u64..1_000_000,
        k_frac in 0.0f64..=1.0,
    ) {
        let model = build_model(&spec, seed);
        let before = model.clone();
        let total = hidden_neuron_count(&model);
        let k = ((k_frac * (total + 1) as f64) as usize).min(total);
        let hit = lose_neurons(&model, k, seed);
        prop_assert_eq!(&model, &before, "attack must not mutate its input");

        let mut zeroed = 0usize;
        for li in 1..=spec.hidden_layers {
            for u in 0..spec.hidden_width {
                let row_zero = hit.layers[li].w.row(u).iter().all(|&x| x == 0.0)
                    && hit.layers[li].b[u] == 0.0;
                let was_zero = model.layers[li].w.row(u).iter().all(|&x| x == 0.0)
                    && model.layers[li].b[u] == 0.0;
                if row_zero && !was_zero {
                    zeroed += 1;
                } else if !row_zero {
                    prop_assert_eq!(hit.layers[li].w.row(u), model.layers[li].w.row(u));
                }
            }
        }
        prop_assert_eq!(zeroed, k);
        prop_assert_eq!(&hit.layers[0], &model.layers[0], "first layer is never a target");
        let out = spec.layer_count() - 1;
        prop_assert_eq!(&hit.layers[out], &model.layers[out], "output layer is never a target");
    }

    /// Zero-sigma noise is the identity.
    #[test]
    fn zero_sigma_noise_is_identity(spec in arb_spec(), seed in 0u64..1_000_000) {
        let model = build_model(&spec, seed);
        prop_assert_eq!(&add_param_noise(&model, 0.0, seed), &model);
    }
}
