use imgidx_core::assembler::{assemble, expected_length, recover_images, validate_sequence, AssemblyOptions, SeparatorToken, SpanKind};
use imgidx_core::index_embed::{add_index_embedding, index_embedding, IndexEmbedConfig};
use imgidx_core::latent::refold_image;
use imgidx_core::mrope::{apply_rope, build_freq_table, token_frequencies, RopeConfig};
use imgidx_core::{flatten_image, GridShape, LatentImage, Matrix, Rng};
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = GridShape> {
    (1usize..4, 1usize..5, 1usize..5).prop_map(|(f, h, w)| GridShape::new(f, h, w).unwrap())
}

fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.gaussian())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn flatten_refold_is_identity(g in grid(), c in 1usize..6, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let img = LatentImage::new(1, g, gaussian(g.token_count(), c, &mut rng)).unwrap();
        let (tokens, metas) = flatten_image(&img).unwrap();
        prop_assert_eq!(tokens.rows(), g.frames * g.height * g.width);
        prop_assert_eq!(&refold_image(&tokens, &metas, g).unwrap(), &img.data);

        // Rows carry their own cells, so any row order refolds the same way.
        let mut order: Vec<usize> = (0..tokens.rows()).collect();
        rng.shuffle(&mut order);
        let mut shuffled = Matrix::zeros(0, c);
        let mut shuffled_metas = Vec::new();
        for &i in &order {
            shuffled.push_row(tokens.row(i)).unwrap();
            shuffled_metas.push(metas[i]);
        }
        prop_assert_eq!(&refold_image(&shuffled, &shuffled_metas, g).unwrap(), &img.data);
    }

    #[test]
    fn rope_depends_only_on_offset(
        seed in any::<u64>(),
        p1 in (0usize..64, 0usize..64, 0usize..64),
        p2 in (0usize..64, 0usize..64, 0usize..64),
        s in (0usize..64, 0usize..64, 0usize..64),
    ) {
        let table = build_freq_table(&RopeConfig::default()).unwrap();
        let mut rng = Rng::new(seed);
        let q: Vec<f64> = (0..32).map(|_| rng.gaussian()).collect();
        let k: Vec<f64> = (0..32).map(|_| rng.gaussian()).collect();
        let rot = |x: &[f64], p: (usize, usize, usize)| apply_rope(x, &token_frequencies(p, &table)).unwrap();
        let shift = |p: (usize, usize, usize)| (p.0 + s.0, p.1 + s.1, p.2 + s.2);
        let a = dot(&rot(&q, p1), &rot(&k, p2));
        let b = dot(&rot(&q, shift(p1)), &rot(&k, shift(p2)));
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn rope_preserves_norm(seed in any::<u64>(), p in (0usize..1000, 0usize..1000, 0usize..1000)) {
        let table = build_freq_table(&RopeConfig::default()).unwrap();
        let mut rng = Rng::new(seed);
        let x: Vec<f64> = (0..32).map(|_| rng.gaussian()).collect();
        let y = apply_rope(&x, &token_frequencies(p, &table)).unwrap();
        prop_assert!((dot(&x, &x) - dot(&y, &y)).abs() < 1e-12 * dot(&x, &x).max(1.0));
    }

    #[test]
    fn index_embedding_norm_and_ratio(n in 1usize..=64, j0 in 1usize..=64, c in 1usize..8, half in 1usize..33) {
        let j = (j0 - 1) % n + 1;
        let cfg = IndexEmbedConfig::new(10_000.0, 2 * half).unwrap();
        let e = index_embedding(j, n, &cfg).unwrap();
        let sq: f64 = e.values.iter().map(|x| x * x).sum();
        prop_assert!((sq - half as f64).abs() < 1e-9);
        prop_assert_eq!(e.values, index_embedding(c * j, c * n, &cfg).unwrap().values);
    }

    #[test]
    fn embedding_shifts_every_row_alike(n in 1usize..8, rows in 1usize..6, seed in any::<u64>()) {
        let cfg = IndexEmbedConfig::new(10_000.0, 8).unwrap();
        let e = index_embedding(n, n, &cfg).unwrap();
        let mut rng = Rng::new(seed);
        let x = gaussian(rows, 8, &mut rng);
        let y = add_index_embedding(&x, &e).unwrap();
        for r in 0..rows {
            for k in 0..8 {
                // The added vector is the same for every row, up to rounding of the sum.
                let d = y.get(r, k) - x.get(r, k) - e.values[k];
                prop_assert!(d.abs() <= f64::EPSILON * y.get(r, k).abs().max(1.0));
            }
        }
    }

    #[test]
    fn assembly_length_law_and_recovery(
        grids in prop::collection::vec(grid(), 1..6),
        d in 1usize..3,
        text_len in 0usize..5,
        use_separator in any::<bool>(),
        use_index_embed in any::<bool>(),
        trailing_separator in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let c = 8;
        let opts = AssemblyOptions { use_separator, use_index_embed, trailing_separator, ..AssemblyOptions::default() };
        let mut rng = Rng::new(seed);
        let images: Vec<_> = grids
            .iter()
            .enumerate()
            .map(|(i, g)| LatentImage::new(i + 1, *g, gaussian(g.token_count(), c, &mut rng)).unwrap())
            .collect();
        let sep = SeparatorToken::init(d, c, &mut rng).unwrap();
        let text = gaussian(text_len, c, &mut rng);
        let seq = assemble(&images, &sep, &IndexEmbedConfig::new(10_000.0, c).unwrap(), &text, opts).unwrap();

        let tokens: usize = grids.iter().map(|g| g.token_count()).sum();
        let seps = match (use_separator, trailing_separator) {
            (false, _) => 0,
            (true, true) => grids.len(),
            (true, false) => grids.len() - 1,
        };
        prop_assert_eq!(seq.len(), tokens + seps * d + text_len);
        prop_assert_eq!(seq.len(), expected_length(&grids, d, text_len, &opts));
        prop_assert!(validate_sequence(&seq).is_ok());

        // Spans are disjoint, cover the sequence, and list images in order.
        let mut cursor = 0;
        let mut next_image = 1;
        for s in seq.spans() {
            prop_assert_eq!(s.start, cursor);
            cursor += s.len;
            if let SpanKind::Image { image } = s.kind {
                prop_assert_eq!(image, next_image);
                next_image += 1;
            }
        }
        prop_assert_eq!(cursor, seq.len());

        let back = recover_images(&seq).unwrap();
        for (img, rec) in images.iter().zip(&back) {
            for (x, y) in img.data.as_slice().iter().zip(rec.as_slice()) {
                if use_index_embed {
                    prop_assert!((x - y).abs() <= 2.0 * f64::EPSILON * (x.abs() + 1.0));
                } else {
                    prop_assert_eq!(x, y);
                }
            }
        }
    }
}
