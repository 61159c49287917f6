mod common;

use common::{design_matrix_solve, oracle_offsets, plane_of, random_image, rng, wls_objective};
use lasi_core::{
    accumulate_naive, build_offsets, predict, solve_embeddings, ChannelMode, ImageTensor, LasiConfig, Plane,
};
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn offsets_match_brute_force_enumeration() {
    for n in 1..=60 {
        assert_eq!(build_offsets(n).as_slice(), oracle_offsets(n).as_slice(), "n = {n}");
    }
}

#[test]
fn embeddings_match_explicit_design_matrix_solve() {
    let mut rng = rng(11);
    for trial in 0..24 {
        let n = [1, 2, 4, 8][trial % 4];
        let (h, w) = (rng.random_range(1..=9), rng.random_range(1..=9));
        let img = random_image(&mut rng, h, w, 1);
        let cfg = LasiConfig::with_n(n);
        let emb = solve_embeddings(&img, &cfg).unwrap();
        let oracle = design_matrix_solve(img.data(), h, w, n, cfg.omega, cfg.pad, cfg.pinv_rcond);
        for (i, want) in oracle.iter().enumerate() {
            for (a, b) in emb.column(i).iter().zip(want) {
                assert!((a - b).abs() <= 1e-8, "trial {trial} {h}x{w} n={n} pixel {i}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn colour_planes_are_solved_independently() {
    let mut rng = rng(12);
    let img = random_image(&mut rng, 5, 6, 3);
    let cfg = LasiConfig::with_n(4);
    let emb = solve_embeddings(&img, &cfg).unwrap();
    for ch in 0..3 {
        let oracle = design_matrix_solve(&plane_of(&img, ch), 5, 6, 4, cfg.omega, cfg.pad, cfg.pinv_rcond);
        for (site, want) in oracle.iter().enumerate() {
            let got = emb.column(emb.column_of(site, ch));
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn perturbing_a_value_never_changes_earlier_columns() {
    let mut rng = rng(13);
    for mode in [ChannelMode::PerChannel, ChannelMode::Joint] {
        for _ in 0..10 {
            let img = random_image(&mut rng, 7, 6, 3);
            let cfg = LasiConfig { channel_mode: mode, ..LasiConfig::with_n(5) };
            let before = solve_embeddings(&img, &cfg).unwrap();
            let j = rng.random_range(0..img.data().len());
            let mut data = img.data().to_vec();
            data[j] = 1.0 - data[j];
            let after = solve_embeddings(&ImageTensor::new(7, 6, 3, data).unwrap(), &cfg).unwrap();
            let site = j / 3;
            // In joint mode the column of a site predicts every channel of it,
            // so only earlier sites are covered.
            let untouched = match mode {
                ChannelMode::PerChannel => j + 1,
                ChannelMode::Joint => site + 1,
            };
            for i in 0..untouched {
                assert_eq!(before.column(i), after.column(i), "{mode:?}: column {i} moved after touching {j}");
            }
            assert_ne!(before.as_slice(), after.as_slice());
        }
    }
}

#[test]
fn appending_rows_leaves_existing_embeddings_alone() {
    let mut rng = rng(14);
    let img = random_image(&mut rng, 6, 7, 1);
    let mut data = img.data().to_vec();
    data.extend((0..3 * 7).map(|_| rng.random::<f64>()));
    let taller = ImageTensor::new(9, 7, 1, data).unwrap();
    let cfg = LasiConfig::with_n(6);
    let a = solve_embeddings(&img, &cfg).unwrap();
    let b = solve_embeddings(&taller, &cfg).unwrap();
    assert_eq!(a.as_slice(), &b.as_slice()[..a.as_slice().len()]);
}

#[test]
fn training_loss_never_grows_with_n() {
    let mut rng = rng(15);
    for _ in 0..4 {
        let img = random_image(&mut rng, 8, 8, 1);
        let losses: Vec<Vec<f64>> = (1..=8)
            .map(|n| {
                let cfg = LasiConfig::with_n(n);
                predict(&img, &solve_embeddings(&img, &cfg).unwrap(), &cfg).unwrap().train_loss.data
            })
            .collect();
        for pair in losses.windows(2) {
            for (big, small) in pair[1].iter().zip(&pair[0]) {
                assert!(*big <= small + 1e-12, "{big} > {small}");
            }
        }
    }
}

#[test]
fn training_loss_is_the_attained_objective() {
    let mut rng = rng(16);
    let img = random_image(&mut rng, 6, 5, 1);
    let cfg = LasiConfig::with_n(3);
    let emb = solve_embeddings(&img, &cfg).unwrap();
    let pred = predict(&img, &emb, &cfg).unwrap();
    for i in 0..30 {
        let want = wls_objective(img.data(), 6, 5, 3, cfg.omega, cfg.pad, i, emb.column(i));
        assert!((pred.train_loss.data[i] - want).abs() <= 1e-10 * want.max(1.0));
    }
}

/// Rows that repeat the same values make several features collinear, so
/// most normal matrices are singular.
#[test]
fn solutions_have_no_null_space_component() {
    let mut rng = rng(17);
    let row: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
    let striped = ImageTensor::new(8, 9, 1, row.iter().cycle().take(72).copied().collect()).unwrap();
    let cfg = LasiConfig::with_n(6);
    let emb = solve_embeddings(&striped, &cfg).unwrap();
    let acc = accumulate_naive(&Plane::new(8, 9, striped.data().to_vec()), &cfg);
    let mut deficient = 0;
    for i in 0..72 {
        let a = DMatrix::from_row_slice(6, 6, acc.a(i));
        let svd = a.svd(true, false);
        let smax = svd.singular_values.max();
        let u = svd.u.unwrap();
        let w = nalgebra::DVector::from_column_slice(emb.column(i));
        for (k, s) in svd.singular_values.iter().enumerate() {
            if *s <= 1e-10 * smax || smax == 0.0 {
                deficient += 1;
                let proj = u.column(k).dot(&w);
                assert!(proj.abs() <= 1e-8, "pixel {i}: null-space component {proj}");
            }
        }
    }
    assert!(deficient >= 20, "expected singular directions, saw {deficient}");
}

#[test]
fn constant_image_embeds_to_the_uniform_average() {
    for n in [1, 4, 12] {
        let img = ImageTensor::filled(10, 11, 3, 0.5).unwrap();
        let cfg = LasiConfig::with_n(n);
        let emb = solve_embeddings(&img, &cfg).unwrap();
        for i in 3..emb.columns() {
            for v in emb.column(i) {
                assert!((v - 1.0 / n as f64).abs() <= 1e-9);
            }
        }
        let pred = predict(&img, &emb, &cfg).unwrap();
        for (i, z) in pred.residual.data.iter().enumerate().skip(3) {
            assert!(*z <= 1e-12, "residual {z} at {i}");
        }
        assert_eq!(pred.residual.data[0], 0.25);
    }
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let mut rng = rng(18);
    let img = random_image(&mut rng, 16, 16, 3);
    for mode in [ChannelMode::PerChannel, ChannelMode::Joint] {
        let cfg = LasiConfig { channel_mode: mode, ..LasiConfig::default() };
        let a = solve_embeddings(&img, &cfg).unwrap();
        let b = solve_embeddings(&img, &cfg).unwrap();
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
