use approx::{assert_abs_diff_eq, assert_relative_eq};
use froi::converter::{clarke, phase_shift, power_precalc, vsc_waveforms, Phasor};
use froi::metrics;
use froi::TimeSeries;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

proptest! {
    #[test]
    fn clarke_shift_and_inverse_recover_the_inputs(
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
        delta_bar in -50.0f64..50.0,
    ) {
        // Zero-sequence-free input: the transform discards that component.
        let x = [a, b, -a - b];
        let (x_in, x_qu) = clarke(x);
        let p = phase_shift(x_in, x_qu, delta_bar);
        let back = vsc_waveforms(p, delta_bar);
        for k in 0..3 {
            prop_assert!(close(back[k], x[k], 1e-12), "phase {}: {} vs {}", k, back[k], x[k]);
        }
    }

    #[test]
    fn phase_shift_preserves_length(x_in in -5.0f64..5.0, x_qu in -5.0f64..5.0, d in -10.0f64..10.0) {
        let p = phase_shift(x_in, x_qu, d);
        prop_assert!(close(p.d.hypot(p.q), x_in.hypot(x_qu), 1e-12));
    }
}

#[test]
fn clarke_and_shift_trivial_cases() {
    assert_eq!(clarke([0.0, 0.0, 0.0]), (0.0, 0.0));
    let p = phase_shift(0.7, -0.2, 0.0);
    assert_eq!((p.d, p.q), (0.7, -0.2));
    let p = phase_shift(1.0, 0.0, std::f64::consts::FRAC_PI_2);
    assert_abs_diff_eq!(p.d, 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(p.q, -1.0, epsilon = 1e-15);
    let v = vsc_waveforms(Phasor::new(1.0, 0.0), 0.0);
    assert_abs_diff_eq!(&v[..], &[1.0, -0.5, -0.5][..], epsilon = 1e-15);
}

#[test]
fn power_precalculation_identities() {
    let [p, q, v] = power_precalc(Phasor::new(1.0, 0.0), Phasor::new(1.0, 0.0));
    assert_eq!((p, q, v), (1.0, 0.0, 1.0));
    let [p, q, _] = power_precalc(Phasor::new(1.0, 0.0), Phasor::new(0.0, 1.0));
    assert_eq!((p, q), (0.0, -1.0));
    assert_eq!(
        power_precalc(Phasor::new(0.0, 0.0), Phasor::new(0.3, 0.4)),
        [0.0, 0.0, 0.0]
    );
}

fn random_series(rng: &mut ChaCha8Rng, h: f64, n: usize) -> TimeSeries {
    let cols = ["t", "v_a", "v_b", "v_c", "delta"]
        .map(String::from)
        .to_vec();
    let mut s = TimeSeries::new(h, cols);
    for k in 0..n {
        let mut row = vec![k as f64 * h];
        row.extend((0..4).map(|_| rng.gen_range(-2.0..2.0)));
        s.push_row(&row);
    }
    s
}

/// Relative error in percent, pairing samples by searching the whole
/// reference for the nearest time stamp.
fn brute_force(com: &TimeSeries, reference: &TimeSeries, column: &str) -> f64 {
    let c = com.column(column).unwrap();
    let r = reference.column(column).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, t) in com.time().iter().enumerate() {
        let j = (0..reference.len())
            .min_by(|&a, &b| {
                (reference.time()[a] - t)
                    .abs()
                    .total_cmp(&(reference.time()[b] - t).abs())
            })
            .unwrap();
        num += (c[i] - r[j]).powi(2);
        den += r[j].powi(2);
    }
    100.0 * num.sqrt() / den.sqrt()
}

#[test]
fn metric_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in [1usize, 2, 5] {
        let reference = random_series(&mut rng, 1e-4, 5 * 40 + 1);
        let n_com = 5 * 40 / k + 1;
        let com = random_series(&mut rng, k as f64 * 1e-4, n_com);
        let (v, per) = metrics::voltage_error(&com, &reference).unwrap();
        let mut mean = 0.0;
        for (i, col) in ["v_a", "v_b", "v_c"].iter().enumerate() {
            let oracle = brute_force(&com, &reference, col);
            assert!(
                close(per[i], oracle, 1e-12 * oracle),
                "{col}: {} vs {oracle}",
                per[i]
            );
            mean += oracle / 3.0;
        }
        assert!(close(v, mean, 1e-12 * mean));
        let ph = metrics::phase_error(&com, &reference).unwrap();
        let oracle = brute_force(&com, &reference, "delta");
        assert!(close(ph, oracle, 1e-12 * oracle));
    }
}

#[test]
fn constant_offset_follows_norm_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let reference = random_series(&mut rng, 1e-3, 21);
    let mut com = reference.clone();
    let offset = 0.05;
    let idx = com.columns.iter().position(|c| c == "delta").unwrap();
    com.data[idx].iter_mut().for_each(|v| *v += offset);
    let norm = reference
        .column("delta")
        .unwrap()
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    let expected = 100.0 * offset * (21f64).sqrt() / norm;
    let got = metrics::phase_error(&com, &reference).unwrap();
    assert_relative_eq!(got, expected, max_relative = 1e-12);
}

#[test]
fn metric_is_permutation_invariant_across_phases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reference = random_series(&mut rng, 1e-3, 11);
    let com = random_series(&mut rng, 1e-3, 11);
    let swap = |s: &TimeSeries| {
        let mut s = s.clone();
        s.data.swap(1, 3);
        s
    };
    let (a, _) = metrics::voltage_error(&com, &reference).unwrap();
    let (b, _) = metrics::voltage_error(&swap(&com), &swap(&reference)).unwrap();
    assert_relative_eq!(a, b, max_relative = 1e-12);
}
