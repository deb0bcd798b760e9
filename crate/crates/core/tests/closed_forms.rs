//! Bifurcation functions of the two worked examples against their closed
//! forms, which are stated for the bare sine/cosine moments.

use std::f64::consts::{PI, SQRT_2};

use pendavg::averaging::{mode1_averaged, mode2_averaged, raw_to_canonical, AveragedSystem};
use pendavg::quadrature::QuadOptions;
use pendavg::zeros::{antipodal_pairing, find_zeros, ZeroSearch};
use pendavg::{Mode, PerturbationSpec, Resonance};

fn example1() -> PerturbationSpec {
    PerturbationSpec::parse("0", "(1 - th1^2) * sin(w1 * tau)", Mode::Mode1, Resonance::default()).unwrap()
}

fn example2() -> PerturbationSpec {
    PerturbationSpec::parse("th2d + th1^2 * cos(w2 * tau)", "0", Mode::Mode2, Resonance::default()).unwrap()
}

fn closed1(x: f64, y: f64) -> [f64; 2] {
    let d = (2.0 - SQRT_2).powf(1.5);
    [
        -PI * (x * x + 3.0 * y * y + 8.0 * (SQRT_2 - 2.0)) / (8.0 * d),
        -PI * x * y / (4.0 * d),
    ]
}

fn closed2(z: f64, w: f64) -> [f64; 2] {
    let d = (2.0 * (2.0 + SQRT_2)).sqrt();
    let c = ((10.0 - 7.0 * SQRT_2) * (2.0 + SQRT_2)).sqrt();
    [
        -PI * (c * w - 8.0) * z / (4.0 * d),
        PI * (SQRT_2 * w * w - 2.0 * w * w - 16.0 * w + 3.0 * SQRT_2 * z * z - 6.0 * z * z) / (8.0 * d),
    ]
}

fn grid(half: f64) -> impl Iterator<Item = [f64; 2]> {
    (0..20).flat_map(move |i| {
        (0..20).map(move |j| [-half + 2.0 * half * i as f64 / 19.0, -half + 2.0 * half * j as f64 / 19.0])
    })
}

fn check_grid(
    spec: &PerturbationSpec,
    half: f64,
    averaged: fn(&PerturbationSpec, [f64; 2], &QuadOptions) -> Result<pendavg::averaging::ModeAverages, pendavg::Error>,
    closed: fn(f64, f64) -> [f64; 2],
) {
    let opts = QuadOptions::default();
    let factor = raw_to_canonical(spec);
    for alpha in grid(half) {
        let a = averaged(spec, alpha, &opts).unwrap();
        let c = closed(alpha[0], alpha[1]);
        for k in 0..2 {
            let scale = c[k].abs().max(1.0);
            assert!((a.raw[k] - c[k]).abs() <= 1e-10 * scale, "raw {k} at {alpha:?}: {} vs {}", a.raw[k], c[k]);
            let want = factor[k] * c[k];
            assert!(
                (a.canonical[k] - want).abs() <= 1e-10 * want.abs().max(1.0),
                "canonical {k} at {alpha:?}: {} vs {want}",
                a.canonical[k]
            );
        }
    }
}

#[test]
fn example1_matches_closed_form_on_grid() {
    check_grid(&example1(), 3.0, mode1_averaged, closed1);
}

#[test]
fn example2_matches_closed_form_on_grid() {
    check_grid(&example2(), 30.0, mode2_averaged, closed2);
}

#[test]
fn example1_value_at_origin() {
    let a = mode1_averaged(&example1(), [0.0, 0.0], &QuadOptions::default()).unwrap();
    assert!((a.raw[0] - PI / (2.0 - SQRT_2).sqrt()).abs() < 1e-12);
    assert!((a.raw[0] - 4.104_688_611_908_124).abs() < 1e-12);
    assert!(a.raw[1].abs() < 1e-13);
}

#[test]
fn example1_has_four_simple_zeros_in_two_classes() {
    let spec = example1();
    let sys = AveragedSystem::new(&spec, QuadOptions::default()).unwrap();
    let report = find_zeros(&sys, &ZeroSearch::annulus(1e-2, 50.0)).unwrap();
    let expected = [
        [-2.164_784_400_584_788, 0.0],
        [0.0, -1.249_838_856_415_13],
        [0.0, 1.249_838_856_415_13],
        [2.164_784_400_584_788, 0.0],
    ];
    assert_eq!(report.zeros.len(), 4, "{:?}", report.zeros.iter().map(|z| z.alpha).collect::<Vec<_>>());
    for (z, e) in report.zeros.iter().zip(expected) {
        assert!((z.alpha[0] - e[0]).abs() < 1e-8 && (z.alpha[1] - e[1]).abs() < 1e-8, "{:?} vs {e:?}", z.alpha);
        assert!(z.simple && z.det.abs() > 1e-8);
    }
    assert_eq!(antipodal_pairing(&report.zeros, 1e-6).len(), 2);
}

#[test]
fn example2_has_one_zero_off_origin() {
    let spec = example2();
    let sys = AveragedSystem::new(&spec, QuadOptions::default()).unwrap();
    let report = find_zeros(&sys, &ZeroSearch::annulus(1e-2, 50.0)).unwrap();
    assert_eq!(report.zeros.len(), 1, "{:?}", report.zeros.iter().map(|z| z.alpha).collect::<Vec<_>>());
    let z = &report.zeros[0];
    assert!(z.alpha[0].abs() < 1e-8);
    assert!((z.alpha[1] + 27.313_708_498_984_76).abs() < 1e-8, "{:?}", z.alpha);
    assert!(z.simple);
}
