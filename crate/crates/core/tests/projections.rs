use marsma::channel::Position2D;
use marsma::config::user_streams;
use marsma::constraints::{
    clip_to_region, normalize_combiners, project_bs_beamformer, project_common_split, project_ue_power,
    regulate_ma_step, repair_spacing, BeamformerProjection,
};
use marsma::Cx;
use proptest::prelude::*;
use proptest::test_runner::Config;

fn cx_vec(n: usize) -> impl Strategy<Value = Vec<Cx>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| Cx::new(a, b)), n)
}

proptest! {
    #![proptest_config(Config::with_cases(1000))]

    #[test]
    fn ue_projection_meets_budgets_and_keeps_ratios(
        powers in prop::collection::vec(0.0f64..2.0, 5),
        budgets in prop::collection::vec(0.01f64..1.5, 3),
    ) {
        let out = project_ue_power(&powers, &budgets).unwrap();
        for (u, &b) in budgets.iter().enumerate() {
            let s = user_streams(u, 3);
            let before: f64 = s.iter().map(|&k| powers[k]).sum();
            let after: f64 = s.iter().map(|&k| out[k]).sum();
            prop_assert!(after <= b + 1e-12);
            if before <= b {
                for &k in &s { prop_assert_eq!(out[k], powers[k]); }
            } else {
                prop_assert!((after - b).abs() < 1e-12);
                for &k in &s {
                    prop_assert!((out[k] / b - powers[k] / before).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn bs_projection_hits_the_budget(w in cx_vec(12), p in 0.01f64..10.0) {
        let (out, how) = project_bs_beamformer(&w, p, false);
        let trace: f64 = out.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!(matches!(how, BeamformerProjection::Scaled(_)));
        prop_assert!((trace - p).abs() < 1e-9 * p.max(1.0));
        // direction is kept
        if let BeamformerProjection::Scaled(k) = how {
            for (a, b) in w.iter().zip(&out) {
                prop_assert!((a.scale_f(k) - *b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bs_projection_can_leave_feasible_points(w in cx_vec(6), p in 0.01f64..1000.0) {
        let power: f64 = w.iter().map(|c| c.norm_sqr()).sum();
        let (out, how) = project_bs_beamformer(&w, p, true);
        if power <= p {
            prop_assert_eq!(how, BeamformerProjection::Unchanged);
            prop_assert_eq!(out, w);
        } else {
            let trace: f64 = out.iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((trace - p).abs() < 1e-9 * p.max(1.0));
        }
    }

    #[test]
    fn regulated_step_is_bounded(d in prop::collection::vec(-1e3f64..1e3, 1..10), gamma in 1e-5f64..0.1) {
        let out = regulate_ma_step(&d, gamma);
        for (x, y) in d.iter().zip(&out) {
            prop_assert!(y.abs() <= gamma);
            prop_assert!(x.signum() == y.signum() || *x == 0.0 || *y == 0.0);
        }
    }

    #[test]
    fn clip_lands_inside_and_fixes_interior(x in -1.0f64..1.0, y in -1.0f64..1.0, half in 0.01f64..0.5) {
        let p = clip_to_region(Position2D::new(x, y), half);
        prop_assert!(p.x.abs() <= half && p.y.abs() <= half);
        if x.abs() <= half && y.abs() <= half {
            prop_assert_eq!(p, Position2D::new(x, y));
        }
    }

    #[test]
    fn common_split_projection_is_feasible_and_optimal(c in prop::collection::vec(-1.0f64..3.0, 1..5), floor in 0.0f64..4.0) {
        let out = project_common_split(&c, floor);
        prop_assert!(out.iter().all(|v| *v >= 0.0));
        prop_assert!(out.iter().sum::<f64>() <= floor + 1e-12);
        // no feasible point sampled along the segment to a vertex is closer
        let dist = |a: &[f64]| a.iter().zip(&c).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let d0 = dist(&out);
        for k in 0..c.len() {
            let mut vertex = vec![0.0; c.len()];
            vertex[k] = floor;
            for t in [0.1, 0.5, 0.9, 1.0] {
                let q: Vec<f64> = out.iter().zip(&vertex).map(|(a, b)| a + t * (b - a)).collect();
                prop_assert!(dist(&q) >= d0 - 1e-9);
            }
            let zero = vec![0.0; c.len()];
            prop_assert!(dist(&zero) >= d0 - 1e-9);
        }
    }

    #[test]
    fn combiners_become_unit(z in prop::collection::vec(cx_vec(3), 1..4)) {
        let mut z = z;
        normalize_combiners(&mut z);
        for v in &z {
            let n: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spacing_repair_separates_antennas(pts in prop::collection::vec((-0.02f64..0.02, -0.02f64..0.02), 2..5)) {
        let mut ants: Vec<Position2D> = pts.iter().map(|&(x, y)| Position2D::new(x, y)).collect();
        let ok = repair_spacing(&mut ants, 0.005, 0.02);
        prop_assert!(ants.iter().all(|p| p.x.abs() <= 0.02 && p.y.abs() <= 0.02));
        if ok {
            for i in 0..ants.len() {
                for j in i + 1..ants.len() {
                    prop_assert!(ants[i].distance(ants[j]) >= 0.005);
                }
            }
        }
    }
}

#[test]
fn negative_power_is_an_error() {
    assert!(project_ue_power(&[0.1, -0.2, 0.3], &[1.0, 1.0]).is_err());
    assert!(project_ue_power(&[0.1, 0.2], &[1.0, 1.0]).is_err());
}

#[test]
fn zero_beamformer_is_reported() {
    let (out, how) = project_bs_beamformer(&[Cx::zero(); 4], 1.0, false);
    assert_eq!(how, BeamformerProjection::Degenerate);
    assert!(out.iter().all(|c| c.norm_sqr() == 0.0));
}

#[test]
fn common_split_hand_cases() {
    assert_eq!(project_common_split(&[0.2, 0.3], 1.0), vec![0.2, 0.3]);
    let out = project_common_split(&[1.0, 1.0], 1.0);
    assert!((out[0] - 0.5).abs() < 1e-15 && (out[1] - 0.5).abs() < 1e-15);
    assert_eq!(project_common_split(&[2.0, -1.0], 1.0), vec![1.0, 0.0]);
    assert_eq!(project_common_split(&[0.4, 0.4], -2.0), vec![0.0, 0.0]);
}

#[test]
fn four_antennas_fit_in_the_default_region() {
    let mut ants = vec![Position2D::new(0.0, 0.0); 4];
    assert!(repair_spacing(&mut ants, 0.005, 0.02));
}
