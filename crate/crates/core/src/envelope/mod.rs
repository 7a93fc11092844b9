//! Regional convex-hull bounds on Legendre-Spline trajectories and
//! continuous-time constraint checks built on them.

mod constraint;
mod hull;
mod violation;

pub use constraint::{ConstraintKind, ConstraintSpec, LateralSlip, VertexConstraint};
pub use hull::{build_hull_maps, equidistant_hull_maps, regional_extrema, HullMaps, Interval};
pub(crate) use violation::vertex_max;
pub use violation::{check_violations, violation_statistics, ViolationEntry, ViolationReport, ViolationStats};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::legendre::{CoefficientLayout, TrajectoryBundle};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn layout() -> CoefficientLayout {
        CoefficientLayout::equidistant(2, 3, 2.0, &["v", "delta"], &[])
    }

    #[test]
    fn zero_trajectories_are_clean() {
        let l = layout();
        let b = TrajectoryBundle::from_vector(&l, &vec![0.0; l.len()]).unwrap();
        let maps = equidistant_hull_maps(3, 4).unwrap();
        let c = vec![
            ConstraintSpec::bounds("v_box", "v", -1.0, 1.0).unwrap(),
            ConstraintSpec::bounds("d_box", "delta", -1.0, 1.0).unwrap(),
        ];
        let r = check_violations(&b, &c, &maps, 0.0, 3).unwrap();
        assert!(!r.violates());
        assert_eq!(r.entries.len(), 2 * 2 * 4);
    }

    #[test]
    fn hinge_equals_hull_overshoot() {
        // single section, linear velocity rising from 0.8 to 1.2
        let l = CoefficientLayout::equidistant(1, 1, 1.0, &["v"], &[]);
        let b = TrajectoryBundle::from_vector(&l, &[1.0, 0.2]).unwrap();
        let maps = build_hull_maps(1, &[-1.0, 0.0, 1.0]).unwrap();
        let c = vec![ConstraintSpec::bounds("v_max", "v", 0.0, 1.0).unwrap()];
        let r = check_violations(&b, &c, &maps, 0.0, 0).unwrap();
        // region 0 touches the bound; only the rounding slack may show
        assert!(r.entries[0].magnitude < 1e-14);
        assert!((r.entries[1].magnitude - 0.2).abs() < 1e-12);
        assert!(r.violates());
    }

    #[test]
    fn unknown_signal_is_lookup_error() {
        let l = layout();
        let b = TrajectoryBundle::from_vector(&l, &vec![0.0; l.len()]).unwrap();
        let maps = equidistant_hull_maps(3, 2).unwrap();
        let c = vec![ConstraintSpec::bounds("x", "nope", 0.0, 1.0).unwrap()];
        assert!(matches!(
            check_violations(&b, &c, &maps, 0.0, 0),
            Err(Error::UnknownSignal(_))
        ));
        assert!(ConstraintSpec::bounds("bad", "v", 1.0, 0.0).is_err());
    }

    #[test]
    fn infinite_tolerance_silences_everything() {
        let l = layout();
        let b = TrajectoryBundle::from_vector(&l, &vec![5.0; l.len()]).unwrap();
        let maps = equidistant_hull_maps(3, 4).unwrap();
        let c = vec![
            ConstraintSpec::bounds("v", "v", -1.0, 1.0).unwrap(),
            ConstraintSpec::vertex("slip", Arc::new(LateralSlip::new("v", "delta", 0.1)), 0.0),
        ];
        let r = check_violations(&b, &c, &maps, f64::INFINITY, 0).unwrap();
        assert!(!r.violates());
    }

    #[test]
    fn nonlinear_hull_check_is_conservative_against_dense_sampling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let l = layout();
        let maps = equidistant_hull_maps(3, 4).unwrap();
        let limit = 0.6;
        let c = vec![ConstraintSpec::vertex(
            "slip",
            Arc::new(LateralSlip::new("v", "delta", limit)),
            0.0,
        )];
        let mut agree = 0;
        for trial in 0..200 {
            let coeffs: Vec<f64> = (0..l.len())
                .map(|i| {
                    let scale = if i % 4 == 0 { 1.0 } else { 0.3 };
                    scale * rng.random_range(-1.0..1.0)
                })
                .collect();
            let b = TrajectoryBundle::from_vector(&l, &coeffs).unwrap();
            let r = check_violations(&b, &c, &maps, 0.0, trial).unwrap();
            let v = b.signal("v").unwrap();
            let d = b.signal("delta").unwrap();
            let sampled = (0..=10_000).any(|i| {
                let t = -1.0 + 2.0 * i as f64 / 10_000.0;
                let (vv, dd) = (v.eval(t).unwrap(), d.eval(t).unwrap());
                vv * vv * dd.abs() - limit > 0.0
            });
            if sampled {
                assert!(r.violates(), "hull check missed a sampled violation");
            }
            if sampled == r.violates() {
                agree += 1;
            }
        }
        assert!(agree > 100);
    }

    #[test]
    fn statistics_examples() {
        let clean = ViolationReport::default();
        let s = violation_statistics(&[clean.clone(), clean.clone()]).unwrap();
        assert_eq!((s.count, s.total_magnitude, s.rate), (0, 0.0, 0.0));

        let mut bad = clean.clone();
        bad.entries.push(ViolationEntry {
            instance_id: 1,
            constraint: "c".into(),
            section: 0,
            region: 0,
            magnitude: 0.5,
        });
        let s = violation_statistics(&[bad, clean.clone(), clean.clone(), clean]).unwrap();
        assert_eq!(s.rate, 0.25);
        assert!(matches!(violation_statistics(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn reference_scale_reduction() {
        let resafe = ViolationStats::from_counts(556, 57632, 1.0);
        let mse = ViolationStats::from_counts(8113, 57632, 1.0);
        assert!((resafe.rate - 0.00965).abs() < 5e-6);
        assert!((mse.rate - 0.1408).abs() < 5e-5);
        let (count_red, _) = resafe.reduction_vs(&mse);
        assert!((count_red - 0.931).abs() < 5e-4);
    }

    #[test]
    fn summary_csv_has_header() {
        let mut buf = Vec::new();
        ViolationStats::from_counts(1, 4, 0.5)
            .write_summary_csv(&mut buf)
            .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("count,total_magnitude,rate\n1,"));
    }
}
