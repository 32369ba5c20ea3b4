//! Property tests for the repo-wide conventions and persistence formats.

use cert_align::geom::{
    geodesic_angle_deg, kron3, unvectorize, vectorize, RotationMatrix,
};
use cert_align::io::{
    parse_run_records, render_run_records, windows, RunRecord, WindowSpec,
};
use cert_align::model::Epoch;
use nalgebra::Vector3;
use proptest::prelude::*;

fn finite(range: f64) -> impl Strategy<Value = f64> {
    -range..range
}

fn rotation_strategy() -> impl Strategy<Value = RotationMatrix<f64>> {
    (finite(3.0), finite(3.0), finite(3.0))
        .prop_map(|(x, y, z)| RotationMatrix::from_scaled_axis(Vector3::new(x, y, z)))
}

proptest! {
    /// kron3(v, n) . vec(R) = n' R v for every rotation and vector pair.
    #[test]
    fn kronecker_vectorization_identity(
        r in rotation_strategy(),
        v in (finite(10.0), finite(10.0), finite(10.0)),
        n in (finite(1.0), finite(1.0), finite(1.0)),
    ) {
        let v = Vector3::new(v.0, v.1, v.2);
        let n = Vector3::new(n.0, n.1, n.2);
        prop_assume!(n.norm() > 1e-3);
        let n = n.normalize();
        let lhs = kron3(&v, &n).dot(&r.to_vec9());
        let rhs = n.dot(&r.rotate(&v));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    /// Vectorization round trip is exact.
    #[test]
    fn vectorize_round_trip(r in rotation_strategy()) {
        let back = unvectorize(&vectorize(r.matrix()));
        prop_assert_eq!(back, *r.matrix());
    }

    /// The geodesic metric is symmetric and vanishes only at equality.
    #[test]
    fn geodesic_symmetry(a in rotation_strategy(), b in rotation_strategy()) {
        let d_ab = geodesic_angle_deg(&a, &b);
        let d_ba = geodesic_angle_deg(&b, &a);
        prop_assert!((d_ab - d_ba).abs() < 1e-6);
        prop_assert!(d_ab >= 0.0 && d_ab <= 180.0 + 1e-9);
        prop_assert!(geodesic_angle_deg(&a, &a) < 1e-6);
    }

    /// Stride-equals-length windows tile the epoch list without loss or
    /// duplication, for arbitrary sample rates and spans.
    #[test]
    fn window_tiling_preserves_epochs(
        count in 1usize..400,
        rate_hz in 1u32..10,
        length in 1.0f64..200.0,
    ) {
        let dt = 1.0 / rate_hz as f64;
        let epochs: Vec<Epoch<f64>> = (0..count)
            .map(|k| Epoch {
                time_s: k as f64 * dt,
                receiver_pos: Vector3::new(6.4e6, 0.0, 0.0),
                body_velocity: Vector3::new(1.0, 0.0, 0.0),
                observations: vec![],
            })
            .collect();
        let spec = WindowSpec { length_s: length, stride_s: length, downsample_factor: 1 };
        let slices: Vec<_> = windows(&epochs, &spec).collect();
        let total: usize = slices.iter().map(|s| s.len()).sum();
        prop_assert_eq!(total, epochs.len());
        let times: Vec<f64> = slices.iter().flatten().map(|e| e.time_s).collect();
        let original: Vec<f64> = epochs.iter().map(|e| e.time_s).collect();
        prop_assert_eq!(times, original);
    }

    /// Run records survive the CSV round trip bit-exactly, including
    /// subnormal-ish magnitudes and missing optional fields.
    #[test]
    fn run_record_csv_round_trip(
        err in prop::option::of(-1e3f64..1e3),
        cost in 0.0f64..1e6,
        tiny in -1e-15f64..1e-15,
        certified in prop::option::of(any::<bool>()),
    ) {
        let record = RunRecord {
            method: "sdp".into(),
            window_start_s: 0.0,
            window_end_s: 120.0,
            rotation: [tiny, 0.0, 1.0, -1.0, tiny * 0.5, 0.0, 0.25, 0.0, 1.0],
            clock_drift_mps: cost - 3.0,
            yaw_error_deg: err,
            geodesic_error_deg: err.map(f64::abs),
            certified,
            eig_ratio: Some(tiny.abs()),
            cost,
            dual_value: Some(cost - tiny),
            wall_time_s: 0.125,
            status: "ok".into(),
        };
        let text = render_run_records(std::slice::from_ref(&record), None);
        let back = parse_run_records(&text).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back[0], &record);
    }
}
