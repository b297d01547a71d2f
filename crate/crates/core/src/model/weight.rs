use super::ModelError;

/// Battery term constant, cost·mAh.
pub const DEFAULT_K1: f64 = 5.0 * 2200.0;
/// Link term constant, cost per dBm.
pub const DEFAULT_K2: f64 = -5.0;

/// Directed edge cost between `u` and `v`:
/// `k1 * (1/rc_u + 1/rc_v) + k2 * avg_rssi`.
///
/// Low remaining capacity and weak links both raise the cost. A node with
/// no remaining capacity has no edges, so non-positive capacities are
/// rejected.
pub fn edge_weight(rc_u: f64, rc_v: f64, avg_rssi: f64, k1: f64, k2: f64) -> Result<f64, ModelError> {
    if !(rc_u > 0.0) {
        return Err(ModelError::NonPositiveCapacity(rc_u));
    }
    if !(rc_v > 0.0) {
        return Err(ModelError::NonPositiveCapacity(rc_v));
    }
    if !(avg_rssi < 0.0) {
        return Err(ModelError::NonNegativeRssi(avg_rssi));
    }
    if !(k1 > 0.0 && k2 < 0.0) {
        return Err(ModelError::BadConstants { k1, k2 });
    }
    Ok(k1 * (1.0 / rc_u + 1.0 / rc_v) + k2 * avg_rssi)
}

/// Undirected cost of a link: the higher of the two directed weights.
pub fn symmetrize(e_uv: f64, e_vu: f64) -> f64 {
    e_uv.max(e_vu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_evaluated_weights() {
        // 11000 * (2/2200) + 300 = 10 + 300
        assert!((edge_weight(2200.0, 2200.0, -60.0, DEFAULT_K1, DEFAULT_K2).unwrap() - 310.0).abs() < 1e-9);
        // 11000 * (1/1100 + 1/2200) + 425 = 15 + 425
        assert!((edge_weight(1100.0, 2200.0, -85.0, DEFAULT_K1, DEFAULT_K2).unwrap() - 440.0).abs() < 1e-9);
        assert!((edge_weight(2200.0, 2200.0, -85.0, DEFAULT_K1, DEFAULT_K2).unwrap() - 435.0).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(
            edge_weight(0.0, 2200.0, -60.0, DEFAULT_K1, DEFAULT_K2),
            Err(ModelError::NonPositiveCapacity(0.0))
        );
        assert!(edge_weight(2200.0, -1.0, -60.0, DEFAULT_K1, DEFAULT_K2).is_err());
        assert!(edge_weight(2200.0, 2200.0, 0.0, DEFAULT_K1, DEFAULT_K2).is_err());
        assert!(edge_weight(2200.0, 2200.0, -60.0, -1.0, DEFAULT_K2).is_err());
        assert!(edge_weight(2200.0, 2200.0, -60.0, DEFAULT_K1, 5.0).is_err());
        assert!(edge_weight(f64::NAN, 2200.0, -60.0, DEFAULT_K1, DEFAULT_K2).is_err());
    }

    #[test]
    fn symmetrize_examples() {
        assert_eq!(symmetrize(310.0, 440.0), 440.0);
        assert_eq!(symmetrize(435.0, 435.0), 435.0);
        assert_eq!(symmetrize(440.0, 310.0), 440.0);
    }

    proptest! {
        #[test]
        fn symmetrize_commutative_idempotent(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            prop_assert_eq!(symmetrize(a, b), symmetrize(b, a));
            prop_assert_eq!(symmetrize(a, a), a);
            prop_assert_eq!(symmetrize(symmetrize(a, b), b), symmetrize(a, b));
        }

        #[test]
        fn weight_monotonicity(
            rc_u in 1.0f64..2200.0,
            rc_v in 1.0f64..2200.0,
            extra in 0.0f64..1000.0,
            rssi in -100.0f64..-0.5,
            drop in 0.0f64..20.0,
        ) {
            let base = edge_weight(rc_u, rc_v, rssi, DEFAULT_K1, DEFAULT_K2).unwrap();
            prop_assert!(edge_weight(rc_u + extra, rc_v, rssi, DEFAULT_K1, DEFAULT_K2).unwrap() <= base);
            prop_assert!(edge_weight(rc_u, rc_v + extra, rssi, DEFAULT_K1, DEFAULT_K2).unwrap() <= base);
            prop_assert!(edge_weight(rc_u, rc_v, rssi - drop, DEFAULT_K1, DEFAULT_K2).unwrap() >= base);
        }
    }
}
