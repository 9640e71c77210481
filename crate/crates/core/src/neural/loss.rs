/// Smooth-L1 (Huber with unit threshold) of `prediction - target`.
pub fn smooth_l1(prediction: f64, target: f64) -> f64 {
    let x = prediction - target;
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

/// d smooth_l1 / d prediction.
pub fn smooth_l1_grad(prediction: f64, target: f64) -> f64 {
    let x = prediction - target;
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert_eq!(smooth_l1(0.0, 0.0), 0.0);
        assert_eq!(smooth_l1(0.5, 0.0), 0.125);
        assert_eq!(smooth_l1(2.0, 0.0), 1.5);
        assert_eq!(smooth_l1(3.0, 5.0), 1.5);
    }

    #[test]
    fn continuous_at_unit_error() {
        for side in [1.0, -1.0] {
            let quad = 0.5 * side * side;
            let lin = f64::abs(side) - 0.5;
            assert_eq!(quad, lin);
            assert_eq!(smooth_l1(side, 0.0), 0.5);
            // Derivative of both branches at |x| = 1 is ±1.
            assert_eq!(smooth_l1_grad(side, 0.0), side);
            let just_inside = side * (1.0 - 1e-13);
            assert!((smooth_l1_grad(just_inside, 0.0) - side).abs() < 1e-12);
            assert!((smooth_l1(just_inside, 0.0) - 0.5).abs() < 1e-12);
        }
    }
}
