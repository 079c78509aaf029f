//! Ball measures in `ℝ^N`.

use std::f64::consts::PI;

/// Volume `ω_N = π^{N/2} / Γ(N/2 + 1)` of the unit ball in `ℝ^N`.
pub fn unit_ball_volume(n: u32) -> f64 {
    // ω_0 = 1, ω_1 = 2, ω_N = 2π/N · ω_{N-2}
    let even = n.is_multiple_of(2);
    let mut omega = if even { 1.0 } else { 2.0 };
    let mut k = if even { 2 } else { 3 };
    while k <= n {
        omega *= 2.0 * PI / k as f64;
        k += 2;
    }
    omega
}

/// Surface area `N ω_N` of the unit sphere in `ℝ^N`.
pub fn unit_sphere_area(n: u32) -> f64 {
    n as f64 * unit_ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_dimensions() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
    }
}
