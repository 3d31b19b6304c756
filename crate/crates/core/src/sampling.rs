//! Seeded sampling of chart points inside the validity region.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BALL_RADIUS: f64 = 0.8;
pub const W_RADIUS: f64 = 2.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A point of `C^n` (as `2n` reals) drawn from the ball of the given radius.
pub fn complex_ball(rng: &mut impl Rng, n: usize, radius: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    loop {
        let v: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-radius..radius)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() <= radius * radius {
            return v;
        }
    }
}

/// Lower edge of the admissible radial interval for deformation `k`.
pub fn radial_floor(k: u32) -> f64 {
    (2.0 * k as f64).sqrt() + 0.5
}

pub fn radial(rng: &mut impl Rng, k: u32) -> f64 {
    let lo = radial_floor(k);
    rng.gen_range(lo..lo + 2.5)
}

pub fn angle(rng: &mut impl Rng) -> f64 {
    rng.gen_range(0.0..std::f64::consts::TAU)
}

/// Cone chart point `(X, r, θ)`.
pub fn cone_point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut p = complex_ball(rng, n, BALL_RADIUS);
    p.push(rng.gen_range(0.5..3.0));
    p.push(angle(rng));
    p
}

/// Chart point `(X, r, w, angle)` shared by the rigid and twisted charts.
pub fn fibre_point(rng: &mut impl Rng, n: usize, k: u32) -> Vec<f64> {
    let mut p = complex_ball(rng, n, BALL_RADIUS);
    p.push(radial(rng, k));
    p.extend(complex_ball(rng, n + 1, W_RADIUS));
    p.push(angle(rng));
    p
}

/// A random real vector with entries in `[-1, 1)`.
pub fn direction(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_respect_region() {
        let mut r = rng(3);
        for _ in 0..200 {
            let p = fibre_point(&mut r, 2, 2);
            let x2: f64 = p[..4].iter().map(|x| x * x).sum();
            assert!(x2 <= BALL_RADIUS * BALL_RADIUS);
            assert!(p[4] >= 2.5 && p[4] < 5.0);
            let w2: f64 = p[5..11].iter().map(|x| x * x).sum();
            assert!(w2 <= W_RADIUS * W_RADIUS);
        }
    }

    #[test]
    fn seeding_is_deterministic() {
        let a = fibre_point(&mut rng(9), 1, 1);
        let b = fibre_point(&mut rng(9), 1, 1);
        assert_eq!(a, b);
    }
}
