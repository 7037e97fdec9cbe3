//! Two-dimensional Sobol sequence in Gray-code order.
//!
//! The first coordinate is the base-2 van der Corput sequence; the second uses
//! direction numbers `m = 1, 3, 5, 15, 17, 51, …` (recurrence `mₖ = 2mₖ₋₁ ⊕ mₖ₋₁`).

const BITS: usize = 32;

fn directions() -> [[u32; BITS]; 2] {
    let mut v = [[0u32; BITS]; 2];
    for k in 0..BITS {
        v[0][k] = 1u32 << (BITS - 1 - k);
    }
    v[1][0] = 1u32 << (BITS - 1);
    for k in 1..BITS {
        v[1][k] = v[1][k - 1] ^ (v[1][k - 1] >> 1);
    }
    v
}

/// Points `skip .. skip + n` of the sequence; point 0 is the origin.
pub fn sobol_2d(n: usize, skip: usize) -> Vec<[f64; 2]> {
    let v = directions();
    let scale = 1.0 / (1u64 << BITS) as f64;
    let mut state = [0u32; 2];
    let mut out = Vec::with_capacity(n);
    for i in 0..skip + n {
        if i > 0 {
            // flip the direction number of the lowest zero bit of i − 1
            let c = (!(i - 1)).trailing_zeros() as usize;
            state[0] ^= v[0][c];
            state[1] ^= v[1][c];
        }
        if i >= skip {
            out.push([state[0] as f64 * scale, state[1] as f64 * scale]);
        }
    }
    out
}

/// First coordinate only.
pub fn sobol_1d(n: usize, skip: usize) -> Vec<f64> {
    sobol_2d(n, skip).into_iter().map(|p| p[0]).collect()
}

/// Star discrepancy of a 2-D point set, evaluated on the boxes anchored at
/// the origin whose corners are point coordinates or 1. `O(n³)`.
pub fn star_discrepancy(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let mut xs: Vec<f64> = points.iter().map(|p| p[0]).chain([1.0]).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p[1]).chain([1.0]).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mut worst: f64 = 0.0;
    for &a in &xs {
        for &b in &ys {
            let open = points.iter().filter(|p| p[0] < a && p[1] < b).count() as f64;
            let closed = points.iter().filter(|p| p[0] <= a && p[1] <= b).count() as f64;
            let vol = a * b;
            worst = worst.max(vol - open / n).max(closed / n - vol);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn leading_points() {
        let p = sobol_2d(8, 0);
        assert_eq!(p[0], [0.0, 0.0]);
        assert_eq!(p[1], [0.5, 0.5]);
        assert_eq!(p[2], [0.75, 0.25]);
        assert_eq!(p[3], [0.25, 0.75]);
        assert_eq!(p[4], [0.375, 0.375]);
        assert_eq!(sobol_2d(3, 1), p[1..4].to_vec());
    }

    #[test]
    fn points_in_unit_square() {
        for p in sobol_2d(5000, 0) {
            assert!((0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1]));
        }
    }

    #[test]
    fn each_dyadic_block_is_a_permutation() {
        // the first 2^k points hit every 1/2^k interval once in each coordinate
        let k = 6;
        let p = sobol_2d(1 << k, 0);
        for d in 0..2 {
            let mut cells: Vec<usize> = p.iter().map(|q| (q[d] * (1 << k) as f64) as usize).collect();
            cells.sort();
            assert_eq!(cells, (0..1 << k).collect::<Vec<_>>());
        }
    }

    #[test]
    fn lower_discrepancy_than_random() {
        let sob = star_discrepancy(&sobol_2d(256, 0));
        let mut avg = 0.0;
        for seed in 0..10 {
            let mut rng = inversa_core::rng::seeded(seed);
            let pts: Vec<[f64; 2]> = (0..256).map(|_| [rng.gen(), rng.gen()]).collect();
            avg += star_discrepancy(&pts) / 10.0;
        }
        assert!(sob < avg, "sobol {sob} random {avg}");
    }
}
