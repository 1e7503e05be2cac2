#![allow(dead_code)]

use cislunar_core::catalog::{OrbitFamily, OrbitRecord};
use cislunar_core::StateVector;

/// Optimization target set: family, period (TU), initial state.
pub const OPTIMIZATION_SET: &[(&str, Option<f64>, [f64; 6])] = &[
    ("BNO", Some(3.72656), [0.90216, 0.01025, 0.13052, 0.01993, -0.04143, 0.12319]),
    ("BNO", Some(2.75985), [1.01814, -0.02810, 0.13269, -0.04132, -0.04910, -0.22452]),
    ("BNO", Some(2.75700), [1.01044, -0.03199, 0.10003, -0.05800, -0.01358, -0.32851]),
    ("BSO", Some(3.72656), [1.07756, 0.00976, -0.12776, 0.03207, 0.01846, 0.15752]),
    ("BSO", Some(2.75985), [1.02520, -0.00984, -0.17047, -0.01205, -0.07941, 0.06354]),
    ("BSO", Some(2.75700), [1.01735, 0.02667, -0.13827, 0.03825, -0.05404, -0.20711]),
    ("L1NHO", Some(2.07099), [0.91645, -0.08732, 0.14063, -0.12360, 0.11120, 0.22361]),
    ("L1NHO", Some(2.15460), [0.93444, 0.10611, 0.09408, 0.15246, 0.02387, -0.29486]),
    ("L1NHO", Some(2.23455), [0.97875, 0.07001, -0.01981, 0.12094, -0.37603, -0.35903]),
    ("L1SHO", Some(2.07099), [0.89220, 0.04742, -0.18274, 0.06385, 0.19205, 0.10694]),
    ("L1SHO", Some(2.15460), [0.97850, 0.07201, 0.00754, 0.13248, -0.33956, 0.39185]),
    ("L1SHO", Some(2.23455), [0.91328, -0.10537, -0.12101, -0.13910, 0.09544, -0.24442]),
    ("L2NHO", Some(1.38944), [1.00411, -0.02869, 0.12826, -0.04318, -0.04435, -0.24523]),
    ("L2NHO", Some(2.17970), [1.06334, 0.04467, 0.18940, 0.04864, -0.16732, 0.09728]),
    ("L2NHO", Some(2.38349), [1.08295, 0.00159, 0.20231, 0.00162, -0.20101, 0.00288]),
    ("L2SHO", Some(1.38944), [0.98882, -0.01805, -0.01252, -0.07145, 0.42200, 0.90381]),
    ("L2SHO", Some(2.17970), [1.01834, -0.09432, -0.08417, -0.11375, 0.01927, 0.32480]),
    ("L2SHO", Some(2.38349), [1.06990, -0.06801, -0.17847, -0.07035, -0.16299, 0.13273]),
    ("R1:1O", Some(6.26635), [-0.12773, -0.89888, 0.0, -0.10385, 0.87765, 0.0]),
    ("R1:1O", Some(6.27397), [0.30808, -1.37988, 0.0, -1.07683, 0.26113, 0.0]),
    ("R1:1O", Some(6.27999), [0.22787, -1.39504, 0.0, -1.08227, 0.33668, 0.0]),
    ("R2:1O", Some(5.88685), [-0.53447, 0.06119, 0.0, -0.07469, -0.94045, 0.0]),
    ("R2:1O", Some(6.23346), [-0.27953, -0.31375, 0.0, 0.62241, -1.26808, 0.0]),
    ("R2:1O", Some(6.27998), [-0.22095, 1.01044, 0.0, 0.43976, 0.32928, 0.0]),
    ("R4:1O", Some(6.27997), [0.03900, -0.36447, 0.0, 1.15062, 0.70232, 0.0]),
    ("R4:1O", Some(6.27549), [-0.43950, -0.44017, 0.0, 0.21767, -0.11141, 0.0]),
    ("R4:1O", Some(6.27946), [-0.45983, 0.44568, 0.0, -0.31789, 0.22943, 0.0]),
    ("DRO", Some(0.15382), [0.98707, 0.01970, 0.0, 0.80343, 0.03198, 0.0]),
    ("DRO", Some(5.82922), [0.94147, 0.77868, 0.0, 0.58313, -0.17725, 0.0]),
    ("DRO", Some(6.27993), [0.20056, 1.38560, 0.0, 1.06003, 0.36870, 0.0]),
    ("LPEO", Some(1.34333), [1.06653, 0.00080, 0.0, -0.00294, 0.30862, 0.0]),
    ("LPEO", Some(1.67485), [1.04983, -0.06794, 0.0, 0.22149, 0.05401, 0.0]),
    ("LPEO", Some(2.56988), [1.12607, 0.02203, 0.0, -0.01593, 0.08709, 0.0]),
    ("LPWO", Some(0.19790), [0.98893, -0.02245, 0.0, 0.71085, 0.03489, 0.0]),
    ("LPWO", Some(1.20460), [0.92649, 0.04880, 0.0, -0.19084, -0.20955, 0.0]),
    ("LPWO", Some(2.14657), [0.87494, -0.04367, 0.0, 0.08386, -0.03495, 0.0]),
    ("L1TT", None, [0.0, -0.28642, 0.03740, 1.93948, -0.26854, -0.32641]),
    ("L1TT", None, [0.0, -0.57053, 0.04766, 0.83103, -0.06703, -0.32023]),
    ("L1TT", None, [0.0, -0.36456, 0.03514, 1.53129, -0.19889, -0.40470]),
];

pub fn optimization_records() -> Vec<OrbitRecord> {
    OPTIMIZATION_SET
        .iter()
        .enumerate()
        .map(|(i, (fam, period, ic))| OrbitRecord {
            id: format!("{}", i + 1),
            family: fam.parse::<OrbitFamily>().unwrap(),
            ic: StateVector::from_slice(ic),
            period: *period,
            stability_index: period.map(|_| 1.0),
        })
        .collect()
}

/// Central finite-difference Jacobian of `f` at `x`.
pub fn central_difference<const M: usize, const N: usize>(
    f: impl Fn(&[f64; N]) -> [f64; M],
    x: &[f64; N],
    h: f64,
) -> [[f64; N]; M] {
    let mut out = [[0.0; N]; M];
    for j in 0..N {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for i in 0..M {
            out[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    out
}

/// Largest entrywise error relative to the largest entry of `reference`.
pub fn relative_error<const M: usize, const N: usize>(got: &[[f64; N]; M], reference: &[[f64; N]; M]) -> f64 {
    let scale = reference.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut worst = 0.0_f64;
    for i in 0..M {
        for j in 0..N {
            worst = worst.max((got[i][j] - reference[i][j]).abs());
        }
    }
    worst / scale
}
