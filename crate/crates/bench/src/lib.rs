//! Fixtures shared by the benchmarks.

use qre_core::trajectory::{Correspondence, Point};
use qre_core::{generate, CovariateSpec, GameKind, Observation, PayoffParams};

/// Moderately coupled parameters with a unique equilibrium.
pub fn params() -> PayoffParams {
    PayoffParams::from_theta([0.35, -0.45, 0.2, 0.6, -0.4, 0.15, 0.3], 5.0)
}

pub fn dataset(kind: GameKind, n: usize, seed: u64) -> Vec<Observation> {
    generate(&params(), &CovariateSpec::default_for(kind), n, seed)
        .expect("benchmark dataset")
        .into_iter()
        .map(|r| r.observation)
        .collect()
}

/// Four image/world pairs resembling an oblique intersection camera.
pub fn correspondences() -> Vec<Correspondence> {
    let image = [
        [102.0, 215.0],
        [618.0, 190.0],
        [700.0, 560.0],
        [40.0, 600.0],
    ];
    let world = [[0.0, 0.0], [12.0, 0.0], [12.0, 9.0], [0.0, 9.0]];
    image
        .iter()
        .zip(&world)
        .map(|(&i, &w)| Correspondence {
            image: Point::from(i),
            world: Point::from(w),
        })
        .collect()
}
