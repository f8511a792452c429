use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use super::format::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstanceKind {
    /// `A = I`, vectors are random cube vertices.
    Cube,
    /// `A = I`, vectors uniform in the cube.
    SpencerRandom,
    /// Random sign generators with unit rows, `v_i = Aᵀu_i` for `u_i` uniform in the cube.
    RandomZonotope,
    /// Like `RandomZonotope`, with consecutive vectors equal in pairs.
    Duplicated,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 4] = [
        InstanceKind::Cube,
        InstanceKind::SpencerRandom,
        InstanceKind::RandomZonotope,
        InstanceKind::Duplicated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::Cube => "cube",
            InstanceKind::SpencerRandom => "spencer-random",
            InstanceKind::RandomZonotope => "random-zonotope",
            InstanceKind::Duplicated => "duplicated",
        }
    }

    /// Generators are the identity, so `m = d`.
    pub fn is_cube_like(self) -> bool {
        matches!(self, InstanceKind::Cube | InstanceKind::SpencerRandom)
    }

    pub fn default_m(self, d: usize) -> usize {
        if self.is_cube_like() {
            d
        } else {
            4 * d
        }
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstanceKind {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InstanceKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GenerateError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("unknown instance kind `{0}` (expected cube, spencer-random, random-zonotope or duplicated)")]
    UnknownKind(String),
    #[error("need 1 <= n <= d <= m, got d={d} m={m} n={n}")]
    Sizes { d: usize, m: usize, n: usize },
    #[error("{kind} instances have m = d, got d={d} m={m}")]
    CubeGenerators { kind: InstanceKind, d: usize, m: usize },
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn uniform_cube<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..=1.0)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

fn sign_generators<R: Rng + ?Sized>(rng: &mut R, m: usize, d: usize) -> DMatrix<f64> {
    let scale = 1.0 / (d as f64).sqrt();
    let data: Vec<f64> = (0..m * d).map(|_| sign(rng) * scale).collect();
    DMatrix::from_row_slice(m, d, &data)
}

/// Random instance of the given kind. Entries are drawn in row-major order.
pub fn generate_instance<R: Rng + ?Sized>(
    kind: InstanceKind,
    d: usize,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<Instance, GenerateError> {
    if n == 0 || n > d || d > m {
        return Err(GenerateError::Sizes { d, m, n });
    }
    if kind.is_cube_like() && m != d {
        return Err(GenerateError::CubeGenerators { kind, d, m });
    }
    let comments = vec![format!("kind={kind} d={d} m={m} n={n}")];
    let inst = match kind {
        InstanceKind::Cube => {
            let data: Vec<f64> = (0..n * d).map(|_| sign(rng)).collect();
            Instance {
                comments,
                a: DMatrix::identity(d, d),
                v: DMatrix::from_row_slice(n, d, &data),
                u: None,
            }
        }
        InstanceKind::SpencerRandom => Instance {
            comments,
            a: DMatrix::identity(d, d),
            v: uniform_cube(rng, n, d),
            u: None,
        },
        InstanceKind::RandomZonotope => {
            let a = sign_generators(rng, m, d);
            let u = uniform_cube(rng, n, m);
            Instance {
                comments,
                v: &u * &a,
                a,
                u: Some(u),
            }
        }
        InstanceKind::Duplicated => {
            let a = sign_generators(rng, m, d);
            let base = uniform_cube(rng, n.div_ceil(2), m);
            let mut u = DMatrix::zeros(n, m);
            for i in 0..n {
                u.set_row(i, &base.row(i / 2));
            }
            Instance {
                comments,
                v: &u * &a,
                a,
                u: Some(u),
            }
        }
    };
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zonotope::Zonotope;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_has_identity_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = generate_instance(InstanceKind::Cube, 3, 3, 3, &mut rng).unwrap();
        assert_eq!(inst.a, DMatrix::identity(3, 3));
        assert!(inst.v.iter().all(|x| x.abs() == 1.0));
    }

    #[test]
    fn random_zonotope_vectors_are_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = generate_instance(InstanceKind::RandomZonotope, 6, 24, 6, &mut rng).unwrap();
        let z = Zonotope::new(inst.a.clone()).unwrap();
        for i in 0..6 {
            let v: Vec<f64> = inst.v.row(i).iter().copied().collect();
            assert!(z.norm(&v).unwrap() <= 1.0 + 1e-9);
        }
        for r in 0..24 {
            assert!((inst.a.row(r).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_pairs_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = generate_instance(InstanceKind::Duplicated, 4, 8, 4, &mut rng).unwrap();
        assert_eq!(inst.v.row(0), inst.v.row(1));
        assert_eq!(inst.v.row(2), inst.v.row(3));
        assert_ne!(inst.v.row(0), inst.v.row(2));
    }

    #[test]
    fn parameter_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_instance(InstanceKind::Cube, 3, 3, 4, &mut rng).is_err());
        assert!(generate_instance(InstanceKind::RandomZonotope, 3, 2, 1, &mut rng).is_err());
        assert!(generate_instance(InstanceKind::SpencerRandom, 3, 6, 3, &mut rng).is_err());
        assert!("cubes".parse::<InstanceKind>().is_err());
        for k in InstanceKind::ALL {
            assert_eq!(k.name().parse::<InstanceKind>().unwrap(), k);
        }
    }
}
