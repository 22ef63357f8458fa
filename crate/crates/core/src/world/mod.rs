//! Synthetic generative world.
//!
//! Latents are standard normal in `R^d`. A frozen, seeded decoder maps them to
//! `n` pixels in `(0, 1)`. Attribute `i` is the half-space `w_i . z + b_i > 0`
//! with unit-norm, mutually orthogonal `w_i`, which makes the attributes
//! independent under the prior and gives an exact minimal-norm
//! counterfactual: project onto the plane `w_i . z + b_i = +/- margin`.

pub mod pgm;

use std::ops::Deref;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numkit::{Activation, DenseNet};
use crate::persist;
use crate::rng::{self, Domain};

pub const WORLD_FORMAT: &str = "cflens-world-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(pub Vec<f64>);

impl Deref for LatentVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageVector(pub Vec<f64>);

impl Deref for ImageVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Attribute half-space `w . z + b > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Plane {
    pub fn score(&self, z: &[f64]) -> f64 {
        self.w.iter().zip(z).map(|(w, z)| w * z).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub margin: f64,
    pub hidden: usize,
    /// Plane offsets `b_i`; empty means all zero.
    #[serde(default)]
    pub offsets: Vec<f64>,
}

impl WorldConfig {
    pub fn new(d: usize, m: usize, n: usize, seed: u64) -> Self {
        Self {
            d,
            m,
            n,
            seed,
            margin: 0.5,
            hidden: 32,
            offsets: Vec::new(),
        }
    }

    /// The reference world used by the acceptance runs.
    pub fn reference() -> Self {
        Self::new(16, 4, 64, 1)
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Self {
        self.offsets = offsets;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorldFile", into = "WorldFile")]
pub struct World {
    d: usize,
    m: usize,
    n: usize,
    seed: u64,
    margin: f64,
    planes: Vec<Plane>,
    decoder: DenseNet,
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    format: String,
    d: usize,
    m: usize,
    n: usize,
    seed: u64,
    margin: f64,
    planes: Vec<Plane>,
    decoder: DenseNet,
}

impl From<World> for WorldFile {
    fn from(w: World) -> Self {
        WorldFile {
            format: WORLD_FORMAT.to_owned(),
            d: w.d,
            m: w.m,
            n: w.n,
            seed: w.seed,
            margin: w.margin,
            planes: w.planes,
            decoder: w.decoder,
        }
    }
}

impl TryFrom<WorldFile> for World {
    type Error = Error;

    fn try_from(f: WorldFile) -> Result<Self> {
        if f.format != WORLD_FORMAT {
            return Err(Error::Format {
                expected: WORLD_FORMAT,
                found: f.format,
            });
        }
        World::from_parts(f.seed, f.margin, f.planes, f.decoder).and_then(|w| {
            if (w.d, w.m, w.n) == (f.d, f.m, f.n) {
                Ok(w)
            } else {
                Err(Error::invalid(format!(
                    "world header declares d={}, m={}, n={} but its contents have d={}, m={}, n={}",
                    f.d, f.m, f.n, w.d, w.m, w.n
                )))
            }
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

impl World {
    pub fn generate(cfg: &WorldConfig) -> Result<Self> {
        let WorldConfig {
            d, m, n, hidden, ..
        } = *cfg;
        if d == 0 || m == 0 || n == 0 || hidden == 0 {
            return Err(Error::invalid("d, m, n and hidden must all be positive"));
        }
        if m > d {
            return Err(Error::invalid(format!(
                "m = {m} attributes need m <= d orthonormal planes, but d = {d}"
            )));
        }
        if !(cfg.margin > 0.0 && cfg.margin.is_finite()) {
            return Err(Error::invalid("margin must be positive and finite"));
        }
        let offsets = if cfg.offsets.is_empty() {
            vec![0.0; m]
        } else {
            check_dim("plane offsets", m, cfg.offsets.len())?;
            cfg.offsets.clone()
        };

        // Gram-Schmidt over Gaussian draws; a draw that collapses is replaced.
        let mut rng = rng::stream(Domain::Planes, cfg.seed, 0);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        while basis.len() < m {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            for u in &basis {
                let proj = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(x, u)| *x -= proj * u);
            }
            if normalize(&mut v) > 1e-6 {
                basis.push(v);
            }
        }
        let planes = basis
            .into_iter()
            .zip(offsets)
            .map(|(w, b)| Plane { w, b })
            .collect();

        let decoder = DenseNet::new(
            cfg.seed,
            &[d, hidden, n],
            &[Activation::Tanh, Activation::Sigmoid],
        )?;
        Self::from_parts(cfg.seed, cfg.margin, planes, decoder)
    }

    /// Assembles a world from explicit parts. Plane normals are rescaled to unit length.
    pub fn from_parts(
        seed: u64,
        margin: f64,
        mut planes: Vec<Plane>,
        decoder: DenseNet,
    ) -> Result<Self> {
        let d = decoder.in_dim();
        let n = decoder.out_dim();
        if planes.is_empty() {
            return Err(Error::invalid("world needs at least one attribute plane"));
        }
        if decoder.layers().last().map(|l| l.act) != Some(Activation::Sigmoid) {
            return Err(Error::invalid("decoder must end in a sigmoid layer"));
        }
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::invalid("margin must be positive and finite"));
        }
        for (i, p) in planes.iter_mut().enumerate() {
            check_dim("plane normal", d, p.w.len())?;
            let norm = dot(&p.w, &p.w).sqrt();
            if !p.b.is_finite() || !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::invalid(format!("plane {i} is degenerate")));
            }
            // already-unit normals are kept bit-for-bit so checkpoints round-trip
            if (norm - 1.0).abs() > 1e-12 {
                normalize(&mut p.w);
            }
        }
        Ok(Self {
            d,
            m: planes.len(),
            n,
            seed,
            margin,
            planes,
            decoder,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn decoder(&self) -> &DenseNet {
        &self.decoder
    }

    /// Latent number `index` of the stream keyed by `seed`.
    pub fn sample_latent(&self, seed: u64, index: u64) -> LatentVector {
        let mut rng = rng::stream(Domain::Latent, seed, index);
        LatentVector((0..self.d).map(|_| rng.sample(StandardNormal)).collect())
    }

    pub fn sample_latents(&self, seed: u64, count: usize) -> Result<Vec<LatentVector>> {
        if count == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        Ok((0..count as u64)
            .map(|i| self.sample_latent(seed, i))
            .collect())
    }

    fn plane(&self, i: usize) -> Result<&Plane> {
        self.planes.get(i).ok_or_else(|| {
            Error::invalid(format!("attribute index {i} out of range 0..{}", self.m))
        })
    }

    /// Signed score `w_i . z + b_i`.
    pub fn attribute_score(&self, z: &LatentVector, i: usize) -> Result<f64> {
        check_dim("latent", self.d, z.len())?;
        Ok(self.plane(i)?.score(z))
    }

    /// Ground truth: `w_i . z + b_i > 0`; an exact zero is `false`.
    pub fn true_attribute(&self, z: &LatentVector, i: usize) -> Result<bool> {
        Ok(self.attribute_score(z, i)? > 0.0)
    }

    pub fn true_attributes(&self, z: &LatentVector) -> Result<Vec<bool>> {
        (0..self.m).map(|i| self.true_attribute(z, i)).collect()
    }

    pub fn decode(&self, z: &LatentVector) -> Result<ImageVector> {
        check_dim("latent", self.d, z.len())?;
        self.decoder.eval(z).map(ImageVector)
    }

    /// Gradient of `grad_pixels . decode(z)` w.r.t. `z`.
    pub fn decode_backward(&self, z: &LatentVector, grad_pixels: &[f64]) -> Result<Vec<f64>> {
        check_dim("latent", self.d, z.len())?;
        let (_, tape) = self.decoder.forward(z)?;
        self.decoder.input_gradient(&tape, grad_pixels)
    }

    /// Minimal-norm latent with `w_i . z' + b_i = +margin` (target) or `-margin`.
    pub fn oracle_counterfactual(
        &self,
        z: &LatentVector,
        i: usize,
        target: bool,
    ) -> Result<LatentVector> {
        check_dim("latent", self.d, z.len())?;
        let plane = self.plane(i)?;
        let side = if target { self.margin } else { -self.margin };
        let step = side - plane.score(z);
        Ok(LatentVector(
            z.iter().zip(&plane.w).map(|(z, w)| z + step * w).collect(),
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        persist::read_json(path)
    }
}
