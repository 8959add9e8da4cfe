//! Euclidean Jordan algebra kernel for products of orthants, second-order
//! cones and PSD cones.
//!
//! Block families live behind the [`ConeBlock`] trait and are looked up by
//! name in a [`BlockRegistry`]. A [`Cone`] is an ordered list of blocks built
//! from a serializable [`ConeSpec`]. Elements are flat vectors; block `i`
//! occupies `offset(i)..offset(i) + dim(i)`.

mod orthant;
mod psd;
mod soc;
pub mod svec;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use orthant::Orthant;
pub use psd::Psd;
pub use soc::SecondOrder;

pub type Element = DVector<f64>;

/// One block of a cone: the registry name and its size parameter
/// (orthant length, second-order total dimension, or PSD matrix order).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub dim: usize,
}

impl BlockSpec {
    pub fn new(kind: &str, dim: usize) -> Self {
        BlockSpec { kind: kind.to_string(), dim }
    }
    pub fn orthant(n: usize) -> Self {
        Self::new("orthant", n)
    }
    pub fn soc(d: usize) -> Self {
        Self::new("soc", d)
    }
    pub fn psd(n: usize) -> Self {
        Self::new("psd", n)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConeSpec {
    pub blocks: Vec<BlockSpec>,
}

impl ConeSpec {
    pub fn new(blocks: Vec<BlockSpec>) -> Self {
        ConeSpec { blocks }
    }
}

/// Eigenvalues (descending) and the Jordan frame they refer to.
#[derive(Clone, Debug)]
pub struct BlockSpectral {
    pub eigenvalues: Vec<f64>,
    pub frame: Frame,
}

#[derive(Clone, Debug)]
pub enum Frame {
    /// `perm[i]` is the coordinate holding the i-th largest eigenvalue.
    Diagonal { perm: Vec<usize> },
    /// Unit vector of the arrow frame: idempotents are `(1, +-u)/2`.
    Arrow { u: DVector<f64> },
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    Eigen { q: DMatrix<f64> },
}

/// Per-family Jordan algebra operations on one block.
///
/// Slices passed in always have length `dim()`.
pub trait ConeBlock: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;
    /// Size parameter as written in a [`BlockSpec`].
    fn order(&self) -> usize;
    fn dim(&self) -> usize;
    fn rank(&self) -> usize;
    /// Squared Euclidean norm of a primitive idempotent.
    fn idempotent_norm_sq(&self) -> f64;

    fn identity(&self, out: &mut [f64]);
    fn product(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn spectral(&self, x: &[f64]) -> Result<BlockSpectral>;
    fn idempotents(&self, sp: &BlockSpectral) -> Vec<Element>;
    /// Writes `sum_i vals[i] c_i` for the frame `c_i` of `sp`.
    fn reconstruct(&self, sp: &BlockSpectral, vals: &[f64], out: &mut [f64]);
    /// Scales the Peirce component `(i, j)` of `h` by `k(i, j)`.
    ///
    /// With `k(i, j) = 1 / (l_i l_j)` this is the inverse quadratic
    /// representation of the element with eigenvalues `l`.
    fn peirce_apply(&self, sp: &BlockSpectral, k: &dyn Fn(usize, usize) -> f64, h: &[f64], out: &mut [f64]);

    /// Hessian of `-ln det` in the Euclidean inner product.
    fn hessian_apply(&self, z: &[f64], h: &[f64], out: &mut [f64]) -> Result<()>;
    fn hessian_inv_apply(&self, z: &[f64], h: &[f64], out: &mut [f64]) -> Result<()>;

    /// Adds `scale * A_b P(z) A_b^T` to `m`, where `A_b` is the column slice
    /// of the constraint matrix belonging to this block and `P(z)` is the
    /// quadratic representation of the element with spectral data `sp`.
    fn quad_schur_add(&self, a: DMatrixView<f64>, sp: &BlockSpectral, scale: f64, m: &mut DMatrix<f64>);

    /// Diagonal of `P(z)` when it is diagonal in the standard basis; lets
    /// callers assemble `A_b P(z) A_b^T` from sparse columns.
    fn quad_diagonal(&self, _sp: &BlockSpectral) -> Option<Vec<f64>> {
        None
    }
}

pub type BlockFactory = fn(usize) -> Result<Box<dyn ConeBlock>>;

/// Name-to-constructor table for block families.
#[derive(Clone)]
pub struct BlockRegistry {
    factories: BTreeMap<String, BlockFactory>,
}

impl BlockRegistry {
    pub fn empty() -> Self {
        BlockRegistry { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &str, f: BlockFactory) {
        self.factories.insert(name.to_string(), f);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(|s| s.as_str()).collect()
    }

    pub fn build(&self, spec: &BlockSpec) -> Result<Box<dyn ConeBlock>> {
        let f = self.factories.get(&spec.kind).ok_or_else(|| Error::Structural(format!("unknown cone block type '{}'", spec.kind)))?;
        f(spec.dim)
    }
}

impl Default for BlockRegistry {
    fn default() -> Self {
        let mut r = BlockRegistry::empty();
        r.register("orthant", |n| Ok(Box::new(Orthant::new(n)?)));
        r.register("soc", |d| Ok(Box::new(SecondOrder::new(d)?)));
        r.register("psd", |n| Ok(Box::new(Psd::new(n)?)));
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarFn {
    Sqrt,
    Inv,
    Log,
}

impl ScalarFn {
    fn apply(self, l: f64) -> Result<f64> {
        match self {
            ScalarFn::Sqrt => {
                if l < -1e-12 {
                    Err(Error::Domain(format!("sqrt of eigenvalue {l:e}")))
                } else {
                    Ok(l.max(0.0).sqrt())
                }
            }
            ScalarFn::Inv => {
                if l == 0.0 || !l.is_finite() {
                    Err(Error::Domain(format!("inverse of eigenvalue {l:e}")))
                } else {
                    Ok(1.0 / l)
                }
            }
            ScalarFn::Log => {
                if l <= 0.0 {
                    Err(Error::Domain(format!("log of eigenvalue {l:e}")))
                } else {
                    Ok(l.ln())
                }
            }
        }
    }
}

/// A product cone with its Jordan structure.
pub struct Cone {
    spec: ConeSpec,
    blocks: Vec<Box<dyn ConeBlock>>,
    offsets: Vec<usize>,
    dim: usize,
    rank: usize,
}

impl fmt::Debug for Cone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cone").field("spec", &self.spec).field("dim", &self.dim).finish()
    }
}

impl Clone for Cone {
    fn clone(&self) -> Self {
        Cone::new(self.spec.clone()).expect("spec was validated")
    }
}

impl Cone {
    pub fn new(spec: ConeSpec) -> Result<Self> {
        Self::with_registry(spec, &BlockRegistry::default())
    }

    pub fn with_registry(spec: ConeSpec, registry: &BlockRegistry) -> Result<Self> {
        if spec.blocks.is_empty() {
            return Err(Error::Structural("cone has no blocks".into()));
        }
        let mut blocks = Vec::with_capacity(spec.blocks.len());
        let mut offsets = Vec::with_capacity(spec.blocks.len());
        let (mut dim, mut rank) = (0, 0);
        for b in &spec.blocks {
            let blk = registry.build(b)?;
            offsets.push(dim);
            dim += blk.dim();
            rank += blk.rank();
            blocks.push(blk);
        }
        Ok(Cone { spec, blocks, offsets, dim, rank })
    }

    pub fn shared(spec: ConeSpec) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(spec)?))
    }

    pub fn spec(&self) -> &ConeSpec {
        &self.spec
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }
    pub fn block(&self, i: usize) -> &dyn ConeBlock {
        self.blocks[i].as_ref()
    }
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Iterates `(offset, block)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &dyn ConeBlock)> {
        self.offsets.iter().copied().zip(self.blocks.iter().map(|b| b.as_ref()))
    }

    /// Sum of squared idempotent norms; the parameter of the barrier whose
    /// Euclidean gradient is `-z^{-1}`.
    pub fn smoothing_parameter(&self) -> f64 {
        self.iter().map(|(_, b)| b.rank() as f64 * b.idempotent_norm_sq()).sum()
    }

    pub fn check(&self, x: &Element) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Structural(format!("element has length {}, cone dimension is {}", x.len(), self.dim)));
        }
        Ok(())
    }

    pub fn zeros(&self) -> Element {
        Element::zeros(self.dim)
    }

    pub fn identity(&self) -> Element {
        let mut e = self.zeros();
        for (off, b) in self.iter() {
            b.identity(&mut e.as_mut_slice()[off..off + b.dim()]);
        }
        e
    }

    pub fn inner(&self, x: &Element, y: &Element) -> f64 {
        x.dot(y)
    }

    pub fn norm(&self, x: &Element) -> f64 {
        x.norm()
    }

    pub fn jordan_product(&self, x: &Element, y: &Element) -> Result<Element> {
        self.check(x)?;
        self.check(y)?;
        let mut out = self.zeros();
        for (off, b) in self.iter() {
            let r = off..off + b.dim();
            b.product(&x.as_slice()[r.clone()], &y.as_slice()[r.clone()], &mut out.as_mut_slice()[r]);
        }
        Ok(out)
    }

    pub fn spectral_decompose(&self, x: &Element) -> Result<Vec<BlockSpectral>> {
        self.check(x)?;
        self.iter().map(|(off, b)| b.spectral(&x.as_slice()[off..off + b.dim()])).collect()
    }

    /// Rebuilds an element from per-block spectral data with new eigenvalues.
    pub fn reconstruct(&self, sps: &[BlockSpectral], vals: &[Vec<f64>]) -> Element {
        let mut out = self.zeros();
        for (i, (off, b)) in self.iter().enumerate() {
            b.reconstruct(&sps[i], &vals[i], &mut out.as_mut_slice()[off..off + b.dim()]);
        }
        out
    }

    pub fn scalar_calculus(&self, g: ScalarFn, x: &Element) -> Result<Element> {
        let sps = self.spectral_decompose(x)?;
        let vals = sps.iter().map(|sp| sp.eigenvalues.iter().map(|&l| g.apply(l)).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
        Ok(self.reconstruct(&sps, &vals))
    }

    /// Per-block determinants and their product.
    pub fn det(&self, x: &Element) -> Result<(Vec<f64>, f64)> {
        let dets: Vec<f64> = self.spectral_decompose(x)?.iter().map(|sp| sp.eigenvalues.iter().product()).collect();
        let total = dets.iter().product();
        Ok((dets, total))
    }

    pub fn min_eigenvalue(&self, x: &Element) -> Result<f64> {
        Ok(self.spectral_decompose(x)?.iter().flat_map(|sp| sp.eigenvalues.iter().copied()).fold(f64::INFINITY, f64::min))
    }

    pub fn in_interior(&self, x: &Element) -> bool {
        matches!(self.min_eigenvalue(x), Ok(l) if l > 0.0)
    }

    fn require_interior(&self, x: &Element) -> Result<Vec<BlockSpectral>> {
        let sps = self.spectral_decompose(x)?;
        for sp in &sps {
            if let Some(l) = sp.eigenvalues.iter().copied().find(|&l| !(l > 0.0)) {
                return Err(Error::Domain(format!("point is not in the cone interior (eigenvalue {l:e})")));
            }
        }
        Ok(sps)
    }

    /// `-sum ln det` over blocks.
    pub fn barrier_value(&self, x: &Element) -> Result<f64> {
        let sps = self.require_interior(x)?;
        Ok(-sps.iter().flat_map(|sp| sp.eigenvalues.iter()).map(|l| l.ln()).sum::<f64>())
    }

    /// Euclidean gradient of `-ln det`.
    ///
    /// This is `-x^{-1}` on orthant and PSD blocks. On second-order blocks
    /// the Euclidean inner product is half the Jordan trace form, so the
    /// gradient there is `-2 x^{-1}`.
    pub fn barrier_gradient(&self, x: &Element) -> Result<Element> {
        let sps = self.require_interior(x)?;
        let vals: Vec<Vec<f64>> = self
            .iter()
            .zip(&sps)
            .map(|((_, b), sp)| {
                let w = 1.0 / b.idempotent_norm_sq();
                sp.eigenvalues.iter().map(|l| -w / l).collect()
            })
            .collect();
        Ok(self.reconstruct(&sps, &vals))
    }

    pub fn hessian_apply(&self, z: &Element, h: &Element) -> Result<Element> {
        self.check(z)?;
        self.check(h)?;
        let mut out = self.zeros();
        for (off, b) in self.iter() {
            let r = off..off + b.dim();
            b.hessian_apply(&z.as_slice()[r.clone()], &h.as_slice()[r.clone()], &mut out.as_mut_slice()[r])?;
        }
        Ok(out)
    }

    pub fn hessian_inv_apply(&self, z: &Element, h: &Element) -> Result<Element> {
        self.check(z)?;
        self.check(h)?;
        let mut out = self.zeros();
        for (off, b) in self.iter() {
            let r = off..off + b.dim();
            b.hessian_inv_apply(&z.as_slice()[r.clone()], &h.as_slice()[r.clone()], &mut out.as_mut_slice()[r])?;
        }
        Ok(out)
    }

    /// Applies a Peirce kernel blockwise: `k(block, l_i, l_j)`.
    pub fn peirce_apply(&self, sps: &[BlockSpectral], k: &dyn Fn(usize, f64, f64) -> f64, h: &Element) -> Element {
        let mut out = self.zeros();
        for (bi, (off, b)) in self.iter().enumerate() {
            let ev = &sps[bi].eigenvalues;
            let kk = |i: usize, j: usize| k(bi, ev[i], ev[j]);
            let r = off..off + b.dim();
            b.peirce_apply(&sps[bi], &kk, &h.as_slice()[r.clone()], &mut out.as_mut_slice()[r]);
        }
        out
    }

    /// Inverse quadratic representation `P(z)^{-1} h`.
    pub fn quad_inv_apply(&self, z: &Element, h: &Element) -> Result<Element> {
        self.check(h)?;
        let sps = self.require_interior(z)?;
        Ok(self.peirce_apply(&sps, &|_, a, b| 1.0 / (a * b), h))
    }

    /// Quadratic representation `P(z) h`.
    pub fn quad_apply(&self, z: &Element, h: &Element) -> Result<Element> {
        self.check(h)?;
        let sps = self.spectral_decompose(z)?;
        Ok(self.peirce_apply(&sps, &|_, a, b| a * b, h))
    }
}

#[cfg(test)]
mod tests;
