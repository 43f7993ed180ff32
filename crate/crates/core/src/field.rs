//! Fields, error bounds, and block decomposition.
//!
//! All arrays are row-major with the last axis varying fastest. A field of
//! either source precision is held as `f64`; reconstructions are rounded back
//! to the source precision before they are compared with the error bound.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Storage precision of the raw input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn byte_width(self) -> usize {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }

    /// Rounds a working value to the nearest representable source value.
    #[inline]
    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::Single => x as f32 as f64,
            Precision::Double => x,
        }
    }

    pub fn tag(self) -> u8 {
        self.byte_width() as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            4 => Some(Precision::Single),
            8 => Some(Precision::Double),
            _ => None,
        }
    }

    pub fn bits(self) -> usize {
        self.byte_width() * 8
    }
}

/// A scalar field of 1 to 3 dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    dims: Vec<usize>,
    values: Vec<f64>,
    precision: Precision,
    vmin: f64,
    vmax: f64,
}

impl Field {
    pub fn new(dims: Vec<usize>, values: Vec<f64>, precision: Precision) -> Result<Self> {
        validate_dims(&dims)?;
        let expected: usize = dims.iter().product();
        if expected != values.len() {
            return Err(Error::SizeMismatch {
                dims,
                expected: expected * precision.byte_width(),
                actual: values.len() * precision.byte_width(),
            });
        }
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
            vmin = vmin.min(value);
            vmax = vmax.max(value);
        }
        let values = match precision {
            Precision::Single => values.into_iter().map(|v| v as f32 as f64).collect(),
            Precision::Double => values,
        };
        let (vmin, vmax) = (precision.round(vmin), precision.round(vmax));
        Ok(Field {
            dims,
            values,
            precision,
            vmin,
            vmax,
        })
    }

    pub fn from_f32(dims: Vec<usize>, values: &[f32]) -> Result<Self> {
        Self::new(
            dims,
            values.iter().map(|&v| v as f64).collect(),
            Precision::Single,
        )
    }

    /// Decodes contiguous little-endian IEEE-754 scalars.
    pub fn from_le_bytes(bytes: &[u8], dims: Vec<usize>, precision: Precision) -> Result<Self> {
        validate_dims(&dims)?;
        let width = precision.byte_width();
        let expected = dims.iter().product::<usize>() * width;
        if bytes.len() != expected {
            return Err(Error::SizeMismatch {
                dims,
                expected,
                actual: bytes.len(),
            });
        }
        let values = match precision {
            Precision::Single => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            Precision::Double => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        Self::new(dims, values, precision)
    }

    /// Reads a headerless raw binary file.
    pub fn read_raw(
        path: impl AsRef<Path>,
        dims: Vec<usize>,
        precision: Precision,
    ) -> Result<Self> {
        validate_dims(&dims)?;
        let bytes = fs::read(path)?;
        Self::from_le_bytes(&bytes, dims, precision)
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * self.precision.byte_width());
        match self.precision {
            Precision::Single => {
                for &v in &self.values {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            Precision::Double => {
                for &v in &self.values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn write_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_le_bytes())?;
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn vmin(&self) -> f64 {
        self.vmin
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn value_range(&self) -> f64 {
        self.vmax - self.vmin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > 3 {
        return Err(Error::BadRank(dims.len()));
    }
    if let Some(axis) = dims.iter().position(|&d| d == 0) {
        return Err(Error::ZeroExtent { axis });
    }
    Ok(())
}

/// User-facing bound: relative to the value range, or absolute.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ErrorBound {
    Relative(f64),
    Absolute(f64),
}

/// Resolved bound for one field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBoundSpec {
    /// Value-range-based bound.
    pub epsilon: f64,
    /// Absolute bound in data units.
    pub absolute: f64,
}

impl ErrorBoundSpec {
    /// Resolves `bound` against the range of `field`.
    ///
    /// A zero-range field has no meaningful relative bound; it is given an
    /// absolute bound of `epsilon` (as if the range were 1). Every residual on
    /// such a field is exactly zero, so the choice does not affect the output.
    pub fn resolve(bound: ErrorBound, field: &Field) -> Result<Self> {
        let range = field.value_range();
        let spec = match bound {
            ErrorBound::Relative(epsilon) => {
                if !(epsilon.is_finite() && epsilon > 0.0) {
                    return Err(Error::InvalidBound(format!("relative bound {epsilon}")));
                }
                let absolute = if range > 0.0 {
                    epsilon * range
                } else {
                    epsilon
                };
                ErrorBoundSpec { epsilon, absolute }
            }
            ErrorBound::Absolute(absolute) => {
                if !(absolute.is_finite() && absolute > 0.0) {
                    return Err(Error::InvalidBound(format!("absolute bound {absolute}")));
                }
                let epsilon = if range > 0.0 {
                    absolute / range
                } else {
                    absolute
                };
                ErrorBoundSpec { epsilon, absolute }
            }
        };
        if !(spec.absolute.is_finite() && spec.absolute > 0.0) {
            return Err(Error::InvalidBound(format!(
                "resolved absolute bound {}",
                spec.absolute
            )));
        }
        Ok(spec)
    }
}

/// Per-axis position and size of one tile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockRegion {
    pub origin: Vec<usize>,
    pub extent: Vec<usize>,
}

impl BlockRegion {
    pub fn len(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_complete(&self, edge: usize) -> bool {
        self.extent.iter().all(|&e| e == edge)
    }
}

/// Regular tiling of a field into blocks of edge `edge`.
///
/// Blocks are ordered lexicographically by origin. Trailing blocks on an axis
/// that `edge` does not divide have a shorter extent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockGrid {
    dims: Vec<usize>,
    edge: usize,
    counts: Vec<usize>,
}

impl BlockGrid {
    pub fn new(dims: &[usize], edge: usize) -> Result<Self> {
        validate_dims(dims)?;
        if edge < 2 {
            return Err(Error::InvalidBlockSize(edge));
        }
        let counts = dims.iter().map(|&d| d.div_ceil(edge)).collect();
        Ok(BlockGrid {
            dims: dims.to_vec(),
            edge,
            counts,
        })
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Blocks per axis.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn region(&self, index: usize) -> BlockRegion {
        let mut rest = index;
        let mut origin = vec![0; self.dims.len()];
        let mut extent = vec![0; self.dims.len()];
        for axis in (0..self.dims.len()).rev() {
            let b = rest % self.counts[axis];
            rest /= self.counts[axis];
            origin[axis] = b * self.edge;
            extent[axis] = self.edge.min(self.dims[axis] - origin[axis]);
        }
        BlockRegion { origin, extent }
    }

    pub fn regions(&self) -> impl Iterator<Item = BlockRegion> + '_ {
        (0..self.len()).map(|i| self.region(i))
    }

    /// Copies a block's samples out of a flat field array.
    pub fn gather(&self, region: &BlockRegion, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(region.len());
        self.for_each_row(region, |field_start, len| {
            out.extend_from_slice(&values[field_start..field_start + len]);
        });
        out
    }

    /// Writes a block's samples back into a flat field array.
    pub fn scatter(&self, region: &BlockRegion, block: &[f64], values: &mut [f64]) {
        let mut offset = 0;
        self.for_each_row(region, |field_start, len| {
            values[field_start..field_start + len].copy_from_slice(&block[offset..offset + len]);
            offset += len;
        });
    }

    /// Visits each contiguous last-axis row of `region` as (field offset, length).
    fn for_each_row(&self, region: &BlockRegion, mut f: impl FnMut(usize, usize)) {
        let nd = self.dims.len();
        let row = region.extent[nd - 1];
        let outer: usize = region.extent[..nd - 1].iter().product();
        let mut idx = vec![0usize; nd - 1];
        for _ in 0..outer {
            let mut flat = 0;
            for axis in 0..nd {
                let coord = if axis < nd - 1 {
                    region.origin[axis] + idx[axis]
                } else {
                    region.origin[axis]
                };
                flat = flat * self.dims[axis] + coord;
            }
            f(flat, row);
            for axis in (0..nd - 1).rev() {
                idx[axis] += 1;
                if idx[axis] < region.extent[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

/// One tile of a field with its samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub origin: Vec<usize>,
    pub extent: Vec<usize>,
    pub data: Vec<f64>,
    pub complete: bool,
}

/// Tiles `field` into blocks of edge `edge`, in lexicographic origin order.
pub fn split_blocks(field: &Field, edge: usize) -> Result<Vec<Block>> {
    let grid = BlockGrid::new(field.dims(), edge)?;
    Ok(grid
        .regions()
        .map(|region| {
            let data = grid.gather(&region, field.values());
            let complete = region.is_complete(edge);
            Block {
                origin: region.origin,
                extent: region.extent,
                data,
                complete,
            }
        })
        .collect())
}

/// Reassembles blocks produced by [`split_blocks`] into a flat array.
pub fn assemble_blocks(dims: &[usize], blocks: &[Block]) -> Vec<f64> {
    let mut values = vec![0.0; dims.iter().product()];
    let grid_dims = dims.to_vec();
    let grid = BlockGrid {
        counts: vec![1; dims.len()],
        dims: grid_dims,
        edge: usize::MAX,
    };
    for block in blocks {
        let region = BlockRegion {
            origin: block.origin.clone(),
            extent: block.extent.clone(),
        };
        grid.scatter(&region, &block.data, &mut values);
    }
    values
}

/// Maps `x` from `[vmin, vmax]` linearly onto `[-1, 1]`.
#[inline]
pub fn normalize_value(x: f64, vmin: f64, vmax: f64) -> f64 {
    2.0 * (x - vmin) / (vmax - vmin) - 1.0
}

#[inline]
pub fn denormalize_value(y: f64, vmin: f64, vmax: f64) -> f64 {
    (y + 1.0) * 0.5 * (vmax - vmin) + vmin
}

pub fn normalize_block(block: &Block, vmin: f64, vmax: f64) -> Result<Block> {
    if !(vmax > vmin) {
        return Err(Error::DegenerateRange(vmin));
    }
    Ok(Block {
        data: block
            .data
            .iter()
            .map(|&x| normalize_value(x, vmin, vmax))
            .collect(),
        ..block.clone()
    })
}

pub fn denormalize_block(block: &Block, vmin: f64, vmax: f64) -> Result<Block> {
    if !(vmax > vmin) {
        return Err(Error::DegenerateRange(vmin));
    }
    Ok(Block {
        data: block
            .data
            .iter()
            .map(|&y| denormalize_value(y, vmin, vmax))
            .collect(),
        ..block.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ingest_small_square() {
        let bytes: Vec<u8> = [0f32, 1., 2., 3.]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let field = Field::from_le_bytes(&bytes, vec![2, 2], Precision::Single).unwrap();
        assert_eq!(field.vmin(), 0.0);
        assert_eq!(field.vmax(), 3.0);
        assert_eq!(field.values(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn ingest_rejects_size_mismatch() {
        let err = Field::from_le_bytes(&[0u8; 12], vec![2, 2], Precision::Single).unwrap_err();
        assert!(matches!(
            err,
            Error::SizeMismatch {
                expected: 16,
                actual: 12,
                ..
            }
        ));
    }

    #[test]
    fn ingest_rejects_non_finite_and_zero_extent() {
        let bytes: Vec<u8> = [0f32, f32::NAN]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        assert!(matches!(
            Field::from_le_bytes(&bytes, vec![2], Precision::Single),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            Field::from_le_bytes(&[], vec![0, 4], Precision::Single),
            Err(Error::ZeroExtent { axis: 0 })
        ));
        assert!(matches!(
            Field::new(vec![1, 1, 1, 1], vec![0.0], Precision::Double),
            Err(Error::BadRank(4))
        ));
    }

    #[test]
    fn ingest_large_cube_size_check() {
        // 512^3 singles: only the size arithmetic is exercised here, the
        // buffer itself would be 512 MiB.
        let dims = vec![512usize, 512, 512];
        let expected = dims.iter().product::<usize>() * Precision::Single.byte_width();
        assert_eq!(expected, 512 * 512 * 512 * 4);
        assert!(validate_dims(&dims).is_ok());
    }

    #[test]
    fn ingest_double_precision_roundtrip() {
        let values = [0.1f64, -2.5, 1e300, 3.0];
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let field = Field::from_le_bytes(&bytes, vec![4], Precision::Double).unwrap();
        assert_eq!(field.values(), &values);
        assert_eq!(field.to_le_bytes(), bytes);
    }

    #[test]
    fn split_exact_tiling() {
        let field = Field::new(vec![64, 64], vec![0.0; 64 * 64], Precision::Single).unwrap();
        let blocks = split_blocks(&field, 32).unwrap();
        assert_eq!(blocks.len(), 4);
        assert!(blocks.iter().all(|b| b.complete));
        let origins: Vec<_> = blocks.iter().map(|b| b.origin.clone()).collect();
        assert_eq!(
            origins,
            vec![vec![0, 0], vec![0, 32], vec![32, 0], vec![32, 32]]
        );
    }

    #[test]
    fn split_partial_blocks_counted_by_brute_force() {
        let grid = BlockGrid::new(&[100, 500, 500], 8).unwrap();
        assert_eq!(grid.counts(), &[13, 63, 63]);
        // Count by walking every origin on each axis.
        let per_axis = |n: usize| (0..n).step_by(8).count();
        assert_eq!(grid.len(), per_axis(100) * per_axis(500) * per_axis(500));
        let last_row = grid.region(12 * 63 * 63);
        assert_eq!(last_row.origin, vec![96, 0, 0]);
        assert_eq!(last_row.extent, vec![4, 8, 8]);
        assert!(!last_row.is_complete(8));
        let corner = grid.region(grid.len() - 1);
        assert_eq!(corner.extent, vec![4, 4, 4]);
    }

    #[test]
    fn split_short_1d() {
        let field = Field::new(vec![5], vec![1.0; 5], Precision::Single).unwrap();
        let blocks = split_blocks(&field, 8).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].extent, vec![5]);
        assert!(!blocks[0].complete);
    }

    #[test]
    fn split_rejects_tiny_edge() {
        assert!(matches!(
            BlockGrid::new(&[4], 1),
            Err(Error::InvalidBlockSize(1))
        ));
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        assert_eq!(normalize_value(2.0, 2.0, 6.0), -1.0);
        assert_eq!(normalize_value(6.0, 2.0, 6.0), 1.0);
        assert_eq!(normalize_value(4.0, 2.0, 6.0), 0.0);
        let v = normalize_value(0.0, -3.06, 2.64);
        assert!((v - (2.0 * 3.06 / 5.70 - 1.0)).abs() < 1e-12);
        assert!((v - 0.0737).abs() < 1e-4);
    }

    #[test]
    fn normalize_rejects_degenerate_range() {
        let block = Block {
            origin: vec![0],
            extent: vec![2],
            data: vec![1.0, 1.0],
            complete: true,
        };
        assert!(matches!(
            normalize_block(&block, 1.0, 1.0),
            Err(Error::DegenerateRange(_))
        ));
    }

    #[test]
    fn relative_bound_resolution() {
        let field = Field::new(vec![3], vec![-1.0, 0.0, 3.0], Precision::Double).unwrap();
        let spec = ErrorBoundSpec::resolve(ErrorBound::Relative(1e-2), &field).unwrap();
        assert_eq!(spec.absolute, 1e-2 * 4.0);
        assert!(ErrorBoundSpec::resolve(ErrorBound::Relative(0.0), &field).is_err());
        assert!(ErrorBoundSpec::resolve(ErrorBound::Absolute(-1.0), &field).is_err());
    }

    fn dims_and_edge() -> impl Strategy<Value = (Vec<usize>, usize)> {
        (prop::collection::vec(1usize..20, 1..=3), 2usize..9)
    }

    proptest! {
        #[test]
        fn split_then_assemble_is_identity((dims, edge) in dims_and_edge(), seed in any::<u64>()) {
            let n: usize = dims.iter().product();
            let values: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37 + seed as f64 * 1e-9).sin()).collect();
            let field = Field::new(dims.clone(), values.clone(), Precision::Double).unwrap();
            let blocks = split_blocks(&field, edge).unwrap();
            prop_assert_eq!(assemble_blocks(&dims, &blocks), values);
            prop_assert_eq!(blocks.clone(), split_blocks(&field, edge).unwrap());
            for b in &blocks {
                prop_assert!(b.extent.iter().all(|&e| e <= edge));
                prop_assert_eq!(b.complete, b.extent.iter().all(|&e| e == edge));
            }
            let origins: Vec<_> = blocks.iter().map(|b| b.origin.clone()).collect();
            let mut sorted = origins.clone();
            sorted.sort();
            prop_assert_eq!(origins, sorted);
        }

        #[test]
        fn normalize_denormalize_within_ulp(x in -1e6f64..1e6, lo in -1e6f64..0.0, width in 1e-3f64..1e6) {
            let hi = lo + width;
            let x = lo + (x.abs() % width);
            let back = denormalize_value(normalize_value(x, lo, hi), lo, hi);
            let ulp = f64::EPSILON * lo.abs().max(hi.abs()).max(x.abs());
            prop_assert!((back - x).abs() <= 4.0 * ulp, "{} vs {}", back, x);
        }
    }
}
