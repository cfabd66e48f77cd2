//! Virtual uniform grid.
//!
//! Particle weights are deposited into side-`h` hypercubes anchored on the
//! absolute lattice `idx_j = floor(x_j / h)`. Only occupied cells are stored.
//! The piecewise-constant reconstruction is
//! `Ū(x) = W_k / (N(0) h^d)` for `x ∈ Q_k`, and zero on every absent cell.

use std::hash::BuildHasherDefault;
use std::io::{self, Write};

use indexmap::IndexMap;
use rayon::prelude::*;
use rustc_hash::FxHasher;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::particles::Ensemble;
use crate::problems::NonlinearTerm;
use crate::DEFAULT_CHUNK_SIZE;

type CellMap<V> = IndexMap<CellIndex, V, BuildHasherDefault<FxHasher>>;

/// Integer lattice coordinates of the cell `∏_j [idx_j h, (idx_j + 1) h)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex(SmallVec<[i64; 6]>);

impl CellIndex {
    pub fn new(coords: &[i64]) -> Self {
        Self(SmallVec::from_slice(coords))
    }

    /// The cell containing `x`.
    pub fn of(x: &[f64], h: f64) -> Self {
        Self(x.iter().map(|&xj| (xj / h).floor() as i64).collect())
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn center(&self, h: f64) -> Vec<f64> {
        self.0.iter().map(|&i| (i as f64 + 0.5) * h).collect()
    }

    /// The cell shifted by `delta` along axis `axis`.
    pub fn neighbor(&self, axis: usize, delta: i64) -> Self {
        let mut n = self.clone();
        n.0[axis] += delta;
        n
    }
}

impl std::borrow::Borrow<[i64]> for CellIndex {
    fn borrow(&self) -> &[i64] {
        &self.0
    }
}

impl std::fmt::Display for CellIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (j, i) in self.0.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// Sparse map from occupied cells to accumulated particle weight.
///
/// Cell order is deterministic: first occurrence in particle order.
#[derive(Debug, Clone)]
pub struct SparseGrid {
    h: f64,
    dim: usize,
    n0: usize,
    cells: CellMap<f64>,
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!("cell side h must be positive and finite, got {h}")));
    }
    Ok(())
}

impl SparseGrid {
    /// Build a grid from explicit `(cell, accumulated weight)` pairs.
    pub fn from_cells<I>(h: f64, dim: usize, n0: usize, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (CellIndex, f64)>,
    {
        check_h(h)?;
        if dim == 0 || n0 == 0 {
            return Err(Error::config("dimension and N(0) must be positive"));
        }
        let mut map = CellMap::default();
        for (k, w) in cells {
            if k.dim() != dim {
                return Err(Error::config(format!("cell {k} does not have dimension {dim}")));
            }
            *map.entry(k).or_insert(0.0) += w;
        }
        Ok(Self { h, dim, n0, cells: map })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Number of occupied cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Accumulated weight of a cell, `None` if the cell is absent.
    pub fn weight_of(&self, cell: &CellIndex) -> Option<f64> {
        self.cells.get(cell).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellIndex, f64)> + '_ {
        self.cells.iter().map(|(k, &w)| (k, w))
    }

    pub fn keys(&self) -> impl Iterator<Item = &CellIndex> + '_ {
        self.cells.keys()
    }

    pub(crate) fn entry_at(&self, slot: usize) -> (&CellIndex, f64) {
        let (k, &w) = self.cells.get_index(slot).expect("slot in range");
        (k, w)
    }

    fn scale(&self) -> f64 {
        1.0 / (self.n0 as f64 * self.cell_volume())
    }

    /// `Ū` on the given cell; 0 if absent.
    pub fn average_of(&self, cell: &CellIndex) -> f64 {
        self.cells.get(cell).map_or(0.0, |&w| w * self.scale())
    }

    /// Piecewise-constant reconstruction `Ū(x)`.
    pub fn cell_average(&self, x: &[f64]) -> f64 {
        self.average_of(&CellIndex::of(x, self.h))
    }

    /// Central-difference gradient of `Ū` on a cell, absent neighbours count as 0.
    pub fn gradient_of(&self, cell: &CellIndex) -> Vec<f64> {
        (0..self.dim)
            .map(|j| {
                let right = self.average_of(&cell.neighbor(j, 1));
                let left = self.average_of(&cell.neighbor(j, -1));
                (right - left) / (2.0 * self.h)
            })
            .collect()
    }

    /// Gradient of `Ū` at `x`, i.e. `(Ū(x + h e_j) − Ū(x − h e_j)) / 2h`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_of(&CellIndex::of(x, self.h))
    }

    /// Sum of accumulated weights over all cells.
    pub fn total_weight(&self) -> f64 {
        let ws: Vec<f64> = self.cells.values().copied().collect();
        crate::particles::pairwise_sum(&ws)
    }

    /// `Σ Ū_k h^d`.
    pub fn signed_mass(&self) -> f64 {
        self.total_weight() / self.n0 as f64
    }

    /// Discrete L¹ mass `Z = Σ |Ū_k| h^d`.
    pub fn l1_mass(&self) -> f64 {
        let ws: Vec<f64> = self.cells.values().map(|w| w.abs()).collect();
        crate::particles::pairwise_sum(&ws) / self.n0 as f64
    }

    /// Debug dump: `idx_1,...,idx_d,accumulated_weight,cell_average`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|j| format!("idx_{j}")).collect();
        writeln!(out, "{},accumulated_weight,cell_average", header.join(","))?;
        for (k, w) in self.iter() {
            for i in k.coords() {
                write!(out, "{i},")?;
            }
            writeln!(out, "{w:e},{:e}", w * self.scale())?;
        }
        Ok(())
    }
}

/// Deposit every particle weight into its lattice cell.
pub fn deposit(ensemble: &Ensemble, h: f64) -> Result<SparseGrid> {
    deposit_chunked(ensemble, h, DEFAULT_CHUNK_SIZE)
}

/// Deposit with worker-local maps over fixed-size chunks, merged in chunk order.
pub fn deposit_chunked(ensemble: &Ensemble, h: f64, chunk_size: usize) -> Result<SparseGrid> {
    check_h(h)?;
    if ensemble.is_empty() {
        return Err(Error::config("cannot deposit an empty ensemble"));
    }
    let dim = ensemble.dim();
    let chunk_size = chunk_size.max(1);
    let locals: Vec<CellMap<f64>> = ensemble
        .positions()
        .par_chunks(chunk_size * dim)
        .zip(ensemble.weights().par_chunks(chunk_size))
        .map(|(xs, ws)| deposit_chunk(xs, ws, dim, h))
        .collect();

    let mut iter = locals.into_iter();
    let mut cells = iter.next().unwrap_or_default();
    for local in iter {
        for (k, w) in local {
            *cells.entry(k).or_insert(0.0) += w;
        }
    }
    Ok(SparseGrid { h, dim, n0: ensemble.n0(), cells })
}

/// Largest dense scratch box, relative to the chunk length.
const DENSE_FACTOR: usize = 4;

fn deposit_chunk(xs: &[f64], ws: &[f64], dim: usize, h: f64) -> CellMap<f64> {
    let keys: Vec<i64> = xs.iter().map(|&xj| (xj / h).floor() as i64).collect();
    let mut lo = vec![i64::MAX; dim];
    let mut hi = vec![i64::MIN; dim];
    for key in keys.chunks_exact(dim) {
        for j in 0..dim {
            lo[j] = lo[j].min(key[j]);
            hi[j] = hi[j].max(key[j]);
        }
    }
    let limit = DENSE_FACTOR * ws.len() + 1024;
    let volume = lo.iter().zip(&hi).try_fold(1usize, |acc, (&l, &u)| {
        let extent = usize::try_from(u.checked_sub(l)?.checked_add(1)?).ok()?;
        acc.checked_mul(extent).filter(|&v| v <= limit)
    });
    let mut map = CellMap::default();
    match volume {
        Some(volume) => {
            // compact box: accumulate densely, emit touched cells in lattice order
            let mut acc = vec![0.0; volume];
            let mut touched = vec![false; volume];
            for (key, &w) in keys.chunks_exact(dim).zip(ws) {
                let mut lin = 0usize;
                for j in 0..dim {
                    lin = lin * (hi[j] - lo[j] + 1) as usize + (key[j] - lo[j]) as usize;
                }
                acc[lin] += w;
                touched[lin] = true;
            }
            let mut coords = vec![0i64; dim];
            for (lin, (&w, _)) in acc.iter().zip(&touched).enumerate().filter(|(_, (_, &t))| t) {
                let mut rest = lin;
                for j in (0..dim).rev() {
                    let extent = (hi[j] - lo[j] + 1) as usize;
                    coords[j] = lo[j] + (rest % extent) as i64;
                    rest /= extent;
                }
                map.insert(CellIndex::new(&coords), w);
            }
        }
        None => {
            for (key, &w) in keys.chunks_exact(dim).zip(ws) {
                match map.get_index_of(key) {
                    Some(slot) => map[slot] += w,
                    None => {
                        map.insert(CellIndex::new(key), w);
                    }
                }
            }
        }
    }
    map
}

/// Values of the nonlinear term on the occupied cells of a [`SparseGrid`].
#[derive(Debug, Clone)]
pub struct FieldGrid {
    h: f64,
    dim: usize,
    keys: Vec<CellIndex>,
    values: Vec<f64>,
}

impl FieldGrid {
    pub fn from_cells<I>(h: f64, dim: usize, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (CellIndex, f64)>,
    {
        check_h(h)?;
        let (keys, values): (Vec<_>, Vec<_>) = cells.into_iter().unzip();
        if keys.iter().any(|k| k.dim() != dim) {
            return Err(Error::config(format!("field cells must have dimension {dim}")));
        }
        Ok(Self { h, dim, keys, values })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn keys(&self) -> &[CellIndex] {
        &self.keys
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellIndex, f64)> + '_ {
        self.keys.iter().zip(self.values.iter().copied())
    }

    /// Field value of the cell containing `x` (linear scan; diagnostics only).
    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        let k = CellIndex::of(x, self.h);
        self.iter().find(|(c, _)| **c == k).map(|(_, v)| v)
    }

    /// `Σ |f_k| h^d` over the stored cells.
    pub fn integral_abs(&self) -> f64 {
        let v: Vec<f64> = self.values.iter().map(|f| f.abs()).collect();
        crate::particles::pairwise_sum(&v) * self.cell_volume()
    }
}

/// Evaluate `f(t, center, Ū(center), ∇Ū(center))` on every occupied cell.
pub fn tabulate_field(grid: &SparseGrid, f: &NonlinearTerm, t: f64) -> Result<FieldGrid> {
    let h = grid.h();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|slot| {
            let (k, w) = grid.entry_at(slot);
            let center = k.center(h);
            let u = w * grid.scale();
            let grad = if f.uses_gradient() { grid.gradient_of(k) } else { Vec::new() };
            f.eval(t, &center, u, &grad)
        })
        .collect();
    if let Some(slot) = values.iter().position(|v| !v.is_finite()) {
        let (k, _) = grid.entry_at(slot);
        return Err(Error::NonFiniteField(format!("f = {} in cell {k} at t = {t}", values[slot])));
    }
    Ok(FieldGrid { h, dim: grid.dim(), keys: grid.keys().cloned().collect(), values })
}
