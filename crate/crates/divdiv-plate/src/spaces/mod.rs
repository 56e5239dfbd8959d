//! Finite element spaces: the symmetric H(divdiv) space, its extended variant,
//! the discontinuous deflection space and the H1(div) potential space.

pub mod basis;
pub mod constraints;
pub mod dofmap;
pub mod vspace;

use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::{Mesh, TriGeom};
use crate::poly::MatPoly;

pub use basis::{build_local_basis, LocalBasis, LocalDof};
pub use dofmap::{SigmaDofMap, SplitPolicy, SplitVertex, UDofMap};

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("polynomial degree {0} is below the minimum 3")]
    DegreeTooLow(usize),
    #[error("local functionals are not unisolvent on triangle {tri} (condition {cond:e})")]
    Unisolvence { tri: usize, cond: f64 },
}

/// The bending moment space on a mesh: numbering plus per-triangle bases.
#[derive(Clone, Debug)]
pub struct SigmaSpace {
    pub map: SigmaDofMap,
    pub bases: Vec<LocalBasis>,
    pub geoms: Vec<TriGeom>,
}

impl SigmaSpace {
    pub fn new(mesh: &Mesh, k: usize, policy: SplitPolicy) -> Result<Self, SpaceError> {
        Self::with_splits(mesh, k, policy.split_vertices(mesh))
    }

    pub fn with_splits(mesh: &Mesh, k: usize, splits: Vec<SplitVertex>) -> Result<Self, SpaceError> {
        if k < 3 {
            return Err(SpaceError::DegreeTooLow(k));
        }
        let geoms: Vec<TriGeom> = (0..mesh.num_triangles()).map(|t| mesh.geometry(t)).collect();
        let ef = basis::EdgeFunctionals::new(k);
        let bases = geoms
            .par_iter()
            .map(|g| basis::build_local_basis_with(g, k, &ef))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { map: SigmaDofMap::with_splits(mesh, k, splits), bases, geoms })
    }

    pub fn ndof(&self) -> usize {
        self.map.ndof
    }

    pub fn k(&self) -> usize {
        self.map.k
    }

    /// Restriction of the global function `x` to triangle `t`.
    pub fn function(&self, t: usize, x: &[f64]) -> MatPoly {
        dofmap::combine(&self.bases[t].funcs, &self.map.local_values(t, x))
    }

    /// Restrictions of global basis function `g` as (triangle, polynomial).
    pub fn basis_function(&self, g: usize) -> Vec<(usize, MatPoly)> {
        let mut out = vec![];
        for (t, rows) in self.map.local.iter().enumerate() {
            let vals: Vec<f64> = rows.iter().map(|row| row.iter().filter(|e| e.0 == g).map(|e| e.1).sum()).collect();
            if vals.iter().any(|&v| v != 0.0) {
                out.push((t, dofmap::combine(&self.bases[t].funcs, &vals)));
            }
        }
        out
    }

    /// Global coefficients of the piecewise polynomial `f(t)`, read with the
    /// defining functionals (exact when `f` belongs to the space).
    pub fn interpolate(&self, f: &dyn Fn(usize) -> MatPoly) -> Vec<f64> {
        let k = self.k();
        let ef = basis::EdgeFunctionals::new(k);
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; self.geoms.len()];
        let mut out = vec![0.0; self.ndof()];
        for (gd, def) in self.map.defining.iter().enumerate() {
            let vals = cache[def.tri].get_or_insert_with(|| {
                let g = &self.geoms[def.tri];
                basis::apply_functionals(g, k, &ef, &basis::bubbles(g, k), &f(def.tri))
            });
            out[gd] = def.weights.iter().map(|&(r, w)| w * vals[r]).sum();
        }
        out
    }
}
