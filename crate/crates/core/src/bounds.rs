//! Steady-state error bounds inside the boundary layer.
//!
//! Once `|s| ≤ φ` holds for good, every derivative of the tracking error
//! settles into `|x̃^{(i)}| ≤ ζ_i λ^{i-n+1} φ` with
//! `ζ_0 = 1, ζ_i = 1 + Σ_{j<i} C(i,j) ζ_j`. The older `2^i` multipliers are
//! kept alongside for comparison.

use crate::error::{check_len, positive, Error, Result};
use crate::surface::{choose, SurfaceSpec, MAX_ORDER};

/// Exact ζ and `2^i` sequences for one order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZetaTable {
    order_n: usize,
    zeta: Vec<u128>,
    slotine: Vec<u128>,
}

impl ZetaTable {
    pub fn order(&self) -> usize {
        self.order_n
    }

    pub fn zeta(&self) -> &[u128] {
        &self.zeta
    }

    pub fn slotine(&self) -> &[u128] {
        &self.slotine
    }

    /// First derivative index at which the two sequences differ.
    pub fn first_divergent_index(&self) -> Option<usize> {
        self.zeta
            .iter()
            .zip(&self.slotine)
            .position(|(z, s)| z != s)
    }
}

pub fn zeta_table(n: usize) -> Result<ZetaTable> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::OrderOutOfRange(n));
    }
    let overflow = || Error::OrderOutOfRange(n);
    let mut zeta: Vec<u128> = Vec::with_capacity(n);
    for i in 0..n {
        if i == 0 {
            zeta.push(1);
            continue;
        }
        let mut acc: u128 = 1;
        for (j, z) in zeta.iter().enumerate() {
            let c = choose(i as u64, j as u64).ok_or_else(overflow)? as u128;
            acc = c
                .checked_mul(*z)
                .and_then(|t| acc.checked_add(t))
                .ok_or_else(overflow)?;
        }
        zeta.push(acc);
    }
    let slotine = (0..n).map(|i| 1u128 << i).collect();
    Ok(ZetaTable {
        order_n: n,
        zeta,
        slotine,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `ζ_i` multipliers.
    Corrected,
    /// `2^i` multipliers.
    Slotine,
}

/// The set `{ |s| ≤ φ and |x̃^{(i)}| ≤ bound_i for all i }`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRegion {
    surface: SurfaceSpec,
    phi: f64,
    kind: BoundKind,
    per_derivative_bounds: Vec<f64>,
}

impl ConvergenceRegion {
    fn build(spec: &SurfaceSpec, phi: f64, kind: BoundKind) -> Result<Self> {
        let phi = positive("phi", phi)?;
        let n = spec.order();
        let table = zeta_table(n)?;
        let mult = match kind {
            BoundKind::Corrected => table.zeta,
            BoundKind::Slotine => table.slotine,
        };
        let lam = spec.lambda();
        let per_derivative_bounds = mult
            .iter()
            .enumerate()
            .map(|(i, m)| *m as f64 * lam.powi(i as i32 - n as i32 + 1) * phi)
            .collect();
        Ok(Self {
            surface: spec.clone(),
            phi,
            kind,
            per_derivative_bounds,
        })
    }

    pub fn surface(&self) -> &SurfaceSpec {
        &self.surface
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn kind(&self) -> BoundKind {
        self.kind
    }

    pub fn bounds(&self) -> &[f64] {
        &self.per_derivative_bounds
    }

    pub fn contains(&self, err: &[f64]) -> Result<Containment> {
        contains(self, err)
    }
}

/// Region with the corrected `ζ_i` bounds.
pub fn region(spec: &SurfaceSpec, phi: f64) -> Result<ConvergenceRegion> {
    ConvergenceRegion::build(spec, phi, BoundKind::Corrected)
}

/// Region with the `2^i` bounds, for comparison only.
pub fn slotine_region(spec: &SurfaceSpec, phi: f64) -> Result<ConvergenceRegion> {
    ConvergenceRegion::build(spec, phi, BoundKind::Slotine)
}

/// Membership verdict plus `bound − |value|` margins (negative = outside).
#[derive(Debug, Clone, PartialEq)]
pub struct Containment {
    pub inside: bool,
    pub layer_margin: f64,
    pub margins: Vec<f64>,
}

pub fn contains(region: &ConvergenceRegion, err: &[f64]) -> Result<Containment> {
    check_len(region.surface.order(), err.len())?;
    let s = region.surface.value(err)?;
    let layer_margin = region.phi - s.abs();
    let margins: Vec<f64> = region
        .per_derivative_bounds
        .iter()
        .zip(err)
        .map(|(b, e)| b - e.abs())
        .collect();
    let inside = layer_margin >= 0.0 && margins.iter().all(|m| *m >= 0.0);
    Ok(Containment {
        inside,
        layer_margin,
        margins,
    })
}
