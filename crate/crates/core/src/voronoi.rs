//! Voronoi cells of a candidate mixing measure around a reference measure,
//! and the cell-based parameter losses `L1` (first-power gaps everywhere) and
//! `L2` (squared gaps on cells fitted by more than one atom).

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::model::{ExpertComponent, MixingMeasure};
use crate::scalar::{norm2, Scalar};

/// Partition of the candidate's components into one cell per reference atom.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VoronoiAssignment {
    /// `cells[j]` holds the candidate indices nearest to reference atom `j`.
    pub cells: Vec<Vec<usize>>,
}

impl VoronoiAssignment {
    pub fn cell_of(&self, i: usize) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(&i))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VoronoiLossReport<T> {
    pub total: T,
    pub weight_term: T,
    pub per_cell_terms: Vec<T>,
    pub empty_cells: Vec<usize>,
    pub singleton_cells: Vec<usize>,
}

impl<T: Scalar> VoronoiLossReport<T> {
    /// Sum of parameter terms over cells with exactly one atom.
    pub fn singleton_part(&self) -> T {
        self.singleton_cells
            .iter()
            .fold(T::zero(), |acc, &j| acc + self.per_cell_terms[j])
    }

    /// Sum of parameter terms over cells with two or more atoms.
    pub fn multi_part(&self) -> T {
        let all = self.per_cell_terms.iter().fold(T::zero(), |acc, &v| acc + v);
        all - self.singleton_part()
    }
}

fn omega_distance<T: Scalar>(a: &ExpertComponent<T>, b: &ExpertComponent<T>) -> T {
    norm2(a.omega().zip(b.omega()).map(|(u, v)| u - v))
}

fn check_compatible<T: Scalar>(g: &MixingMeasure<T>, g_star: &MixingMeasure<T>) -> Result<()> {
    if !g.family().same_kind(g_star.family()) {
        return Err(Error::Argument(format!(
            "expert family mismatch: {} vs {}",
            g.family().name(),
            g_star.family().name()
        )));
    }
    check_dim(g_star.dim(), g.dim())
}

/// Assigns each component of `g` to its nearest reference atom in
/// `ω = (α1, β, σ²)` Euclidean distance; ties go to the lowest reference index.
pub fn voronoi_cells<T: Scalar>(g: &MixingMeasure<T>, g_star: &MixingMeasure<T>) -> Result<VoronoiAssignment> {
    check_compatible(g, g_star)?;
    let mut cells = vec![Vec::new(); g_star.k()];
    for (i, c) in g.components().iter().enumerate() {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (j, s) in g_star.components().iter().enumerate() {
            let d = omega_distance(c, s);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        cells[best].push(i);
    }
    Ok(VoronoiAssignment { cells })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Power {
    First,
    SquaredOnMulti,
}

fn loss<T: Scalar>(g: &MixingMeasure<T>, g_star: &MixingMeasure<T>, power: Power) -> Result<VoronoiLossReport<T>> {
    let cells = voronoi_cells(g, g_star)?;
    let mut weight_term = T::zero();
    let mut per_cell_terms = Vec::with_capacity(g_star.k());
    let mut empty_cells = Vec::new();
    let mut singleton_cells = Vec::new();
    for (j, cell) in cells.cells.iter().enumerate() {
        let star = g_star.component(j);
        let mass = cell.iter().fold(T::zero(), |acc, &i| acc + g.component(i).weight());
        weight_term = weight_term + (mass - star.weight()).abs();
        match cell.len() {
            0 => empty_cells.push(j),
            1 => singleton_cells.push(j),
            _ => {}
        }
        let squared = power == Power::SquaredOnMulti && cell.len() > 1;
        let term = cell.iter().fold(T::zero(), |acc, &i| {
            let c = g.component(i);
            let da = norm2(c.alpha1.iter().zip(&star.alpha1).map(|(&a, &b)| a - b));
            let db = norm2(c.beta.iter().zip(&star.beta).map(|(&a, &b)| a - b));
            let ds = (c.sigma2 - star.sigma2).abs();
            let gap = if squared {
                da * da + db * db + ds * ds
            } else {
                da + db + ds
            };
            acc + c.weight() * gap
        });
        per_cell_terms.push(term);
    }
    let total = per_cell_terms.iter().fold(weight_term, |acc, &v| acc + v);
    Ok(VoronoiLossReport {
        total,
        weight_term,
        per_cell_terms,
        empty_cells,
        singleton_cells,
    })
}

/// `L1(G, G*)`: absolute cell-mass gaps plus weighted first-power parameter gaps.
pub fn loss_l1<T: Scalar>(g: &MixingMeasure<T>, g_star: &MixingMeasure<T>) -> Result<VoronoiLossReport<T>> {
    loss(g, g_star, Power::First)
}

/// `L2(G, G*)`: like `L1` on singleton cells, squared parameter gaps on cells
/// holding more than one atom.
pub fn loss_l2<T: Scalar>(g: &MixingMeasure<T>, g_star: &MixingMeasure<T>) -> Result<VoronoiLossReport<T>> {
    loss(g, g_star, Power::SquaredOnMulti)
}
