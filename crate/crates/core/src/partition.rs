//! Pairwise-disjoint cells over a ground support.

use serde::Serialize;
use thiserror::Error;

use crate::poly::{ExponentVector, SupportSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("cell {0} is empty")]
    EmptyCell(usize),
    #[error("{0:?} appears in more than one cell")]
    Overlap(ExponentVector),
    #[error("{0:?} is not in the ground support")]
    Foreign(ExponentVector),
    #[error("{0:?} is in the ground support but in no cell and not dropped")]
    Uncovered(ExponentVector),
}

/// A candidate block structure `{Q_i}` on a Gram support `Q`.
///
/// Cells are pairwise disjoint and nonempty; `dropped` holds the members of
/// the ground support that belong to no cell. Cells are kept sorted by their
/// graded-lex smallest element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockPartition {
    ground: SupportSet,
    cells: Vec<SupportSet>,
    dropped: SupportSet,
}

impl BlockPartition {
    pub fn new(
        ground: SupportSet,
        mut cells: Vec<SupportSet>,
        dropped: SupportSet,
    ) -> Result<Self, PartitionError> {
        let mut seen = SupportSet::new(ground.nvars());
        for (i, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                return Err(PartitionError::EmptyCell(i));
            }
            for v in cell.iter().chain(dropped.iter()) {
                if !ground.contains(v) {
                    return Err(PartitionError::Foreign(v.clone()));
                }
            }
            for v in cell {
                if !seen.insert(v.clone()) {
                    return Err(PartitionError::Overlap(v.clone()));
                }
            }
        }
        for v in &dropped {
            if !seen.insert(v.clone()) {
                return Err(PartitionError::Overlap(v.clone()));
            }
        }
        if let Some(missing) = ground.iter().find(|v| !seen.contains(v)) {
            return Err(PartitionError::Uncovered(missing.clone()));
        }
        cells.sort_by(|a, b| a.first().cmp(&b.first()));
        Ok(BlockPartition {
            ground,
            cells,
            dropped,
        })
    }

    /// Builds a partition whose `dropped` set is whatever the cells leave out.
    pub fn from_cells(ground: SupportSet, cells: Vec<SupportSet>) -> Result<Self, PartitionError> {
        let mut dropped = ground.clone();
        for c in &cells {
            for v in c {
                dropped.remove(v);
            }
        }
        BlockPartition::new(ground, cells, dropped)
    }

    /// The trivial partition: one cell holding all of `ground`.
    pub fn single_cell(ground: SupportSet) -> Self {
        let nvars = ground.nvars();
        let cells = if ground.is_empty() {
            vec![]
        } else {
            vec![ground.clone()]
        };
        BlockPartition {
            ground,
            cells,
            dropped: SupportSet::new(nvars),
        }
    }

    pub fn ground(&self) -> &SupportSet {
        &self.ground
    }

    pub fn cells(&self) -> &[SupportSet] {
        &self.cells
    }

    pub fn dropped(&self) -> &SupportSet {
        &self.dropped
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// One cell and nothing else: no block structure was found.
    pub fn is_trivial(&self) -> bool {
        self.cells.len() <= 1 && self.dropped.is_empty()
    }

    pub fn cell_of(&self, v: &ExponentVector) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(v))
    }

    /// Union of all cells.
    pub fn kept(&self) -> SupportSet {
        self.cells
            .iter()
            .fold(SupportSet::new(self.ground.nvars()), |acc, c| acc.union(c))
    }
}
