use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::crp::{block_sizes, sample_crp};
use super::likelihood::{ContinuousLik, FactorLik, Likelihood};
use crate::error::{Error, Result};

/// One covariate submatrix fed to a co-clustering chain.
#[derive(Debug, Clone, PartialEq)]
pub enum DataBlock {
    Continuous(DMatrix<f64>),
    /// Levels in `1..=n_levels`.
    Factor { levels: DMatrix<u8>, n_levels: usize },
}

impl DataBlock {
    pub fn nrows(&self) -> usize {
        match self {
            DataBlock::Continuous(x) => x.nrows(),
            DataBlock::Factor { levels, .. } => levels.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            DataBlock::Continuous(x) => x.ncols(),
            DataBlock::Factor { levels, .. } => levels.ncols(),
        }
    }

    /// Likelihood with the default priors for this block.
    pub fn default_likelihood(&self) -> Likelihood {
        match self {
            DataBlock::Continuous(x) => Likelihood::Continuous(ContinuousLik::for_block(x, 0.5)),
            DataBlock::Factor { n_levels, .. } => Likelihood::Factor(FactorLik::new(*n_levels)),
        }
    }
}

/// Motif submatrix: reals for continuous blocks, one-based levels for factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Motif {
    Continuous(DMatrix<f64>),
    Factor(DMatrix<u8>),
}

impl Motif {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Motif::Continuous(m) => m.shape(),
            Motif::Factor(m) => m.shape(),
        }
    }
}

/// Full state of one co-clustering chain. Assignments are zero-based and
/// contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoClusterState {
    pub row_assign: Vec<usize>,
    pub col_assign: Vec<usize>,
    pub motif: Motif,
    pub row_mass: f64,
    pub col_mass: f64,
    pub likelihood: Likelihood,
}

impl CoClusterState {
    pub fn n_cliques(&self) -> usize {
        self.row_assign.iter().max().map_or(0, |m| m + 1)
    }

    pub fn n_clusters(&self) -> usize {
        self.col_assign.iter().max().map_or(0, |m| m + 1)
    }

    /// Checks the state invariants against a data block.
    pub fn validate(&self, data: &DataBlock) -> Result<()> {
        if self.row_assign.len() != data.nrows() || self.col_assign.len() != data.ncols() {
            return Err(Error::Dimension(format!(
                "state is {}x{}, data is {}x{}",
                self.row_assign.len(),
                self.col_assign.len(),
                data.nrows(),
                data.ncols()
            )));
        }
        for (what, assign) in [("row", &self.row_assign), ("column", &self.col_assign)] {
            if block_sizes(assign).iter().any(|&m| m == 0) {
                return Err(Error::invalid(format!("{what} labels are not contiguous")));
            }
        }
        if self.motif.shape() != (self.n_cliques(), self.n_clusters()) {
            return Err(Error::Dimension(format!(
                "motif is {:?}, partitions have {} cliques and {} clusters",
                self.motif.shape(),
                self.n_cliques(),
                self.n_clusters()
            )));
        }
        if !(self.row_mass > 0.0 && self.col_mass > 0.0) {
            return Err(Error::invalid("CRP masses must be positive"));
        }
        match (&self.likelihood, &self.motif, data) {
            (Likelihood::Continuous(_), Motif::Continuous(_), DataBlock::Continuous(_)) => {}
            (Likelihood::Factor(l), Motif::Factor(m), DataBlock::Factor { n_levels, .. }) => {
                if l.n_levels != *n_levels {
                    return Err(Error::invalid("likelihood and data level counts differ"));
                }
                if m.iter().any(|&v| v == 0 || v as usize > *n_levels) {
                    return Err(Error::invalid("motif level out of range"));
                }
            }
            _ => return Err(Error::invalid("state and data block types differ")),
        }
        self.likelihood.validate()
    }

    /// Over-dispersed starting state: both partitions drawn sequentially from
    /// their CRP priors, and motifs drawn once from their conditionals.
    pub fn initialize<R: Rng + ?Sized>(
        data: &DataBlock,
        row_mass: f64,
        col_mass: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Self::initialize_with(data, row_mass, col_mass, data.default_likelihood(), rng)
    }

    pub fn initialize_with<R: Rng + ?Sized>(
        data: &DataBlock,
        row_mass: f64,
        col_mass: f64,
        likelihood: Likelihood,
        rng: &mut R,
    ) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::invalid("cannot co-cluster an empty block"));
        }
        let row_assign = sample_crp(data.nrows(), row_mass, rng);
        let col_assign = sample_crp(data.ncols(), col_mass, rng);
        Self::with_partitions(data, row_assign, col_assign, row_mass, col_mass, likelihood, rng)
    }

    /// State with given partitions, motifs drawn from their conditionals.
    pub fn with_partitions<R: Rng + ?Sized>(
        data: &DataBlock,
        row_assign: Vec<usize>,
        col_assign: Vec<usize>,
        row_mass: f64,
        col_mass: f64,
        likelihood: Likelihood,
        rng: &mut R,
    ) -> Result<Self> {
        let qr = row_assign.iter().max().map_or(0, |m| m + 1);
        let qc = col_assign.iter().max().map_or(0, |m| m + 1);
        let motif = match &likelihood {
            Likelihood::Continuous(_) => Motif::Continuous(DMatrix::zeros(qr, qc)),
            Likelihood::Factor(_) => Motif::Factor(DMatrix::from_element(qr, qc, 1)),
        };
        let mut state = Self {
            row_assign,
            col_assign,
            motif,
            row_mass,
            col_mass,
            likelihood,
        };
        state.validate(data)?;
        super::sampler::update_motif(&mut state, data, rng)?;
        Ok(state)
    }
}
