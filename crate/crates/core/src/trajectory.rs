//! In-memory trajectories and per-run diagnostics shared by both solvers.

use serde::Serialize;

use crate::acoustic::TraceSet;
use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid, ScalarField, VectorField};
use crate::model::EnergyLedger;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// Absent for incompressible runs.
    pub rho: Option<ScalarField>,
    pub u: VectorField,
    pub d: DirectorField,
}

/// Snapshots at the configured output stride, including both end points.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn new(grid: Grid) -> Self {
        Self { grid, snapshots: Vec::new() }
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Result<&Snapshot> {
        self.snapshots.last().ok_or_else(|| Error::InvalidState("empty trajectory".into()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub steps: usize,
    /// Steps that needed time-step halving.
    pub halved_steps: usize,
    pub initial_mass: f64,
    pub max_relative_mass_drift: f64,
    pub initial_director_max: f64,
    pub max_director_norm: f64,
    /// Largest `||div u|| / ||grad u||` after projection (incompressible only).
    pub max_divergence_ratio: f64,
    pub max_energy_increase: f64,
    pub max_solver_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub ledger: EnergyLedger,
    pub traces: TraceSet,
    pub diagnostics: RunDiagnostics,
}
