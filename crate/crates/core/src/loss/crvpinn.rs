use crate::error::Result;
use crate::grid::GridField;
use crate::loss::gram::GramOperator;
use crate::loss::residual::ResidualSystem;
use crate::net::{Mlp, ParamGrads};

/// One evaluation of the robust loss.
#[derive(Debug, Clone)]
pub struct CrvpinnEval {
    /// `rᵀ G⁻¹ r`.
    pub loss: f64,
    pub residual: GridField,
    /// Riesz representative `z = G⁻¹ r`.
    pub riesz: GridField,
    /// `dL/du = 2·Aᵀ z`.
    pub cotangent: GridField,
    pub cg_iterations: usize,
}

/// Robust loss of a lattice field `u`. `guess` warm-starts the Gram solve.
pub fn crvpinn_loss_field(
    system: &ResidualSystem,
    gram: &GramOperator,
    u: &GridField,
    tol: f64,
    guess: Option<&GridField>,
) -> Result<CrvpinnEval> {
    let residual = system.assemble_residual(u)?;
    let cg = gram.solve_from(&residual, tol, guess)?;
    let riesz = cg.solution;
    let loss: f64 = residual
        .values()
        .iter()
        .zip(riesz.values())
        .map(|(r, z)| r * z)
        .sum();
    let mut cotangent = system.residual_adjoint(&riesz)?;
    cotangent.values_mut().iter_mut().for_each(|c| *c *= 2.0);
    Ok(CrvpinnEval {
        loss,
        residual,
        riesz,
        cotangent,
        cg_iterations: cg.iterations,
    })
}

/// Robust loss of a network evaluated on the lattice.
pub fn crvpinn_loss(
    system: &ResidualSystem,
    gram: &GramOperator,
    mlp: &Mlp,
    tol: f64,
) -> Result<CrvpinnEval> {
    let grid = system.grid();
    let u = GridField::from_values(grid, mlp.forward(&grid.points()))?;
    crvpinn_loss_field(system, gram, &u, tol, None)
}

/// Robust loss bound to one lattice, caching the lattice coordinates and the
/// previous Riesz representative as the next solve's starting guess.
#[derive(Debug, Clone)]
pub struct CrvpinnObjective {
    system: ResidualSystem,
    gram: GramOperator,
    points: Vec<[f64; 3]>,
    tol: f64,
    warm: Option<GridField>,
}

impl CrvpinnObjective {
    pub fn new(system: ResidualSystem, tol: f64) -> Self {
        let gram = GramOperator::new(system.grid());
        let points = system.grid().points();
        Self {
            system,
            gram,
            points,
            tol,
            warm: None,
        }
    }

    pub fn system(&self) -> &ResidualSystem {
        &self.system
    }

    pub fn gram(&self) -> &GramOperator {
        &self.gram
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Network values on the lattice, without any solution offset.
    pub fn lattice_field(&self, mlp: &Mlp) -> GridField {
        GridField::from_values(self.system.grid(), mlp.forward(&self.points)).unwrap()
    }

    pub fn evaluate(&mut self, mlp: &Mlp) -> Result<CrvpinnEval> {
        let u = self.lattice_field(mlp);
        let eval = crvpinn_loss_field(&self.system, &self.gram, &u, self.tol, self.warm.as_ref())?;
        self.warm = Some(eval.riesz.clone());
        Ok(eval)
    }

    /// Loss and `dL/dθ = backward_params(lattice, 2·Aᵀ G⁻¹ r)`.
    pub fn evaluate_with_grad(&mut self, mlp: &Mlp) -> Result<(CrvpinnEval, ParamGrads)> {
        let tape = mlp.trace(&self.points);
        let u = GridField::from_values(self.system.grid(), tape.output())?;
        let eval = crvpinn_loss_field(&self.system, &self.gram, &u, self.tol, self.warm.as_ref())?;
        let grads = mlp.backward_tape(&tape, eval.cotangent.values());
        self.warm = Some(eval.riesz.clone());
        Ok((eval, grads))
    }
}
