//! Reference grids of ruin probabilities for two polynomial-in-wealth
//! intensity families with `η ≡ 1`, `γ = 1`:
//!
//! * grid 3: `λ(u) = u^β + 1`, closed form through the incomplete gamma function;
//! * grid 4: `λ(u) = 1 + β/(1+u)`, algebraic decay.
//!
//! Each cell carries the published four-decimal value, the closed form and
//! the general quadrature.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DualRiskModel, Sign, StateFunction};
use crate::ruin::{psi_constant_ratio, psi_hyperbolic_plus, psi_power_shift, ruin_probability};

pub const WEALTH_GRID: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
pub const TABLE3_BETAS: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];
pub const TABLE4_BETAS: [f64; 5] = [1.5, 2.0, 2.5, 3.0, 3.5];

pub const TABLE3_PRINTED: [[f64; 5]; 5] = [
    [0.3679, 0.1353, 0.0498, 0.0183, 0.0067],
    [0.4325, 0.1184, 0.0233, 0.0035, 0.0004],
    [0.4867, 0.0981, 0.0076, 0.0002, 0.0000],
    [0.5343, 0.0747, 0.0013, 0.0000, 0.0000],
    [0.5756, 0.0506, 0.0001, 0.0000, 0.0000],
];

pub const TABLE4_PRINTED: [[f64; 5]; 5] = [
    [0.5893, 0.4491, 0.3750, 0.3280, 0.2948],
    [0.3750, 0.2222, 0.1562, 0.1200, 0.0972],
    [0.2475, 0.1155, 0.0688, 0.0465, 0.0340],
    [0.1667, 0.0617, 0.0312, 0.0187, 0.0123],
    [0.1136, 0.0336, 0.0145, 0.0077, 0.0046],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableCell {
    pub beta: f64,
    pub u: f64,
    pub printed: f64,
    pub closed_form: f64,
    pub quadrature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuinTable {
    pub id: u8,
    pub cells: Vec<TableCell>,
}

/// `η ≡ 1`, `λ(u) = u^β + 1`, `γ = 1`.
pub fn table3_model(beta: f64) -> DualRiskModel {
    let lam = if beta == 0.0 {
        StateFunction::constant(2.0)
    } else {
        StateFunction::PowerShift { alpha: 1.0, beta, shift: 1.0 }
    };
    DualRiskModel::new(StateFunction::constant(1.0), lam, 1.0).expect("valid grid model")
}

/// `η ≡ 1`, `λ(u) = 1 + β/(1+u)`, `γ = 1`.
pub fn table4_model(beta: f64) -> DualRiskModel {
    let lam = StateFunction::HyperbolicShift { alpha: 1.0, beta, sign: Sign::Plus };
    DualRiskModel::new(StateFunction::constant(1.0), lam, 1.0).expect("valid grid model")
}

pub fn table3_closed(beta: f64, u: f64) -> Result<f64> {
    if beta == 0.0 {
        psi_constant_ratio(2.0, 1.0, u)
    } else {
        psi_power_shift(1.0, beta, 1.0, u)
    }
}

pub fn table4_closed(beta: f64, u: f64) -> Result<f64> {
    psi_hyperbolic_plus(beta, 1.0, u)
}

fn build(
    id: u8,
    betas: &[f64; 5],
    printed: &[[f64; 5]; 5],
    model: fn(f64) -> DualRiskModel,
    closed: fn(f64, f64) -> Result<f64>,
) -> Result<RuinTable> {
    let mut cells = Vec::with_capacity(25);
    for (i, &beta) in betas.iter().enumerate() {
        let m = model(beta);
        for (j, &u) in WEALTH_GRID.iter().enumerate() {
            cells.push(TableCell {
                beta,
                u,
                printed: printed[i][j],
                closed_form: closed(beta, u)?,
                quadrature: ruin_probability(&m, u)?.psi,
            });
        }
    }
    Ok(RuinTable { id, cells })
}

pub fn table(id: u8) -> Result<RuinTable> {
    match id {
        3 => build(3, &TABLE3_BETAS, &TABLE3_PRINTED, table3_model, table3_closed),
        4 => build(4, &TABLE4_BETAS, &TABLE4_PRINTED, table4_model, table4_closed),
        _ => Err(Error::domain(format!("unknown table id {id}; available: 3, 4"))),
    }
}
