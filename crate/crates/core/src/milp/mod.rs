//! Solver-agnostic MILP representation and the piecewise-McCormick builders
//! for the relaxed master and adversarial problems.

mod builders;
mod mccormick;
mod tighten;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub use builders::{build_ap, build_mp, ApLayout, BuildOptions, MpLayout};
pub use mccormick::{big_m_row, mccormick_block, product_bounds, PartitionScheme};
pub use tighten::{tighten, TighteningState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjectiveSense,
    pub coeffs: Vec<(VarId, f64)>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl MilpModel {
    pub fn new(name: impl Into<String>, sense: ObjectiveSense) -> Self {
        Self {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective {
                sense,
                coeffs: Vec::new(),
                constant: 0.0,
            },
        }
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind: VarKind::Continuous,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
        });
        VarId(self.variables.len() - 1)
    }

    /// Adds a row after merging duplicate variables and dropping zeros.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs: merge_terms(coeffs),
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, coeffs: Vec<(VarId, f64)>, constant: f64) {
        self.objective.coeffs = merge_terms(coeffs);
        self.objective.constant = constant;
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn binaries(&self) -> Vec<VarId> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
            .collect()
    }

    /// Checks references, binary bounds and finiteness of every bound.
    pub fn validate(&self) -> Result<()> {
        let nv = self.variables.len();
        for v in &self.variables {
            if !(v.lower.is_finite() && v.upper.is_finite()) {
                return Err(Error::InvalidModel(format!("variable {} has non-finite bounds", v.name)));
            }
            if v.lower > v.upper {
                return Err(Error::InvalidModel(format!(
                    "variable {} has empty domain [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::InvalidModel(format!("binary {} must lie in [0, 1]", v.name)));
            }
        }
        let check = |coeffs: &[(VarId, f64)], what: &str| -> Result<()> {
            for &(v, a) in coeffs {
                if v.0 >= nv {
                    return Err(Error::InvalidModel(format!("{what} references unknown variable {}", v.0)));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidModel(format!("{what} has a non-finite coefficient")));
                }
            }
            Ok(())
        };
        for c in &self.constraints {
            check(&c.coeffs, &c.name)?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidModel(format!("{} has a non-finite right-hand side", c.name)));
            }
        }
        check(&self.objective.coeffs, "objective")?;
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.constant
            + self
                .objective
                .coeffs
                .iter()
                .map(|&(v, a)| a * values[v.0])
                .sum::<f64>()
    }

    /// Largest violation over rows, bounds and integrality.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.kind == VarKind::Binary {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(values));
        }
        worst
    }

    /// CPLEX-style LP text.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "\\ {}", self.name);
        let sense = match self.objective.sense {
            ObjectiveSense::Minimize => "Minimize",
            ObjectiveSense::Maximize => "Maximize",
        };
        let _ = writeln!(out, "{sense}");
        let mut obj = self.linear_text(&self.objective.coeffs);
        if self.objective.constant != 0.0 {
            let _ = write!(obj, " {} {}", sign_of(self.objective.constant), fmt_num(self.objective.constant.abs()));
        }
        let _ = writeln!(out, " obj: {}", if obj.is_empty() { "0".to_string() } else { obj });
        let _ = writeln!(out, "Subject To");
        for (r, c) in self.constraints.iter().enumerate() {
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let lhs = self.linear_text(&c.coeffs);
            let lhs = if lhs.is_empty() { format!("0 {}", self.variables[0].name) } else { lhs };
            let _ = writeln!(out, " r{r}_{}: {lhs} {op} {}", c.name, fmt_num(c.rhs));
        }
        let _ = writeln!(out, "Bounds");
        for v in &self.variables {
            if v.kind == VarKind::Continuous {
                let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
            }
        }
        let bins: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !bins.is_empty() {
            let _ = writeln!(out, "Binaries");
            for chunk in bins.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        let _ = writeln!(out, "End");
        out
    }

    pub fn write_lp(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_lp_string()).map_err(|e| Error::io(path, e))
    }

    fn linear_text(&self, coeffs: &[(VarId, f64)]) -> String {
        let mut s = String::new();
        for (idx, &(v, a)) in coeffs.iter().enumerate() {
            if idx == 0 {
                if a < 0.0 {
                    s.push_str("- ");
                }
            } else {
                let _ = write!(s, " {} ", sign_of(a));
            }
            let _ = write!(s, "{} {}", fmt_num(a.abs()), self.variables[v.0].name);
        }
        s
    }
}

fn sign_of(a: f64) -> &'static str {
    if a < 0.0 {
        "-"
    } else {
        "+"
    }
}

fn fmt_num(a: f64) -> String {
    format!("{a:.17e}")
}

fn merge_terms(mut coeffs: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    coeffs.sort_by_key(|&(v, _)| v);
    let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(coeffs.len());
    for (v, a) in coeffs {
        match merged.last_mut() {
            Some((last, acc)) if *last == v => *acc += a,
            _ => merged.push((v, a)),
        }
    }
    merged.retain(|&(_, a)| a != 0.0);
    merged
}
