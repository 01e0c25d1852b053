//! Quantitative logics over states and trajectories.
//!
//! Two dialects of state formulas are supported: the kernel dialect with the
//! discounted next-time modality `<t> f`, and the trajectory dialect whose
//! only non-propositional constructor integrates a trajectory formula
//! against the path law of the start state. Formula enumeration yields
//! certified lower bounds on the corresponding behavioural distances.

mod eval;
mod parse;
mod rational;
mod search;

pub use eval::{eval_trajectory, Evaluator, SampleBank};
pub use parse::{parse_state_formula, parse_trajectory_formula};
pub use rational::Rational;
pub use search::{distance_bound, enumerate_state_formulas, log_spaced_times, BoundConfig};

use alloc::boxed::Box;
use alloc::string::String;

use crate::process::SpecError;
use crate::pseudometric::MetricError;

#[derive(Debug, thiserror::Error)]
pub enum LogicError {
    #[error("parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("`{construct}` is not available in the {dialect} dialect")]
    DialectViolation {
        construct: &'static str,
        dialect: &'static str,
    },
    #[error("constant {0} outside [0, 1]")]
    ConstantOutOfRange(Rational),
    #[error("enumeration depth {0} exceeds the budget (max {MAX_DEPTH})")]
    DepthBudget(usize),
    #[error("integral evaluation requires a trajectory sample bank")]
    MissingSamples,
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Enumeration depth guard.
pub const MAX_DEPTH: usize = 5;

/// Which state-formula constructors are admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    /// Kernel dialect: constants, obs, min, complement, truncated
    /// subtraction, and the discounted modality `<t> f`.
    Lambda,
    /// Trajectory dialect: constants, obs, complement, and path integrals;
    /// min and truncated subtraction are derived through integrals.
    Sigma,
}

impl Dialect {
    pub fn name(&self) -> &'static str {
        match self {
            Dialect::Lambda => "lambda",
            Dialect::Sigma => "sigma",
        }
    }
}

/// State formulas, interpreted as functions from states to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    /// Constant `q`.
    Const(Rational),
    /// The observable.
    Obs,
    /// Pointwise minimum.
    Min(Box<StateFormula>, Box<StateFormula>),
    /// `1 - f`.
    Complement(Box<StateFormula>),
    /// Truncated subtraction `max(0, f - q)`.
    Minus(Box<StateFormula>, Rational),
    /// Discounted expectation after evolving for time `t` (kernel dialect).
    Diamond(Rational, Box<StateFormula>),
    /// Integral of a trajectory formula against the start state's path law
    /// (trajectory dialect).
    Integral(Box<TrajectoryFormula>),
}

/// Trajectory formulas, interpreted as functions from paths to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryFormula {
    /// `c^t f(path(t))`: evaluate a state formula along the path.
    EvalAt(Box<StateFormula>, Rational),
    Min(Box<TrajectoryFormula>, Box<TrajectoryFormula>),
    Max(Box<TrajectoryFormula>, Box<TrajectoryFormula>),
    /// Truncated subtraction `max(0, g - q)`.
    Minus(Box<TrajectoryFormula>, Rational),
    /// Truncated addition `min(1, g + q)`.
    Plus(Box<TrajectoryFormula>, Rational),
}

impl StateFormula {
    /// Truncated addition, derived: `1 - ((1 - f) (-) q)`.
    pub fn oplus(self, q: Rational) -> Self {
        StateFormula::Complement(Box::new(StateFormula::Minus(
            Box::new(StateFormula::Complement(Box::new(self))),
            q,
        )))
    }

    /// Pointwise maximum, derived: `1 - min(1 - f, 1 - g)`.
    pub fn max(self, other: Self) -> Self {
        StateFormula::Complement(Box::new(StateFormula::Min(
            Box::new(StateFormula::Complement(Box::new(self))),
            Box::new(StateFormula::Complement(Box::new(other))),
        )))
    }

    /// Checks that every constructor belongs to `dialect` and every
    /// constant lies in `[0, 1]`.
    pub fn check_dialect(&self, dialect: Dialect) -> Result<(), LogicError> {
        let unit = |q: &Rational| {
            if q.in_unit() {
                Ok(())
            } else {
                Err(LogicError::ConstantOutOfRange(*q))
            }
        };
        match self {
            StateFormula::Const(q) => unit(q),
            StateFormula::Obs => Ok(()),
            StateFormula::Min(a, b) => match dialect {
                Dialect::Lambda => {
                    a.check_dialect(dialect)?;
                    b.check_dialect(dialect)
                }
                Dialect::Sigma => Err(LogicError::DialectViolation {
                    construct: "min",
                    dialect: dialect.name(),
                }),
            },
            StateFormula::Complement(f) => f.check_dialect(dialect),
            StateFormula::Minus(f, q) => match dialect {
                Dialect::Lambda => {
                    unit(q)?;
                    f.check_dialect(dialect)
                }
                Dialect::Sigma => Err(LogicError::DialectViolation {
                    construct: "(-)",
                    dialect: dialect.name(),
                }),
            },
            StateFormula::Diamond(_, f) => match dialect {
                Dialect::Lambda => f.check_dialect(dialect),
                Dialect::Sigma => Err(LogicError::DialectViolation {
                    construct: "<t>",
                    dialect: dialect.name(),
                }),
            },
            StateFormula::Integral(g) => match dialect {
                Dialect::Sigma => g.check_dialect(dialect),
                Dialect::Lambda => Err(LogicError::DialectViolation {
                    construct: "int",
                    dialect: dialect.name(),
                }),
            },
        }
    }

    /// Rewrites the derived state constructors of the trajectory dialect
    /// into their primitive integral form: `min(f, g)` becomes
    /// `int(min(f @ 0, g @ 0))` and `f (-) q` becomes `int((f @ 0) (-) q)`.
    /// Evaluation is unchanged (paths start at the evaluated state).
    pub fn expand_sigma(&self) -> StateFormula {
        match self {
            StateFormula::Const(q) => StateFormula::Const(*q),
            StateFormula::Obs => StateFormula::Obs,
            StateFormula::Complement(f) => StateFormula::Complement(Box::new(f.expand_sigma())),
            StateFormula::Integral(g) => StateFormula::Integral(Box::new(g.expand_sigma())),
            StateFormula::Diamond(t, f) => StateFormula::Diamond(*t, Box::new(f.expand_sigma())),
            StateFormula::Min(a, b) => StateFormula::Integral(Box::new(TrajectoryFormula::Min(
                Box::new(TrajectoryFormula::EvalAt(
                    Box::new(a.expand_sigma()),
                    Rational::ZERO,
                )),
                Box::new(TrajectoryFormula::EvalAt(
                    Box::new(b.expand_sigma()),
                    Rational::ZERO,
                )),
            ))),
            StateFormula::Minus(f, q) => {
                StateFormula::Integral(Box::new(TrajectoryFormula::Minus(
                    Box::new(TrajectoryFormula::EvalAt(
                        Box::new(f.expand_sigma()),
                        Rational::ZERO,
                    )),
                    *q,
                )))
            }
        }
    }

    /// Largest time stamp appearing in the formula, if any.
    pub fn max_time(&self) -> Option<Rational> {
        match self {
            StateFormula::Const(_) | StateFormula::Obs => None,
            StateFormula::Min(a, b) => max_option(a.max_time(), b.max_time()),
            StateFormula::Complement(f) | StateFormula::Minus(f, _) => f.max_time(),
            StateFormula::Diamond(t, f) => max_option(Some(*t), f.max_time()),
            StateFormula::Integral(g) => g.max_time(),
        }
    }
}

impl TrajectoryFormula {
    pub fn check_dialect(&self, dialect: Dialect) -> Result<(), LogicError> {
        match self {
            TrajectoryFormula::EvalAt(f, _) => f.check_dialect(dialect),
            TrajectoryFormula::Min(a, b) | TrajectoryFormula::Max(a, b) => {
                a.check_dialect(dialect)?;
                b.check_dialect(dialect)
            }
            TrajectoryFormula::Minus(g, q) | TrajectoryFormula::Plus(g, q) => {
                if !q.in_unit() {
                    return Err(LogicError::ConstantOutOfRange(*q));
                }
                g.check_dialect(dialect)
            }
        }
    }

    pub fn expand_sigma(&self) -> TrajectoryFormula {
        match self {
            TrajectoryFormula::EvalAt(f, t) => {
                TrajectoryFormula::EvalAt(Box::new(f.expand_sigma()), *t)
            }
            TrajectoryFormula::Min(a, b) => {
                TrajectoryFormula::Min(Box::new(a.expand_sigma()), Box::new(b.expand_sigma()))
            }
            TrajectoryFormula::Max(a, b) => {
                TrajectoryFormula::Max(Box::new(a.expand_sigma()), Box::new(b.expand_sigma()))
            }
            TrajectoryFormula::Minus(g, q) => {
                TrajectoryFormula::Minus(Box::new(g.expand_sigma()), *q)
            }
            TrajectoryFormula::Plus(g, q) => {
                TrajectoryFormula::Plus(Box::new(g.expand_sigma()), *q)
            }
        }
    }

    pub fn max_time(&self) -> Option<Rational> {
        match self {
            TrajectoryFormula::EvalAt(f, t) => max_option(Some(*t), f.max_time()),
            TrajectoryFormula::Min(a, b) | TrajectoryFormula::Max(a, b) => {
                max_option(a.max_time(), b.max_time())
            }
            TrajectoryFormula::Minus(g, _) | TrajectoryFormula::Plus(g, _) => g.max_time(),
        }
    }
}

fn max_option(a: Option<Rational>, b: Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}
