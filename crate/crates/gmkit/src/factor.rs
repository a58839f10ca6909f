//! Dense discrete factors and variable elimination.
//!
//! Tables are flat with the first scope variable varying fastest, so entry `i` of a factor
//! over `(x1, x2, x3)` with binary variables is `x1 = i % 2, x2 = (i / 2) % 2, x3 = i / 4`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactorError {
    #[error("table for scope {scope:?} needs {expected} entries, got {actual}")]
    LengthMismatch {
        scope: Vec<String>,
        expected: usize,
        actual: usize,
    },
    #[error("entry {index} is negative or not finite")]
    InvalidValue { index: usize },
    #[error("variable {0} appears twice in one scope")]
    DuplicateVariable(String),
    #[error("variable {0} has cardinality zero")]
    ZeroCardinality(String),
    #[error("variable {name} has cardinality {left} in one factor and {right} in another")]
    CardinalityConflict { name: String, left: usize, right: usize },
    #[error("variable {0} is not in scope")]
    NotInScope(String),
    #[error("state {state} out of range for {name} (cardinality {card})")]
    StateOutOfRange { name: String, state: usize, card: usize },
    #[error("factor sums to zero")]
    ZeroNormaliser,
    #[error("variable {0} is in both the keep set and the elimination order")]
    KeepAndEliminate(String),
    #[error("variable {0} appears in no factor")]
    UnusedVariable(String),
    #[error("variable {0} is neither kept nor eliminated")]
    UnaccountedVariable(String),
    #[error("variable {0} appears twice in the elimination order")]
    RepeatedElimination(String),
}

/// A named discrete variable with `card` states `0..card`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable {
    pub name: String,
    pub card: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, card: usize) -> Self {
        Variable {
            name: name.into(),
            card,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, 2)
    }
}

/// Non-negative table over an ordered scope.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<Variable>,
    values: Vec<f64>,
}

/// Maximising state of the removed variable for every entry of the reduced factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Argmax {
    pub variable: Variable,
    pub scope: Vec<Variable>,
    pub states: Vec<usize>,
}

/// Size accounting for one run of [`eliminate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationReport {
    pub order: Vec<String>,
    /// Entries of the product table formed at each step; the final combination of the
    /// remaining factors is the last entry.
    pub step_sizes: Vec<usize>,
    pub peak_entries: usize,
    /// The factor produced by summing out each eliminated variable, in order.
    pub intermediates: Vec<Factor>,
}

impl Factor {
    pub fn new(scope: Vec<Variable>, values: Vec<f64>) -> Result<Self, FactorError> {
        let mut seen = BTreeSet::new();
        for v in &scope {
            if !seen.insert(v.name.as_str()) {
                return Err(FactorError::DuplicateVariable(v.name.clone()));
            }
            if v.card == 0 {
                return Err(FactorError::ZeroCardinality(v.name.clone()));
            }
        }
        let expected: usize = scope.iter().map(|v| v.card).product();
        if values.len() != expected {
            return Err(FactorError::LengthMismatch {
                scope: scope.iter().map(|v| v.name.clone()).collect(),
                expected,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(FactorError::InvalidValue { index });
        }
        Ok(Factor { scope, values })
    }

    /// Convenience constructor for binary scopes.
    pub fn binary(names: &[&str], values: Vec<f64>) -> Result<Self, FactorError> {
        Self::new(names.iter().map(|n| Variable::binary(*n)).collect(), values)
    }

    pub fn ones(scope: Vec<Variable>) -> Result<Self, FactorError> {
        let n = scope.iter().map(|v| v.card).product();
        Self::new(scope, vec![1.0; n])
    }

    /// Constant factor with empty scope.
    pub fn scalar(value: f64) -> Result<Self, FactorError> {
        Self::new(Vec::new(), vec![value])
    }

    pub fn scope(&self) -> &[Variable] {
        &self.scope
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.scope.iter().map(|v| v.name.as_str())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.scope.iter().position(|v| v.name == name)
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.scope.iter().find(|v| v.name == name)
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.scope)
    }

    /// Flat index of a full assignment given in scope order.
    pub fn index_of(&self, states: &[usize]) -> usize {
        debug_assert_eq!(states.len(), self.scope.len());
        states
            .iter()
            .zip(self.strides())
            .map(|(s, st)| s * st)
            .sum()
    }

    /// States of every scope variable at flat index `i`.
    pub fn states_at(&self, mut i: usize) -> Vec<usize> {
        self.scope
            .iter()
            .map(|v| {
                let s = i % v.card;
                i /= v.card;
                s
            })
            .collect()
    }

    pub fn get(&self, states: &[usize]) -> f64 {
        self.values[self.index_of(states)]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn scale(&self, c: f64) -> Result<Factor, FactorError> {
        Factor::new(self.scope.clone(), self.values.iter().map(|x| x * c).collect())
    }

    /// Pointwise product; scope is the union in first-appearance order.
    pub fn product(&self, other: &Factor) -> Result<Factor, FactorError> {
        product(&[self, other])
    }

    /// Sums `name` out of the table.
    pub fn sum_out(&self, name: &str) -> Result<Factor, FactorError> {
        let (scope, out_len, pos) = self.reduced_scope(name)?;
        let mut out = vec![0.0; out_len];
        let card = self.scope[pos].card;
        let inner: usize = self.scope[..pos].iter().map(|v| v.card).product();
        for (i, x) in self.values.iter().enumerate() {
            let j = i % inner + (i / (inner * card)) * inner;
            out[j] += x;
        }
        Factor::new(scope, out)
    }

    /// Maximises `name` out of the table; ties go to the lowest state.
    pub fn max_out(&self, name: &str) -> Result<(Factor, Argmax), FactorError> {
        let (scope, out_len, pos) = self.reduced_scope(name)?;
        let mut out = vec![f64::NEG_INFINITY; out_len];
        let mut arg = vec![0usize; out_len];
        let card = self.scope[pos].card;
        let inner: usize = self.scope[..pos].iter().map(|v| v.card).product();
        for (i, x) in self.values.iter().enumerate() {
            let j = i % inner + (i / (inner * card)) * inner;
            if *x > out[j] {
                out[j] = *x;
                arg[j] = (i / inner) % card;
            }
        }
        let argmax = Argmax {
            variable: self.scope[pos].clone(),
            scope: scope.clone(),
            states: arg,
        };
        Ok((Factor::new(scope, out)?, argmax))
    }

    fn reduced_scope(&self, name: &str) -> Result<(Vec<Variable>, usize, usize), FactorError> {
        let pos = self
            .position(name)
            .ok_or_else(|| FactorError::NotInScope(name.to_string()))?;
        let mut scope = self.scope.clone();
        let removed = scope.remove(pos);
        Ok((scope, self.values.len() / removed.card, pos))
    }

    /// Slices the table at the given states; every assigned variable must be in scope.
    pub fn condition(&self, assignment: &[(&str, usize)]) -> Result<Factor, FactorError> {
        for (name, _) in assignment {
            if !self.contains(name) {
                return Err(FactorError::NotInScope(name.to_string()));
            }
        }
        self.restrict(assignment)
    }

    /// Like [`Factor::condition`] but ignores assignments to variables outside the scope.
    pub fn restrict(&self, assignment: &[(&str, usize)]) -> Result<Factor, FactorError> {
        let mut fixed: Vec<Option<usize>> = vec![None; self.scope.len()];
        for (name, state) in assignment {
            if let Some(p) = self.position(name) {
                let card = self.scope[p].card;
                if *state >= card {
                    return Err(FactorError::StateOutOfRange {
                        name: name.to_string(),
                        state: *state,
                        card,
                    });
                }
                fixed[p] = Some(*state);
            }
        }
        if fixed.iter().all(Option::is_none) {
            return Ok(self.clone());
        }
        let scope: Vec<Variable> = self
            .scope
            .iter()
            .zip(&fixed)
            .filter(|(_, f)| f.is_none())
            .map(|(v, _)| v.clone())
            .collect();
        let values = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                self.states_at(*i)
                    .iter()
                    .zip(&fixed)
                    .all(|(s, f)| f.is_none_or(|v| v == *s))
            })
            .map(|(_, x)| *x)
            .collect();
        Factor::new(scope, values)
    }

    /// Scales to unit sum and returns the log of the original sum.
    pub fn normalise(&self) -> Result<(Factor, f64), FactorError> {
        let z = self.sum();
        if !(z > 0.0) {
            return Err(FactorError::ZeroNormaliser);
        }
        let f = Factor {
            scope: self.scope.clone(),
            values: self.values.iter().map(|x| x / z).collect(),
        };
        Ok((f, z.ln()))
    }

    /// Reorders the scope, permuting the table accordingly.
    pub fn permute(&self, names: &[&str]) -> Result<Factor, FactorError> {
        if names.len() != self.scope.len() {
            return Err(FactorError::NotInScope(format!("{names:?}")));
        }
        let scope: Vec<Variable> = names
            .iter()
            .map(|n| {
                self.variable(n)
                    .cloned()
                    .ok_or_else(|| FactorError::NotInScope(n.to_string()))
            })
            .collect::<Result<_, _>>()?;
        let target = Factor::ones(scope)?;
        let positions: Vec<usize> = names.iter().map(|n| self.position(n).unwrap()).collect();
        let values = (0..target.len())
            .map(|i| {
                let states = target.states_at(i);
                let mut own = vec![0; self.scope.len()];
                for (k, p) in positions.iter().enumerate() {
                    own[*p] = states[k];
                }
                self.get(&own)
            })
            .collect();
        Factor::new(target.scope, values)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.names().collect();
        write!(f, "φ({}) = {:?}", names.join(","), self.values)
    }
}

fn strides(scope: &[Variable]) -> Vec<usize> {
    let mut acc = 1;
    scope
        .iter()
        .map(|v| {
            let s = acc;
            acc *= v.card;
            s
        })
        .collect()
}

/// Union of scopes in first-appearance order, checking cardinalities agree.
pub fn union_scope<'a>(factors: impl IntoIterator<Item = &'a Factor>) -> Result<Vec<Variable>, FactorError> {
    let mut scope: Vec<Variable> = Vec::new();
    for f in factors {
        for v in &f.scope {
            match scope.iter().find(|u| u.name == v.name) {
                Some(u) if u.card != v.card => {
                    return Err(FactorError::CardinalityConflict {
                        name: v.name.clone(),
                        left: u.card,
                        right: v.card,
                    })
                }
                Some(_) => {}
                None => scope.push(v.clone()),
            }
        }
    }
    Ok(scope)
}

/// Pointwise product of any number of factors; the empty product is the scalar 1.
pub fn product(factors: &[&Factor]) -> Result<Factor, FactorError> {
    let scope = union_scope(factors.iter().copied())?;
    let out_strides = strides(&scope);
    let maps: Vec<Vec<(usize, usize)>> = factors
        .iter()
        .map(|f| {
            f.scope
                .iter()
                .zip(f.strides())
                .map(|(v, st)| {
                    let p = scope.iter().position(|u| u.name == v.name).unwrap();
                    (p, st)
                })
                .collect()
        })
        .collect();
    let total: usize = scope.iter().map(|v| v.card).product();
    let mut values = vec![1.0; total];
    let mut states = vec![0usize; scope.len()];
    for (i, out) in values.iter_mut().enumerate() {
        let mut r = i;
        for (k, v) in scope.iter().enumerate() {
            states[k] = r % v.card;
            r /= v.card;
        }
        for (f, map) in factors.iter().zip(&maps) {
            let idx: usize = map.iter().map(|(p, st)| states[*p] * st).sum();
            *out *= f.values[idx];
        }
    }
    debug_assert_eq!(out_strides.len(), scope.len());
    Factor::new(scope, values)
}

/// Sum-product variable elimination.
///
/// For each variable of `order`, multiplies every remaining factor that mentions it and sums
/// it out. The remaining factors are then multiplied into an unnormalised factor whose scope
/// is `keep` (in first-appearance order).
pub fn eliminate(
    factors: &[Factor],
    keep: &[&str],
    order: &[&str],
) -> Result<(Factor, EliminationReport), FactorError> {
    let mentioned: BTreeSet<&str> = factors.iter().flat_map(|f| f.names()).collect();
    let mut seen = BTreeSet::new();
    for v in order {
        if keep.contains(v) {
            return Err(FactorError::KeepAndEliminate(v.to_string()));
        }
        if !seen.insert(*v) {
            return Err(FactorError::RepeatedElimination(v.to_string()));
        }
    }
    for v in keep.iter().chain(order) {
        if !mentioned.contains(v) {
            return Err(FactorError::UnusedVariable(v.to_string()));
        }
    }
    if let Some(v) = mentioned.iter().find(|v| !keep.contains(v) && !order.contains(v)) {
        return Err(FactorError::UnaccountedVariable(v.to_string()));
    }
    union_scope(factors)?;

    let mut pool: Vec<Factor> = factors.to_vec();
    let mut step_sizes = Vec::with_capacity(order.len() + 1);
    let mut intermediates = Vec::with_capacity(order.len());
    for v in order {
        let (with, without): (Vec<Factor>, Vec<Factor>) = pool.into_iter().partition(|f| f.contains(v));
        let refs: Vec<&Factor> = with.iter().collect();
        let joint = product(&refs)?;
        step_sizes.push(joint.len());
        let reduced = joint.sum_out(v)?;
        intermediates.push(reduced.clone());
        pool = without;
        pool.push(reduced);
    }
    let refs: Vec<&Factor> = pool.iter().collect();
    let result = product(&refs)?;
    step_sizes.push(result.len());
    let peak_entries = step_sizes.iter().copied().max().unwrap_or(0);
    let report = EliminationReport {
        order: order.iter().map(|s| s.to_string()).collect(),
        step_sizes,
        peak_entries,
        intermediates,
    };
    Ok((result, report))
}
