//! Affine forms over named variables.

use std::collections::BTreeMap;
use std::fmt;

use crate::scalar::Scalar;

/// `Σ coeff·var + constant`, with zero coefficients never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinearExpr<S> {
    coeffs: BTreeMap<String, S>,
    constant: S,
}

impl<S: Scalar> Default for LinearExpr<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Scalar> LinearExpr<S> {
    pub fn zero() -> Self {
        LinearExpr { coeffs: BTreeMap::new(), constant: S::zero() }
    }

    pub fn constant(c: S) -> Self {
        LinearExpr { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn var(name: &str) -> Self {
        Self::term(name, S::one())
    }

    pub fn term(name: &str, coeff: S) -> Self {
        let mut e = Self::zero();
        e.add_term(name, coeff);
        e
    }

    pub fn from_terms<I, N>(terms: I, constant: S) -> Self
    where
        I: IntoIterator<Item = (N, S)>,
        N: AsRef<str>,
    {
        let mut e = Self::constant(constant);
        for (n, c) in terms {
            e.add_term(n.as_ref(), c);
        }
        e
    }

    pub fn add_term(&mut self, name: &str, coeff: S) {
        if coeff.is_zero() {
            return;
        }
        match self.coeffs.get_mut(name) {
            Some(c) => {
                *c = c.clone() + coeff;
                if c.is_zero() {
                    self.coeffs.remove(name);
                }
            }
            None => {
                self.coeffs.insert(name.to_string(), coeff);
            }
        }
    }

    pub fn add_constant(&mut self, c: S) {
        self.constant = self.constant.clone() + c;
    }

    pub fn coeff(&self, name: &str) -> S {
        self.coeffs.get(name).cloned().unwrap_or_else(S::zero)
    }

    pub fn get_constant(&self) -> &S {
        &self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &S)> {
        self.coeffs.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.coeffs.keys().map(|k| k.as_str())
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.coeffs.contains_key(name)
    }

    pub fn scale(&self, k: &S) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        LinearExpr {
            coeffs: self.coeffs.iter().map(|(n, c)| (n.clone(), c.clone() * k.clone())).collect(),
            constant: self.constant.clone() * k.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&(-S::one()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut e = self.clone();
        for (n, c) in &other.coeffs {
            e.add_term(n, c.clone());
        }
        e.add_constant(other.constant.clone());
        e
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Replaces `name` by `by` everywhere.
    pub fn substitute(&self, name: &str, by: &Self) -> Self {
        match self.coeffs.get(name) {
            None => self.clone(),
            Some(k) => {
                let mut rest = self.clone();
                rest.coeffs.remove(name);
                rest.add(&by.scale(k))
            }
        }
    }

    /// Drops the constant term.
    pub fn homogeneous(&self) -> Self {
        LinearExpr { coeffs: self.coeffs.clone(), constant: S::zero() }
    }

    /// Coefficient row in the given variable order.
    ///
    /// Returns `None` if the expression mentions a variable outside `vars`.
    pub fn row(&self, vars: &[String]) -> Option<Vec<S>> {
        if self.coeffs.keys().any(|k| !vars.contains(k)) {
            return None;
        }
        Some(vars.iter().map(|v| self.coeff(v)).collect())
    }

    pub fn eval<F>(&self, mut value: F) -> S
    where
        F: FnMut(&str) -> S,
    {
        let mut acc = self.constant.clone();
        for (n, c) in &self.coeffs {
            acc = acc + c.clone() * value(n);
        }
        acc
    }

    pub fn eval_map(&self, point: &BTreeMap<String, S>) -> S {
        self.eval(|n| point.get(n).cloned().unwrap_or_else(S::zero))
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> LinearExpr<T> {
        let mut e = LinearExpr::constant(f(&self.constant));
        for (n, c) in &self.coeffs {
            e.add_term(n, f(c));
        }
        e
    }
}

fn is_negative<S: Scalar>(c: &S) -> bool {
    *c < S::zero()
}

impl<S: Scalar> fmt::Display for LinearExpr<S> {
    /// Renders as `3*x - 1/2*y + 4`; the zero form renders as `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (n, c) in &self.coeffs {
            let neg = is_negative(c);
            let mag = if neg { -c.clone() } else { c.clone() };
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            if mag.is_one() {
                write!(f, "{n}")?;
            } else {
                write!(f, "{mag}*{n}")?;
            }
            first = false;
        }
        let k = &self.constant;
        if first {
            write!(f, "{k}")
        } else if k.is_zero() {
            Ok(())
        } else if is_negative(k) {
            write!(f, " - {}", -k.clone())
        } else {
            write!(f, " + {k}")
        }
    }
}
