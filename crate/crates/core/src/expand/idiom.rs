use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdiomError {
    #[error("step must not be zero")]
    ZeroStep,
    #[error("empty range: seq({start},{max},{step})")]
    EmptyRange { start: i64, max: i64, step: i64 },
    #[error("expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
}

pub type IdiomFn = dyn Fn(&[i64]) -> Result<Vec<String>, IdiomError> + Send + Sync;

/// Named compile-time value generators usable in FORK_MERGE axis declarations.
pub struct IdiomRegistry {
    idioms: BTreeMap<String, Box<IdiomFn>>,
}

impl IdiomRegistry {
    /// A registry with no idioms at all.
    pub fn empty() -> Self {
        Self {
            idioms: BTreeMap::new(),
        }
    }

    /// Registry with the built-in `seq(start, max, step)`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("seq", |args| match *args {
            [start, max, step] => eval_seq(start, max, step),
            _ => Err(IdiomError::Arity {
                expected: 3,
                got: args.len(),
            }),
        });
        reg
    }

    pub fn register<F>(&mut self, name: impl Into<String>, rule: F)
    where
        F: Fn(&[i64]) -> Result<Vec<String>, IdiomError> + Send + Sync + 'static,
    {
        self.idioms.insert(name.into(), Box::new(rule));
    }

    pub fn get(&self, name: &str) -> Option<&IdiomFn> {
        self.idioms.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.idioms.keys().map(String::as_str)
    }
}

impl Default for IdiomRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl fmt::Debug for IdiomRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.idioms.keys()).finish()
    }
}

/// `start, start+step, ...` up to and including `max`.
pub fn eval_seq(start: i64, max: i64, step: i64) -> Result<Vec<String>, IdiomError> {
    if step == 0 {
        return Err(IdiomError::ZeroStep);
    }
    if (step > 0 && start > max) || (step < 0 && start < max) {
        return Err(IdiomError::EmptyRange { start, max, step });
    }
    let count = (max.abs_diff(start) / step.unsigned_abs()) as usize + 1;
    let mut values = Vec::with_capacity(count);
    let mut current = start;
    loop {
        values.push(current.to_string());
        match current.checked_add(step) {
            Some(next) if (step > 0 && next <= max) || (step < 0 && next >= max) => current = next,
            _ => break,
        }
    }
    Ok(values)
}
