//! Data-parallel map used for population evaluation. With the `parallel`
//! feature off, [`Execution::Parallel`] runs sequentially.

use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{NeatError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether this build can actually fan out.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Execution::Parallel => "parallel",
            Execution::Sequential => "sequential",
        }
    }
}

impl FromStr for Execution {
    type Err = NeatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Execution::Parallel),
            "sequential" => Ok(Execution::Sequential),
            other => Err(NeatError::Config(format!(
                "unknown execution `{other}` (expected parallel or sequential)"
            ))),
        }
    }
}

/// Maps `f` over `items`, preserving order. Results are identical under both
/// execution modes as long as `f` is pure.
pub fn map<T, U, F>(items: &[T], execution: Execution, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| x.wrapping_mul(2654435761) % 97;
        assert_eq!(map(&items, Execution::Parallel, f), map(&items, Execution::Sequential, f));
    }
}
