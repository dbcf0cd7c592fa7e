//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature, [`Parallelism::Parallel`] runs on the rayon
//! pool; without it every call is sequential. Results are always returned in
//! input order, so callers that reduce in order get identical output either
//! way.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    #[default]
    Parallel,
    Sequential,
}

impl Parallelism {
    /// What this build will actually do.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Parallelism::Sequential
        }
    }
}

pub fn map_indexed<T, R, F>(mode: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map_indexed(Parallelism::Sequential, &items, |i, x| x * 3 + i as u64);
        let par = map_indexed(Parallelism::Parallel, &items, |i, x| x * 3 + i as u64);
        assert_eq!(seq, par);
    }
}
