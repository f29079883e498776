//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature (on by default) work can fan out over rayon;
//! without it every mode runs sequentially. Results always come back in
//! index order, so downstream aggregation is identical in both modes.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    /// Rayon's global pool.
    #[default]
    Parallel,
    /// A dedicated pool with the given number of threads.
    Jobs(usize),
}

impl Execution {
    pub fn from_jobs(jobs: Option<usize>) -> Self {
        match jobs {
            None => Execution::Parallel,
            Some(0 | 1) => Execution::Sequential,
            Some(k) => Execution::Jobs(k),
        }
    }

    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `(0..len).map(f)` collected in order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..len).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..len).into_par_iter().map(f).collect()
            }
            #[cfg(feature = "parallel")]
            Execution::Jobs(k) => {
                use rayon::prelude::*;
                match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
                    Ok(pool) => pool.install(|| (0..len).into_par_iter().map(f).collect()),
                    Err(_) => (0..len).map(f).collect(),
                }
            }
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel | Execution::Jobs(_) => (0..len).map(f).collect(),
        }
    }
}

/// Pairwise (cascade) summation in the given order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2..=8 => values.iter().sum(),
        len => {
            let (a, b) = values.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let f = |i: usize| (i as f64).sqrt() * 3.0;
        let seq = Execution::Sequential.map(1000, f);
        assert_eq!(Execution::Parallel.map(1000, f), seq);
        assert_eq!(Execution::Jobs(3).map(1000, f), seq);
        assert_eq!(seq[10], f(10));
    }

    #[test]
    fn jobs_mapping() {
        assert_eq!(Execution::from_jobs(None), Execution::Parallel);
        assert_eq!(Execution::from_jobs(Some(1)), Execution::Sequential);
        assert_eq!(Execution::from_jobs(Some(4)), Execution::Jobs(4));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_exact_values() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
