//! Dense symmetric positive (semi)definite solves for the small `p × p`
//! systems that show up in fitting.

/// Smallest admissible pivot relative to the largest one.
pub const SINGULARITY_THRESHOLD: f64 = 1e-10;

/// Cholesky factorisation with symmetric diagonal pivoting: `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    n: usize,
    /// Lower triangle, row-major.
    l: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedCholesky {
    /// Factorises the row-major symmetric matrix `a`. On failure returns the
    /// offending pivot ratio (smallest/largest).
    pub fn factor(a: &[f64], n: usize) -> Result<Self, f64> {
        assert_eq!(a.len(), n * n);
        let mut w = a.to_vec();
        let mut l = vec![0.0; n * n];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut largest = 0.0_f64;
        for k in 0..n {
            let (j, _) = (k..n)
                .map(|j| (j, w[j * n + j]))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty range");
            if j != k {
                for c in 0..n {
                    w.swap(k * n + c, j * n + c);
                }
                for r in 0..n {
                    w.swap(r * n + k, r * n + j);
                }
                for c in 0..k {
                    l.swap(k * n + c, j * n + c);
                }
                perm.swap(k, j);
            }
            let pivot = w[k * n + k];
            if k == 0 {
                largest = pivot;
            }
            let ratio = if largest > 0.0 { pivot / largest } else { 0.0 };
            if !(ratio > SINGULARITY_THRESHOLD) {
                return Err(ratio);
            }
            let d = pivot.sqrt();
            l[k * n + k] = d;
            for i in k + 1..n {
                l[i * n + k] = w[i * n + k] / d;
            }
            for i in k + 1..n {
                for c in k + 1..=i {
                    let v = w[i * n + c] - l[i * n + k] * l[c * n + k];
                    w[i * n + c] = v;
                    w[c * n + i] = v;
                }
            }
        }
        Ok(Self { n, l, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.l[i * n + k] * y[k]).sum();
            y[i] = (y[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.l[k * n + i] * y[k]).sum();
            y[i] = (y[i] - s) / self.l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}
