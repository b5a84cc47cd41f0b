//! Banded linear solver with partial pivoting.

#[derive(Debug, Clone)]
pub struct BandMatrix {
    size: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular(pub usize);

impl BandMatrix {
    pub fn new(size: usize, lower: usize, upper: usize) -> Self {
        // pivoting fills up to `lower` extra superdiagonals
        let width = 2 * lower + upper + 1;
        BandMatrix { size, lower, upper, width, data: vec![0.0; size * width] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.lower - i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    /// Set entry `(i, j)`; entries outside the band are ignored.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        if j < self.size && j + self.lower >= i && j <= i + self.upper {
            let k = self.idx(i, j);
            self.data[k] = v;
        }
    }

    /// Solve `A x = rhs` in place, consuming a copy of the factors.
    pub fn solve(&self, rhs: &mut [f64]) -> Result<(), Singular> {
        let mut a = self.clone();
        a.solve_in_place(rhs)
    }

    fn solve_in_place(&mut self, rhs: &mut [f64]) -> Result<(), Singular> {
        let n = self.size;
        let reach = self.lower + self.upper;
        for k in 0..n {
            let last_row = (k + self.lower).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Singular(k));
            }
            if piv != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(piv, j));
                    self.data.swap(a, b);
                }
                rhs.swap(k, piv);
            }
            let diag = self.get(k, k);
            for i in k + 1..=last_row {
                let f = self.get(i, k) / diag;
                if f == 0.0 {
                    continue;
                }
                for j in k..=last_col {
                    let v = self.get(k, j);
                    let t = self.idx(i, j);
                    self.data[t] -= f * v;
                }
                rhs[i] -= f * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let mut s = rhs[k];
            for j in k + 1..=last_col {
                s -= self.get(k, j) * rhs[j];
            }
            rhs[k] = s / self.get(k, k);
        }
        Ok(())
    }
}
