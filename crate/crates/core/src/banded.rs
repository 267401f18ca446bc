//! Symmetric positive definite band matrices with in-place Cholesky.

/// Lower band of a symmetric matrix; row `i` stores columns `i − bw ..= i`.
#[derive(Clone, Debug)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

#[derive(Debug, PartialEq)]
pub(crate) struct NotPositiveDefinite(pub usize);

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)`; the symmetric partner is implied.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    /// Replaces row and column `i` by the identity row.
    pub fn pin(&mut self, i: usize) {
        for j in i.saturating_sub(self.bw)..=i {
            let k = self.idx(i, j);
            self.data[k] = 0.0;
        }
        for r in i + 1..(i + self.bw + 1).min(self.n) {
            let k = self.idx(r, i);
            self.data[k] = 0.0;
        }
        let k = self.idx(i, i);
        self.data[k] = 1.0;
    }

    #[cfg(test)]
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Cholesky factor `L` with `A = L Lᵀ`, overwriting the band.
    pub fn factor(mut self) -> Result<BandCholesky, NotPositiveDefinite> {
        let w = self.bw + 1;
        let bw = self.bw;
        for i in 0..self.n {
            let start = i.saturating_sub(bw);
            for j in start..i {
                let len = j - start;
                let (head, tail) = self.data.split_at_mut(i * w);
                let rj = &head[j * w + (start + bw - j)..][..len];
                let row_i = &mut tail[..w];
                let ri = &row_i[start + bw - i..][..len];
                let s: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                let ljj = head[j * w + bw];
                row_i[j + bw - i] = (row_i[j + bw - i] - s) / ljj;
            }
            let row_i = &mut self.data[i * w..(i + 1) * w];
            let off = start + bw - i;
            let s: f64 = row_i[off..bw].iter().map(|a| a * a).sum();
            let d = row_i[bw] - s;
            if !(d > 0.0) {
                return Err(NotPositiveDefinite(i));
            }
            row_i[bw] = d.sqrt();
        }
        Ok(BandCholesky { l: self })
    }
}

#[derive(Debug)]
pub(crate) struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let BandMatrix { n, bw, ref data } = self.l;
        let w = bw + 1;
        let mut y = b.to_vec();
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let row = &data[i * w..(i + 1) * w];
            let mut s = y[i];
            for j in start..i {
                s -= row[j + bw - i] * y[j];
            }
            y[i] = s / row[bw];
        }
        for i in (0..n).rev() {
            let row = &data[i * w..(i + 1) * w];
            y[i] /= row[bw];
            let yi = y[i];
            let start = i.saturating_sub(bw);
            for j in start..i {
                y[j] -= row[j + bw - i] * yi;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_spd_band_system() {
        let (n, bw) = (60, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = BandMatrix::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                a.add(i, j, rng.gen_range(-1.0..1.0));
            }
            a.add(i, i, 2.0 * bw as f64 + 1.0);
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.mul(&x);
        let sol = a.factor().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&sol) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = BandMatrix::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 1.0);
        a.add(2, 2, 1.0);
        assert_eq!(a.factor().unwrap_err(), NotPositiveDefinite(1));
    }

    #[test]
    fn pinning_decouples_a_row() {
        let mut a = BandMatrix::zeros(4, 2);
        for i in 0..4 {
            a.add(i, i, 4.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a.pin(1);
        let y = a.mul(&[1.0, 5.0, 1.0, 1.0]);
        assert_eq!(y[1], 5.0);
        assert_eq!(y[0], 4.0);
    }
}
