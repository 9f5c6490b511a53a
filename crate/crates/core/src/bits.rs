/// Dense square bit matrix, row-major, 64 columns per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        BitMatrix { n, words, data: vec![0; n * words] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        self.data[i * self.words + j / 64] |= 1 << (j % 64);
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.words..(i + 1) * self.words]
    }

    pub fn row_ones(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        ones(self.row(i))
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::new(self.n);
        for i in 0..self.n {
            for j in self.row_ones(i) {
                t.set(j, i);
            }
        }
        t
    }

    /// Elementwise OR with another matrix of the same size.
    pub fn union(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.n, other.n);
        BitMatrix {
            n: self.n,
            words: self.words,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a | b).collect(),
        }
    }
}

/// Indices of set bits in a word slice.
pub fn ones(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(w, &bits)| {
        let mut bits = bits;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(w * 64 + b)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_transpose() {
        let mut m = BitMatrix::new(130);
        m.set(0, 129);
        m.set(128, 3);
        assert!(m.get(0, 129) && m.get(128, 3) && !m.get(3, 128));
        let t = m.transpose();
        assert!(t.get(129, 0) && t.get(3, 128));
        assert_eq!(m.row_ones(0).collect::<Vec<_>>(), vec![129]);
        assert_eq!(m.union(&t).count(), 4);
    }
}
