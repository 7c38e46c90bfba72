//! Linear systems over GF(2).

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRow {
    words: Vec<u64>,
}

impl BitRow {
    pub fn zeros(n: usize) -> Self {
        BitRow {
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }
}

/// Solves `A x = b` over GF(2) by Gaussian elimination. Returns one solution
/// (free variables set to zero) or `None` when the system is inconsistent.
pub fn solve(nvars: usize, equations: &[(BitRow, bool)]) -> Option<Vec<bool>> {
    let mut rows: Vec<(BitRow, bool)> = equations.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for col in 0..nvars {
        let Some(p) = (r..rows.len()).find(|&i| rows[i].0.get(col)) else {
            continue;
        };
        rows.swap(r, p);
        let (pivot_row, pivot_rhs) = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row.0.get(col) {
                row.0.xor_assign(&pivot_row);
                row.1 ^= pivot_rhs;
            }
        }
        pivots.push((r, col));
        r += 1;
    }
    if rows[r..].iter().any(|(_, rhs)| *rhs) {
        return None;
    }
    let mut x = vec![false; nvars];
    for &(row, col) in &pivots {
        x[col] = rows[row].1;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(n: usize, vars: &[usize], rhs: bool) -> (BitRow, bool) {
        let mut r = BitRow::zeros(n);
        for &v in vars {
            r.flip(v);
        }
        (r, rhs)
    }

    #[test]
    fn odd_cycle_with_all_differences_is_inconsistent() {
        let eqs = vec![eq(3, &[0, 1], true), eq(3, &[1, 2], true), eq(3, &[0, 2], true)];
        assert!(solve(3, &eqs).is_none());
    }

    #[test]
    fn solution_satisfies_equations() {
        let eqs = vec![eq(70, &[0, 65], true), eq(70, &[65, 69], false), eq(70, &[3], true)];
        let x = solve(70, &eqs).unwrap();
        assert!(x[0] ^ x[65]);
        assert_eq!(x[65], x[69]);
        assert!(x[3]);
    }
}
