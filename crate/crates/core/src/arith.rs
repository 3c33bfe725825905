//! Exact integer and rational arithmetic helpers used by the whole kernel.
//!
//! All geometry in this crate is done over arbitrary-precision integers
//! (`num_bigint::BigInt`) and rationals; no floating point anywhere.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Int = BigInt;
pub type Rat = BigRational;

pub fn int(v: i64) -> Int {
    Int::from(v)
}

pub fn vec_from_i64(v: &[i64]) -> Vec<Int> {
    v.iter().map(|&x| Int::from(x)).collect()
}

pub fn zeros(n: usize) -> Vec<Int> {
    vec![Int::zero(); n]
}

pub fn is_zero_vec(v: &[Int]) -> bool {
    v.iter().all(|x| x.is_zero())
}

pub fn dot(a: &[Int], b: &[Int]) -> Int {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Int::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

pub fn add_vec(a: &[Int], b: &[Int]) -> Vec<Int> {
    a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
}

pub fn sub_vec(a: &[Int], b: &[Int]) -> Vec<Int> {
    a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()
}

pub fn neg_vec(a: &[Int]) -> Vec<Int> {
    a.iter().map(|x| -x).collect()
}

pub fn scale_vec(c: &Int, a: &[Int]) -> Vec<Int> {
    a.iter().map(|x| c * x).collect()
}

/// a*x + b*y componentwise.
pub fn comb_vec(a: &Int, x: &[Int], b: &Int, y: &[Int]) -> Vec<Int> {
    x.iter().zip(y.iter()).map(|(p, q)| a * p + b * q).collect()
}

pub fn gcd_vec(v: &[Int]) -> Int {
    let mut g = Int::zero();
    for x in v {
        g = g.gcd(x);
        if g.is_one() {
            break;
        }
    }
    g
}

/// Divide out the gcd. The zero vector stays zero; direction (sign) is kept.
pub fn primitive(v: &[Int]) -> Vec<Int> {
    let g = gcd_vec(v);
    if g.is_zero() || g.is_one() {
        return v.to_vec();
    }
    v.iter().map(|x| x / &g).collect()
}

/// Primitive with a deterministic sign: first nonzero entry positive.
/// Used for line/hyperplane normals where the direction carries no meaning.
pub fn primitive_signed(v: &[Int]) -> Vec<Int> {
    let p = primitive(v);
    match p.iter().find(|x| !x.is_zero()) {
        Some(x) if x.is_negative() => neg_vec(&p),
        _ => p,
    }
}

pub fn rat_vec(v: &[Int]) -> Vec<Rat> {
    v.iter().map(|x| Rat::from_integer(x.clone())).collect()
}

pub fn dot_rat(a: &[Int], b: &[Rat]) -> Rat {
    let mut acc = Rat::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += Rat::from_integer(x.clone()) * y;
    }
    acc
}

/// Clear denominators of a rational vector, returning a primitive integer vector
/// pointing the same way.
pub fn clear_denominators(v: &[Rat]) -> Vec<Int> {
    let mut lcm = Int::one();
    for x in v {
        lcm = lcm.lcm(x.denom());
    }
    let ints: Vec<Int> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    primitive(&ints)
}

/// Dense integer matrix, row major.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Int>,
}

impl std::fmt::Debug for IntMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "IntMat{}x{}[", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "{:?}", self.row(r))?;
            if r + 1 < self.rows {
                write!(f, ", ")?;
            }
        }
        write!(f, "]")
    }
}

impl IntMat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMat { rows, cols, data: vec![Int::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMat::zero(n, n);
        for i in 0..n {
            m[(i, i)] = Int::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Int>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        IntMat { rows: r, cols: c, data }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        IntMat::from_rows(rows.iter().map(|r| vec_from_i64(r)).collect())
    }

    pub fn row(&self, r: usize) -> &[Int] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<Int> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn transpose(&self) -> IntMat {
        let mut t = IntMat::zero(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)].clone();
            }
        }
        t
    }

    /// Matrix * column vector.
    pub fn apply(&self, v: &[Int]) -> Vec<Int> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in apply");
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    pub fn mul(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.cols, other.rows);
        let mut m = IntMat::zero(self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = Int::zero();
                for k in 0..self.cols {
                    acc += &self[(r, k)] * &other[(k, c)];
                }
                m[(r, c)] = acc;
            }
        }
        m
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && *self == IntMat::identity(self.rows)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            let i = a * self.cols + c;
            let j = b * self.cols + c;
            self.data.swap(i, j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for r in 0..self.rows {
            let i = r * self.cols + a;
            let j = r * self.cols + b;
            self.data.swap(i, j);
        }
    }

    /// Rank over Q, via fraction-free Gaussian elimination on a copy.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        let mut row = 0;
        for col in 0..m.cols {
            let pivot = (row..m.rows).find(|&r| !m[(r, col)].is_zero());
            let Some(p) = pivot else { continue };
            m.swap_rows(row, p);
            for r in row + 1..m.rows {
                if m[(r, col)].is_zero() {
                    continue;
                }
                let a = m[(row, col)].clone();
                let b = m[(r, col)].clone();
                for c in col..m.cols {
                    let v = &a * &m[(r, c)] - &b * &m[(row, c)];
                    m[(r, c)] = v;
                }
            }
            row += 1;
            rank += 1;
            if row == m.rows {
                break;
            }
        }
        rank
    }
}

impl std::ops::Index<(usize, usize)> for IntMat {
    type Output = Int;
    fn index(&self, (r, c): (usize, usize)) -> &Int {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Int {
        &mut self.data[r * self.cols + c]
    }
}

/// Smith normal form: returns (u, d, v) with `u * a * v = d`, `u`, `v`
/// unimodular and `d` diagonal with d_1 | d_2 | ... (nonnegative).
pub fn smith_normal_form(a: &IntMat) -> (IntMat, IntMat, IntMat) {
    let mut d = a.clone();
    let mut u = IntMat::identity(a.rows);
    let mut v = IntMat::identity(a.cols);
    let n = a.rows.min(a.cols);

    let mut t = 0;
    while t < n {
        // find a nonzero pivot in the remaining block, smallest absolute value
        let mut best: Option<(usize, usize)> = None;
        for r in t..d.rows {
            for c in t..d.cols {
                if !d[(r, c)].is_zero() {
                    match &best {
                        None => best = Some((r, c)),
                        Some((br, bc)) => {
                            if d[(r, c)].abs() < d[(*br, *bc)].abs() {
                                best = Some((r, c));
                            }
                        }
                    }
                }
            }
        }
        let Some((pr, pc)) = best else { break };
        d.swap_rows(t, pr);
        u.swap_rows(t, pr);
        d.swap_cols(t, pc);
        v.swap_cols(t, pc);

        let mut clean = true;
        // clear the column
        for r in t + 1..d.rows {
            if d[(r, t)].is_zero() {
                continue;
            }
            let q = div_round(&d[(r, t)], &d[(t, t)]);
            if !q.is_zero() {
                for c in 0..d.cols {
                    let val = &d[(r, c)] - &q * &d[(t, c)];
                    d[(r, c)] = val;
                }
                for c in 0..u.cols {
                    let val = &u[(r, c)] - &q * &u[(t, c)];
                    u[(r, c)] = val;
                }
            }
            if !d[(r, t)].is_zero() {
                clean = false;
            }
        }
        // clear the row
        for c in t + 1..d.cols {
            if d[(t, c)].is_zero() {
                continue;
            }
            let q = div_round(&d[(t, c)], &d[(t, t)]);
            if !q.is_zero() {
                for r in 0..d.rows {
                    let val = &d[(r, c)] - &q * &d[(r, t)];
                    d[(r, c)] = val;
                }
                for r in 0..v.rows {
                    let val = &v[(r, c)] - &q * &v[(r, t)];
                    v[(r, c)] = val;
                }
            }
            if !d[(t, c)].is_zero() {
                clean = false;
            }
        }
        if !clean {
            continue; // smaller remainders appeared; repeat with a better pivot
        }
        // ensure divisibility d_t | entries of the remaining block
        let mut fixed = true;
        'outer: for r in t + 1..d.rows {
            for c in t + 1..d.cols {
                if !(&d[(r, c)] % &d[(t, t)]).is_zero() {
                    // add row r to row t and restart this pivot
                    for k in 0..d.cols {
                        let val = &d[(t, k)] + &d[(r, k)];
                        d[(t, k)] = val;
                    }
                    for k in 0..u.cols {
                        let val = &u[(t, k)] + &u[(r, k)];
                        u[(t, k)] = val;
                    }
                    fixed = false;
                    break 'outer;
                }
            }
        }
        if fixed {
            t += 1;
        }
    }
    // make diagonal nonnegative
    for i in 0..n {
        if d[(i, i)].is_negative() {
            for c in 0..d.cols {
                let val = -d[(i, c)].clone();
                d[(i, c)] = val;
            }
            for c in 0..u.cols {
                let val = -u[(i, c)].clone();
                u[(i, c)] = val;
            }
        }
    }
    (u, d, v)
}

/// Rounded division: quotient q minimizing |a - q*b|.
fn div_round(a: &Int, b: &Int) -> Int {
    let (q, r) = a.div_rem(b);
    let two_r: Int = &r * Int::from(2);
    if two_r.abs() > b.abs() {
        if (r.is_negative()) == (b.is_negative()) {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

/// Basis of the integer kernel {x : a * x = 0}. The result is a basis of a
/// saturated sublattice (primitive kernel).
pub fn kernel_basis(a: &IntMat) -> Vec<Vec<Int>> {
    let (_, d, v) = smith_normal_form(a);
    let n = a.cols;
    let mut basis = Vec::new();
    for j in 0..n {
        let dj = if j < d.rows.min(d.cols) { d[(j, j)].clone() } else { Int::zero() };
        if dj.is_zero() {
            basis.push(v.col(j));
        }
    }
    basis
}

/// Solve a * x = b over the integers; None if no integral solution.
pub fn solve_integer(a: &IntMat, b: &[Int]) -> Option<Vec<Int>> {
    let (u, d, v) = smith_normal_form(a);
    let ub = u.apply(b);
    let mut y = vec![Int::zero(); a.cols];
    let r = a.rows.min(a.cols);
    for i in 0..a.rows {
        let di = if i < r { d[(i, i)].clone() } else { Int::zero() };
        if di.is_zero() {
            if !ub[i].is_zero() {
                return None;
            }
        } else {
            let (q, rem) = ub[i].div_rem(&di);
            if !rem.is_zero() {
                return None;
            }
            y[i] = q;
        }
    }
    Some(v.apply(&y))
}

/// Determinant via fraction-free (Bareiss) elimination.
pub fn determinant(a: &IntMat) -> Int {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return Int::one();
    }
    let mut m = a.clone();
    let mut sign = 1i32;
    let mut prev = Int::one();
    for k in 0..n - 1 {
        if m[(k, k)].is_zero() {
            let swap = (k + 1..n).find(|&r| !m[(r, k)].is_zero());
            match swap {
                Some(r) => {
                    m.swap_rows(k, r);
                    sign = -sign;
                }
                None => return Int::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let val = (&m[(i, j)] * &m[(k, k)] - &m[(i, k)] * &m[(k, j)]) / &prev;
                m[(i, j)] = val;
            }
            m[(i, k)] = Int::zero();
        }
        prev = m[(k, k)].clone();
    }
    let det = m[(n - 1, n - 1)].clone();
    if sign < 0 {
        -det
    } else {
        det
    }
}

/// Inverse of a unimodular integer matrix. None if det is not ±1.
pub fn unimodular_inverse(a: &IntMat) -> Option<IntMat> {
    assert_eq!(a.rows, a.cols);
    let det = determinant(a);
    if !det.abs().is_one() {
        return None;
    }
    // adjugate / det; for small sizes solve columnwise instead
    let n = a.rows;
    let mut inv = IntMat::zero(n, n);
    for c in 0..n {
        let mut e = vec![Int::zero(); n];
        e[c] = Int::one();
        let x = solve_integer(a, &e)?;
        for r in 0..n {
            inv[(r, c)] = x[r].clone();
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[i64]]) -> IntMat {
        IntMat::from_i64(rows)
    }

    #[test]
    fn snf_diagonalizes_and_divides() {
        let a = mat(&[&[2, 4, 4], &[-6, 6, 12], &[10, 4, 16]]);
        let (u, d, v) = smith_normal_form(&a);
        assert_eq!(u.mul(&a).mul(&v), d);
        // classic example: invariants 2, 2, 156? recompute: just check chain
        let mut prev = Int::one();
        for i in 0..3 {
            let di = d[(i, i)].clone();
            if !di.is_zero() {
                assert!((&di % &prev).is_zero() || prev.is_one());
                prev = di;
            }
        }
        for r in 0..3 {
            for c in 0..3 {
                if r != c {
                    assert!(d[(r, c)].is_zero());
                }
            }
        }
    }

    #[test]
    fn snf_of_cusp_relation() {
        // lattice spanned by (2, -3): quotient is Z, generators map to 3 and 2
        let a = mat(&[&[2], &[-3]]);
        let (u, d, _v) = smith_normal_form(&a);
        assert_eq!(d[(0, 0)], int(1));
        // the free coordinate is the second row of u
        let gx = u.apply(&vec_from_i64(&[1, 0]));
        let gy = u.apply(&vec_from_i64(&[0, 1]));
        assert_eq!(gx[1].clone().abs() * gy[1].clone().abs(), int(6));
    }

    #[test]
    fn kernel_and_solve() {
        let a = mat(&[&[1, 2, 3], &[2, 4, 6]]);
        let k = kernel_basis(&a);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(is_zero_vec(&a.apply(v)));
        }
        let b = vec_from_i64(&[6, 12]);
        let x = solve_integer(&a, &b).unwrap();
        assert_eq!(a.apply(&x), b);
        assert!(solve_integer(&a, &vec_from_i64(&[1, 1])).is_none());
    }

    #[test]
    fn determinant_and_inverse() {
        let a = mat(&[&[1, 1], &[0, 1]]);
        assert_eq!(determinant(&a), int(1));
        let inv = unimodular_inverse(&a).unwrap();
        assert!(a.mul(&inv).is_identity());
        let b = mat(&[&[2, 0], &[0, 1]]);
        assert!(unimodular_inverse(&b).is_none());
    }

    #[test]
    fn primitive_vectors() {
        assert_eq!(primitive(&vec_from_i64(&[4, -6])), vec_from_i64(&[2, -3]));
        assert_eq!(primitive_signed(&vec_from_i64(&[-2, 4])), vec_from_i64(&[1, -2]));
        assert_eq!(primitive(&vec_from_i64(&[0, 0])), vec_from_i64(&[0, 0]));
    }
}
