//! Small dense linear algebra: a row-major matrix and a symmetric
//! indefinite LDLᵀ factorization with Bunch–Kaufman pivoting that also
//! reports inertia.

use std::ops::{Index, IndexMut};

use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// `self · x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// `selfᵀ · y`
    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter()
        .fold(T::zero(), |m, x| if x.abs() > m || x.is_nan() { x.abs() } else { m })
}

pub fn norm_1<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.abs())
}

/// Number of positive, negative and zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

const ZERO_PIVOT_ULPS: f64 = 100.0;
const EQUILIBRATION_PASSES: usize = 4;

/// Symmetric Ruiz scaling of the lower triangle of `a` in place. Returns
/// the diagonal `s` such that the stored matrix is `S A S`.
fn equilibrate<T: Scalar>(a: &mut [T], n: usize) -> Vec<T> {
    let at = |i: usize, j: usize| i * n + j;
    let mut scale = vec![T::one(); n];
    let mut row_max = vec![T::zero(); n];
    for _ in 0..EQUILIBRATION_PASSES {
        row_max.iter_mut().for_each(|r| *r = T::zero());
        for i in 0..n {
            for j in 0..=i {
                let v = a[at(i, j)].abs();
                row_max[i] = row_max[i].max(v);
                row_max[j] = row_max[j].max(v);
            }
        }
        let factors: Vec<T> = row_max
            .iter()
            .map(|&r| if r > T::zero() { T::one() / r.sqrt() } else { T::one() })
            .collect();
        for i in 0..n {
            for j in 0..=i {
                a[at(i, j)] *= factors[i] * factors[j];
            }
            scale[i] *= factors[i];
        }
    }
    scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pivot {
    One,
    Two,
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` and block-diagonal `D`
/// (1×1 and 2×2 blocks).
#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    n: usize,
    // L below the diagonal, D on the diagonal and first subdiagonal
    a: Vec<T>,
    perm: Vec<usize>,
    pivots: Vec<Pivot>,
    inertia: Inertia,
    // symmetric equilibration, A is factored as S A S
    scale: Vec<T>,
}

impl<T: Scalar> LdlFactor<T> {
    /// Factors a symmetric matrix. Only the lower triangle is read.
    ///
    /// The matrix is first equilibrated with a symmetric diagonal scaling,
    /// which leaves the inertia unchanged and makes the zero-pivot test
    /// meaningful for badly scaled systems.
    pub fn factor(matrix: &DenseMatrix<T>) -> Self {
        assert_eq!(matrix.rows(), matrix.cols(), "LDLᵀ needs a square matrix");
        let n = matrix.rows();
        let at = |i: usize, j: usize| i * n + j;
        let mut a = matrix.data.clone();
        let scale = equilibrate(&mut a, n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::with_capacity(n);
        let mut inertia = Inertia::default();

        let alpha = (T::one() + T::lit(17.0).sqrt()) / T::lit(8.0);
        let max_abs = (0..n)
            .flat_map(|i| (0..=i).map(move |j| (i, j)))
            .fold(T::zero(), |m, (i, j)| m.max(a[at(i, j)].abs()));
        let zero_tol = T::lit(ZERO_PIVOT_ULPS) * T::epsilon() * max_abs.max(T::min_positive_value());

        let mut k = 0;
        while k < n {
            let absakk = a[at(k, k)].abs();
            let (mut imax, mut colmax) = (k, T::zero());
            for i in k + 1..n {
                let v = a[at(i, k)].abs();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }

            if absakk.max(colmax) <= zero_tol {
                // column already eliminated
                inertia.zero += 1;
                pivots.push(Pivot::One);
                for i in k + 1..n {
                    a[at(i, k)] = T::zero();
                }
                k += 1;
                continue;
            }

            let (kp, kstep) = if absakk >= alpha * colmax {
                (k, 1)
            } else {
                let mut rowmax = T::zero();
                for j in k..imax {
                    rowmax = rowmax.max(a[at(imax, j)].abs());
                }
                for i in imax + 1..n {
                    rowmax = rowmax.max(a[at(i, imax)].abs());
                }
                if absakk >= alpha * colmax * (colmax / rowmax) {
                    (k, 1)
                } else if a[at(imax, imax)].abs() >= alpha * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };

            let kk = k + kstep - 1;
            if kp != kk {
                // symmetric interchange of kk and kp in lower storage
                for j in 0..kk {
                    a.swap(at(kk, j), at(kp, j));
                }
                for j in kk + 1..kp {
                    a.swap(at(j, kk), at(kp, j));
                }
                for i in kp + 1..n {
                    a.swap(at(i, kk), at(i, kp));
                }
                a.swap(at(kk, kk), at(kp, kp));
                perm.swap(kk, kp);
            }

            if kstep == 1 {
                let d = a[at(k, k)];
                if d.abs() <= zero_tol {
                    inertia.zero += 1;
                } else if d > T::zero() {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
                if d != T::zero() {
                    let inv = T::one() / d;
                    for i in k + 1..n {
                        let lik = a[at(i, k)] * inv;
                        if lik != T::zero() {
                            for j in k + 1..=i {
                                let ajk = a[at(j, k)];
                                a[at(i, j)] -= lik * ajk;
                            }
                        }
                    }
                    // scale after the update so a[j][k] above was unscaled
                    for i in k + 1..n {
                        a[at(i, k)] *= inv;
                    }
                }
                pivots.push(Pivot::One);
            } else {
                let d11 = a[at(k, k)];
                let d21 = a[at(k + 1, k)];
                let d22 = a[at(k + 1, k + 1)];
                let det = d11 * d22 - d21 * d21;
                if det < T::zero() {
                    inertia.positive += 1;
                    inertia.negative += 1;
                } else if det > T::zero() {
                    if d11 + d22 > T::zero() {
                        inertia.positive += 2;
                    } else {
                        inertia.negative += 2;
                    }
                } else {
                    inertia.zero += 1;
                    if d11 + d22 > T::zero() {
                        inertia.positive += 1;
                    } else {
                        inertia.negative += 1;
                    }
                }
                let (i11, i21, i22) = (d22 / det, -d21 / det, d11 / det);
                // multipliers [l_i1, l_i2] = [a_ik, a_i,k+1] D⁻¹
                let mut l1 = vec![T::zero(); n];
                let mut l2 = vec![T::zero(); n];
                for i in k + 2..n {
                    let (x1, x2) = (a[at(i, k)], a[at(i, k + 1)]);
                    l1[i] = x1 * i11 + x2 * i21;
                    l2[i] = x1 * i21 + x2 * i22;
                }
                for i in k + 2..n {
                    if l1[i] == T::zero() && l2[i] == T::zero() {
                        continue;
                    }
                    for j in k + 2..=i {
                        let update = l1[i] * a[at(j, k)] + l2[i] * a[at(j, k + 1)];
                        a[at(i, j)] -= update;
                    }
                }
                for i in k + 2..n {
                    a[at(i, k)] = l1[i];
                    a[at(i, k + 1)] = l2[i];
                }
                pivots.push(Pivot::Two);
                pivots.push(Pivot::Two);
            }
            k += kstep;
        }

        Self {
            n,
            a,
            perm,
            pivots,
            inertia,
            scale,
        }
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn is_singular(&self) -> bool {
        self.inertia.zero > 0
    }

    /// Solves `A x = b` in place. Returns `false` when the factor is
    /// singular.
    pub fn solve_in_place(&self, b: &mut [T]) -> bool {
        let n = self.n;
        assert_eq!(b.len(), n);
        if self.is_singular() {
            return false;
        }
        let at = |i: usize, j: usize| i * n + j;
        let mut z: Vec<T> = self.perm.iter().map(|&p| b[p] * self.scale[p]).collect();

        // L z = Pb
        let mut k = 0;
        while k < n {
            let step = if self.pivots[k] == Pivot::Two { 2 } else { 1 };
            for c in k..k + step {
                let zc = z[c];
                if zc != T::zero() {
                    for i in k + step..n {
                        z[i] -= self.a[at(i, c)] * zc;
                    }
                }
            }
            k += step;
        }
        // D w = z
        let mut k = 0;
        while k < n {
            if self.pivots[k] == Pivot::Two {
                let d11 = self.a[at(k, k)];
                let d21 = self.a[at(k + 1, k)];
                let d22 = self.a[at(k + 1, k + 1)];
                let det = d11 * d22 - d21 * d21;
                let (z1, z2) = (z[k], z[k + 1]);
                z[k] = (d22 * z1 - d21 * z2) / det;
                z[k + 1] = (d11 * z2 - d21 * z1) / det;
                k += 2;
            } else {
                z[k] /= self.a[at(k, k)];
                k += 1;
            }
        }
        // Lᵀ v = w
        let mut k = n;
        while k > 0 {
            let step = if k >= 2 && self.pivots[k - 1] == Pivot::Two { 2 } else { 1 };
            let start = k - step;
            for c in start..k {
                let mut acc = z[c];
                for i in k..n {
                    acc -= self.a[at(i, c)] * z[i];
                }
                z[c] = acc;
            }
            k = start;
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = z[i] * self.scale[p];
        }
        b.iter().all(|v| v.is_finite())
    }
}
