//! Dense complex helpers shared by the bipartite engines.
//!
//! Bipartite indices are row-major: basis state `(n1, n2)` sits at `n1 * n + n2`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

pub type C64 = Complex64;

pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Conjugate transpose, written blockwise so large matrices stay cache friendly.
pub fn dagger(m: &ArrayView2<C64>) -> Array2<C64> {
    let (rows, cols) = m.dim();
    let src = m.as_standard_layout();
    let src = src.as_slice().expect("standard layout");
    let mut out = vec![ZERO; rows * cols];
    const BLOCK: usize = 32;
    for r0 in (0..rows).step_by(BLOCK) {
        let r1 = (r0 + BLOCK).min(rows);
        for c0 in (0..cols).step_by(BLOCK) {
            let c1 = (c0 + BLOCK).min(cols);
            for r in r0..r1 {
                for c in c0..c1 {
                    out[c * rows + r] = src[r * cols + c].conj();
                }
            }
        }
    }
    Array2::from_shape_vec((cols, rows), out).expect("shape")
}

pub fn max_abs_diff(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `max |(M^dagger M - I)_ij|`.
pub fn unitarity_deviation(m: &ArrayView2<C64>) -> f64 {
    let prod = dagger(m).dot(m);
    prod.indexed_iter()
        .map(|((i, j), x)| if i == j { (x - ONE).norm() } else { x.norm() })
        .fold(0.0, f64::max)
}

/// `max |M - M^dagger|`.
pub fn hermiticity_deviation(m: &ArrayView2<C64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    dev
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, ONE)
}

pub fn kron(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
            .assign(&b.mapv(|y| x * y));
    }
    out
}

pub fn trace(m: &ArrayView2<C64>) -> C64 {
    m.diag().sum()
}

/// `Tr(M^2)` without forming the square.
pub fn trace_of_square(m: &ArrayView2<C64>) -> C64 {
    let n = m.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += m[[i, j]] * m[[j, i]];
        }
    }
    acc
}

/// Left-multiplies an `n^2 x c` matrix by `v1 (x) v2`; a missing factor is the identity.
pub fn left_apply_kron(
    v1: Option<&ArrayView2<C64>>,
    v2: Option<&ArrayView2<C64>>,
    m: Array2<C64>,
) -> Array2<C64> {
    let (rows, cols) = m.dim();
    let n = match (v1, v2) {
        (Some(v), _) | (None, Some(v)) => v.nrows(),
        (None, None) => return m,
    };
    debug_assert_eq!(n * n, rows);
    let mut cur = if m.is_standard_layout() {
        m
    } else {
        m.as_standard_layout().into_owned()
    };
    if let Some(v2) = v2 {
        let mut out = Array2::zeros((rows, cols));
        for i1 in 0..n {
            let block = cur.slice(s![i1 * n..(i1 + 1) * n, ..]);
            let mut dst = out.slice_mut(s![i1 * n..(i1 + 1) * n, ..]);
            general_mat_mul(ONE, v2, &block, ZERO, &mut dst);
        }
        cur = out;
    }
    if let Some(v1) = v1 {
        let flat = cur.into_shape_with_order((n, n * cols)).expect("contiguous");
        cur = v1
            .dot(&flat)
            .into_shape_with_order((rows, cols))
            .expect("contiguous");
    }
    cur
}

/// `(v1 (x) v2) psi` for a bipartite vector, via `v1 * Psi * v2^T`.
pub fn apply_kron_to_vector(
    v1: Option<&ArrayView2<C64>>,
    v2: Option<&ArrayView2<C64>>,
    psi: &ArrayView1<C64>,
    n: usize,
) -> Array1<C64> {
    let mut mat = psi
        .to_owned()
        .into_shape_with_order((n, n))
        .expect("length n^2");
    if let Some(v1) = v1 {
        mat = v1.dot(&mat);
    }
    if let Some(v2) = v2 {
        mat = mat.dot(&v2.t());
    }
    mat.into_shape_with_order(n * n).expect("contiguous")
}

/// Diagonal conjugation `out_ij = conj(d_i) m_ij d_j`, in place.
pub fn conjugate_by_diagonal(m: &mut Array2<C64>, d: &ArrayView1<C64>) {
    for (mut row, di) in m.rows_mut().into_iter().zip(d.iter()) {
        let dc = di.conj();
        for (x, dj) in row.iter_mut().zip(d.iter()) {
            *x = dc * *x * dj;
        }
    }
}

pub fn vector_norm(v: &ArrayView1<C64>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &ArrayView1<C64>, b: &ArrayView1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}
