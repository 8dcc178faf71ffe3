//! Small dense vector helpers and null-space computation.

use nalgebra::DMatrix;

pub type Vector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vector {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

pub fn neg(a: &[f64]) -> Vector {
    a.iter().map(|x| -x).collect()
}

/// Unit vector in the direction of `a`, or `None` for (numerically) zero input.
pub fn normalize(a: &[f64]) -> Option<Vector> {
    let n = norm(a);
    if n <= 1e-300 || !n.is_finite() {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

pub fn unit(dim: usize, i: usize) -> Vector {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

/// Angle between two nonzero vectors, in radians.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { std::f64::consts::PI };
    }
    // half-angle form stays accurate for tiny and near-straight angles
    let ua = scale(a, 1.0 / na);
    let ub = scale(b, 1.0 / nb);
    2.0 * norm(&sub(&ua, &ub)).atan2(norm(&add(&ua, &ub)))
}

/// Lexicographic comparison with exact floats.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Orthonormal basis of `{x : M x = 0}` where `M` has the given rows.
pub fn null_space(rows: &[Vector], dim: usize, rel_tol: f64) -> Vec<Vector> {
    if dim == 0 {
        return Vec::new();
    }
    if rows.is_empty() {
        return (0..dim).map(|i| unit(dim, i)).collect();
    }
    let m = rows.len().max(dim);
    let mut mat = DMatrix::<f64>::zeros(m, dim);
    for (i, r) in rows.iter().enumerate() {
        for j in 0..dim {
            mat[(i, j)] = r[j];
        }
    }
    let scale = rows.iter().map(|r| norm_inf(r)).fold(0.0, f64::max).max(1e-300);
    let svd = mat.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let sv = &svd.singular_values;
    let mut out = Vec::new();
    for k in 0..sv.len() {
        if sv[k] <= rel_tol * scale {
            out.push((0..dim).map(|j| vt[(k, j)]).collect());
        }
    }
    out
}

/// Orthonormal basis of the span of `vectors`.
pub fn orth_basis(vectors: &[Vector], dim: usize, rel_tol: f64) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    let scale = vectors.iter().map(|v| norm(v)).fold(0.0, f64::max);
    if scale == 0.0 {
        return basis;
    }
    // Gram-Schmidt twice for stability; inputs are tiny.
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w = axpy(&w, -c, b);
            }
        }
        if norm(&w) > rel_tol * scale.max(1.0) {
            basis.push(normalize(&w).unwrap());
        }
        if basis.len() == dim {
            break;
        }
    }
    basis
}

/// Component of `v` orthogonal to the span of an orthonormal `basis`.
pub fn project_out(v: &[f64], basis: &[Vector]) -> Vector {
    let mut w = v.to_vec();
    for b in basis {
        let c = dot(&w, b);
        w = axpy(&w, -c, b);
    }
    w
}

/// Least-squares solve `A x = b` (A given by rows); returns `None` if singular.
pub fn solve_square(rows: &[Vector], b: &[f64]) -> Option<Vector> {
    let n = rows.len();
    let mat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    mat.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

/// Minimum-norm solution of the underdetermined system `A x = b`.
pub fn min_norm_solution(rows: &[Vector], b: &[f64], dim: usize) -> Option<Vector> {
    if rows.is_empty() {
        return Some(vec![0.0; dim]);
    }
    let m = rows.len();
    let a = DMatrix::from_fn(m, dim, |i, j| rows[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    let svd = a.svd(true, true);
    let x = svd.solve(&rhs, 1e-12).ok()?;
    let xs: Vector = x.iter().copied().collect();
    // reject inconsistent systems
    for (r, bi) in rows.iter().zip(b) {
        if (dot(r, &xs) - bi).abs() > 1e-8 * (1.0 + bi.abs() + norm(r) * norm(&xs)) {
            return None;
        }
    }
    Some(xs)
}
