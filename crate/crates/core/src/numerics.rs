//! Small shared numerical kernels: golden-section maximization, monotone
//! bisection, conjugate gradients on an abstract SPD operator, and power
//! iteration for operator norms.

use nalgebra::DVector;

/// Maximizes a unimodal function on `[a, b]` by golden-section search.
///
/// Returns `(argmax, max)`. The search runs until the bracket is shorter
/// than `tol` (absolute) and is robust for concave or piecewise
/// concave-then-decreasing objectives.
pub fn golden_section_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Solves `g(x) = target` for strictly increasing `g` by bisection on `[lo, hi]`.
///
/// The bracket must already satisfy `g(lo) <= target <= g(hi)`. Returns the
/// midpoint after the interval is below `rel_tol` relative width or the
/// iteration cap is hit.
pub fn bisect_increasing(
    mut lo: f64,
    mut hi: f64,
    target: f64,
    rel_tol: f64,
    max_iter: usize,
    g: impl Fn(f64) -> f64,
) -> f64 {
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= rel_tol * mid.abs() {
            return mid;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Conjugate gradients for `A x = b` with `A` given as a symmetric
/// positive (semi)definite operator. Starts from `x0` when provided.
///
/// Stops when the residual norm drops below `tol * ||b||` (or an absolute
/// floor when `b = 0`). Returns the iterate; CG on consistent SPD systems at
/// the problem sizes used here converges well before `max_iter`.
pub fn conjugate_gradients(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> DVector<f64> {
    let mut x = match x0 {
        Some(v) => v.clone(),
        None => DVector::zeros(b.len()),
    };
    let mut r = b - apply(&x);
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let threshold = (tol * b.norm()).max(1e-300);
    for _ in 0..max_iter {
        if rs.sqrt() <= threshold {
            break;
        }
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 || !pap.is_finite() {
            break; // lost positive-definiteness numerically; return best iterate
        }
        let alpha = rs / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rs_new = r.dot(&r);
        p = &r + (rs_new / rs) * p;
        rs = rs_new;
    }
    x
}

/// Estimates the spectral norm of a linear map by power iteration on
/// `A* A`, using `steps` iterations from a fixed pseudo-random start.
pub fn operator_norm(
    dim_in: usize,
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    adjoint_apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    steps: usize,
) -> f64 {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
    let mut v = DVector::from_fn(dim_in, |_, _| rng.sample::<f64, _>(rand_distr_standard()));
    let mut norm = 0.0;
    for _ in 0..steps {
        let n = v.norm();
        if n == 0.0 {
            return 0.0;
        }
        v /= n;
        let av = apply(&v);
        norm = av.norm();
        v = adjoint_apply(&av);
    }
    norm
}

// rand's StandardNormal lives in rand_distr; a hand-rolled Box-Muller via the
// Standard uniform keeps the dependency set small and the draws reproducible.
struct BoxMuller;

impl rand::distributions::Distribution<f64> for BoxMuller {
    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u1: f64 = rng.gen::<f64>();
            let u2: f64 = rng.gen::<f64>();
            if u1 > f64::MIN_POSITIVE {
                return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
        }
    }
}

fn rand_distr_standard() -> impl rand::distributions::Distribution<f64> {
    BoxMuller
}

/// Draws a standard-normal vector from the given RNG.
pub fn standard_normal_vector<R: rand::Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    let dist = BoxMuller;
    DVector::from_fn(dim, |_, _| rand::distributions::Distribution::sample(&dist, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (t, v) = golden_section_max(0.0, 10.0, 1e-12, |t| -(t - 3.0) * (t - 3.0) + 2.0);
        assert!((t - 3.0).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisection_inverts_cubic() {
        let x = bisect_increasing(0.0, 10.0, 8.0, 1e-14, 200, |t| t * t * t);
        assert!((x - 2.0).abs() < 1e-10);
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let x = conjugate_gradients(|v| &a * v, &b, None, 1e-14, 100);
        assert!((&a * &x - &b).norm() < 1e-10);
    }

    #[test]
    fn power_iteration_matches_singular_value() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let at = a.transpose();
        let n = operator_norm(2, |v| &a * v, |w| &at * w, 50);
        assert!((n - 3.0).abs() < 1e-8);
    }

    #[test]
    fn normal_vector_is_seed_deterministic() {
        use rand::SeedableRng;
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v1 = standard_normal_vector(&mut r1, 16);
        let v2 = standard_normal_vector(&mut r2, 16);
        assert_eq!(v1, v2);
    }
}
