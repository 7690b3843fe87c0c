//! Minimal 3-vector arithmetic over `[T; 3]`.

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];

#[inline]
pub fn add<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn neg<T: Real>(a: Vec3<T>) -> Vec3<T> {
    [-a[0], -a[1], -a[2]]
}

#[inline]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Plain (non-fused) cross product.
#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

/// Returns `None` for zero or non-finite input.
#[inline]
pub fn normalize<T: Real>(a: Vec3<T>) -> Option<Vec3<T>> {
    let n = norm(a);
    if n > T::zero() && n.is_finite() {
        Some(scale(a, T::one() / n))
    } else {
        None
    }
}

/// Angle between two nonzero vectors, computed with `atan2` for accuracy near 0.
pub fn angle<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    norm(cross(a, b)).atan2(dot(a, b))
}

#[inline]
pub fn dist<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    norm(sub(a, b))
}

pub fn cast<T: Real>(a: Vec3<f64>) -> Vec3<T> {
    [T::lit(a[0]), T::lit(a[1]), T::lit(a[2])]
}

pub fn to_f64<T: Real>(a: Vec3<T>) -> Vec3<f64> {
    [a[0].to_f64_lossy(), a[1].to_f64_lossy(), a[2].to_f64_lossy()]
}
