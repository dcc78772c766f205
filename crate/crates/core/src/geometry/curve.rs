use std::fmt;
use std::sync::Arc;

use nalgebra::{Vector2, Vector3};

type Eval2 = dyn Fn(f64) -> (Vector2<f64>, Vector2<f64>) + Send + Sync;
type Eval3 = dyn Fn(f64) -> (Vector3<f64>, Vector3<f64>) + Send + Sync;

/// Parametrized reference-domain curve on `t in [0, 1]`, returning the point
/// and its derivative with respect to `t`.
#[derive(Clone)]
pub struct Curve2 {
    eval: Arc<Eval2>,
    straight: bool,
}

impl Curve2 {
    pub fn new(f: impl Fn(f64) -> (Vector2<f64>, Vector2<f64>) + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            straight: false,
        }
    }

    pub fn segment(a: Vector2<f64>, b: Vector2<f64>) -> Self {
        Self {
            eval: Arc::new(move |t| (a + t * (b - a), b - a)),
            straight: true,
        }
    }

    pub fn point(&self, t: f64) -> Vector2<f64> {
        (self.eval)(t).0
    }

    pub fn derivative(&self, t: f64) -> Vector2<f64> {
        (self.eval)(t).1
    }

    pub fn eval(&self, t: f64) -> (Vector2<f64>, Vector2<f64>) {
        (self.eval)(t)
    }

    pub fn is_straight(&self) -> bool {
        self.straight
    }

    /// Same curve traversed backwards, `t -> 1 - t`.
    pub fn reversed(&self) -> Self {
        let inner = self.eval.clone();
        Self {
            eval: Arc::new(move |t| {
                let (p, d) = inner(1.0 - t);
                (p, -d)
            }),
            straight: self.straight,
        }
    }

    /// Polyline approximation of the reference length.
    pub fn approx_length(&self, samples: usize) -> f64 {
        let mut len = 0.0;
        let mut prev = self.point(0.0);
        for i in 1..=samples {
            let p = self.point(i as f64 / samples as f64);
            len += (p - prev).norm();
            prev = p;
        }
        len
    }
}

impl fmt::Debug for Curve2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Curve2({:?} -> {:?})", self.point(0.0), self.point(1.0))
    }
}

/// Master parametrization of an interface curve in R^3.
#[derive(Clone)]
pub struct Curve3 {
    eval: Arc<Eval3>,
}

impl Curve3 {
    pub fn new(f: impl Fn(f64) -> (Vector3<f64>, Vector3<f64>) + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(f) }
    }

    pub fn segment(a: Vector3<f64>, b: Vector3<f64>) -> Self {
        Self::new(move |t| (a + t * (b - a), b - a))
    }

    pub fn point(&self, t: f64) -> Vector3<f64> {
        (self.eval)(t).0
    }

    pub fn derivative(&self, t: f64) -> Vector3<f64> {
        (self.eval)(t).1
    }

    pub fn eval(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        (self.eval)(t)
    }

    pub fn approx_length(&self, samples: usize) -> f64 {
        let mut len = 0.0;
        let mut prev = self.point(0.0);
        for i in 1..=samples {
            let p = self.point(i as f64 / samples as f64);
            len += (p - prev).norm();
            prev = p;
        }
        len
    }
}

impl fmt::Debug for Curve3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Curve3({:?} -> {:?})", self.point(0.0), self.point(1.0))
    }
}
