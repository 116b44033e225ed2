//! Truncated Taylor-series arithmetic.
//!
//! A [`Jet`] carries the coefficients `c_k = f^(k)(0)/k!` of a function of a
//! single (time) variable, truncated at a fixed order. Propagating jets
//! through a vector field yields exact higher derivatives of an ODE solution
//! at the initial time, which is how the solver state is initialised.

/// Truncated Taylor polynomial in one variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    /// Constant value: `[v, 0, 0, ...]` with `len` coefficients.
    pub fn constant(v: f64, len: usize) -> Self {
        assert!(len >= 1);
        let mut c = vec![0.0; len];
        c[0] = v;
        Jet { c }
    }

    /// The variable itself around `v`: `v + t`.
    pub fn variable(v: f64, len: usize) -> Self {
        assert!(len >= 1);
        let mut c = vec![0.0; len];
        c[0] = v;
        if len > 1 {
            c[1] = 1.0;
        }
        Jet { c }
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        assert!(!c.is_empty());
        Jet { c }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Taylor coefficient `f^(k)(0)/k!`.
    pub fn coeff(&self, k: usize) -> f64 {
        self.c[k]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    fn zip_with(&self, o: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.len(), o.len());
        Jet {
            c: self.c.iter().zip(o.c.iter()).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// sin and cos propagated jointly through the composition recurrence:
    /// `s_k = (1/k) Σ_{j≥1} j·u_j·c_{k-j}`, `c_k = -(1/k) Σ_{j≥1} j·u_j·s_{k-j}`.
    fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..n {
            let mut sk = 0.0;
            let mut ck = 0.0;
            for j in 1..=k {
                let ju = j as f64 * self.c[j];
                sk += ju * c[k - j];
                ck -= ju * s[k - j];
            }
            s[k] = sk / k as f64;
            c[k] = ck / k as f64;
        }
        (Jet::from_coeffs(s), Jet::from_coeffs(c))
    }
}

/// The scalar arithmetic a vector field must support so that it can be
/// evaluated both on plain floats and on jets.
///
/// Standalone constants enter through `add_f64`/`mul_f64`; this keeps the
/// trait free of an order-carrying constructor.
pub trait Arith: Clone {
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn add_f64(&self, s: f64) -> Self;
    fn mul_f64(&self, s: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
}

impl Arith for f64 {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn add_f64(&self, s: f64) -> Self {
        self + s
    }
    fn mul_f64(&self, s: f64) -> Self {
        self * s
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
}

impl Arith for Jet {
    fn add(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a + b)
    }

    fn sub(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a - b)
    }

    fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.len(), o.len());
        let n = self.len();
        let mut c = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.c[j] * o.c[k - j];
            }
            c[k] = acc;
        }
        Jet { c }
    }

    fn neg(&self) -> Self {
        Jet {
            c: self.c.iter().map(|v| -v).collect(),
        }
    }

    fn add_f64(&self, s: f64) -> Self {
        let mut c = self.c.clone();
        c[0] += s;
        Jet { c }
    }

    fn mul_f64(&self, s: f64) -> Self {
        Jet {
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    fn sin(&self) -> Self {
        self.sin_cos().0
    }

    fn cos(&self) -> Self {
        self.sin_cos().1
    }
}
