use crate::eigen::EigenSystem;

/// `L` functions that can be evaluated at observation times.
pub trait Basis: Sync {
    fn len(&self) -> usize;

    /// `None` when `t` lies outside the basis support.
    fn eval(&self, l: usize, t: f64) -> Option<f64>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Leading components of an estimated eigen system, linearly interpolated between grid
/// points.
pub struct EigenBasis<'a> {
    system: &'a EigenSystem,
    components: usize,
}

impl<'a> EigenBasis<'a> {
    pub fn new(system: &'a EigenSystem, components: usize) -> Self {
        Self {
            system,
            components: components.min(system.len()),
        }
    }
}

impl Basis for EigenBasis<'_> {
    fn len(&self) -> usize {
        self.components
    }

    fn eval(&self, l: usize, t: f64) -> Option<f64> {
        self.system.evaluate(l, t)
    }
}

type BasisFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Known analytic functions, as in simulation studies where the components are given.
pub struct FunctionBasis {
    funcs: Vec<BasisFn>,
}

impl FunctionBasis {
    pub fn new(funcs: Vec<BasisFn>) -> Self {
        Self { funcs }
    }

    pub fn single(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            funcs: vec![Box::new(f)],
        }
    }
}

impl Basis for FunctionBasis {
    fn len(&self) -> usize {
        self.funcs.len()
    }

    fn eval(&self, l: usize, t: f64) -> Option<f64> {
        Some((self.funcs[l])(t))
    }
}
