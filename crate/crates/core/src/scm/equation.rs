/// Plain function computing a node value from its parents and its noise.
pub type EvalFn = fn(&[f64], f64) -> f64;
/// Inverse in the noise argument: the noise that yields `value` given parents.
pub type InvertFn = fn(&[f64], f64) -> f64;

/// Structural equation of one node. Parent values are passed in the order the
/// parents were declared.
#[derive(Debug, Clone)]
pub enum Equation {
    /// `x := u`
    Noise,
    /// `x := intercept + Σ weights·parents + u`
    Linear { weights: Vec<f64>, intercept: f64 },
    Custom { eval: EvalFn, invert: Option<InvertFn> },
    /// `x := θ`, the result of an intervention.
    Constant(f64),
}

impl Equation {
    pub fn custom(eval: EvalFn, invert: InvertFn) -> Self {
        Equation::Custom { eval, invert: Some(invert) }
    }

    pub fn evaluate(&self, parents: &[f64], noise: f64) -> f64 {
        match self {
            Equation::Noise => noise,
            Equation::Linear { weights, intercept } => {
                intercept + weights.iter().zip(parents).map(|(w, p)| w * p).sum::<f64>() + noise
            }
            Equation::Custom { eval, .. } => eval(parents, noise),
            Equation::Constant(v) => *v,
        }
    }

    /// Noise value that reproduces `value`, when the equation is invertible.
    pub fn invert_noise(&self, parents: &[f64], value: f64) -> Option<f64> {
        match self {
            Equation::Noise => Some(value),
            Equation::Linear { weights, intercept } => Some(
                value - intercept - weights.iter().zip(parents).map(|(w, p)| w * p).sum::<f64>(),
            ),
            Equation::Custom { invert, .. } => invert.map(|f| f(parents, value)),
            Equation::Constant(_) => None,
        }
    }

    pub fn is_invertible(&self) -> bool {
        !matches!(self, Equation::Constant(_) | Equation::Custom { invert: None, .. })
    }
}
