//! Cylindrical test functionals `g = phi(W_{t_1}, ..., W_{t_d})` with exact
//! gradients and Hessians.

use super::{wiener_integral_unchecked, DiscretePath, Direction, TimeGrid};
use crate::error::{Error, Result};

/// `coef * prod_i x_i^{powers[i]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Outer functions `phi: R^d -> R`.
#[derive(Debug, Clone, PartialEq)]
pub enum Outer {
    Constant(f64),
    /// Total degree at most 3.
    Polynomial(Vec<Monomial>),
    /// `exp(-|x - center|^2 / (2 scale^2))`.
    Bump { center: Vec<f64>, scale: f64 },
    /// `prod_i logistic(slope_i x_i + shift_i)`.
    SigmoidProduct { slopes: Vec<f64>, shifts: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalFunction {
    id: String,
    grid: TimeGrid,
    points: Vec<usize>,
    outer: Outer,
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn powi(x: f64, p: u32) -> f64 {
    x.powi(p as i32)
}

impl Outer {
    fn dim(&self) -> Option<usize> {
        match self {
            Outer::Constant(_) => None,
            Outer::Polynomial(terms) => terms.first().map(|t| t.powers.len()),
            Outer::Bump { center, .. } => Some(center.len()),
            Outer::SigmoidProduct { slopes, .. } => Some(slopes.len()),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            Outer::Constant(_) => Ok(()),
            Outer::Polynomial(terms) => {
                for t in terms {
                    if t.powers.len() != d {
                        return bad(format!("monomial arity {} != {d}", t.powers.len()));
                    }
                    if t.powers.iter().sum::<u32>() > 3 {
                        return bad("polynomial degree above 3".into());
                    }
                }
                Ok(())
            }
            Outer::Bump { center, scale } => {
                if center.len() != d || !(*scale > 0.0) {
                    return bad("bump needs one center per point and a positive scale".into());
                }
                Ok(())
            }
            Outer::SigmoidProduct { slopes, shifts } => {
                if slopes.len() != d || shifts.len() != d {
                    return bad("sigmoid product needs one slope and shift per point".into());
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Outer::Constant(c) => *c,
            Outer::Polynomial(terms) => terms
                .iter()
                .map(|t| {
                    t.coef
                        * x.iter()
                            .zip(&t.powers)
                            .map(|(xi, p)| powi(*xi, *p))
                            .product::<f64>()
                })
                .sum(),
            Outer::Bump { center, scale } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                (-r2 / (2.0 * scale * scale)).exp()
            }
            Outer::SigmoidProduct { slopes, shifts } => x
                .iter()
                .zip(slopes.iter().zip(shifts))
                .map(|(xi, (a, b))| logistic(a * xi + b))
                .product(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        match self {
            Outer::Constant(_) => vec![0.0; d],
            Outer::Polynomial(terms) => {
                let mut g = vec![0.0; d];
                for t in terms {
                    for (i, gi) in g.iter_mut().enumerate() {
                        if t.powers[i] == 0 {
                            continue;
                        }
                        let mut v = t.coef * t.powers[i] as f64;
                        for (j, (xj, p)) in x.iter().zip(&t.powers).enumerate() {
                            v *= if j == i { powi(*xj, p - 1) } else { powi(*xj, *p) };
                        }
                        *gi += v;
                    }
                }
                g
            }
            Outer::Bump { center, scale } => {
                let f = self.value(x);
                let s2 = scale * scale;
                x.iter().zip(center).map(|(a, c)| -f * (a - c) / s2).collect()
            }
            Outer::SigmoidProduct { slopes, shifts } => {
                let s: Vec<f64> = x
                    .iter()
                    .zip(slopes.iter().zip(shifts))
                    .map(|(xi, (a, b))| logistic(a * xi + b))
                    .collect();
                (0..d)
                    .map(|i| {
                        let mut v = slopes[i] * s[i] * (1.0 - s[i]);
                        for (j, sj) in s.iter().enumerate() {
                            if j != i {
                                v *= sj;
                            }
                        }
                        v
                    })
                    .collect()
            }
        }
    }

    /// Row-major `d x d` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        match self {
            Outer::Constant(_) => {}
            Outer::Polynomial(terms) => {
                for t in terms {
                    for i in 0..d {
                        for k in 0..d {
                            let mut powers = t.powers.clone();
                            let mut c = t.coef;
                            for idx in [i, k] {
                                if powers[idx] == 0 {
                                    c = 0.0;
                                    break;
                                }
                                c *= powers[idx] as f64;
                                powers[idx] -= 1;
                            }
                            if c != 0.0 {
                                h[i * d + k] += c * x
                                    .iter()
                                    .zip(&powers)
                                    .map(|(xj, p)| powi(*xj, *p))
                                    .product::<f64>();
                            }
                        }
                    }
                }
            }
            Outer::Bump { center, scale } => {
                let f = self.value(x);
                let s2 = scale * scale;
                for i in 0..d {
                    for k in 0..d {
                        let ui = (x[i] - center[i]) / s2;
                        let uk = (x[k] - center[k]) / s2;
                        h[i * d + k] = f * (ui * uk - if i == k { 1.0 / s2 } else { 0.0 });
                    }
                }
            }
            Outer::SigmoidProduct { slopes, shifts } => {
                let s: Vec<f64> = x
                    .iter()
                    .zip(slopes.iter().zip(shifts))
                    .map(|(xi, (a, b))| logistic(a * xi + b))
                    .collect();
                let d1: Vec<f64> = (0..d).map(|i| slopes[i] * s[i] * (1.0 - s[i])).collect();
                let d2: Vec<f64> = (0..d)
                    .map(|i| slopes[i] * slopes[i] * s[i] * (1.0 - s[i]) * (1.0 - 2.0 * s[i]))
                    .collect();
                for i in 0..d {
                    for k in 0..d {
                        let mut v = 1.0;
                        for j in 0..d {
                            v *= if i == k && j == i {
                                d2[j]
                            } else if j == i || j == k {
                                d1[j]
                            } else {
                                s[j]
                            };
                        }
                        h[i * d + k] = v;
                    }
                }
            }
        }
        h
    }
}

/// Values needed by first and second adjoints at one path.
#[derive(Debug, Clone)]
pub(crate) struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl CylindricalFunction {
    pub fn new(id: impl Into<String>, grid: TimeGrid, points: Vec<usize>, outer: Outer) -> Result<Self> {
        for &p in &points {
            grid.check_index(p)?;
        }
        if let Some(d) = outer.dim() {
            if d != points.len() {
                return Err(Error::InvalidArgument(format!(
                    "outer function has arity {d}, {} evaluation points given",
                    points.len()
                )));
            }
        }
        outer.validate(points.len())?;
        Ok(Self {
            id: id.into(),
            grid,
            points,
            outer,
        })
    }

    pub const CATALOG_IDS: [&'static str; 5] = ["one", "linear", "cubic", "bump", "sigmoid"];

    /// Fixed catalog of test functionals on `grid`.
    pub fn from_catalog(grid: TimeGrid, id: &str) -> Result<Self> {
        let at = |f: f64| grid.index_at_fraction(f);
        let mono = |coef: f64, powers: &[u32]| Monomial {
            coef,
            powers: powers.to_vec(),
        };
        let (points, outer) = match id {
            "one" => (vec![], Outer::Constant(1.0)),
            "linear" => (
                vec![at(0.5), at(1.0)],
                Outer::Polynomial(vec![mono(1.0, &[1, 0]), mono(0.5, &[0, 1])]),
            ),
            "cubic" => (
                vec![at(1.0 / 3.0), at(1.0)],
                Outer::Polynomial(vec![
                    mono(0.5, &[0, 0]),
                    mono(1.0, &[3, 0]),
                    mono(-1.0, &[1, 1]),
                    mono(0.25, &[0, 2]),
                ]),
            ),
            "bump" => (
                vec![at(0.25), at(0.75)],
                Outer::Bump {
                    center: vec![0.0, 0.0],
                    scale: grid.horizon().sqrt(),
                },
            ),
            "sigmoid" => (
                vec![at(0.5), at(1.0)],
                Outer::SigmoidProduct {
                    slopes: vec![2.0, 1.0],
                    shifts: vec![0.0, -0.5],
                },
            ),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown cylindrical function `{other}`"
                )))
            }
        };
        Self::new(id, grid, points, outer)
    }

    pub fn catalog(grid: TimeGrid) -> Vec<Self> {
        Self::CATALOG_IDS
            .iter()
            .map(|id| Self::from_catalog(grid, id).expect("catalog entries are valid"))
            .collect()
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn outer(&self) -> &Outer {
        &self.outer
    }

    fn coords(&self, values: &[f64]) -> Vec<f64> {
        self.points.iter().map(|&p| values[p]).collect()
    }

    pub fn value(&self, path: &DiscretePath) -> Result<f64> {
        self.grid.ensure_same(path.grid(), "cylindrical function")?;
        Ok(self.outer.value(&self.coords(path.values())))
    }

    /// `d_h g = sum_i d_i phi * h(t_{p_i})`.
    pub fn directional(&self, path: &DiscretePath, h: &Direction) -> Result<f64> {
        self.grid.ensure_same(path.grid(), "cylindrical function")?;
        self.grid.ensure_same(h.grid(), "cylindrical direction")?;
        let grad = self.outer.gradient(&self.coords(path.values()));
        Ok(self.contract1(&grad, h))
    }

    /// `d_k d_h g`.
    pub fn second_directional(&self, path: &DiscretePath, k: &Direction, h: &Direction) -> Result<f64> {
        self.grid.ensure_same(path.grid(), "cylindrical function")?;
        self.grid.ensure_same(k.grid(), "cylindrical direction")?;
        self.grid.ensure_same(h.grid(), "cylindrical direction")?;
        let hess = self.outer.hessian(&self.coords(path.values()));
        Ok(self.contract2(&hess, k, h))
    }

    pub(crate) fn jet(&self, values: &[f64]) -> Jet {
        let x = self.coords(values);
        Jet {
            value: self.outer.value(&x),
            gradient: self.outer.gradient(&x),
            hessian: self.outer.hessian(&x),
        }
    }

    pub(crate) fn contract1(&self, grad: &[f64], h: &Direction) -> f64 {
        self.points.iter().zip(grad).map(|(&p, g)| g * h.at(p)).sum()
    }

    pub(crate) fn contract2(&self, hess: &[f64], k: &Direction, h: &Direction) -> f64 {
        let d = self.points.len();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += hess[i * d + j] * k.at(self.points[i]) * h.at(self.points[j]);
            }
        }
        acc
    }
}

/// Skorokhod adjoint `d*_h g = d_h g - g I(h)` with the discrete Ito integral.
pub fn adjoint_apply(g: &CylindricalFunction, h: &Direction, path: &DiscretePath) -> Result<f64> {
    g.grid.ensure_same(path.grid(), "adjoint")?;
    g.grid.ensure_same(h.grid(), "adjoint")?;
    Ok(adjoint_unchecked(g, h, path.values()))
}

pub(crate) fn adjoint_unchecked(g: &CylindricalFunction, h: &Direction, values: &[f64]) -> f64 {
    let x = g.coords(values);
    let dg = g.contract1(&g.outer.gradient(&x), h);
    dg - g.outer.value(&x) * wiener_integral_unchecked(h.density(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::DirectionKind;

    fn finite_diff_gradient(outer: &Outer, x: &[f64]) -> Vec<f64> {
        let step = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut up = x.to_vec();
                let mut dn = x.to_vec();
                up[i] += step;
                dn[i] -= step;
                (outer.value(&up) - outer.value(&dn)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let grid = TimeGrid::new(12, 1.0).unwrap();
        let x = [0.3, -0.7];
        for g in CylindricalFunction::catalog(grid) {
            let outer = g.outer();
            let d = g.points().len();
            let xs = &x[..d];
            let grad = outer.gradient(xs);
            for (a, b) in grad.iter().zip(finite_diff_gradient(outer, xs)) {
                assert!((a - b).abs() < 1e-7, "{}: {a} vs {b}", g.id());
            }
            let hess = outer.hessian(xs);
            for i in 0..d {
                let step = 1e-5;
                let mut up = xs.to_vec();
                let mut dn = xs.to_vec();
                up[i] += step;
                dn[i] -= step;
                let gu = outer.gradient(&up);
                let gd = outer.gradient(&dn);
                for k in 0..d {
                    let fd = (gu[k] - gd[k]) / (2.0 * step);
                    assert!((hess[i * d + k] - fd).abs() < 1e-6, "{} H[{i}{k}]", g.id());
                }
            }
        }
    }

    #[test]
    fn adjoint_examples() {
        let grid = TimeGrid::new(4, 1.0).unwrap();
        let path = DiscretePath::new(grid, vec![0.0, 0.5, -0.25, 0.75, 1.5]).unwrap();
        let h = Direction::from_kind(grid, DirectionKind::Constant);
        let one = CylindricalFunction::from_catalog(grid, "one").unwrap();
        let integral = crate::path::wiener_integral(&h, &path).unwrap();
        assert_eq!(adjoint_apply(&one, &h, &path).unwrap(), -integral);

        // g = W_{t_2}: d*_h g = t_2 - W_{t_2} W_T
        let w2 = CylindricalFunction::new(
            "w2",
            grid,
            vec![2],
            Outer::Polynomial(vec![Monomial { coef: 1.0, powers: vec![1] }]),
        )
        .unwrap();
        let got = adjoint_apply(&w2, &h, &path).unwrap();
        assert!((got - (0.5 - (-0.25) * 1.5)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_construction() {
        let grid = TimeGrid::new(4, 1.0).unwrap();
        assert!(CylindricalFunction::from_catalog(grid, "nope").is_err());
        assert!(CylindricalFunction::new("x", grid, vec![5], Outer::Constant(1.0)).is_err());
        let quartic = Outer::Polynomial(vec![Monomial { coef: 1.0, powers: vec![4] }]);
        assert!(CylindricalFunction::new("x", grid, vec![1], quartic).is_err());
        let other = TimeGrid::new(5, 1.0).unwrap();
        let g = CylindricalFunction::from_catalog(grid, "one").unwrap();
        let p = DiscretePath::new(other, vec![0.0; 6]).unwrap();
        assert!(g.value(&p).is_err());
    }
}
