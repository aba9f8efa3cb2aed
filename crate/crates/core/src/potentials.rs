//! Free-energy potentials and the discrete Ginzburg-Landau energy.

use crate::error::{Error, Result};
use crate::grid::{stiffness_apply_into, GridSpec, ScalarField};

/// Tolerance on `|u| <= 1` when evaluating the obstacle energy.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialSpec {
    /// `(1 - s^2) / 2` plus the indicator of `[-1, 1]`.
    Obstacle,
    /// `(1 - s^2) / 2` plus the quadratic penalty `beta_hat_delta`.
    MoreauYosida { delta: f64 },
    /// `(s^2 - 1)^2`.
    Quartic,
}

impl PotentialSpec {
    pub fn moreau_yosida(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(PotentialSpec::MoreauYosida { delta })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::MoreauYosida { delta } => check_delta(delta),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PotentialSpec::Obstacle => "obstacle",
            PotentialSpec::MoreauYosida { .. } => "moreau-yosida",
            PotentialSpec::Quartic => "quartic",
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(
            "delta",
            format!("must be positive, got {delta}"),
        ));
    }
    Ok(())
}

/// Penalty `ψ(s)`: half the squared distance from `s` to `[-1, 1]`.
#[inline]
pub fn box_penalty(s: f64) -> f64 {
    if s > 1.0 {
        0.5 * (s - 1.0) * (s - 1.0)
    } else if s < -1.0 {
        0.5 * (s + 1.0) * (s + 1.0)
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn beta_unchecked(s: f64, delta: f64) -> f64 {
    ((s - 1.0).max(0.0) + (s + 1.0).min(0.0)) / delta
}

/// Moreau-Yosida approximation of the subdifferential of the indicator of
/// `[-1, 1]`: zero inside the box and linear with slope `1/delta` outside.
pub fn beta_delta(s: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(beta_unchecked(s, delta))
}

/// Antiderivative of [`beta_delta`] vanishing at zero.
pub fn beta_hat_delta(s: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(box_penalty(s) / delta)
}

/// Derivative of the quartic double well `(s^2 - 1)^2`.
#[inline]
pub fn quartic_prime(s: f64) -> f64 {
    4.0 * s * (s * s - 1.0)
}

#[inline]
pub fn quartic(s: f64) -> f64 {
    let t = s * s - 1.0;
    t * t
}

/// Discrete energy `(eps/2) (u, K u) + (1/eps) sum_j m_j W(u_j)`.
///
/// For the obstacle potential the energy is only finite on the feasible set;
/// nodes with `|u| > 1 + FEASIBILITY_SLACK` produce a constraint error.
pub fn discrete_energy(
    grid: &GridSpec,
    u: &ScalarField,
    eps: f64,
    pot: PotentialSpec,
) -> Result<f64> {
    grid.ensure_same(u.grid())?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    pot.validate()?;
    let values = u.values();
    let mut ku = vec![0.0; grid.len()];
    stiffness_apply_into(grid, values, &mut ku);
    let gradient: f64 = values.iter().zip(&ku).map(|(a, b)| a * b).sum();

    let mut bulk = 0.0;
    for (node, &s) in values.iter().enumerate() {
        let w = match pot {
            PotentialSpec::Obstacle => {
                if s.abs() > 1.0 + FEASIBILITY_SLACK {
                    return Err(Error::ConstraintViolation {
                        node,
                        value: s.abs(),
                    });
                }
                0.5 * (1.0 - s * s)
            }
            PotentialSpec::MoreauYosida { delta } => box_penalty(s) / delta + 0.5 * (1.0 - s * s),
            PotentialSpec::Quartic => quartic(s),
        };
        bulk += grid.weight(node) * w;
    }
    Ok(0.5 * eps * gradient + bulk / eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> impl Iterator<Item = f64> {
        (0..257).map(|k| -3.0 + 6.0 * k as f64 / 256.0)
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_delta(0.5, 0.3).unwrap(), 0.0);
        assert!((beta_delta(1.0 + 0.25, 0.25).unwrap() - 1.0).abs() < 1e-15);
        assert!((beta_delta(-1.5, 0.1).unwrap() + 5.0).abs() < 1e-12);
        assert!(beta_delta(2.0, 0.0).is_err());
        assert!(beta_delta(2.0, -1.0).is_err());
    }

    #[test]
    fn beta_hat_examples() {
        assert_eq!(beta_hat_delta(0.0, 0.1).unwrap(), 0.0);
        assert_eq!(beta_hat_delta(2.0, 0.5).unwrap(), 1.0);
        assert!(beta_hat_delta(2.0, 0.0).is_err());
        let (s, d, e) = (1.3, 0.1, 1e-6);
        let fd =
            (beta_hat_delta(s + e, d).unwrap() - beta_hat_delta(s - e, d).unwrap()) / (2.0 * e);
        assert!((fd - beta_delta(s, d).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn quartic_prime_examples() {
        assert_eq!(quartic_prime(0.0), 0.0);
        assert_eq!(quartic_prime(1.0), 0.0);
        assert_eq!(quartic_prime(-1.0), 0.0);
        assert_eq!(quartic_prime(2.0), 24.0);
    }

    #[test]
    fn sign_and_antiderivative_bounds() {
        for delta in [1.0, 0.1, 1e-3] {
            for s in samples() {
                let b = beta_delta(s, delta).unwrap();
                assert!(s * b >= 0.0);
                assert!(beta_hat_delta(s, delta).unwrap() <= s * b + 1e-12);
                for image in [-1.0, 0.0, 1.0] {
                    assert!((image - s) * b <= 0.0, "s={s} I={image}");
                }
            }
        }
    }

    #[test]
    fn beta_monotone_in_s_and_delta() {
        let pts: Vec<f64> = samples().collect();
        for delta in [0.5, 0.05] {
            for w in pts.windows(2) {
                assert!(beta_delta(w[0], delta).unwrap() <= beta_delta(w[1], delta).unwrap());
            }
        }
        for s in pts.iter().copied().filter(|s| *s > 1.0) {
            assert!(beta_delta(s, 0.5).unwrap() <= beta_delta(s, 0.05).unwrap());
        }
    }

    #[test]
    fn beta_hat_is_scaled_box_penalty() {
        for s in samples() {
            let lhs = beta_hat_delta(s, 0.02).unwrap();
            assert!((lhs - box_penalty(s) / 0.02).abs() <= 1e-12 * lhs.max(1.0));
        }
    }

    #[test]
    fn energy_of_pure_phases() {
        let g = GridSpec::new(5, 5).unwrap();
        let one = ScalarField::constant(g, 1.0);
        assert_eq!(
            discrete_energy(&g, &one, 0.3, PotentialSpec::Obstacle).unwrap(),
            0.0
        );
        let zero = ScalarField::zeros(g);
        let e = discrete_energy(&g, &zero, 1.0, PotentialSpec::Obstacle).unwrap();
        assert!((e - 0.5).abs() < 1e-15);
        let e_my =
            discrete_energy(&g, &zero, 1.0, PotentialSpec::MoreauYosida { delta: 0.1 }).unwrap();
        assert_eq!(e, e_my);
        assert_eq!(
            discrete_energy(&g, &one, 0.3, PotentialSpec::Quartic).unwrap(),
            0.0
        );
    }

    #[test]
    fn obstacle_energy_rejects_infeasible() {
        let g = GridSpec::new(3, 3).unwrap();
        let mut u = ScalarField::zeros(g);
        u[4] = 1.0 + 1e-9;
        assert!(matches!(
            discrete_energy(&g, &u, 0.1, PotentialSpec::Obstacle),
            Err(Error::ConstraintViolation { node: 4, .. })
        ));
        assert!(discrete_energy(&g, &u, 0.1, PotentialSpec::MoreauYosida { delta: 1e-2 }).is_ok());
    }
}
