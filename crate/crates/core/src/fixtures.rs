//! Reference systems used throughout the tests, benches and CLI examples.

use ndarray::{array, Array2};

use crate::interconnect::{interconnect, matrix, ControllerStructure, DelayedTerm, PlantModel};
use crate::system::{DdaeSystem, DelayVector};

/// Two-delay DDAE realizing
/// `T(s) = (s + 2) / (s (1 - e^{-s tau1}/16 + e^{-s tau2}/2) + 1)`.
///
/// States: `x1 = D(s) x2 - w` (differential), `x2 = z` (algebraic), where
/// `D(s) = 1 - e^{-s tau1}/16 + e^{-s tau2}/2`.
pub fn neutral1(tau1: f64, tau2: f64) -> DdaeSystem {
    DdaeSystem::new(
        array![[1.0, 0.0], [0.0, 0.0]],
        vec![
            array![[0.0, -1.0], [1.0, -1.0]],
            array![[0.0, 0.0], [0.0, 1.0 / 16.0]],
            array![[0.0, 0.0], [0.0, -0.5]],
        ],
        array![[2.0], [1.0]],
        array![[0.0, 1.0]],
        DelayVector::new(vec![tau1, tau2]).expect("positive delays"),
    )
    .expect("consistent fixture")
}

/// Closed-form transfer function of [`neutral1`].
pub fn neutral1_closed_form(s: num_complex::Complex64, tau1: f64, tau2: f64) -> num_complex::Complex64 {
    let d = 1.0 - (-s * tau1).exp() / 16.0 + (-s * tau2).exp() * 0.5;
    (s + 2.0) / (s * d + 1.0)
}

/// `x' = -x + w, z = x`: peak gain 1 at omega = 0.
pub fn scalar_lag() -> DdaeSystem {
    DdaeSystem::ode(array![[1.0]], array![[-1.0]], array![[1.0]], array![[1.0]]).expect("fixture")
}

/// `x' = -x(t - tau) + w, z = x`.
pub fn delayed_scalar(tau: f64) -> DdaeSystem {
    DdaeSystem::new(
        array![[1.0]],
        vec![array![[0.0]], array![[-1.0]]],
        array![[1.0]],
        array![[1.0]],
        DelayVector::new(vec![tau]).expect("positive delay"),
    )
    .expect("fixture")
}

/// Two-state retarded plant with state delay `h`, used for static output
/// feedback design:
///
/// ```text
/// x' = [2 1; 0 -1] x + [-1 0; -1 1] x(t-h) + [-0.5; 1] w + [3; 1] u
/// z  = [1 -0.5; 0 0] x + [0; 1] u
/// y  = x
/// ```
pub fn table1_plant(h: f64) -> PlantModel {
    PlantModel {
        a: vec![
            DelayedTerm::undelayed(matrix(&[&[2.0, 1.0], &[0.0, -1.0]])),
            DelayedTerm::new(h, matrix(&[&[-1.0, 0.0], &[-1.0, 1.0]])),
        ],
        b_w: vec![DelayedTerm::undelayed(matrix(&[&[-0.5], &[1.0]]))],
        b_u: vec![DelayedTerm::undelayed(matrix(&[&[3.0], &[1.0]]))],
        c_z: vec![DelayedTerm::undelayed(matrix(&[&[1.0, -0.5], &[0.0, 0.0]]))],
        d_zu: vec![DelayedTerm::undelayed(matrix(&[&[0.0], &[1.0]]))],
        c_y: vec![DelayedTerm::undelayed(Array2::eye(2))],
        ..Default::default()
    }
}

/// Published static gains for [`table1_plant`]: `(h, K, achieved norm)`.
pub const TABLE1: [(f64, [f64; 2], f64); 10] = [
    (0.1, [-17.8065, 9.5915], 0.4005),
    (0.2, [-7.1854, 3.7727], 0.3981),
    (0.3, [-4.3068, 2.0695], 0.3995),
    (0.4, [-3.7321, 1.6556], 0.4041),
    (0.5, [-3.5878, 1.5017], 0.4101),
    (0.6, [-3.4104, 1.3563], 0.4158),
    (0.7, [-3.2772, 1.2514], 0.4206),
    (0.8, [0.8892, -0.9308], 0.3953),
    (0.9, [0.0518, -0.4074], 0.3953),
    (1.0, [0.1942, -0.4964], 0.3953),
];

pub fn table1_closed_loop(h: f64, k: &[f64]) -> DdaeSystem {
    interconnect(&table1_plant(h), &ControllerStructure::static_gain(1, 2), k).expect("well-posed loop")
}
