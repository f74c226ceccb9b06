//! Closed-loop assembly of a delayed plant and a fixed-structure controller.
//!
//! Feedthrough terms, delayed inputs/outputs and neutral terms are removed by
//! algebraic slack states, so the closed loop is a plain [`DdaeSystem`] whose
//! `B` and `C` are constant and whose controller parameters enter `A0..Am`
//! affinely.
//!
//! Plant:
//!
//! ```text
//! d/dt (x(t) + sum H_k x(t - h_k)) = sum A_d x(t-d) + sum Bw_d w(t-d) + sum Bu_d u(t-d)
//!                             z(t) = sum Cz_d x(t-d) + sum Dzw_d w(t-d) + sum Dzu_d u(t-d)
//!                             y(t) = sum Cy_d x(t-d) + sum Dyw_d w(t-d) + sum Dyu_d u(t-d)
//! ```
//!
//! Controller, with optional input delay `tc`:
//!
//! ```text
//! xc'(t) = Ac xc(t) + Bc y(t - tc)
//!   u(t) = Cc xc(t) + Dc y(t - tc)
//! ```
//!
//! Closed-loop state layout: `[gamma_x?, x, xc, u, y?, gamma_w?, gamma_z?]`,
//! where `?` blocks are only present when the plant needs them.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::linalg::add_block;
use crate::system::{check_causality, compute_nullspaces, causality_margin, DdaeSystem, DelayVector};

/// One matrix of a plant block, acting on a signal delayed by `delay`
/// (0 means undelayed).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedTerm {
    pub delay: f64,
    pub matrix: Array2<f64>,
}

impl DelayedTerm {
    pub fn new(delay: f64, matrix: Array2<f64>) -> Self {
        Self { delay, matrix }
    }

    pub fn undelayed(matrix: Array2<f64>) -> Self {
        Self { delay: 0.0, matrix }
    }

    fn is_zero(&self) -> bool {
        self.matrix.iter().all(|&x| x == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlantModel {
    pub neutral: Vec<DelayedTerm>,
    pub a: Vec<DelayedTerm>,
    pub b_w: Vec<DelayedTerm>,
    pub b_u: Vec<DelayedTerm>,
    pub c_z: Vec<DelayedTerm>,
    pub d_zw: Vec<DelayedTerm>,
    pub d_zu: Vec<DelayedTerm>,
    pub c_y: Vec<DelayedTerm>,
    pub d_yw: Vec<DelayedTerm>,
    pub d_yu: Vec<DelayedTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantDims {
    pub n_x: usize,
    pub n_w: usize,
    pub n_u: usize,
    pub n_z: usize,
    pub n_y: usize,
}

impl PlantModel {
    pub fn dims(&self) -> Result<PlantDims> {
        let first = |terms: &[DelayedTerm], name: &str| {
            terms
                .first()
                .map(|t| t.matrix.dim())
                .ok_or_else(|| Error::Dimension(format!("plant block {name} is required")))
        };
        let (n_x, _) = first(&self.a, "A")?;
        let (_, n_u) = first(&self.b_u, "Bu")?;
        let (n_z, _) = first(&self.c_z, "Cz")?;
        let (n_y, _) = first(&self.c_y, "Cy")?;
        let n_w = self
            .b_w
            .first()
            .or(self.d_zw.first())
            .or(self.d_yw.first())
            .map(|t| t.matrix.ncols())
            .ok_or_else(|| Error::Dimension("plant needs Bw, Dzw or Dyw to fix n_w".into()))?;
        let dims = PlantDims { n_x, n_w, n_u, n_z, n_y };

        let check = |terms: &[DelayedTerm], name: &str, r: usize, c: usize| -> Result<()> {
            for t in terms {
                if t.matrix.dim() != (r, c) {
                    return Err(Error::Dimension(format!(
                        "plant block {name} is {:?}, expected ({r}, {c})",
                        t.matrix.dim()
                    )));
                }
                if !(t.delay.is_finite() && t.delay >= 0.0) {
                    return Err(Error::InvalidDelay(t.delay));
                }
            }
            Ok(())
        };
        check(&self.neutral, "H", n_x, n_x)?;
        check(&self.a, "A", n_x, n_x)?;
        check(&self.b_w, "Bw", n_x, n_w)?;
        check(&self.b_u, "Bu", n_x, n_u)?;
        check(&self.c_z, "Cz", n_z, n_x)?;
        check(&self.d_zw, "Dzw", n_z, n_w)?;
        check(&self.d_zu, "Dzu", n_z, n_u)?;
        check(&self.c_y, "Cy", n_y, n_x)?;
        check(&self.d_yw, "Dyw", n_y, n_w)?;
        check(&self.d_yu, "Dyu", n_y, n_u)?;
        if self.neutral.iter().any(|t| t.delay == 0.0) {
            return Err(Error::Invalid("neutral terms H must carry a positive delay".into()));
        }
        Ok(dims)
    }

    fn all_terms(&self) -> impl Iterator<Item = &DelayedTerm> {
        self.neutral
            .iter()
            .chain(&self.a)
            .chain(&self.b_w)
            .chain(&self.b_u)
            .chain(&self.c_z)
            .chain(&self.d_zw)
            .chain(&self.d_zu)
            .chain(&self.c_y)
            .chain(&self.d_yw)
            .chain(&self.d_yu)
    }

    /// Distinct positive delay values, in order of first appearance.
    pub fn delay_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for t in self.all_terms() {
            if t.delay > 0.0 && !out.contains(&t.delay) {
                out.push(t.delay);
            }
        }
        out
    }
}

/// Free/fixed pattern of one controller matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPattern {
    pub free: Array2<bool>,
    pub fixed: Array2<f64>,
}

impl MatrixPattern {
    pub fn all_free(rows: usize, cols: usize) -> Self {
        Self { free: Array2::from_elem((rows, cols), true), fixed: Array2::zeros((rows, cols)) }
    }

    pub fn all_fixed(fixed: Array2<f64>) -> Self {
        Self { free: Array2::from_elem(fixed.dim(), false), fixed }
    }

    fn n_free(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerBlock {
    Ac,
    Bc,
    Cc,
    Dc,
}

/// Fixed-order controller with a mask of tunable entries.
///
/// The parameter vector lists the free entries of `Ac`, `Bc`, `Cc`, `Dc`
/// (in that order), each matrix row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerStructure {
    pub order: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub ac: MatrixPattern,
    pub bc: MatrixPattern,
    pub cc: MatrixPattern,
    pub dc: MatrixPattern,
    pub input_delay: Option<f64>,
}

impl ControllerStructure {
    /// Static output feedback `u = K y` with every entry of `K` free.
    pub fn static_gain(n_u: usize, n_y: usize) -> Self {
        Self::full(0, n_u, n_y)
    }

    /// Dynamic controller of the given order with every entry free.
    pub fn full(order: usize, n_u: usize, n_y: usize) -> Self {
        Self {
            order,
            n_u,
            n_y,
            ac: MatrixPattern::all_free(order, order),
            bc: MatrixPattern::all_free(order, n_y),
            cc: MatrixPattern::all_free(n_u, order),
            dc: MatrixPattern::all_free(n_u, n_y),
            input_delay: None,
        }
    }

    pub fn with_input_delay(mut self, tau: f64) -> Self {
        self.input_delay = Some(tau);
        self
    }

    pub fn n_params(&self) -> usize {
        self.ac.n_free() + self.bc.n_free() + self.cc.n_free() + self.dc.n_free()
    }

    fn blocks(&self) -> [(ControllerBlock, &MatrixPattern); 4] {
        [
            (ControllerBlock::Ac, &self.ac),
            (ControllerBlock::Bc, &self.bc),
            (ControllerBlock::Cc, &self.cc),
            (ControllerBlock::Dc, &self.dc),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let expect = [
            ("Ac", &self.ac, (self.order, self.order)),
            ("Bc", &self.bc, (self.order, self.n_y)),
            ("Cc", &self.cc, (self.n_u, self.order)),
            ("Dc", &self.dc, (self.n_u, self.n_y)),
        ];
        for (name, pat, dim) in expect {
            if pat.free.dim() != dim || pat.fixed.dim() != dim {
                return Err(Error::Dimension(format!(
                    "controller {name} mask/fixed values must be {dim:?}"
                )));
            }
        }
        if let Some(t) = self.input_delay {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidDelay(t));
            }
        }
        Ok(())
    }

    /// Controller matrices `(Ac, Bc, Cc, Dc)` for parameter vector `p`.
    pub fn matrices(&self, p: &[f64]) -> Result<[Array2<f64>; 4]> {
        if p.len() != self.n_params() {
            return Err(Error::ParameterLength { expected: self.n_params(), got: p.len() });
        }
        let mut k = 0;
        let mut out = self.blocks().map(|(_, pat)| pat.fixed.clone());
        for (slot, (_, pat)) in out.iter_mut().zip(self.blocks()) {
            for (&free, val) in pat.free.iter().zip(slot.iter_mut()) {
                if free {
                    *val = p[k];
                    k += 1;
                }
            }
        }
        Ok(out)
    }
}

/// A closed loop whose `A` matrices depend affinely on a parameter vector:
/// `A_i(p) = A_i^0 + sum_k p_k A_i^(k)`.
#[derive(Debug, Clone)]
pub struct ParametricDdae {
    base: DdaeSystem,
    directions: Vec<Vec<(usize, Array2<f64>)>>,
}

impl ParametricDdae {
    /// `directions[k]` lists `(i, dA_i/dp_k)` for the matrices that `p_k` touches.
    pub fn new(base: DdaeSystem, directions: Vec<Vec<(usize, Array2<f64>)>>) -> Result<Self> {
        let n = base.n();
        for dir in &directions {
            for (i, m) in dir {
                if *i > base.m() || m.dim() != (n, n) {
                    return Err(Error::Dimension(format!(
                        "parameter direction targets A{i} with shape {:?}",
                        m.dim()
                    )));
                }
            }
        }
        Ok(Self { base, directions })
    }

    /// A template without parameters.
    pub fn constant(base: DdaeSystem) -> Self {
        Self { base, directions: Vec::new() }
    }

    pub fn n_params(&self) -> usize {
        self.directions.len()
    }

    pub fn base(&self) -> &DdaeSystem {
        &self.base
    }

    /// The constant matrices `dA_i/dp_k`.
    pub fn derivative(&self, k: usize) -> &[(usize, Array2<f64>)] {
        &self.directions[k]
    }

    pub fn substitute(&self, p: &[f64]) -> Result<DdaeSystem> {
        substitute_parameters(self, p)
    }
}

pub fn substitute_parameters(template: &ParametricDdae, p: &[f64]) -> Result<DdaeSystem> {
    if p.len() != template.n_params() {
        return Err(Error::ParameterLength { expected: template.n_params(), got: p.len() });
    }
    let base = &template.base;
    let mut a = base.a().to_vec();
    for (pk, dir) in p.iter().zip(&template.directions) {
        if *pk == 0.0 {
            continue;
        }
        for (i, m) in dir {
            a[*i].scaled_add(*pk, m);
        }
    }
    DdaeSystem::new(base.e().clone(), a, base.b().clone(), base.c().clone(), base.delays().clone())
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    x: usize,
    u: usize,
    gw: Option<usize>,
}

struct Builder<'a> {
    lay: Layout,
    plant_delays: Vec<f64>,
    ctrl_delay_index: usize,
    e: Array2<f64>,
    a: Vec<Array2<f64>>,
    b: Array2<f64>,
    plant: &'a PlantModel,
}

impl Builder<'_> {
    fn delay_index(&self, delay: f64) -> usize {
        if delay == 0.0 {
            0
        } else {
            1 + self.plant_delays.iter().position(|&d| d == delay).expect("delay registered")
        }
    }

    /// Add `m * w(t - d)` to the rows starting at `row`.
    fn add_w(&mut self, row: usize, term: &DelayedTerm) {
        if term.delay == 0.0 {
            add_block(&mut self.b, row, 0, term.matrix.view());
        } else {
            let i = self.delay_index(term.delay);
            add_block(&mut self.a[i], row, self.lay.gw.expect("w slack"), term.matrix.view());
        }
    }

    fn add_state(&mut self, row: usize, col: usize, term: &DelayedTerm) {
        let i = self.delay_index(term.delay);
        add_block(&mut self.a[i], row, col, term.matrix.view());
    }

    /// Rows `row..` of `0 = -s + sum C x + sum D_w w + sum D_u u`.
    fn output_rows(&mut self, row: usize, n_out: usize, cx: &[DelayedTerm], dw: &[DelayedTerm], du: &[DelayedTerm]) {
        add_block(&mut self.a[0], row, row, (-Array2::<f64>::eye(n_out)).view());
        for t in cx {
            self.add_state(row, self.lay.x, t);
        }
        for t in du {
            self.add_state(row, self.lay.u, t);
        }
        for t in dw {
            self.add_w(row, t);
        }
    }
}

fn any_nonzero(terms: &[DelayedTerm]) -> bool {
    terms.iter().any(|t| !t.is_zero())
}

fn any_delayed(terms: &[DelayedTerm]) -> bool {
    terms.iter().any(|t| t.delay > 0.0 && !t.is_zero())
}

/// Assemble the parametric closed loop of `plant` and `ctrl`.
pub fn closed_loop_template(plant: &PlantModel, ctrl: &ControllerStructure) -> Result<ParametricDdae> {
    let dims = plant.dims()?;
    ctrl.validate()?;
    if ctrl.n_u != dims.n_u || ctrl.n_y != dims.n_y {
        return Err(Error::Dimension(format!(
            "controller maps {} outputs to {} inputs, plant has n_y = {}, n_u = {}",
            ctrl.n_y, ctrl.n_u, dims.n_y, dims.n_u
        )));
    }

    let neutral = any_nonzero(&plant.neutral);
    let delayed_w = any_delayed(&plant.b_w) || any_delayed(&plant.d_zw) || any_delayed(&plant.d_yw);
    let z_slack = any_delayed(&plant.c_z) || any_delayed(&plant.d_zu) || any_nonzero(&plant.d_zw);
    let y_slack = any_delayed(&plant.c_y) || any_nonzero(&plant.d_yw) || any_nonzero(&plant.d_yu);

    let mut n = 0;
    let mut take = |k: usize| {
        let at = n;
        n += k;
        at
    };
    let gx = neutral.then(|| take(dims.n_x));
    let x = take(dims.n_x);
    let xc = take(ctrl.order);
    let u = take(dims.n_u);
    let y = y_slack.then(|| take(dims.n_y));
    let gw = delayed_w.then(|| take(dims.n_w));
    let gz = z_slack.then(|| take(dims.n_z));
    let lay = Layout { x, u, gw };

    let plant_delays = plant.delay_values();
    let mut taus = plant_delays.clone();
    let ctrl_delay_index = match ctrl.input_delay {
        Some(t) => {
            taus.push(t);
            taus.len()
        }
        None => 0,
    };
    let delays = DelayVector::new(taus)?;
    let m = delays.len();

    let mut bld = Builder {
        lay,
        plant_delays,
        ctrl_delay_index,
        e: Array2::zeros((n, n)),
        a: vec![Array2::zeros((n, n)); m + 1],
        b: Array2::zeros((n, dims.n_w)),
        plant,
    };

    // Plant dynamics. With neutral terms the differentiated quantity is the
    // slack gamma_x = x + sum H x(t - h) and x itself becomes algebraic.
    let dyn_row = gx.unwrap_or(x);
    add_block(&mut bld.e, dyn_row, gx.unwrap_or(x), Array2::<f64>::eye(dims.n_x).view());
    for t in &bld.plant.a {
        bld.add_state(dyn_row, x, t);
    }
    for t in &bld.plant.b_u {
        bld.add_state(dyn_row, u, t);
    }
    for t in &bld.plant.b_w {
        bld.add_w(dyn_row, t);
    }
    if let Some(gx) = gx {
        // 0 = -gamma_x + x + sum H x(t - h), written on the x rows
        add_block(&mut bld.a[0], x, gx, (-Array2::<f64>::eye(dims.n_x)).view());
        add_block(&mut bld.a[0], x, x, Array2::<f64>::eye(dims.n_x).view());
        for t in &bld.plant.neutral {
            bld.add_state(x, x, t);
        }
    }

    // Controller states are differential; u is algebraic.
    add_block(&mut bld.e, xc, xc, Array2::<f64>::eye(ctrl.order).view());
    add_block(&mut bld.a[0], u, u, (-Array2::<f64>::eye(dims.n_u)).view());

    if let Some(y) = y {
        bld.output_rows(y, dims.n_y, &plant.c_y, &plant.d_yw, &plant.d_yu);
    }
    if let Some(gw) = gw {
        add_block(&mut bld.a[0], gw, gw, (-Array2::<f64>::eye(dims.n_w)).view());
        add_block(&mut bld.b, gw, 0, Array2::<f64>::eye(dims.n_w).view());
    }
    if let Some(gz) = gz {
        bld.output_rows(gz, dims.n_z, &plant.c_z, &plant.d_zw, &plant.d_zu);
    }

    let mut c = Array2::zeros((dims.n_z, n));
    match gz {
        Some(gz) => add_block(&mut c, 0, gz, Array2::<f64>::eye(dims.n_z).view()),
        None => {
            for t in plant.c_z.iter().filter(|t| t.delay == 0.0) {
                add_block(&mut c, 0, x, t.matrix.view());
            }
            for t in plant.d_zu.iter().filter(|t| t.delay == 0.0) {
                add_block(&mut c, 0, u, t.matrix.view());
            }
        }
    }

    // Signal y(t - tc) seen by the controller, as a map from closed-loop
    // state to R^{n_y}.
    let y_map: Array2<f64> = match y {
        Some(y) => {
            let mut sel = Array2::zeros((dims.n_y, n));
            add_block(&mut sel, 0, y, Array2::<f64>::eye(dims.n_y).view());
            sel
        }
        None => {
            let mut sel = Array2::zeros((dims.n_y, n));
            for t in plant.c_y.iter().filter(|t| t.delay == 0.0) {
                add_block(&mut sel, 0, x, t.matrix.view());
            }
            sel
        }
    };

    let cdi = bld.ctrl_delay_index;
    let effect = |block: ControllerBlock, r: usize, col: usize| -> (usize, Array2<f64>) {
        let mut mat = Array2::zeros((n, n));
        match block {
            ControllerBlock::Ac => {
                mat[[xc + r, xc + col]] = 1.0;
                (0, mat)
            }
            ControllerBlock::Bc => {
                mat.slice_mut(s![xc + r, ..]).assign(&y_map.row(col));
                (cdi, mat)
            }
            ControllerBlock::Cc => {
                mat[[u + r, xc + col]] = 1.0;
                (0, mat)
            }
            ControllerBlock::Dc => {
                mat.slice_mut(s![u + r, ..]).assign(&y_map.row(col));
                (cdi, mat)
            }
        }
    };

    let mut directions = Vec::with_capacity(ctrl.n_params());
    for (block, pat) in ctrl.blocks() {
        for ((r, col), &free) in pat.free.indexed_iter() {
            let (i, mat) = effect(block, r, col);
            if free {
                directions.push(vec![(i, mat)]);
            } else {
                let v = pat.fixed[[r, col]];
                if v != 0.0 {
                    bld.a[i].scaled_add(v, &mat);
                }
            }
        }
    }

    let base = DdaeSystem::new(bld.e, bld.a, bld.b, c, delays)?;
    ParametricDdae::new(base, directions)
}

/// Closed loop for a concrete parameter vector. Fails with
/// [`Error::NonCausal`] when the interconnection has an ill-posed algebraic
/// loop.
pub fn interconnect(plant: &PlantModel, ctrl: &ControllerStructure, p: &[f64]) -> Result<DdaeSystem> {
    let sys = closed_loop_template(plant, ctrl)?.substitute(p)?;
    let bases = compute_nullspaces(&sys);
    if !check_causality(&sys, &bases) {
        return Err(Error::NonCausal { sigma_min: causality_margin(&sys, &bases) });
    }
    Ok(sys)
}

/// Helper for readable construction of small matrices from row slices.
pub fn matrix(rows: &[&[f64]]) -> Array2<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    Array2::from_shape_fn((r, c), |(i, j)| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn table1_layout() {
        let plant = fixtures::table1_plant(0.5);
        let ctrl = ControllerStructure::static_gain(1, 2);
        let sys = interconnect(&plant, &ctrl, &[-3.5878, 1.5017]).unwrap();
        assert_eq!(sys.n(), 3);
        assert_eq!(sys.e(), &matrix(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]));
        assert_eq!(sys.c(), &matrix(&[&[1.0, -0.5, 0.0], &[0.0, 0.0, 1.0]]));
        assert_eq!(sys.b(), &matrix(&[&[-0.5], &[1.0], &[0.0]]));
        // Bu K lives in A0 through the u slack row
        assert_eq!(sys.a()[0][[2, 0]], -3.5878);
        assert_eq!(sys.a()[0][[2, 1]], 1.5017);
        assert_eq!(sys.a()[0][[2, 2]], -1.0);
        assert_eq!(sys.a()[1][[2, 0]], 0.0);
    }

    #[test]
    fn controller_delay_gets_its_own_matrix() {
        let plant = fixtures::table1_plant(0.5);
        let ctrl = ControllerStructure::static_gain(1, 2).with_input_delay(0.5);
        let tmpl = closed_loop_template(&plant, &ctrl).unwrap();
        // equal value to the plant delay, but a separate entry
        assert_eq!(tmpl.base().delays().as_slice(), &[0.5, 0.5]);
        for k in 0..2 {
            let dir = tmpl.derivative(k);
            assert_eq!(dir.len(), 1);
            assert_eq!(dir[0].0, 2);
        }
    }

    #[test]
    fn zero_parameters_give_constant_part() {
        let plant = fixtures::table1_plant(0.5);
        let tmpl = closed_loop_template(&plant, &ControllerStructure::static_gain(1, 2)).unwrap();
        let sys = tmpl.substitute(&[0.0, 0.0]).unwrap();
        assert_eq!(sys.a(), tmpl.base().a());
    }

    #[test]
    fn parameter_length_is_checked() {
        let plant = fixtures::table1_plant(0.5);
        let tmpl = closed_loop_template(&plant, &ControllerStructure::static_gain(1, 2)).unwrap();
        assert!(matches!(tmpl.substitute(&[1.0]), Err(Error::ParameterLength { expected: 2, got: 1 })));
    }

    #[test]
    fn fixed_entries_stay_fixed() {
        let plant = fixtures::table1_plant(0.5);
        let mut ctrl = ControllerStructure::static_gain(1, 2);
        ctrl.dc.free[[0, 1]] = false;
        ctrl.dc.fixed[[0, 1]] = 0.25;
        assert_eq!(ctrl.n_params(), 1);
        let sys = interconnect(&plant, &ctrl, &[-2.0]).unwrap();
        assert_eq!(sys.a()[0][[2, 1]], 0.25);
        assert_eq!(sys.a()[0][[2, 0]], -2.0);
        let [_, _, _, dc] = ctrl.matrices(&[-2.0]).unwrap();
        assert_eq!(dc, matrix(&[&[-2.0, 0.25]]));
    }

    #[test]
    fn ill_posed_algebraic_loop_is_rejected() {
        // y = u, u = 1 * y  =>  (1 - 1) u = 0 is singular
        let plant = PlantModel {
            a: vec![DelayedTerm::undelayed(matrix(&[&[-1.0]]))],
            b_w: vec![DelayedTerm::undelayed(matrix(&[&[1.0]]))],
            b_u: vec![DelayedTerm::undelayed(matrix(&[&[1.0]]))],
            c_z: vec![DelayedTerm::undelayed(matrix(&[&[1.0]]))],
            c_y: vec![DelayedTerm::undelayed(matrix(&[&[0.0]]))],
            d_yu: vec![DelayedTerm::undelayed(matrix(&[&[1.0]]))],
            ..Default::default()
        };
        let ctrl = ControllerStructure::static_gain(1, 1);
        assert!(matches!(interconnect(&plant, &ctrl, &[1.0]), Err(Error::NonCausal { .. })));
        assert!(interconnect(&plant, &ctrl, &[0.5]).is_ok());
    }

    #[test]
    fn mismatched_controller_is_rejected() {
        let plant = fixtures::table1_plant(0.5);
        let ctrl = ControllerStructure::static_gain(2, 2);
        assert!(matches!(closed_loop_template(&plant, &ctrl), Err(Error::Dimension(_))));
    }
}
