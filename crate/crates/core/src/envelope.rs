//! Envelope system of a switched system: one LTI system with extra inputs and
//! outputs that reproduces every mode under a mode-dependent static output feedback.

use crate::error::{Error, Result};
use crate::model::{ProjectionPair, StateSpaceModel, SwitchedModel};
use crate::numerics::{
    blkdiag, hcat, norm2, skinny_svd, vcat, Matrix, RankFactorization, DEFAULT_RANK_TOL,
};

/// Difference of one mode to the base system, `X_base - X_mode`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDelta {
    /// Index of the mode in the switched model.
    pub mode: usize,
    pub da: Matrix,
    pub db: Matrix,
    pub dc: Matrix,
    pub dd: Matrix,
    /// `da ~= left * core * right^T`
    pub factor: RankFactorization,
}

impl ModeDelta {
    pub fn rank(&self) -> usize {
        self.factor.rank()
    }
}

/// Base system of an envelope.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// One of the modes (the first mode by default).
    Mode(usize),
    /// A user-supplied system all modes are low-rank perturbations of.
    Hypothesized(StateSpaceModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaOptions {
    pub rank_tol: f64,
    pub reference: Reference,
    /// Per-mode scaling `w`: `S = w U`, `M = I / w`, `T = V Sigma`. Defaults to 1.
    pub weights: Option<Vec<f64>>,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        DeltaOptions {
            rank_tol: DEFAULT_RANK_TOL,
            reference: Reference::Mode(0),
            weights: None,
        }
    }
}

/// All mode differences against the base system.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSet {
    pub base: StateSpaceModel,
    /// Mode used as base, `None` for a hypothesized system.
    pub base_mode: Option<usize>,
    pub num_modes: usize,
    pub deltas: Vec<ModeDelta>,
}

impl DeltaSet {
    pub fn ranks(&self) -> Vec<usize> {
        self.deltas.iter().map(|d| d.rank()).collect()
    }

    /// Sum of the delta ranks.
    pub fn total_rank(&self) -> usize {
        self.ranks().iter().sum()
    }

    pub fn delta_for(&self, mode: usize) -> Option<&ModeDelta> {
        self.deltas.iter().find(|d| d.mode == mode)
    }
}

/// Deltas against mode `reference` (default 0) with rank tolerance `tol`.
pub fn compute_deltas(sys: &SwitchedModel, tol: f64, reference: Option<usize>) -> Result<DeltaSet> {
    compute_deltas_with(
        sys,
        &DeltaOptions {
            rank_tol: tol,
            reference: Reference::Mode(reference.unwrap_or(0)),
            weights: None,
        },
    )
}

pub fn compute_deltas_with(sys: &SwitchedModel, opts: &DeltaOptions) -> Result<DeltaSet> {
    if !sys.is_standard() {
        return Err(Error::Unsupported(
            "envelope construction needs standard-form modes; apply transform_generalized first"
                .into(),
        ));
    }
    let l = sys.num_modes();
    if let Some(w) = &opts.weights {
        if w.len() != l || w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::invalid(format!(
                "weights must be {l} positive finite numbers"
            )));
        }
    }
    let (base, base_mode) = match &opts.reference {
        Reference::Mode(i) => {
            if *i >= l {
                return Err(Error::invalid(format!(
                    "reference mode {i} out of range for {l} modes"
                )));
            }
            (sys.mode(*i).clone(), Some(*i))
        }
        Reference::Hypothesized(h) => {
            if (h.states(), h.inputs(), h.outputs()) != (sys.states(), sys.inputs(), sys.outputs())
                || !h.is_standard()
            {
                return Err(Error::dims(
                    "hypothesized base system must share (n, m, p) and be in standard form",
                ));
            }
            (h.clone(), None)
        }
    };
    let mut deltas = Vec::new();
    for (i, mode) in sys.modes().iter().enumerate() {
        if Some(i) == base_mode {
            continue;
        }
        let da = base.a() - mode.a();
        let mut factor = skinny_svd(&da, opts.rank_tol)?;
        if let Some(w) = &opts.weights {
            factor.left *= w[i];
            factor.core /= w[i];
        }
        deltas.push(ModeDelta {
            mode: i,
            da,
            db: base.b() - mode.b(),
            dc: base.c() - mode.c(),
            dd: base.d() - mode.d(),
            factor,
        });
    }
    Ok(DeltaSet {
        base,
        base_mode,
        num_modes: l,
        deltas,
    })
}

/// Column and row bookkeeping of `B_E = [B | dB_1 .. dB_q | S_1 .. S_q]` and
/// `C_E = [C; dC_1 .. dC_q; T_1^T .. T_q^T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub inputs: usize,
    pub outputs: usize,
    pub num_modes: usize,
    pub base_mode: Option<usize>,
    /// Mode index owning each delta slot.
    pub delta_modes: Vec<usize>,
    pub ranks: Vec<usize>,
}

impl BlockLayout {
    pub fn num_deltas(&self) -> usize {
        self.delta_modes.len()
    }

    pub fn total_rank(&self) -> usize {
        self.ranks.iter().sum()
    }

    pub fn envelope_inputs(&self) -> usize {
        (self.num_deltas() + 1) * self.inputs + self.total_rank()
    }

    pub fn envelope_outputs(&self) -> usize {
        (self.num_deltas() + 1) * self.outputs + self.total_rank()
    }

    fn offsets(&self, width: usize) -> Vec<usize> {
        let mut out = vec![0];
        let mut at = 0;
        for _ in 0..self.num_deltas() {
            at += width;
            out.push(at);
        }
        at += width;
        for &b in &self.ranks {
            out.push(at);
            at += b;
        }
        out
    }

    /// Column offsets of `[B, dB_1, .., dB_q, S_1, .., S_q]` in `B_E`.
    pub fn input_offsets(&self) -> Vec<usize> {
        self.offsets(self.inputs)
    }

    /// Row offsets of `[C; dC_1; ..; dC_q; T_1^T; ..; T_q^T]` in `C_E`.
    pub fn output_offsets(&self) -> Vec<usize> {
        self.offsets(self.outputs)
    }

    fn slot(&self, mode: usize) -> Option<usize> {
        self.delta_modes.iter().position(|&m| m == mode)
    }
}

/// Input/output compression `B_E = B_hat R_B`, `C_E = R_C C_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct Compression {
    pub r_b: Matrix,
    pub r_c: Matrix,
    /// Feedthrough of the uncompressed envelope.
    pub d_full: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeModel {
    pub sys: StateSpaceModel,
    /// `M_j` per delta slot.
    pub core_matrices: Vec<Matrix>,
    pub layout: BlockLayout,
    pub compression: Option<Compression>,
}

impl EnvelopeModel {
    pub fn states(&self) -> usize {
        self.sys.states()
    }

    /// Inputs of the stored realization (compressed if compression is active).
    pub fn inputs(&self) -> usize {
        self.sys.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.sys.outputs()
    }

    /// Realization in the uncompressed envelope coordinates `(A_E, B_E, C_E, D_E)`.
    pub fn full_io_model(&self) -> Result<StateSpaceModel> {
        match &self.compression {
            None => Ok(self.sys.clone()),
            Some(c) => StateSpaceModel::new(
                self.sys.a().clone(),
                self.sys.b() * &c.r_b,
                &c.r_c * self.sys.c(),
                c.d_full.clone(),
            ),
        }
    }

    /// `max_j ||M_j||_2`, zero without core matrices.
    pub fn max_core_norm(&self) -> f64 {
        self.core_matrices
            .iter()
            .map(norm2)
            .fold(0.0, f64::max)
    }

    /// Reduced envelope under a shared projection pair.
    pub fn project(&self, pair: &ProjectionPair) -> Result<EnvelopeModel> {
        Ok(EnvelopeModel {
            sys: self.sys.project(pair)?,
            core_matrices: self.core_matrices.clone(),
            layout: self.layout.clone(),
            compression: self.compression.clone(),
        })
    }

    /// `S_j` block of `B_E` in uncompressed coordinates.
    pub fn s_block(&self, slot: usize) -> Result<Matrix> {
        let full = self.full_io_model()?;
        let off = self.layout.input_offsets()[1 + self.layout.num_deltas() + slot];
        Ok(full
            .b()
            .columns(off, self.layout.ranks[slot])
            .into_owned())
    }

    /// `T_j^T` block of `C_E` in uncompressed coordinates.
    pub fn t_block(&self, slot: usize) -> Result<Matrix> {
        let full = self.full_io_model()?;
        let off = self.layout.output_offsets()[1 + self.layout.num_deltas() + slot];
        Ok(full.c().rows(off, self.layout.ranks[slot]).into_owned())
    }

    /// Closed-loop feedback maps for every mode, in the stored (possibly compressed) coordinates.
    pub fn feedback_maps(&self) -> FeedbackMaps {
        let full = self.uncompressed_feedback_maps();
        match &self.compression {
            None => full,
            Some(c) => FeedbackMaps {
                maps: full
                    .maps
                    .into_iter()
                    .map(|mm| ModeMaps {
                        d0: &mm.c0 * &c.d_full * &mm.k0,
                        k: &c.r_b * &mm.k * &c.r_c,
                        k0: &c.r_b * &mm.k0,
                        c0: &mm.c0 * &c.r_c,
                    })
                    .collect(),
            },
        }
    }

    /// Switched system obtained by closing the loop with `maps`, one mode per map.
    pub fn closed_loop(&self, maps: &FeedbackMaps) -> Result<SwitchedModel> {
        let sys = self.sys.standard_form()?;
        let mut modes = Vec::with_capacity(maps.num_modes());
        for (sigma, mm) in maps.maps.iter().enumerate() {
            if mm.k.nrows() != sys.inputs() || mm.k.ncols() != sys.outputs() {
                return Err(Error::dims(format!(
                    "feedback map of mode {sigma} does not match the envelope system"
                )));
            }
            let loop_gain = &mm.k * sys.d();
            if norm2(&loop_gain) > 1e-12 * (1.0 + norm2(&mm.k) * norm2(sys.d())) {
                return Err(Error::Unsupported(
                    "envelope feedback forms an algebraic loop through D_E".into(),
                ));
            }
            let kc = &mm.k * sys.c();
            modes.push(StateSpaceModel::new(
                sys.a() + sys.b() * &kc,
                sys.b() * &mm.k0,
                &mm.c0 * (sys.c() + sys.d() * &kc),
                &mm.c0 * sys.d() * &mm.k0 + &mm.d0,
            )?);
        }
        SwitchedModel::new(modes)
    }

    /// Feedback maps acting on the uncompressed envelope inputs and outputs.
    pub fn uncompressed_feedback_maps(&self) -> FeedbackMaps {
        let lay = &self.layout;
        let (m, p) = (lay.inputs, lay.outputs);
        let (me, pe) = (lay.envelope_inputs(), lay.envelope_outputs());
        let q = lay.num_deltas();
        let in_off = lay.input_offsets();
        let out_off = lay.output_offsets();
        let maps = (0..lay.num_modes)
            .map(|mode| {
                let mut k = Matrix::zeros(me, pe);
                let mut k0 = Matrix::zeros(me, m);
                let mut c0 = Matrix::zeros(p, pe);
                k0.view_mut((0, 0), (m, m)).fill_with_identity();
                c0.view_mut((0, 0), (p, p)).fill_with_identity();
                if let Some(j) = lay.slot(mode) {
                    let b = lay.ranks[j];
                    k.view_mut((in_off[1 + q + j], out_off[1 + q + j]), (b, b))
                        .copy_from(&(-&self.core_matrices[j]));
                    k0.view_mut((in_off[1 + j], 0), (m, m))
                        .copy_from(&(-Matrix::identity(m, m)));
                    c0.view_mut((0, out_off[1 + j]), (p, p))
                        .copy_from(&(-Matrix::identity(p, p)));
                }
                ModeMaps {
                    k,
                    k0,
                    c0,
                    d0: Matrix::zeros(p, m),
                }
            })
            .collect();
        FeedbackMaps { maps }
    }
}

/// Feedback `u_E = K y_E + K0 u` and output map `y = C0 y_E + D0 u` for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMaps {
    pub k: Matrix,
    pub k0: Matrix,
    pub c0: Matrix,
    /// Direct term, nonzero only for compressed envelopes with feedthrough.
    pub d0: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackMaps {
    pub maps: Vec<ModeMaps>,
}

impl FeedbackMaps {
    pub fn mode(&self, sigma: usize) -> &ModeMaps {
        &self.maps[sigma]
    }

    pub fn num_modes(&self) -> usize {
        self.maps.len()
    }
}

/// Assembles the envelope system and its feedback maps.
pub fn build_envelope(
    sys: &SwitchedModel,
    deltas: &DeltaSet,
) -> Result<(EnvelopeModel, FeedbackMaps)> {
    let (n, m, p) = (sys.states(), sys.inputs(), sys.outputs());
    let base = &deltas.base;
    if (base.states(), base.inputs(), base.outputs()) != (n, m, p)
        || deltas.num_modes != sys.num_modes()
    {
        return Err(Error::invalid("delta set does not match the switched model"));
    }
    for d in &deltas.deltas {
        if d.da.shape() != (n, n) || d.db.shape() != (n, m) || d.dc.shape() != (p, n) {
            return Err(Error::invalid(format!(
                "delta for mode {} has inconsistent dimensions",
                d.mode
            )));
        }
    }

    let mut b_blocks: Vec<&Matrix> = vec![base.b()];
    let mut c_blocks: Vec<&Matrix> = vec![base.c()];
    let neg_dd: Vec<Matrix> = deltas.deltas.iter().map(|d| -&d.dd).collect();
    let mut d_blocks: Vec<&Matrix> = vec![base.d()];
    let t_rows: Vec<Matrix> = deltas
        .deltas
        .iter()
        .map(|d| d.factor.right.transpose())
        .collect();
    for (d, ndd) in deltas.deltas.iter().zip(&neg_dd) {
        b_blocks.push(&d.db);
        c_blocks.push(&d.dc);
        d_blocks.push(ndd);
    }
    for (d, t) in deltas.deltas.iter().zip(&t_rows) {
        b_blocks.push(&d.factor.left);
        c_blocks.push(t);
    }
    let total_rank = deltas.total_rank();
    let zero = Matrix::zeros(total_rank, total_rank);
    d_blocks.push(&zero);

    let b_e = hcat(n, &b_blocks);
    let c_e = vcat(n, &c_blocks);
    let d_e = blkdiag(&d_blocks);
    let env_sys = StateSpaceModel::new(base.a().clone(), b_e, c_e, d_e)?;
    let layout = BlockLayout {
        inputs: m,
        outputs: p,
        num_modes: sys.num_modes(),
        base_mode: deltas.base_mode,
        delta_modes: deltas.deltas.iter().map(|d| d.mode).collect(),
        ranks: deltas.ranks(),
    };
    let env = EnvelopeModel {
        sys: env_sys,
        core_matrices: deltas.deltas.iter().map(|d| d.factor.core.clone()).collect(),
        layout,
        compression: None,
    };
    let maps = env.feedback_maps();
    Ok((env, maps))
}

/// Envelope of `sys` against mode 0 with the default rank tolerance.
pub fn envelope_of(sys: &SwitchedModel) -> Result<(EnvelopeModel, FeedbackMaps)> {
    let deltas = compute_deltas_with(sys, &DeltaOptions::default())?;
    build_envelope(sys, &deltas)
}

fn rank_split(m: &Matrix, tol: f64) -> (Matrix, Matrix, Matrix) {
    // m = U_r * (Sigma_r V_r^T)
    let svd = m.clone().svd(true, true);
    let s1 = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let r = svd
        .singular_values
        .iter()
        .filter(|&&s| s > tol * s1)
        .count();
    let u = svd.u.unwrap().columns(0, r).into_owned();
    let mut svt = svd.v_t.unwrap().rows(0, r).into_owned();
    for i in 0..r {
        svt.row_mut(i).scale_mut(svd.singular_values[i]);
    }
    let v = svt.transpose();
    (u, svt, v)
}

/// Replaces `B_E`, `C_E` by full-rank factors; the feedback maps absorb the remaining factors.
pub fn compress_io(env: &EnvelopeModel, tol: f64) -> Result<EnvelopeModel> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!("rank tolerance {tol} not in (0, 1)")));
    }
    let full = env.full_io_model()?;
    let (b_hat, r_b, _) = rank_split(full.b(), tol);
    let (u_c, sv_c, _) = rank_split(&full.c().transpose(), tol);
    // C_E = (C_E^T)^T = (U Sigma V^T)^T = (V Sigma) U^T
    let c_hat = u_c.transpose();
    let r_c = sv_c.transpose();
    let sys = StateSpaceModel::new(
        full.a().clone(),
        b_hat,
        c_hat.clone(),
        Matrix::zeros(c_hat.nrows(), r_b.nrows()),
    )?;
    Ok(EnvelopeModel {
        sys,
        core_matrices: env.core_matrices.clone(),
        layout: env.layout.clone(),
        compression: Some(Compression {
            r_b,
            r_c,
            d_full: full.d().clone(),
        }),
    })
}

/// Converts every mode `E_i x' = A_i x + B_i u` to `x' = E_i^{-1} A_i x + E_i^{-1} B_i u`.
pub fn transform_generalized(sys: &SwitchedModel) -> Result<SwitchedModel> {
    sys.standard_form()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{lambda_min_sym, numerical_rank};
    use nalgebra::DVector;

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    fn rlc() -> SwitchedModel {
        let c = m(1, 2, &[0.0, 1.0]);
        SwitchedModel::new(vec![
            StateSpaceModel::strictly_proper(
                m(2, 2, &[0.0, -1.0, 2.0, -4.0]),
                m(2, 1, &[1.0, 2.0]),
                c.clone(),
            )
            .unwrap(),
            StateSpaceModel::strictly_proper(
                m(2, 2, &[0.0, -1.0, 1.0, -2.0]),
                m(2, 1, &[1.0, 1.0]),
                c,
            )
            .unwrap(),
        ])
        .unwrap()
    }

    fn three_mode_with_feedthrough() -> SwitchedModel {
        let mk = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| {
            StateSpaceModel::new(m(3, 3, a), m(3, 2, b), m(2, 3, c), m(2, 2, d)).unwrap()
        };
        let a1 = [-1.0, 0.2, 0.0, 0.1, -2.0, 0.3, 0.0, 0.4, -3.0];
        let b1 = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let c1 = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let d1 = [0.1, 0.0, 0.0, 0.2];
        let mut a2 = a1;
        a2[0] -= 0.5;
        a2[1] += 0.3;
        let mut a3 = a1;
        a3[8] += 1.0;
        a3[4] -= 0.7;
        let mut b3 = b1;
        b3[0] = 2.0;
        let mut d2 = d1;
        d2[1] = 0.5;
        SwitchedModel::new(vec![
            mk(&a1, &b1, &c1, &d1),
            mk(&a2, &b1, &[1.0, 1.0, 1.0, 0.0, 1.0, 0.0], &d2),
            mk(&a3, &b3, &c1, &d1),
        ])
        .unwrap()
    }

    /// Closed-loop (A, B, C, D) for mode `sigma` built from the maps.
    fn closed_loop(env: &EnvelopeModel, maps: &FeedbackMaps, sigma: usize) -> [Matrix; 4] {
        let s = &env.sys;
        let mm = maps.mode(sigma);
        let kc = &mm.k * s.c();
        let a = s.a() + s.b() * &kc;
        let b = s.b() * &mm.k0;
        let c = &mm.c0 * (s.c() + s.d() * &kc);
        let d = &mm.c0 * s.d() * &mm.k0 + &mm.d0;
        [a, b, c, d]
    }

    #[test]
    fn single_mode_envelope_is_the_mode() {
        let sys = SwitchedModel::new(vec![rlc().mode(0).clone()]).unwrap();
        let (env, maps) = envelope_of(&sys).unwrap();
        assert_eq!(&env.sys, sys.mode(0));
        assert_eq!(maps.num_modes(), 1);
        assert!(maps.mode(0).k.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rlc_deltas_and_dimensions() {
        let d = compute_deltas(&rlc(), 1e-10, None).unwrap();
        assert_eq!(d.ranks(), vec![1]);
        assert_eq!(d.deltas[0].db, m(2, 1, &[0.0, 1.0]));
        assert!(d.deltas[0].dc.iter().all(|&v| v == 0.0));
        assert!(d.deltas[0].dd.iter().all(|&v| v == 0.0));
        let (env, _) = build_envelope(&rlc(), &d).unwrap();
        assert_eq!((env.states(), env.inputs(), env.outputs()), (2, 3, 3));
        assert_eq!(env.layout.input_offsets(), vec![0, 1, 2]);
    }

    #[test]
    fn exact_reconstruction_of_every_mode() {
        for sys in [rlc(), three_mode_with_feedthrough()] {
            let (env, maps) = envelope_of(&sys).unwrap();
            for (i, mode) in sys.modes().iter().enumerate() {
                let [a, b, c, d] = closed_loop(&env, &maps, i);
                assert!((a - mode.a()).norm() < 1e-12);
                assert!((b - mode.b()).norm() < 1e-12);
                assert!((c - mode.c()).norm() < 1e-12);
                assert!((d - mode.d()).norm() < 1e-12, "feedthrough of mode {i}");
            }
        }
    }

    #[test]
    fn feedback_never_sees_feedthrough() {
        let sys = three_mode_with_feedthrough();
        let (env, maps) = envelope_of(&sys).unwrap();
        for mm in &maps.maps {
            assert!((&mm.k * env.sys.d()).norm() == 0.0);
        }
    }

    #[test]
    fn output_map_norms() {
        let (_, maps) = envelope_of(&three_mode_with_feedthrough()).unwrap();
        assert!((norm2(&maps.mode(0).c0) - 1.0).abs() < 1e-14);
        for s in 1..3 {
            assert!((norm2(&maps.mode(s).c0) - 2f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn reference_and_hypothesized_bases_reconstruct() {
        let sys = three_mode_with_feedthrough();
        let hyp = StateSpaceModel::new(
            -Matrix::identity(3, 3) * 2.0,
            sys.mode(0).b().clone(),
            sys.mode(0).c().clone(),
            sys.mode(0).d().clone(),
        )
        .unwrap();
        for reference in [Reference::Mode(2), Reference::Hypothesized(hyp)] {
            let opts = DeltaOptions {
                reference,
                weights: Some(vec![1.0, 10.0, 0.1]),
                ..Default::default()
            };
            let deltas = compute_deltas_with(&sys, &opts).unwrap();
            let (env, maps) = build_envelope(&sys, &deltas).unwrap();
            for (i, mode) in sys.modes().iter().enumerate() {
                let [a, b, c, d] = closed_loop(&env, &maps, i);
                assert!((a - mode.a()).norm() < 1e-12);
                assert!((b - mode.b()).norm() < 1e-12);
                assert!((c - mode.c()).norm() < 1e-12);
                assert!((d - mode.d()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn remark_system_becomes_controllable() {
        let a1 = m(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let a2 = &a1 - m(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let z = Matrix::zeros(2, 1);
        let c = m(1, 2, &[1.0, 1.0]);
        let sys = SwitchedModel::new(vec![
            StateSpaceModel::strictly_proper(a1.clone(), z.clone(), c.clone()).unwrap(),
            StateSpaceModel::strictly_proper(a2, z, c).unwrap(),
        ])
        .unwrap();
        let (env, _) = envelope_of(&sys).unwrap();
        let s = env.sys.b().column(2).into_owned();
        assert!((s[0].abs() - s[1].abs()).abs() < 1e-14 && s[0].abs() > 0.5);
        let ctrb = Matrix::from_columns(&[s.clone(), &a1 * &s]);
        assert_eq!(numerical_rank(&ctrb, 1e-12), 2);
    }

    #[test]
    fn envelope_gramian_dominates_reference_mode() {
        let sys = three_mode_with_feedthrough();
        let (env, _) = envelope_of(&sys).unwrap();
        let (pe, _) = env.sys.gramians().unwrap();
        let (p1, _) = sys.mode(0).gramians().unwrap();
        assert!(lambda_min_sym(&(&pe - &p1)) >= -1e-10);
        let h_e = env.sys.hankel_singular_values().unwrap();
        let h_1 = sys.mode(0).hankel_singular_values().unwrap();
        // with C_E containing C_1 the observability Gramian dominates too
        for (e, o) in h_e.iter().zip(&h_1) {
            assert!(*e >= o - 1e-12);
        }
    }

    #[test]
    fn compression_removes_duplicates_and_keeps_the_loop() {
        let sys = three_mode_with_feedthrough();
        let (env, maps) = envelope_of(&sys).unwrap();
        let comp = compress_io(&env, 1e-12).unwrap();
        // mode 2 shares B with mode 1, so dB for it is zero
        assert!(comp.inputs() < env.inputs());
        assert_eq!(comp.inputs(), numerical_rank(env.sys.b(), 1e-12));
        let cmaps = comp.feedback_maps();
        for i in 0..3 {
            let [a, b, c, d] = closed_loop(&comp, &cmaps, i);
            let [a0, b0, c0, d0] = closed_loop(&env, &maps, i);
            assert!((a - a0).norm() < 1e-12);
            assert!((b - b0).norm() < 1e-12);
            assert!((c - c0).norm() < 1e-12);
            assert!((d - d0).norm() < 1e-12);
        }
        let back = comp.full_io_model().unwrap();
        assert!((back.b() - env.sys.b()).norm() < 1e-12);
        assert!((back.c() - env.sys.c()).norm() < 1e-12);
    }

    #[test]
    fn full_rank_io_is_not_compressed() {
        let b = Matrix::identity(3, 3);
        let sys = SwitchedModel::new(vec![StateSpaceModel::strictly_proper(
            -Matrix::identity(3, 3),
            b.clone(),
            b,
        )
        .unwrap()])
        .unwrap();
        let (env, _) = envelope_of(&sys).unwrap();
        let comp = compress_io(&env, 1e-12).unwrap();
        assert_eq!((comp.inputs(), comp.outputs()), (3, 3));
    }

    #[test]
    fn generalized_delta_update_rule() {
        let e1 = Matrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let e2 = Matrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 3.0]));
        let a1 = m(3, 3, &[-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -2.0]);
        let a2 = m(3, 3, &[-2.0, 1.0, 0.0, 1.0, -3.0, 1.0, 0.0, 1.0, -2.0]);
        let b = m(3, 1, &[1.0, 0.0, 0.0]);
        let c = m(1, 3, &[0.0, 0.0, 1.0]);
        let d = Matrix::zeros(1, 1);
        let sys = SwitchedModel::new(vec![
            StateSpaceModel::descriptor(a1.clone(), b.clone(), c.clone(), d.clone(), e1.clone())
                .unwrap(),
            StateSpaceModel::descriptor(a2.clone(), b.clone(), c, d, e2.clone()).unwrap(),
        ])
        .unwrap();
        assert!(compute_deltas(&sys, 1e-10, None).is_err());
        let std = transform_generalized(&sys).unwrap();
        let e1i = e1.clone().try_inverse().unwrap();
        let e2i = e2.clone().try_inverse().unwrap();
        let want = &e1i * (&a1 - &a2) - &e1i * (&e1 - &e2) * &e2i * &a2;
        let got = std.mode(0).a() - std.mode(1).a();
        assert!((got - &want).norm() < 1e-14);
        let want_b = &e1i * (&b - &b) - &e1i * (&e1 - &e2) * &e2i * &b;
        assert!(((std.mode(0).b() - std.mode(1).b()) - want_b).norm() < 1e-14);
        let beta_a = numerical_rank(&(&a1 - &a2), 1e-10);
        let beta_e = numerical_rank(&(&e1 - &e2), 1e-10);
        assert!(numerical_rank(&want, 1e-10) <= beta_a + beta_e);
        let id = SwitchedModel::new(vec![std.mode(0).clone()]).unwrap();
        assert_eq!(transform_generalized(&id).unwrap(), id);
    }
}
