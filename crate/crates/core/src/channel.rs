//! Effective two-qubit channel of the full lab-frame evolution and its
//! iSWAP fidelity.
//!
//! The channel is carried as the 8×4 isometry
//! `A = (I_m ⊗ post) · U(t) · (|g_m⟩ ⊗ pre)`, which is the purified
//! reference ⊗ M ⊗ Q1Q2 state reshaped. Its two 4×4 modulator blocks are
//! Kraus operators; the Choi matrix follows from them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed::{dress_modulator, effective_model, off_ratio, resolve_omega_d_on};
use crate::error::{Error, Result};
use crate::linalg::{c, eigh, identity, kron, max_abs};
use crate::params::ProtocolParams;
use crate::pauli::{frame_map_on, OperatorMatrix};
use crate::propagator::{check_convergence, check_time, Propagator, PropagatorConfig};

pub const DIM: usize = 4;

/// `|00⟩ → |00⟩, |01⟩ → i|10⟩, |10⟩ → i|01⟩, |11⟩ → |11⟩`.
pub fn iswap() -> OperatorMatrix {
    let i = c(0.0, 1.0);
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = c(1.0, 0.0);
    m[(2, 1)] = i;
    m[(1, 2)] = i;
    m[(3, 3)] = c(1.0, 0.0);
    OperatorMatrix::from_matrix(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    On,
    Off,
}

/// Drive frequency of a regime: `ω_d^on` (stored or solved) or `ω_d^off`.
pub fn regime_drive(p: &ProtocolParams, regime: Regime) -> Result<f64> {
    match regime {
        Regime::On => resolve_omega_d_on(p),
        Regime::Off => Ok(p.omega_d_off),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationGates {
    pub pre: OperatorMatrix,
    pub post: OperatorMatrix,
    /// Q1 eigenbasis was a convention (`ω'_1 < 1e-12`).
    pub degenerate_eigenbasis: bool,
}

/// Local gates on Q1⊗Q2 sandwiching the lab-frame evolution.
///
/// `pre = B_1 ⊗ B_2` maps `|0⟩,|1⟩` onto the dressed `|g⟩,|e⟩`; `post` undoes
/// the rotating frame and the local dressed evolution and maps back:
/// `post = B† (e^{iH'_1 t} ⊗ e^{iH'_2 t}) W_12(t)`.
pub fn compensation_gates(p: &ProtocolParams, omega_d: f64, t: f64) -> Result<CompensationGates> {
    check_time(t)?;
    let m = effective_model(p, omega_d);
    let b = m.local_basis();
    let local = m.h1().exp_hermitian(-t).kron(&m.h2().exp_hermitian(-t));
    let post = &(&b.adjoint() * &local) * &frame_map_on(omega_d, t, 2);
    Ok(CompensationGates {
        pre: b,
        post,
        degenerate_eigenbasis: m.degenerate_eigenbasis,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitChannel {
    kraus: Vec<DMatrix<C64>>,
    choi: DMatrix<C64>,
    /// `‖Tr_out C − I‖_max`.
    pub trace_defect: f64,
    pub degenerate_eigenbasis: bool,
}

impl TwoQubitChannel {
    pub fn from_kraus(kraus: Vec<DMatrix<C64>>) -> Self {
        let mut choi = DMatrix::zeros(DIM * DIM, DIM * DIM);
        for k in &kraus {
            // vec index (i, a) = DIM·i + a holds K[a, i].
            let v = DVector::from_fn(DIM * DIM, |idx, _| k[(idx % DIM, idx / DIM)]);
            choi += &v * v.adjoint();
        }
        let mut partial = DMatrix::<C64>::zeros(DIM, DIM);
        for i in 0..DIM {
            for j in 0..DIM {
                partial[(i, j)] = (0..DIM).map(|a| choi[(DIM * i + a, DIM * j + a)]).sum();
            }
        }
        let trace_defect = max_abs(&(partial - identity(DIM)));
        Self {
            kraus,
            choi,
            trace_defect,
            degenerate_eigenbasis: false,
        }
    }

    pub fn from_unitary(u: &OperatorMatrix) -> Self {
        Self::from_kraus(vec![u.matrix().clone()])
    }

    pub fn identity() -> Self {
        Self::from_unitary(&OperatorMatrix::identity(DIM))
    }

    /// Splits an 8×4 system isometry into its modulator blocks.
    pub fn from_isometry(a: &DMatrix<C64>) -> Self {
        let kraus = (0..2).map(|m| a.rows(DIM * m, DIM).into_owned()).collect();
        Self::from_kraus(kraus)
    }

    pub fn kraus(&self) -> &[DMatrix<C64>] {
        &self.kraus
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|)`, reference first, trace 4.
    pub fn choi(&self) -> &DMatrix<C64> {
        &self.choi
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        self.kraus
            .iter()
            .fold(DMatrix::zeros(DIM, DIM), |acc, k| acc + k * rho * k.adjoint())
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        eigh(&self.hermitian_choi()).0[0]
    }

    fn hermitian_choi(&self) -> DMatrix<C64> {
        (&self.choi + self.choi.adjoint()) * c(0.5, 0.0)
    }

    /// Hermiticity, positivity and trace preservation of the Choi matrix.
    pub fn check(&self) -> Result<()> {
        let herm = max_abs(&(&self.choi - self.choi.adjoint()));
        if herm > 1e-10 {
            return Err(Error::ChoiDefect(format!("hermiticity defect {herm:e}")));
        }
        let min = self.min_choi_eigenvalue();
        if min < -1e-10 {
            return Err(Error::ChoiDefect(format!("smallest eigenvalue {min:e}")));
        }
        if self.trace_defect > 1e-8 {
            return Err(Error::ChoiDefect(format!(
                "partial-trace defect {:e}",
                self.trace_defect
            )));
        }
        Ok(())
    }

    /// `‖C − C'‖_1`: an upper bound on the diamond distance between the
    /// two channels.
    pub fn choi_distance_bound(&self, other: &TwoQubitChannel) -> f64 {
        let d = self.hermitian_choi() - other.hermitian_choi();
        eigh(&d).0.iter().map(|x| x.abs()).sum()
    }
}

/// Entanglement fidelity `Σ_m |Tr(U† K_m)|² / d²` against a unitary target.
pub fn entanglement_fidelity(ch: &TwoQubitChannel, target: &OperatorMatrix) -> f64 {
    let ud = target.matrix().adjoint();
    ch.kraus
        .iter()
        .map(|k| (&ud * k).trace().norm_sqr())
        .sum::<f64>()
        / (DIM * DIM) as f64
}

/// Entanglement fidelity read off the Choi matrix: `⟨Φ_U|C|Φ_U⟩ / d²` with
/// `|Φ_U⟩ = Σ_i |i⟩ ⊗ U|i⟩`.
pub fn entanglement_fidelity_choi(ch: &TwoQubitChannel, target: &OperatorMatrix) -> f64 {
    let u = target.matrix();
    let phi = DVector::from_fn(DIM * DIM, |idx, _| u[(idx % DIM, idx / DIM)]);
    (phi.adjoint() * ch.choi() * &phi)[(0, 0)].re / (DIM * DIM) as f64
}

/// `F̄ = (d F_e + 1)/(d + 1)`.
pub fn avg_fidelity_choi(ch: &TwoQubitChannel, target: &OperatorMatrix) -> f64 {
    let fe = entanglement_fidelity_choi(ch, target);
    (DIM as f64 * fe + 1.0) / (DIM as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HaarEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Haar-random pure state: normalized complex Gaussian vector.
pub fn haar_state(rng: &mut ChaCha8Rng, dim: usize) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| {
        c(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let n = v.norm();
    v / c(n, 0.0)
}

/// Monte-Carlo average of `⟨ψ|U† E(|ψ⟩⟨ψ|) U|ψ⟩` over Haar inputs. Sample
/// `k` draws from stream `k` of a ChaCha8 generator seeded with `seed`.
pub fn haar_average<F>(samples: usize, seed: u64, fidelity: F) -> Result<HaarEstimate>
where
    F: Fn(&DVector<C64>) -> f64 + Sync,
{
    if samples == 0 {
        return Err(Error::Precondition("at least one Haar sample required".into()));
    }
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            fidelity(&haar_state(&mut rng, DIM))
        })
        .collect();
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if samples > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(HaarEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

/// Haar estimate of the average fidelity of a given channel.
pub fn avg_fidelity_haar_channel(
    ch: &TwoQubitChannel,
    target: &OperatorMatrix,
    samples: usize,
    seed: u64,
) -> Result<HaarEstimate> {
    let u = target.matrix();
    haar_average(samples, seed, |psi| {
        let ideal = u * psi;
        ch.kraus()
            .iter()
            .map(|k| ideal.dotc(&(k * psi)).norm_sqr())
            .sum()
    })
}

/// Isometry `A = (I_m ⊗ post) U(t) (|g_m⟩ ⊗ pre)` at drive frequency `ω_d`.
fn system_isometry(
    p: &ProtocolParams,
    omega_d: f64,
    duration: f64,
    cfg: PropagatorConfig,
) -> Result<(DMatrix<C64>, bool)> {
    let gates = compensation_gates(p, omega_d, duration)?;
    let g = dress_modulator(p.drive_amp, p.omega_m - omega_d).ground_state;
    let g = DMatrix::from_column_slice(2, 1, g.amplitudes().as_slice());
    let input = kron(&g, gates.pre.matrix());
    let u = Propagator::new(p, omega_d, cfg)?.evolution(duration);
    let post = kron(&identity(2), gates.post.matrix());
    Ok((post * u.matrix() * input, gates.degenerate_eigenbasis))
}

/// Compensated two-qubit channel of the lab-frame evolution in one regime.
pub fn extract_channel(
    p: &ProtocolParams,
    regime: Regime,
    duration: f64,
    cfg: PropagatorConfig,
) -> Result<TwoQubitChannel> {
    let omega_d = regime_drive(p, regime)?;
    extract_channel_at(p, omega_d, duration, cfg)
}

/// [`extract_channel`] with an explicit drive frequency.
pub fn extract_channel_at(
    p: &ProtocolParams,
    omega_d: f64,
    duration: f64,
    cfg: PropagatorConfig,
) -> Result<TwoQubitChannel> {
    let (a, degenerate) = system_isometry(p, omega_d, duration, cfg)?;
    // The purified state is A/2; its change under step halving is the
    // convergence measure.
    check_convergence(
        &cfg,
        &a,
        || system_isometry(p, omega_d, duration, cfg.refined()).map(|r| r.0),
        |x, y| (x - y).norm() / 2.0,
    )?;
    let mut ch = TwoQubitChannel::from_isometry(&a);
    ch.degenerate_eigenbasis = degenerate;
    ch.check()?;
    Ok(ch)
}

/// Largest population transferred between `|01⟩` and `|10⟩` by the
/// compensated off-regime channel.
pub fn off_leakage_of(ch: &TwoQubitChannel) -> f64 {
    let t = |to: usize, from: usize| -> f64 {
        ch.kraus().iter().map(|k| k[(to, from)].norm_sqr()).sum()
    };
    t(2, 1).max(t(1, 2))
}

/// Off-regime exchange leakage over `duration` (on-regime `T_gate` if `None`).
pub fn off_leakage(p: &ProtocolParams, duration: Option<f64>, cfg: PropagatorConfig) -> Result<f64> {
    let duration = match duration {
        Some(t) => t,
        None => effective_model(p, resolve_omega_d_on(p)?).t_gate,
    };
    Ok(off_leakage_of(&extract_channel(p, Regime::Off, duration, cfg)?))
}

/// Population of the modulator dressed ground state at the end of the
/// evolution, averaged over a maximally mixed Q1Q2 input.
fn modulator_return(p: &ProtocolParams, omega_d: f64, duration: f64, ch: &TwoQubitChannel) -> f64 {
    let g = dress_modulator(p.drive_amp, p.omega_m - omega_d).ground_state;
    // Rotating-frame phases of M at the final time.
    let w = frame_map_on(omega_d, duration, 1);
    let gl = [
        g.amplitudes()[0] * w.get(0, 0).conj(),
        g.amplitudes()[1] * w.get(1, 1).conj(),
    ];
    let k = ch.kraus();
    let proj = &k[0] * gl[0].conj() + &k[1] * gl[1].conj();
    proj.iter().map(|z| z.norm_sqr()).sum::<f64>() / DIM as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FidelityMethod {
    #[serde(rename = "choi-formula")]
    ChoiFormula,
    #[serde(rename = "haar-monte-carlo")]
    HaarMonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub avg_fidelity: f64,
    pub infidelity: f64,
    pub off_ratio: f64,
    pub t_gate: f64,
    pub omega_d_on: f64,
    pub j12_eff_on: f64,
    pub modulator_return: f64,
    pub off_leakage: f64,
    pub method: FidelityMethod,
    /// Present for the Monte-Carlo method.
    pub std_error: Option<f64>,
    pub steps_per_period: usize,
    pub degenerate_eigenbasis: bool,
    pub warnings: Vec<String>,
}

/// Full pipeline at one parameter point: solve `ω_d^on`, hold for `T_gate`,
/// extract the on-channel and score it against iSWAP.
pub fn evaluate_point(p: &ProtocolParams, cfg: PropagatorConfig) -> Result<FidelityReport> {
    p.validate()?;
    let omega_d_on = resolve_omega_d_on(p)?;
    let model = effective_model(p, omega_d_on);
    if !model.t_gate.is_finite() {
        return Err(Error::Precondition("effective on-coupling vanishes; T_gate is infinite".into()));
    }
    let ch = extract_channel_at(p, omega_d_on, model.t_gate, cfg)?;
    let fe = entanglement_fidelity_choi(&ch, &iswap());
    let infidelity = DIM as f64 * (1.0 - fe) / (DIM as f64 + 1.0);
    let off = extract_channel_at(p, p.omega_d_off, model.t_gate, cfg)?;
    Ok(FidelityReport {
        avg_fidelity: 1.0 - infidelity,
        infidelity,
        off_ratio: off_ratio(p),
        t_gate: model.t_gate,
        omega_d_on,
        j12_eff_on: model.j12_eff,
        modulator_return: modulator_return(p, omega_d_on, model.t_gate, &ch),
        off_leakage: off_leakage_of(&off),
        method: FidelityMethod::ChoiFormula,
        std_error: None,
        steps_per_period: cfg.steps_per_period,
        degenerate_eigenbasis: ch.degenerate_eigenbasis || off.degenerate_eigenbasis,
        warnings: p.hierarchy_warnings(),
    })
}

/// Cheap on-regime infidelity for searches: no off-regime channel and no
/// Choi checks beyond construction.
pub fn infidelity_on(p: &ProtocolParams, cfg: PropagatorConfig) -> Result<f64> {
    let omega_d_on = resolve_omega_d_on(p)?;
    let model = effective_model(p, omega_d_on);
    if !model.t_gate.is_finite() {
        return Err(Error::Precondition("effective on-coupling vanishes; T_gate is infinite".into()));
    }
    let ch = extract_channel_at(p, omega_d_on, model.t_gate, cfg)?;
    let fe = entanglement_fidelity_choi(&ch, &iswap());
    Ok(DIM as f64 * (1.0 - fe) / (DIM as f64 + 1.0))
}

/// Monte-Carlo average fidelity of the on-regime gate: each Haar input is
/// prepared with the modulator in `|g_m⟩`, evolved for `T_gate`, compensated
/// and compared with the iSWAP image after tracing out M.
pub fn avg_fidelity_haar(
    p: &ProtocolParams,
    samples: usize,
    seed: u64,
    cfg: PropagatorConfig,
) -> Result<HaarEstimate> {
    let omega_d_on = resolve_omega_d_on(p)?;
    let t = effective_model(p, omega_d_on).t_gate;
    let gates = compensation_gates(p, omega_d_on, t)?;
    let g = dress_modulator(p.drive_amp, p.omega_m - omega_d_on).ground_state;
    let u = Propagator::new(p, omega_d_on, cfg)?.evolution(t);
    let target = iswap();
    let pre = gates.pre.matrix();
    let post = kron(&identity(2), gates.post.matrix());
    let evolve = &post * u.matrix();
    haar_average(samples, seed, |psi| {
        let q = pre * psi;
        let initial = DVector::from_fn(8, |idx, _| g.amplitudes()[idx / DIM] * q[idx % DIM]);
        let out = &evolve * initial;
        let ideal = target.matrix() * psi;
        (0..2)
            .map(|m| ideal.dotc(&out.rows(DIM * m, DIM).into_owned()).norm_sqr())
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_unitary(seed: u64) -> OperatorMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(4, 4, |_, _| c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)));
        OperatorMatrix::from_matrix(m.qr().q())
    }

    #[test]
    fn identity_choi_is_scaled_bell_projector() {
        let ch = TwoQubitChannel::identity();
        let phi = DVector::from_fn(16, |idx, _| if idx / 4 == idx % 4 { c(0.5, 0.0) } else { c(0.0, 0.0) });
        let expect = (&phi * phi.adjoint()) * c(4.0, 0.0);
        assert!(max_abs(&(ch.choi() - expect)) < 1e-15);
        assert!(ch.trace_defect < 1e-15);
        ch.check().unwrap();
    }

    #[test]
    fn exact_iswap_has_unit_fidelity() {
        let ch = TwoQubitChannel::from_unitary(&iswap());
        assert!((avg_fidelity_choi(&ch, &iswap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_versus_iswap_is_two_fifths() {
        let f = avg_fidelity_choi(&TwoQubitChannel::identity(), &iswap());
        assert!((f - 0.4).abs() < 1e-12, "{f}");
        // Closed form (|Tr U†V|² + d)/(d² + d) with |Tr iSWAP| = 2.
        assert!((f - (4.0 + 4.0) / 20.0).abs() < 1e-15);
    }

    #[test]
    fn choi_and_kraus_fidelities_agree() {
        let a = random_unitary(1);
        let b = random_unitary(2);
        let ch = TwoQubitChannel::from_kraus(vec![
            a.matrix() * c(0.8f64.sqrt(), 0.0),
            b.matrix() * c(0.2f64.sqrt(), 0.0),
        ]);
        ch.check().unwrap();
        let t = random_unitary(3);
        assert!((entanglement_fidelity(&ch, &t) - entanglement_fidelity_choi(&ch, &t)).abs() < 1e-14);
    }

    #[test]
    fn haar_exact_iswap_has_no_spread() {
        let ch = TwoQubitChannel::from_unitary(&iswap());
        let est = avg_fidelity_haar_channel(&ch, &iswap(), 200, 9).unwrap();
        assert!((est.mean - 1.0).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn haar_identity_versus_iswap() {
        let est = avg_fidelity_haar_channel(&TwoQubitChannel::identity(), &iswap(), 4000, 1).unwrap();
        assert!((est.mean - 0.4).abs() < 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn haar_is_deterministic_under_seed() {
        let ch = TwoQubitChannel::from_unitary(&random_unitary(5));
        let a = avg_fidelity_haar_channel(&ch, &iswap(), 300, 42).unwrap();
        let b = avg_fidelity_haar_channel(&ch, &iswap(), 300, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trivial_compensation_gates() {
        let p = ProtocolParams {
            j_m1: 0.0,
            ..ProtocolParams::baseline()
        };
        // Δ_1, Δ_2 > 0 below both qubit frequencies.
        let g = compensation_gates(&p, 0.99, 0.0).unwrap();
        assert!(max_abs(&(g.pre.matrix() - identity(4))) < 1e-15);
        assert!(max_abs(&(g.post.matrix() - identity(4))) < 1e-15);
    }

    #[test]
    fn pre_gate_is_unitary() {
        for wd in [0.99, 0.9972, 1.004] {
            let g = compensation_gates(&ProtocolParams::baseline(), wd, 123.0).unwrap();
            assert!(g.pre.unitarity_defect() < 1e-14);
            assert!(g.post.unitarity_defect() < 1e-13);
        }
    }

    #[test]
    fn zero_duration_gives_identity_channel() {
        let ch = extract_channel(&ProtocolParams::baseline(), Regime::Off, 0.0, PropagatorConfig::default())
            .unwrap();
        assert!(max_abs(&(ch.choi() - TwoQubitChannel::identity().choi())) < 1e-14);
    }

    #[test]
    fn decoupled_compensated_channel_is_identity() {
        let p = ProtocolParams {
            j_m1: 0.0,
            j_12: 0.0,
            drive_amp: 0.0,
            ..ProtocolParams::baseline()
        };
        for t in [1.0, 57.3, 2000.0] {
            let ch = extract_channel(&p, Regime::Off, t, PropagatorConfig::default()).unwrap();
            assert!(max_abs(&(ch.choi() - TwoQubitChannel::identity().choi())) < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn iswap_convention() {
        let u = iswap();
        assert_eq!(u.get(2, 1), c(0.0, 1.0));
        assert_eq!(u.get(1, 2), c(0.0, 1.0));
        assert!(u.unitarity_defect() < 1e-16);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn fidelity_in_unit_interval(seed in 0u64..10_000, w in 0.0..1.0f64) {
            let ch = TwoQubitChannel::from_kraus(vec![
                random_unitary(seed).matrix() * c(w.sqrt(), 0.0),
                random_unitary(seed + 1).matrix() * c((1.0 - w).sqrt(), 0.0),
            ]);
            let f = avg_fidelity_choi(&ch, &iswap());
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
            prop_assert!(ch.check().is_ok());
        }

        #[test]
        fn unit_fidelity_only_for_target(seed in 0u64..10_000) {
            let u = random_unitary(seed);
            let ch = TwoQubitChannel::from_unitary(&u);
            prop_assert!((avg_fidelity_choi(&ch, &u) - 1.0).abs() < 1e-12);
            prop_assert!(avg_fidelity_choi(&ch, &iswap()) < 1.0 - 1e-6);
        }
    }
}
