//! Small reference models used by tests, the CLI and the demo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{self, cplx, real, CMat};
use crate::operator::{GklsGenerator, KrausChannel, ObservationFunction};

pub fn pauli_x() -> CMat {
    linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> CMat {
    let mut m = linalg::zeros(2);
    m[(0, 1)] = cplx(0.0, -1.0);
    m[(1, 0)] = cplx(0.0, 1.0);
    m
}

pub fn pauli_z() -> CMat {
    linalg::diag_real(&[1.0, -1.0])
}

/// `exp(-iθ P/2)` for a Pauli matrix `P`.
pub fn rotation(pauli: &CMat, theta: f64) -> CMat {
    linalg::identity(2) * real((theta / 2.0).cos()) - pauli * cplx(0.0, (theta / 2.0).sin())
}

fn ring_labels() -> Vec<String> {
    let mut labels: Vec<String> = (0..3).map(|k| format!("up{k}")).collect();
    labels.extend((0..3).map(|k| format!("down{k}")));
    labels
}

fn ring_kraus(amp_up: f64, amp_down: f64) -> Vec<CMat> {
    let mut kraus = Vec::with_capacity(6);
    for k in 0..3 {
        kraus.push(linalg::ket_bra(3, (k + 1) % 3, k) * real(amp_up));
    }
    for k in 0..3 {
        kraus.push(linalg::ket_bra(3, (k + 2) % 3, k) * real(amp_down));
    }
    kraus
}

/// Walk on three sites with jump probabilities `p_up` and `1 - p_up`;
/// outcomes `up{k}` / `down{k}` record the jump direction and the site left.
pub fn ring_with(p_up: f64) -> KrausChannel {
    KrausChannel::new(ring_kraus(p_up.sqrt(), (1.0 - p_up).sqrt()), ring_labels())
        .expect("ring fixture")
}

/// Symmetric ring, amplitudes `1/√2`.
pub fn ring() -> KrausChannel {
    ring_with(0.5)
}

/// The ring with amplitudes ½, which is not trace preserving.
pub fn ring_half_amplitude() -> KrausChannel {
    KrausChannel::new(ring_kraus(0.5, 0.5), ring_labels()).expect("ring fixture")
}

/// `+1` for up jumps, `-1` for down jumps.
pub fn ring_observation() -> ObservationFunction {
    ObservationFunction {
        values: vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
    }
}

/// Up-jump indicator.
pub fn ring_up_indicator() -> ObservationFunction {
    ObservationFunction {
        values: vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
    }
}

/// Weighted pair of non-commuting unitaries: `√0.7 Rx(0.9)`, `√0.3 Rz(1.3)`.
pub fn two_unitary_qubit() -> KrausChannel {
    KrausChannel::new(
        vec![
            rotation(&pauli_x(), 0.9) * real(0.7f64.sqrt()),
            rotation(&pauli_z(), 1.3) * real(0.3f64.sqrt()),
        ],
        vec!["a".into(), "b".into()],
    )
    .expect("qubit fixture")
}

pub fn two_unitary_observation() -> ObservationFunction {
    ObservationFunction {
        values: vec![1.0, -1.0],
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        cplx(re, im)
    })
}

/// Haar-like random channel from the Q factor of a Gaussian `kd × d` matrix.
pub fn random_channel(d: usize, k: usize, seed: u64) -> KrausChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = gaussian_matrix(k * d, d, &mut rng);
    let q = z.qr().q();
    let kraus = (0..k)
        .map(|i| q.view((i * d, 0), (d, d)).into_owned())
        .collect();
    KrausChannel::unlabeled(kraus).expect("random channel")
}

/// Random completely positive map, not trace preserving.
pub fn random_cp_kraus(d: usize, k: usize, seed: u64) -> Vec<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| gaussian_matrix(d, d, &mut rng) * real(1.0 / (d as f64 * k as f64).sqrt()))
        .collect()
}

/// Random density matrix of full rank.
pub fn random_state(d: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(d, d, &mut rng);
    let m = &g * g.adjoint() + linalg::identity(d) * real(0.05);
    let tr = m.trace();
    m / tr
}

pub fn random_matrix(d: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_matrix(d, d, &mut rng)
}

/// Generic two-outcome qubit channel; its multiplicative symmetrization is
/// irreducible.
pub fn random_qubit() -> KrausChannel {
    let ch = random_channel(2, 2, 7);
    KrausChannel::new(ch.kraus, vec!["a".into(), "b".into()]).expect("qubit fixture")
}

pub fn random_qubit_observation() -> ObservationFunction {
    ObservationFunction {
        values: vec![1.0, -1.0],
    }
}

/// Channel with a small leak `δ` between the otherwise conserved Pauli
/// components; `‖(Id − Φ)⁻¹|F‖` grows like `1/δ`.
pub fn near_reducible(delta: f64) -> KrausChannel {
    KrausChannel::unlabeled(vec![
        linalg::identity(2) * real((1.0 - delta).sqrt()),
        pauli_x() * real((delta / 2.0).sqrt()),
        pauli_z() * real((delta / 2.0).sqrt()),
    ])
    .expect("near-reducible fixture")
}

/// Rank-one channel `Φ(x) = tr(σx)·1` for a diagonal `σ`, with Kraus
/// operators `√σ_k |j⟩⟨k|`.
pub fn rank_one(weights: &[f64]) -> KrausChannel {
    let d = weights.len();
    let mut kraus = Vec::new();
    for j in 0..d {
        for (k, w) in weights.iter().enumerate() {
            kraus.push(linalg::ket_bra(d, k, j) * real(w.sqrt()));
        }
    }
    KrausChannel::unlabeled(kraus).expect("rank-one fixture")
}

/// Direct sum of two rings with up probabilities `p1` and `p2`; outcomes are
/// shared between the blocks.
pub fn two_block_ring(p1: f64, p2: f64) -> KrausChannel {
    let a = ring_with(p1);
    let b = ring_with(p2);
    let kraus = a
        .kraus
        .iter()
        .zip(&b.kraus)
        .map(|(x, y)| {
            let mut m = linalg::zeros(6);
            m.view_mut((0, 0), (3, 3)).copy_from(x);
            m.view_mut((3, 3), (3, 3)).copy_from(y);
            m
        })
        .collect();
    KrausChannel::new(kraus, ring_labels()).expect("two-block fixture")
}

/// Non-demolition channel: diagonal Kraus operators `V_i = diag(u_j[i])`,
/// one unit vector `u_j` per pointer state `|j⟩`.
pub fn non_demolition(columns: &[Vec<f64>]) -> KrausChannel {
    let outcomes = columns[0].len();
    let kraus = (0..outcomes)
        .map(|i| {
            let diag: Vec<f64> = columns.iter().map(|u| u[i]).collect();
            linalg::diag_real(&diag)
        })
        .collect();
    KrausChannel::unlabeled(kraus).expect("non-demolition fixture")
}

/// Ring unravelled by the superposed operators `(V_up,k ± V_down,k)/√2`,
/// which realize the same channel as [`ring`].
pub fn ring_superposed() -> KrausChannel {
    let base = ring_kraus(0.5f64.sqrt(), 0.5f64.sqrt());
    let s = real(0.5f64.sqrt());
    let mut kraus = Vec::with_capacity(6);
    let mut labels = Vec::with_capacity(6);
    for k in 0..3 {
        kraus.push((&base[k] + &base[k + 3]) * s);
        labels.push(format!("plus{k}"));
    }
    for k in 0..3 {
        kraus.push((&base[k] - &base[k + 3]) * s);
        labels.push(format!("minus{k}"));
    }
    KrausChannel::new(kraus, labels).expect("superposed ring")
}

/// On the superposed unravelling: `+1` when leaving site 0, `-1` otherwise.
pub fn ring_superposed_observation() -> ObservationFunction {
    ObservationFunction {
        values: vec![1.0, -1.0, -1.0, 1.0, -1.0, -1.0],
    }
}

/// `H = (Ω/2)σ_x`, `L = √κ σ₋` with `σ₋ = |0⟩⟨1|` (index 1 is excited).
pub fn driven_qubit(omega: f64, kappa: f64) -> GklsGenerator {
    GklsGenerator::new(
        pauli_x() * real(omega / 2.0),
        vec![linalg::ket_bra(2, 0, 1) * real(kappa.sqrt())],
        vec!["emission".into()],
    )
    .expect("driven qubit")
}

/// `H = 0`, `L = √κ σ_x`: a rate-κ Poisson process of clicks.
pub fn poisson_single(kappa: f64) -> GklsGenerator {
    GklsGenerator::new(
        linalg::zeros(2),
        vec![pauli_x() * real(kappa.sqrt())],
        vec!["jump".into()],
    )
    .expect("poisson fixture")
}

/// `H = 0`, `L_x = √(κ/2) σ_x`, `L_z = √(κ/2) σ_z`. Each channel clicks as a
/// Poisson process of rate κ/2 and `Re(L)` is irreducible.
pub fn poisson_pair(kappa: f64) -> GklsGenerator {
    let a = real((kappa / 2.0).sqrt());
    GklsGenerator::new(
        linalg::zeros(2),
        vec![pauli_x() * a, pauli_z() * a],
        vec!["x".into(), "z".into()],
    )
    .expect("poisson fixture")
}

/// Random generator with `k` Gaussian jump operators and a Gaussian
/// Hamiltonian.
pub fn random_generator(d: usize, k: usize, seed: u64) -> GklsGenerator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = gaussian_matrix(d, d, &mut rng);
    let h = linalg::hermitian_part(&h) * real(0.5);
    let jumps = (0..k)
        .map(|_| gaussian_matrix(d, d, &mut rng) * real(0.5))
        .collect();
    GklsGenerator::unlabeled(h, jumps).expect("random generator")
}
