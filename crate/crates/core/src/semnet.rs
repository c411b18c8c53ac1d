//! Semantic-network layer: concept–stimulus matrices and the energy of
//! information transfer between stimuli and concepts.
//!
//! A [`ConceptStimulusMatrix`] has one row per stimulus and one column per
//! concept. The joint distribution it induces puts mass proportional to each
//! entry, so a binary matrix spreads mass uniformly over its links.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probmath::{entropy, mutual_information, JointDistribution, Matrix};

/// Default balance between information and concept-entropy cost.
pub const DEFAULT_LAMBDA: f64 = 0.41;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixMode {
    Binary,
    Weighted,
}

/// Stimulus × concept link matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct ConceptStimulusMatrix {
    entries: Matrix,
    mode: MatrixMode,
    stimulus_labels: Vec<String>,
    concept_labels: Vec<String>,
}

/// On-disk JSON layout of a matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    #[serde(default)]
    pub stimulus_labels: Option<Vec<String>>,
    #[serde(default)]
    pub concept_labels: Option<Vec<String>>,
    pub mode: MatrixMode,
    pub entries: Vec<Vec<f64>>,
}

impl TryFrom<MatrixFile> for ConceptStimulusMatrix {
    type Error = Error;

    fn try_from(f: MatrixFile) -> Result<Self> {
        let entries = Matrix::from_rows(&f.entries).map_err(|e| Error::schema("entries", e.to_string()))?;
        let stimulus_labels = f
            .stimulus_labels
            .unwrap_or_else(|| (0..entries.rows()).map(|i| format!("r{i}")).collect());
        let concept_labels = f
            .concept_labels
            .unwrap_or_else(|| (0..entries.cols()).map(|i| format!("s{i}")).collect());
        ConceptStimulusMatrix::with_labels(entries, f.mode, stimulus_labels, concept_labels)
    }
}

impl From<ConceptStimulusMatrix> for MatrixFile {
    fn from(m: ConceptStimulusMatrix) -> Self {
        MatrixFile {
            stimulus_labels: Some(m.stimulus_labels),
            concept_labels: Some(m.concept_labels),
            mode: m.mode,
            entries: m.entries.to_rows(),
        }
    }
}

impl ConceptStimulusMatrix {
    /// Matrix with generated labels `r0..` for stimuli and `s0..` for concepts.
    pub fn new(entries: Matrix, mode: MatrixMode) -> Result<Self> {
        let stimulus_labels = (0..entries.rows()).map(|i| format!("r{i}")).collect();
        let concept_labels = (0..entries.cols()).map(|i| format!("s{i}")).collect();
        Self::with_labels(entries, mode, stimulus_labels, concept_labels)
    }

    pub fn with_labels(
        entries: Matrix,
        mode: MatrixMode,
        stimulus_labels: Vec<String>,
        concept_labels: Vec<String>,
    ) -> Result<Self> {
        if stimulus_labels.len() != entries.rows() {
            return Err(Error::schema(
                "stimulus_labels",
                format!("{} labels for {} stimulus rows", stimulus_labels.len(), entries.rows()),
            ));
        }
        if concept_labels.len() != entries.cols() {
            return Err(Error::schema(
                "concept_labels",
                format!("{} labels for {} concept columns", concept_labels.len(), entries.cols()),
            ));
        }
        for r in 0..entries.rows() {
            for c in 0..entries.cols() {
                let v = entries.get(r, c);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::schema(
                        format!("entries[{r}][{c}]"),
                        format!("{v} is not a non-negative number"),
                    ));
                }
                if mode == MatrixMode::Binary && v != 0.0 && v != 1.0 {
                    return Err(Error::schema(
                        format!("entries[{r}][{c}]"),
                        format!("{v} is not 0 or 1 in binary mode"),
                    ));
                }
            }
        }
        if entries.data().iter().all(|&v| v == 0.0) {
            return Err(Error::domain("concept-stimulus matrix has no links"));
        }
        Ok(Self {
            entries,
            mode,
            stimulus_labels,
            concept_labels,
        })
    }

    /// Binary matrix from a row-major bit pattern.
    pub fn from_bits(n_stimuli: usize, n_concepts: usize, bits: &[bool]) -> Result<Self> {
        assert_eq!(bits.len(), n_stimuli * n_concepts);
        let rows: Vec<Vec<f64>> = bits
            .chunks(n_concepts)
            .map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(Matrix::from_rows(&rows)?, MatrixMode::Binary)
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn mode(&self) -> MatrixMode {
        self.mode
    }

    pub fn n_stimuli(&self) -> usize {
        self.entries.rows()
    }

    pub fn n_concepts(&self) -> usize {
        self.entries.cols()
    }

    pub fn stimulus_labels(&self) -> &[String] {
        &self.stimulus_labels
    }

    pub fn concept_labels(&self) -> &[String] {
        &self.concept_labels
    }

    /// Stimulus vector of concept `i`.
    pub fn concept_vector(&self, i: usize) -> Vec<f64> {
        self.entries.column(i)
    }
}

/// Energy of information transfer at one value of λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferEnergyReport {
    pub lambda: f64,
    /// I(S, R) in nats.
    pub information: f64,
    /// H(S) of the concept marginal, in nats.
    pub concept_entropy: f64,
    pub omega: f64,
    /// `1/λ − 1`; absent at λ = 0.
    pub a_omega: Option<f64>,
    /// `Ω/λ`; absent at λ = 0.
    pub scaled_omega: Option<f64>,
}

/// Joint `p(s_i, r_j)` with concepts on rows and stimuli on columns.
pub fn induced_joint(csm: &ConceptStimulusMatrix) -> Result<JointDistribution> {
    let total: f64 = csm.entries.data().iter().sum();
    if total <= 0.0 {
        return Err(Error::domain("concept-stimulus matrix has no links"));
    }
    let mut p = Matrix::zeros(csm.n_concepts(), csm.n_stimuli());
    for r in 0..csm.n_stimuli() {
        for c in 0..csm.n_concepts() {
            p.set(c, r, csm.entries.get(r, c) / total);
        }
    }
    JointDistribution::new(p, csm.concept_labels.clone(), csm.stimulus_labels.clone())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// `Ω(λ) = −λ I(S,R) + (1 − λ) H(S)`, plus the rescaled form `Ω/λ` when λ > 0.
pub fn transfer_energy(csm: &ConceptStimulusMatrix, lambda: f64) -> Result<TransferEnergyReport> {
    check_lambda(lambda)?;
    let joint = induced_joint(csm)?;
    Ok(energy_from_joint(&joint, lambda))
}

fn energy_from_joint(joint: &JointDistribution, lambda: f64) -> TransferEnergyReport {
    let information = mutual_information(joint);
    let concept_entropy = entropy(&joint.row_marginal());
    let omega = -lambda * information + (1.0 - lambda) * concept_entropy;
    let (a_omega, scaled_omega) = if lambda > 0.0 {
        (Some(1.0 / lambda - 1.0), Some(omega / lambda))
    } else {
        (None, None)
    };
    TransferEnergyReport {
        lambda,
        information,
        concept_entropy,
        omega,
        a_omega,
        scaled_omega,
    }
}

/// Transfer energy when the transmitter has zero entropy: `Ω_o = I(S, R)`.
pub fn machine_transfer_energy(csm: &ConceptStimulusMatrix) -> Result<f64> {
    Ok(mutual_information(&induced_joint(csm)?))
}

/// Cosine similarity between concept stimulus-vectors. A concept with no
/// stimuli has similarity 0 with everything, itself included.
pub fn similarity_matrix(csm: &ConceptStimulusMatrix) -> Matrix {
    let n = csm.n_concepts();
    let vectors: Vec<Vec<f64>> = (0..n).map(|i| csm.concept_vector(i)).collect();
    let norms: Vec<f64> = vectors.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut sim = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let value = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else if i == j {
                1.0
            } else {
                let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
                (dot / (norms[i] * norms[j])).clamp(0.0, 1.0)
            };
            sim.set(i, j, value);
            sim.set(j, i, value);
        }
    }
    sim
}

/// Groups concepts that share exactly the same stimulus links, in order of
/// first appearance.
pub fn synsets(csm: &ConceptStimulusMatrix) -> Result<Vec<Vec<usize>>> {
    if csm.mode != MatrixMode::Binary {
        return Err(Error::domain("synsets are defined on binary link sets only"));
    }
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for i in 0..csm.n_concepts() {
        let v = csm.concept_vector(i);
        match groups.iter_mut().find(|(key, _)| *key == v) {
            Some((_, members)) => members.push(i),
            None => groups.push((v, vec![i])),
        }
    }
    Ok(groups.into_iter().map(|(_, members)| members).collect())
}

/// Steepest-descent single-bit-flip search from `start`, never visiting the
/// all-zero matrix. Stops when no flip lowers Ω.
pub fn greedy_descent(
    start: &ConceptStimulusMatrix,
    lambda: f64,
) -> Result<(ConceptStimulusMatrix, TransferEnergyReport)> {
    check_lambda(lambda)?;
    if start.mode != MatrixMode::Binary {
        return Err(Error::domain("greedy descent works on binary matrices"));
    }
    let (m, n) = (start.n_stimuli(), start.n_concepts());
    let mut bits: Vec<bool> = start.entries.data().iter().map(|&v| v != 0.0).collect();
    let mut current = transfer_energy(start, lambda)?;
    loop {
        let mut best: Option<(usize, TransferEnergyReport)> = None;
        let links = bits.iter().filter(|&&b| b).count();
        for k in 0..bits.len() {
            if bits[k] && links == 1 {
                continue;
            }
            bits[k] = !bits[k];
            let report = transfer_energy(&ConceptStimulusMatrix::from_bits(m, n, &bits)?, lambda)?;
            bits[k] = !bits[k];
            if best.as_ref().is_none_or(|(_, b)| report.omega < b.omega) {
                best = Some((k, report));
            }
        }
        match best {
            Some((k, report)) if report.omega < current.omega - 1e-12 => {
                bits[k] = !bits[k];
                current = report;
            }
            _ => break,
        }
    }
    let mut out = ConceptStimulusMatrix::from_bits(m, n, &bits)?;
    out.stimulus_labels = start.stimulus_labels.clone();
    out.concept_labels = start.concept_labels.clone();
    Ok((out, current))
}

/// Searches binary matrices for a minimum of Ω(λ): greedy descent from
/// `restarts` random non-empty starts, keeping the lowest energy found.
pub fn optimize_matrix<R: Rng + ?Sized>(
    n_concepts: usize,
    n_stimuli: usize,
    lambda: f64,
    rng: &mut R,
    restarts: usize,
) -> Result<(ConceptStimulusMatrix, TransferEnergyReport)> {
    if n_concepts == 0 || n_stimuli == 0 {
        return Err(Error::domain("matrix dimensions must be positive"));
    }
    if restarts == 0 {
        return Err(Error::domain("at least one restart is required"));
    }
    check_lambda(lambda)?;
    let mut best: Option<(ConceptStimulusMatrix, TransferEnergyReport)> = None;
    for _ in 0..restarts {
        let bits = loop {
            let bits: Vec<bool> = (0..n_stimuli * n_concepts).map(|_| rng.random_bool(0.5)).collect();
            if bits.iter().any(|&b| b) {
                break bits;
            }
        };
        let start = ConceptStimulusMatrix::from_bits(n_stimuli, n_concepts, &bits)?;
        let candidate = greedy_descent(&start, lambda)?;
        if best.as_ref().is_none_or(|(_, b)| candidate.1.omega < b.omega) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Ω at `k` evenly spaced λ values in `[0, 1]`, endpoints included.
pub fn lambda_profile(csm: &ConceptStimulusMatrix, k: usize) -> Result<Vec<TransferEnergyReport>> {
    if k < 2 {
        return Err(Error::domain("a lambda grid needs at least 2 points"));
    }
    let joint = induced_joint(csm)?;
    Ok((0..k)
        .map(|i| {
            let lambda = i as f64 / (k - 1) as f64;
            energy_from_joint(&joint, lambda)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(rows: &[Vec<f64>]) -> ConceptStimulusMatrix {
        ConceptStimulusMatrix::new(Matrix::from_rows(rows).unwrap(), MatrixMode::Binary).unwrap()
    }

    fn weighted(rows: &[Vec<f64>]) -> ConceptStimulusMatrix {
        ConceptStimulusMatrix::new(Matrix::from_rows(rows).unwrap(), MatrixMode::Weighted).unwrap()
    }

    #[test]
    fn induced_joint_examples() {
        let j = induced_joint(&binary(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        assert_eq!(j.probs().to_rows(), vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        let j = induced_joint(&binary(&[vec![1.0, 1.0], vec![1.0, 1.0]])).unwrap();
        assert!(j.probs().data().iter().all(|&p| p == 0.25));
        // rows of the joint are concepts, i.e. the transpose of the entries
        let j = induced_joint(&weighted(&[vec![2.0, 0.0], vec![1.0, 1.0]])).unwrap();
        assert_eq!(j.probs().to_rows(), vec![vec![0.5, 0.25], vec![0.0, 0.25]]);
    }

    #[test]
    fn rejects_bad_matrices() {
        let zero = ConceptStimulusMatrix::new(Matrix::zeros(2, 2), MatrixMode::Weighted);
        assert!(matches!(zero, Err(Error::Domain(_))));
        let not_binary = ConceptStimulusMatrix::new(
            Matrix::from_rows(&[vec![2.0, 0.0]]).unwrap(),
            MatrixMode::Binary,
        );
        match not_binary {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "entries[0][0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn transfer_energy_endpoints_and_fixture() {
        let m = weighted(&[vec![4.0, 1.0], vec![1.0, 4.0]]);
        let r0 = transfer_energy(&m, 0.0).unwrap();
        assert_eq!(r0.omega, r0.concept_entropy);
        assert!(r0.a_omega.is_none() && r0.scaled_omega.is_none());
        let r1 = transfer_energy(&m, 1.0).unwrap();
        assert_eq!(r1.omega, -r1.information);
        assert_eq!(r1.a_omega, Some(0.0));

        let r = transfer_energy(&m, 0.41).unwrap();
        assert!((r.omega - 0.3299314861514471).abs() < 1e-9, "{}", r.omega);
        assert!((r.a_omega.unwrap() - (1.0 / 0.41 - 1.0)).abs() < 1e-12);
        assert!((r.scaled_omega.unwrap() - r.omega / 0.41).abs() < 1e-12);
        assert!(transfer_energy(&m, 1.2).is_err());
        assert!(transfer_energy(&m, -0.1).is_err());
    }

    #[test]
    fn machine_energy_examples() {
        let indep = binary(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(machine_transfer_energy(&indep).unwrap().abs() < 1e-15);
        let id = binary(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((machine_transfer_energy(&id).unwrap() - 2f64.ln()).abs() < 1e-12);
        let m = weighted(&[vec![4.0, 1.0], vec![1.0, 4.0]]);
        assert!((machine_transfer_energy(&m).unwrap() - 0.192745).abs() < 1e-6);
    }

    #[test]
    fn similarity_examples() {
        // columns: (1,1,0), (1,1,0), (1,0,1), (0,0,1)
        let m = binary(&[
            vec![1.0, 1.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
        ]);
        let s = similarity_matrix(&m);
        assert!((s.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((s.get(0, 2) - 0.5).abs() < 1e-12);
        assert_eq!(s.get(0, 3), 0.0);
        for i in 0..4 {
            assert_eq!(s.get(i, i), 1.0);
        }
    }

    #[test]
    fn similarity_of_empty_concept_is_zero() {
        let m = binary(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let s = similarity_matrix(&m);
        assert_eq!(s.get(1, 1), 0.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(0, 0), 1.0);
    }

    #[test]
    fn synset_examples() {
        let id = binary(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_eq!(synsets(&id).unwrap(), vec![vec![0], vec![1], vec![2]]);
        let dup = binary(&[vec![1.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(synsets(&dup).unwrap(), vec![vec![0, 1]]);
        let m = binary(&[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_eq!(synsets(&m).unwrap(), vec![vec![0, 1], vec![2]]);
        let w = weighted(&[vec![2.0, 1.0]]);
        assert!(synsets(&w).is_err());
    }

    #[test]
    fn profile_is_affine() {
        let m = weighted(&[vec![3.0, 1.0, 0.0], vec![1.0, 2.0, 5.0]]);
        let prof = lambda_profile(&m, 11).unwrap();
        let (h, i) = (prof[0].omega, -prof[10].omega);
        for r in &prof {
            assert!((r.omega - (h - r.lambda * (i + h))).abs() < 1e-10);
        }
        assert!(lambda_profile(&m, 1).is_err());
    }

    #[test]
    fn labels_survive_json_round_trip() {
        let json = r#"{"stimulus_labels":["wing","beak"],"concept_labels":["bird"],"mode":"binary","entries":[[1],[1]]}"#;
        let m: ConceptStimulusMatrix = serde_json::from_str(json).unwrap();
        assert_eq!(m.concept_labels(), ["bird"]);
        let back: ConceptStimulusMatrix = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
