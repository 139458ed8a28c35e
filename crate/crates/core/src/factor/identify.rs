use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::Serialize;

use super::em::FactorModel;
use super::rotation::{check_sign_restrictions, sample_orthonormal, RotationCandidate, SignRestrictionMatrix};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Minimum number of random rotations for [`identify_factors`].
pub const MIN_DRAWS: usize = 1000;
/// Acceptance rates below this trigger a warning.
pub const LOW_ACCEPTANCE: f64 = 0.001;

#[derive(Debug, Clone, Copy)]
pub struct IdentifyOptions {
    pub n_draws: usize,
    pub seed: u64,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self {
            n_draws: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Identification {
    /// Λ Q* for the selected rotation.
    pub rotated_loadings: DMatrix<f64>,
    pub rotation: Matrix3<f64>,
    /// Entrywise median of all accepted rotated loadings.
    pub median_loadings: DMatrix<f64>,
    /// T x 3 identified factors `(Q*)' f_t`, scaled to unit sample variance.
    pub factors: DMatrix<f64>,
    pub n_draws: usize,
    pub n_accepted: usize,
    pub seed: Option<u64>,
    pub low_acceptance: bool,
}

impl Identification {
    pub fn acceptance_rate(&self) -> f64 {
        self.n_accepted as f64 / self.n_draws as f64
    }

    pub fn report(&self) -> IdentificationReport {
        IdentificationReport {
            acceptance_rate: self.acceptance_rate(),
            n_draws: self.n_draws,
            n_accepted: self.n_accepted,
            seed: self.seed,
            rotated_loadings: rows_of(&self.rotated_loadings),
            rotation: (0..3).map(|i| self.rotation.row(i).iter().copied().collect()).collect(),
        }
    }
}

/// Serializable summary of an identification run.
#[derive(Debug, Clone, Serialize)]
pub struct IdentificationReport {
    pub acceptance_rate: f64,
    pub n_draws: usize,
    pub n_accepted: usize,
    pub seed: Option<u64>,
    pub rotated_loadings: Vec<Vec<f64>>,
    pub rotation: Vec<Vec<f64>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Draws `n_draws` Haar rotations (draw `i` from stream `i` of `seed`) and
/// marks those whose rotated loadings satisfy the restrictions.
pub fn draw_candidates(
    loadings: &DMatrix<f64>,
    restrictions: &SignRestrictionMatrix,
    n_draws: usize,
    seed: u64,
) -> Vec<RotationCandidate> {
    (0..n_draws as u64)
        .into_par_iter()
        .map(|i| {
            let q = sample_orthonormal(&mut stream_rng(seed, i));
            let accepted = check_sign_restrictions(&rotate(loadings, &q), restrictions);
            RotationCandidate { q, accepted }
        })
        .collect()
}

/// Set-identifies the three factors by random orthonormal rotations.
///
/// The selected rotation is the accepted `Q` whose `ΛQ` lies closest, in
/// Frobenius norm, to the entrywise median of all accepted `ΛQ`. Ties go
/// to the earliest draw.
pub fn identify_factors(
    model: &FactorModel,
    restrictions: &SignRestrictionMatrix,
    opts: IdentifyOptions,
) -> Result<Identification> {
    if opts.n_draws < MIN_DRAWS {
        return Err(Error::Invalid(format!(
            "at least {MIN_DRAWS} rotation draws are required, got {}",
            opts.n_draws
        )));
    }
    let candidates = draw_candidates(&model.loadings, restrictions, opts.n_draws, opts.seed);
    let mut id = select_rotation(model, &candidates)?;
    id.seed = Some(opts.seed);
    Ok(id)
}

/// Same selection rule over an explicit candidate list, scanned in order.
pub fn identify_with_candidates(
    model: &FactorModel,
    restrictions: &SignRestrictionMatrix,
    rotations: &[Matrix3<f64>],
) -> Result<Identification> {
    let candidates: Vec<RotationCandidate> = rotations
        .iter()
        .map(|q| RotationCandidate {
            q: *q,
            accepted: check_sign_restrictions(&rotate(&model.loadings, q), restrictions),
        })
        .collect();
    select_rotation(model, &candidates)
}

fn select_rotation(model: &FactorModel, candidates: &[RotationCandidate]) -> Result<Identification> {
    if model.loadings.ncols() != 3 {
        return Err(Error::Invalid("rotation identification needs exactly 3 factors".into()));
    }
    let n_draws = candidates.len();
    let accepted: Vec<(Matrix3<f64>, DMatrix<f64>)> = candidates
        .iter()
        .filter(|c| c.accepted)
        .map(|c| (c.q, rotate(&model.loadings, &c.q)))
        .collect();
    if accepted.is_empty() {
        return Err(Error::NoAcceptedRotations { n_draws });
    }
    let rate = accepted.len() as f64 / n_draws as f64;
    let low_acceptance = rate < LOW_ACCEPTANCE;
    if low_acceptance {
        log::warn!("sign-restriction acceptance rate {rate:.2e} is below {LOW_ACCEPTANCE}");
    }

    let rotated: Vec<&DMatrix<f64>> = accepted.iter().map(|(_, l)| l).collect();
    let median = entrywise_median(&rotated);
    let best = nearest_index(&rotated, &median);
    let (q, rotated_loadings) = accepted[best].clone();

    let mut factors = &model.scores * DMatrix::from_iterator(3, 3, q.iter().copied());
    for mut col in factors.column_iter_mut() {
        let n = col.len() as f64;
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }

    Ok(Identification {
        rotated_loadings,
        rotation: q,
        median_loadings: median,
        factors,
        n_draws,
        n_accepted: accepted.len(),
        seed: None,
        low_acceptance,
    })
}

fn rotate(loadings: &DMatrix<f64>, q: &Matrix3<f64>) -> DMatrix<f64> {
    let qd = DMatrix::from_iterator(3, 3, q.iter().copied());
    loadings * qd
}

/// Index of the matrix nearest to `target` in Frobenius norm; the first wins ties.
fn nearest_index(matrices: &[&DMatrix<f64>], target: &DMatrix<f64>) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, m) in matrices.iter().enumerate() {
        let d = (*m - target).norm();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Entrywise median; even counts take the midpoint of the two middle values.
pub fn entrywise_median(matrices: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let (r, c) = matrices[0].shape();
    DMatrix::from_fn(r, c, |i, j| {
        let mut v: Vec<f64> = matrices.iter().map(|m| m[(i, j)]).collect();
        crate::stats::median_in_place(&mut v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::em::{estimate_factor_mle, EmOptions};
    use nalgebra::DVector;

    fn model_with_loadings(loadings: DMatrix<f64>) -> FactorModel {
        FactorModel {
            scores: DMatrix::from_fn(40, 3, |i, j| ((i * 3 + j) as f64 * 0.77).sin()),
            specific_variances: DVector::from_element(8, 0.1),
            means: DVector::zeros(8),
            log_likelihood: 0.0,
            trace: vec![],
            iterations: 0,
            converged: true,
            heywood: vec![false; 8],
            loadings,
        }
    }

    fn admissible() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            8,
            3,
            &[
                0.9, 0.3, 0.2, 0.8, 0.4, 0.2, 0.6, 0.5, 0.3, 0.4, -0.1, 0.3, 0.2, -0.1, -0.5, 0.2,
                -0.2, -0.6, 0.1, -0.2, -0.7, -0.5, 0.4, 0.3,
            ],
        )
    }

    #[test]
    fn singleton_accepted_set_selects_identity() {
        let model = model_with_loadings(admissible());
        let flip = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let id = identify_with_candidates(
            &model,
            &SignRestrictionMatrix::three_shock(),
            &[flip, Matrix3::identity(), flip],
        )
        .unwrap();
        assert_eq!(id.n_accepted, 1);
        assert_eq!(id.rotation, Matrix3::identity());
        assert!((&id.rotated_loadings - &id.median_loadings).norm() == 0.0);
    }

    #[test]
    fn tie_goes_to_first_found() {
        let target = DMatrix::from_element(8, 3, 0.5);
        let up = DMatrix::from_element(8, 3, 0.75);
        let down = DMatrix::from_element(8, 3, 0.25);
        let far = DMatrix::from_element(8, 3, 2.0);
        assert_eq!(nearest_index(&[&far, &up, &down], &target), 1);
        assert_eq!(nearest_index(&[&far, &down, &up], &target), 1);
        assert_eq!(nearest_index(&[&up, &down], &target), 0);
    }

    #[test]
    fn zero_acceptance_is_an_error() {
        let model = model_with_loadings(-admissible() * 0.0 + DMatrix::from_element(8, 3, 1.0));
        let err = identify_with_candidates(
            &model,
            &SignRestrictionMatrix::three_shock(),
            &[Matrix3::identity()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoAcceptedRotations { n_draws: 1 }));
    }

    #[test]
    fn too_few_draws_rejected() {
        let model = model_with_loadings(admissible());
        let opts = IdentifyOptions { n_draws: 999, seed: 1 };
        assert!(identify_factors(&model, &SignRestrictionMatrix::three_shock(), opts).is_err());
    }

    #[test]
    fn accepted_candidates_satisfy_restrictions_and_factors_are_standardized() {
        let model = model_with_loadings(admissible());
        let restrictions = SignRestrictionMatrix::three_shock();
        let cands = draw_candidates(&model.loadings, &restrictions, 5000, 17);
        for c in cands.iter().filter(|c| c.accepted) {
            assert!(check_sign_restrictions(&rotate(&model.loadings, &c.q), &restrictions));
        }
        let id = identify_factors(&model, &restrictions, IdentifyOptions { n_draws: 5000, seed: 17 })
            .unwrap();
        assert!(check_sign_restrictions(&id.rotated_loadings, &restrictions));
        for col in id.factors.column_iter() {
            let n = col.len() as f64;
            let m = col.mean();
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let model = model_with_loadings(admissible());
        let restrictions = SignRestrictionMatrix::three_shock();
        let opts = IdentifyOptions { n_draws: 3000, seed: 99 };
        let a = identify_factors(&model, &restrictions, opts).unwrap();
        let b = identify_factors(&model, &restrictions, opts).unwrap();
        assert_eq!(a.rotation, b.rotation);
        assert_eq!(a.factors, b.factors);
        assert_eq!(a.n_accepted, b.n_accepted);
    }

    #[test]
    fn median_matches_brute_force_and_is_stable_under_duplication() {
        let mats: Vec<DMatrix<f64>> = (0..5)
            .map(|k| DMatrix::from_fn(2, 2, |i, j| ((k * 4 + i * 2 + j) as f64 * 1.3).cos()))
            .collect();
        let refs: Vec<&DMatrix<f64>> = mats.iter().collect();
        let base = entrywise_median(&refs);
        for i in 0..2 {
            for j in 0..2 {
                let mut v: Vec<f64> = refs.iter().map(|m| m[(i, j)]).collect();
                v.sort_by(f64::total_cmp);
                assert_eq!(base[(i, j)], v[2]);
            }
        }
        let doubled: Vec<&DMatrix<f64>> = refs.iter().chain(refs.iter()).copied().collect();
        let quadrupled: Vec<&DMatrix<f64>> = doubled.iter().chain(doubled.iter()).copied().collect();
        assert_eq!(entrywise_median(&doubled), base);
        assert_eq!(entrywise_median(&quadrupled), base);
    }

    #[test]
    fn recovers_simulated_factors() {
        use rand_distr::{Distribution, StandardNormal};
        let lambda0 = admissible();
        let t = 300;
        let mut rng = stream_rng(5, 0);
        let f = DMatrix::from_fn(t, 3, |_, _| StandardNormal.sample(&mut rng));
        let e = DMatrix::from_fn(t, 8, |_, _| 0.05 * Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let data = &f * lambda0.transpose() + e;
        let model = estimate_factor_mle(&data, 3, EmOptions::default()).unwrap();
        let id = identify_factors(
            &model,
            &SignRestrictionMatrix::three_shock(),
            IdentifyOptions { n_draws: 20_000, seed: 3 },
        )
        .unwrap();
        for j in 0..3 {
            let c = crate::stats::correlation(
                id.factors.column(j).as_slice(),
                f.column(j).as_slice(),
            );
            assert!(c > 0.9, "factor {j} correlation {c}");
        }
    }
}
