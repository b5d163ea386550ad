//! Bind a model to a dataset and run the sampler.
//!
//! Stratified kinds are fitted as one independent single-subtrial run per
//! subtrial; their draws are merged back into the joint stratified layout so
//! downstream summaries treat all four kinds uniformly.

use crate::error::Result;
use crate::models::{Dataset, Layout, ModelSpec, PosteriorDensity};
use crate::sampler::{run, ChainDraws, InitStrategy, PosteriorDraws, SamplerConfig};

/// Fitted draws together with the coordinate layout they follow.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub draws: PosteriorDraws,
    pub layout: Layout,
}

/// Fit `spec` to `data` under the given sampler configuration.
pub fn fit_model(spec: &ModelSpec, data: &Dataset, config: &SamplerConfig) -> Result<FitOutcome> {
    if spec.kind.is_hierarchical() {
        let dens = PosteriorDensity::new(spec, data)?;
        let draws = run(&dens, config, &InitStrategy::Jittered)?;
        Ok(FitOutcome {
            layout: dens.layout().clone(),
            draws,
        })
    } else {
        fit_stratified(spec, data, config)
    }
}

/// K independent single-subtrial fits merged into the joint layout.
///
/// Each subtrial's chains draw from streams keyed by the subtrial index, so
/// a subtrial's draws are identical whether it is fitted alone or as part
/// of a larger dataset.
fn fit_stratified(spec: &ModelSpec, data: &Dataset, config: &SamplerConfig) -> Result<FitOutcome> {
    let kk = spec.n_subtrials;
    let joint_spec = spec.clone();
    let joint_layout = Layout::for_spec(&joint_spec, data.len())?;

    let mut sub_outcomes = Vec::with_capacity(kk);
    let mut latent_starts = Vec::with_capacity(kk);
    let mut cursor = 0usize;
    for k in 1..=kk {
        let sub_data = data.single_subtrial(k)?;
        latent_starts.push(cursor);
        cursor += sub_data.len();
        let sub_spec = ModelSpec {
            n_subtrials: 1,
            ..spec.clone()
        };
        let sub_config = SamplerConfig {
            // Subtrial index occupies the lane bits above the chain index.
            stream_lane: config.stream_lane + (((k - 1) as u64) << 8),
            ..config.clone()
        };
        let dens = PosteriorDensity::new(&sub_spec, &sub_data)?;
        let draws = run(&dens, &sub_config, &InitStrategy::Jittered)?;
        sub_outcomes.push((dens.layout().clone(), draws));
    }

    // Coordinate map: joint index -> (subtrial, subfit index).
    let dim = joint_layout.dim;
    let mut source = vec![(0usize, 0usize); dim];
    for k in 0..kk {
        let (sub_layout, _) = &sub_outcomes[k];
        for which in 0..3 {
            for c in 0..joint_layout.block {
                source[joint_layout.coef(which, k, c)] = (k, sub_layout.coef(which, 0, c));
            }
        }
        if joint_layout.log_sigma1.is_some() {
            source[joint_layout.sigma1_coord(k)] = (k, sub_layout.sigma1_coord(0));
            source[joint_layout.rho_coord(k)] = (k, sub_layout.rho_coord(0));
        }
        if let Some(latent0) = joint_layout.latent {
            let sub_latent0 = sub_layout.latent.expect("joint layout");
            for i in 0..sub_layout.n_latent {
                source[latent0 + latent_starts[k] + i] = (k, sub_latent0 + i);
            }
        }
    }

    let n_draws = config.sampling_iters;
    let mut chains = Vec::with_capacity(config.chains);
    for c in 0..config.chains {
        let mut draws = vec![0.0f64; n_draws * dim];
        let mut divergent = vec![false; n_draws];
        let mut inv_mass = vec![1.0f64; dim];
        let mut max_depth_hits = 0usize;
        let mut step_size_sum = 0.0f64;
        for (k, (_, sub_draws)) in sub_outcomes.iter().enumerate() {
            let sub_chain = &sub_draws.chains[c];
            let sub_dim = sub_draws.dim();
            for (j, &(sk, sj)) in source.iter().enumerate() {
                if sk != k {
                    continue;
                }
                for i in 0..n_draws {
                    draws[i * dim + j] = sub_chain.draws[i * sub_dim + sj];
                }
                inv_mass[j] = sub_chain.inv_mass_diag[sj];
            }
            for (i, d) in sub_chain.divergent.iter().enumerate() {
                divergent[i] |= *d;
            }
            max_depth_hits += sub_chain.max_depth_hits;
            step_size_sum += sub_chain.step_size;
        }
        chains.push(ChainDraws {
            draws,
            divergent,
            step_size: step_size_sum / kk as f64,
            inv_mass_diag: inv_mass,
            max_depth_hits,
        });
    }

    Ok(FitOutcome {
        draws: PosteriorDraws {
            names: joint_layout.names(),
            transforms: joint_layout.transforms(),
            n_draws,
            chains,
        },
        layout: joint_layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelKind, SubjectRecord};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset(k: usize, n_per_arm: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut recs = Vec::new();
        for kk in 1..=k {
            for t in 0..2u8 {
                for _ in 0..n_per_arm {
                    recs.push(SubjectRecord {
                        subtrial: kk,
                        treatment: t,
                        baseline: rng.random_range(0.5..3.0),
                        y_continuous: rng.random_range(1.0..4.0),
                        y_binary: u8::from(rng.random_bool(0.3)),
                    });
                }
            }
        }
        Dataset::new(recs).unwrap()
    }

    fn tiny_config(seed: u64) -> SamplerConfig {
        SamplerConfig {
            chains: 2,
            warmup_iters: 150,
            sampling_iters: 100,
            ..SamplerConfig::desk(seed)
        }
    }

    #[test]
    fn hierarchical_fit_produces_expected_shape() {
        let data = toy_dataset(2, 5, 1);
        let spec = ModelSpec::new(ModelKind::AbbaHierarchical, 2);
        let out = fit_model(&spec, &data, &tiny_config(3)).unwrap();
        assert_eq!(out.draws.dim(), out.layout.dim);
        assert_eq!(out.draws.n_chains(), 2);
        assert_eq!(out.draws.n_draws, 100);
    }

    #[test]
    fn stratified_first_subtrial_matches_standalone_fit() {
        let data = toy_dataset(3, 5, 2);
        let spec = ModelSpec::new(ModelKind::AbbaStratified, 3);
        let config = tiny_config(9);
        let joint = fit_model(&spec, &data, &config).unwrap();

        let alone_data = data.single_subtrial(1).unwrap();
        let alone_spec = ModelSpec::new(ModelKind::AbbaStratified, 1);
        let alone = fit_model(&alone_spec, &alone_data, &config).unwrap();

        // Subtrial 1's coordinates must be bit-identical between the two.
        for c in 0..2 {
            for which in 0..3 {
                for comp in 0..2 {
                    let j_joint = joint.layout.coef(which, 0, comp);
                    let j_alone = alone.layout.coef(which, 0, comp);
                    for i in 0..config.sampling_iters {
                        assert_eq!(
                            joint.draws.draw(c, i)[j_joint],
                            alone.draws.draw(c, i)[j_alone]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn binary_stratified_merges_all_subtrials() {
        let data = toy_dataset(2, 6, 4);
        let spec = ModelSpec::new(ModelKind::BinStratified, 2);
        let out = fit_model(&spec, &data, &tiny_config(5)).unwrap();
        assert_eq!(out.draws.dim(), 6);
        // Every coordinate must have been filled from some subfit.
        let col: Vec<f64> = out.draws.column(5).into_iter().flatten().collect();
        assert!(col.iter().any(|v| *v != 0.0));
    }
}
