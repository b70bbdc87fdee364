//! Chain state, the Metropolis step and the full sampling run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::proposal::{parallel_direction_move, snooker_move};
use super::rhat::{rhat, RhatReport};
use super::{McmcError, SamplerConfig};
use crate::{seeding, ParameterSpace};

/// Results of a previous run to continue from.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    /// Placed at the front of the new archive.
    pub archive: Vec<Vec<f64>>,
    /// Initial chain states. When absent, the last `N_c` archive rows are used.
    pub states: Option<Vec<Vec<f64>>>,
}

/// Counters from one ensemble step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub nan_rejections: usize,
}

/// The current states of all chains plus the shared archive.
#[derive(Debug, Clone)]
pub struct ChainEnsemble {
    space: ParameterSpace,
    cfg: SamplerConfig,
    states: Vec<Vec<f64>>,
    log_posts: Vec<f64>,
    archive: Vec<Vec<f64>>,
    seed_rows: usize,
    iteration: usize,
    rngs: Vec<ChaCha8Rng>,
    proposals: u64,
    accepted: u64,
    nan_rejections: u64,
}

fn evaluate<F: Fn(&[f64]) -> f64>(target: &F, m: &[f64]) -> Result<f64, McmcError> {
    let v = target(m);
    if v.is_nan() {
        return Err(McmcError::InvalidTarget(m.to_vec()));
    }
    Ok(v)
}

fn check_rows(rows: &[Vec<f64>], space: &ParameterSpace, what: &str) -> Result<(), McmcError> {
    for r in rows {
        if r.len() != space.dim() {
            return Err(McmcError::DimensionMismatch {
                expected: space.dim(),
                found: r.len(),
            });
        }
        if !space.contains(r) {
            return Err(McmcError::InvalidConfig(format!("{what} row {r:?} lies outside the parameter box")));
        }
    }
    Ok(())
}

impl ChainEnsemble {
    /// Places any warm archive first, tops it up with prior draws to the minimum
    /// archive size, and places the chains.
    pub fn init<F>(space: &ParameterSpace, cfg: &SamplerConfig, target: &F, warm: Option<&WarmStart>) -> Result<Self, McmcError>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        cfg.validate()?;
        let dim = space.dim();
        let mut init_rng = seeding::stream_rng(cfg.seed, "mcmc-init");
        let mut archive = Vec::new();
        if let Some(w) = warm {
            check_rows(&w.archive, space, "warm archive")?;
            archive.extend(w.archive.iter().cloned());
        }
        let needed = cfg.archive_seed_rows(dim);
        for _ in archive.len()..needed {
            archive.push(space.sample(&mut init_rng));
        }
        let states = match warm {
            Some(WarmStart { states: Some(s), .. }) => {
                if s.len() != cfg.n_chains {
                    return Err(McmcError::InvalidConfig(format!(
                        "{} warm states for {} chains",
                        s.len(),
                        cfg.n_chains
                    )));
                }
                check_rows(s, space, "warm state")?;
                s.clone()
            }
            Some(w) if w.archive.len() >= cfg.n_chains => w.archive[w.archive.len() - cfg.n_chains..].to_vec(),
            _ => (0..cfg.n_chains).map(|_| space.sample(&mut init_rng)).collect(),
        };
        let log_posts = states.iter().map(|s| evaluate(target, s)).collect::<Result<Vec<_>, _>>()?;
        let base = seeding::substream(cfg.seed, "mcmc");
        let rngs = (0..cfg.n_chains)
            .map(|c| {
                let mut r = ChaCha8Rng::seed_from_u64(base);
                r.set_stream(c as u64);
                r
            })
            .collect();
        let seed_rows = archive.len();
        Ok(Self {
            space: space.clone(),
            cfg: cfg.clone(),
            states,
            log_posts,
            archive,
            seed_rows,
            iteration: 0,
            rngs,
            proposals: 0,
            accepted: 0,
            nan_rejections: 0,
        })
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn log_posts(&self) -> &[f64] {
        &self.log_posts
    }

    pub fn archive(&self) -> &[Vec<f64>] {
        &self.archive
    }

    /// Archive rows present before the first step (warm rows plus prior draws).
    pub fn seed_rows(&self) -> usize {
        self.seed_rows
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn nan_rejections(&self) -> u64 {
        self.nan_rejections
    }

    /// Everything needed to continue sampling, possibly under a new target.
    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            archive: self.archive.clone(),
            states: Some(self.states.clone()),
        }
    }

    /// One proposal and accept/reject per chain against a frozen archive, then
    /// the archive update every `thin_every` iterations.
    pub fn step<F>(&mut self, target: &F) -> Result<StepStats, McmcError>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let archive = &self.archive;
        let space = &self.space;
        let cfg = &self.cfg;
        let advance = |((state, lp), rng): ((&mut Vec<f64>, &mut f64), &mut ChaCha8Rng)| {
            let snooker = archive.len() >= 3 && rng.random::<f64>() < cfg.snooker_prob;
            let (proposal, correction) = if snooker {
                snooker_move(state, archive, rng, cfg, Some(space))?
            } else {
                (parallel_direction_move(state, archive, rng, cfg, Some(space))?, 0.0)
            };
            let log_u = rng.random::<f64>().ln();
            let new_lp = if space.contains(&proposal) {
                target(&proposal)
            } else {
                f64::NEG_INFINITY
            };
            if new_lp.is_nan() {
                log::warn!("target returned NaN at {proposal:?}; proposal rejected");
                return Ok((false, true));
            }
            let accept = new_lp > f64::NEG_INFINITY && log_u < new_lp - *lp + correction;
            if accept {
                *state = proposal;
                *lp = new_lp;
            }
            Ok((accept, false))
        };
        let outcomes: Vec<Result<(bool, bool), McmcError>> = if cfg.parallel {
            self.states
                .par_iter_mut()
                .zip(self.log_posts.par_iter_mut())
                .zip(self.rngs.par_iter_mut())
                .map(advance)
                .collect()
        } else {
            self.states
                .iter_mut()
                .zip(self.log_posts.iter_mut())
                .zip(self.rngs.iter_mut())
                .map(advance)
                .collect()
        };
        let mut stats = StepStats::default();
        for o in outcomes {
            let (a, n) = o?;
            stats.accepted += a as usize;
            stats.nan_rejections += n as usize;
        }
        self.proposals += self.states.len() as u64;
        self.accepted += stats.accepted as u64;
        self.nan_rejections += stats.nan_rejections as u64;
        self.iteration += 1;
        if self.iteration % self.cfg.thin_every == 0 {
            self.archive.extend(self.states.iter().cloned());
        }
        Ok(stats)
    }
}

/// Kept chain states, indexed `[kept][chain]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainHistory {
    pub iterations: Vec<usize>,
    pub states: Vec<Vec<Vec<f64>>>,
    pub log_posts: Vec<Vec<f64>>,
}

impl ChainHistory {
    pub fn n_kept(&self) -> usize {
        self.iterations.len()
    }

    pub fn n_chains(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn push(&mut self, iteration: usize, states: &[Vec<f64>], log_posts: &[f64]) {
        self.iterations.push(iteration);
        self.states.push(states.to_vec());
        self.log_posts.push(log_posts.to_vec());
    }

    /// `[chain][kept][parameter]`, the layout expected by [`rhat`].
    pub fn by_chain(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_chains())
            .map(|c| self.states.iter().map(|row| row[c].clone()).collect())
            .collect()
    }

    /// First kept index after discarding the fraction `burn_in`.
    pub fn burn_in_start(&self, burn_in: f64) -> usize {
        (burn_in * self.n_kept() as f64).floor() as usize
    }

    /// Post-burn-in states and log-posteriors ordered by (iteration, chain).
    pub fn post_burn_in(&self, burn_in: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let start = self.burn_in_start(burn_in);
        let samples = self.states[start..].iter().flatten().cloned().collect();
        let lps = self.log_posts[start..].iter().flatten().copied().collect();
        (samples, lps)
    }
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Post-burn-in states ordered by (iteration, chain).
    pub samples: Vec<Vec<f64>>,
    pub sample_log_posts: Vec<f64>,
    pub history: ChainHistory,
    pub ensemble: ChainEnsemble,
    /// `None` when fewer than 4 states per chain were kept.
    pub rhat: Option<RhatReport>,
}

/// Initializes an ensemble and advances it `cfg.n_iterations` times.
pub fn run<F>(space: &ParameterSpace, cfg: &SamplerConfig, target: &F, warm: Option<&WarmStart>) -> Result<RunOutput, McmcError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut ensemble = ChainEnsemble::init(space, cfg, target, warm)?;
    let mut history = ChainHistory::default();
    for t in 1..=cfg.n_iterations {
        ensemble.step(target)?;
        if t % cfg.sample_thin == 0 {
            history.push(t, &ensemble.states, &ensemble.log_posts);
        }
    }
    if ensemble.nan_rejections > 0 {
        log::warn!("{} proposals rejected because the target returned NaN", ensemble.nan_rejections);
    }
    let (samples, sample_log_posts) = history.post_burn_in(cfg.burn_in);
    let rhat = rhat(&history.by_chain()).ok();
    Ok(RunOutput {
        samples,
        sample_log_posts,
        history,
        ensemble,
        rhat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(d: usize) -> ParameterSpace {
        ParameterSpace::from_bounds((0..d).map(|i| (format!("p{i}"), -5.0, 5.0))).unwrap()
    }

    fn gauss(m: &[f64]) -> f64 {
        -0.5 * m.iter().map(|x| x * x).sum::<f64>()
    }

    #[test]
    fn archive_seed_size_and_growth_law() {
        let space = unit_square(2);
        let cfg = SamplerConfig {
            n_iterations: 57,
            thin_every: 5,
            ..Default::default()
        };
        let mut e = ChainEnsemble::init(&space, &cfg, &gauss, None).unwrap();
        assert_eq!(e.archive().len(), 20);
        for t in 1..=57 {
            e.step(&gauss).unwrap();
            assert_eq!(e.archive().len(), 20 + 4 * (t / 5));
            for (s, lp) in e.states().iter().zip(e.log_posts()) {
                assert!(space.contains(s));
                assert!((gauss(s) - lp).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn warm_archive_is_a_prefix() {
        let space = unit_square(2);
        let cfg = SamplerConfig {
            n_iterations: 40,
            ..Default::default()
        };
        let first = run(&space, &cfg, &gauss, None).unwrap();
        let warm = first.ensemble.warm_start();
        let e = ChainEnsemble::init(&space, &cfg, &gauss, Some(&warm)).unwrap();
        assert!(warm.archive.len() > 20);
        assert_eq!(e.archive().len(), warm.archive.len());
        assert_eq!(&e.archive()[..warm.archive.len()], &warm.archive[..]);
        assert_eq!(e.states(), first.ensemble.states());

        let big = WarmStart {
            archive: (0..500).map(|i| vec![i as f64 / 100.0 - 2.5, 0.0]).collect(),
            states: None,
        };
        let e = ChainEnsemble::init(&space, &cfg, &gauss, Some(&big)).unwrap();
        assert_eq!(e.archive().len(), 500);
        assert_eq!(e.states(), &big.archive[496..]);

        let small = WarmStart {
            archive: vec![vec![0.5, 0.5]; 7],
            states: None,
        };
        let e = ChainEnsemble::init(&space, &cfg, &gauss, Some(&small)).unwrap();
        assert_eq!(e.archive().len(), 20);
        assert_eq!(&e.archive()[..7], &small.archive[..]);
    }

    #[test]
    fn zero_iterations_returns_the_initial_ensemble() {
        let space = unit_square(3);
        let cfg = SamplerConfig {
            n_iterations: 0,
            ..Default::default()
        };
        let out = run(&space, &cfg, &gauss, None).unwrap();
        assert!(out.samples.is_empty());
        assert_eq!(out.ensemble.iteration(), 0);
        assert!(out.rhat.is_none());
    }

    #[test]
    fn seeded_runs_repeat_and_parallel_matches_serial() {
        let space = unit_square(2);
        let cfg = SamplerConfig {
            n_iterations: 300,
            seed: 11,
            ..Default::default()
        };
        let a = run(&space, &cfg, &gauss, None).unwrap();
        let b = run(&space, &cfg, &gauss, None).unwrap();
        let c = run(&space, &SamplerConfig { parallel: false, ..cfg.clone() }, &gauss, None).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.history, c.history);
        assert_eq!(a.ensemble.archive(), c.ensemble.archive());
    }

    #[test]
    fn nan_initial_target_is_an_error() {
        let space = unit_square(1);
        let err = ChainEnsemble::init(&space, &SamplerConfig::default(), &|_: &[f64]| f64::NAN, None).unwrap_err();
        assert!(matches!(err, McmcError::InvalidTarget(_)));
    }

    #[test]
    fn nan_proposals_are_rejected_not_fatal() {
        let space = unit_square(1);
        let target = |m: &[f64]| if m[0] > 0.0 { f64::NAN } else { 0.0 };
        let warm = WarmStart {
            archive: vec![],
            states: Some(vec![vec![-1.0]; 4]),
        };
        let mut e = ChainEnsemble::init(&space, &SamplerConfig::default(), &target, Some(&warm)).unwrap();
        for _ in 0..200 {
            e.step(&target).unwrap();
        }
        assert!(e.nan_rejections() > 0);
        assert!(e.states().iter().all(|s| s[0] <= 0.0));
    }

    #[test]
    fn flat_target_accepts_parallel_direction_moves() {
        let space = unit_square(2);
        let cfg = SamplerConfig {
            snooker_prob: 0.0,
            ..Default::default()
        };
        let mut e = ChainEnsemble::init(&space, &cfg, &|_: &[f64]| 0.0, None).unwrap();
        for _ in 0..10_000 {
            e.step(&|_: &[f64]| 0.0).unwrap();
        }
        assert!(e.acceptance_rate() >= 0.99, "{}", e.acceptance_rate());
    }

    #[test]
    fn without_reflection_out_of_box_proposals_are_rejected() {
        let space = ParameterSpace::from_bounds([("a", 0.0, 1.0)]).unwrap();
        let cfg = SamplerConfig {
            reflect: false,
            jump_scale_override: Some(50.0),
            snooker_prob: 0.0,
            epsilon_sd: 0.0,
            ..Default::default()
        };
        let mut e = ChainEnsemble::init(&space, &cfg, &|_: &[f64]| 0.0, None).unwrap();
        let before = e.states().to_vec();
        let mut moved = 0;
        for _ in 0..500 {
            e.step(&|_: &[f64]| 0.0).unwrap();
            assert!(e.states().iter().all(|s| space.contains(s)));
        }
        for (a, b) in before.iter().zip(e.states()) {
            moved += (a != b) as usize;
        }
        assert!(e.acceptance_rate() < 0.2, "{moved} {}", e.acceptance_rate());
    }

    #[test]
    fn two_mode_histogram_matches_target() {
        // Discretized 1-D target on 10 bins of [0, 10) with two modes.
        let weights = [1.0, 4.0, 8.0, 4.0, 1.0, 1.0, 3.0, 6.0, 3.0, 1.0];
        let total: f64 = weights.iter().sum();
        let space = ParameterSpace::from_bounds([("x", 0.0, 10.0)]).unwrap();
        let target = move |m: &[f64]| weights[(m[0].floor() as usize).min(9)].ln();
        let cfg = SamplerConfig {
            n_iterations: 250_000,
            burn_in: 0.02,
            seed: 5,
            parallel: false,
            ..Default::default()
        };
        let out = run(&space, &cfg, &target, None).unwrap();
        let mut counts = [0.0; 10];
        for s in &out.samples {
            counts[(s[0].floor() as usize).min(9)] += 1.0;
        }
        let n = out.samples.len() as f64;
        let tv: f64 = 0.5 * counts.iter().zip(&weights).map(|(c, w)| (c / n - w / total).abs()).sum::<f64>();
        assert!(tv < 0.02, "total variation {tv}");
    }
}
