use super::{Genome, GenomeMode};
use crate::rng::Rng;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// How candidate perturbations are proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    #[default]
    /// Tournament selection, uniform crossover, Gaussian mutation, elitism.
    Genetic,
    /// Every coordinate drawn from U[0, uniform_high] afresh.
    Uniform,
    /// Every coordinate drawn from N(0, normal_sigma) afresh.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    /// Generations per optimization call.
    pub generations: usize,
    /// Candidates per generation.
    pub population: usize,
    /// Control steps per fitness rollout.
    pub rollout_steps: usize,
    /// Waypoints k sampled from the current trajectory.
    pub waypoints: usize,
    pub tournament_size: usize,
    /// Per-waypoint probability of taking the second parent's vector.
    pub crossover_prob: f64,
    /// Per-coordinate mutation probability.
    pub mutation_prob: f64,
    /// Mutation standard deviation (m).
    pub mutation_sigma: f64,
    pub uniform_high: f64,
    pub normal_sigma: f64,
    pub genome_mode: GenomeMode,
    /// Chosen by the training reference mode rather than the config file.
    #[serde(skip)]
    pub update_rule: UpdateRule,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            generations: 10,
            population: 40,
            rollout_steps: 300,
            waypoints: 8,
            tournament_size: 3,
            crossover_prob: 0.5,
            mutation_prob: 0.2,
            mutation_sigma: 0.01,
            uniform_high: 0.01,
            normal_sigma: 0.01,
            genome_mode: GenomeMode::Shared,
            update_rule: UpdateRule::Genetic,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.generations == 0 || self.population == 0 {
            return Err("ga.generations and ga.population must be positive".into());
        }
        if self.waypoints < super::MIN_WAYPOINTS {
            return Err(format!("ga.waypoints must be at least {}", super::MIN_WAYPOINTS));
        }
        if self.tournament_size == 0 {
            return Err("ga.tournament_size must be positive".into());
        }
        for (name, p) in [("ga.crossover_prob", self.crossover_prob), ("ga.mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, s) in [
            ("ga.mutation_sigma", self.mutation_sigma),
            ("ga.uniform_high", self.uniform_high),
            ("ga.normal_sigma", self.normal_sigma),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(format!("{name} must be non-negative"));
            }
        }
        Ok(())
    }
}

fn gaussian(rng: &mut Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    }
}

fn tournament<'a>(scored: &'a [(Genome, f64)], size: usize, rng: &mut Rng) -> &'a Genome {
    let mut best = rng.gen_range(0..scored.len());
    for _ in 1..size {
        let c = rng.gen_range(0..scored.len());
        if scored[c].1 > scored[best].1 {
            best = c;
        }
    }
    &scored[best].0
}

fn elite_index(scored: &[(Genome, f64)]) -> usize {
    let mut best = 0;
    for (i, (_, f)) in scored.iter().enumerate() {
        if *f > scored[best].1 {
            best = i;
        }
    }
    best
}

/// Next generation of `n` genomes from a scored population. The best genome
/// is copied unchanged into slot 0.
pub fn ga_generation(scored: &[(Genome, f64)], n: usize, cfg: &GaConfig, rng: &mut Rng) -> Vec<Genome> {
    assert!(!scored.is_empty(), "empty population");
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(scored[elite_index(scored)].0.clone());
    while out.len() < n {
        let mut child = tournament(scored, cfg.tournament_size, rng).clone();
        if cfg.crossover_prob > 0.0 {
            let other = tournament(scored, cfg.tournament_size, rng);
            let k = child.waypoints();
            let legs = child.vectors.len() / k;
            // crossover swaps whole waypoint vectors, never single coordinates
            for i in 0..k {
                if rng.gen_bool(cfg.crossover_prob) {
                    for l in 0..legs {
                        child.vectors[l * k + i] = other.vectors[l * k + i];
                    }
                }
            }
        }
        if cfg.mutation_prob > 0.0 {
            for v in child.vectors.iter_mut() {
                for c in v.iter_mut() {
                    if rng.gen_bool(cfg.mutation_prob) {
                        *c += gaussian(rng, cfg.mutation_sigma);
                    }
                }
            }
        }
        out.push(child);
    }
    out
}

fn random_genome(cfg: &GaConfig, rng: &mut Rng) -> Genome {
    let mut g = Genome::zeros(cfg.genome_mode, cfg.waypoints);
    for v in g.vectors.iter_mut() {
        for c in v.iter_mut() {
            *c = match cfg.update_rule {
                UpdateRule::Genetic => gaussian(rng, cfg.mutation_sigma),
                UpdateRule::Uniform => {
                    if cfg.uniform_high > 0.0 {
                        rng.gen_range(0.0..cfg.uniform_high)
                    } else {
                        0.0
                    }
                }
                UpdateRule::Normal => gaussian(rng, cfg.normal_sigma),
            };
        }
    }
    g
}

/// First generation: the zero genome followed by random draws.
pub fn initial_population(cfg: &GaConfig, rng: &mut Rng) -> Vec<Genome> {
    let mut pop = vec![Genome::zeros(cfg.genome_mode, cfg.waypoints)];
    while pop.len() < cfg.population {
        pop.push(random_genome(cfg, rng));
    }
    pop
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub worst: f64,
    /// Best fitness seen so far in this call.
    pub best_so_far: f64,
    /// Candidates whose evaluation failed.
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome<T> {
    pub best: Option<(Genome, f64, T)>,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
}

impl<T> OptimizeOutcome<T> {
    pub fn best_fitness(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1)
    }
}

/// Runs the configured candidate-generation rule against an arbitrary
/// fitness function. `evaluate` returns the fitness and a payload kept for
/// the best candidate; failures return `f64::NEG_INFINITY` and no payload.
pub fn optimize_with<T, F>(cfg: &GaConfig, rng: &mut Rng, mut evaluate: F) -> OptimizeOutcome<T>
where
    F: FnMut(&Genome) -> (f64, Option<T>),
{
    let mut best: Option<(Genome, f64, T)> = None;
    let mut history = Vec::with_capacity(cfg.generations);
    let mut evaluations = 0;
    let mut population = initial_population(cfg, rng);
    for generation in 0..cfg.generations {
        let mut scored = Vec::with_capacity(population.len());
        let mut failures = 0;
        for g in population {
            let (f, payload) = evaluate(&g);
            evaluations += 1;
            match payload {
                Some(p) if f.is_finite() => {
                    if best.as_ref().map_or(true, |b| f > b.1) {
                        best = Some((g.clone(), f, p));
                    }
                }
                _ => failures += 1,
            }
            let f = if f.is_finite() { f } else { f64::NEG_INFINITY };
            scored.push((g, f));
        }
        let finite: Vec<f64> = scored.iter().map(|s| s.1).filter(|f| f.is_finite()).collect();
        let gen_best = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gen_worst = finite.iter().copied().fold(f64::INFINITY, f64::min);
        history.push(GenerationStats {
            generation,
            best: gen_best,
            mean: if finite.is_empty() {
                f64::NAN
            } else {
                finite.iter().sum::<f64>() / finite.len() as f64
            },
            worst: if finite.is_empty() { f64::NEG_INFINITY } else { gen_worst },
            best_so_far: best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1),
            failures,
        });
        if generation + 1 == cfg.generations {
            break;
        }
        population = match cfg.update_rule {
            UpdateRule::Genetic => ga_generation(&scored, cfg.population, cfg, rng),
            UpdateRule::Uniform | UpdateRule::Normal => {
                (0..cfg.population).map(|_| random_genome(cfg, rng)).collect()
            }
        };
    }
    OptimizeOutcome {
        best,
        history,
        evaluations,
    }
}
