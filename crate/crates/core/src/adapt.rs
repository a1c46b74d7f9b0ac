//! Varying goals and the active-inactive genotype.
//!
//! An active-inactive genotype stores, for every process parameter, a
//! selector in `1..=l` followed by `l` candidate values; the flat layout is
//! `[sel_1, v_1_1, .., v_1_l, sel_2, ...]`. Only the selected slot is
//! expressed.

use rand::Rng as _;

use crate::archive::{AlgorithmTag, ArchiveEntry, GenotypeKind, ParetoArchive};
use crate::error::{Error, Result};
use crate::nsga2::{
    evolve, polynomial_mutation, sbx_crossover, uniform_in, AlgoConfig, Problem, Representation,
    Rng, RunResult, RunSpec,
};
use crate::oxley::{Bound, N_PROCESS};
use crate::task::TaskSpec;

pub use crate::nsga2::goal_index;

/// Default generations per goal.
pub const DEFAULT_EPOCH: usize = 5;
/// Default slots per gene.
pub const DEFAULT_GENE_LENGTH: usize = 2;

#[derive(Debug, Clone)]
pub struct GoalSchedule {
    pub goals: Vec<TaskSpec>,
    pub epoch_length: usize,
}

impl GoalSchedule {
    pub fn new(goals: Vec<TaskSpec>, epoch_length: usize) -> Result<Self> {
        let s = GoalSchedule { goals, epoch_length };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.goals.is_empty() {
            return Err(Error::Config("goal schedule is empty".into()));
        }
        if self.epoch_length == 0 {
            return Err(Error::Config("epoch length must be at least 1".into()));
        }
        for (i, a) in self.goals.iter().enumerate() {
            if self.goals[..i].iter().any(|b| b.name() == a.name()) {
                return Err(Error::Config(format!("goal '{}' listed twice", a.name())));
            }
        }
        Ok(())
    }
}

/// Selector and slot values of one active-inactive gene.
#[derive(Debug, Clone, PartialEq)]
pub struct AIGene {
    pub selector: usize,
    pub slots: Vec<f64>,
}

/// Validated view of a flat active-inactive genotype.
pub fn genes(g: &[f64], l: usize) -> Result<Vec<AIGene>> {
    if l == 0 || !g.len().is_multiple_of(l + 1) {
        return Err(Error::Structural(format!(
            "genotype length {} is not a multiple of {}",
            g.len(),
            l + 1
        )));
    }
    g.chunks_exact(l + 1)
        .enumerate()
        .map(|(i, chunk)| {
            Ok(AIGene {
                selector: selector(chunk[0], l, i)?,
                slots: chunk[1..].to_vec(),
            })
        })
        .collect()
}

fn selector(raw: f64, l: usize, gene: usize) -> Result<usize> {
    if raw.fract() != 0.0 || raw < 1.0 || raw > l as f64 {
        return Err(Error::Structural(format!(
            "gene {gene}: selector {raw} outside 1..={l}"
        )));
    }
    Ok(raw as usize)
}

/// Flattens genes back into the genotype layout.
pub fn flatten(genes: &[AIGene]) -> Vec<f64> {
    genes
        .iter()
        .flat_map(|g| std::iter::once(g.selector as f64).chain(g.slots.iter().copied()))
        .collect()
}

/// Active slot of every gene.
pub fn decode(g: &[f64], l: usize) -> Result<Vec<f64>> {
    Ok(genes(g, l)?
        .iter()
        .map(|gene| gene.slots[gene.selector - 1])
        .collect())
}

/// Writes `p` into the active slots of `g`; selectors and inactive slots
/// are left unchanged.
pub fn encode(g: &[f64], p: &[f64], l: usize) -> Result<Vec<f64>> {
    let mut parsed = genes(g, l)?;
    if parsed.len() != p.len() {
        return Err(Error::Structural(format!(
            "phenotype has {} values for {} genes",
            p.len(),
            parsed.len()
        )));
    }
    for (gene, &x) in parsed.iter_mut().zip(p) {
        gene.slots[gene.selector - 1] = x;
    }
    Ok(flatten(&parsed))
}

/// Reassigns each selector with probability `flip_prob` to a different value
/// drawn uniformly from `1..=l`, then mutates the decoded phenotype with the
/// bounded polynomial operator and writes it back.
#[allow(clippy::too_many_arguments)]
pub fn two_step_mutation(
    g: &[f64],
    l: usize,
    flip_prob: f64,
    eta_mut: f64,
    mutation_prob: f64,
    bounds: &[Bound],
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let mut parsed = genes(g, l)?;
    for gene in parsed.iter_mut() {
        if rng.random::<f64>() < flip_prob && l > 1 {
            let other = rng.random_range(1..l);
            gene.selector = if other >= gene.selector { other + 1 } else { other };
        }
    }
    let flipped = flatten(&parsed);
    let p = decode(&flipped, l)?;
    let mutated = polynomial_mutation(&p, eta_mut, mutation_prob, bounds, rng);
    encode(&flipped, &mutated, l)
}

/// SBX on the decoded phenotypes; each child is encoded into its own
/// parent's genotype.
pub fn ai_crossover(
    g1: &[f64],
    g2: &[f64],
    l: usize,
    eta_cross: f64,
    bounds: &[Bound],
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (p1, p2) = (decode(g1, l)?, decode(g2, l)?);
    let (c1, c2) = sbx_crossover(&p1, &p2, eta_cross, bounds, rng);
    Ok((encode(g1, &c1, l)?, encode(g2, &c2, l)?))
}

/// Active-inactive representation with `gene_length` slots per gene.
#[derive(Debug, Clone, Copy)]
pub struct ActiveInactive {
    pub gene_length: usize,
    /// Per-gene selector reassignment probability.
    pub flip_prob: f64,
}

impl ActiveInactive {
    pub fn new(gene_length: usize) -> Result<Self> {
        if gene_length == 0 {
            return Err(Error::Config("gene length must be at least 1".into()));
        }
        Ok(ActiveInactive {
            gene_length,
            flip_prob: 1.0 / N_PROCESS as f64,
        })
    }
}

impl Representation for ActiveInactive {
    fn kind(&self) -> GenotypeKind {
        GenotypeKind::ActiveInactive
    }

    fn gene_length(&self) -> usize {
        self.gene_length
    }

    /// Selectors and every slot, active or not, uniform.
    fn random(&self, bounds: &[Bound], rng: &mut Rng) -> Vec<f64> {
        let l = self.gene_length;
        let mut g = Vec::with_capacity(bounds.len() * (l + 1));
        for b in bounds {
            g.push(rng.random_range(1..=l) as f64);
            for _ in 0..l {
                g.push(uniform_in(b, rng));
            }
        }
        g
    }

    fn decode(&self, genotype: &[f64]) -> Result<Vec<f64>> {
        decode(genotype, self.gene_length)
    }

    /// Stored active-inactive genotypes of the same gene length are reused
    /// whole; anything else has its phenotype written into a fresh random
    /// genotype.
    fn seed(&self, entry: &ArchiveEntry, from: GenotypeKind, gene_length: usize, bounds: &[Bound], rng: &mut Rng) -> Result<Vec<f64>> {
        if from == GenotypeKind::ActiveInactive && gene_length == self.gene_length {
            decode(&entry.genotype, self.gene_length)?;
            return Ok(entry.genotype.clone());
        }
        let fresh = self.random(bounds, rng);
        encode(&fresh, &entry.phenotype, self.gene_length)
    }

    fn crossover(&self, a: &[f64], b: &[f64], cfg: &AlgoConfig, bounds: &[Bound], rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
        ai_crossover(a, b, self.gene_length, cfg.eta_cross, bounds, rng)
    }

    fn mutate(&self, g: &[f64], cfg: &AlgoConfig, bounds: &[Bound], rng: &mut Rng) -> Result<Vec<f64>> {
        two_step_mutation(g, self.gene_length, self.flip_prob, cfg.eta_mut, cfg.mutation_prob, bounds, rng)
    }
}

/// NSGA-II cycling through the schedule's goals. The stored front is the
/// feasible first front captured at the last strict improvement of the
/// current goal's best hypervolume.
pub fn varying_goals_run(
    schedule: &GoalSchedule,
    config: &AlgoConfig,
    representation: &dyn Representation,
    initial: Option<&ParetoArchive>,
) -> Result<RunResult> {
    schedule.validate()?;
    let goals: Vec<&dyn Problem> = schedule.goals.iter().map(|g| g as &dyn Problem).collect();
    let algorithm = match representation.kind() {
        GenotypeKind::Plain => AlgorithmTag::VaryingGoals,
        GenotypeKind::ActiveInactive => AlgorithmTag::VaryingGoalsActiveInactive,
    };
    let spec = RunSpec {
        config,
        representation,
        algorithm,
        epoch: schedule.epoch_length,
        initial,
        stop_threshold: None,
    };
    evolve(&goals, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nsga2::run_rng;
    use crate::oxley::PROCESS_BOUNDS;

    #[test]
    fn decode_example() {
        let g = [1.0, 3.0, 4.0, 2.0, 0.1, 0.2, 1.0, 5e-4, 7e-4];
        assert_eq!(decode(&g, 2).unwrap(), vec![3.0, 0.2, 5e-4]);
    }

    #[test]
    fn malformed_selector_is_structural() {
        for bad in [0.0, 3.0, 1.5, f64::NAN] {
            let g = [bad, 3.0, 4.0];
            assert!(matches!(decode(&g, 2), Err(Error::Structural(_))));
        }
        assert!(matches!(decode(&[1.0, 2.0], 2), Err(Error::Structural(_))));
        assert!(matches!(encode(&[1.0, 2.0, 3.0], &[1.0, 2.0], 2), Err(Error::Structural(_))));
    }

    #[test]
    fn encode_touches_active_slots_only() {
        let g = [2.0, 3.0, 4.0, 2.0, 0.1, 0.2, 2.0, 5e-4, 7e-4];
        let e = encode(&g, &[1.0, 0.5, 1e-4], 2).unwrap();
        assert_eq!(e, vec![2.0, 3.0, 1.0, 2.0, 0.1, 0.5, 2.0, 5e-4, 1e-4]);
        assert_eq!(encode(&g, &decode(&g, 2).unwrap(), 2).unwrap(), g.to_vec());
    }

    #[test]
    fn forced_flip_toggles_with_two_slots() {
        let g = [1.0, 3.0, 4.0, 2.0, 0.1, 0.2, 1.0, 5e-4, 7e-4];
        let mut rng = run_rng(3, 0);
        let out = two_step_mutation(&g, 2, 1.0, 20.0, 0.0, &PROCESS_BOUNDS, &mut rng).unwrap();
        let sel: Vec<f64> = out.iter().step_by(3).copied().collect();
        assert_eq!(sel, vec![2.0, 1.0, 2.0]);
        let slots: Vec<f64> = out.chunks(3).flat_map(|c| c[1..].to_vec()).collect();
        let before: Vec<f64> = g.chunks(3).flat_map(|c| c[1..].to_vec()).collect();
        assert_eq!(slots, before);
    }

    #[test]
    fn no_flip_no_perturbation_is_identity() {
        let g = [1.0, 3.0, 4.0, 2.0, 0.1, 0.2, 1.0, 5e-4, 7e-4];
        let mut rng = run_rng(5, 1);
        let out = two_step_mutation(&g, 2, 0.0, 20.0, 0.0, &PROCESS_BOUNDS, &mut rng).unwrap();
        assert_eq!(out, g.to_vec());
    }

    #[test]
    fn schedule_rejects_duplicates() {
        use crate::material::MaterialParams;
        let t = TaskSpec::new(MaterialParams::steel());
        assert!(GoalSchedule::new(vec![t.clone(), t], 5).is_err());
        assert!(GoalSchedule::new(vec![TaskSpec::new(MaterialParams::steel())], 0).is_err());
    }
}
