//! One register per class with an entropy-based acceptance filter.

use rand::Rng;

use crate::amr::Amr;
use crate::error::{Error, Result};
use crate::function::DiscreteFunction;

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Accepted {
        class: usize,
        retrieved: Option<DiscreteFunction>,
    },
    Unknown,
}

/// Result of presenting a cue to every register.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemDecision {
    pub outcome: Outcome,
    /// Classes whose register recognized the cue, ascending.
    pub accepting: Vec<usize>,
}

impl SystemDecision {
    pub fn class(&self) -> Option<usize> {
        match self.outcome {
            Outcome::Accepted { class, .. } => Some(class),
            Outcome::Unknown => None,
        }
    }

    pub fn retrieved(&self) -> Option<&DiscreteFunction> {
        match &self.outcome {
            Outcome::Accepted { retrieved, .. } => retrieved.as_ref(),
            Outcome::Unknown => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MemorySystem {
    registers: Vec<Amr>,
    entropies: Vec<f64>,
}

impl MemorySystem {
    pub fn new(classes: usize, n: usize, rows: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Domain(
                "a memory system needs at least one class".into(),
            ));
        }
        let register = Amr::new(n, rows)?;
        Ok(MemorySystem {
            registers: vec![register; classes],
            entropies: vec![0.0; classes],
        })
    }

    pub fn classes(&self) -> usize {
        self.registers.len()
    }

    pub fn n(&self) -> usize {
        self.registers[0].n()
    }

    pub fn rows(&self) -> usize {
        self.registers[0].rows()
    }

    pub fn register(&self, class: usize) -> &Amr {
        &self.registers[class]
    }

    pub fn registers(&self) -> &[Amr] {
        &self.registers
    }

    /// Cached entropy of each register.
    pub fn entropies(&self) -> &[f64] {
        &self.entropies
    }

    pub fn register_instance(&mut self, class: usize, f: &DiscreteFunction) -> Result<()> {
        let classes = self.classes();
        let amr = self
            .registers
            .get_mut(class)
            .ok_or(Error::ClassOutOfRange { class, classes })?;
        amr.register(f)?;
        self.entropies[class] = amr.entropy();
        Ok(())
    }

    /// Classes whose register accepts the cue at `tolerance`.
    pub fn accepting_set(&self, cue: &DiscreteFunction, tolerance: usize) -> Result<Vec<usize>> {
        let mut accepting = Vec::new();
        for (class, amr) in self.registers.iter().enumerate() {
            if amr.recognize(cue, tolerance)? {
                accepting.push(class);
            }
        }
        Ok(accepting)
    }

    /// Smallest-entropy member of `accepting`, ties to the smaller class id.
    fn select(&self, accepting: &[usize]) -> Option<usize> {
        accepting.iter().copied().min_by(|&a, &b| {
            self.entropies[a]
                .total_cmp(&self.entropies[b])
                .then(a.cmp(&b))
        })
    }

    pub fn recognize(&self, cue: &DiscreteFunction, tolerance: usize) -> Result<SystemDecision> {
        let accepting = self.accepting_set(cue, tolerance)?;
        let outcome = match self.select(&accepting) {
            Some(class) => Outcome::Accepted {
                class,
                retrieved: None,
            },
            None => Outcome::Unknown,
        };
        Ok(SystemDecision { outcome, accepting })
    }

    /// Like [`recognize`](Self::recognize), and on acceptance retrieves a
    /// function from the selected register.
    pub fn retrieve<R: Rng + ?Sized>(
        &self,
        cue: &DiscreteFunction,
        tolerance: usize,
        rng: &mut R,
    ) -> Result<SystemDecision> {
        let accepting = self.accepting_set(cue, tolerance)?;
        let outcome = match self.select(&accepting) {
            Some(class) => Outcome::Accepted {
                class,
                retrieved: self.registers[class].retrieve(cue, tolerance, rng)?,
            },
            None => Outcome::Unknown,
        };
        Ok(SystemDecision { outcome, accepting })
    }
}
