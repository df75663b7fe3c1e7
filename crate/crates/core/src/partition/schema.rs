use serde::{Deserialize, Serialize};

use super::PartitionError;

/// A named finite-domain state variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub domain_size: u64,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain_size: u64) -> Self {
        Self {
            name: name.into(),
            domain_size,
        }
    }

    /// Number of bits in the binary encoding: `ceil(log2(domain_size))`.
    pub fn bits(&self) -> u32 {
        if self.domain_size <= 1 {
            0
        } else {
            64 - (self.domain_size - 1).leading_zeros()
        }
    }
}

/// Ordered variables and their binary encoding.
///
/// Variables are laid out in declaration order, most significant first, and
/// each variable is encoded most significant bit first. Bit position 0 is the
/// first bit a partition tree tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSchema {
    variables: Vec<Variable>,
    /// Bit offset of each variable from the top of the code.
    offsets: Vec<u32>,
    total_bits: u32,
}

impl VariableSchema {
    pub fn new(variables: Vec<Variable>) -> Result<Self, PartitionError> {
        let mut offsets = Vec::with_capacity(variables.len());
        let mut total: u32 = 0;
        for var in &variables {
            if var.domain_size == 0 {
                return Err(PartitionError::EmptyDomain(var.name.clone()));
            }
            offsets.push(total);
            total += var.bits();
        }
        if total > 64 {
            return Err(PartitionError::EncodingTooWide(total));
        }
        Ok(Self {
            variables,
            offsets,
            total_bits: total,
        })
    }

    /// Single-variable schema over state indices, used for graphs that come
    /// without a variable declaration.
    pub fn indexed(num_states: usize) -> Self {
        Self::new(vec![Variable::new("state", num_states.max(1) as u64)])
            .expect("a single variable always fits in 64 bits")
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn encode(&self, assignment: &[u64]) -> Result<u64, PartitionError> {
        if assignment.len() != self.variables.len() {
            return Err(PartitionError::AssignmentArity {
                expected: self.variables.len(),
                got: assignment.len(),
            });
        }
        let mut code = 0u64;
        for ((var, &value), &offset) in self.variables.iter().zip(assignment).zip(&self.offsets) {
            if value >= var.domain_size {
                return Err(PartitionError::ValueOutOfDomain {
                    variable: var.name.clone(),
                    value,
                });
            }
            let bits = var.bits();
            if bits > 0 {
                code |= value << (self.total_bits - offset - bits);
            }
        }
        Ok(code)
    }

    pub fn decode(&self, code: u64) -> Vec<u64> {
        self.variables
            .iter()
            .zip(&self.offsets)
            .map(|(var, &offset)| {
                let bits = var.bits();
                if bits == 0 {
                    0
                } else {
                    let shift = self.total_bits - offset - bits;
                    (code >> shift) & low_mask(bits)
                }
            })
            .collect()
    }

    /// Value of bit `position` (0 = most significant) of `code`.
    pub fn bit(&self, code: u64, position: u32) -> bool {
        debug_assert!(position < self.total_bits);
        (code >> (self.total_bits - 1 - position)) & 1 == 1
    }

    /// The leading `depth` bits of `code`.
    pub fn prefix(&self, code: u64, depth: u32) -> u64 {
        if depth == 0 {
            0
        } else {
            code >> (self.total_bits - depth)
        }
    }
}

fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}
