//! Resolution of `choice(...)` calls.

/// Weyl increment of splitmix64; also the per-example stream multiplier.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One splitmix64 step: returns `(value, new_state)`.
pub fn splitmix64_next(state: u64) -> (u64, u64) {
    let next = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = next;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31), next)
}

/// Stream seed for example `ordinal` under global `seed`.
pub fn example_stream_seed(seed: u64, ordinal: u64) -> u64 {
    seed ^ ordinal.wrapping_mul(GOLDEN_GAMMA)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChoiceMode {
    /// The k-th call takes the k-th draw of the example's splitmix64 stream.
    SeededRandom { seed: u64, example_ordinal: u64 },
    /// The k-th call takes `indices[k]`; running out of indices is an error.
    FixedPath(Vec<usize>),
    /// Follows `prefix`, then takes index 0 for every further call.
    /// Used to discover the choice shape along one execution path.
    Recording { prefix: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChoiceFailure {
    #[error("choice() needs a non-empty list")]
    EmptyList,
    #[error("choice() needs a list, got {0}")]
    NotAList(&'static str),
    #[error("choice() call #{call} has no fixed index (path has {len} entries)")]
    PathTooShort { call: usize, len: usize },
    #[error("fixed index {index} is out of range for a list of {len} elements")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Stateful resolver for one render. Every mode records the list length seen
/// at each call.
#[derive(Debug, Clone)]
pub struct ChoiceResolver {
    mode: ChoiceMode,
    state: u64,
    lengths: Vec<usize>,
    picks: Vec<usize>,
}

impl ChoiceResolver {
    pub fn new(mode: ChoiceMode) -> Self {
        let state = match &mode {
            ChoiceMode::SeededRandom { seed, example_ordinal } => example_stream_seed(*seed, *example_ordinal),
            _ => 0,
        };
        Self { mode, state, lengths: Vec::new(), picks: Vec::new() }
    }

    pub fn seeded(seed: u64, example_ordinal: u64) -> Self {
        Self::new(ChoiceMode::SeededRandom { seed, example_ordinal })
    }

    pub fn fixed(indices: Vec<usize>) -> Self {
        Self::new(ChoiceMode::FixedPath(indices))
    }

    pub fn recording() -> Self {
        Self::new(ChoiceMode::Recording { prefix: Vec::new() })
    }

    pub fn mode(&self) -> &ChoiceMode {
        &self.mode
    }

    /// Picks an index into a list of `len` elements.
    pub fn pick(&mut self, len: usize) -> Result<usize, ChoiceFailure> {
        if len == 0 {
            return Err(ChoiceFailure::EmptyList);
        }
        let call = self.lengths.len();
        let index = match &self.mode {
            ChoiceMode::SeededRandom { .. } => {
                let (value, next) = splitmix64_next(self.state);
                self.state = next;
                (value % len as u64) as usize
            }
            ChoiceMode::FixedPath(indices) => {
                let index = *indices
                    .get(call)
                    .ok_or(ChoiceFailure::PathTooShort { call, len: indices.len() })?;
                if index >= len {
                    return Err(ChoiceFailure::IndexOutOfRange { index, len });
                }
                index
            }
            ChoiceMode::Recording { prefix } => match prefix.get(call) {
                Some(&index) if index >= len => return Err(ChoiceFailure::IndexOutOfRange { index, len }),
                Some(&index) => index,
                None => 0,
            },
        };
        self.lengths.push(len);
        self.picks.push(index);
        Ok(index)
    }

    /// List lengths seen so far, one per call.
    pub fn recorded(&self) -> &[usize] {
        &self.lengths
    }

    /// Indices returned so far, one per call.
    pub fn picks(&self) -> &[usize] {
        &self.picks
    }

    pub fn calls(&self) -> usize {
        self.lengths.len()
    }
}
