use crate::error::{Error, Result};

/// Largest sector dimension we are willing to allocate.
pub const MAX_SECTOR_DIM: u128 = 1 << 28;

/// Longest chain representable with one `u64` configuration word.
pub const MAX_SITES: usize = 63;

/// Fixed-magnetization sector of an `L`-site spin-1/2 chain.
///
/// Configurations are stored as bit words with site 0 in the least
/// significant bit and an up spin encoded as 1. They are kept in strictly
/// increasing integer order, so ordinal lookup is a binary search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    sites: usize,
    n_up: usize,
    configs: Vec<u64>,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Enumerates the `binomial(L, n_up)` configurations with exactly `n_up` up
/// spins, in increasing integer order.
pub fn enumerate_sector(sites: usize, n_up: usize) -> Result<SectorBasis> {
    if sites == 0 || sites > MAX_SITES {
        return Err(Error::InvalidArgument(format!(
            "site count must be in 1..={MAX_SITES}, got {sites}"
        )));
    }
    if n_up > sites {
        return Err(Error::InvalidArgument(format!(
            "n_up = {n_up} exceeds site count {sites}"
        )));
    }
    let dim = binomial(sites, n_up);
    if dim > MAX_SECTOR_DIM {
        return Err(Error::Capacity { required: dim });
    }

    let mut configs = Vec::with_capacity(dim as usize);
    if n_up == 0 {
        configs.push(0);
    } else {
        // Gosper's hack: next larger word with the same popcount.
        let limit = 1u64 << sites;
        let mut word = (1u64 << n_up) - 1;
        while word < limit {
            configs.push(word);
            let lowest = word & word.wrapping_neg();
            let ripple = word + lowest;
            word = (((ripple ^ word) >> 2) / lowest) | ripple;
        }
    }
    debug_assert_eq!(configs.len() as u128, dim);

    Ok(SectorBasis {
        sites,
        n_up,
        configs,
    })
}

impl SectorBasis {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn config(&self, ordinal: usize) -> u64 {
        self.configs[ordinal]
    }

    pub fn index_of(&self, config: u64) -> Option<usize> {
        self.configs.binary_search(&config).ok()
    }

    /// Total magnetization 2·n_up − L.
    pub fn magnetization(&self) -> i64 {
        2 * self.n_up as i64 - self.sites as i64
    }

    pub fn same_sector(&self, other: &SectorBasis) -> bool {
        self.sites == other.sites && self.n_up == other.n_up
    }

    pub(crate) fn check_same(&self, other: &SectorBasis) -> Result<()> {
        if self.same_sector(other) {
            Ok(())
        } else {
            Err(Error::BasisMismatch {
                left_sites: self.sites,
                left_up: self.n_up,
                right_sites: other.sites,
                right_up: other.n_up,
            })
        }
    }

    /// Renders a configuration as a string of `0`/`1`, site 0 first.
    pub fn config_string(&self, config: u64) -> String {
        (0..self.sites)
            .map(|site| if config >> site & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Parses a site-0-first `0`/`1` string into a configuration of this
    /// sector.
    pub fn parse_config(&self, text: &str) -> Result<u64> {
        if text.len() != self.sites {
            return Err(Error::InvalidArgument(format!(
                "configuration '{text}' has {} sites, expected {}",
                text.len(),
                self.sites
            )));
        }
        let mut config = 0u64;
        for (site, ch) in text.chars().enumerate() {
            match ch {
                '1' => config |= 1 << site,
                '0' => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "configuration '{text}' must contain only 0 and 1"
                    )))
                }
            }
        }
        if config.count_ones() as usize != self.n_up {
            return Err(Error::InvalidArgument(format!(
                "configuration '{text}' is not in the n_up = {} sector",
                self.n_up
            )));
        }
        Ok(config)
    }
}
