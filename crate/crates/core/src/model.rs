//! Problem instances, topology, file batching, reduce-function assignment and
//! the synthetic map function.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::coding_gain;
use crate::combin::{binom_usize, k_subsets, subset_rank, Subset, SubsetId};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ModelError> {
    Err(ModelError::InvalidParameters(msg.into()))
}

/// Validated parameter bundle.
///
/// `level_profile`, when present, holds the per-level file counts
/// `ã^1..ã^Λ` (files mapped by exactly `j` mappers); otherwise every file is
/// mapped by exactly `computation_load` mappers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceParams")]
pub struct ProblemInstance {
    pub num_mappers: usize,
    pub access_degree: usize,
    pub computation_load: usize,
    pub num_files: usize,
    pub num_functions: usize,
    pub iv_bits: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_profile: Option<Vec<usize>>,
}

/// Unvalidated mirror of [`ProblemInstance`] used for deserialization.
#[derive(Debug, Clone, Deserialize)]
pub struct InstanceParams {
    pub num_mappers: usize,
    pub access_degree: usize,
    pub computation_load: usize,
    pub num_files: usize,
    pub num_functions: usize,
    pub iv_bits: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub level_profile: Option<Vec<usize>>,
}

impl TryFrom<InstanceParams> for ProblemInstance {
    type Error = ModelError;

    fn try_from(p: InstanceParams) -> Result<Self, Self::Error> {
        let inst = ProblemInstance {
            num_mappers: p.num_mappers,
            access_degree: p.access_degree,
            computation_load: p.computation_load,
            num_files: p.num_files,
            num_functions: p.num_functions,
            iv_bits: p.iv_bits,
            seed: p.seed,
            level_profile: p.level_profile,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// One replication level of the file placement: `files_per_batch` files in
/// each of the `C(Λ, level)` batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub level: usize,
    pub files_per_batch: usize,
}

impl ProblemInstance {
    pub fn num_reducers(&self) -> usize {
        binom_usize(self.num_mappers, self.access_degree)
    }

    pub fn functions_per_reducer(&self) -> usize {
        self.num_functions / self.num_reducers()
    }

    /// `η1` for single-level placement; `None` in multi-level mode.
    pub fn files_per_batch(&self) -> Option<usize> {
        match self.level_profile {
            None => Some(self.num_files / binom_usize(self.num_mappers, self.computation_load)),
            Some(_) => None,
        }
    }

    pub fn iv_bytes(&self) -> usize {
        self.iv_bits / 8
    }

    pub fn is_multilevel(&self) -> bool {
        self.level_profile.is_some()
    }

    /// Per-level file counts `ã^1..ã^Λ`.
    pub fn profile(&self) -> Vec<usize> {
        match &self.level_profile {
            Some(p) => p.clone(),
            None => {
                let mut p = vec![0; self.num_mappers];
                p[self.computation_load - 1] = self.num_files;
                p
            }
        }
    }

    /// Non-empty levels in ascending order.
    pub fn levels(&self) -> Vec<Level> {
        self.profile()
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, &a)| Level {
                level: i + 1,
                files_per_batch: a / binom_usize(self.num_mappers, i + 1),
            })
            .collect()
    }

    /// Checks every invariant, including shuffle segment divisibility.
    /// Download divisibility is checked separately by
    /// [`ProblemInstance::download_divisible`].
    pub fn validate(&self) -> Result<(), ModelError> {
        self.validate_structure()?;
        if let Some(msg) = self.shuffle_divisibility_violation() {
            return invalid(msg);
        }
        Ok(())
    }

    fn validate_structure(&self) -> Result<(), ModelError> {
        let (lambda, alpha, r) = (self.num_mappers, self.access_degree, self.computation_load);
        if lambda == 0 {
            return invalid("num_mappers must be positive");
        }
        if alpha == 0 || alpha > lambda {
            return invalid(format!("access_degree must lie in [1..{lambda}], got {alpha}"));
        }
        match &self.level_profile {
            None => {
                let max = lambda - alpha + 1;
                if r == 0 || r > max {
                    return invalid(format!("computation_load must lie in [1..{max}], got {r}"));
                }
                let batches = binom_usize(lambda, r);
                if self.num_files == 0 || !self.num_files.is_multiple_of(batches) {
                    return invalid(format!(
                        "num_files = {} must be a positive multiple of C({lambda},{r}) = {batches}",
                        self.num_files
                    ));
                }
            }
            Some(profile) => {
                if r == 0 || r > lambda {
                    return invalid(format!("computation_load must lie in [1..{lambda}], got {r}"));
                }
                check_profile(lambda, r, self.num_files, profile)?;
            }
        }
        let k = self.num_reducers();
        if self.num_functions == 0 || !self.num_functions.is_multiple_of(k) {
            return invalid(format!(
                "num_functions = {} must be a positive multiple of K = C({lambda},{alpha}) = {k}",
                self.num_functions
            ));
        }
        if self.iv_bits == 0 || !self.iv_bits.is_multiple_of(8) {
            return invalid(format!("iv_bits = {} must be a positive multiple of 8", self.iv_bits));
        }
        Ok(())
    }

    fn shuffle_divisibility_violation(&self) -> Option<String> {
        let (lambda, alpha) = (self.num_mappers, self.access_degree);
        let eta2 = self.functions_per_reducer();
        for lv in self.levels() {
            if lv.level > lambda - alpha {
                continue;
            }
            let gain = coding_gain(alpha, lv.level)
                .to_usize()
                .expect("coding gain fits in usize");
            let symbol_bytes = eta2 * lv.files_per_batch * self.iv_bytes();
            if !symbol_bytes.is_multiple_of(gain) {
                return Some(format!(
                    "symbol of {symbol_bytes} bytes (level {}) does not split into {gain} equal byte segments",
                    lv.level
                ));
            }
        }
        None
    }

    /// True when every mapper-to-reducer delivery group at every level splits
    /// into equal whole-byte parts.
    pub fn download_divisible(&self) -> bool {
        let (lambda, alpha) = (self.num_mappers, self.access_degree);
        self.levels().iter().all(|lv| {
            (2..=alpha).all(|i| {
                if lv.level < i {
                    return true;
                }
                let batches = crate::combin::binom(lambda as i64 - alpha as i64, lv.level as i64 - i as i64)
                    .to_usize()
                    .expect("batch count fits in usize");
                let group_bytes = self.num_functions * self.iv_bytes() * lv.files_per_batch * batches;
                group_bytes.is_multiple_of(i)
            })
        })
    }

    /// Smallest multiple of 8 for `iv_bits` satisfying shuffle and download
    /// divisibility with the current file and function counts.
    fn auto_iv_bits(&mut self) {
        self.iv_bits = 8;
        while self.shuffle_divisibility_violation().is_some() || !self.download_divisible() {
            self.iv_bits += 8;
        }
    }
}

fn check_profile(lambda: usize, r: usize, num_files: usize, profile: &[usize]) -> Result<(), ModelError> {
    if profile.len() != lambda {
        return invalid(format!(
            "level profile must have {lambda} entries, got {}",
            profile.len()
        ));
    }
    let total: usize = profile.iter().sum();
    if total == 0 || total != num_files {
        return invalid(format!(
            "level profile sums to {total} files, expected num_files = {num_files} > 0"
        ));
    }
    for (i, &a) in profile.iter().enumerate() {
        let batches = binom_usize(lambda, i + 1);
        if a % batches != 0 {
            return invalid(format!(
                "level {} holds {a} files, not a multiple of C({lambda},{}) = {batches}",
                i + 1,
                i + 1
            ));
        }
    }
    let mapped: usize = profile.iter().enumerate().map(|(i, a)| (i + 1) * a).sum();
    if mapped > r * num_files {
        return invalid(format!("computation load {mapped}/{num_files} exceeds r = {r}"));
    }
    Ok(())
}

/// Builds a single-level instance. Omitted values are auto-selected: one file
/// per batch, one function per reducer, and the smallest `iv_bits` that makes
/// every shuffle segment and delivery part a whole number of bytes.
pub fn build_instance(
    lambda: usize,
    alpha: usize,
    r: usize,
    num_files: Option<usize>,
    num_functions: Option<usize>,
    iv_bits: Option<usize>,
    seed: u64,
) -> Result<ProblemInstance, ModelError> {
    if lambda == 0 || alpha == 0 || alpha > lambda {
        return invalid(format!(
            "need 1 <= alpha <= lambda, got lambda = {lambda}, alpha = {alpha}"
        ));
    }
    if r == 0 || r > lambda - alpha + 1 {
        return invalid(format!(
            "computation_load must lie in [1..{}], got {r}",
            lambda - alpha + 1
        ));
    }
    let mut inst = ProblemInstance {
        num_mappers: lambda,
        access_degree: alpha,
        computation_load: r,
        num_files: num_files.unwrap_or_else(|| binom_usize(lambda, r)),
        num_functions: num_functions.unwrap_or_else(|| binom_usize(lambda, alpha)),
        iv_bits: iv_bits.unwrap_or(8),
        seed,
        level_profile: None,
    };
    if iv_bits.is_none() {
        inst.validate_structure()?;
        inst.auto_iv_bits();
    }
    inst.validate()?;
    Ok(inst)
}

/// Builds a multi-level instance from per-level file counts `ã^1..ã^Λ`.
pub fn build_multilevel_instance(
    lambda: usize,
    alpha: usize,
    r: usize,
    profile: Vec<usize>,
    num_functions: Option<usize>,
    iv_bits: Option<usize>,
    seed: u64,
) -> Result<ProblemInstance, ModelError> {
    if lambda == 0 || alpha == 0 || alpha > lambda {
        return invalid(format!(
            "need 1 <= alpha <= lambda, got lambda = {lambda}, alpha = {alpha}"
        ));
    }
    let mut inst = ProblemInstance {
        num_mappers: lambda,
        access_degree: alpha,
        computation_load: r,
        num_files: profile.iter().sum(),
        num_functions: num_functions.unwrap_or_else(|| binom_usize(lambda, alpha)),
        iv_bits: iv_bits.unwrap_or(8),
        seed,
        level_profile: Some(profile),
    };
    if iv_bits.is_none() {
        inst.validate_structure()?;
        inst.auto_iv_bits();
    }
    inst.validate()?;
    Ok(inst)
}

/// Smallest file profile realizing the fractions `x_j` exactly:
/// `ã^j = x_j N` with `ã^j` a multiple of `C(Λ, j)`.
pub fn realize_profile(lambda: usize, x: &[Rational]) -> Result<Vec<usize>, ModelError> {
    if x.len() != lambda {
        return invalid(format!("expected {lambda} level fractions, got {}", x.len()));
    }
    let mut n = BigInt::from(1);
    for (i, xj) in x.iter().enumerate() {
        if xj.is_zero() {
            continue;
        }
        if *xj < Rational::zero() {
            return invalid("level fractions must be non-negative");
        }
        let c = BigInt::from(binom_usize(lambda, i + 1));
        let need = xj.denom() * &c / xj.numer().gcd(&c);
        n = n.lcm(&need);
    }
    x.iter()
        .map(|xj| {
            let count = xj * Rational::from_integer(n.clone());
            if !count.is_integer() {
                return invalid("profile fraction not realizable");
            }
            count
                .to_integer()
                .to_usize()
                .ok_or_else(|| ModelError::InvalidParameters("file count overflow".into()))
        })
        .collect()
}

/// One reducer per α-subset of mappers, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub num_mappers: usize,
    pub reducers: Vec<SubsetId>,
}

impl Topology {
    pub fn rank_of(&self, reducer: &Subset) -> Option<usize> {
        if reducer.len() != self.reducers.first()?.members.len() {
            return None;
        }
        subset_rank(reducer, self.num_mappers).ok().map(|r| r as usize)
    }
}

pub fn build_topology(instance: &ProblemInstance) -> Topology {
    Topology {
        num_mappers: instance.num_mappers,
        reducers: k_subsets(instance.num_mappers, instance.access_degree)
            .expect("validated instance has 1 <= alpha <= lambda"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub label: SubsetId,
    pub files: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelBatches {
    pub level: usize,
    pub files_per_batch: usize,
    /// One batch per `level`-subset of mappers, lexicographic.
    pub batches: Vec<Batch>,
}

/// Partition of the files into labelled batches; mapper `λ` maps every batch
/// whose label contains `λ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileAssignment {
    pub num_mappers: usize,
    pub num_files: usize,
    pub levels: Vec<LevelBatches>,
    pub profile: Vec<usize>,
}

impl FileAssignment {
    pub fn level(&self, level: usize) -> Option<&LevelBatches> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub fn batches(&self) -> impl Iterator<Item = (usize, &Batch)> {
        self.levels
            .iter()
            .flat_map(|l| l.batches.iter().map(move |b| (l.level, b)))
    }

    /// Files mapped by mapper `lambda` (`M_λ`), ascending.
    pub fn mapper_files(&self, lambda: usize) -> Vec<usize> {
        let mut files: Vec<usize> = self
            .batches()
            .filter(|(_, b)| b.label.members.contains(lambda))
            .flat_map(|(_, b)| b.files.iter().copied())
            .collect();
        files.sort_unstable();
        files
    }

    /// Files reachable by reducer `u` through its mappers (`M_U`), ascending.
    pub fn reducer_files(&self, u: &Subset) -> Vec<usize> {
        let mut files: Vec<usize> = self
            .batches()
            .filter(|(_, b)| !b.label.members.is_disjoint(u))
            .flat_map(|(_, b)| b.files.iter().copied())
            .collect();
        files.sort_unstable();
        files
    }

    /// `Σ_λ |M_λ| / N`.
    pub fn computation_load(&self) -> Rational {
        let mapped: usize = (1..=self.num_mappers).map(|l| self.mapper_files(l).len()).sum();
        Rational::new(BigInt::from(mapped), BigInt::from(self.num_files))
    }
}

fn fill_levels(lambda: usize, profile: &[usize]) -> Vec<LevelBatches> {
    let mut next = 1usize;
    let mut levels = Vec::new();
    for (i, &count) in profile.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let level = i + 1;
        let labels = k_subsets(lambda, level).expect("1 <= level <= lambda");
        let per = count / labels.len();
        let batches = labels
            .into_iter()
            .map(|label| {
                let files = (next..next + per).collect();
                next += per;
                Batch { label, files }
            })
            .collect();
        levels.push(LevelBatches {
            level,
            files_per_batch: per,
            batches,
        });
    }
    levels
}

/// Splits files `1..N` consecutively into `C(Λ, r)` batches of `η1`, in
/// lexicographic label order.
pub fn assign_files_single(instance: &ProblemInstance) -> FileAssignment {
    let lambda = instance.num_mappers;
    let mut profile = vec![0; lambda];
    profile[instance.computation_load - 1] = instance.num_files;
    FileAssignment {
        num_mappers: lambda,
        num_files: instance.num_files,
        levels: fill_levels(lambda, &profile),
        profile,
    }
}

/// Multi-level placement: level `j` holds `ã^j` files split into `C(Λ, j)`
/// batches of `η_j`.
pub fn assign_files_multilevel(instance: &ProblemInstance, profile: &[usize]) -> Result<FileAssignment, ModelError> {
    let lambda = instance.num_mappers;
    check_profile(lambda, instance.computation_load, instance.num_files, profile)?;
    Ok(FileAssignment {
        num_mappers: lambda,
        num_files: instance.num_files,
        levels: fill_levels(lambda, profile),
        profile: profile.to_vec(),
    })
}

/// Placement matching the instance's mode.
pub fn assign_files(instance: &ProblemInstance) -> Result<FileAssignment, ModelError> {
    match &instance.level_profile {
        None => Ok(assign_files_single(instance)),
        Some(p) => assign_files_multilevel(instance, p),
    }
}

/// `W_U` for every reducer, indexed by reducer rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReduceAssignment {
    pub functions_of: Vec<(SubsetId, Vec<usize>)>,
}

impl ReduceAssignment {
    pub fn functions(&self, rank: usize) -> &[usize] {
        &self.functions_of[rank].1
    }
}

/// Reducer of rank `ρ` gets functions `ρη2 + 1 ..= (ρ + 1)η2`.
pub fn assign_reduce_functions(instance: &ProblemInstance, topology: &Topology) -> ReduceAssignment {
    let eta2 = instance.functions_per_reducer();
    ReduceAssignment {
        functions_of: topology
            .reducers
            .iter()
            .map(|u| {
                let start = u.rank as usize * eta2;
                (u.clone(), (start + 1..=start + eta2).collect())
            })
            .collect(),
    }
}

/// Synthetic map function: `T/8` bytes of SHA-256 in counter mode keyed by
/// `(seed, q, n)`.
pub fn map_iv(seed: u64, q: usize, n: usize, iv_bits: usize) -> Vec<u8> {
    let len = iv_bits / 8;
    let mut out = Vec::with_capacity(len + 32);
    let mut counter = 0u64;
    while out.len() < len {
        let mut h = Sha256::new();
        h.update(b"madc-iv");
        h.update(seed.to_le_bytes());
        h.update((q as u64).to_le_bytes());
        h.update((n as u64).to_le_bytes());
        h.update(counter.to_le_bytes());
        out.extend_from_slice(&h.finalize());
        counter += 1;
    }
    out.truncate(len);
    out
}

/// All intermediate values `v_{q,n}`, each exactly `T/8` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IvStore {
    num_functions: usize,
    num_files: usize,
    iv_bytes: usize,
    data: Vec<u8>,
}

impl IvStore {
    /// Assembles a store from blocks laid out function-major
    /// (`q = 1..Q`, then `n = 1..N`).
    pub fn from_blocks(num_functions: usize, num_files: usize, iv_bytes: usize, data: Vec<u8>) -> Self {
        assert_eq!(
            data.len(),
            num_functions * num_files * iv_bytes,
            "IV store size mismatch"
        );
        IvStore {
            num_functions,
            num_files,
            iv_bytes,
            data,
        }
    }

    pub fn num_functions(&self) -> usize {
        self.num_functions
    }

    pub fn num_files(&self) -> usize {
        self.num_files
    }

    pub fn iv_bytes(&self) -> usize {
        self.iv_bytes
    }

    /// `v_{q,n}` with 1-based indices.
    pub fn get(&self, q: usize, n: usize) -> &[u8] {
        assert!(q >= 1 && q <= self.num_functions && n >= 1 && n <= self.num_files);
        let start = ((q - 1) * self.num_files + (n - 1)) * self.iv_bytes;
        &self.data[start..start + self.iv_bytes]
    }
}
