//! Map, coded shuffle and decode.
//!
//! Reducer `U` broadcasts, for every `S ⊆ [Λ]∖U` of the level size, the XOR of
//! the segments `U_{W_R, (S∪U)∖R, U}` over all `α`-subsets `R ≠ U` of `S∪U`.
//! A reducer missing batch `T1` recovers segment `T2` of its symbol from
//! entry `S = (U∪T1)∖T2` of `X_{T2}` after cancelling every other term with
//! values it already holds. Multi-level placements run the scheme once per
//! level.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::coding_gain;
use crate::combin::{relative_rank, subset_rank, Subset, SubsetId};
use crate::model::{
    assign_files, assign_reduce_functions, build_topology, map_iv, FileAssignment, IvStore, ModelError,
    ProblemInstance, ReduceAssignment, Topology,
};
use crate::Rational;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("reducer {reducer} has no access to v[{q},{n}]")]
    MissingIv { reducer: Subset, q: usize, n: usize },
    #[error("decode failure at reducer {reducer}: {reason}")]
    DecodeFailure { reducer: Subset, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Everything fixed before the map phase: instance, topology, file placement
/// and reduce-function assignment.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub instance: ProblemInstance,
    pub topology: Topology,
    pub files: FileAssignment,
    pub functions: ReduceAssignment,
}

impl Deployment {
    pub fn new(instance: ProblemInstance) -> Result<Self, EngineError> {
        instance.validate()?;
        let topology = build_topology(&instance);
        let files = assign_files(&instance)?;
        let functions = assign_reduce_functions(&instance, &topology);
        Ok(Deployment {
            instance,
            topology,
            files,
            functions,
        })
    }

    fn reducer_rank(&self, reducer: &Subset) -> usize {
        subset_rank(reducer, self.instance.num_mappers).expect("reducer is a valid subset") as usize
    }

    fn batch_files(&self, level: usize, label: &Subset) -> &[usize] {
        let lv = self.files.level(level).expect("level present in placement");
        let rank = subset_rank(label, self.instance.num_mappers).expect("valid batch label") as usize;
        &lv.batches[rank].files
    }

    fn gain(&self, level: usize) -> usize {
        coding_gain(self.instance.access_degree, level)
            .to_usize()
            .expect("coding gain fits in usize")
    }

    /// Levels on which some reducer misses values, i.e. `j <= Λ - α`.
    fn shuffle_levels(&self) -> Vec<usize> {
        let limit = self.instance.num_mappers - self.instance.access_degree;
        self.files
            .levels
            .iter()
            .map(|l| l.level)
            .filter(|&j| j <= limit)
            .collect()
    }
}

/// Read access to intermediate values from one reducer's point of view.
pub trait IvView {
    fn reducer(&self) -> &Subset;
    fn iv(&self, q: usize, n: usize) -> Result<&[u8], EngineError>;
}

/// The slice of the global store a reducer reaches through its mappers.
#[derive(Debug, Clone)]
pub struct ReducerView<'a> {
    reducer: Subset,
    store: &'a IvStore,
    accessible: Vec<bool>,
}

impl<'a> ReducerView<'a> {
    pub fn new(dep: &Deployment, store: &'a IvStore, reducer: &Subset) -> Self {
        let mut accessible = vec![false; dep.instance.num_files];
        for n in dep.files.reducer_files(reducer) {
            accessible[n - 1] = true;
        }
        ReducerView {
            reducer: reducer.clone(),
            store,
            accessible,
        }
    }

    pub fn len(&self) -> usize {
        self.accessible.iter().filter(|&&a| a).count() * self.store.num_functions()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl IvView for ReducerView<'_> {
    fn reducer(&self) -> &Subset {
        &self.reducer
    }

    fn iv(&self, q: usize, n: usize) -> Result<&[u8], EngineError> {
        if n == 0 || n > self.accessible.len() || !self.accessible[n - 1] {
            return Err(EngineError::MissingIv {
                reducer: self.reducer.clone(),
                q,
                n,
            });
        }
        Ok(self.store.get(q, n))
    }
}

/// Computes every intermediate value. Mapper `λ`'s own values are the
/// restriction to `M_λ`; see [`mapper_view`].
pub fn run_map(instance: &ProblemInstance, files: &FileAssignment) -> IvStore {
    let (q_total, n_total, t) = (instance.num_functions, files.num_files, instance.iv_bits);
    let data: Vec<u8> = (1..=q_total)
        .into_par_iter()
        .flat_map_iter(|q| (1..=n_total).flat_map(move |n| map_iv(instance.seed, q, n, t)))
        .collect();
    IvStore::from_blocks(q_total, n_total, instance.iv_bytes(), data)
}

/// `(q, n)` pairs computed by mapper `lambda`.
pub fn mapper_view(instance: &ProblemInstance, files: &FileAssignment, lambda: usize) -> Vec<(usize, usize)> {
    let mine = files.mapper_files(lambda);
    (1..=instance.num_functions)
        .flat_map(|q| mine.iter().map(move |&n| (q, n)))
        .collect()
}

/// Address of one segment `U_{W_R, T1, T2}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentLabel {
    /// Reducer whose functions the symbol serves (`R`).
    pub owner: Subset,
    /// Batch label (`T1`).
    pub batch: Subset,
    /// Segment label (`T2`), also the reducer that transmits it.
    pub segment: Subset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEntry {
    /// `S`, with `|S|` equal to the level.
    pub label: Subset,
    /// XORed terms in lexicographic order of their owner `R`.
    pub terms: Vec<SegmentLabel>,
    pub payload: Vec<u8>,
}

/// `X_U` for one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MulticastMessage {
    pub sender: SubsetId,
    pub level: usize,
    pub entries: Vec<MessageEntry>,
}

impl MulticastMessage {
    /// `ℓ_U`.
    pub fn bits(&self) -> usize {
        self.entries.iter().map(|e| e.payload.len() * 8).sum()
    }
}

/// One mapper-to-reducer transfer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownloadRecord {
    pub mapper: usize,
    pub reducer: Subset,
    pub bits: usize,
    pub label: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub shuffle_messages: Vec<MulticastMessage>,
    pub download_records: Vec<DownloadRecord>,
}

impl Transcript {
    pub fn shuffle_bits(&self) -> usize {
        self.shuffle_messages.iter().map(MulticastMessage::bits).sum()
    }

    pub fn download_bits(&self) -> usize {
        self.download_records.iter().map(|r| r.bits).sum()
    }

    /// Recorded lengths agree with attached payloads.
    pub fn is_consistent(&self) -> bool {
        self.download_records.iter().all(|r| r.bits == r.payload.len() * 8)
    }

    fn index(&self) -> HashMap<(usize, &Subset), &MulticastMessage> {
        self.shuffle_messages
            .iter()
            .map(|m| ((m.level, &m.sender.members), m))
            .collect()
    }

    /// Payload-free summary for cross-implementation comparison.
    pub fn summary(&self) -> TranscriptSummary {
        TranscriptSummary {
            messages: self
                .shuffle_messages
                .iter()
                .map(|m| MessageSummary {
                    sender: m.sender.members.clone(),
                    level: m.level,
                    entries: m.entries.iter().map(|e| e.label.clone()).collect(),
                    bits: m.bits(),
                    payload_sha256: sha256_hex(m.entries.iter().map(|e| e.payload.as_slice())),
                })
                .collect(),
            downloads: self
                .download_records
                .iter()
                .map(|r| DownloadSummary {
                    mapper: r.mapper,
                    reducer: r.reducer.clone(),
                    label: r.label.clone(),
                    bits: r.bits,
                    payload_sha256: sha256_hex(std::iter::once(r.payload.as_slice())),
                })
                .collect(),
            total_shuffle_bits: self.shuffle_bits(),
            total_download_bits: self.download_bits(),
        }
    }
}

fn sha256_hex<'a>(parts: impl Iterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSummary {
    pub sender: Subset,
    pub level: usize,
    pub entries: Vec<Subset>,
    pub bits: usize,
    pub payload_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownloadSummary {
    pub mapper: usize,
    pub reducer: Subset,
    pub label: String,
    pub bits: usize,
    pub payload_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptSummary {
    pub messages: Vec<MessageSummary>,
    pub downloads: Vec<DownloadSummary>,
    pub total_shuffle_bits: usize,
    pub total_download_bits: usize,
}

/// Builds symbols from a view, memoized per `(R, T1)`.
struct SymbolCache<'d, V> {
    dep: &'d Deployment,
    view: V,
    level: usize,
    cache: HashMap<(usize, Subset), Vec<u8>>,
}

impl<'d, V: IvView> SymbolCache<'d, V> {
    fn new(dep: &'d Deployment, view: V, level: usize) -> Self {
        SymbolCache {
            dep,
            view,
            level,
            cache: HashMap::new(),
        }
    }

    /// `U_{W_R, T1}`: values for `q ∈ W_R` (outer) and `n ∈ B_{T1}` (inner).
    fn symbol(&mut self, owner: &Subset, batch: &Subset) -> Result<&[u8], EngineError> {
        let rank = self.dep.reducer_rank(owner);
        let key = (rank, batch.clone());
        if !self.cache.contains_key(&key) {
            let files = self.dep.batch_files(self.level, batch);
            let funcs = self.dep.functions.functions(rank);
            let mut buf = Vec::with_capacity(funcs.len() * files.len() * self.dep.instance.iv_bytes());
            for &q in funcs {
                for &n in files {
                    buf.extend_from_slice(self.view.iv(q, n)?);
                }
            }
            self.cache.insert(key.clone(), buf);
        }
        Ok(&self.cache[&key])
    }

    fn segment(&mut self, label: &SegmentLabel) -> Result<Vec<u8>, EngineError> {
        let gain = self.dep.gain(self.level);
        let idx = segment_index(&label.owner, &label.batch, &label.segment);
        let sym = self.symbol(&label.owner, &label.batch)?;
        let len = sym.len() / gain;
        Ok(sym[idx * len..(idx + 1) * len].to_vec())
    }
}

/// Position of `T2` among the `α`-subsets of `R ∪ T1` other than `R`, in
/// lexicographic order.
pub fn segment_index(owner: &Subset, batch: &Subset, segment: &Subset) -> usize {
    let ground = owner.union(batch);
    let seg_rank = relative_rank(segment, &ground).expect("segment label inside R ∪ T1");
    let own_rank = relative_rank(owner, &ground).expect("owner inside R ∪ T1");
    debug_assert_ne!(seg_rank, own_rank);
    (seg_rank - u64::from(own_rank < seg_rank)) as usize
}

fn xor_into(acc: &mut [u8], other: &[u8]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a ^= b;
    }
}

/// Builds `X_U` for one level from the values reducer `U` can reach.
pub fn encode_multicast<V: IvView>(
    dep: &Deployment,
    sender: &SubsetId,
    level: usize,
    view: V,
) -> Result<MulticastMessage, EngineError> {
    let lambda = dep.instance.num_mappers;
    let alpha = dep.instance.access_degree;
    let u = &sender.members;
    let outside = Subset::full(lambda).difference(u);
    let mut symbols = SymbolCache::new(dep, view, level);
    let mut entries = Vec::new();
    for s in outside.k_subsets(level) {
        let su = s.union(u);
        let mut payload: Option<Vec<u8>> = None;
        let mut terms = Vec::new();
        for owner in su.k_subsets(alpha) {
            if &owner == u {
                continue;
            }
            let label = SegmentLabel {
                batch: su.difference(&owner),
                owner,
                segment: u.clone(),
            };
            let seg = symbols.segment(&label)?;
            match payload.as_mut() {
                Some(acc) => xor_into(acc, &seg),
                None => payload = Some(seg),
            }
            terms.push(label);
        }
        entries.push(MessageEntry {
            label: s,
            terms,
            payload: payload.unwrap_or_default(),
        });
    }
    Ok(MulticastMessage {
        sender: sender.clone(),
        level,
        entries,
    })
}

/// Shuffle phase: every reducer's message for every level on which values
/// are missing, in (level, reducer) lexicographic order.
pub fn run_shuffle(dep: &Deployment, store: &IvStore) -> Result<Transcript, EngineError> {
    let mut shuffle_messages = Vec::new();
    for level in dep.shuffle_levels() {
        let msgs: Vec<MulticastMessage> = dep
            .topology
            .reducers
            .par_iter()
            .map(|u| encode_multicast(dep, u, level, ReducerView::new(dep, store, &u.members)))
            .collect::<Result<_, _>>()?;
        shuffle_messages.extend(msgs);
    }
    Ok(Transcript {
        shuffle_messages,
        download_records: Vec::new(),
    })
}

/// Values a reducer ends up with: `v_{q,n}` for `q ∈ W_U` and every `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedValues {
    pub reducer: Subset,
    pub values: BTreeMap<(usize, usize), Vec<u8>>,
}

/// Reduce-phase decoding for reducer `U`.
pub fn decode<V: IvView>(
    dep: &Deployment,
    reducer: &Subset,
    transcript: &Transcript,
    view: V,
) -> Result<DecodedValues, EngineError> {
    let lambda = dep.instance.num_mappers;
    let alpha = dep.instance.access_degree;
    let rank = dep.reducer_rank(reducer);
    let funcs = dep.functions.functions(rank).to_vec();
    let iv_bytes = dep.instance.iv_bytes();
    let index = transcript.index();
    let fail = |reason: String| EngineError::DecodeFailure {
        reducer: reducer.clone(),
        reason,
    };

    let mut values = BTreeMap::new();
    for lv in &dep.files.levels {
        let level = lv.level;
        let mut symbols = SymbolCache::new(dep, &view, level);
        for batch in &lv.batches {
            let t1 = &batch.label.members;
            if !t1.is_disjoint(reducer) {
                for &q in &funcs {
                    for &n in &batch.files {
                        values.insert((q, n), symbols.view.iv(q, n)?.to_vec());
                    }
                }
                continue;
            }
            let ut1 = reducer.union(t1);
            let mut symbol = Vec::with_capacity(funcs.len() * batch.files.len() * iv_bytes);
            for t2 in ut1.k_subsets(alpha) {
                if &t2 == reducer {
                    continue;
                }
                let msg = index
                    .get(&(level, &t2))
                    .ok_or_else(|| fail(format!("no level-{level} message from {t2}")))?;
                let s = ut1.difference(&t2);
                let outside = Subset::full(lambda).difference(&t2);
                let pos = relative_rank(&s, &outside)
                    .ok_or_else(|| fail(format!("entry {s} not addressable in X_{t2}")))?
                    as usize;
                let entry = msg
                    .entries
                    .get(pos)
                    .ok_or_else(|| fail(format!("X_{t2} has no entry {pos}")))?;
                if entry.label != s {
                    return Err(fail(format!(
                        "X_{t2} entry {pos} is labelled {}, expected {s}",
                        entry.label
                    )));
                }
                let mut seg = entry.payload.clone();
                for owner in ut1.k_subsets(alpha) {
                    if owner == t2 || &owner == reducer {
                        continue;
                    }
                    let label = SegmentLabel {
                        batch: ut1.difference(&owner),
                        owner,
                        segment: t2.clone(),
                    };
                    let interference = symbols.segment(&label)?;
                    if interference.len() != seg.len() {
                        return Err(fail(format!("segment length mismatch in X_{t2}")));
                    }
                    xor_into(&mut seg, &interference);
                }
                symbol.extend_from_slice(&seg);
            }
            if symbol.len() != funcs.len() * batch.files.len() * iv_bytes {
                return Err(fail(format!(
                    "reassembled symbol for batch {t1} has {} bytes",
                    symbol.len()
                )));
            }
            let mut chunks = symbol.chunks_exact(iv_bytes);
            for &q in &funcs {
                for &n in &batch.files {
                    values.insert((q, n), chunks.next().expect("length checked").to_vec());
                }
            }
        }
    }
    Ok(DecodedValues {
        reducer: reducer.clone(),
        values,
    })
}

impl<V: IvView> IvView for &V {
    fn reducer(&self) -> &Subset {
        (**self).reducer()
    }

    fn iv(&self, q: usize, n: usize) -> Result<&[u8], EngineError> {
        (**self).iv(q, n)
    }
}

/// Compares decoded values against the oracle store.
pub fn verify_decoded(dep: &Deployment, store: &IvStore, decoded: &DecodedValues) -> Result<(), EngineError> {
    let rank = dep.reducer_rank(&decoded.reducer);
    let fail = |reason: String| EngineError::DecodeFailure {
        reducer: decoded.reducer.clone(),
        reason,
    };
    let funcs = dep.functions.functions(rank);
    if decoded.values.len() != funcs.len() * dep.instance.num_files {
        return Err(fail(format!(
            "recovered {} values, expected {}",
            decoded.values.len(),
            funcs.len() * dep.instance.num_files
        )));
    }
    for &q in funcs {
        for n in 1..=dep.instance.num_files {
            match decoded.values.get(&(q, n)) {
                Some(v) if v.as_slice() == store.get(q, n) => {}
                Some(_) => return Err(fail(format!("v[{q},{n}] differs from the oracle"))),
                None => return Err(fail(format!("v[{q},{n}] not recovered"))),
            }
        }
    }
    Ok(())
}

/// Decodes at every reducer and checks each against the oracle.
pub fn decode_all(dep: &Deployment, store: &IvStore, transcript: &Transcript) -> Result<(), EngineError> {
    dep.topology.reducers.par_iter().try_for_each(|u| {
        let view = ReducerView::new(dep, store, &u.members);
        let decoded = decode(dep, &u.members, transcript, &view)?;
        verify_decoded(dep, store, &decoded)
    })
}

/// `L = Σ ℓ_U / (QNT)`.
pub fn measure_comm_load(transcript: &Transcript, instance: &ProblemInstance) -> Rational {
    let denom = instance.num_functions * instance.num_files * instance.iv_bits;
    Rational::new(BigInt::from(transcript.shuffle_bits()), BigInt::from(denom))
}
