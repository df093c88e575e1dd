//! Prepared window datasets: fold assignment, optional augmentation of
//! training recordings, and the binary `.ibwd` file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signalgen::{resample, superpose_augment, AnnotatedSignal};
use crate::windowing::{
    extract_windows, make_folds, FoldSplit, Partition, WindowConfig, WindowSample, TARGET_COUNT,
};

/// Set on the subject id of windows cut from an augmented recording.
pub const AUGMENTED_FLAG: u32 = 0x8000_0000;

const MAGIC: &[u8; 4] = b"IBWD";
const VERSION: u16 = 1;

pub fn is_augmented(subject_id: u32) -> bool {
    subject_id & AUGMENTED_FLAG != 0
}

/// Id of the recording a (possibly augmented) window came from.
pub fn source_subject(subject_id: u32) -> u32 {
    subject_id & !AUGMENTED_FLAG
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub window_len: usize,
    pub seed: u64,
    pub split: FoldSplit,
    /// Source subjects whose augmented copies are in the training set.
    pub augmented: Vec<u32>,
    pub records: Vec<WindowSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareConfig {
    pub fold_id: u32,
    pub augment: bool,
    pub seed: u64,
    pub window: WindowConfig,
}

impl PrepareConfig {
    pub fn new(fold_id: u32, augment: bool, seed: u64) -> Self {
        PrepareConfig {
            fold_id,
            augment,
            seed,
            window: WindowConfig::default(),
        }
    }
}

/// Windows every recording, assigning subjects to partitions with
/// [`make_folds`]. With `augment`, eligible training recordings also
/// contribute superposed copies.
pub fn prepare(signals: &[AnnotatedSignal], config: &PrepareConfig) -> Result<PreparedDataset> {
    config.window.validate()?;
    let mut ids: Vec<u32> = signals.iter().map(AnnotatedSignal::subject_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::param("duplicate subject ids among input signals"));
    }
    if ids.iter().any(|&id| is_augmented(id)) {
        return Err(Error::param("subject ids must be below 2^31"));
    }
    if ids.len() < 3 {
        return Err(Error::param(format!(
            "a fold needs at least 3 subjects, got {}",
            ids.len()
        )));
    }
    let split = make_folds(&ids, config.fold_id, config.seed)?;

    let mut sources: Vec<AnnotatedSignal> = signals
        .iter()
        .map(|s| {
            if s.fs() == config.window.fs {
                Ok(s.clone())
            } else {
                resample(s, config.window.fs)
            }
        })
        .collect::<Result<_>>()?;
    sources.sort_by_key(AnnotatedSignal::subject_id);

    let mut augmented = Vec::new();
    if config.augment {
        let mut extra = Vec::new();
        for s in sources
            .iter()
            .filter(|s| split.train.contains(&s.subject_id()))
        {
            match superpose_augment(s, config.seed) {
                Ok(a) => {
                    augmented.push(s.subject_id());
                    extra.push(a.with_subject_id(s.subject_id() | AUGMENTED_FLAG));
                }
                Err(Error::AugmentationNotApplicable(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if extra.is_empty() {
            warn!("no training recording qualifies for augmentation");
        } else {
            info!("augmenting training subjects {augmented:?}");
        }
        sources.extend(extra);
    }

    let per_signal: Vec<Vec<WindowSample>> = sources
        .par_iter()
        .map(|s| match extract_windows(s, &config.window, config.seed) {
            Ok(w) => Ok(w),
            Err(Error::EmptyWindowSet(msg)) => {
                warn!("{msg}; skipped");
                Ok(Vec::new())
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    Ok(PreparedDataset {
        window_len: config.window.window_len,
        seed: config.seed,
        split,
        augmented,
        records: per_signal.into_iter().flatten().collect(),
    })
}

impl PreparedDataset {
    pub fn partition_of(&self, subject_id: u32) -> Option<Partition> {
        if is_augmented(subject_id) {
            let src = source_subject(subject_id);
            return self.augmented.contains(&src).then_some(Partition::Train);
        }
        self.split.partition_of(subject_id)
    }

    pub fn partition(&self, partition: Partition) -> Vec<&WindowSample> {
        self.records
            .iter()
            .filter(|r| self.partition_of(r.subject_id) == Some(partition))
            .collect()
    }

    pub fn count(&self, partition: Partition) -> usize {
        self.records
            .iter()
            .filter(|r| self.partition_of(r.subject_id) == Some(partition))
            .count()
    }

    /// Every record belongs to a partition, and only training subjects
    /// were augmented.
    pub fn audit(&self) -> Result<()> {
        for &a in &self.augmented {
            if !self.split.train.contains(&a) {
                return Err(Error::param(format!(
                    "subject {a} is augmented but not in the training partition"
                )));
            }
        }
        for r in &self.records {
            if self.partition_of(r.subject_id).is_none() {
                return Err(Error::param(format!(
                    "record of subject {} belongs to no partition",
                    source_subject(r.subject_id)
                )));
            }
            if r.input.len() != self.window_len {
                return Err(Error::param("record length differs from the header"));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.window_len as u32).to_le_bytes())?;
        w.write_all(&(TARGET_COUNT as u32).to_le_bytes())?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        w.write_all(&self.split.fold_id.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for list in [
            &self.split.train,
            &self.split.val,
            &self.split.test,
            &self.augmented,
        ] {
            w.write_all(&(list.len() as u32).to_le_bytes())?;
            for id in list.iter() {
                w.write_all(&id.to_le_bytes())?;
            }
        }
        let mut buf = Vec::with_capacity(10 + 4 * (self.window_len + TARGET_COUNT));
        for r in &self.records {
            buf.clear();
            buf.extend_from_slice(&r.subject_id.to_le_bytes());
            buf.extend_from_slice(&r.first_beat_index.to_le_bytes());
            buf.extend_from_slice(&r.pad_left.to_le_bytes());
            for v in r.input.iter().chain(&r.targets) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path)?);
        let bad = |reason: &str| Error::format(path, reason);
        let eof = |e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(path, "truncated file")
            } else {
                Error::Io(e)
            }
        };
        let mut read = |n: usize| -> Result<Vec<u8>> {
            let mut b = vec![0u8; n];
            r.read_exact(&mut b).map_err(eof)?;
            Ok(b)
        };
        if read(4)? != MAGIC {
            return Err(bad("not a prepared dataset (bad magic)"));
        }
        let u16_of = |b: &[u8]| u16::from_le_bytes(b.try_into().unwrap());
        let u32_of = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let u64_of = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
        let version = u16_of(&read(2)?);
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let window_len = u32_of(&read(4)?) as usize;
        let targets = u32_of(&read(4)?) as usize;
        if targets != TARGET_COUNT {
            return Err(bad(&format!(
                "expected {TARGET_COUNT} targets, header says {targets}"
            )));
        }
        let count = u64_of(&read(8)?);
        let fold_id = u32_of(&read(4)?);
        let seed = u64_of(&read(8)?);
        let mut lists = Vec::with_capacity(4);
        for _ in 0..4 {
            let n = u32_of(&read(4)?) as usize;
            let raw = read(4 * n)?;
            lists.push(raw.chunks_exact(4).map(u32_of).collect::<Vec<u32>>());
        }
        let augmented = lists.pop().unwrap();
        let test = lists.pop().unwrap();
        let val = lists.pop().unwrap();
        let train = lists.pop().unwrap();

        let rec_len = 10 + 4 * (window_len + TARGET_COUNT);
        let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
        for _ in 0..count {
            let b = read(rec_len)?;
            let floats: Vec<f32> = b[10..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let mut targets = [0.0f32; TARGET_COUNT];
            targets.copy_from_slice(&floats[window_len..]);
            records.push(WindowSample {
                subject_id: u32_of(&b[0..4]),
                first_beat_index: u32_of(&b[4..8]),
                pad_left: u16_of(&b[8..10]),
                input: floats[..window_len].to_vec(),
                targets,
            });
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(bad("trailing bytes after the last record"));
        }
        let ds = PreparedDataset {
            window_len,
            seed,
            split: FoldSplit {
                fold_id,
                train,
                val,
                test,
            },
            augmented,
            records,
        };
        ds.audit().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(ds)
    }
}
