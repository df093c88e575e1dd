//! Annotated-signal file pair and subject-profile tables.
//!
//! `<name>.sig` holds the samples: an 18-byte little-endian header
//! (`"IBSG"`, version `u16`, fs `u32`, sample count `u64`) followed by `f32`
//! samples. `<name>.rpk` holds one decimal R-peak sample index per line.
//! The subject id is taken from the trailing digits of the file stem
//! (`subject_07.sig` is subject 7).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::signalgen::{AnnotatedSignal, PulseTemplate, SubjectProfile};

pub const SIG_MAGIC: &[u8; 4] = b"IBSG";
pub const SIG_VERSION: u16 = 1;
pub const SIG_HEADER_LEN: usize = 18;

pub fn signal_stem(subject_id: u32) -> String {
    format!("subject_{subject_id:02}")
}

pub fn encode_sig(signal: &AnnotatedSignal) -> Vec<u8> {
    let mut out = Vec::with_capacity(SIG_HEADER_LEN + 4 * signal.len());
    out.extend_from_slice(SIG_MAGIC);
    out.extend_from_slice(&SIG_VERSION.to_le_bytes());
    out.extend_from_slice(&signal.fs().to_le_bytes());
    out.extend_from_slice(&(signal.len() as u64).to_le_bytes());
    for &v in signal.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a `.sig` payload into `(fs, samples)`.
pub fn decode_sig(bytes: &[u8], path: &Path) -> Result<(u32, Vec<f32>)> {
    if bytes.len() < SIG_HEADER_LEN {
        return Err(Error::format(path, "truncated header"));
    }
    if &bytes[..4] != SIG_MAGIC {
        return Err(Error::format(path, "bad magic, expected IBSG"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SIG_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {version}"),
        ));
    }
    let fs = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap()) as usize;
    let body = &bytes[SIG_HEADER_LEN..];
    if body.len() != count * 4 {
        return Err(Error::format(
            path,
            format!(
                "header announces {count} samples, body holds {} bytes",
                body.len()
            ),
        ));
    }
    let samples = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((fs, samples))
}

pub fn encode_rpk(r_peaks: &[usize]) -> String {
    let mut s = String::with_capacity(r_peaks.len() * 7);
    for p in r_peaks {
        s.push_str(&p.to_string());
        s.push('\n');
    }
    s
}

pub fn decode_rpk(text: &str, path: &Path) -> Result<Vec<usize>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<usize>()
                .map_err(|_| Error::format(path, format!("line {}: {l:?} is not an index", i + 1)))
        })
        .collect()
}

/// Writes `<dir>/<stem>.sig` and `<dir>/<stem>.rpk`; returns the `.sig` path.
pub fn write_signal(dir: &Path, stem: &str, signal: &AnnotatedSignal) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let sig = dir.join(format!("{stem}.sig"));
    fs::write(&sig, encode_sig(signal))?;
    fs::write(
        dir.join(format!("{stem}.rpk")),
        encode_rpk(signal.r_peaks()),
    )?;
    Ok(sig)
}

/// Reads the pair sharing `sig_path`'s stem.
pub fn read_signal(sig_path: &Path) -> Result<AnnotatedSignal> {
    let bytes = fs::read(sig_path)?;
    let (fs, samples) = decode_sig(&bytes, sig_path)?;
    let rpk_path = sig_path.with_extension("rpk");
    let text = fs::read_to_string(&rpk_path)?;
    let peaks = decode_rpk(&text, &rpk_path)?;
    let id = subject_id_from_path(sig_path)?;
    AnnotatedSignal::new(samples, fs, peaks, id).map_err(|e| Error::format(sig_path, e.to_string()))
}

pub fn subject_id_from_path(path: &Path) -> Result<u32> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::format(path, "file name is not UTF-8"))?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(char::is_ascii_digit)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits
        .parse()
        .map_err(|_| Error::format(path, "file stem does not end in a subject id"))
}

/// Every `.sig` file in `dir`, sorted by path.
pub fn list_signals(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "sig"))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn read_signal_dir(dir: &Path) -> Result<Vec<AnnotatedSignal>> {
    list_signals(dir)?.iter().map(|p| read_signal(p)).collect()
}

const PROFILE_COLUMNS: [&str; 11] = [
    "subject_id",
    "ibi_mean",
    "ibi_std",
    "ibi_min",
    "ibi_max",
    "ibi_autocorr",
    "template",
    "pulse_width",
    "noise_std",
    "duration",
    "fs",
];

/// Profile table rows paired with their sampling rate.
pub fn write_profiles(path: &Path, profiles: &[SubjectProfile], fs: u32) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", PROFILE_COLUMNS.join(","))?;
    for p in profiles {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.subject_id,
            p.ibi_mean,
            p.ibi_std,
            p.ibi_min,
            p.ibi_max,
            p.ibi_autocorr,
            p.template,
            p.pulse_width,
            p.noise_std,
            p.duration,
            fs
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a profile table. Columns after `subject_id` may appear in any order
/// and any may be omitted, falling back to [`SubjectProfile::default`]
/// (and 500 Hz for `fs`).
pub fn parse_profiles(text: &str, path: &Path) -> Result<Vec<(SubjectProfile, u32)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty profile table"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    for c in &columns {
        if !PROFILE_COLUMNS.contains(c) {
            return Err(Error::format(path, format!("unknown column {c:?}")));
        }
    }
    if !columns.contains(&"subject_id") {
        return Err(Error::format(path, "missing subject_id column"));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::format(
                path,
                format!("line {}: expected {} fields", lineno + 1, columns.len()),
            ));
        }
        let bad = |c: &str| Error::format(path, format!("line {}: bad {c}", lineno + 1));
        let mut p = SubjectProfile::default();
        let mut fs = 500u32;
        for (&c, &v) in columns.iter().zip(&fields) {
            let num = || v.parse::<f64>().map_err(|_| bad(c));
            match c {
                "subject_id" => p.subject_id = v.parse().map_err(|_| bad(c))?,
                "ibi_mean" => p.ibi_mean = num()?,
                "ibi_std" => p.ibi_std = num()?,
                "ibi_min" => p.ibi_min = num()?,
                "ibi_max" => p.ibi_max = num()?,
                "ibi_autocorr" => p.ibi_autocorr = num()?,
                "template" => p.template = v.parse::<PulseTemplate>().map_err(|_| bad(c))?,
                "pulse_width" => p.pulse_width = num()?,
                "noise_std" => p.noise_std = num()?,
                "duration" => p.duration = num()?,
                "fs" => fs = v.parse().map_err(|_| bad(c))?,
                _ => unreachable!(),
            }
        }
        p.validate()
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        out.push((p, fs));
    }
    Ok(out)
}

pub fn read_profiles(path: &Path) -> Result<Vec<(SubjectProfile, u32)>> {
    parse_profiles(&fs::read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalgen::synthesize_subject;

    #[test]
    fn header_layout() {
        let s = AnnotatedSignal::new(vec![1.0, -2.5], 500, vec![0], 3).unwrap();
        let b = encode_sig(&s);
        assert_eq!(b.len(), SIG_HEADER_LEN + 8);
        assert_eq!(&b[..4], b"IBSG");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[6..10], &500u32.to_le_bytes());
        assert_eq!(&b[10..18], &2u64.to_le_bytes());
        assert_eq!(&b[18..22], &1.0f32.to_le_bytes());
    }

    #[test]
    fn pair_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = SubjectProfile {
            subject_id: 7,
            duration: 10.0,
            ..SubjectProfile::default()
        };
        let s = synthesize_subject(&p, 500, 1).unwrap();
        let path = write_signal(dir.path(), &signal_stem(7), &s).unwrap();
        assert!(path.ends_with("subject_07.sig"));
        assert_eq!(read_signal(&path).unwrap(), s);
        assert_eq!(list_signals(dir.path()).unwrap(), vec![path]);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let p = Path::new("x.sig");
        assert!(decode_sig(b"IBSG", p).is_err());
        let s = AnnotatedSignal::new(vec![1.0; 4], 500, vec![], 1).unwrap();
        let mut b = encode_sig(&s);
        b[0] = b'X';
        assert!(decode_sig(&b, p).is_err());
        let mut b = encode_sig(&s);
        b.pop();
        assert!(decode_sig(&b, p).is_err());
        assert!(decode_rpk("1\n2\nthree\n", p).is_err());
        assert_eq!(decode_rpk("1\n\n20\n", p).unwrap(), vec![1, 20]);
    }

    #[test]
    fn subject_ids_from_stems() {
        assert_eq!(
            subject_id_from_path(Path::new("a/subject_11.sig")).unwrap(),
            11
        );
        assert_eq!(subject_id_from_path(Path::new("rec3.sig")).unwrap(), 3);
        assert!(subject_id_from_path(Path::new("rec.sig")).is_err());
    }

    #[test]
    fn profile_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profiles.csv");
        let cohort = SubjectProfile::default_cohort(120.0);
        write_profiles(&path, &cohort, 500).unwrap();
        let back = read_profiles(&path).unwrap();
        assert_eq!(back.len(), 11);
        for ((p, fs), q) in back.iter().zip(&cohort) {
            assert_eq!(p, q);
            assert_eq!(*fs, 500);
        }
    }

    #[test]
    fn partial_profile_table_uses_defaults() {
        let text = "# cohort\nsubject_id,ibi_mean,template\n4,0.8,biphasic\n";
        let rows = parse_profiles(text, Path::new("p.csv")).unwrap();
        assert_eq!(rows[0].0.subject_id, 4);
        assert_eq!(rows[0].0.template, PulseTemplate::Biphasic);
        assert_eq!(rows[0].0.ibi_std, SubjectProfile::default().ibi_std);
        assert!(parse_profiles("subject_id,bogus\n1,2\n", Path::new("p")).is_err());
        assert!(parse_profiles("subject_id,ibi_mean\n1,0.1\n", Path::new("p")).is_err());
    }
}
