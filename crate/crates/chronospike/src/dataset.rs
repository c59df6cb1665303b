//! Binary dataset file and text export of decision trees.
//!
//! Dataset layout, little endian:
//!
//! ```text
//! magic     8 bytes  "CSPKDS01"
//! steps     u64
//! features  u32
//! levels    u8       labels lie in 0..=levels
//! pad       3 bytes  zero
//! labels    steps bytes
//! columns   features × ceil(steps / 8) bytes, one bit-packed column per
//!           feature, bit (t % 8) of byte (t / 8) set when the feature is on
//!           at step t
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use chronospike_core::baselines::{Dataset, DecisionTree, Node};

pub const MAGIC: &[u8; 8] = b"CSPKDS01";

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let levels = data.classes().checked_sub(1).context("dataset has no classes")?;
    ensure!(levels <= u8::MAX as usize, "too many classes");
    let steps = data.len();
    let stride = steps.div_ceil(8);
    let mut columns = vec![0u8; data.feature_count() * stride];
    for t in 0..steps {
        for &f in data.row(t) {
            columns[f as usize * stride + t / 8] |= 1 << (t % 8);
        }
    }
    let mut out = Vec::with_capacity(24 + steps + columns.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(steps as u64).to_le_bytes());
    out.extend_from_slice(&(data.feature_count() as u32).to_le_bytes());
    out.push(levels as u8);
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(data.labels());
    out.extend_from_slice(&columns);
    let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;
    ensure!(bytes.len() >= 24 && &bytes[..8] == MAGIC, "{}: not a dataset file", path.display());
    let steps = u64::from_le_bytes(bytes[8..16].try_into()?) as usize;
    let features = u32::from_le_bytes(bytes[16..20].try_into()?) as usize;
    let levels = bytes[20];
    let stride = steps.div_ceil(8);
    let expected = 24 + steps + features * stride;
    if bytes.len() != expected {
        bail!("{}: {} bytes, header implies {expected}", path.display(), bytes.len());
    }
    let labels = &bytes[24..24 + steps];
    let columns = &bytes[24 + steps..];
    let mut data = Dataset::new(features, levels as usize + 1);
    let mut row: Vec<u16> = Vec::new();
    for (t, &label) in labels.iter().enumerate() {
        row.clear();
        row.extend((0..features).filter(|f| columns[f * stride + t / 8] >> (t % 8) & 1 == 1).map(|f| f as u16));
        data.push_row(&row, label).with_context(|| format!("{}: step {t}", path.display()))?;
    }
    Ok(data)
}

/// Indented text rendering of a tree, one node per line.
pub fn export_tree(tree: &DecisionTree, feature_name: impl Fn(u16) -> String) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# nodes {} leaves {} depth {}", tree.nodes.len(), tree.leaves(), tree.depth());
    let mut stack = vec![(0usize, 0usize, String::from("root"))];
    while let Some((i, depth, edge)) = stack.pop() {
        let pad = "  ".repeat(depth);
        match &tree.nodes[i] {
            Node::Leaf { value, count } => {
                let _ = writeln!(out, "{pad}{edge}: leaf value={value:.6} rows={count}");
            }
            Node::Split { feature, gain, absent, present } => {
                let _ = writeln!(out, "{pad}{edge}: split {} gain={gain:.6}", feature_name(*feature));
                stack.push((*present as usize, depth + 1, "on".into()));
                stack.push((*absent as usize, depth + 1, "off".into()));
            }
        }
    }
    out
}
