//! Decision-tree baseline on the same sensory spikes the network sees.
//!
//! Each row is one time step: the set of input nodes that fired (sparse
//! binary features) and the ground-truth proximity `P(t)` as class label.
//! Splits maximise information gain over the `N + 1` classes; ties go to the
//! lowest feature index. A split is admissible only if both children keep at
//! least `min_leaf` rows.

use alloc::vec::Vec;
use core::ops::Range;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoding::{encode_active, EncodedEpisode, EncoderLayout, INPUT_COUNT};
use crate::prediction::{ground_truth, r_squared};
use crate::{Error, NeuronId, Result, Time};

/// What a dataset row records about the inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FeatureMode {
    /// Input nodes that spiked at this step.
    #[default]
    Spikes,
    /// Input nodes whose receptive field holds the current state, whether or
    /// not they spiked.
    Active,
}

/// Rows of sparse binary features with class labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    offsets: Vec<u32>,
    features: Vec<u16>,
    labels: Vec<u8>,
    feature_count: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(feature_count: usize, classes: usize) -> Self {
        Self { offsets: alloc::vec![0], features: Vec::new(), labels: Vec::new(), feature_count, classes }
    }

    /// Append a row. Feature indices must be distinct and below the feature
    /// count.
    pub fn push_row(&mut self, active: &[u16], label: u8) -> Result<()> {
        if (label as usize) >= self.classes {
            return Err(Error::param("label", "class index out of range"));
        }
        if active.iter().any(|&f| f as usize >= self.feature_count) {
            return Err(Error::param("feature", "index out of range"));
        }
        self.features.extend_from_slice(active);
        self.offsets.push(self.features.len() as u32);
        self.labels.push(label);
        Ok(())
    }

    /// Replay the input spikes a network run with `encoder_seed` would see,
    /// labelled with `P(t)`.
    pub fn from_episode(
        episode: &EncodedEpisode,
        layout: &EncoderLayout,
        encoder_seed: u64,
        steps: usize,
        levels: u8,
        interval: Time,
    ) -> Result<Self> {
        layout.validate()?;
        if episode.len() < steps {
            return Err(Error::LengthMismatch { left: episode.len(), right: steps });
        }
        let rewards: Vec<Time> =
            episode.rewards.iter().copied().filter(|&t| (t as usize) < steps).collect();
        let labels = ground_truth(&rewards, steps, levels, interval);
        let mut rng = ChaCha8Rng::seed_from_u64(encoder_seed);
        let mut data = Self::new(INPUT_COUNT, levels as usize + 1);
        let mut fired: Vec<NeuronId> = Vec::new();
        let mut row: Vec<u16> = Vec::new();
        for (t, &label) in labels.iter().enumerate() {
            fired.clear();
            encode_active(layout, episode.active[t], &mut rng, t as Time, &mut fired);
            row.clear();
            row.extend(fired.iter().map(|&n| n as u16));
            data.push_row(&row, label)?;
        }
        Ok(data)
    }

    /// Rows of active-node indicators labelled with `P(t)`.
    pub fn from_active_nodes(episode: &EncodedEpisode, steps: usize, levels: u8, interval: Time) -> Result<Self> {
        if episode.len() < steps {
            return Err(Error::LengthMismatch { left: episode.len(), right: steps });
        }
        let rewards: Vec<Time> =
            episode.rewards.iter().copied().filter(|&t| (t as usize) < steps).collect();
        let labels = ground_truth(&rewards, steps, levels, interval);
        let mut data = Self::new(INPUT_COUNT, levels as usize + 1);
        let mut row: Vec<u16> = Vec::new();
        for (t, &label) in labels.iter().enumerate() {
            row.clear();
            row.extend(episode.active[t].iter().map(|n| n as u16));
            row.sort_unstable();
            data.push_row(&row, label)?;
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[u16] {
        &self.features[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn has(&self, i: usize, feature: u16) -> bool {
        self.row(i).contains(&feature)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LeafMode {
    Mean,
    Mode,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TreeParams {
    pub max_depth: u32,
    pub min_leaf: usize,
    pub leaf: LeafMode,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 20, min_leaf: 50, leaf: LeafMode::Mean }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Node {
    Leaf { value: f64, count: u32 },
    /// Rows with `feature` go to `present`, the rest to `absent`.
    Split { feature: u16, gain: f64, absent: u32, present: u32 },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, row: &[u16]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, absent, present, .. } => {
                    i = if row.contains(&feature) { present } else { absent } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> u32 {
        fn go(nodes: &[Node], i: usize) -> u32 {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { absent, present, .. } => {
                    1 + go(nodes, absent as usize).max(go(nodes, present as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Shannon entropy in bits of a class histogram.
pub fn entropy(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * libm::log2(p)
        })
        .sum()
}

/// Information gain of every feature on `rows`; `None` where a child would
/// hold fewer than `min_leaf` rows.
pub fn split_gains(data: &Dataset, rows: &[u32], min_leaf: usize) -> Vec<Option<f64>> {
    let k = data.classes;
    let mut present = alloc::vec![0u64; data.feature_count * k];
    let mut total = alloc::vec![0u64; k];
    for &r in rows {
        let label = data.label(r as usize) as usize;
        total[label] += 1;
        for &f in data.row(r as usize) {
            present[f as usize * k + label] += 1;
        }
    }
    let n = rows.len() as u64;
    let h = entropy(&total);
    let mut absent = alloc::vec![0u64; k];
    (0..data.feature_count)
        .map(|f| {
            let yes = &present[f * k..(f + 1) * k];
            let n_yes: u64 = yes.iter().sum();
            let n_no = n - n_yes;
            if (n_yes as usize) < min_leaf || (n_no as usize) < min_leaf || n_yes == 0 || n_no == 0 {
                return None;
            }
            for c in 0..k {
                absent[c] = total[c] - yes[c];
            }
            let child = (n_yes as f64 * entropy(yes) + n_no as f64 * entropy(&absent)) / n as f64;
            Some(h - child)
        })
        .collect()
}

/// Admissible feature with the largest gain, lowest index on ties.
pub fn best_split(data: &Dataset, rows: &[u32], min_leaf: usize) -> Option<(u16, f64)> {
    let mut best: Option<(u16, f64)> = None;
    for (f, g) in split_gains(data, rows, min_leaf).into_iter().enumerate() {
        if let Some(g) = g {
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((f as u16, g));
            }
        }
    }
    best
}

fn leaf_value(data: &Dataset, rows: &[u32], mode: LeafMode) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    match mode {
        LeafMode::Mean => {
            rows.iter().map(|&r| data.label(r as usize) as f64).sum::<f64>() / rows.len() as f64
        }
        LeafMode::Mode => {
            let mut counts = alloc::vec![0u64; data.classes];
            for &r in rows {
                counts[data.label(r as usize) as usize] += 1;
            }
            let mut best = 0;
            for c in 1..counts.len() {
                if counts[c] > counts[best] {
                    best = c;
                }
            }
            best as f64
        }
    }
}

/// Gains at or below this count as no improvement.
const MIN_GAIN: f64 = 1e-12;

/// Grow a tree on `rows` of `data`.
pub fn train_tree(data: &Dataset, rows: Range<usize>, params: &TreeParams) -> Result<DecisionTree> {
    if rows.start >= rows.end || rows.end > data.len() {
        return Err(Error::BadWindow { start: rows.start, end: rows.end, len: data.len() });
    }
    if params.min_leaf == 0 {
        return Err(Error::param("min_leaf", "must be at least 1"));
    }
    let mut idx: Vec<u32> = rows.map(|r| r as u32).collect();
    let mut nodes: Vec<Node> = Vec::new();
    // (node slot, index range, depth)
    let mut stack: Vec<(usize, usize, usize, u32)> = Vec::new();
    nodes.push(Node::Leaf { value: 0.0, count: 0 });
    stack.push((0, 0, idx.len(), 0));
    while let Some((slot, lo, hi, depth)) = stack.pop() {
        let part = &mut idx[lo..hi];
        let split = if depth < params.max_depth {
            best_split(data, part, params.min_leaf).filter(|&(_, g)| g > MIN_GAIN)
        } else {
            None
        };
        match split {
            None => {
                nodes[slot] = Node::Leaf {
                    value: leaf_value(data, part, params.leaf),
                    count: part.len() as u32,
                };
            }
            Some((feature, gain)) => {
                // Stable partition: absent rows first.
                let (mut no, yes): (Vec<u32>, Vec<u32>) =
                    part.iter().partition(|&&r| !data.has(r as usize, feature));
                let mid = lo + no.len();
                no.extend_from_slice(&yes);
                part.copy_from_slice(&no);
                let absent = nodes.len();
                nodes.push(Node::Leaf { value: 0.0, count: 0 });
                let present = nodes.len();
                nodes.push(Node::Leaf { value: 0.0, count: 0 });
                nodes[slot] =
                    Node::Split { feature, gain, absent: absent as u32, present: present as u32 };
                stack.push((present, mid, hi, depth + 1));
                stack.push((absent, lo, mid, depth + 1));
            }
        }
    }
    Ok(DecisionTree { nodes })
}

/// Tree predictions for `rows`.
pub fn predict_rows(tree: &DecisionTree, data: &Dataset, rows: Range<usize>) -> Vec<f64> {
    rows.map(|r| tree.predict(data.row(r))).collect()
}

/// R² of the tree's predictions against the labels on `rows`.
pub fn evaluate_tree(tree: &DecisionTree, data: &Dataset, rows: Range<usize>) -> Result<f64> {
    if rows.start >= rows.end || rows.end > data.len() {
        return Err(Error::BadWindow { start: rows.start, end: rows.end, len: data.len() });
    }
    let pred = predict_rows(tree, data, rows.clone());
    let truth: Vec<f64> = data.labels[rows].iter().map(|&l| l as f64).collect();
    r_squared(&truth, &pred, 0, truth.len())
}
