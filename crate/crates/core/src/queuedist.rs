//! Per-modality feature queues, their distribution statistics, and the
//! Gaussian quality score used both for fusion weights and for gating
//! queue updates.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffcore::{gaussian_density, sq_dist};
use crate::error::{dim_err, Error, Result};
use crate::synthdata::Modality;

/// Lower bound applied to σ before evaluating the density.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Admission rule for a feature offered to a warmed queue.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnqueueGate {
    /// More probable than the average entry ([`FeatureQueue::should_enqueue`]).
    #[default]
    Mean,
    /// At least as probable as the least probable entry.
    Least,
    /// Every feature is admitted.
    Always,
}

impl EnqueueGate {
    pub fn as_str(self) -> &'static str {
        match self {
            EnqueueGate::Mean => "mean",
            EnqueueGate::Least => "least",
            EnqueueGate::Always => "always",
        }
    }
}

impl FromStr for EnqueueGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(EnqueueGate::Mean),
            "least" => Ok(EnqueueGate::Least),
            "always" => Ok(EnqueueGate::Always),
            _ => Err(Error::Config {
                key: "enqueue_gate".into(),
                reason: format!("unknown gate {s:?} (expected mean, least or always)"),
            }),
        }
    }
}

/// Mean vector and scalar spread of a set of features.
///
/// `std` is the root mean squared L2 distance to `mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionStats {
    pub mean: Vec<f64>,
    pub std: f64,
    pub count: usize,
}

impl DistributionStats {
    /// Statistics of a non-empty list of equal-length vectors, dividing by
    /// the number of rows.
    pub fn from_rows<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
        I::IntoIter: Clone,
    {
        let rows = rows.into_iter();
        let mut it = rows.clone();
        let first = it.next().ok_or(Error::EmptyQueue)?;
        let d = first.len();
        let mut mean = first.to_vec();
        let mut count = 1;
        for r in it {
            if r.len() != d {
                return Err(dim_err(&[d], &[r.len()]));
            }
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
            count += 1;
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let ss: f64 = rows.map(|r| sq_dist(r, &mean)).sum();
        Ok(Self {
            mean,
            std: (ss / count as f64).sqrt(),
            count,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn floored_std(&self) -> f64 {
        self.std.max(SIGMA_FLOOR)
    }
}

/// Density of `f` under an isotropic Gaussian with the given statistics.
///
/// σ is floored at [`SIGMA_FLOOR`]; the value is computed in log space.
pub fn gaussian_prob(f: &[f64], stats: &DistributionStats) -> Result<f64> {
    if f.len() != stats.dim() {
        return Err(dim_err(&[f.len()], &[stats.dim()]));
    }
    Ok(gaussian_density(sq_dist(f, &stats.mean), stats.floored_std()))
}

/// Fixed-capacity FIFO of detached feature snapshots for one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureQueue {
    modality: Modality,
    capacity: usize,
    dim: usize,
    entries: VecDeque<Vec<f64>>,
}

impl FeatureQueue {
    pub fn new(modality: Modality, capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(Error::Config {
                key: "queue".into(),
                reason: "capacity and dimension must be positive".into(),
            });
        }
        Ok(Self {
            modality,
            capacity,
            dim,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    /// Entries from oldest to newest.
    pub fn entries(&self) -> impl ExactSizeIterator<Item = &[f64]> + Clone {
        self.entries.iter().map(Vec::as_slice)
    }

    /// Appends a copy of `f`, evicting the oldest entry when over capacity.
    pub fn enqueue(&mut self, f: &[f64]) -> Result<()> {
        if f.len() != self.dim {
            return Err(dim_err(&[self.dim], &[f.len()]));
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(f.to_vec());
        Ok(())
    }

    pub fn stats(&self) -> Result<DistributionStats> {
        DistributionStats::from_rows(self.entries())
    }

    /// Mean density of the queue's own entries under its statistics.
    pub fn mean_entry_prob(&self, stats: &DistributionStats) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyQueue);
        }
        let mut total = 0.0;
        for e in self.entries() {
            total += gaussian_prob(e, stats)?;
        }
        Ok(total / self.len() as f64)
    }

    /// Whether `f` is strictly more probable than the average queue entry.
    pub fn should_enqueue(&self, f: &[f64]) -> Result<bool> {
        let stats = self.stats()?;
        let p = gaussian_prob(f, &stats)?;
        Ok(p > self.mean_entry_prob(&stats)?)
    }

    /// Whether `f` is at least as probable as the least probable entry.
    pub fn within_support(&self, f: &[f64]) -> Result<bool> {
        let stats = self.stats()?;
        let p = gaussian_prob(f, &stats)?;
        let mut least = f64::INFINITY;
        for e in self.entries() {
            least = least.min(gaussian_prob(e, &stats)?);
        }
        Ok(p >= least)
    }

    /// Text checkpoint: header, then one entry per row, oldest first.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# drf-queue v1\n");
        let _ = writeln!(out, "modality {}", self.modality.as_str());
        let _ = writeln!(out, "dim {}", self.dim);
        let _ = writeln!(out, "capacity {}", self.capacity);
        let _ = writeln!(out, "count {}", self.len());
        for e in &self.entries {
            let row: Vec<String> = e.iter().map(f64::to_string).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (i, line) = lines.next().ok_or(Error::Parse {
                line: 0,
                reason: format!("missing {key}"),
            })?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((i + 1, v.trim().to_string())),
                _ => Err(Error::Parse {
                    line: i + 1,
                    reason: format!("expected {key}"),
                }),
            }
        };
        let parse_usize = |(line, v): (usize, String)| {
            v.parse::<usize>().map_err(|e| Error::Parse {
                line,
                reason: e.to_string(),
            })
        };
        let (mline, m) = field("modality")?;
        let modality = m.parse().map_err(|_| Error::Parse {
            line: mline,
            reason: format!("bad modality {m:?}"),
        })?;
        let dim = parse_usize(field("dim")?)?;
        let capacity = parse_usize(field("capacity")?)?;
        let (cline, c) = field("count")?;
        let count = parse_usize((cline, c))?;
        let mut q = Self::new(modality, capacity, dim)?;
        for (i, line) in lines {
            let row = line
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        reason: e.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != dim {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("expected {dim} values, found {}", row.len()),
                });
            }
            if q.len() == capacity {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: "more entries than capacity".into(),
                });
            }
            q.entries.push_back(row);
        }
        if q.len() != count {
            return Err(Error::Parse {
                line: cline,
                reason: format!("count {count} but {} entries", q.len()),
            });
        }
        Ok(q)
    }
}

/// The image and text queues of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuePair {
    pub image: FeatureQueue,
    pub text: FeatureQueue,
}

impl QueuePair {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        Ok(Self {
            image: FeatureQueue::new(Modality::Image, capacity, dim)?,
            text: FeatureQueue::new(Modality::Text, capacity, dim)?,
        })
    }

    pub fn get(&self, m: Modality) -> &FeatureQueue {
        match m {
            Modality::Image => &self.image,
            Modality::Text => &self.text,
        }
    }

    pub fn get_mut(&mut self, m: Modality) -> &mut FeatureQueue {
        match m {
            Modality::Image => &mut self.image,
            Modality::Text => &mut self.text,
        }
    }

    /// Both queues hold at least `n_min` entries.
    pub fn warmed(&self, n_min: usize) -> bool {
        self.image.len() >= n_min.max(1) && self.text.len() >= n_min.max(1)
    }

    /// `(image, text)` statistics.
    pub fn stats(&self) -> Result<(DistributionStats, DistributionStats)> {
        Ok((self.image.stats()?, self.text.stats()?))
    }

    /// Quality-gated update: below `n_min` entries the gate is bypassed.
    /// Returns whether `f` was stored.
    pub fn offer(&mut self, m: Modality, f: &[f64], n_min: usize, gate: EnqueueGate) -> Result<bool> {
        let q = self.get_mut(m);
        let admit = q.len() < n_min
            || q.is_empty()
            || match gate {
                EnqueueGate::Mean => q.should_enqueue(f)?,
                EnqueueGate::Least => q.within_support(f)?,
                EnqueueGate::Always => true,
            };
        if admit {
            q.enqueue(f)?;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}
