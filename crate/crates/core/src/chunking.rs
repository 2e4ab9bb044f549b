//! Overlapping fixed-size windows over a context too long for the QA model.
//!
//! Token units are whitespace-delimited tokens, not the model's subwords;
//! `margin` shrinks the window to leave subword headroom.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::whitespace_runs;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("window size must be positive")]
    ZeroWindow,
    #[error("stride must be between 1 and the window size ({window}), got {stride}")]
    BadStride { stride: usize, window: usize },
    #[error("margin must be in (0, 1], got {0}")]
    BadMargin(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub context_id: String,
    pub chunk_index: usize,
    /// Half-open token range into the context.
    pub token_span: (usize, usize),
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    pub window_size: usize,
    pub stride: usize,
    pub margin: f64,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            window_size: 384,
            stride: 128,
            margin: 0.7,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.window_size == 0 {
            return Err(ChunkError::ZeroWindow);
        }
        if self.stride == 0 || self.stride > self.window_size {
            return Err(ChunkError::BadStride {
                stride: self.stride,
                window: self.window_size,
            });
        }
        if !(self.margin > 0.0 && self.margin <= 1.0) {
            return Err(ChunkError::BadMargin(self.margin.to_string()));
        }
        Ok(())
    }

    /// Window after applying the margin, never below one token.
    pub fn effective_window(&self) -> usize {
        ((self.window_size as f64 * self.margin).floor() as usize).max(1)
    }

    /// Stride clamped so the shrunken window still leaves no gaps.
    pub fn effective_stride(&self) -> usize {
        self.stride.min(self.effective_window()).max(1)
    }

    pub fn chunk(&self, context_id: &str, context: &str) -> Result<Vec<Chunk>, ChunkError> {
        self.validate()?;
        sliding_window(context_id, context, self.effective_window(), self.effective_stride())
    }
}

/// Number of windows needed for `total` tokens.
pub fn chunk_count(total: usize, window: usize, stride: usize) -> usize {
    if total <= window {
        1
    } else {
        (total - window).div_ceil(stride) + 1
    }
}

pub fn sliding_window(context_id: &str, context: &str, window: usize, stride: usize) -> Result<Vec<Chunk>, ChunkError> {
    if window == 0 {
        return Err(ChunkError::ZeroWindow);
    }
    if stride == 0 || stride > window {
        return Err(ChunkError::BadStride { stride, window });
    }
    let tokens = whitespace_runs(context);
    let total = tokens.len();
    let count = chunk_count(total, window, stride);
    Ok((0..count)
        .map(|i| {
            let start = i * stride;
            let end = (start + window).min(total);
            let text = if start < end {
                context[tokens[start].start..tokens[end - 1].end].to_string()
            } else {
                String::new()
            };
            Chunk {
                context_id: context_id.to_string(),
                chunk_index: i,
                token_span: (start, end),
                text,
            }
        })
        .collect())
}
